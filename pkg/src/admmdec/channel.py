"""AWGN/BPSK channel simulation, LLR computation, and labeled sample sets.

Conventions, fixed package-wide:

* BPSK maps bit 0 -> +1 and bit 1 -> -1, so positive LLRs favor bit 0.
* ``snr_db`` is Eb/N0 by default, with rate-adjusted noise variance
  1 / (2 * rate * 10^(snr/10)).  Pass ``convention="esn0"`` for the
  per-symbol variant 1 / (2 * 10^(snr/10)).  The choice shifts benchmark
  curves horizontally, so it is recorded in every output.
* Randomness is counter-based: frame i of a run seeded with s draws from an
  independent Philox stream keyed by (s, i).  Results are therefore
  reproducible regardless of batching or worker count.  Within a frame the
  message bits (random-message mode) are drawn before the noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codes import ParityCheckMatrix

# -- GF(2) linear algebra ---------------------------------------------------


def gf2_row_reduce(M: np.ndarray):
    """Row-reduce a binary matrix in place over GF(2).

    Returns ``(R, pivot_cols)`` where R is in reduced row-echelon form and
    ``pivot_cols`` lists the pivot column of each nonzero row.
    """
    R = (np.asarray(M, dtype=np.uint8) & 1).copy()
    rows, cols = R.shape
    pivot_cols = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hits = np.nonzero(R[r:, c])[0]
        if hits.size == 0:
            continue
        pr = r + int(hits[0])
        if pr != r:
            R[[r, pr]] = R[[pr, r]]
        others = np.nonzero(R[:, c])[0]
        others = others[others != r]
        R[others] ^= R[r]
        pivot_cols.append(c)
        r += 1
    return R, pivot_cols


def gf2_rank(M: np.ndarray) -> int:
    return len(gf2_row_reduce(M)[1])


class SystematicEncoder:
    """Encoder for a full-rank parity-check matrix, built by GF(2) elimination.

    Message bits occupy the non-pivot columns of the reduced matrix; pivot
    columns carry the parity bits.  Codewords come back in the original
    column order, so labels line up with the LLR coordinates.
    """

    def __init__(self, H: ParityCheckMatrix):
        dense = H.dense()
        R, pivots = gf2_row_reduce(dense)
        if len(pivots) < H.n_checks:
            raise ValueError(
                "parity-check matrix is rank-deficient; random-message encoding "
                "is unavailable (use all-zero mode)"
            )
        self.n = H.n_vars
        self.k = H.n_vars - H.n_checks
        self.pivot_cols = np.array(pivots, dtype=np.int64)
        mask = np.ones(self.n, dtype=bool)
        mask[self.pivot_cols] = False
        self.message_cols = np.nonzero(mask)[0]
        # parity of pivot j is the GF(2) inner product of B[j] with the message
        self.B = R[: H.n_checks][:, self.message_cols].astype(np.uint8)

    def encode(self, messages: np.ndarray) -> np.ndarray:
        m = np.asarray(messages, dtype=np.uint8)
        single = m.ndim == 1
        m = np.atleast_2d(m)
        if m.shape[1] != self.k:
            raise ValueError(f"messages have length {m.shape[1]}, expected {self.k}")
        x = np.zeros((m.shape[0], self.n), dtype=np.uint8)
        x[:, self.message_cols] = m
        x[:, self.pivot_cols] = (m @ self.B.T) & 1
        return x[0] if single else x


# -- channel ----------------------------------------------------------------


def noise_variance(snr_db: float, rate: float, convention: str = "ebn0") -> float:
    if convention == "ebn0":
        return 1.0 / (2.0 * rate * 10.0 ** (snr_db / 10.0))
    if convention == "esn0":
        return 1.0 / (2.0 * 10.0 ** (snr_db / 10.0))
    raise ValueError(f"unknown SNR convention {convention!r}")


def llr_awgn_bpsk(y: np.ndarray, noise_var: float) -> np.ndarray:
    """Per-sample LLR log Pr(y|bit=0)/Pr(y|bit=1) for BPSK over AWGN: 2y/var."""
    if noise_var <= 0:
        raise ValueError(f"noise_var must be positive, got {noise_var}")
    return 2.0 * np.asarray(y, dtype=np.float64) / noise_var


def modulate(x: np.ndarray) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(x, dtype=np.float64)


def frame_rng(seed: int, index: int) -> np.random.Generator:
    """Independent, reproducible stream for one frame of one run."""
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class ChannelSample:
    """One labeled decoding problem: transmitted bits x and received LLRs v."""

    x: np.ndarray
    v: np.ndarray
    snr_db: float
    seed: tuple | None = None


def make_samples(
    code: ParityCheckMatrix,
    n_samples: int,
    snr_db: float,
    rate: float | None = None,
    codeword_mode: str = "all-zero",
    seed: int = 0,
    convention: str = "ebn0",
    start_index: int = 0,
) -> list[ChannelSample]:
    """Generate labeled samples: encode, modulate, add noise, compute LLRs.

    Deterministic given ``seed``: frame i uses the stream keyed (seed,
    start_index + i) regardless of how generation is batched.
    """
    if codeword_mode not in ("all-zero", "random-message"):
        raise ValueError(f"unknown codeword_mode {codeword_mode!r}")
    if rate is None:
        rate = (code.n_vars - code.n_checks) / code.n_vars
    var = noise_variance(snr_db, rate, convention)
    sigma = float(np.sqrt(var))
    encoder = SystematicEncoder(code) if codeword_mode == "random-message" else None

    samples = []
    for i in range(n_samples):
        idx = start_index + i
        rng = frame_rng(seed, idx)
        if encoder is not None:
            msg = rng.integers(0, 2, size=encoder.k, dtype=np.uint8)
            x = encoder.encode(msg)
        else:
            x = np.zeros(code.n_vars, dtype=np.uint8)
        y = modulate(x) + sigma * rng.standard_normal(code.n_vars)
        samples.append(ChannelSample(x=x, v=llr_awgn_bpsk(y, var), snr_db=snr_db, seed=(seed, idx)))
    return samples


def sample_matrix(samples: list[ChannelSample]):
    """Stack a sample list into (V, X) arrays of shape (n, N)."""
    V = np.stack([s.v for s in samples])
    X = np.stack([s.x for s in samples])
    return V, X


# -- columnar text export ----------------------------------------------------
#
# One sample per line: snr_db, the label bits as a 0/1 string, then the N
# LLR values, comma-separated.  Lines starting with '#' are comments.


def save_samples(samples: list[ChannelSample], path) -> None:
    with open(path, "w", encoding="ascii") as f:
        f.write("# snr_db,label,llr_0..llr_{N-1}\n")
        for s in samples:
            bits = "".join(str(int(b)) for b in s.x)
            llrs = ",".join(repr(float(v)) for v in s.v)
            f.write(f"{s.snr_db!r},{bits},{llrs}\n")


def load_samples(path) -> list[ChannelSample]:
    samples = []
    with open(path, "r", encoding="ascii") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split(",")
            snr = float(fields[0])
            x = np.array([int(c) for c in fields[1]], dtype=np.uint8)
            v = np.array([float(t) for t in fields[2:]], dtype=np.float64)
            if v.size != x.size:
                raise ValueError(f"record has {x.size} label bits but {v.size} LLRs")
            samples.append(ChannelSample(x=x, v=v, snr_db=snr))
    return samples
