"""Penalized ADMM iterations over a cascaded constraint system.

One stage with penalty parameter mu (possibly stage-dependent) is

    u <- argmin_[0,1]  0.5*mu*e_i*u_i^2 + g(u_i) + (q + A't(y + mu*(z-b)))_i u_i
    z <- max(0, b - A u - y/mu)
    y <- y + mu*(A u + z - b)

starting from the symmetric point u = 0.5, y = 0, z = max(0, b - A u).
The first n_orig coordinates of the final u, thresholded at 0.5 (ties up),
are the decoded bits.  The same stage function backs both plain decoding and
the unrolled trainable network, so a network loaded with some parameters and
the decoder run with the same parameters produce bit-identical outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cascade import CascadedSystem, apply_A, apply_At
from .penalty import L2Penalty, PiecewiseLinearPenalty

L2_VARIANTS = ("fixed-l2", "ladn", "ladn-i")
ALL_VARIANTS = L2_VARIANTS + ("ladn-p",)

PARAMS_FORMAT_VERSION = 1


class DecodeNumericalError(RuntimeError):
    """A stage produced non-finite values; ``stage`` is the 1-based index."""

    def __init__(self, stage: int):
        self.stage = stage
        super().__init__(f"non-finite values at stage {stage}")


@dataclass
class DecoderParams:
    """Decoder configuration: variant, penalty coefficients, schedule length.

    ``mu`` may be a scalar or a length-``n_stages`` schedule.  ``residual_eps``
    enables early stopping on the squared constraint residual when positive;
    0 disables it (training always runs the full unroll).
    """

    variant: str
    n_stages: int
    alpha: float | None = None
    slopes: np.ndarray | None = None
    mu: float | np.ndarray = 1.2
    residual_eps: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in ALL_VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {ALL_VARIANTS}")
        if self.slopes is not None:
            self.slopes = np.asarray(self.slopes, dtype=np.float64)
        if isinstance(self.mu, (list, np.ndarray)):
            self.mu = np.asarray(self.mu, dtype=np.float64)
        else:
            self.mu = float(self.mu)

    def mu_schedule(self) -> np.ndarray:
        if np.ndim(self.mu) == 0:
            return np.full(self.n_stages, float(self.mu))
        mu = np.asarray(self.mu, dtype=np.float64)
        if mu.shape != (self.n_stages,):
            raise ValueError(f"mu schedule has length {mu.size}, expected {self.n_stages}")
        return mu

    def penalty(self):
        if self.variant in L2_VARIANTS:
            return L2Penalty(self.alpha)
        return PiecewiseLinearPenalty(self.slopes)

    def validate(self, for_decode: bool = True) -> None:
        if for_decode and self.n_stages < 1:
            raise ValueError("n_stages must be >= 1")
        if self.n_stages < 0:
            raise ValueError("n_stages must be nonnegative")
        if self.residual_eps < 0:
            raise ValueError("residual_eps must be >= 0")
        mu = self.mu_schedule() if self.n_stages else np.atleast_1d(self.mu)
        if np.any(mu <= 0):
            raise ValueError("all penalty parameters mu must be positive")
        if self.variant in L2_VARIANTS:
            if self.alpha is None:
                raise ValueError(f"variant {self.variant} requires alpha")
            if self.alpha < 0:
                raise ValueError("alpha must be nonnegative")
            # min diagonal of A'A is 4 by construction, so this keeps every
            # scalar subproblem strictly convex
            if mu.size and self.alpha >= 4.0 * float(np.min(mu)):
                raise ValueError(
                    f"alpha={self.alpha} must be < 4*min(mu)={4.0 * float(np.min(mu))}"
                )
        else:
            if self.slopes is None or np.any(np.asarray(self.slopes) <= 0):
                raise ValueError("variant ladn-p requires positive slopes")

    # -- plain-text (JSON) parameter files --------------------------------

    def to_dict(self) -> dict:
        d = {
            "format_version": PARAMS_FORMAT_VERSION,
            "variant": self.variant,
            "n_stages": self.n_stages,
            "mu": self.mu.tolist() if np.ndim(self.mu) else self.mu,
            "residual_eps": self.residual_eps,
        }
        if self.alpha is not None:
            d["alpha"] = self.alpha
        if self.slopes is not None:
            d["slopes"] = self.slopes.tolist()
        if self.meta:
            d["meta"] = self.meta
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DecoderParams":
        version = d.get("format_version")
        if version != PARAMS_FORMAT_VERSION:
            raise ValueError(f"unsupported parameter file version {version!r}")
        p = cls(
            variant=d["variant"],
            n_stages=int(d["n_stages"]),
            alpha=d.get("alpha"),
            slopes=d.get("slopes"),
            mu=d["mu"],
            residual_eps=float(d.get("residual_eps", 0.0)),
            meta=d.get("meta", {}),
        )
        p.validate(for_decode=False)
        return p

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "DecoderParams":
        with open(path, "r", encoding="ascii") as f:
            return cls.from_dict(json.load(f))


@dataclass
class DecodeTrace:
    """Per-stage iterates of a single decode: u, z, y and squared residual."""

    us: list
    zs: list
    ys: list
    residuals: list
    stop_stage: int | None = None


class OpCounter:
    """Tallies real multiplications and divisions executed by the decoder."""

    def __init__(self):
        self.mults = 0
        self.divs = 0

    def mul(self, k: int):
        self.mults += int(k)

    def div(self, k: int):
        self.divs += int(k)


def eta_vector(sys: CascadedSystem, alpha: float, mu: float) -> np.ndarray:
    """Per-coordinate scaling 1 / (alpha - mu * e); requires alpha < mu*min(e)."""
    denom = alpha - mu * sys.e
    if np.any(denom >= 0):
        raise ValueError(f"eta undefined: need alpha < mu*e_i everywhere (alpha={alpha}, mu={mu})")
    return 1.0 / denom


def hard_decision(u: np.ndarray, n: int) -> np.ndarray:
    """Threshold the first ``n`` coordinates at 0.5; exactly 0.5 maps to 1."""
    u = np.asarray(u)
    if u.shape[-1] < n:
        raise ValueError(f"u has {u.shape[-1]} coordinates, need at least {n}")
    return (u[..., :n] >= 0.5).astype(np.uint8)


def _stage_update(sys, pen, is_l2, alpha, mu_k, z, y, q, b, eta=None, counter=None):
    """One ADMM stage; returns (u, z_new, y_new, res, extras-for-backprop)."""
    p = y + mu_k * (z - b)
    if counter:
        counter.mul(p.shape[-1] * int(np.prod(p.shape[:-1], dtype=int)))
    r = q + apply_At(sys, p)
    if is_l2:
        if eta is None:
            eta = eta_vector(sys, alpha, mu_k)
            if counter:
                counter.div(eta.size)
        s = (r + 0.5 * alpha) * eta
        u = np.clip(s, 0.0, 1.0)
        info = (r, (s > 0.0) & (s < 1.0), eta)
        if counter:
            counter.mul(r.shape[-1] * int(np.prod(r.shape[:-1], dtype=int)))
    else:
        h = mu_k * sys.e
        u, piece, interior = pen.solve_with_info(-r, h)
        info = (r, piece, interior, h)
        if counter:
            # candidate enumeration: ~3 mults per candidate per coordinate
            counter.mul((4 * pen.n_slopes + 1) * 3 * r.shape[-1] * int(np.prod(r.shape[:-1], dtype=int)))
    w = apply_A(sys, u)
    inv_mu = 1.0 / mu_k
    zpre = b - w - y * inv_mu
    z_new = np.maximum(zpre, 0.0)
    res = w + z_new - b
    y_new = y + mu_k * res
    if counter:
        nb = int(np.prod(res.shape[:-1], dtype=int))
        counter.div(1)
        counter.mul(2 * res.shape[-1] * nb)  # y/mu and mu*res
        counter.mul(res.shape[-1] * nb)  # residual squares
    r_sq = np.sum(res * res, axis=-1)
    return u, z_new, y_new, res, r_sq, (zpre > 0.0), info


def initial_state(sys: CascadedSystem, batch_shape=()):
    """Symmetric start: u = 0.5 everywhere, y = 0, z = max(0, b - A u)."""
    u0 = np.full(batch_shape + (sys.n_total,), 0.5)
    b = sys.b()
    z0 = np.maximum(b - apply_A(sys, u0), 0.0)
    y0 = np.zeros(batch_shape + (sys.n_rows,))
    return u0, z0, y0, b


def decode_batch(
    sys: CascadedSystem,
    V: np.ndarray,
    params: DecoderParams,
    counter: OpCounter | None = None,
):
    """Decode a (frames, n_orig) LLR matrix.

    Returns ``(bits, final_u, residual, stop_stage)``; ``stop_stage`` is the
    per-frame 1-based stage at which the early stop fired (n_stages if not).
    Frames that converge are frozen and excluded from further stages, which
    reproduces per-frame early-stop semantics exactly.
    """
    params.validate()
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[1] != sys.n_orig:
        raise ValueError(f"V has shape {V.shape}, expected (*, {sys.n_orig})")
    if not np.all(np.isfinite(V)):
        raise ValueError("LLR input contains non-finite values")

    P = V.shape[0]
    q = np.concatenate([V, np.zeros((P, sys.n_aux))], axis=1)
    u, z, y, b = initial_state(sys, (P,))
    mus = params.mu_schedule()
    pen = params.penalty()
    is_l2 = params.variant in L2_VARIANTS
    eps = params.residual_eps

    fixed_mu = is_l2 and np.ndim(params.mu) == 0
    eta = eta_vector(sys, params.alpha, float(params.mu)) if fixed_mu else None
    if fixed_mu and counter:
        counter.div(eta.size)

    final_u = u.copy()
    final_r = np.zeros(P)
    stop_stage = np.full(P, params.n_stages, dtype=np.int64)
    active = np.arange(P)

    qa, za, ya = q, z, y
    ua, r_sq = u, final_r
    for k in range(params.n_stages):
        ua, za, ya, _, r_sq, _, _ = _stage_update(
            sys, pen, is_l2, params.alpha, mus[k],
            za, ya, qa, b, eta=eta if fixed_mu else None, counter=counter,
        )
        if not np.all(np.isfinite(ua)):
            raise DecodeNumericalError(k + 1)
        if eps > 0.0:
            done = r_sq <= eps
            if np.any(done):
                idx = active[done]
                final_u[idx] = ua[done]
                final_r[idx] = r_sq[done]
                stop_stage[idx] = k + 1
                keep = ~done
                active, qa, za, ya = active[keep], qa[keep], za[keep], ya[keep]
                ua, r_sq = ua[keep], r_sq[keep]
                if active.size == 0:
                    break
    final_u[active] = ua
    final_r[active] = r_sq

    bits = hard_decision(final_u, sys.n_orig)
    return bits, final_u, final_r, stop_stage


def decode(
    sys: CascadedSystem,
    v: np.ndarray,
    params: DecoderParams,
    trace_wanted: bool = False,
    counter: OpCounter | None = None,
):
    """Decode one LLR vector; optionally collect the per-stage trace.

    Returns ``(bits, trace)`` with ``trace`` None unless requested.
    """
    params.validate()
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (sys.n_orig,):
        raise ValueError(f"v has shape {v.shape}, expected ({sys.n_orig},)")
    if not trace_wanted:
        bits, _, _, _ = decode_batch(sys, v[None, :], params, counter=counter)
        return bits[0], None

    if not np.all(np.isfinite(v)):
        raise ValueError("LLR input contains non-finite values")
    q = np.concatenate([v, np.zeros(sys.n_aux)])
    u, z, y, b = initial_state(sys)
    mus = params.mu_schedule()
    pen = params.penalty()
    is_l2 = params.variant in L2_VARIANTS
    trace = DecodeTrace(us=[], zs=[], ys=[], residuals=[])
    for k in range(params.n_stages):
        u, z, y, _, r_sq, _, _ = _stage_update(
            sys, pen, is_l2, params.alpha, mus[k], z, y, q, b, counter=counter
        )
        if not np.all(np.isfinite(u)):
            raise DecodeNumericalError(k + 1)
        trace.us.append(u.copy())
        trace.zs.append(z.copy())
        trace.ys.append(y.copy())
        trace.residuals.append(float(r_sq))
        if params.residual_eps > 0.0 and r_sq <= params.residual_eps:
            trace.stop_stage = k + 1
            break
    return hard_decision(u, sys.n_orig), trace
