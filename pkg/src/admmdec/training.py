"""Training of decoder parameters by unrolling the stage recursion.

The unrolled decoder is differentiated in reverse mode by hand: the stage
computation is a short chain of elementwise operations plus the two structured
products, and the projections (box clip, positive part, piecewise-solver
branches) use the straight-zero subgradient at their kinks.  A central
finite-difference mode over the handful of scalar parameters serves as the
correctness oracle and as a bit-reproducible fallback.

The composite loss per frame mixes the squared constraint residual
(unsupervised) with the squared distance between the relaxed bits and the
transmitted codeword (supervised), weighted by sigma; it is evaluated either
at the final stage only or averaged over all stages.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .cascade import CascadedSystem, apply_A, apply_At
from .channel import make_samples, sample_matrix
from .codes import ParityCheckMatrix
from .decoder import (
    DecoderParams,
    DecodeTrace,
    L2_VARIANTS,
    _stage_update,
    initial_state,
)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

MU_FLOOR = 1e-3
SLOPE_FLOOR = 1e-6
ALPHA_MARGIN = 0.999  # keep alpha strictly below 4*min(mu)


@dataclass
class LossConfig:
    sigma: float = 0.3
    layer_mode: str = "all-stages-mean"  # or "final-stage"

    def __post_init__(self):
        if not 0.0 <= self.sigma <= 1.0:
            raise ValueError("sigma must be in [0, 1]")
        if self.layer_mode not in ("all-stages-mean", "final-stage"):
            raise ValueError(f"unknown layer_mode {self.layer_mode!r}")


@dataclass
class TrainConfig:
    lr0: float = 1e-3
    lr_decay: float = 0.5
    batch_size: int = 100
    max_epochs: int = 15
    patience: int = 3
    grad_mode: str = "analytic"  # or "fd"
    seed: int = 0

    def __post_init__(self):
        if self.lr0 <= 0:
            raise ValueError("lr0 must be positive")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError("lr_decay must be in (0, 1]")
        if self.grad_mode not in ("analytic", "fd"):
            raise ValueError(f"unknown grad_mode {self.grad_mode!r}")


class TrainingDiverged(RuntimeError):
    def __init__(self, log):
        self.log = log
        super().__init__("validation loss became non-finite")


# -- forward pass with optional recording ------------------------------------


def _stage_weights(n_stages: int, layer_mode: str) -> np.ndarray:
    if layer_mode == "final-stage":
        w = np.zeros(n_stages)
        if n_stages:
            w[-1] = 1.0
        return w
    return np.full(n_stages, 1.0 / n_stages) if n_stages else np.zeros(0)


def forward_batch(
    sys: CascadedSystem,
    V: np.ndarray,
    X: np.ndarray,
    params: DecoderParams,
    loss_cfg: LossConfig,
    record: bool = False,
):
    """Unrolled forward pass over a batch; returns (loss, record or None).

    The stage arithmetic is the decoder's own, so the final-stage iterates
    coincide bit-for-bit with ``decode_batch`` at residual_eps = 0.
    """
    params.validate(for_decode=False)
    V = np.asarray(V, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    P = V.shape[0]
    q = np.concatenate([V, np.zeros((P, sys.n_aux))], axis=1)
    u, z, y, b = initial_state(sys, (P,))
    mus = params.mu_schedule()
    pen = params.penalty()
    is_l2 = params.variant in L2_VARIANTS
    weights = _stage_weights(params.n_stages, loss_cfg.layer_mode)
    sigma = loss_cfg.sigma

    rec = None
    if record:
        rec = {
            "zs": [z], "ys": [y], "rs": [], "us": [], "ress": [],
            "mask_z": [], "info": [], "q": q, "b": b, "X": X,
            "mus": mus, "pen": pen, "is_l2": is_l2, "params": params,
            "weights": weights, "sigma": sigma, "P": P,
        }

    loss = 0.0
    if params.n_stages == 0:
        res0 = apply_A(sys, u) + z - b
        sup0 = np.sum((u[:, : sys.n_orig] - X) ** 2, axis=-1)
        loss = float(np.mean(sigma * np.sum(res0 * res0, axis=-1) + (1 - sigma) * sup0))
        return loss, rec

    for k in range(params.n_stages):
        u, z, y, res, r_sq, mask_z, info = _stage_update(
            sys, pen, is_l2, params.alpha, mus[k], z, y, q, b
        )
        if not np.all(np.isfinite(u)):
            raise FloatingPointError(f"non-finite forward values at stage {k + 1}")
        if weights[k] != 0.0:
            sup = np.sum((u[:, : sys.n_orig] - X) ** 2, axis=-1)
            loss += weights[k] * float(np.mean(sigma * r_sq + (1 - sigma) * sup))
        if record:
            rec["zs"].append(z)
            rec["ys"].append(y)
            rec["rs"].append(info[0])
            rec["us"].append(u)
            rec["ress"].append(res)
            rec["mask_z"].append(mask_z)
            rec["info"].append(info)
    return loss, rec


def loss(sys: CascadedSystem, traces: list[DecodeTrace], labels, cfg: LossConfig) -> float:
    """Reference composite loss over a batch of decode traces."""
    labels = np.asarray(labels, dtype=np.float64)
    if len(traces) != labels.shape[0]:
        raise ValueError("one label per trace required")
    b = sys.b()
    total = 0.0
    for trace, x in zip(traces, labels):
        if x.shape != (sys.n_orig,):
            raise ValueError(f"label has shape {x.shape}, expected ({sys.n_orig},)")
        K = len(trace.us)
        weights = _stage_weights(K, cfg.layer_mode)
        acc = 0.0
        for k in range(K):
            if weights[k] == 0.0:
                continue
            res = apply_A(sys, trace.us[k]) + trace.zs[k] - b
            sup = float(np.sum((trace.us[k][: sys.n_orig] - x) ** 2))
            acc += weights[k] * (cfg.sigma * float(res @ res) + (1 - cfg.sigma) * sup)
        total += acc
    return total / len(traces)


def min_branch_distance(sys: CascadedSystem, rec: dict):
    """Distances of stage quantities to solver branch boundaries.

    Returns ``(kink, jump)``: ``kink`` is the closest approach to a positive
    part or box-clip boundary (the loss stays continuous there, only its
    derivative kinks), while ``jump`` is the closest approach to a piecewise
    minima-exchange threshold, where the selected branch and hence the loss
    itself jump.  Gradient checks need ``jump`` clear of the finite-difference
    stencil; ``kink`` only needs to avoid exact hits.
    """
    kink = np.inf
    jump = np.inf
    for k, info in enumerate(rec["info"]):
        mu_k = rec["mus"][k]
        y_in = rec["ys"][k]
        z_new = rec["zs"][k + 1]
        res = rec["ress"][k]
        zpre = z_new - res - y_in / mu_k
        kink = min(kink, float(np.min(np.abs(zpre))))
        if rec["is_l2"]:
            r, _, eta = info
            s = (r + 0.5 * rec["params"].alpha) * eta
            kink = min(kink, float(np.min(np.abs(s))), float(np.min(np.abs(1.0 - s))))
        else:
            r, _, _, h = info
            t = -r
            pen = rec["pen"]
            cuts = [(0.5 * h)[:, None]]
            if pen.n_slopes > 1:
                delta = pen.exchange_thresholds(h)  # (n, L-1)
                cuts.extend([delta, h[:, None] - delta])
            thr = np.concatenate(cuts, axis=1)  # (n, 2L-1)
            gap = np.abs(t[..., :, None] - thr[None, ...])
            jump = min(jump, float(np.min(gap)))
    return kink, jump


def branch_signature(rec: dict) -> tuple:
    """Hashable snapshot of every branch decision taken during a forward pass."""
    parts = []
    for k, info in enumerate(rec["info"]):
        parts.append(rec["mask_z"][k].tobytes())
        if rec["is_l2"]:
            parts.append(info[1].tobytes())
        else:
            parts.append(info[1].tobytes())  # active piece indices
            parts.append(info[2].tobytes())  # interior flags
    return tuple(parts)


def fd_stencil_clean(sys, params, V, X, loss_cfg, fd_step: float = 1e-4) -> bool:
    """True when no finite-difference stencil crosses a branch boundary.

    Runs the two perturbed forward passes of every parameter and compares
    their branch decisions; agreement means the loss is a smooth composition
    over the whole stencil, so central differences are trustworthy there.
    """
    theta, unpack = _pack(params)
    for i in range(theta.size):
        step = fd_step * max(1.0, abs(theta[i]))
        sigs = []
        for delta in (step, -step):
            t = theta.copy()
            t[i] += delta
            _, rec = forward_batch(sys, V, X, unpack(t), loss_cfg, record=True)
            sigs.append(branch_signature(rec))
        if sigs[0] != sigs[1]:
            return False
    return True


# -- reverse-mode gradients ---------------------------------------------------


def _backward(sys: CascadedSystem, rec: dict) -> dict:
    params: DecoderParams = rec["params"]
    is_l2 = rec["is_l2"]
    mus = rec["mus"]
    weights = rec["weights"]
    sigma = rec["sigma"]
    P = rec["P"]
    X = rec["X"]
    K = len(rec["us"])
    n_orig = sys.n_orig

    per_stage_mu = params.variant == "ladn-i"
    g_alpha = 0.0
    g_mu = np.zeros(K) if per_stage_mu else 0.0
    g_phi = None if is_l2 else np.zeros(rec["pen"].n_slopes)
    pen = rec["pen"]

    zbar = np.zeros_like(rec["zs"][0])
    ybar = np.zeros_like(rec["ys"][0])

    for k in range(K - 1, -1, -1):
        mu_k = mus[k]
        z_in, y_in = rec["zs"][k], rec["ys"][k]
        u, res = rec["us"][k], rec["ress"][k]
        mask_z = rec["mask_z"][k]
        info = rec["info"][k]
        r = info[0]
        wk = weights[k]

        # adjoint of y^k: downstream only; y' = y_in + mu*res
        res_bar = mu_k * ybar
        if per_stage_mu:
            g_mu[k] += float(np.sum(ybar * res))
        else:
            g_mu += float(np.sum(ybar * res))
        y_in_bar = ybar.copy()

        # loss contributions at stage k
        if wk != 0.0:
            res_bar = res_bar + (2.0 * sigma * wk / P) * res
        # res = w + z' - b
        w_bar = res_bar.copy()
        zp_bar = res_bar + zbar
        # z' = relu(zpre), zpre = b - w - y_in/mu
        zpre_bar = np.where(mask_z, zp_bar, 0.0)
        w_bar -= zpre_bar
        y_in_bar -= zpre_bar / mu_k
        mu_inc = float(np.sum(zpre_bar * y_in)) / (mu_k * mu_k)
        if per_stage_mu:
            g_mu[k] += mu_inc
        else:
            g_mu += mu_inc
        # w = A u
        u_bar = apply_At(sys, w_bar)
        if wk != 0.0:
            u_bar[:, :n_orig] += (2.0 * (1 - sigma) * wk / P) * (u[:, :n_orig] - X)

        # u-update backward
        if is_l2:
            _, mask_u, eta = info
            alpha = params.alpha
            s_bar = np.where(mask_u, u_bar, 0.0)
            r_bar = s_bar * eta
            n1 = r + 0.5 * alpha
            g_alpha += float(np.sum(s_bar * (0.5 * eta - n1 * eta * eta)))
            mu_inc = float(np.sum(s_bar * n1 * (sys.e * eta * eta)))
            if per_stage_mu:
                g_mu[k] += mu_inc
            else:
                g_mu += mu_inc
        else:
            _, piece, interior, h = info
            flow = np.where(interior, u_bar, 0.0)
            t_bar = flow / h
            r_bar = -t_bar
            h_bar = flow * (-u / h)
            g_mu += float(np.sum(h_bar * sys.e))
            # piece slope: +phi[p] left of the midpoint, -phi[mirror] right
            L = pen.n_slopes
            sgn = np.where(piece < L, -1.0, 1.0)  # d u / d slope-param times h
            slope_idx = np.where(piece < L, piece, 2 * L - 1 - piece)
            contrib = sgn * flow / h
            np.add.at(g_phi, slope_idx.ravel(), contrib.ravel())

        # r = q + A^T p;  p = y_in + mu*(z_in - b)
        p_bar = apply_A(sys, r_bar)
        y_in_bar += p_bar
        zbar = mu_k * p_bar
        mu_inc = float(np.sum(p_bar * (z_in - rec["b"])))
        if per_stage_mu:
            g_mu[k] += mu_inc
        else:
            g_mu += mu_inc
        ybar = y_in_bar

    grads = {}
    if is_l2:
        grads["alpha"] = g_alpha
    else:
        grads["slopes"] = g_phi
    grads["mu"] = g_mu
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
    return grads


def grad(
    sys: CascadedSystem,
    params: DecoderParams,
    V: np.ndarray,
    X: np.ndarray,
    loss_cfg: LossConfig,
    grad_mode: str = "analytic",
    fd_step: float = 1e-4,
):
    """Gradient of the batch loss over the variant's learnable parameters.

    Returns ``(loss, grads)`` with grads keyed 'alpha'/'slopes'/'mu'.  The
    finite-difference mode perturbs each scalar by fd_step*max(1, |theta|).
    """
    if grad_mode == "analytic":
        value, rec = forward_batch(sys, V, X, params, loss_cfg, record=True)
        if params.n_stages == 0:
            return value, _zero_grads(params)
        return value, _backward(sys, rec)
    if grad_mode != "fd":
        raise ValueError(f"unknown grad_mode {grad_mode!r}")

    value, _ = forward_batch(sys, V, X, params, loss_cfg)
    theta, unpack = _pack(params)
    g = np.zeros_like(theta)
    for i in range(theta.size):
        step = fd_step * max(1.0, abs(theta[i]))
        tp, tm = theta.copy(), theta.copy()
        tp[i] += step
        tm[i] -= step
        lp, _ = forward_batch(sys, V, X, unpack(tp), loss_cfg)
        lm, _ = forward_batch(sys, V, X, unpack(tm), loss_cfg)
        g[i] = (lp - lm) / (2.0 * step)
    grads = _split(params, g)
    for name, gv in grads.items():
        if not np.all(np.isfinite(gv)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
    return value, grads


def _zero_grads(params: DecoderParams) -> dict:
    if params.variant in L2_VARIANTS:
        mu_g = np.zeros(params.n_stages) if params.variant == "ladn-i" else 0.0
        return {"alpha": 0.0, "mu": mu_g}
    return {"slopes": np.zeros(len(params.slopes)), "mu": 0.0}


def _pack(params: DecoderParams):
    """Flatten learnable parameters; returns (theta, unpack(theta)->params)."""
    variant = params.variant
    if variant in ("fixed-l2", "ladn"):
        theta = np.array([params.alpha, float(params.mu)])

        def unpack(t):
            return DecoderParams(variant=variant, n_stages=params.n_stages,
                                 alpha=float(t[0]), mu=float(t[1]),
                                 residual_eps=params.residual_eps)
    elif variant == "ladn-i":
        theta = np.concatenate([[params.alpha], params.mu_schedule()])

        def unpack(t):
            return DecoderParams(variant=variant, n_stages=params.n_stages,
                                 alpha=float(t[0]), mu=t[1:].copy(),
                                 residual_eps=params.residual_eps)
    elif variant == "ladn-p":
        theta = np.concatenate([params.slopes, [float(params.mu)]])

        def unpack(t):
            return DecoderParams(variant=variant, n_stages=params.n_stages,
                                 slopes=t[:-1].copy(), mu=float(t[-1]),
                                 residual_eps=params.residual_eps)
    else:
        raise ValueError(variant)
    return theta, unpack


def _split(params: DecoderParams, g: np.ndarray) -> dict:
    if params.variant in ("fixed-l2", "ladn"):
        return {"alpha": float(g[0]), "mu": float(g[1])}
    if params.variant == "ladn-i":
        return {"alpha": float(g[0]), "mu": g[1:].copy()}
    return {"slopes": g[:-1].copy(), "mu": float(g[-1])}


def _flatten_grads(params: DecoderParams, grads: dict) -> np.ndarray:
    if params.variant in ("fixed-l2", "ladn"):
        return np.array([grads["alpha"], float(np.asarray(grads["mu"]).sum())])
    if params.variant == "ladn-i":
        return np.concatenate([[grads["alpha"]], np.asarray(grads["mu"], dtype=np.float64)])
    return np.concatenate([np.asarray(grads["slopes"], dtype=np.float64), [grads["mu"]]])


def _project(params: DecoderParams, theta: np.ndarray) -> np.ndarray:
    """Clip a flat parameter vector back into the decoder's feasible region."""
    t = theta.copy()
    if params.variant in ("fixed-l2", "ladn", "ladn-i"):
        t[1:] = np.maximum(t[1:], MU_FLOOR)
        t[0] = min(max(t[0], 0.0), ALPHA_MARGIN * 4.0 * float(np.min(t[1:])))
    else:
        t[-1] = max(t[-1], MU_FLOOR)
        t[:-1] = np.maximum(t[:-1], SLOPE_FLOOR)
    return t


class Adam:
    """Standard first/second-moment adaptive step over a flat vector."""

    def __init__(self, n: int, lr: float, b1: float = ADAM_BETA1,
                 b2: float = ADAM_BETA2, eps: float = ADAM_EPS):
        self.lr = lr
        self.b1, self.b2, self.eps = b1, b2, eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, theta: np.ndarray, g: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * g
        self.v = self.b2 * self.v + (1 - self.b2) * g * g
        m_hat = self.m / (1 - self.b1**self.t)
        v_hat = self.v / (1 - self.b2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


# -- training loop -------------------------------------------------------------


@dataclass
class TrainingLog:
    variant: str
    initial_val_loss: float = 0.0
    epochs: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = float("inf")
    stopped_early: bool = False
    data_fingerprint: str = ""
    initial_theta: list = field(default_factory=list)
    final_theta: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "initial_val_loss": self.initial_val_loss,
            "epochs": self.epochs,
            "best_epoch": self.best_epoch,
            "best_val_loss": self.best_val_loss,
            "stopped_early": self.stopped_early,
            "data_fingerprint": self.data_fingerprint,
            "initial_theta": self.initial_theta,
            "final_theta": self.final_theta,
            "adam": {"beta1": ADAM_BETA1, "beta2": ADAM_BETA2, "eps": ADAM_EPS},
            "notes": self.notes,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")


def default_init(variant: str, n_stages: int, n_slopes: int = 5) -> DecoderParams:
    """Baseline-equivalent starting point (alpha=1, mu=1.2 everywhere).

    The piecewise variant starts from slopes matching the quadratic penalty's
    derivative at each piece midpoint, so all variants begin close to the
    stock decoder.
    """
    if variant in ("fixed-l2", "ladn"):
        return DecoderParams(variant=variant, n_stages=n_stages, alpha=1.0, mu=1.2)
    if variant == "ladn-i":
        return DecoderParams(variant=variant, n_stages=n_stages, alpha=1.0,
                             mu=np.full(n_stages, 1.2))
    if variant == "ladn-p":
        edges = 0.5 * np.arange(n_slopes + 1) / n_slopes
        mids = 0.5 * (edges[:-1] + edges[1:])
        return DecoderParams(variant=variant, n_stages=n_stages,
                             slopes=1.0 * (0.5 - mids), mu=1.2)
    raise ValueError(variant)


def data_fingerprint(V: np.ndarray, X: np.ndarray, desc: str) -> str:
    hsh = hashlib.sha256()
    hsh.update(desc.encode())
    hsh.update(np.ascontiguousarray(V).tobytes())
    hsh.update(np.ascontiguousarray(X).tobytes())
    return hsh.hexdigest()


def evaluate_loss(sys, V, X, params, loss_cfg, chunk: int = 1000) -> float:
    total = 0.0
    P = V.shape[0]
    for lo in range(0, P, chunk):
        hi = min(lo + chunk, P)
        value, _ = forward_batch(sys, V[lo:hi], X[lo:hi], params, loss_cfg)
        total += value * (hi - lo)
    return total / P


def train(
    code: ParityCheckMatrix,
    variant: str,
    train_cfg: TrainConfig,
    loss_cfg: LossConfig,
    n_stages: int = 50,
    snr_db: float = 2.0,
    n_train: int = 40000,
    n_val: int = 10000,
    codeword_mode: str = "random-message",
    convention: str = "ebn0",
    n_slopes: int = 5,
    init: DecoderParams | None = None,
    sys: CascadedSystem | None = None,
    verbose: bool = False,
):
    """Full training run per the standard recipe; returns (params, log).

    Data is generated fresh from the seed (train frames first, validation
    frames after, one counter stream per frame).  The best-validation
    parameters are returned, with provenance recorded in ``params.meta``.
    """
    from .cascade import build_cascade

    if sys is None:
        sys = build_cascade(code)
    rng = np.random.default_rng(train_cfg.seed)

    samples = make_samples(code, n_train + n_val, snr_db, codeword_mode=codeword_mode,
                           seed=train_cfg.seed, convention=convention)
    V, X = sample_matrix(samples)
    V_train, X_train = V[:n_train], X[:n_train]
    V_val, X_val = V[n_train:], X[n_train:]
    desc = (f"code={code.n_vars}x{code.n_checks} snr={snr_db} mode={codeword_mode} "
            f"conv={convention} n={n_train}+{n_val} seed={train_cfg.seed}")
    fingerprint = data_fingerprint(V, X, desc)

    params = init if init is not None else default_init(variant, n_stages, n_slopes)
    if params.variant != variant or params.n_stages != n_stages:
        raise ValueError("init params disagree with requested variant/n_stages")
    if params.residual_eps != 0.0:
        raise ValueError("training requires residual_eps=0 (static unroll)")

    theta, unpack = _pack(params)
    log = TrainingLog(variant=variant, data_fingerprint=fingerprint,
                      initial_theta=theta.tolist())
    log.initial_val_loss = evaluate_loss(sys, V_val, X_val, unpack(theta), loss_cfg)
    best_theta = theta.copy()
    best_val = log.initial_val_loss
    log.best_val_loss = best_val
    if verbose:
        print(f"[{variant}] initial val loss {best_val:.6f}")

    adam = Adam(theta.size, lr=train_cfg.lr0)
    since_best = 0
    for epoch in range(train_cfg.max_epochs):
        adam.lr = train_cfg.lr0 * train_cfg.lr_decay**epoch
        order = rng.permutation(n_train)
        train_loss_acc = 0.0
        n_batches = 0
        for lo in range(0, n_train, train_cfg.batch_size):
            sel = order[lo : lo + train_cfg.batch_size]
            value, grads = grad(sys, unpack(theta), V_train[sel], X_train[sel],
                                loss_cfg, grad_mode=train_cfg.grad_mode)
            theta = _project(params, adam.step(theta, _flatten_grads(params, grads)))
            train_loss_acc += value
            n_batches += 1
        val_loss = evaluate_loss(sys, V_val, X_val, unpack(theta), loss_cfg)
        log.epochs.append({
            "epoch": epoch,
            "lr": adam.lr,
            "train_loss": train_loss_acc / max(n_batches, 1),
            "val_loss": val_loss,
        })
        if verbose:
            print(f"[{variant}] epoch {epoch}: lr {adam.lr:.2e} "
                  f"train {train_loss_acc / max(n_batches, 1):.6f} val {val_loss:.6f}")
        if not np.isfinite(val_loss):
            log.final_theta = theta.tolist()
            raise TrainingDiverged(log)
        if val_loss < best_val:
            best_val = val_loss
            best_theta = theta.copy()
            log.best_epoch = epoch
            log.best_val_loss = val_loss
            since_best = 0
        else:
            since_best += 1
            if since_best >= train_cfg.patience:
                log.stopped_early = True
                break

    log.final_theta = best_theta.tolist()
    out = unpack(best_theta)
    out.meta = {
        "trained": True,
        "variant": variant,
        "loss_config": {"sigma": loss_cfg.sigma, "layer_mode": loss_cfg.layer_mode},
        "train_config": {
            "lr0": train_cfg.lr0, "lr_decay": train_cfg.lr_decay,
            "batch_size": train_cfg.batch_size, "max_epochs": train_cfg.max_epochs,
            "patience": train_cfg.patience, "grad_mode": train_cfg.grad_mode,
            "seed": train_cfg.seed,
        },
        "data": {
            "snr_db": snr_db, "n_train": n_train, "n_val": n_val,
            "codeword_mode": codeword_mode, "convention": convention,
            "fingerprint": fingerprint,
        },
        "adam": {"beta1": ADAM_BETA1, "beta2": ADAM_BETA2, "eps": ADAM_EPS},
        "initial_val_loss": log.initial_val_loss,
        "best_val_loss": log.best_val_loss,
    }
    if variant == "ladn-p":
        out.meta["slope_order_ok"] = bool(out.slopes[0] >= out.slopes[-1])
    out.validate(for_decode=False)
    return out, log
