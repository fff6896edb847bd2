"""Penalty functions and the per-coordinate box-constrained u-subproblem.

Each decoder stage solves, independently per coordinate,

    minimize_{u in [0,1]}   0.5 * h * u^2  +  g(u)  +  linear_term * u

with h = mu * e_i > 0.  Two penalty families are supported:

* ``L2Penalty``: g(u) = -(alpha/2) (u - 0.5)^2.  The subproblem is a
  clipped quadratic with the closed form
  u* = clip((raw + alpha/2) / (alpha - h)), valid while h > alpha.
  Sign convention: ``raw`` IS the linear term.

* ``PiecewiseLinearPenalty``: 2L linear pieces, symmetric about 0.5 with
  positive slopes phi_1..phi_L on the left half and fixed uniformly spaced
  breakpoints.  Its solver takes ``t = -linear_term`` (note the sign: the
  objective is written 0.5*h*u^2 + g(u) - t*u), and by default enumerates
  every piece's clamped minimizer plus every breakpoint, which stays correct
  for arbitrary slope patterns.  A threshold fast path is provided for the
  well-ordered case.

Both solvers resolve exact objective ties toward the larger argument, the
same direction the 0.5 hard-decision threshold rounds.
"""

from __future__ import annotations

import numpy as np


class L2Penalty:
    """Concave quadratic penalty g(u) = -(alpha/2) (u - 0.5)^2, alpha >= 0."""

    def __init__(self, alpha: float):
        alpha = float(alpha)
        if alpha < 0:
            raise ValueError(f"alpha must be nonnegative, got {alpha}")
        self.alpha = alpha

    def value(self, u):
        u = _check_domain(u)
        return -0.5 * self.alpha * (u - 0.5) ** 2

    def deriv(self, u):
        u = _check_domain(u)
        return -self.alpha * (u - 0.5)

    def solve(self, raw, h):
        """Minimize 0.5*h*u^2 + g(u) + raw*u over [0,1] (note: +raw*u).

        Requires h > alpha so the combined quadratic stays convex.
        """
        raw = np.asarray(raw, dtype=np.float64)
        h = np.asarray(h, dtype=np.float64)
        if np.any(h <= self.alpha):
            raise ValueError(
                f"subproblem is non-convex: need h > alpha, got min h={np.min(h)}, alpha={self.alpha}"
            )
        out = np.clip((raw + 0.5 * self.alpha) / (self.alpha - h), 0.0, 1.0)
        return out if out.ndim else float(out)

    def __repr__(self) -> str:
        return f"L2Penalty(alpha={self.alpha})"


def uniform_breakpoints(n_slopes: int) -> np.ndarray:
    """Fixed left-half breakpoints c_0=0 < c_1 < ... < c_{L-1}, spacing 0.5/L."""
    if n_slopes < 1:
        raise ValueError("need at least one slope")
    return 0.5 * np.arange(n_slopes) / n_slopes


def derive_biases(slopes, breakpoints) -> np.ndarray:
    """Per-piece offsets making the 2L-piece function continuous, anchored at 0.

    Returns 2L biases; symmetry about 0.5 then holds automatically because the
    slope sequence is mirrored and the function is pinned together at every
    boundary.
    """
    phi = np.asarray(slopes, dtype=np.float64)
    c = np.asarray(breakpoints, dtype=np.float64)
    L = phi.size
    if c.shape != (L,) or c[0] != 0.0 or np.any(np.diff(c) <= 0) or c[-1] >= 0.5:
        raise ValueError("breakpoints must be 0 = c_0 < ... < c_{L-1} < 0.5")
    piece_slopes = np.concatenate([phi, -phi[::-1]])
    bounds = np.concatenate([c, [0.5], (1.0 - c)[::-1]])  # 2L+1 points
    beta = np.zeros(2 * L)
    for p in range(2 * L - 1):
        v = bounds[p + 1]
        beta[p + 1] = beta[p] + (piece_slopes[p] - piece_slopes[p + 1]) * v
    return beta


class PiecewiseLinearPenalty:
    """Symmetric piecewise-linear penalty with trainable left-half slopes.

    Pieces, left to right: slope +phi_1 on [0, c_1), ..., +phi_L on
    [c_{L-1}, 0.5], then the mirror image with negated slopes.  Biases are
    derived from continuity (first bias 0) and are never trained; they matter
    only for evaluating/plotting the function itself.
    """

    def __init__(self, slopes, breakpoints=None):
        phi = np.asarray(slopes, dtype=np.float64)
        if phi.ndim != 1 or phi.size < 1:
            raise ValueError("slopes must be a nonempty 1-D sequence")
        if np.any(phi <= 0):
            raise ValueError("all slopes must be positive")
        if breakpoints is None:
            breakpoints = uniform_breakpoints(phi.size)
        c = np.asarray(breakpoints, dtype=np.float64)
        self.slopes = phi
        self.breakpoints = c
        self.n_slopes = phi.size
        self.biases = derive_biases(phi, c)
        L = phi.size
        self.piece_slopes = np.concatenate([phi, -phi[::-1]])
        self.bounds = np.concatenate([c, [0.5], (1.0 - c)[::-1]])

    def _piece_index(self, u: np.ndarray) -> np.ndarray:
        # Half-open on the left of each boundary below 0.5, closed at 0.5 and
        # on the left boundary of every mirrored piece: an exact hit on a
        # boundary >= 0.5 belongs to the piece on its left.
        interior = self.bounds[1:-1]
        p = np.searchsorted(interior, u, side="right")
        exact = np.isin(u, interior[interior >= 0.5])
        return p - exact.astype(np.intp)

    def value(self, u):
        u = _check_domain(u)
        p = self._piece_index(u)
        out = self.piece_slopes[p] * u + self.biases[p]
        return out if out.ndim else float(out)

    def deriv(self, u):
        u = _check_domain(u)
        p = self._piece_index(u)
        out = self.piece_slopes[p] + 0.0 * u
        return out if out.ndim else float(out)

    def solve(self, t, h):
        """Minimize 0.5*h*u^2 + g(u) - t*u over [0,1] (note: minus t*u).

        Enumerates the clamped minimizer of every piece plus every breakpoint
        and returns the candidate with the lowest objective; exact ties break
        toward the larger u.
        """
        u, _, _ = self.solve_with_info(t, h)
        return u

    def solve_with_info(self, t, h):
        """Like :meth:`solve` but also reports differentiability structure.

        Returns ``(u, piece, interior)`` where ``piece`` is the active piece
        index for coordinates whose winning candidate was an unclamped piece
        minimizer (``interior`` True); elsewhere the solution sits on a kink
        or box edge and carries no local sensitivity.
        """
        t = np.asarray(t, dtype=np.float64)
        h = np.asarray(h, dtype=np.float64)
        scalar = t.ndim == 0 and h.ndim == 0
        t, h = np.broadcast_arrays(np.atleast_1d(t), np.atleast_1d(h))
        if np.any(h <= 0):
            raise ValueError(f"h must be positive, got min {np.min(h)}")

        n_pieces = 2 * self.n_slopes
        lo = self.bounds[:-1]
        hi = self.bounds[1:]
        # candidates: per-piece clamped quadratic minimizers, then breakpoints
        u_piece = (t[None, ...] - self.piece_slopes.reshape((-1,) + (1,) * t.ndim)) / h[None, ...]
        unclamped = u_piece.copy()
        np.clip(
            u_piece,
            lo.reshape((-1,) + (1,) * t.ndim),
            hi.reshape((-1,) + (1,) * t.ndim),
            out=u_piece,
        )
        u_break = np.broadcast_to(
            self.bounds.reshape((-1,) + (1,) * t.ndim), (n_pieces + 1,) + t.shape
        )
        cand = np.concatenate([u_piece, u_break], axis=0)
        obj = 0.5 * h[None, ...] * cand**2 + self.value(cand) - t[None, ...] * cand

        best = obj.min(axis=0)
        masked_u = np.where(obj == best, cand, -np.inf)
        u = masked_u.max(axis=0)
        sel = masked_u.argmax(axis=0)
        piece = np.minimum(sel, n_pieces - 1)
        interior = (sel < n_pieces) & (u == np.take_along_axis(unclamped, piece[None, ...], 0)[0])
        interior &= (u > lo[piece]) & (u < hi[piece])
        if scalar:
            return float(u[0]), int(piece[0]), bool(interior[0])
        return u, piece, interior

    def exchange_thresholds(self, h):
        """Left-half branch thresholds of the fast path for a given h.

        The crossover between adjacent pieces p and p+1 happens where their
        local minima tie: t = c_{p+1} * h + (phi_p + phi_{p+1}) / 2.
        """
        h = np.asarray(h, dtype=np.float64)
        mids = 0.5 * (self.slopes[:-1] + self.slopes[1:])
        return self.breakpoints[1:] * h[..., None] + mids

    def solve_fast(self, t, h):
        """Threshold-chain solver; valid only when the thresholds are sorted.

        Equivalent to :meth:`solve` whenever ``exchange_thresholds`` is
        monotonically increasing for the given h (always true for
        non-increasing slope sequences).  Raises otherwise.
        """
        t = np.asarray(t, dtype=np.float64)
        h = np.asarray(h, dtype=np.float64)
        scalar = t.ndim == 0 and h.ndim == 0
        t, h = np.broadcast_arrays(np.atleast_1d(t), np.atleast_1d(h))
        if np.any(h <= 0):
            raise ValueError("h must be positive")
        delta = self.exchange_thresholds(h)  # (..., L-1)
        if np.any(np.diff(delta, axis=-1) < 0):
            raise ValueError("thresholds are not monotonically ordered; use solve()")

        L = self.n_slopes
        # mirror-fold: solve on the left half, reflect for t >= h/2
        right = t >= 0.5 * h
        tf = np.where(right, h - t, t)
        if L == 1:
            p = np.zeros(t.shape, dtype=np.intp)
        else:
            p = np.sum(delta <= tf[..., None], axis=-1)
        lo = self.bounds[p]
        hi = self.bounds[p + 1]
        u = np.clip((tf - self.slopes[p]) / h, lo, hi)
        u = np.where(right, 1.0 - u, u)
        return float(u[0]) if scalar else u

    def __repr__(self) -> str:
        return f"PiecewiseLinearPenalty(slopes={self.slopes.tolist()})"


def eval_penalty(g, u):
    """Evaluate a penalty object at u in [0,1] (scalar or array)."""
    return g.value(u)


def _check_domain(u):
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise ValueError("penalty argument outside [0, 1]")
    return u
