"""Cascaded three-variable reformulation of parity-check constraints.

A parity check over bits (x1, x2, x3) is even iff T @ x <= t with

    T = [[ 1, -1, -1],        t = [0, 0, 0, 2]
         [-1,  1, -1],
         [-1, -1,  1],
         [ 1,  1,  1]]

Higher-degree checks are decomposed into chains of such triples by inserting
auxiliary partial-parity bits.  A check over sorted variables (i1..id) with
d >= 4 becomes

    (i1, i2, a1), (a1, i3, a2), ..., (a_{d-4}, i_{d-2}, a_{d-3}),
    (a_{d-3}, i_{d-1}, id)

so a_m carries the parity of the first m+1 variables.  A degree-d check
contributes d-3 auxiliaries and d-2 triples.  Stacking the four T rows of
every triple gives the constraint operator A with AtA = diag(e), where
e_i is 4 times the number of triples touching variable i.

The operator is never materialized densely: all products run off the triple
index lists, so one application costs O(total triple slots) work.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codes import ParityCheckMatrix

T_BLOCK = np.array(
    [[1, -1, -1], [-1, 1, -1], [-1, -1, 1], [1, 1, 1]], dtype=np.float64
)
T_BOUND = np.array([0.0, 0.0, 0.0, 2.0])


@dataclass(frozen=True)
class CascadedSystem:
    """Compiled triple system for one parity-check matrix.

    ``triples`` has shape (n_triples, 3); entries index the extended variable
    vector u = [x, aux], originals first.  ``b`` is implicit: every triple
    contributes the bound block (0, 0, 0, 2).
    """

    n_orig: int
    n_aux: int
    triples: np.ndarray
    e: np.ndarray = field(repr=False)

    @property
    def n_total(self) -> int:
        return self.n_orig + self.n_aux

    @property
    def n_triples(self) -> int:
        return int(self.triples.shape[0])

    @property
    def n_rows(self) -> int:
        return 4 * self.n_triples

    def b(self) -> np.ndarray:
        return np.tile(T_BOUND, self.n_triples)

    def dense_A(self) -> np.ndarray:
        """Explicit (4*n_triples, n_total) matrix. Oracle/debug only."""
        A = np.zeros((self.n_rows, self.n_total))
        for tau, (i, j, k) in enumerate(self.triples):
            A[4 * tau : 4 * tau + 4, [i, j, k]] = T_BLOCK
        return A


def build_cascade(H: ParityCheckMatrix) -> CascadedSystem:
    """Compile ``H`` into its chain-decomposed triple system.

    Auxiliary ids are assigned consecutively in check order; variables within
    each check are taken ascending, which makes builds deterministic.
    """
    n = H.n_vars
    triples: list[tuple[int, int, int]] = []
    next_aux = n
    for row in H.rows:
        d = row.size
        v = [int(i) for i in row]
        if d == 3:
            triples.append((v[0], v[1], v[2]))
            continue
        aux = list(range(next_aux, next_aux + d - 3))
        next_aux += d - 3
        triples.append((v[0], v[1], aux[0]))
        for m in range(d - 4):
            triples.append((aux[m], v[m + 2], aux[m + 1]))
        triples.append((aux[-1], v[d - 2], v[d - 1]))

    tri = np.array(triples, dtype=np.int64).reshape(len(triples), 3)
    n_aux = next_aux - n
    e = np.zeros(n + n_aux)
    np.add.at(e, tri.ravel(), 4.0)  # each T column has squared norm 4
    if np.any(e <= 0):
        raise AssertionError("every variable must appear in at least one triple")

    sys = CascadedSystem(n_orig=n, n_aux=n_aux, triples=tri, e=e)
    _attach_transpose_plan(sys)
    return sys


def _attach_transpose_plan(sys: CascadedSystem) -> None:
    # Precomputed segment plan for apply_At: slot s = 3*tau + pos holds the
    # combination for variable triples[tau, pos]; sorting slots by variable
    # lets a single reduceat accumulate each variable's contributions.
    slots_var = sys.triples.ravel()
    perm = np.argsort(slots_var, kind="stable")
    starts = np.searchsorted(slots_var[perm], np.arange(sys.n_total))
    object.__setattr__(sys, "_t_perm", perm)
    object.__setattr__(sys, "_t_starts", starts)


def apply_A(sys: CascadedSystem, u: np.ndarray) -> np.ndarray:
    """Product A @ u; works on a vector or a stack with trailing axis n_total."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape[-1] != sys.n_total:
        raise ValueError(f"u has trailing dim {u.shape[-1]}, expected {sys.n_total}")
    ui = u[..., sys.triples[:, 0]]
    uj = u[..., sys.triples[:, 1]]
    uk = u[..., sys.triples[:, 2]]
    out = np.empty(u.shape[:-1] + (sys.n_triples, 4))
    out[..., 0] = ui - uj - uk
    out[..., 1] = -ui + uj - uk
    out[..., 2] = -ui - uj + uk
    out[..., 3] = ui + uj + uk
    return out.reshape(u.shape[:-1] + (sys.n_rows,))


def apply_At(sys: CascadedSystem, w: np.ndarray) -> np.ndarray:
    """Product A.T @ w; works on a vector or a stack with trailing axis 4*n_triples."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape[-1] != sys.n_rows:
        raise ValueError(f"w has trailing dim {w.shape[-1]}, expected {sys.n_rows}")
    wb = w.reshape(w.shape[:-1] + (sys.n_triples, 4))
    w0, w1, w2, w3 = wb[..., 0], wb[..., 1], wb[..., 2], wb[..., 3]
    combos = np.empty(w.shape[:-1] + (sys.n_triples, 3))
    combos[..., 0] = w0 - w1 - w2 + w3
    combos[..., 1] = -w0 + w1 - w2 + w3
    combos[..., 2] = -w0 - w1 + w2 + w3
    flat = combos.reshape(w.shape[:-1] + (3 * sys.n_triples,))
    ordered = flat[..., sys._t_perm]
    return np.add.reduceat(ordered, sys._t_starts, axis=-1)


def feasible_aux(sys: CascadedSystem, x) -> np.ndarray:
    """Extend a codeword with the chain partial parities.

    Returns u = [x, aux] in {0,1}^(n_total) with every triple even, hence
    A @ u <= b elementwise.  Raises if ``x`` fails any original check.
    """
    x = np.asarray(x, dtype=np.int64)
    if x.shape != (sys.n_orig,):
        raise ValueError(f"x has shape {x.shape}, expected ({sys.n_orig},)")
    u = np.zeros(sys.n_total, dtype=np.int64)
    u[: sys.n_orig] = x
    # Chain order guarantees each triple's auxiliary appears after the two
    # values that determine it, so one pass settles everything.
    for i, j, k in sys.triples:
        if k >= sys.n_orig:
            u[k] = u[i] ^ u[j]
        elif (u[i] + u[j] + u[k]) % 2 != 0:
            raise ValueError("x does not satisfy the parity checks")
    return u


def triples_even(sys: CascadedSystem, u) -> bool:
    """True iff every triple of a binary extended vector has even parity."""
    u = np.asarray(u, dtype=np.int64)
    sums = u[sys.triples[:, 0]] + u[sys.triples[:, 1]] + u[sys.triples[:, 2]]
    return bool(np.all(sums % 2 == 0))
