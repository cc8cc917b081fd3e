"""Non-negative least squares via the Lawson-Hanson active-set method.

Solves ``min_x ||A x - b||_2  subject to  x >= 0`` and certifies the
answer with the KKT conditions: writing ``g = A'(Ax - b)`` for the
gradient, a solution is accepted when ``g_i >= -tol`` wherever
``x_i = 0`` and ``|g_i| <= tol`` wherever ``x_i > 0``.

The active-set iteration works on the normal equations.  The Gram matrix
``A'A`` is formed once, which makes the batch entry point cheap when many
targets share one design: every row reuses the same Gram matrix and only
``A'b`` is recomputed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = ["NnlsProblem", "NnlsSolution", "NnlsError", "solve_nnls", "solve_nnls_batch"]

DEFAULT_TOL_KKT = 1e-8


class NnlsError(RuntimeError):
    """Raised when the active-set loop exhausts its iteration budget.

    Carries the best iterate found so far so callers can inspect how bad
    the stall actually is.
    """

    def __init__(self, message: str, x: np.ndarray, kkt_violation: float, iterations: int,
                 row: int | None = None):
        super().__init__(message)
        self.x = x
        self.kkt_violation = kkt_violation
        self.iterations = iterations
        self.row = row


@dataclass(frozen=True)
class NnlsProblem:
    """One non-negative least-squares instance.

    design : (m, n) dense matrix A
    target : (m,) right-hand side b
    """

    design: np.ndarray
    target: np.ndarray
    tol_kkt: float = DEFAULT_TOL_KKT
    max_iter: int | None = None  # defaults to 3 * n_columns

    def __post_init__(self):
        A = np.asarray(self.design, dtype=float)
        b = np.asarray(self.target, dtype=float)
        if A.ndim != 2:
            raise ValueError("design must be a 2-D matrix")
        if b.ndim != 1 or b.shape[0] != A.shape[0]:
            raise ValueError("target must be a vector with one entry per design row")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("design and target must be finite")
        object.__setattr__(self, "design", A)
        object.__setattr__(self, "target", b)


@dataclass(frozen=True)
class NnlsSolution:
    x: np.ndarray
    residual_norm: float
    kkt_violation: float
    iterations: int


def _solve_passive(G: np.ndarray, c: np.ndarray, passive: np.ndarray) -> np.ndarray:
    """Unconstrained normal-equation solve restricted to the passive set."""
    Gpp = G[np.ix_(passive, passive)]
    cp = c[passive]
    try:
        return np.linalg.solve(Gpp, cp)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(Gpp, cp, rcond=None)[0]


def _kkt_violation(w: np.ndarray, x: np.ndarray) -> float:
    """Worst violation of the first-order conditions (w = -gradient)."""
    pos = x > 0.0
    worst = 0.0
    if np.any(pos):
        worst = float(np.max(np.abs(w[pos])))
    if np.any(~pos):
        worst = max(worst, float(np.max(w[~pos])))
    return max(worst, 0.0)


def _lawson_hanson(G: np.ndarray, c: np.ndarray, bnorm2: float, tol: float,
                   max_iter: int) -> tuple[np.ndarray, float, float, int]:
    n = G.shape[0]
    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    iterations = 0

    if bnorm2 == 0.0:
        return x, 0.0, 0.0, 0

    while True:
        w = c - G @ x
        candidates = np.where(~passive, w, -np.inf)
        t = int(np.argmax(candidates))
        if candidates[t] <= tol:
            break  # optimal
        if iterations >= max_iter:
            raise NnlsError(
                f"active-set iteration budget of {max_iter} exhausted",
                x=x, kkt_violation=_kkt_violation(w, x), iterations=iterations,
            )
        iterations += 1
        passive[t] = True

        while True:
            z = np.zeros(n)
            z[passive] = _solve_passive(G, c, passive)
            if np.all(z[passive] > 0.0):
                x = z
                break
            # step toward z until the first passive coordinate hits zero
            blocking = passive & (z <= 0.0)
            ratios = x[blocking] / (x[blocking] - z[blocking])
            alpha = float(np.min(ratios))
            x = x + alpha * (z - x)
            x[blocking & (x <= np.finfo(float).eps)] = 0.0
            released = passive & (x <= 0.0)
            x[released] = 0.0
            passive &= ~released
            if not np.any(passive):
                x = np.zeros(n)
                break

    w = c - G @ x
    kkt = _kkt_violation(w, x)
    resid2 = bnorm2 - 2.0 * float(c @ x) + float(x @ (G @ x))
    return x, float(np.sqrt(max(resid2, 0.0))), kkt, iterations


def solve_nnls(problem: NnlsProblem) -> NnlsSolution:
    """Solve one non-negative least-squares problem.

    Degenerate inputs (e.g. duplicated columns) may exhaust the iteration
    budget, in which case an :class:`NnlsError` carrying the best iterate
    is raised.
    """
    A, b = problem.design, problem.target
    n = A.shape[1]
    max_iter = problem.max_iter if problem.max_iter is not None else 3 * n
    G = A.T @ A
    c = A.T @ b
    x, resid, kkt, iters = _lawson_hanson(G, c, float(b @ b), problem.tol_kkt, max_iter)
    return NnlsSolution(x=x, residual_norm=resid, kkt_violation=kkt, iterations=iters)


def solve_nnls_batch(design: np.ndarray, targets, tol_kkt: float = DEFAULT_TOL_KKT,
                     max_iter: int | None = None) -> list[NnlsSolution]:
    """Solve many problems sharing one design matrix.

    ``targets`` may be a sequence of vectors, a 2-D array whose rows are
    targets, or a scipy sparse matrix (rows are targets).  Dense inputs
    go through exactly the same arithmetic as :func:`solve_nnls`, so the
    results match one-at-a-time solves bit for bit; the sparse path
    computes all gradients in a single sparse product instead.

    Errors are re-raised with the offending row index attached.
    """
    A = np.asarray(design, dtype=float)
    n = A.shape[1]
    budget = max_iter if max_iter is not None else 3 * n
    G = A.T @ A

    solutions: list[NnlsSolution] = []
    if sp.issparse(targets):
        mat = targets.tocsr()
        if mat.shape[1] != A.shape[0]:
            raise ValueError("target rows must have one entry per design row")
        C = mat @ A  # row i holds A' b_i
        C = np.asarray(C.todense()) if sp.issparse(C) else np.asarray(C)
        bnorm2 = np.asarray(mat.multiply(mat).sum(axis=1)).ravel()
        for i in range(mat.shape[0]):
            try:
                x, resid, kkt, iters = _lawson_hanson(G, C[i], float(bnorm2[i]), tol_kkt, budget)
            except NnlsError as err:
                raise NnlsError(f"row {i}: {err}", err.x, err.kkt_violation,
                                err.iterations, row=i) from err
            solutions.append(NnlsSolution(x, resid, kkt, iters))
        return solutions

    rows = np.atleast_2d(np.asarray(targets, dtype=float))
    for i, b in enumerate(rows):
        try:
            c = A.T @ b
            x, resid, kkt, iters = _lawson_hanson(G, c, float(b @ b), tol_kkt, budget)
        except NnlsError as err:
            raise NnlsError(f"row {i}: {err}", err.x, err.kkt_violation,
                            err.iterations, row=i) from err
        solutions.append(NnlsSolution(x, resid, kkt, iters))
    return solutions
