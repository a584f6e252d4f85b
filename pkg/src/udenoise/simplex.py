"""Dense two-phase primal simplex with Bland's rule.

Solves min c.x subject to A x = b, x >= 0 (b must be non-negative; flip row
signs before calling).  Bland's rule (lowest-index entering and leaving
variable) makes the returned vertex deterministic and cycling-free; desk-scale
instances (a few hundred rows) are the intended regime.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_PIVOT_TOL = 1e-9
_COST_TOL = 1e-9


class SimplexError(RuntimeError):
    pass


@dataclass
class SimplexResult:
    x: np.ndarray
    objective: float
    iterations: int
    status: str  # "optimal" | "iteration-limit" | "unbounded"

    @property
    def ok(self):
        return self.status == "optimal"


def _pivot(T, rhs, basis, row, col):
    piv = T[row, col]
    T[row] /= piv
    rhs[row] /= piv
    factor = T[:, col].copy()
    factor[row] = 0.0
    T -= np.outer(factor, T[row])
    rhs -= factor * rhs[row]
    basis[row] = col


def _run(T, rhs, basis, c, max_iter):
    """Bland-rule iterations on tableau T (rows already in basis form)."""
    it = 0
    n = T.shape[1]
    while it < max_iter:
        reduced = c - c[basis] @ T
        candidates = np.nonzero(reduced < -_COST_TOL)[0]
        if candidates.size == 0:
            return it, "optimal"
        col = int(candidates[0])  # Bland: lowest index enters
        column = T[:, col]
        feasible = column > _PIVOT_TOL
        if not np.any(feasible):
            return it, "unbounded"
        ratios = np.full(T.shape[0], np.inf)
        ratios[feasible] = rhs[feasible] / column[feasible]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + 1e-12)[0]
        row = int(ties[np.argmin(basis[ties])])  # Bland: lowest basis index leaves
        _pivot(T, rhs, basis, row, col)
        it += 1
    return it, "iteration-limit"


def solve(c, A, b, max_iter=None):
    """Two-phase dense simplex for min c.x s.t. A x = b, x >= 0, b >= 0.

    Unit columns of A seed the initial basis; artificial variables cover the
    remaining rows and are driven out in phase 1.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    c = np.asarray(c, dtype=float).reshape(-1)
    m, n = A.shape
    if b.size != m or c.size != n:
        raise SimplexError("inconsistent LP dimensions")
    if np.any(b < -1e-12):
        raise SimplexError("right-hand side must be non-negative")
    if max_iter is None:
        max_iter = 50 * (m + n)

    # crash basis from unit columns
    basis = np.full(m, -1, dtype=int)
    col_nonzeros = (np.abs(A) > _PIVOT_TOL).sum(axis=0)
    for j in range(n):
        if col_nonzeros[j] != 1:
            continue
        i = int(np.argmax(np.abs(A[:, j])))
        if basis[i] == -1 and abs(A[i, j] - 1.0) < 1e-12:
            basis[i] = j
    uncovered = np.nonzero(basis == -1)[0]
    n_art = uncovered.size

    T = np.hstack([A, np.zeros((m, n_art))])
    for t, i in enumerate(uncovered):
        T[i, n + t] = 1.0
        basis[i] = n + t
    rhs = b.copy()

    total_iters = 0
    if n_art:
        c1 = np.zeros(n + n_art)
        c1[n:] = 1.0
        it, status = _run(T, rhs, basis, c1, max_iter)
        total_iters += it
        if status != "optimal":
            raise SimplexError(f"phase 1 failed: {status}")
        if rhs[basis >= n].sum() > 1e-7:
            raise SimplexError("LP infeasible")
        # drive residual artificials out of the basis where possible
        for i in np.nonzero(basis >= n)[0]:
            pivot_cols = np.nonzero(np.abs(T[i, :n]) > _PIVOT_TOL)[0]
            if pivot_cols.size:
                _pivot(T, rhs, basis, int(i), int(pivot_cols[0]))
        keep = basis < n  # rows still basic in an artificial are redundant
        T = T[keep][:, :n]
        rhs = rhs[keep]
        basis = basis[keep]
    else:
        T = T[:, :n]

    it, status = _run(T, rhs, basis, c, max_iter - total_iters)
    total_iters += it
    if status == "unbounded":
        raise SimplexError("LP unbounded")

    x = np.zeros(n)
    x[basis] = np.maximum(rhs, 0.0)
    return SimplexResult(x=x, objective=float(c @ x),
                         iterations=total_iters, status=status)


def l1_fit(A, b, extra_eq=None, max_iter=None, solver="auto", size_cap=160):
    """min ||A p - b||_1 over p >= 0 subject to optional equality rows.

    ``extra_eq`` is a pair (E, f) of equality constraints E p = f (typically
    the simplex constraint sum(p) = 1).  Residuals are split into positive and
    negative parts, the standard LP expansion of an L1 objective.

    ``solver`` is "bland" (this module's dense simplex), "highs" (scipy's
    sparse LP, for instances too large for a dense tableau), or "auto".
    Returns (p, residuals, objective_in_rows, iterations).
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    m, n = A.shape
    if extra_eq is not None:
        E, f = extra_eq
        E = np.atleast_2d(np.asarray(E, dtype=float))
        f = np.atleast_1d(np.asarray(f, dtype=float))
    else:
        E = np.zeros((0, n))
        f = np.zeros(0)
    me = E.shape[0]

    if solver == "auto":
        # the dense tableau is quadratic in the row count and Bland's rule
        # stalls on heavily degenerate instances (many zero-density rows);
        # beyond desk scale, delegate to a sparse solver
        solver = "bland" if (m + me) <= size_cap and n <= 64 else "highs"

    if solver == "highs":
        from scipy import sparse
        from scipy.optimize import linprog

        c = np.concatenate([np.zeros(n), np.ones(2 * m)])
        eye = sparse.eye(m, format="csc")
        top = sparse.hstack([sparse.csc_matrix(A), -eye, eye], format="csc")
        bottom = sparse.hstack(
            [sparse.csc_matrix(E), sparse.csc_matrix((me, 2 * m))],
            format="csc")
        A_eq = sparse.vstack([top, bottom], format="csc")
        b_eq = np.concatenate([b, f])
        res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
        if not res.success:
            # numerically hard instances occasionally trip the simplex
            # tolerance check; retry without presolve, then interior point
            for kwargs in ({"method": "highs", "options": {"presolve": False}},
                           {"method": "highs-ipm"}):
                res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None),
                              **kwargs)
                if res.success:
                    break
        if not res.success:
            raise SimplexError(f"linprog failed: {res.message}")
        p = res.x[:n]
        resid = np.abs(A @ p - b)
        return p, resid, float(resid.sum()), int(res.nit)

    # rows with negative rhs are sign-flipped so b >= 0; then the negative
    # residual part supplies a unit column for the crash basis
    signs = np.where(b < 0, -1.0, 1.0)
    As = A * signs[:, None]
    bs = b * signs
    ncols = n + 2 * m
    M = np.zeros((m + me, ncols))
    M[:m, :n] = As
    M[:m, n:n + m] = -np.eye(m)  # t_plus
    M[:m, n + m:] = np.eye(m)    # t_minus (unit columns, crash basis)
    M[m:, :n] = E
    rhs = np.concatenate([bs, f])
    if np.any(rhs[m:] < 0):
        M[m:][rhs[m:] < 0] *= -1.0
        rhs[m:] = np.abs(rhs[m:])
    c = np.concatenate([np.zeros(n), np.ones(2 * m)])
    res = solve(c, M, rhs, max_iter=max_iter)
    if res.status != "optimal":
        raise SimplexError(f"simplex did not converge: {res.status} "
                           f"after {res.iterations} iterations")
    p = res.x[:n]
    resid = np.abs(A @ p - b)
    return p, resid, float(resid.sum()), res.iterations
