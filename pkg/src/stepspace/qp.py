"""Dense primal active-set solver for small convex QPs.

Solves  min 1/2 x' H x + g' x  s.t.  A x <= b  with H positive definite,
starting from a feasible point. Pivoting is deterministic (lowest index
among ties) and iterations are hard-capped, so solves are reproducible.
This is intentionally self-contained: footstep problems are small and
the timing claims should not depend on an external solver.
"""

from __future__ import annotations

import numpy as np

_TOL = 1e-10


def solve_qp(H, g, A, b, x0, max_iter=None, tol=_TOL):
    """Returns (x, status, iterations); status is 'optimal' or 'max_iter'."""
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.asarray(x0, dtype=float).copy()
    n = len(x)
    m = len(b)
    if max_iter is None:
        max_iter = 50 + 10 * (n + m)

    work: list[int] = []
    for it in range(max_iter):
        p, lam = _kkt_step(H, g, A, x, work)
        if np.linalg.norm(p) <= tol * (1.0 + np.linalg.norm(x)):
            if len(work) == 0:
                return x, "optimal", it
            worst = int(np.argmin(lam))
            if lam[worst] >= -tol:
                return x, "optimal", it
            work.pop(worst)
            continue

        # Longest step along p that stays feasible.
        alpha = 1.0
        blocking = -1
        ap = A @ p
        slack = b - A @ x
        for i in range(m):
            if i in work or ap[i] <= tol:
                continue
            a_i = slack[i] / ap[i]
            if a_i < alpha - 1e-14:
                alpha = max(a_i, 0.0)
                blocking = i
        x = x + alpha * p
        if blocking >= 0:
            if len(work) >= n:
                # Degenerate working set; drop the oldest constraint.
                work.pop(0)
            work.append(blocking)

    return x, "max_iter", max_iter


def _kkt_step(H, g, A, x, work):
    """Solve the equality-constrained subproblem on the working set."""
    n = len(x)
    k = len(work)
    grad = H @ x + g
    if k == 0:
        try:
            p = -np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            p = -np.linalg.lstsq(H, grad, rcond=None)[0]
        return p, np.empty(0)
    Aw = A[work]
    kkt = np.zeros((n + k, n + k))
    kkt[:n, :n] = H
    kkt[:n, n:] = Aw.T
    kkt[n:, :n] = Aw
    rhs = np.concatenate([-grad, np.zeros(k)])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:n], sol[n:]


def phase1(A, b, x0, reg_x=1e-12, reg_t=1e-6, max_iter=None):
    """Minimize the maximum constraint violation of A x <= b.

    Solved as a slightly regularized QP over (x, t):
        min 1/2 reg_x |x - x0|^2 + 1/2 reg_t t^2 + t
        s.t. A x - t <= b
    which is trivially feasible from (x0, max violation). Returns
    (x, max_violation_at_x).
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    viol0 = float(np.max(A @ x0 - b)) if len(b) else 0.0
    if viol0 <= 0.0:
        return x0.copy(), viol0

    n = len(x0)
    H = np.diag(np.concatenate([np.full(n, reg_x), [reg_t]]))
    g = np.concatenate([-reg_x * x0, [1.0]])
    A_ext = np.hstack([A, -np.ones((len(b), 1))])
    z0 = np.concatenate([x0, [viol0 + 1.0]])
    z, _, _ = solve_qp(H, g, A_ext, b, z0, max_iter=max_iter)
    x = z[:n]
    return x, float(np.max(A @ x - b))
