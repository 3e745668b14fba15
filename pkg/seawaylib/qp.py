# seawaylib/qp.py
"""Dense primal active-set solver for strictly convex QPs.

    min  1/2 x'Hx + g'x
    s.t. A_eq x  = b_eq
         A_in x >= b_in
         lb <= x <= ub

The caller supplies a feasible starting point. Simple bounds in the working
set fix variables and are eliminated from the KKT system instead of being
carried as rows.
"""

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)


class QpStatus(enum.Enum):
    OPTIMAL = "optimal"
    MAX_ITER = "max_iter"
    SINGULAR = "singular"


@dataclass
class QpResult:
    x: np.ndarray
    lam_eq: np.ndarray
    mu_in: np.ndarray
    nu_lower: np.ndarray
    nu_upper: np.ndarray
    status: QpStatus
    iterations: int
    active_rows: list = field(default_factory=list)
    fixed: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status is QpStatus.OPTIMAL


class _Basis:
    """Orthonormal basis of accepted constraint normals (modified Gram-Schmidt)."""

    def __init__(self, n):
        self.vectors = np.zeros((0, n))

    def try_add(self, a, tol=1e-9) -> bool:
        v = np.array(a, dtype=float)
        scale = np.linalg.norm(v)
        if scale == 0.0:
            return False
        for q in self.vectors:
            v -= (q @ v) * q
        norm = np.linalg.norm(v)
        if norm <= tol * scale:
            return False
        self.vectors = np.vstack([self.vectors, v / norm])
        return True


def _initial_working_set(x, A_eq, A_in, b_in, lb, ub, hint, tol):
    n = x.size
    basis = _Basis(n)
    for row in A_eq:
        basis.try_add(row)
    rows, fixed = [], {}

    slack = A_in @ x - b_in if A_in.size else np.zeros(0)
    at_lb = np.isfinite(lb) & (x <= lb + tol)
    at_ub = np.isfinite(ub) & (x >= ub - tol)

    candidates = []
    if hint is not None:
        candidates.extend(hint)
    candidates.extend(("row", i) for i in np.flatnonzero(slack <= tol))
    candidates.extend(("lb", j) for j in np.flatnonzero(at_lb))
    candidates.extend(("ub", j) for j in np.flatnonzero(at_ub))

    seen = set()
    for kind, idx in candidates:
        key = (kind, int(idx))
        if key in seen:
            continue
        seen.add(key)
        if kind == "row":
            if slack[idx] > tol or not basis.try_add(A_in[idx]):
                continue
            rows.append(int(idx))
        else:
            j = int(idx)
            if j in fixed:
                continue
            ok = at_lb[j] if kind == "lb" else at_ub[j]
            if not ok:
                continue
            e = np.zeros(n)
            e[j] = 1.0
            if basis.try_add(e):
                fixed[j] = kind
    return rows, fixed


def _solve_eqp(H, gx, A_eq, A_in, rows, fixed):
    """Step p minimizing the model on the working set, plus multipliers of the rows."""
    n = gx.size
    free = np.ones(n, dtype=bool)
    if fixed:
        free[list(fixed)] = False
    F = np.flatnonzero(free)
    A = np.vstack([A_eq, A_in[rows]]) if rows else A_eq
    A_F = A[:, F]
    m = A_F.shape[0]
    K = np.zeros((F.size + m, F.size + m))
    K[: F.size, : F.size] = H[np.ix_(F, F)]
    K[: F.size, F.size :] = A_F.T
    K[F.size :, : F.size] = A_F
    rhs = np.concatenate([-gx[F], np.zeros(m)])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    p = np.zeros(n)
    p[F] = sol[: F.size]
    lam = -sol[F.size :]
    return p, lam, A


def _working_normals(A_eq, A_in, rows, fixed, n):
    parts = [A_eq]
    if rows:
        parts.append(A_in[rows])
    if fixed:
        E = np.zeros((len(fixed), n))
        E[np.arange(len(fixed)), list(fixed)] = 1.0
        parts.append(E)
    return np.vstack(parts)


def _independent(W, a, tol=1e-8) -> bool:
    """True when `a` is not in the row space of W."""
    scale = float(np.linalg.norm(a))
    if scale == 0.0:
        return False
    if W.shape[0] == 0:
        return True
    coef = np.linalg.lstsq(W.T, a, rcond=None)[0]
    return float(np.linalg.norm(W.T @ coef - a)) > tol * scale


def _blocking_candidates(x, p, A_in, b_in, lb, ub, rows, fixed, skip):
    """Constraints cut by the step x + alpha p, alpha < 1, ordered by (alpha, index)."""
    n = x.size
    m_in = A_in.shape[0]
    p_norm = float(np.linalg.norm(p, np.inf))
    out = []
    if m_in:
        Ap = A_in @ p
        slack = A_in @ x - b_in
        thresh = 1e-11 * p_norm * np.maximum(1.0, np.max(np.abs(A_in), axis=1))
        in_w = np.zeros(m_in, dtype=bool)
        in_w[rows] = True
        for i in np.flatnonzero((~in_w) & (Ap < -thresh)):
            ratio = max(float(slack[i]), 0.0) / -float(Ap[i])
            if ratio < 1.0 and ("row", int(i)) != skip:
                out.append((ratio, int(i), "row", int(i)))
    free = np.ones(n, dtype=bool)
    if fixed:
        free[list(fixed)] = False
    eps = 1e-11 * p_norm
    for j in np.flatnonzero(free & (p < -eps) & np.isfinite(lb)):
        ratio = max(float(x[j] - lb[j]), 0.0) / -float(p[j])
        if ratio < 1.0 and ("lb", int(j)) != skip:
            out.append((ratio, m_in + int(j), "lb", int(j)))
    for j in np.flatnonzero(free & (p > eps) & np.isfinite(ub)):
        ratio = max(float(ub[j] - x[j]), 0.0) / float(p[j])
        if ratio < 1.0 and ("ub", int(j)) != skip:
            out.append((ratio, m_in + int(j), "ub", int(j)))
    out.sort(key=lambda c: (c[0], c[1]))
    return out


def solve_qp(
    H,
    g,
    A_eq,
    b_eq,
    A_in,
    b_in,
    lb,
    ub,
    x0,
    hint=None,
    max_iter: Optional[int] = None,
    tol: float = 1e-10,
) -> QpResult:
    """Primal active-set iterations from the feasible point `x0`.

    `hint` is an iterable of ("row" | "lb" | "ub", index) pairs tried first when
    building the initial working set (e.g. the previous SQP active set).

    On a zero-length step a blocking constraint whose normal depends on the
    working set is passed over. A constraint just released is not re-added by
    the following step. After `bland_after` consecutive zero-length steps the
    release and the blocking choice both fall back to the smallest index.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    n = g.size
    A_eq = np.asarray(A_eq, dtype=float).reshape(-1, n)
    A_in = np.asarray(A_in, dtype=float).reshape(-1, n)
    b_in = np.asarray(b_in, dtype=float).reshape(-1)
    lb = np.asarray(lb, dtype=float).reshape(n)
    ub = np.asarray(ub, dtype=float).reshape(n)
    x = np.array(x0, dtype=float)
    m_in = A_in.shape[0]
    if max_iter is None:
        max_iter = 10 * (n + A_eq.shape[0] + m_in) + 50
    bland_after = 3

    rows, fixed = _initial_working_set(x, A_eq, A_in, b_in, lb, ub, hint, tol=1e-9)
    n_eq = A_eq.shape[0]
    status = QpStatus.MAX_ITER
    lam_eq = np.zeros(n_eq)
    mu_rows = np.zeros(0)
    nu = np.zeros(n)
    stationary = False
    skip = None
    degenerate = 0

    it = 0
    for it in range(1, max_iter + 1):
        gx = H @ x + g
        p, lam, A = _solve_eqp(H, gx, A_eq, A_in, rows, fixed)
        if not np.all(np.isfinite(p)):
            status = QpStatus.SINGULAR
            break
        step_tol = 1e-10 * max(1.0, float(np.linalg.norm(x, np.inf)))

        if stationary or np.linalg.norm(p, np.inf) <= step_tol:
            stationary = False
            lam_eq = lam[:n_eq]
            mu_rows = lam[n_eq:]
            resid = gx - A.T @ lam
            nu = np.zeros(n)
            negative = []
            for k, i in enumerate(rows):
                negative.append((mu_rows[k], i, "row", k))
            for j, kind in fixed.items():
                nu[j] = resid[j] if kind == "lb" else -resid[j]
                negative.append((nu[j], m_in + j, kind, j))
            worst = -tol * max(1.0, float(np.linalg.norm(gx, np.inf)))
            negative = [c for c in negative if c[0] < worst]
            if not negative:
                status = QpStatus.OPTIMAL
                break
            if degenerate >= bland_after:
                _, _, kind, idx = min(negative, key=lambda c: c[1])
            else:
                _, _, kind, idx = min(negative, key=lambda c: c[0])
            if kind == "row":
                skip = ("row", rows.pop(idx))
            else:
                skip = (fixed.pop(idx), idx)
            continue

        alpha, block = 1.0, None
        candidates = _blocking_candidates(x, p, A_in, b_in, lb, ub, rows, fixed, skip)
        W = None
        for ratio, _, kind, idx in candidates:
            if ratio > 1e-14:
                alpha, block = ratio, (kind, idx)
                break
            # zero-length step: only an independent normal may join the working set
            if W is None:
                W = _working_normals(A_eq, A_in, rows, fixed, n)
            if kind == "row":
                a = A_in[idx]
            else:
                a = np.zeros(n)
                a[idx] = 1.0
            if _independent(W, a):
                alpha, block = ratio, (kind, idx)
                break
        skip = None

        x = x + alpha * p
        if block is None:
            stationary = True
            degenerate = 0
            continue
        degenerate = degenerate + 1 if alpha <= 1e-14 else 0
        kind, idx = block
        if kind == "row":
            rows.append(idx)
        else:
            x[idx] = lb[idx] if kind == "lb" else ub[idx]
            fixed[idx] = kind

    mu_in = np.zeros(m_in)
    if status is QpStatus.OPTIMAL and rows:
        mu_in[rows] = np.maximum(mu_rows, 0.0)
    nu_lower = np.zeros(n)
    nu_upper = np.zeros(n)
    for j, kind in fixed.items():
        if kind == "lb":
            nu_lower[j] = max(nu[j], 0.0)
        else:
            nu_upper[j] = max(nu[j], 0.0)
    if status is not QpStatus.OPTIMAL:
        logger.debug("QP stopped with status %s after %d iterations", status.value, it)
    return QpResult(
        x=x,
        lam_eq=lam_eq,
        mu_in=mu_in,
        nu_lower=nu_lower,
        nu_upper=nu_upper,
        status=status,
        iterations=it,
        active_rows=list(rows),
        fixed=dict(fixed),
    )
