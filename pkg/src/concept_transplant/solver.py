"""Dense linear-algebra primitives and the elastic-net coordinate-descent solver.

Matrices are plain ``numpy`` arrays stored as 32-bit floats; every reduction
is carried out in 64-bit.  The solver minimises

    J(w) = ||v - D w||^2 + lam * (rho * ||w||_1 + (1 - rho) / 2 * ||w||^2)

by cyclic coordinate descent starting from ``w = 0``.  Note there is no 1/2
in front of the squared loss, so for orthonormal columns and ``rho = 1`` the
solution is ``soft_threshold(D.T @ v, lam / 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateAtom,
    DimensionMismatch,
    EmptyInput,
    NonFinite,
    RankDeficient,
    ValidationError,
)

DEFAULT_LAMBDA = 0.01

# sweeps of plain coordinate descent before the active-set finisher is tried
REFINE_AFTER = 20
# relative alpha gap a coordinate must travel before reversing its last join/leave
BOUNDARY_MARGIN = 1e-6

PCA_MAX_ITER = 1000
PCA_TOL = 1e-9
# squarings of the Gram matrix before power iteration
PCA_SQUARINGS = 12


def as_dense(a, name: str = "matrix") -> np.ndarray:
    """Validate ``a`` as a finite 2-D matrix and return it as C-ordered float32."""
    m = np.asarray(a)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {m.shape}")
    m = np.ascontiguousarray(m, dtype=np.float32)
    if not np.isfinite(m).all():
        raise NonFinite(f"{name} contains NaN or Inf")
    return m


def _as_vector(v, name: str = "vector") -> np.ndarray:
    x = np.asarray(v, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-D, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise NonFinite(f"{name} contains NaN or Inf")
    return x


@dataclass(frozen=True)
class SolverConfig:
    lam: float = DEFAULT_LAMBDA
    rho: float = 1.0
    tol: float = 1e-7
    max_sweeps: int = 1000

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ValidationError(f"lam must be >= 0, got {self.lam}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValidationError(f"rho must lie in [0, 1], got {self.rho}")
        if not self.tol > 0:
            raise ValidationError(f"tol must be > 0, got {self.tol}")
        if int(self.max_sweeps) < 1:
            raise ValidationError(f"max_sweeps must be >= 1, got {self.max_sweeps}")


@dataclass(frozen=True, eq=False)
class SparseSolution:
    weights: np.ndarray
    sweeps_used: int
    converged: bool
    objective: float
    # objective after each full sweep, in sweep order
    objective_trace: tuple = field(default=(), repr=False)


def soft_threshold(x: float, t: float) -> float:
    """Return ``sign(x) * max(|x| - t, 0)``."""
    if t < 0:
        raise ValidationError(f"threshold must be >= 0, got {t}")
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


def objective(v, D, w, lam: float, rho: float) -> float:
    """Elastic-net objective evaluated directly from the residual, in float64."""
    v64 = np.asarray(v, dtype=np.float64)
    D64 = np.asarray(D, dtype=np.float64)
    w64 = np.asarray(w, dtype=np.float64)
    r = v64 - D64 @ w64
    penalty = lam * (rho * np.abs(w64).sum() + 0.5 * (1.0 - rho) * (w64 @ w64))
    return float(r @ r + penalty)


def kkt_violation(v, D, w, lam: float, rho: float) -> float:
    """Largest violation of the stationarity conditions of the objective.

    For ``w_j != 0`` the subgradient must vanish exactly; for ``w_j == 0`` the
    correlation ``|2 d_j^T r|`` may not exceed ``lam * rho``.
    """
    v64 = np.asarray(v, dtype=np.float64)
    D64 = np.asarray(D, dtype=np.float64)
    w64 = np.asarray(w, dtype=np.float64)
    grad = 2.0 * (D64.T @ (v64 - D64 @ w64))
    return _kkt_from_grad(grad, w64, lam, rho)


def _kkt_from_grad(grad: np.ndarray, w: np.ndarray, lam: float, rho: float) -> float:
    active = w != 0
    viol = np.empty_like(grad)
    viol[active] = np.abs(
        grad[active] - lam * rho * np.sign(w[active]) - lam * (1.0 - rho) * w[active]
    )
    viol[~active] = np.maximum(np.abs(grad[~active]) - lam * rho, 0.0)
    return float(viol.max()) if viol.size else 0.0


def kkt_tolerance(v) -> float:
    return 1e-6 * (1.0 + float(np.linalg.norm(np.asarray(v, dtype=np.float64))))


def elastic_net_solve(v, D, cfg: SolverConfig | None = None) -> SparseSolution:
    """Solve the elastic-net problem for one latent vector ``v`` (length d)
    over the columns of ``D`` (d x N).

    Works on the N x N Gram form: ``G = D^T D`` and ``c = D^T v`` are formed
    once, after which each coordinate step costs O(N) regardless of d.  The
    partial residual correlation ``2 d_j^T r_{-j}`` equals
    ``2 (c_j - (G w)_j + G_jj w_j)``.

    Coordinate descent crawls on ill-conditioned or underdetermined
    dictionaries.  If it has not converged after ``REFINE_AFTER`` sweeps, a
    lasso homotopy is run once; its answer replaces the iterate only if
    it passes the optimality check and lowers the objective.  The remaining
    sweeps then confirm it.

    A run is reported as converged once the largest coefficient change in a
    sweep drops below ``cfg.tol`` *and* the stationarity conditions hold to
    a tenth of ``1e-6 * (1 + ||v||)``.
    """
    cfg = cfg or SolverConfig()
    D32 = as_dense(D, "dictionary")
    x = _as_vector(v, "source vector")
    d, n = D32.shape
    if d < 1 or n < 1:
        raise EmptyInput(f"dictionary must be non-empty, got shape {D32.shape}")
    if x.shape[0] != d:
        raise DimensionMismatch(f"vector length {x.shape[0]} != dictionary rows {d}")

    D64 = D32.astype(np.float64)
    gram = D64.T @ D64
    corr = D64.T @ x
    diag = np.diag(gram).copy()
    zero_cols = np.flatnonzero(diag == 0.0)
    if zero_cols.size:
        raise DegenerateAtom(f"dictionary column(s) {zero_cols.tolist()} are all zero")

    l1 = cfg.lam * cfg.rho
    l2 = cfg.lam * (1.0 - cfg.rho)
    denom = 2.0 * diag + l2
    vv = float(x @ x)
    kkt_target = 0.1 * kkt_tolerance(x)

    w = np.zeros(n)
    trace = []
    converged = False
    sweeps = 0
    for sweeps in range(1, int(cfg.max_sweeps) + 1):
        # refresh G w each sweep so incremental updates cannot drift
        gw = gram @ w
        max_change = 0.0
        for j in range(n):
            old = w[j]
            z = 2.0 * (corr[j] - gw[j] + diag[j] * old)
            new = soft_threshold(z, l1) / denom[j]
            delta = new - old
            if delta != 0.0:
                w[j] = new
                gw += gram[:, j] * delta
                if abs(delta) > max_change:
                    max_change = abs(delta)
        if max_change < cfg.tol:
            grad = 2.0 * (corr - gram @ w)
            if _kkt_from_grad(grad, w, cfg.lam, cfg.rho) <= kkt_target:
                converged = True
                trace.append(_gram_objective(vv, corr, gram, w, cfg))
                break
        if sweeps == REFINE_AFTER:
            refined = _homotopy(corr, gram, l1, l2, max_events=50 * n + 50)
            if refined is not None:
                grad = 2.0 * (corr - gram @ refined)
                if (_kkt_from_grad(grad, refined, cfg.lam, cfg.rho) <= kkt_target
                        and _gram_objective(vv, corr, gram, refined, cfg)
                        <= _gram_objective(vv, corr, gram, w, cfg)):
                    w = refined
        trace.append(_gram_objective(vv, corr, gram, w, cfg))

    return SparseSolution(
        weights=w,
        sweeps_used=sweeps,
        converged=converged,
        objective=objective(x, D64, w, cfg.lam, cfg.rho),
        objective_trace=tuple(float(t) for t in trace),
    )


def _gram_objective(vv, corr, gram, w, cfg: SolverConfig) -> float:
    fit = vv - 2.0 * (corr @ w) + w @ (gram @ w)
    return float(fit + cfg.lam * (cfg.rho * np.abs(w).sum() + 0.5 * (1.0 - cfg.rho) * (w @ w)))


def _homotopy(corr, gram, l1: float, l2: float, max_events: int):
    """Exact solution by following the lasso path from w = 0 down to ``l1``.

    In the scaled form ``1/2 w^T H w - c^T w + alpha ||w||_1`` with
    ``H = G + l2/2 I`` and ``alpha = l1/2``, the active coefficients move
    linearly in alpha between events: ``w_A = a - alpha * b`` with
    ``H_AA a = c_A`` and ``H_AA b = s_A``.  An event is an inactive correlation
    reaching ``+-alpha`` (join) or an active coefficient hitting zero (leave).
    Returns None if the event budget runs out.
    """
    n = corr.shape[0]
    h = gram + 0.5 * l2 * np.eye(n)
    target = 0.5 * l1
    w = np.zeros(n)
    start = int(np.argmax(np.abs(corr)))
    alpha = abs(corr[start])
    if alpha <= target:
        return w
    active = [start]
    signs = {start: np.sign(corr[start])}
    dropped = joined = None
    for _ in range(max_events):
        idx = np.array(active)
        s_a = np.array([signs[i] for i in active])
        h_aa = h[np.ix_(idx, idx)]
        a = np.linalg.lstsq(h_aa, corr[idx], rcond=None)[0]
        b = np.linalg.lstsq(h_aa, s_a, rcond=None)[0]

        best_alpha, event, who = target, None, None
        ceiling = alpha * (1.0 - 1e-12)
        inactive = np.setdiff1d(np.arange(n), idx)
        if inactive.size:
            p_ = corr[inactive] - h[np.ix_(inactive, idx)] @ a
            q_ = h[np.ix_(inactive, idx)] @ b
            for j, pj, qj in zip(inactive, p_, q_):
                # a coordinate that just changed state sits on the boundary at the current alpha
                limit = alpha * (1.0 - BOUNDARY_MARGIN) if j == dropped else ceiling
                for denom, num in ((1.0 - qj, pj), (1.0 + qj, -pj)):
                    if denom > 1e-15:
                        cand = num / denom
                        if best_alpha < cand < limit:
                            best_alpha, event, who = cand, "join", j
        for k, ak, bk in zip(idx, a, b):
            limit = alpha * (1.0 - BOUNDARY_MARGIN) if k == joined else ceiling
            if bk != 0.0:
                cand = ak / bk
                if best_alpha < cand < limit:
                    best_alpha, event, who = cand, "leave", k

        alpha = best_alpha
        w[:] = 0.0
        # direct solve: a - alpha * b cancels badly when H_AA is ill-conditioned
        w[idx] = np.linalg.lstsq(h_aa, corr[idx] - alpha * s_a, rcond=None)[0]
        if event is None:
            return w
        if event == "join":
            rho_j = corr[who] - h[who] @ w
            active.append(who)
            signs[who] = np.sign(rho_j) if rho_j != 0 else 1.0
            dropped, joined = None, who
        else:
            active.remove(who)
            del signs[who]
            w[who] = 0.0
            dropped, joined = who, None
            if not active:
                start = int(np.argmax(np.abs(corr - h @ w)))
                active, signs = [start], {start: np.sign(corr[start] - h[start] @ w)}
    return None


def mean_rows(rows) -> np.ndarray:
    """Arithmetic mean of the rows, accumulated in float64, returned as float32."""
    m = np.asarray(rows)
    if m.ndim != 2:
        raise DimensionMismatch(f"rows must be 2-D, got shape {m.shape}")
    if m.shape[0] < 1:
        raise EmptyInput("mean of zero rows is undefined")
    m = as_dense(m, "rows")
    return m.astype(np.float64).mean(axis=0).astype(np.float32)


def pca_first_component(rows) -> np.ndarray:
    """First principal direction of the rows of a K x d matrix.

    Power iteration started from the normalised all-ones vector, run on a
    high power of the centred Gram matrix (``Xc Xc^T`` or ``Xc^T Xc``,
    whichever is smaller) obtained by repeated squaring.  Plain iteration
    needs ~1/gap steps and stalls when the top two eigenvalues are close.  The sign is
    fixed so that the component points along the row mean; when the mean is
    zero or orthogonal, the first nonzero coordinate is made positive.
    """
    m = as_dense(rows, "rows")
    k, d = m.shape
    if k < 2:
        raise EmptyInput(f"PCA needs at least 2 rows, got {k}")
    X = m.astype(np.float64)
    mean = X.mean(axis=0)
    Xc = X - mean
    scale = np.linalg.norm(X)
    if np.linalg.norm(Xc) <= 1e-12 * max(scale, np.finfo(float).tiny):
        raise RankDeficient("all rows are identical; there is no variance to explain")

    # iterate in whichever Gram space is smaller: rows (K x K) or columns (d x d)
    in_rows = k < d
    gram = Xc @ Xc.T if in_rows else Xc.T @ Xc
    start = np.full(d, 1.0 / np.sqrt(d))
    y = Xc @ start if in_rows else start
    # B = gram^(2^PCA_SQUARINGS) up to scale, so each step below is thousands of plain steps
    power = gram / np.linalg.norm(gram)
    for _ in range(PCA_SQUARINGS):
        power = power @ power
        power /= np.linalg.norm(power)
    if np.linalg.norm(power @ y) <= 1e-12 * np.linalg.norm(y):
        # start is orthogonal to the dominant direction; use the dominant column instead
        y = power[:, int(np.argmax(np.einsum("ij,ij->j", power, power)))]
    y = y / np.linalg.norm(y)

    for _ in range(PCA_MAX_ITER):
        nxt = power @ y
        nxt /= np.linalg.norm(nxt)
        done = np.linalg.norm(nxt - y) < PCA_TOL
        y = nxt
        if done:
            break
    u = Xc.T @ y if in_rows else y
    u = u / np.linalg.norm(u)

    along = float(u @ mean)
    if np.linalg.norm(mean) > 0 and abs(along) > 1e-9 * np.linalg.norm(mean):
        if along < 0:
            u = -u
    else:
        first = np.flatnonzero(np.abs(u) > 1e-12)
        if first.size and u[first[0]] < 0:
            u = -u
    return u.astype(np.float32)
