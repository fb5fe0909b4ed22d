"""Proximal solvers: l1-regularized recovery through the selection
operator, singular value thresholding for nuclear-norm completion,
alternating least squares factorization, and the closed-form low-rank
denoiser.

The l1 solver is an accelerated proximal gradient iteration with a
monotone safeguard; because the sensing operator composed with an
orthonormal basis has spectral norm at most one, a unit step size is
provably convergent and no line search is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .transforms import (
    SparsifyingBasis,
    VectorizationOrder,
    devectorize,
    pci_from_mask,
    vectorize,
)


class SolverError(RuntimeError):
    """Raised when an iteration diverges or produces non-finite values."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 2000
    tolerance: float = 1e-8          # relative iterate / residual change
    step_size: float | str = "auto"  # "auto" = 1, valid when ||A|| <= 1
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")

    @property
    def step(self) -> float:
        return 1.0 if self.step_size == "auto" else float(self.step_size)


@dataclass
class SolverDiagnostics:
    iterations_used: int = 0
    objective_trace: list = field(default_factory=list)
    converged: bool = False


@dataclass(frozen=True)
class RegularizationWeights:
    """Per-formulation regularization strengths; None means auto-select.

    Slots follow the recovery formulations: lambda1 per-column DCT,
    lambda2 per-row DCT, lambda3 full-vector DCT, lambda4 two-dimensional
    DCT, lambda5 the low-rank denoising stage.
    """

    lambda1: float | None = None
    lambda2: float | None = None
    lambda3: float | None = None
    lambda4: float | None = None
    lambda5: float | None = None

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "lambda4", "lambda5"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be non-negative, got {v}")


def soft_threshold(v: np.ndarray, tau: float) -> np.ndarray:
    """Elementwise sign(v) * max(|v| - tau, 0)."""
    if tau < 0:
        raise ValueError("threshold must be non-negative")
    v = np.asarray(v)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def fista_l1(A_apply, A_adjoint, y, lam: float, config: SolverConfig = SolverConfig(),
             n_coefficients: int | None = None, x0: np.ndarray | None = None):
    """Approximately minimize 0.5*||y - A s||^2 + lam*||s||_1.

    ``A_apply``/``A_adjoint`` are matrix-free callables; the operator norm
    must not exceed one (true for a selection of orthonormal-basis
    coefficients).  Accelerated proximal steps are safeguarded so the
    recorded objective never increases; momentum restarts whenever it
    would.  Stops when the relative iterate change drops below the
    configured tolerance.  ``x0`` warm-starts the iteration (used by the
    sweep driver for continuation across regularization strengths).

    Returns (coefficients, SolverDiagnostics).
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    y = np.asarray(y, dtype=float)
    step = config.step
    if n_coefficients is None:
        n_coefficients = A_adjoint(np.zeros_like(y)).size

    def objective(s, As):
        r = y - As
        return 0.5 * float(r @ r) + lam * float(np.abs(s).sum())

    if x0 is None:
        x = np.zeros(n_coefficients)
        Ax = np.zeros_like(y)
    else:
        x = np.asarray(x0, dtype=float).copy()
        Ax = A_apply(x)
    f_x = objective(x, Ax)
    x_prev, Ax_prev = x, Ax
    t_k = 1.0
    z, Az = x, Ax
    diag = SolverDiagnostics()
    for it in range(config.max_iters):
        u = soft_threshold(z + step * A_adjoint(y - Az), step * lam)
        Au = A_apply(u)
        f_u = objective(u, Au)
        restarted = False
        if not f_u <= f_x:
            # momentum overshot: restart from the last accepted iterate,
            # where a plain proximal step cannot ascend
            t_k = 1.0
            restarted = True
            u = soft_threshold(x + step * A_adjoint(y - Ax), step * lam)
            Au = A_apply(u)
            f_u = objective(u, Au)
        if not (math.isfinite(f_u) and np.isfinite(u).all()):
            diag.iterations_used = it + 1
            raise SolverError("non-finite values in l1 iteration", diag)
        if restarted and f_u > f_x:
            # even the plain step cannot descend: numerically stationary
            diag.objective_trace.append(f_x)
            diag.iterations_used = it + 1
            diag.converged = True
            break
        x_prev, Ax_prev = x, Ax
        x, Ax, f_x = u, Au, f_u
        diag.objective_trace.append(f_x)
        diag.iterations_used = it + 1
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_k * t_k))
        beta = (t_k - 1.0) / t_next
        z = x + beta * (x - x_prev)
        Az = Ax + beta * (Ax - Ax_prev)
        t_k = t_next
        delta = np.linalg.norm(x - x_prev)
        if delta <= config.tolerance * max(np.linalg.norm(x), 1e-30):
            diag.converged = True
            break
    return x, diag


_MATRIX_BASIS_KINDS = {"dct-spatial", "dct-temporal", "kron-dct"}


def build_cs_operator(Y: np.ndarray, B: np.ndarray, basis: SparsifyingBasis,
                      order: VectorizationOrder):
    """Assemble the matrix-free pieces of the recovery problem.

    Returns (A_apply, A_adjoint, y_obs, to_matrix): the forward operator
    coefficients -> observed samples, its adjoint, the observed sample
    vector, and a map from coefficients back to the data grid.  Bases
    defined on the matrix (per-row, per-column, two-dimensional DCT) use
    column-major vectorization regardless of ``order``, which only shapes
    the full-vector transform.
    """
    Y = np.asarray(Y, dtype=float)
    B = np.asarray(B)
    if Y.shape != B.shape or Y.ndim != 2:
        raise ValueError("data and mask must be matrices of the same shape")
    if basis.n_total != Y.size:
        raise ValueError(f"basis covers {basis.n_total} cells, data has {Y.size}")
    if basis.kind in _MATRIX_BASIS_KINDS:
        if basis.shape != Y.shape:
            raise ValueError(f"basis shape {basis.shape} does not match data {Y.shape}")
        order = VectorizationOrder.COLUMN_MAJOR
    n, t = Y.shape
    phi = pci_from_mask(B, order)
    y_obs = phi.apply(vectorize(np.where(B != 0, Y, 0.0), order))

    def A_apply(s):
        return phi.apply(basis.inverse(s))

    def A_adjoint(r):
        return basis.forward(phi.adjoint(r))

    def to_matrix(s):
        return devectorize(basis.inverse(s), n, t, order)

    return A_apply, A_adjoint, y_obs, to_matrix


def recover_cs(Y: np.ndarray, B: np.ndarray, basis: SparsifyingBasis, lam: float,
               order: VectorizationOrder = VectorizationOrder.TEMPORAL_SNAKE,
               config: SolverConfig = SolverConfig()):
    """Fill a partially observed matrix by l1-regularized basis recovery.

    Builds the selection operator from the mask, solves for sparse
    coefficients with :func:`fista_l1`, and maps back to the grid.

    Returns (matrix, SolverDiagnostics).
    """
    A_apply, A_adjoint, y_obs, to_matrix = build_cs_operator(Y, B, basis, order)
    s_hat, diag = fista_l1(A_apply, A_adjoint, y_obs, lam, config,
                           n_coefficients=basis.n_total)
    return to_matrix(s_hat), diag


def singular_value_soft_threshold(X: np.ndarray, tau: float) -> np.ndarray:
    """Shrink the singular values of X by tau, dropping any below it."""
    if tau < 0:
        raise ValueError("threshold must be non-negative")
    X = np.asarray(X, dtype=float)
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    return (U * np.maximum(s - tau, 0.0)) @ Vt


def denoise_low_rank(X_hat: np.ndarray, lambda5: float) -> np.ndarray:
    """Exact minimizer of ||X_hat - X||_F^2 + lambda5 * ||X||_*.

    The objective carries no 1/2 on the quadratic, so the proximal
    threshold is lambda5 / 2.
    """
    if lambda5 < 0:
        raise ValueError("lambda5 must be non-negative")
    if lambda5 == 0.0:
        return np.array(X_hat, dtype=float)
    return singular_value_soft_threshold(X_hat, lambda5 / 2.0)


def svt_complete(Y: np.ndarray, B: np.ndarray, tau: float | None = None,
                 delta: float | None = None, config: SolverConfig = SolverConfig()):
    """Nuclear-norm matrix completion by singular value thresholding.

    Dual ascent on the observed entries with singular-value shrinkage at
    ``tau``.  Defaults: tau = 5*sqrt(n*t); delta = 1.2*N/M capped at 1.9,
    since the uncapped heuristic oscillates once more than half the
    entries are missing.  Stops when the relative residual on observed
    entries falls below the configured tolerance; aborts if the residual
    grows tenfold above its running minimum.

    Returns (matrix, SolverDiagnostics).
    """
    Y = np.asarray(Y, dtype=float)
    B = np.asarray(B)
    if Y.shape != B.shape or Y.ndim != 2:
        raise ValueError("data and mask must be matrices of the same shape")
    obs = B != 0
    m_count = int(obs.sum())
    if m_count == 0:
        raise ValueError("mask has no observed entries")
    n, t = Y.shape
    if tau is None:
        tau = 5.0 * math.sqrt(n * t)
    if delta is None:
        delta = min(1.2 * (n * t) / m_count, 1.9)
    if tau <= 0 or delta <= 0:
        raise ValueError("tau and delta must be positive")
    PY = np.where(obs, Y, 0.0)
    norm_PY = np.linalg.norm(PY)
    diag = SolverDiagnostics()
    if norm_PY == 0.0:
        diag.converged = True
        return np.zeros_like(Y), diag
    # kick start the dual variable past the shrinkage dead zone
    k0 = math.ceil(tau / (delta * np.linalg.norm(PY, 2)))
    Z = (k0 * delta) * PY
    X = np.zeros_like(Y)
    best_res = math.inf
    for it in range(config.max_iters):
        U, s, Vt = np.linalg.svd(Z, full_matrices=False)
        X = (U * np.maximum(s - tau, 0.0)) @ Vt
        R = np.where(obs, Y - X, 0.0)
        res = np.linalg.norm(R) / norm_PY
        diag.objective_trace.append(res)
        diag.iterations_used = it + 1
        if not math.isfinite(res):
            raise SolverError("non-finite residual in singular value thresholding", diag)
        if res < config.tolerance:
            diag.converged = True
            break
        if res > 10.0 * best_res:
            raise SolverError(
                f"singular value thresholding diverged (residual {res:.3e} "
                f"vs best {best_res:.3e})", diag)
        best_res = min(best_res, res)
        Z += delta * R
    return X, diag


def mf_complete(Y: np.ndarray, B: np.ndarray, r: int, lam: float,
                config: SolverConfig = SolverConfig()):
    """Rank-r completion by alternating ridge-regularized least squares.

    Minimizes ||B o (U V^T) - Y||_F^2 + lam (||U||_F^2 + ||V||_F^2) by
    exact block updates, so the objective never increases.  A node or
    time slice with no observations keeps a finite (zero) factor row as
    long as lam > 0.

    Returns (U @ V.T, SolverDiagnostics).
    """
    Y = np.asarray(Y, dtype=float)
    B = np.asarray(B)
    if Y.shape != B.shape or Y.ndim != 2:
        raise ValueError("data and mask must be matrices of the same shape")
    n, t = Y.shape
    if not 1 <= r <= min(n, t):
        raise ValueError(f"rank must lie in [1, {min(n, t)}], got {r}")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    obs = (B != 0).astype(float)
    if obs.sum() == 0:
        raise ValueError("mask has no observed entries")
    if lam == 0.0 and (np.any(obs.sum(axis=1) == 0) or np.any(obs.sum(axis=0) == 0)):
        raise ValueError("an empty row or column slice requires lam > 0")
    PY = obs * np.nan_to_num(Y)
    rng = np.random.default_rng(config.seed)
    scale = math.sqrt(np.abs(PY).sum() / obs.sum() / r + 1e-300)
    U = rng.uniform(size=(n, r)) * scale
    V = rng.uniform(size=(t, r)) * scale
    eye = np.eye(r)
    diag = SolverDiagnostics()
    prev_obj = math.inf

    def ridge_update(mask, target, W):
        # one least-squares block: rows of the free factor given W fixed
        gram = np.einsum("ij,jk,jl->ikl", mask, W, W, optimize=True)
        rhs = target @ W
        return np.linalg.solve(gram + lam * eye, rhs[:, :, None])[:, :, 0]

    for it in range(config.max_iters):
        U = ridge_update(obs, PY, V)
        V = ridge_update(obs.T, PY.T, U)
        R = obs * (U @ V.T) - PY
        obj = float((R * R).sum()) + lam * (float((U * U).sum()) + float((V * V).sum()))
        diag.objective_trace.append(obj)
        diag.iterations_used = it + 1
        if not math.isfinite(obj):
            raise SolverError("non-finite objective in alternating least squares", diag)
        if it > 0 and prev_obj - obj <= config.tolerance * max(abs(prev_obj), 1e-30):
            diag.converged = True
            break
        prev_obj = obj
    return U @ V.T, diag
