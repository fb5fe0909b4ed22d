"""Vectorization schemes, orthonormal transforms, and the row-selection
(partial canonical identity) sensing operator.

A data matrix X (rows = sensor nodes, columns = time points) can be
flattened three ways: two boustrophedon ("snake") orders that keep
consecutive vector entries adjacent in the grid, and plain column-major
order used by the Kronecker transform.  The sensing operator selects the
observed entries of the flattened vector; all transforms here are
orthonormal so the inverse is the transpose.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct as _dct, idct as _idct


class VectorizationOrder(enum.Enum):
    """Flattening order for an n-by-t matrix.

    SPATIAL_SNAKE walks column 1 top-down, column 2 bottom-up, and so on.
    TEMPORAL_SNAKE walks row 1 left-right, row 2 right-left, and so on.
    COLUMN_MAJOR is plain Fortran order (required by the Kronecker identity).
    """

    SPATIAL_SNAKE = "spatial-snake"
    TEMPORAL_SNAKE = "temporal-snake"
    COLUMN_MAJOR = "column-major"


def _snake_permutation(n: int, t: int, order: VectorizationOrder) -> np.ndarray:
    """Row-major flat indices listed in the requested traversal order."""
    grid = np.arange(n * t).reshape(n, t)
    if order is VectorizationOrder.COLUMN_MAJOR:
        return grid.T.ravel()
    if order is VectorizationOrder.SPATIAL_SNAKE:
        cols = [grid[:, j] if j % 2 == 0 else grid[::-1, j] for j in range(t)]
        return np.concatenate(cols)
    if order is VectorizationOrder.TEMPORAL_SNAKE:
        rows = [grid[i] if i % 2 == 0 else grid[i, ::-1] for i in range(n)]
        return np.concatenate(rows)
    raise ValueError(f"unknown vectorization order: {order!r}")


def vectorize(X: np.ndarray, order: VectorizationOrder) -> np.ndarray:
    """Flatten an n-by-t matrix into a length n*t vector in the given order."""
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"expected a 2-D matrix, got shape {X.shape}")
    n, t = X.shape
    return X.ravel()[_snake_permutation(n, t, order)]


def devectorize(v: np.ndarray, n: int, t: int, order: VectorizationOrder) -> np.ndarray:
    """Inverse of :func:`vectorize`; rejects vectors of the wrong length."""
    v = np.asarray(v)
    if v.ndim != 1 or v.size != n * t:
        raise ValueError(f"vector of length {v.size} cannot fill a {n}x{t} matrix")
    flat = np.empty(n * t, dtype=v.dtype)
    flat[_snake_permutation(n, t, order)] = v
    return flat.reshape(n, t)


# ---------------------------------------------------------------------------
# Sensing operator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PciOperator:
    """Row-selection sensing operator: M rows of the N-by-N identity.

    ``indices`` are the observed positions (0-based, strictly increasing)
    in the vectorized signal.  As an M-by-N matrix each row holds a single
    one, and no column holds more than one.
    """

    indices: np.ndarray
    n_total: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("operator needs at least one observed position")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("indices must be strictly increasing")
        if idx[0] < 0 or idx[-1] >= self.n_total:
            raise ValueError("indices out of range")
        object.__setattr__(self, "indices", idx)

    @property
    def n_observed(self) -> int:
        return int(self.indices.size)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """y = selection of x at the observed positions."""
        x = np.asarray(x)
        if x.shape != (self.n_total,):
            raise ValueError(f"expected vector of length {self.n_total}, got {x.shape}")
        return x[self.indices]

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """Scatter y back to a zero-filled length-N vector (transpose map)."""
        y = np.asarray(y)
        if y.shape != (self.n_observed,):
            raise ValueError(f"expected vector of length {self.n_observed}, got {y.shape}")
        out = np.zeros(self.n_total, dtype=np.result_type(y.dtype, float))
        out[self.indices] = y
        return out

    def as_matrix(self) -> np.ndarray:
        """Dense M-by-N form, for tests and coherence checks."""
        P = np.zeros((self.n_observed, self.n_total))
        P[np.arange(self.n_observed), self.indices] = 1.0
        return P


def pci_from_mask(B: np.ndarray, order: VectorizationOrder) -> PciOperator:
    """Build the selection operator for the observed (nonzero) cells of a mask."""
    B = np.asarray(B)
    if B.ndim != 2:
        raise ValueError("mask must be a 2-D matrix")
    flags = vectorize(B, order) != 0
    idx = np.flatnonzero(flags)
    if idx.size == 0:
        raise ValueError("mask has no observed entries")
    return PciOperator(indices=idx, n_total=B.size)


# ---------------------------------------------------------------------------
# Discrete cosine transform
# ---------------------------------------------------------------------------

def dct_matrix(k: int) -> np.ndarray:
    """Orthonormal DCT-II matrix of size k.

    Row 0 is the constant 1/sqrt(k); row i >= 1 is
    sqrt(2/k) * cos(pi*(2j+1)*i / (2k)).
    """
    if k < 1:
        raise ValueError("size must be >= 1")
    j = np.arange(k)
    D = np.empty((k, k))
    D[0] = 1.0 / np.sqrt(k)
    if k > 1:
        i = np.arange(1, k)[:, None]
        D[1:] = np.sqrt(2.0 / k) * np.cos(np.pi * (2 * j + 1) * i / (2 * k))
    return D


def fourier_matrix(N: int) -> np.ndarray:
    """Unitary DFT matrix of size N (complex)."""
    if N < 1:
        raise ValueError("size must be >= 1")
    j = np.arange(N)
    return np.exp(-2j * np.pi * np.outer(j, j) / N) / np.sqrt(N)


def kron_apply(D1: np.ndarray, D2: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Return D1 @ X @ D2.T without forming the Kronecker product.

    Equals devectorizing (D2 kron D1) @ vec(X) under column-major order.
    """
    D1, D2, X = np.asarray(D1), np.asarray(D2), np.asarray(X)
    if X.ndim != 2 or D1.shape[1] != X.shape[0] or D2.shape[1] != X.shape[1]:
        raise ValueError(
            f"shapes not conformable: {D1.shape} x {X.shape} x {D2.shape}^T")
    return D1 @ X @ D2.T


# ---------------------------------------------------------------------------
# Wavelet transforms
# ---------------------------------------------------------------------------

# Orthonormal scaling filters.  db2 is exact ((1 +- sqrt 3)/(4 sqrt 2) etc.);
# db3/db4 come from minimal-phase spectral factorization carried out in
# double precision; the Coiflet taps are the standard published tables,
# corrected in the trailing digits so the quadrature-mirror orthogonality
# conditions hold to machine precision.
_SQ3 = np.sqrt(3.0)
SCALING_FILTERS: dict[str, np.ndarray] = {
    "haar": np.array([1.0, 1.0]) / np.sqrt(2.0),
    "db2": np.array([1.0 + _SQ3, 3.0 + _SQ3, 3.0 - _SQ3, 1.0 - _SQ3]) / (4.0 * np.sqrt(2.0)),
    "db3": np.array([
        0.3326705529500827, 0.8068915093110928, 0.4598775021184917,
        -0.13501102001025467, -0.08544127388202666, 0.03522629188570957,
    ]),
    "db4": np.array([
        0.23037781330889637, 0.7148465705529158, 0.6308807679298588,
        -0.02798376941685949, -0.18703481171909306, 0.030841381835560636,
        0.03288301166688516, -0.010597401785069018,
    ]),
    "coif2": np.array([
        -0.0007205318177470686, -0.001823205697792767, 0.00561142666019513,
        0.02368032777999551, -0.0594341582216748, -0.07648851909527593,
        0.4170052124429559, 0.8127239628199487, 0.38610943958163874,
        -0.06737261867956859, -0.04146460724015656, 0.01638683384057678,
    ]),
    "coif4": np.array([
        -1.7849920066656536e-06, -3.2596513087671314e-06, 3.1229878067251384e-05,
        6.233885062053705e-05, -0.00025997440974926474, -0.0005890198985132781,
        0.001266560530366137, 0.0037514297110894036, -0.005658274127144803,
        -0.015211726159748987, 0.025082262303738622, 0.039334422970398755,
        -0.09622042893803574, -0.06662746868042398, 0.43438603726890895,
        0.7822389389068145, 0.4153084165253178, -0.056077326794066566,
        -0.08126669401533611, 0.02668229803301708, 0.016068935192988115,
        -0.007346166888072192, -0.0016295020469775459, 0.0008923188031517403,
    ]),
}

WAVELET_FAMILIES = tuple(SCALING_FILTERS)


def _single_level(m: int, h: np.ndarray) -> np.ndarray:
    """One analysis step of size m with periodic boundary handling.

    Rows 0..m/2-1 are even shifts of the scaling filter, rows m/2..m-1 the
    even shifts of the quadrature-mirror wavelet filter.
    """
    g = ((-1.0) ** np.arange(h.size)) * h[::-1]
    T = np.zeros((m, m))
    for k in range(m // 2):
        for j, tap in enumerate(h):
            T[k, (j + 2 * k) % m] += tap
        for j, tap in enumerate(g):
            T[m // 2 + k, (j + 2 * k) % m] += tap
    return T


def wavelet_matrix(family: str, N: int) -> np.ndarray:
    """Orthonormal matrix of the full dyadic wavelet decomposition.

    Coefficient order is coarsest first; the final N/2 rows are the raw
    wavelet filter taps at the finest level.  N must be a power of two no
    smaller than the filter length.
    """
    if family not in SCALING_FILTERS:
        raise ValueError(f"unknown wavelet family {family!r}; options: {WAVELET_FAMILIES}")
    h = SCALING_FILTERS[family]
    if N < 1 or (N & (N - 1)) != 0:
        raise ValueError(f"transform size must be a power of two, got {N}")
    if N < h.size:
        raise ValueError(f"transform size {N} is shorter than the {family} filter ({h.size})")
    W = np.eye(N)
    m = N
    while m >= 2:
        T = _single_level(m, h)
        W[:m] = T @ W[:m]
        m //= 2
    return W


# ---------------------------------------------------------------------------
# Sparsifying bases
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SparsifyingBasis:
    """Orthonormal transform bridging coefficient and signal domains.

    ``forward`` maps a signal vector to coefficients, ``inverse`` maps back;
    both act on vectors of length ``n_total``.  Matrix-shaped kinds
    (per-row, per-column, two-dimensional DCT) interpret the vector in
    column-major order.
    """

    kind: str
    shape: tuple[int, ...]
    family: str | None = None
    _matrix: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n_total(self) -> int:
        return int(np.prod(self.shape))

    def _as_grid(self, v):
        n, t = self.shape
        return np.asarray(v).reshape(t, n).T  # column-major vector -> matrix

    def _as_vec(self, X):
        return X.T.ravel()

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Signal -> coefficients."""
        if self.kind == "dct-full":
            return _dct(x, norm="ortho")
        if self.kind == "dct-spatial":
            return self._as_vec(_dct(self._as_grid(x), axis=0, norm="ortho"))
        if self.kind == "dct-temporal":
            return self._as_vec(_dct(self._as_grid(x), axis=1, norm="ortho"))
        if self.kind == "kron-dct":
            X = self._as_grid(x)
            return self._as_vec(_dct(_dct(X, axis=0, norm="ortho"), axis=1, norm="ortho"))
        if self.kind == "fourier":
            return np.fft.fft(x) / np.sqrt(self.n_total)
        if self.kind == "wavelet":
            return self._matrix @ x
        raise ValueError(f"unknown basis kind {self.kind!r}")

    def inverse(self, s: np.ndarray) -> np.ndarray:
        """Coefficients -> signal."""
        if self.kind == "dct-full":
            return _idct(s, norm="ortho")
        if self.kind == "dct-spatial":
            return self._as_vec(_idct(self._as_grid(s), axis=0, norm="ortho"))
        if self.kind == "dct-temporal":
            return self._as_vec(_idct(self._as_grid(s), axis=1, norm="ortho"))
        if self.kind == "kron-dct":
            S = self._as_grid(s)
            return self._as_vec(_idct(_idct(S, axis=0, norm="ortho"), axis=1, norm="ortho"))
        if self.kind == "fourier":
            return np.fft.ifft(s) * np.sqrt(self.n_total)
        if self.kind == "wavelet":
            return self._matrix.T @ s
        raise ValueError(f"unknown basis kind {self.kind!r}")

    def inverse_matrix(self) -> np.ndarray:
        """Dense inverse-transform matrix (columns are basis vectors)."""
        N = self.n_total
        if self.kind == "fourier":
            return fourier_matrix(N).conj().T
        if self.kind == "wavelet":
            return self._matrix.T.copy()
        out = np.empty((N, N))
        e = np.zeros(N)
        for j in range(N):
            e[j] = 1.0
            out[:, j] = self.inverse(e)
            e[j] = 0.0
        return out


def dct_full(N: int) -> SparsifyingBasis:
    """Full-vector DCT over a length-N signal."""
    return SparsifyingBasis(kind="dct-full", shape=(N,))


def dct_spatial(n: int, t: int) -> SparsifyingBasis:
    """Per-column (across-node) DCT of an n-by-t matrix."""
    return SparsifyingBasis(kind="dct-spatial", shape=(n, t))


def dct_temporal(n: int, t: int) -> SparsifyingBasis:
    """Per-row (along-time) DCT of an n-by-t matrix."""
    return SparsifyingBasis(kind="dct-temporal", shape=(n, t))


def kronecker_dct(n: int, t: int) -> SparsifyingBasis:
    """Two-dimensional DCT: per-column and per-row transforms combined."""
    return SparsifyingBasis(kind="kron-dct", shape=(n, t))


def fourier_basis(N: int) -> SparsifyingBasis:
    return SparsifyingBasis(kind="fourier", shape=(N,))


def wavelet_basis(family: str, N: int) -> SparsifyingBasis:
    return SparsifyingBasis(kind="wavelet", shape=(N,), family=family,
                            _matrix=wavelet_matrix(family, N))
