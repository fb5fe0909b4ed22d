"""Mutual coherence between the row-selection sensing operator and
candidate sparsifying bases.

Because every row of the selection operator is a canonical basis vector,
the coherence reduces to the largest column-normalized entry of the
inverse transform, scaled by sqrt(N).  A value of 1 is maximally
incoherent, sqrt(N) maximally coherent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .transforms import (
    WAVELET_FAMILIES,
    dct_matrix,
    fourier_matrix,
    wavelet_matrix,
)


def mutual_coherence(Psi_inv: np.ndarray) -> float:
    """sqrt(N) * max_ij |Psi_inv[i,j]| / ||column j of Psi_inv||_2.

    Complex entries contribute their modulus.  Raises on zero columns.
    """
    A = np.asarray(Psi_inv)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    mags = np.abs(A)
    col_norms = np.linalg.norm(mags, axis=0)
    if np.any(col_norms == 0):
        raise ValueError("matrix has a zero column")
    return float(np.sqrt(A.shape[0]) * np.max(mags / col_norms))


@dataclass(frozen=True)
class CoherenceResult:
    basis: str
    mu: float
    mu_over_sqrt_n: float


TABLE_BASES = ("fourier", "dct") + WAVELET_FAMILIES


def coherence_table(N: int) -> list[CoherenceResult]:
    """Coherence of the selection operator against the standard bases.

    One row per basis: the unitary Fourier transform, the orthonormal DCT,
    and the wavelet families.  N must be a power of two, at least 32, so
    every wavelet filter fits.
    """
    if N < 32 or (N & (N - 1)) != 0:
        raise ValueError(f"table size must be a power of two >= 32, got {N}")
    results = []
    for basis in TABLE_BASES:
        if basis == "fourier":
            Psi_inv = fourier_matrix(N).conj().T
        elif basis == "dct":
            Psi_inv = dct_matrix(N).T
        else:
            Psi_inv = wavelet_matrix(basis, N).T
        mu = mutual_coherence(Psi_inv)
        results.append(CoherenceResult(basis=basis, mu=mu,
                                       mu_over_sqrt_n=float(mu / np.sqrt(N))))
    return results
