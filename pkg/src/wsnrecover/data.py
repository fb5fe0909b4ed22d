"""Dataset ingestion, synthetic field generation, masking protocol,
noise injection, and evaluation metrics.

The masking protocol distinguishes entries that were missing in the raw
dataset (m1) from entries removed on purpose to create held-out ground
truth (m2).  Scores are computed at m2 only, since that is where truth
is available.
"""

from __future__ import annotations

import calendar
import gzip
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct as _dct

from .transforms import VectorizationOrder, vectorize


# ---------------------------------------------------------------------------
# Masking protocol
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MaskPartition:
    """Disjoint split of the grid into originally-missing (m1),
    simulated-missing (m2) and observed cells."""

    m1_mask: np.ndarray  # boolean n-by-t, True where originally missing
    m2_mask: np.ndarray  # boolean n-by-t, True where removed for scoring

    def __post_init__(self):
        m1 = np.asarray(self.m1_mask, dtype=bool)
        m2 = np.asarray(self.m2_mask, dtype=bool)
        if m1.shape != m2.shape or m1.ndim != 2:
            raise ValueError("m1 and m2 masks must share a 2-D shape")
        if np.any(m1 & m2):
            raise ValueError("m1 and m2 masks overlap")
        object.__setattr__(self, "m1_mask", m1)
        object.__setattr__(self, "m2_mask", m2)

    @property
    def n_total(self) -> int:
        return int(self.m1_mask.size)

    @property
    def n_observed(self) -> int:
        return int(self.n_total - self.m1_mask.sum() - self.m2_mask.sum())

    @property
    def observed_mask(self) -> np.ndarray:
        return ~(self.m1_mask | self.m2_mask)


def simulate_missing(m1_mask: np.ndarray, loss_fraction: float, seed: int) -> MaskPartition:
    """Remove a fraction of the not-originally-missing cells, uniformly.

    The count is round(p * available) with halves rounded up, drawn without
    replacement from cells outside m1.
    """
    m1 = np.asarray(m1_mask, dtype=bool)
    if not 0.0 <= loss_fraction <= 1.0:
        raise ValueError(f"loss fraction must lie in [0, 1], got {loss_fraction}")
    available = np.flatnonzero(~m1.ravel())
    count = int(math.floor(loss_fraction * available.size + 0.5))
    if loss_fraction > 0 and count < 1:
        raise ValueError("loss fraction too small to remove a single entry")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(available, size=count, replace=False) if count else np.empty(0, int)
    m2 = np.zeros(m1.size, dtype=bool)
    m2[chosen] = True
    return MaskPartition(m1_mask=m1, m2_mask=m2.reshape(m1.shape))


def data_loss_percentage(partition: MaskPartition) -> float:
    """|m2| / (N - |m1|) * 100."""
    n_m1 = int(partition.m1_mask.sum())
    denom = partition.n_total - n_m1
    if denom <= 0:
        raise ValueError("no cells outside the originally-missing set")
    return 100.0 * float(partition.m2_mask.sum()) / denom


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def nmse(x_true: np.ndarray, x_hat: np.ndarray, positions: np.ndarray) -> float:
    """Squared-error energy over truth energy, restricted to positions.

    ``positions`` may be a boolean mask or an index array into the
    flattened arrays.
    """
    xt = np.asarray(x_true, dtype=float).ravel()
    xh = np.asarray(x_hat, dtype=float).ravel()
    if xt.shape != xh.shape:
        raise ValueError("truth and estimate must have the same size")
    pos = np.asarray(positions)
    if pos.dtype == bool:
        pos = np.flatnonzero(pos.ravel())
    if pos.size == 0:
        raise ValueError("no positions to score")
    ref = xt[pos]
    energy = float(ref @ ref)
    if energy == 0.0:
        raise ValueError("ground truth is zero at the scored positions")
    diff = ref - xh[pos]
    return float(diff @ diff) / energy


# ---------------------------------------------------------------------------
# Synthetic fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic sensor field.

    Each row is an independent random path whose increments form
    fractional Gaussian noise with the given Hurst exponent; rows ride on
    a constant baseline level (``amplitude``), the operating point of the
    simulated sensors.  Larger H means smoother rows.
    """

    hurst: float
    n: int
    t: int
    seed: int = 0
    amplitude: float = 700.0

    def __post_init__(self):
        if not 0.0 < self.hurst < 1.0:
            raise ValueError(f"Hurst exponent must lie in (0, 1), got {self.hurst}")
        if self.n < 1 or self.t < 1:
            raise ValueError("field dimensions must be positive")


def _fgn_spectrum(hurst: float, length: int) -> np.ndarray:
    k = np.arange(length, dtype=float)
    acov = 0.5 * ((k + 1) ** (2 * hurst) + np.abs(k - 1) ** (2 * hurst)) - k ** (2 * hurst)
    circ = np.concatenate([acov, [0.0], acov[-1:0:-1]])
    return np.fft.fft(circ).real


def fractional_gaussian_noise(hurst: float, n_rows: int, length: int, seed: int) -> np.ndarray:
    """Rows of fractional Gaussian noise via circulant embedding.

    The embedding of the exact autocovariance gives each row the target
    covariance with unit variance per sample.  For Hurst exponents near
    one the embedding spectrum dips slightly negative at practical sizes;
    the embedding is then padded and any tiny residual negatives are
    clamped, a standard approximation far below estimation accuracy.
    """
    if not 0.0 < hurst < 1.0:
        raise ValueError(f"Hurst exponent must lie in (0, 1), got {hurst}")
    if length < 1 or n_rows < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    if length == 1:
        return rng.standard_normal((n_rows, 1))
    emb = length
    spectrum = _fgn_spectrum(hurst, emb)
    while spectrum.min() < 0 and emb < 8 * length:
        emb *= 2
        spectrum = _fgn_spectrum(hurst, emb)
    if spectrum.min() < -1e-3 * spectrum.max():
        raise ValueError("circulant embedding failed: strongly negative spectrum")
    spectrum = np.maximum(spectrum, 0.0)
    m = 2 * emb
    rows = np.empty((n_rows, length))
    for i in range(n_rows):
        z = np.zeros(m, dtype=complex)
        z[0] = rng.standard_normal()
        z[emb] = rng.standard_normal()
        v = rng.standard_normal((emb - 1, 2))
        z[1:emb] = (v[:, 0] + 1j * v[:, 1]) / np.sqrt(2.0)
        z[emb + 1:] = np.conj(z[1:emb][::-1])
        rows[i] = np.sqrt(m) * np.fft.ifft(np.sqrt(spectrum) * z).real[:length]
    return rows


def generate_fgn_field(spec: SyntheticSpec) -> np.ndarray:
    """Field whose rows are independent paths with Hurst exponent H.

    Each row is the cumulative sum of a fresh fGn series, offset by the
    baseline amplitude.  Deterministic for a fixed seed.
    """
    noise = fractional_gaussian_noise(spec.hurst, spec.n, spec.t, spec.seed)
    return spec.amplitude + np.cumsum(noise, axis=1)


def estimate_hurst(series: np.ndarray) -> float:
    """Rescaled-range estimate: slope of log(R/S) against log(window size).

    Windows are dyadic, from 8 up to a quarter of the series length.  The
    series is treated as the increment sequence, the classical convention;
    hand the increments of a cumulative path, not the path itself.
    """
    x = np.asarray(series, dtype=float).ravel()
    if x.size < 64:
        raise ValueError(f"need at least 64 samples, got {x.size}")
    if np.ptp(x) == 0:
        raise ValueError("rescaled range of a constant series is undefined")
    log_rs, log_w = [], []
    w = 8
    while w <= x.size // 4:
        nseg = x.size // w
        seg = x[: nseg * w].reshape(nseg, w)
        dev = seg - seg.mean(axis=1, keepdims=True)
        walk = np.cumsum(dev, axis=1)
        spread = walk.max(axis=1) - walk.min(axis=1)
        scale = seg.std(axis=1)
        ok = scale > 0
        if np.any(ok):
            log_rs.append(np.log((spread[ok] / scale[ok]).mean()))
            log_w.append(np.log(w))
        w *= 2
    if len(log_w) < 2:
        raise ValueError("series too short or too degenerate for a slope fit")
    slope = np.polyfit(log_w, log_rs, 1)[0]
    return float(slope)


def add_noise(X: np.ndarray, snr_db: float, seed: int) -> np.ndarray:
    """Add white Gaussian noise at the requested average SNR in dB.

    Noise variance is mean(X^2) / 10^(snr/10).  An infinite SNR is the
    no-noise sentinel and returns X unchanged.
    """
    X = np.asarray(X, dtype=float)
    if math.isinf(snr_db) and snr_db > 0:
        return X.copy()
    power = float(np.mean(X ** 2))
    if power == 0.0:
        raise ValueError("cannot scale noise against an all-zero signal")
    sigma = math.sqrt(power / 10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(seed)
    return X + sigma * rng.standard_normal(X.shape)


# ---------------------------------------------------------------------------
# Sensor log ingestion (whitespace-separated: date time epoch moteid
# temperature humidity light voltage)
# ---------------------------------------------------------------------------

def _posix_seconds(date_s: str, time_s: str) -> float:
    day = tuple(int(p) for p in date_s.split("-"))
    clock = time_s.split(":")
    sec = float(clock[2])
    whole = calendar.timegm((day[0], day[1], day[2], int(clock[0]), int(clock[1]), 0))
    return whole + sec


def parse_sensor_log(stream, node_ids, start_epoch: int, t: int, interval_s: int = 60):
    """Bucket temperature readings onto a node-by-time grid.

    ``stream`` yields whitespace-separated lines of the sensor log schema;
    timestamps are interpreted as UTC and bucketed into ``t`` slots of
    ``interval_s`` seconds starting at POSIX time ``start_epoch``.
    Multiple readings of one node in one slot are averaged; slots with no
    reading are marked missing.  Malformed lines are skipped and counted.

    Returns (matrix, m1_mask, skipped_line_count).
    """
    node_ids = list(node_ids)
    if not node_ids or t < 1:
        raise ValueError("need at least one node and one time slot")
    row_of = {int(nid): i for i, nid in enumerate(node_ids)}
    n = len(node_ids)
    totals = np.zeros((n, t))
    counts = np.zeros((n, t), dtype=int)
    skipped = 0
    usable = 0
    for line in stream:
        parts = line.split()
        if not parts:
            continue
        try:
            ts = _posix_seconds(parts[0], parts[1])
            mote = int(parts[3])
            temperature = float(parts[4])
        except (IndexError, ValueError):
            skipped += 1
            continue
        if not math.isfinite(temperature):
            skipped += 1
            continue
        usable += 1
        if mote not in row_of:
            continue
        slot = int((ts - start_epoch) // interval_s)
        if 0 <= slot < t:
            i = row_of[mote]
            totals[i, slot] += temperature
            counts[i, slot] += 1
    if usable == 0:
        raise ValueError("no usable rows in the sensor log")
    m1 = counts == 0
    X = np.zeros((n, t))
    np.divide(totals, counts, out=X, where=~m1)
    return X, m1, skipped


def open_sensor_log(path: str):
    """Open a sensor log, transparently decompressing ``.gz`` files."""
    if str(path).endswith(".gz"):
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def scan_node_coverage(path: str) -> dict[int, int]:
    """Reading counts per mote id, for choosing well-covered nodes."""
    counts: dict[int, int] = {}
    with open_sensor_log(path) as fh:
        for line in fh:
            parts = line.split()
            try:
                mote = int(parts[3])
                float(parts[4])
            except (IndexError, ValueError):
                continue
            counts[mote] = counts.get(mote, 0) + 1
    return counts


# ---------------------------------------------------------------------------
# Sparsity profiling
# ---------------------------------------------------------------------------

def dct_coefficient_profile(X: np.ndarray, order: VectorizationOrder) -> np.ndarray:
    """Sorted magnitudes of the full-vector DCT under the given order.

    Missing cells (NaN) are filled by linear interpolation along the
    vectorization path before transforming; the fill is for profiling
    only and is not a recovery method.
    """
    v = vectorize(np.asarray(X, dtype=float), order)
    bad = ~np.isfinite(v)
    if bad.all():
        raise ValueError("matrix has no finite entries to profile")
    if bad.any():
        pos = np.arange(v.size)
        v = v.copy()
        v[bad] = np.interp(pos[bad], pos[~bad], v[~bad])
    coeffs = _dct(v, norm="ortho")
    return np.sort(np.abs(coeffs))[::-1]


# ---------------------------------------------------------------------------
# Matrix / mask CSV serialization (empty cell = missing)
# ---------------------------------------------------------------------------

def write_matrix_csv(path, X: np.ndarray, missing: np.ndarray | None = None) -> None:
    """Write an n-by-t matrix as CSV; cells flagged missing are left empty."""
    X = np.asarray(X)
    miss = np.zeros(X.shape, dtype=bool) if missing is None else np.asarray(missing, bool)
    miss = miss | ~np.isfinite(np.asarray(X, dtype=float))
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(X.shape[0]):
            cells = "" if X.shape[1] == 0 else ",".join(
                "" if miss[i, j] else repr(float(X[i, j])) for j in range(X.shape[1]))
            fh.write(cells + "\n")


def read_matrix_csv(path) -> np.ndarray:
    """Read a matrix CSV; empty cells come back as NaN."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line == "" and not rows:
                continue
            rows.append([float(c) if c.strip() else np.nan for c in line.split(",")])
    if not rows:
        raise ValueError(f"no data in {path}")
    width = max(len(r) for r in rows)
    if any(len(r) != width for r in rows):
        raise ValueError(f"ragged rows in {path}")
    return np.array(rows, dtype=float)


def write_mask_csv(path, mask: np.ndarray) -> None:
    mask = np.asarray(mask)
    with open(path, "w", encoding="utf-8") as fh:
        for row in mask.astype(int):
            fh.write(",".join(str(int(c)) for c in row) + "\n")


def read_mask_csv(path) -> np.ndarray:
    grid = read_matrix_csv(path)
    if not np.isin(grid[np.isfinite(grid)], (0.0, 1.0)).all():
        raise ValueError(f"mask file {path} contains values other than 0/1")
    return np.nan_to_num(grid) != 0
