"""Structural novelty from self-similarity.

For each feature series: build a standardized-Euclidean self-similarity
matrix, slide a Gaussian-tapered checkerboard kernel along its diagonal, and
pick peaks of the resulting curve. The kernel spans eight bars (sixteen
strong beats), measuring contrast between the four bars before and after
each candidate boundary.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import TrackTooShort
from .features import FeatureSeries

#: Kernel half-size in strong beats: 8 strong beats = 4 bars per quadrant.
KERNEL_HALF_SIZE = 8
#: Peak picking: local max within +-8 strong beats (4 bars), amplitude at
#: least 0.3 of the curve maximum.
PEAK_WINDOW = 8
PEAK_THRESHOLD = 0.3
#: Absolute novelty floor. Novelty lives in [0, ~0.5]: similarity is in
#: [0, 1] and the kernel is L1-normalized, so a clean four-bar contrast
#: scores near 0.5 while detector jitter on structure-free material stays
#: under ~0.04. Curves that never clear the floor carry no structure.
PEAK_NOVELTY_FLOOR = 0.05


class DegenerateSeriesWarning(UserWarning):
    """All rows of a feature series are identical; its SSM is all zero."""


@dataclass(frozen=True)
class SelfSimilarityMatrix:
    """Pairwise standardized-Euclidean distances between series rows."""

    dist: np.ndarray  # (n, n), symmetric, zero diagonal

    @property
    def n(self) -> int:
        return self.dist.shape[0]


@dataclass(frozen=True)
class NoveltyCurve:
    values: np.ndarray  # per strong-beat interval, >= 0
    feature_name: str
    valid_from: int  # first index with a non-padded value


@dataclass(frozen=True)
class PeakSet:
    indices: np.ndarray
    feature_name: str


def ssm(series: FeatureSeries) -> SelfSimilarityMatrix:
    """Standardized-Euclidean self-similarity matrix of a feature series.

    Dimensions are scaled by their population variance over all rows;
    zero-variance dimensions drop out of the distance. A series whose rows
    are all identical yields an all-zero matrix and a warning.
    """
    x = series.values
    if x.shape[0] < 2:
        raise ValueError("need at least two rows for a self-similarity matrix")
    var = x.var(axis=0)  # population variance, ddof=0
    # a dimension constant across rows has zero variance even when float
    # rounding makes np.var return a denormal instead of 0
    keep = ~np.all(x == x[0], axis=0)
    if not keep.any():
        warnings.warn(f"{series.name}: all rows identical", DegenerateSeriesWarning)
        return SelfSimilarityMatrix(np.zeros((x.shape[0], x.shape[0])))
    dist = squareform(pdist(x[:, keep], metric="seuclidean", V=var[keep]))
    return SelfSimilarityMatrix(dist)


def checkerboard_kernel(half_size: int = KERNEL_HALF_SIZE) -> np.ndarray:
    """Gaussian-tapered checkerboard kernel of side 2 * half_size.

    Same-segment quadrants are positive, cross quadrants negative; the taper
    uses sigma = half_size / 2 and the result is L1-normalized, so entries
    sum to zero and absolute values sum to one.
    """
    if half_size < 1:
        raise ValueError("half_size must be >= 1")
    coords = np.arange(2 * half_size) - half_size + 0.5
    sigma = half_size / 2.0
    taper = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    signs = np.sign(coords)
    kernel = np.outer(signs * taper, signs * taper)
    return kernel / np.abs(kernel).sum()


def novelty_curve(sim: SelfSimilarityMatrix, kernel: np.ndarray,
                  padding: str, feature_name: str = "") -> NoveltyCurve:
    """Convolve the kernel along the SSM diagonal.

    The distance matrix is first converted to similarity, S = 1 - d/max(d),
    so homogeneous regions score high in the positive quadrants. With
    ``valid`` padding the first and last half-kernel positions stay zero;
    with ``zero`` padding out-of-range similarity counts as zero, which
    deliberately produces novelty where the track starts and stops.
    Negative responses are rectified to zero.
    """
    if padding not in ("valid", "zero"):
        raise ValueError("padding must be 'valid' or 'zero'")
    side = kernel.shape[0]
    if kernel.shape != (side, side):
        raise ValueError("kernel must be square")
    half = side // 2
    n = sim.n
    if n < side:
        raise TrackTooShort(f"need at least {side} strong-beat intervals, got {n}")

    dmax = sim.dist.max()
    if dmax > 0:
        similarity = 1.0 - sim.dist / dmax
    else:
        similarity = np.ones_like(sim.dist)
    padded = np.zeros((n + side, n + side))
    padded[half:half + n, half:half + n] = similarity

    values = np.zeros(n)
    if padding == "valid":
        rng = range(half, n - half)
        valid_from = half
    else:
        rng = range(n)
        valid_from = 0
    for t in rng:
        values[t] = np.sum(kernel * padded[t:t + side, t:t + side])
    values = np.maximum(values, 0.0)
    # similarity is in [0, 1] and the kernel is L1-normalized, so anything at
    # rounding scale is a zero-sum artifact, not novelty
    values[values < 1e-12] = 0.0
    return NoveltyCurve(values, feature_name, valid_from)


def pick_peaks(curve: NoveltyCurve, window: int = PEAK_WINDOW,
               threshold: float = PEAK_THRESHOLD) -> PeakSet:
    """Local maxima within +-window that reach threshold * max(curve).

    Ties break toward the earlier index: a candidate must strictly exceed
    everything before it in the window and at least match everything after.
    A curve whose maximum stays under the absolute novelty floor has no
    structural contrast anywhere and yields no peaks.
    """
    v = curve.values
    vmax = v.max() if len(v) else 0.0
    if vmax < PEAK_NOVELTY_FLOOR:
        return PeakSet(np.empty(0, dtype=int), curve.feature_name)
    floor = threshold * vmax
    indices = []
    for t in np.flatnonzero(v >= floor):
        before = v[max(0, t - window):t]
        after = v[t + 1:t + window + 1]
        if (len(before) == 0 or v[t] > before.max()) and \
           (len(after) == 0 or v[t] >= after.max()):
            indices.append(int(t))
    return PeakSet(np.array(indices, dtype=int), curve.feature_name)
