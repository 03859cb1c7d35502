"""Spatial-frequency statistics and the visibility weight for banding.

A patch's activity is summarized by first-difference RMS energies along the
two axes. Patches busier than the image-mean activity get a weight above 1,
so detected contours in active regions count for more.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInputError
from .imgcore import Patch


@dataclass(frozen=True)
class SpatialFreqStats:
    """Per-patch activity: first-axis (cf), second-axis (rf), combined (sf)."""

    k: int
    cf: float
    rf: float
    sf: float


@dataclass(frozen=True)
class MaskingParams:
    gamma: float = 1.5
    side: int = 64

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.side < 1:
            raise ValueError("side must be >= 1")


def spatial_freq_array(data: np.ndarray, k: int = 0) -> SpatialFreqStats:
    """First-difference RMS energies of a square luma array.

    cf sums squared differences along the column index (axis 1), rf along
    the row index (axis 0); both are normalized by the full pixel count,
    and sf is their quadrature sum. A transposed patch swaps cf and rf
    exactly.
    """
    d = np.asarray(data, dtype=np.float64)
    n2 = float(d.shape[0] * d.shape[1])
    cf = float(np.sqrt(np.sum((d[:, 1:] - d[:, :-1]) ** 2) / n2))
    rf = float(np.sqrt(np.sum((d[1:, :] - d[:-1, :]) ** 2) / n2))
    return SpatialFreqStats(k=k, cf=cf, rf=rf, sf=float(np.hypot(cf, rf)))


def spatial_freq(patch: Patch, k: int = 0) -> SpatialFreqStats:
    """Activity statistics of a patch; see :func:`spatial_freq_array`."""
    return spatial_freq_array(patch.data, k=k)


def threshold_eps(stats: Sequence[SpatialFreqStats] | Iterable[SpatialFreqStats]) -> float:
    """Visibility threshold: the mean sf over all patches of one image."""
    values = [s.sf for s in stats]
    if not values:
        raise EmptyInputError("threshold_eps needs at least one patch")
    return float(np.mean(values))


def weight(sf: float, eps: float, params: MaskingParams) -> float:
    """Visibility weight; 1 on [0, eps], rising as (sf - eps)^gamma / side above."""
    if sf <= eps:
        return 1.0
    return 1.0 + (sf - eps) ** params.gamma / params.side
