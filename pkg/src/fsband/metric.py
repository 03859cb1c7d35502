"""Pixel-wise banding map and image-level quality score.

Per patch k the evidence is the product w_k * P_k * |HFM_k|: the visibility
weight from spatial-frequency masking, the classifier's 0/1 banded label, and
the gradient magnitude locating the contours. Stitched back into image
coordinates (tiling pad dropped) this gives the banding map; pooling the
largest p% of its non-zero values per patch and averaging across patches
gives the scalar score Q. Larger Q means more, and more visible, banding;
a band-free image scores exactly 0.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from math import ceil
from pathlib import Path

import numpy as np

from . import net
from .errors import EmptyMapError, LengthMismatchError, ShapeMismatchError
from .freqmaps import HFMap, LFMConfig, hfm, lfm
from .imgcore import Image, PatchGrid, save_png_gray, tile_patches
from .masking import MaskingParams, spatial_freq, threshold_eps, weight

POOL_SCOPES = ("patch", "global")


@dataclass(frozen=True)
class PatchProvenance:
    k: int
    label: int
    weight: float
    sf: float = float("nan")
    cf: float = float("nan")
    rf: float = float("nan")


@dataclass(frozen=True)
class BandingMap:
    """Image-sized nonnegative evidence plus the per-patch factors behind it."""

    data: np.ndarray
    provenance: tuple[PatchProvenance, ...]
    rows: int
    cols: int
    side: int

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeMismatchError("banding map must be 2-D")
        if arr.size and float(arr.min()) < 0.0:
            raise ValueError("banding map must be nonnegative")
        if len(self.provenance) != self.rows * self.cols:
            raise LengthMismatchError("provenance must cover every patch")
        object.__setattr__(self, "data", arr)
        self.data.setflags(write=False)

    @property
    def n_patches(self) -> int:
        return self.rows * self.cols

    def patch_region(self, k: int) -> np.ndarray:
        """The stitched (pad-cropped) region belonging to patch k."""
        r, c = divmod(k, self.cols)
        h, w = self.data.shape
        return self.data[r * self.side:min((r + 1) * self.side, h),
                         c * self.side:min((c + 1) * self.side, w)]


@dataclass(frozen=True)
class QualityResult:
    q: float
    per_patch: tuple[float, ...]
    pool_fraction: float
    scope: str = "patch"

    def __post_init__(self):
        if self.q < 0.0:
            raise ValueError("quality score must be nonnegative")


@dataclass(frozen=True)
class PipelineConfig:
    side: int = 64
    lfm: LFMConfig = field(default_factory=LFMConfig)
    gamma: float = 1.5
    pool_fraction: float = 80.0
    classify_threshold: float = 0.5
    pad_policy: str = "reflect"
    pool_scope: str = "patch"

    def __post_init__(self):
        if not (0.0 < self.pool_fraction <= 100.0):
            raise ValueError("pool_fraction must lie in (0, 100]")
        if not (0.0 < self.classify_threshold < 1.0):
            raise ValueError("classify_threshold must lie in (0, 1)")
        if self.pool_scope not in POOL_SCOPES:
            raise ValueError(f"pool_scope must be one of {POOL_SCOPES}")

    def masking_params(self) -> MaskingParams:
        return MaskingParams(gamma=self.gamma, side=self.side)


def banding_map(grid: PatchGrid, labels, hfms, weights) -> BandingMap:
    """Per-pixel product of weight, label, and |HFM|, stitched to image size.

    Patches labeled 0 contribute exactly zero; pad regions introduced by
    tiling are dropped on stitching.
    """
    m = grid.n_patches
    labels = list(labels)
    hfms = list(hfms)
    weights = list(weights)
    if not (len(labels) == len(hfms) == len(weights) == m):
        raise LengthMismatchError(
            f"need {m} labels/hfms/weights, got "
            f"{len(labels)}/{len(hfms)}/{len(weights)}"
        )
    side = grid.side
    canvas = np.zeros((grid.rows * side, grid.cols * side), dtype=np.float64)
    provenance = []
    for k in range(m):
        r, c = divmod(k, grid.cols)
        lab = int(labels[k])
        if lab not in (0, 1):
            raise ValueError("labels must be 0 or 1")
        w = float(weights[k])
        hf = hfms[k].data if isinstance(hfms[k], HFMap) else np.asarray(hfms[k])
        if hf.shape != (side, side):
            raise ShapeMismatchError(f"hfm {k} has shape {hf.shape}, want {(side, side)}")
        if lab:
            canvas[r * side:(r + 1) * side, c * side:(c + 1) * side] = w * np.abs(hf)
        provenance.append(PatchProvenance(k=k, label=lab, weight=w))
    data = canvas[:grid.image_height, :grid.image_width]
    return BandingMap(data=data, provenance=tuple(provenance),
                      rows=grid.rows, cols=grid.cols, side=side)


def _top_fraction_mean(values: np.ndarray, pool_fraction: float) -> float:
    """Mean of the top pool_fraction% of non-zero values.

    Selection is by descending value with ties broken by flat pixel index, so
    the chosen set (and hence the mean under any summation order) is unique.
    """
    flat = values.ravel()
    nz = np.nonzero(flat)[0]
    if nz.size == 0:
        return 0.0
    count = ceil(pool_fraction / 100.0 * nz.size)
    order = np.lexsort((nz, -flat[nz]))
    return float(np.mean(flat[nz[order[:count]]]))


def quality_score(bm: BandingMap, pool_fraction: float = 80.0,
                  scope: str = "patch") -> QualityResult:
    """Worst-percentile pooling of the banding map into a scalar Q.

    Per-patch scope (default): each patch contributes the mean of its own top
    pool_fraction% non-zero values (0 if it has none), and Q averages these
    over all patches. Global scope pools one top-fraction set over the whole
    map instead.
    """
    if not (0.0 < pool_fraction <= 100.0):
        raise ValueError("pool_fraction must lie in (0, 100]")
    if scope not in POOL_SCOPES:
        raise ValueError(f"scope must be one of {POOL_SCOPES}")
    if bm.data.size == 0 or bm.n_patches == 0:
        raise EmptyMapError("cannot pool a zero-sized banding map")
    if scope == "global":
        q = _top_fraction_mean(bm.data, pool_fraction)
        return QualityResult(q=q, per_patch=(), pool_fraction=pool_fraction,
                             scope=scope)
    per_patch = tuple(
        _top_fraction_mean(bm.patch_region(k), pool_fraction)
        for k in range(bm.n_patches)
    )
    return QualityResult(q=float(np.mean(per_patch)), per_patch=per_patch,
                         pool_fraction=pool_fraction, scope=scope)


def detect(img: Image, model: net.Model,
           cfg: PipelineConfig | None = None) -> tuple[BandingMap, QualityResult]:
    """Full pipeline: tile, frequency maps, classify, mask, map, score.

    Deterministic for a fixed image, model, and config. The patch side comes
    from the config and must match the model's input side.
    """
    cfg = cfg or PipelineConfig(side=model.config.input_side)
    if cfg.side != model.config.input_side:
        raise ShapeMismatchError(
            f"config side {cfg.side} does not match model side {model.config.input_side}"
        )
    grid = tile_patches(img, cfg.side, cfg.pad_policy)
    hfms = [hfm(p) for p in grid.patches]
    lfms = [lfm(p, cfg.lfm) for p in grid.patches]
    hf_stack = np.stack([h.data for h in hfms])
    if model.config.n_branches == 2:
        inputs = [hf_stack, np.stack([l.data for l in lfms])]
    else:
        inputs = [hf_stack]
    probs = net.predict_batch(model, inputs)
    labels = (probs >= cfg.classify_threshold).astype(int)

    params = cfg.masking_params()
    stats = [spatial_freq(p, k) for k, p in enumerate(grid.patches)]
    eps = threshold_eps(stats)
    weights = [weight(st.sf, eps, params) for st in stats]

    bm = banding_map(grid, labels, hfms, weights)
    bm = replace(bm, provenance=tuple(
        replace(pv, sf=stats[pv.k].sf, cf=stats[pv.k].cf, rf=stats[pv.k].rf)
        for pv in bm.provenance
    ))
    qr = quality_score(bm, cfg.pool_fraction, cfg.pool_scope)
    return bm, qr


# ---------------------------------------------------------------------------
# Result artifacts
# ---------------------------------------------------------------------------

def write_heatmap_png(bm: BandingMap, path) -> None:
    """Min-max normalized grayscale rendering of the banding map."""
    arr = bm.data
    hi = float(arr.max()) if arr.size else 0.0
    lo = float(arr.min()) if arr.size else 0.0
    scaled = (arr - lo) / (hi - lo) if hi > lo else np.zeros_like(arr)
    save_png_gray(scaled, path)


def result_dict(bm: BandingMap, qr: QualityResult) -> dict:
    return {
        "q": qr.q,
        "m_patches": bm.n_patches,
        "p": qr.pool_fraction,
        "per_patch": [
            {"k": pv.k, "label": pv.label, "w": pv.weight, "sf": pv.sf}
            for pv in bm.provenance
        ],
    }


def write_result_json(bm: BandingMap, qr: QualityResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result_dict(bm, qr), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_stats_csv(bm: BandingMap, path) -> None:
    """Per-patch masking diagnostics: activity statistics and the weight."""
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "cf", "rf", "sf", "w"])
        for pv in bm.provenance:
            writer.writerow([pv.k, repr(pv.cf), repr(pv.rf), repr(pv.sf),
                             repr(pv.weight)])
