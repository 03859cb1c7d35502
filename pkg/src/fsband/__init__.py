"""fsband: no-reference banding (false contour) detection.

Images are tiled into patches; each patch is split into a high-frequency map
(gradient magnitude) and a low-frequency map (edge-preserving smooth
approximation), classified banded / clean by a dual-branch CNN, weighted by
spatial-frequency masking, and assembled into a pixel-wise banding map plus a
scalar quality score Q via worst-percentile pooling.
"""

from .errors import FsbandError
from .freqmaps import HFMap, LFMap, LFMConfig, hfm, lfm
from .imgcore import Image, Patch, PatchGrid, load_image, stitch_patches, tile_patches
from .masking import (MaskingParams, SpatialFreqStats, spatial_freq,
                      spatial_freq_array, threshold_eps, weight)
from .metric import (
    BandingMap,
    PipelineConfig,
    QualityResult,
    banding_map,
    detect,
    quality_score,
)
from .net import (
    Model,
    NetConfig,
    TrainConfig,
    TrainReport,
    forward,
    init_model,
    load_model,
    save_model,
    train,
)
from .synth import DatasetManifest, SynthConfig, gen_dataset, load_manifest

__version__ = "0.1.0"

__all__ = [
    "FsbandError",
    "HFMap", "LFMap", "LFMConfig", "hfm", "lfm",
    "Image", "Patch", "PatchGrid", "load_image", "stitch_patches", "tile_patches",
    "MaskingParams", "SpatialFreqStats", "spatial_freq", "spatial_freq_array",
    "threshold_eps", "weight",
    "BandingMap", "PipelineConfig", "QualityResult",
    "banding_map", "detect", "quality_score",
    "Model", "NetConfig", "TrainConfig", "TrainReport",
    "forward", "init_model", "load_model", "save_model", "train",
    "DatasetManifest", "SynthConfig", "gen_dataset", "load_manifest",
    "__version__",
]
