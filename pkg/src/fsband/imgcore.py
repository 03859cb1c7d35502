"""Image loading, luma conversion, patch tiling, and raster I/O.

All pixel data lives in row-major float64 arrays with a top-left origin and
values in [0, 1]. RGB input is collapsed to luma with the fixed weights
0.299 / 0.587 / 0.114 before normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CorruptDataError,
    PatchTooLargeError,
    ShapeMismatchError,
    UnsupportedFormatError,
)

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
PAD_POLICIES = ("reflect", "clamp")
MIN_PATCH_SIDE = 8


def _as_unit_matrix(data, what: str) -> np.ndarray:
    arr = np.array(data, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ShapeMismatchError(f"{what} must be a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{what} values must lie in [0, 1]")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Image:
    """Single-channel luma raster.

    ``data`` has shape ``(height, width)``; every element is finite and in
    [0, 1]. Instances are immutable and safe to share across threads.
    """

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        arr = _as_unit_matrix(self.data, "image data")
        if arr.shape != (self.height, self.width):
            raise ShapeMismatchError(
                f"image data shape {arr.shape} does not match (height, width)="
                f"({self.height}, {self.width})"
            )
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, data) -> "Image":
        arr = np.asarray(data, dtype=np.float64)
        return cls(width=arr.shape[1], height=arr.shape[0], data=arr)


@dataclass(frozen=True)
class Patch:
    """A square luma tile cut from an image.

    ``origin`` is the (row, col) of the patch's top-left pixel in the source
    image. ``side`` must be at least 8 so spatial-frequency statistics have
    meaningful support.
    """

    side: int
    origin: tuple[int, int]
    data: np.ndarray

    def __post_init__(self):
        if self.side < MIN_PATCH_SIDE:
            raise ValueError(f"patch side must be >= {MIN_PATCH_SIDE}, got {self.side}")
        arr = _as_unit_matrix(self.data, "patch data")
        if arr.shape != (self.side, self.side):
            raise ShapeMismatchError(
                f"patch data shape {arr.shape} does not match side {self.side}"
            )
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, data, origin=(0, 0)) -> "Patch":
        arr = np.asarray(data, dtype=np.float64)
        return cls(side=arr.shape[0], origin=tuple(origin), data=arr)


@dataclass(frozen=True)
class PatchGrid:
    """Non-overlapping row-major tiling of an image into side x side patches.

    Boundary patches are padded on the bottom/right according to
    ``pad_policy``; the source extent is retained so the padding can be
    cropped off again when stitching.
    """

    patches: tuple[Patch, ...]
    rows: int
    cols: int
    pad_policy: str
    image_height: int
    image_width: int

    @property
    def side(self) -> int:
        return self.patches[0].side

    @property
    def n_patches(self) -> int:
        return len(self.patches)


def _pad_indices(n: int, total: int, policy: str) -> np.ndarray:
    """Source indices for a length-``total`` axis padded out from ``n`` samples."""
    base = np.arange(total)
    if policy == "clamp":
        return np.clip(base, 0, n - 1)
    if policy == "reflect":
        if n == 1:
            return np.zeros(total, dtype=int)
        period = 2 * n - 2
        j = base % period
        return np.where(j >= n, period - j, j)
    raise ValueError(f"unknown pad policy {policy!r}; expected one of {PAD_POLICIES}")


def tile_patches(img: Image, side: int, pad_policy: str = "reflect") -> PatchGrid:
    """Tile ``img`` into a ceil-division grid of side x side patches.

    Every source pixel falls in exactly one patch interior; bottom/right
    boundary patches are filled out with reflected (or clamped) pixels.
    Raises :class:`PatchTooLargeError` when ``side`` exceeds four times the
    smaller image dimension, which would make the tiling degenerate.
    """
    if side < MIN_PATCH_SIDE:
        raise ValueError(f"patch side must be >= {MIN_PATCH_SIDE}, got {side}")
    if pad_policy not in PAD_POLICIES:
        raise ValueError(f"unknown pad policy {pad_policy!r}; expected one of {PAD_POLICIES}")
    if side > 4 * min(img.width, img.height):
        raise PatchTooLargeError(
            f"patch side {side} exceeds 4x the smaller image dimension "
            f"({img.width}x{img.height})"
        )
    rows = math.ceil(img.height / side)
    cols = math.ceil(img.width / side)
    ridx = _pad_indices(img.height, rows * side, pad_policy)
    cidx = _pad_indices(img.width, cols * side, pad_policy)
    padded = img.data[np.ix_(ridx, cidx)]
    patches = []
    for r in range(rows):
        for c in range(cols):
            block = padded[r * side:(r + 1) * side, c * side:(c + 1) * side]
            patches.append(Patch(side=side, origin=(r * side, c * side), data=block))
    return PatchGrid(
        patches=tuple(patches),
        rows=rows,
        cols=cols,
        pad_policy=pad_policy,
        image_height=img.height,
        image_width=img.width,
    )


def stitch_patches(grid: PatchGrid) -> Image:
    """Reassemble the source image from patch interiors, dropping padding."""
    side = grid.side
    canvas = np.empty((grid.rows * side, grid.cols * side), dtype=np.float64)
    for patch in grid.patches:
        r, c = patch.origin
        canvas[r:r + side, c:c + side] = patch.data
    return Image.from_array(canvas[:grid.image_height, :grid.image_width])


# ---------------------------------------------------------------------------
# Raster I/O
# ---------------------------------------------------------------------------

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def load_image(path) -> Image:
    """Load a PNG or binary PGM/PPM file as a luma image in [0, 1].

    8-bit samples are divided by 255, 16-bit samples by 65535. RGB input is
    reduced to luma with the fixed 0.299/0.587/0.114 weights. Raises
    ``FileNotFoundError``, :class:`UnsupportedFormatError`, or
    :class:`CorruptDataError` (all carrying the offending path).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image file: {path}")
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head.startswith(_PNG_MAGIC):
        return _load_png(path)
    if head[:2] in (b"P5", b"P6"):
        return _load_pnm(path)
    if head[:2] in (b"P1", b"P2", b"P3", b"P4"):
        raise UnsupportedFormatError(path, "only binary (P5/P6) PNM variants are supported")
    raise UnsupportedFormatError(path, "expected PNG or binary PGM/PPM")


def _load_png(path: Path) -> Image:
    from PIL import Image as PILImage, UnidentifiedImageError

    try:
        with PILImage.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "P":
                im = im.convert("RGB")
                mode = "RGB"
            if mode == "RGBA":
                im = im.convert("RGB")
                mode = "RGB"
            arr = np.asarray(im)
    except UnidentifiedImageError as exc:
        raise CorruptDataError(path, str(exc)) from exc
    except OSError as exc:
        raise CorruptDataError(path, str(exc)) from exc
    if mode == "L":
        return Image.from_array(arr.astype(np.float64) / 255.0)
    if mode in ("I", "I;16"):
        return Image.from_array(np.clip(arr.astype(np.float64) / 65535.0, 0.0, 1.0))
    if mode == "RGB":
        return Image.from_array(_rgb_to_luma(arr.astype(np.float64) / 255.0))
    raise UnsupportedFormatError(path, f"PNG mode {mode!r} is not supported")


def _rgb_to_luma(rgb: np.ndarray) -> np.ndarray:
    wr, wg, wb = LUMA_WEIGHTS
    y = wr * rgb[..., 0] + wg * rgb[..., 1] + wb * rgb[..., 2]
    return np.clip(y, 0.0, 1.0)


def _read_pnm_token(fh, path) -> bytes:
    # Tokens are separated by whitespace; '#' starts a comment to end of line.
    token = b""
    while True:
        ch = fh.read(1)
        if ch == b"":
            raise CorruptDataError(path, "unexpected end of PNM header")
        if ch == b"#":
            while ch not in (b"\n", b""):
                ch = fh.read(1)
            continue
        if ch.isspace():
            if token:
                return token
            continue
        token += ch


def _load_pnm(path: Path) -> Image:
    with open(path, "rb") as fh:
        magic = fh.read(2)
        try:
            width = int(_read_pnm_token(fh, path))
            height = int(_read_pnm_token(fh, path))
            maxval = int(_read_pnm_token(fh, path))
        except ValueError as exc:
            raise CorruptDataError(path, "malformed PNM header") from exc
        if width < 1 or height < 1 or not (0 < maxval < 65536):
            raise CorruptDataError(path, f"bad PNM dimensions {width}x{height} maxval {maxval}")
        channels = 3 if magic == b"P6" else 1
        deep = maxval > 255
        count = width * height * channels
        raw = fh.read(count * (2 if deep else 1))
    if len(raw) != count * (2 if deep else 1):
        raise CorruptDataError(path, "truncated PNM pixel data")
    dtype = ">u2" if deep else np.uint8  # 16-bit PNM samples are big-endian
    arr = np.frombuffer(raw, dtype=dtype).astype(np.float64).reshape(height, width, channels)
    arr = arr / float(maxval)
    if arr.max() > 1.0:
        raise CorruptDataError(path, "sample exceeds declared maxval")
    if channels == 3:
        return Image.from_array(_rgb_to_luma(arr))
    return Image.from_array(arr[:, :, 0])


def save_pgm(data: np.ndarray, path) -> None:
    """Write a 2-D uint8 array (or [0,1] floats) as a binary 8-bit PGM."""
    arr = np.asarray(data)
    if arr.dtype != np.uint8:
        arr = np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    if arr.ndim != 2:
        raise ShapeMismatchError(f"PGM payload must be 2-D, got shape {arr.shape}")
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes())


def save_png_gray(data: np.ndarray, path) -> None:
    """Write a 2-D array as an 8-bit grayscale PNG ([0,1] floats are scaled)."""
    from PIL import Image as PILImage

    arr = np.asarray(data)
    if arr.dtype != np.uint8:
        arr = np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    PILImage.fromarray(arr, mode="L").save(path, format="PNG")
