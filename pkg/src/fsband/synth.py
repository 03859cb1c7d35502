"""Synthetic banding corpus.

Positives are smooth backgrounds (linear ramps, radial ramps, low-frequency
noise fields) pushed through a coarse uniform quantizer, which is exactly the
bit-depth reduction that produces visible banding. Negatives are the same
backgrounds rendered band-free by triangular (TPDF) dithering of one quantizer
step before 8-bit storage, plus oriented band-pass noise textures that imitate
the periodic line structure of banding in the gradient domain without being
banding. The textures are the honest hard case: a classifier that only looks
at high-frequency energy will confuse them with contour lines, while the
low-frequency structure still tells them apart.

Every record carries its own seed drawn from the master stream, and
generation goes through :func:`regenerate_record` for writing and for
re-materialization alike, so a manifest row reproduces its patch bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import CorruptDataError, UnknownKindError
from .imgcore import load_image, save_pgm

SMOOTH_KINDS = ("linear-gradient", "radial-gradient", "low-freq-noise")
ALL_KINDS = SMOOTH_KINDS + ("texture",)

MANIFEST_NAME = "manifest.jsonl"
_REQUIRED_KEYS = ("id", "label", "kind", "bits", "seed", "path")


@dataclass(frozen=True)
class SynthConfig:
    count_per_class: int = 100
    side: int = 64
    kinds: tuple[str, ...] = ALL_KINDS
    bits: tuple[int, ...] = (3, 4, 5)
    dither_negatives: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kinds", tuple(self.kinds))
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if self.count_per_class < 1:
            raise ValueError("count_per_class must be >= 1")
        if self.side < 8:
            raise ValueError("side must be >= 8")
        unknown = set(self.kinds) - set(ALL_KINDS)
        if unknown:
            raise UnknownKindError(f"unknown background kinds: {sorted(unknown)}")
        if not any(k in SMOOTH_KINDS for k in self.kinds):
            raise ValueError("need at least one smooth background kind for positives")
        if not self.bits or any(not (2 <= b <= 7) for b in self.bits):
            raise ValueError("bits must be a non-empty subset of [2, 7]")

    @property
    def smooth_kinds(self) -> tuple[str, ...]:
        return tuple(k for k in self.kinds if k in SMOOTH_KINDS)


@dataclass(frozen=True)
class Record:
    id: str
    label: int
    kind: str
    bits: int
    seed: int
    path: str
    side: int
    dither: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "id": self.id,
                "label": self.label,
                "kind": self.kind,
                "bits": self.bits,
                "seed": self.seed,
                "path": self.path,
                "side": self.side,
                "dither": self.dither,
            },
            sort_keys=True,
        )


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    records: tuple[Record, ...]

    @property
    def path(self) -> Path:
        return self.root / MANIFEST_NAME

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)

    def class_counts(self) -> tuple[int, int]:
        y = self.labels()
        return int(np.sum(y == 0)), int(np.sum(y == 1))


# ---------------------------------------------------------------------------
# Background synthesis
# ---------------------------------------------------------------------------

def _ramp_bounds(rng, ramp_range):
    if ramp_range is not None:
        lo, hi = float(ramp_range[0]), float(ramp_range[1])
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError("ramp_range must satisfy 0 <= lo <= hi <= 1")
        # Burn the RNG draws regardless so a given seed always yields the
        # same direction/center whether or not the range is pinned.
        rng.uniform(0.0, 0.4)
        rng.uniform(0.6, 1.0)
        return lo, hi
    return rng.uniform(0.0, 0.4), rng.uniform(0.6, 1.0)


def gen_background(kind: str, side: int, seed, *, ramp_range=None) -> np.ndarray:
    """One background field in [0, 1], deterministic in (kind, side, seed).

    ``ramp_range=(lo, hi)`` pins the value range of the gradient kinds; a
    degenerate range (c, c) requests zero slope and yields a constant patch.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)

    if kind == "linear-gradient":
        lo, hi = _ramp_bounds(rng, ramp_range)
        theta = rng.uniform(0.0, 2.0 * np.pi)
        proj = xx * np.cos(theta) + yy * np.sin(theta)
        span = proj.max() - proj.min()
        t = (proj - proj.min()) / span if span > 0 else np.zeros_like(proj)
        return lo + (hi - lo) * t

    if kind == "radial-gradient":
        lo, hi = _ramp_bounds(rng, ramp_range)
        cy = rng.uniform(0.25, 0.75) * (side - 1)
        cx = rng.uniform(0.25, 0.75) * (side - 1)
        scale = rng.uniform(0.6, 1.3) * side
        invert = rng.random() < 0.5
        t = np.clip(np.hypot(yy - cy, xx - cx) / scale, 0.0, 1.0)
        if invert:
            t = 1.0 - t
        return lo + (hi - lo) * t

    if kind == "low-freq-noise":
        lo, hi = _ramp_bounds(rng, ramp_range)
        sigma = rng.uniform(0.12, 0.25) * side
        field = ndimage.gaussian_filter(rng.standard_normal((side, side)),
                                        sigma, mode="reflect")
        span = field.max() - field.min()
        if span < 1e-12:
            return np.full((side, side), 0.5 * (lo + hi))
        return lo + (hi - lo) * (field - field.min()) / span

    if kind == "texture":
        if rng.random() < 0.5:
            return _contour_stripes(rng, side)
        return _bandpass_noise(rng, side)

    raise UnknownKindError(f"unknown background kind: {kind!r}")


def _contour_stripes(rng, side: int) -> np.ndarray:
    """Alternating stripes along the iso-levels of a smooth field.

    A banded gradient steps up by one quantizer unit each time the underlying
    field crosses a level; this pattern instead toggles up and down by a step
    of the same size at the same crossing density. In the gradient-magnitude
    domain the two are nearly identical (same line geometry, spacing, and
    amplitude), but the stripes sit on a flat carrier: only the low-frequency
    structure reveals that nothing smooth is being contoured. This is the
    hard negative that a purely high-frequency classifier cannot resolve.
    """
    base_kind = SMOOTH_KINDS[int(rng.integers(len(SMOOTH_KINDS)))]
    field = gen_background(base_kind, side, int(rng.integers(2 ** 63)))
    transitions_per_unit = rng.uniform(6.0, 34.0)
    step = (1.0 / transitions_per_unit) * rng.uniform(0.8, 1.25)
    phase = rng.uniform(0.0, 1.0)
    center = rng.uniform(0.35, 0.65)
    parity = np.floor(field * transitions_per_unit + phase) % 2
    return np.clip(center - step / 2.0 + step * parity, 0.0, 1.0)


def _bandpass_noise(rng, side: int) -> np.ndarray:
    """Oriented band-pass noise: quasi-periodic high-activity texture."""
    f0 = rng.uniform(0.06, 0.28)
    sigma_r = rng.uniform(0.01, 0.05)
    sigma_t = rng.uniform(0.15, 0.7)
    theta0 = rng.uniform(0.0, np.pi)
    amp = rng.uniform(0.04, 0.22)
    center = rng.uniform(0.3, 0.7)
    noise = rng.standard_normal((side, side))
    fy = np.fft.fftfreq(side)[:, None]
    fx = np.fft.fftfreq(side)[None, :]
    r = np.hypot(fy, fx)
    ang = np.arctan2(fy, fx)
    d_ang = np.angle(np.exp(1j * 2.0 * (ang - theta0))) / 2.0
    gain = np.exp(-0.5 * ((r - f0) / sigma_r) ** 2
                  - 0.5 * (d_ang / sigma_t) ** 2)
    field = np.fft.ifft2(np.fft.fft2(noise) * gain).real
    std = field.std()
    if std > 1e-12:
        field /= std
    return np.clip(center + amp * field, 0.0, 1.0)


def apply_banding(values: np.ndarray, bits: int) -> np.ndarray:
    """Uniform quantization to 2**bits levels; the banding mechanism itself."""
    if not (2 <= bits <= 7):
        raise ValueError("bits must be in [2, 7]")
    levels = (1 << bits) - 1
    return np.round(np.asarray(values, dtype=np.float64) * levels) / levels


def dither_quantize(values: np.ndarray, bits: int, seed) -> np.ndarray:
    """Band-free rendition: TPDF dither of one quantizer step, then 8-bit.

    The triangular noise has the same amplitude as the step that would have
    produced the contours, so the high-frequency energy budget of a dithered
    negative matches its banded counterpart while the contours are gone.
    """
    rng = np.random.default_rng(seed)
    step = 1.0 / ((1 << bits) - 1)
    tri = (rng.random(values.shape) - rng.random(values.shape)) * step
    return np.round(np.clip(values + tri, 0.0, 1.0) * 255.0) / 255.0


# ---------------------------------------------------------------------------
# Dataset assembly
# ---------------------------------------------------------------------------

def _snap8(arr: np.ndarray) -> np.ndarray:
    """Collapse to the 8-bit sample grid, the precision PGM storage keeps."""
    return np.clip(np.round(arr * 255.0) / 255.0, 0.0, 1.0)


def regenerate_record(rec: Record) -> np.ndarray:
    """Materialize a record's patch from its metadata alone.

    This is the single generation path: :func:`gen_dataset` calls it before
    writing each PGM, so re-running it later reproduces the stored patch
    bit for bit. Every patch ends on the 8-bit grid, matching what an 8-bit
    raster file can hold.
    """
    bg_seed, noise_seed = np.random.SeedSequence(rec.seed).spawn(2)
    field = gen_background(rec.kind, rec.side, bg_seed)
    if rec.label == 1:
        return _snap8(apply_banding(field, rec.bits))
    if rec.kind == "texture":
        return _snap8(field)
    if rec.dither:
        return dither_quantize(field, rec.bits, noise_seed)
    return _snap8(field)


def gen_dataset(cfg: SynthConfig, out_dir) -> DatasetManifest:
    """Write a balanced labeled corpus (PGM patches + JSONL manifest).

    Positives cycle over the smooth background kinds and the configured bit
    depths; negatives cycle over all configured kinds, with smooth ones
    dithered at the matching bit depth and texture ones kept as-is.
    """
    root = Path(out_dir)
    (root / "patches").mkdir(parents=True, exist_ok=True)
    master = np.random.default_rng(cfg.seed)
    smooth = cfg.smooth_kinds
    records = []

    for label, prefix, kinds in ((1, "p", smooth), (0, "n", cfg.kinds)):
        for i in range(cfg.count_per_class):
            kind = kinds[i % len(kinds)]
            bits = cfg.bits[(i // len(kinds)) % len(cfg.bits)]
            rec = Record(
                id=f"{prefix}{i:05d}",
                label=label,
                kind=kind,
                bits=bits,
                seed=int(master.integers(2 ** 63)),
                path=f"patches/{prefix}{i:05d}.pgm",
                side=cfg.side,
                dither=cfg.dither_negatives,
            )
            save_pgm(regenerate_record(rec), root / rec.path)
            records.append(rec)

    manifest = DatasetManifest(root=root, records=tuple(records))
    with open(manifest.path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
    return manifest


def load_manifest(path) -> DatasetManifest:
    """Read a JSONL manifest; relative record paths resolve against its dir."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no manifest at {path}")
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorruptDataError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            missing = [k for k in _REQUIRED_KEYS if k not in row]
            if missing:
                raise CorruptDataError(f"{path}:{lineno}: missing keys {missing}")
            if row["label"] not in (0, 1):
                raise CorruptDataError(f"{path}:{lineno}: label must be 0 or 1")
            records.append(Record(
                id=str(row["id"]),
                label=int(row["label"]),
                kind=str(row["kind"]),
                bits=int(row["bits"]),
                seed=int(row["seed"]),
                path=str(row["path"]),
                side=int(row.get("side", 64)),
                dither=bool(row.get("dither", True)),
            ))
    if not records:
        raise CorruptDataError(f"{path}: manifest has no records")
    return DatasetManifest(root=path.parent, records=tuple(records))


def load_arrays(manifest: DatasetManifest) -> tuple[np.ndarray, np.ndarray]:
    """Stack all manifest patches into (N, side, side) values plus labels."""
    patches = []
    for rec in manifest.records:
        img = load_image(manifest.root / rec.path)
        patches.append(img.data)
    return np.stack(patches), manifest.labels().astype(np.float64)
