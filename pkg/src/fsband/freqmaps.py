"""High- and low-frequency map generation for image patches.

The high-frequency map is the gradient magnitude under the isotropic Sobel
pair (center weight sqrt(2)). The low-frequency map is an edge-preserving
piecewise-smooth approximation obtained by minimizing

    E(L, v) = 1/2 sum (I - L)^2
            + alpha * sum (1 - v)^2 |grad L|^2
            + beta  * sum (w |grad v|^2 + v^2 / (4 w))

over the patch domain, where v in [0, 1] is an explicit edge field and the
third term is a phase-field surrogate for total edge length with width ``w``
(``edge_width``). Minimization alternates red-black Gauss-Seidel sweeps over
L and v; every pixel update is an exact coordinate minimization, so the
energy is non-increasing by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import NonFiniteInputError, ShapeMismatchError
from .imgcore import Patch, save_png_gray

_SQRT2 = np.sqrt(2.0)

# Isotropic Sobel pair; the transpose symmetry makes horizontal and vertical
# steps respond identically.
SOBEL_X = np.array([[-1.0, 0.0, 1.0],
                    [-_SQRT2, 0.0, _SQRT2],
                    [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()


@dataclass(frozen=True)
class HFMap:
    """Nonnegative gradient-magnitude map, same shape as its source patch."""

    data: np.ndarray


@dataclass(frozen=True)
class LFMap:
    """Edge-preserving smooth approximation plus its edge field.

    ``edge_field`` lies in [0, 1] and rises toward 1 where the solver decided
    a discontinuity should survive smoothing. ``energy_trace`` carries the
    per-iteration objective values when the solver was asked to record them.
    """

    data: np.ndarray
    edge_field: np.ndarray
    energy_trace: tuple[float, ...] | None = None


@dataclass(frozen=True)
class LFMConfig:
    """Solver weights for the low-frequency map.

    alpha scales the gated smoothness term, beta the edge-length penalty,
    edge_width the phase-field width of the edge indicator.
    """

    alpha: float = 2.0
    beta: float = 0.02
    iterations: int = 60
    tol: float = 1e-4
    edge_width: float = 0.01

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.tol <= 0 or self.edge_width <= 0:
            raise ValueError("tol and edge_width must be positive")


# Kernel taps cancel only up to float re-association on flat regions; anything
# this small is accumulation noise, not signal (one 8-bit step responds at
# ~1e-2), and keeping it would make flat images score nonzero.
_NOISE_FLOOR = 1e-12


def hfm_array(data: np.ndarray) -> np.ndarray:
    """Gradient magnitude of a 2-D array under the isotropic Sobel pair."""
    arr = np.asarray(data, dtype=np.float64)
    # 'mirror' matches the reflect padding used when tiling images.
    gx = ndimage.convolve(arr, SOBEL_X, mode="mirror")
    gy = ndimage.convolve(arr, SOBEL_Y, mode="mirror")
    mag = np.hypot(gx, gy)
    mag[mag < _NOISE_FLOOR] = 0.0
    return mag


def hfm(patch: Patch) -> HFMap:
    """High-frequency map of a patch; zero everywhere for a constant patch."""
    return HFMap(data=hfm_array(patch.data))


def _forward_diff_sq(a: np.ndarray) -> np.ndarray:
    """Per-pixel squared forward-difference magnitude (zero past the border)."""
    g = np.zeros_like(a)
    g[:-1, :] += (a[1:, :] - a[:-1, :]) ** 2
    g[:, :-1] += (a[:, 1:] - a[:, :-1]) ** 2
    return g


def lfm_energy_arrays(img: np.ndarray, lf: np.ndarray, edge: np.ndarray,
                      cfg: LFMConfig) -> float:
    if img.shape != lf.shape or img.shape != edge.shape:
        raise ShapeMismatchError(
            f"shapes disagree: image {img.shape}, map {lf.shape}, edge {edge.shape}"
        )
    data_term = 0.5 * float(np.sum((img - lf) ** 2))
    smooth_term = cfg.alpha * float(np.sum((1.0 - edge) ** 2 * _forward_diff_sq(lf)))
    w = cfg.edge_width
    length_term = cfg.beta * float(np.sum(w * _forward_diff_sq(edge) + edge ** 2 / (4.0 * w)))
    return data_term + smooth_term + length_term


def lfm_energy(patch: Patch, lfmap: LFMap, cfg: LFMConfig) -> float:
    """Objective value of (L, edge_field) against the patch; finite and >= 0."""
    return lfm_energy_arrays(patch.data, np.asarray(lfmap.data, dtype=np.float64),
                             np.asarray(lfmap.edge_field, dtype=np.float64), cfg)


def _neighbor_shifts(a: np.ndarray):
    """Zero-filled copies of ``a`` shifted from each 4-neighbor direction."""
    up = np.zeros_like(a)
    down = np.zeros_like(a)
    left = np.zeros_like(a)
    right = np.zeros_like(a)
    up[1:, :] = a[:-1, :]
    down[:-1, :] = a[1:, :]
    left[:, 1:] = a[:, :-1]
    right[:, :-1] = a[:, 1:]
    return up, down, left, right


def _grid_masks(shape):
    h, w = shape
    rr, cc = np.indices(shape)
    color = (rr + cc) % 2 == 0
    has_up = rr > 0
    has_down = rr < h - 1
    has_left = cc > 0
    has_right = cc < w - 1
    return color, has_up, has_down, has_left, has_right


def lfm_array(data: np.ndarray, cfg: LFMConfig | None = None,
              record_energy: bool = False) -> LFMap:
    """Run the alternating solver on a raw 2-D array. See :func:`lfm`."""
    cfg = cfg or LFMConfig()
    img = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(img)):
        raise NonFiniteInputError("input contains NaN or Inf")
    L = img.copy()
    v = np.zeros_like(img)
    color, has_up, has_down, has_left, has_right = _grid_masks(img.shape)
    alpha2 = 2.0 * cfg.alpha
    bw = cfg.beta * cfg.edge_width
    b_over = cfg.beta / (2.0 * cfg.edge_width)
    deg = (has_up.astype(np.float64) + has_down + has_left + has_right)

    trace = [lfm_energy_arrays(img, L, v, cfg)] if record_energy else None

    for _ in range(cfg.iterations):
        L_prev = L.copy()
        v_prev = v.copy()

        # L sweep: each pixel takes the exact minimizer of the quadratic in
        # L_p with neighbors fixed; red and black half-grids are independent.
        # Forward differences at p gate the (p -> down) and (p -> right)
        # couplings; the backward couplings carry the neighbor's own weight.
        w_here = (1.0 - v) ** 2
        wu, _, wl, _ = _neighbor_shifts(w_here)
        cd = w_here * has_down
        cr = w_here * has_right
        cu = wu * has_up
        cl = wl * has_left
        den = 1.0 + alpha2 * (cd + cr + cu + cl)
        for parity in (color, ~color):
            up, down, left, right = _neighbor_shifts(L)
            num = img + alpha2 * (cd * down + cr * right + cu * up + cl * left)
            L[parity] = (num / den)[parity]

        # v sweep: same scheme for the edge field; the coordinate minimizer
        # lands in [0, 1) automatically, no clamping required.
        g = _forward_diff_sq(L)
        g2a = alpha2 * g
        den = g2a + 2.0 * bw * deg + b_over
        for parity in (color, ~color):
            up, down, left, right = _neighbor_shifts(v)
            num = g2a + 2.0 * bw * (up * has_up + down * has_down
                                    + left * has_left + right * has_right)
            v[parity] = (num / den)[parity]

        if record_energy:
            trace.append(lfm_energy_arrays(img, L, v, cfg))
        delta = max(float(np.max(np.abs(L - L_prev))), float(np.max(np.abs(v - v_prev))))
        if delta < cfg.tol:
            break

    return LFMap(data=L, edge_field=v,
                 energy_trace=tuple(trace) if record_energy else None)


def lfm(patch: Patch, cfg: LFMConfig | None = None, record_energy: bool = False) -> LFMap:
    """Low-frequency map of a patch.

    A constant patch is returned unchanged (up to round-off) with a
    vanishing edge field; noisy
    content is smoothed while coherent steps survive as edge_field ridges.
    Pass ``record_energy=True`` to capture the objective after every
    iteration (starting from the initial state L = patch, edge_field = 0).
    """
    return lfm_array(patch.data, cfg, record_energy=record_energy)


def dump_map_png(data: np.ndarray, path) -> None:
    """Debug dump: min-max normalized 8-bit PNG plus a sidecar text file
    recording the normalization so values can be read back off the image."""
    arr = np.asarray(data, dtype=np.float64)
    lo = float(arr.min())
    hi = float(arr.max())
    scaled = (arr - lo) / (hi - lo) if hi > lo else np.zeros_like(arr)
    save_png_gray(scaled, path)
    with open(f"{path}.txt", "w", encoding="ascii") as fh:
        fh.write(f"min={lo!r}\nmax={hi!r}\n")


def _freq_pair(args):
    data, cfg = args
    return hfm_array(data), lfm_array(data, cfg).data


def compute_freq_stacks(patches: np.ndarray, cfg: LFMConfig | None = None,
                        jobs: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Both frequency maps for a stack of (N, S, S) patch values.

    Output order always matches input order, so results are identical for any
    ``jobs``; the smoothing solver dominates the cost and parallelizes per
    patch.
    """
    patches = np.asarray(patches, dtype=np.float64)
    if patches.ndim != 3:
        raise ShapeMismatchError("expected a (N, side, side) patch stack")
    cfg = cfg or LFMConfig()
    work = [(patches[i], cfg) for i in range(patches.shape[0])]
    if jobs > 1 and len(work) > 1:
        import concurrent.futures
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_freq_pair, work, chunksize=16))
    else:
        results = [_freq_pair(w) for w in work]
    hf = np.stack([r[0] for r in results])
    lf = np.stack([r[1] for r in results])
    return hf, lf
