"""Compositing a cutout into a background: plain, feathered, or Poisson.

Poisson mode solves, per color channel, the discrete Poisson equation on the
cutout's opaque region with the source gradients as guidance and the
background as Dirichlet boundary. The 5-point system is symmetric positive
definite, so plain conjugate gradient is used without assembling a matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import box_in_bounds

POISSON_REGION_THRESHOLD = 0.5


class PoissonStructureError(ValueError):
    """Region and boundary do not form a well-posed Dirichlet problem."""


@dataclass(frozen=True)
class BlendConfig:
    mode: str = "poisson"
    feather_sigma: float = 1.5
    poisson_tol: float = 1e-4
    poisson_max_iters: int = 10_000

    def __post_init__(self):
        if self.mode not in ("plain", "gaussian", "poisson"):
            raise ValueError(f"unknown blend mode {self.mode!r}")
        if self.feather_sigma < 0 or not self.poisson_tol > 0 or self.poisson_max_iters < 1:
            raise ValueError("need feather_sigma >= 0, poisson_tol > 0, poisson_max_iters >= 1")

    @classmethod
    def from_pipeline(cls, cfg) -> "BlendConfig":
        return cls(cfg.blend_mode, cfg.feather_sigma, cfg.poisson_tol, cfg.poisson_max_iters)


@dataclass
class PoissonSolution:
    values: np.ndarray  # canvas-shaped; only region entries are meaningful
    iterations: int
    residual: float  # max-norm of b - Ax at return
    initial_residual: float
    converged: bool


# -- feathering -------------------------------------------------------------

def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _convolve_axis(a: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    r = len(kernel) // 2
    pad = [(0, 0)] * a.ndim
    pad[axis] = (r, r)
    padded = np.pad(a, pad, mode="edge")
    n = a.shape[axis]

    def tap(d):
        return np.take(padded, np.arange(r + d, r + d + n), axis=axis)

    # symmetric pairs are summed first so mirrored inputs give bit-identical output
    out = kernel[r] * a
    for d in range(1, r + 1):
        out = out + kernel[r + d] * (tap(d) + tap(-d))
    return out


def feather_alpha(alpha: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur of an alpha raster, radius ``ceil(3 sigma)``, clamp-to-edge."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    alpha = np.asarray(alpha, dtype=np.float64)
    if sigma == 0:
        return alpha.copy()
    k = gaussian_kernel(sigma)
    return np.clip(_convolve_axis(_convolve_axis(alpha, k, 0), k, 1), 0.0, 1.0)


# -- compositing --------------------------------------------------------------

def _paste_window(background, cutout, top_left, margin=0):
    x0, y0 = int(top_left[0]), int(top_left[1])
    h, w = cutout.pixels.shape[:2]
    box = (x0, y0, x0 + w, y0 + h)
    H, W = background.shape[:2]
    if not box_in_bounds(box, W, H, margin):
        raise ValueError(f"paste box {box} does not fit in {W}x{H} image (margin {margin})")
    return x0, y0, w, h


def alpha_composite(background: np.ndarray, cutout, top_left, alpha: np.ndarray | None = None) -> np.ndarray:
    """``alpha * src + (1 - alpha) * dst`` over the cutout box; ``top_left`` is ``(x, y)``."""
    x0, y0, w, h = _paste_window(background, cutout, top_left)
    a = cutout.alpha if alpha is None else alpha
    a = a[..., None]
    out = background.copy()
    region = out[y0:y0 + h, x0:x0 + w]
    out[y0:y0 + h, x0:x0 + w] = a * cutout.rgb + (1.0 - a) * region
    return out


# -- Poisson -------------------------------------------------------------------

_OFFSETS = ((-1, 0), (1, 0), (0, -1), (0, 1))


def _neighbor_table(region: np.ndarray):
    """Flat unknown indices of the region and their 4 neighbors (``n`` marks non-region)."""
    ys, xs = np.nonzero(region)
    n = ys.size
    index = np.full(region.shape, n, dtype=np.intp)
    index[ys, xs] = np.arange(n)
    nbrs = np.empty((n, 4), dtype=np.intp)
    for k, (dy, dx) in enumerate(_OFFSETS):
        nbrs[:, k] = index[ys + dy, xs + dx]
    return ys, xs, nbrs


def laplacian_apply(x: np.ndarray, nbrs: np.ndarray) -> np.ndarray:
    """Matrix-free 5-point operator: ``4 x_p - sum of region neighbors``."""
    x_ext = np.append(x, 0.0)
    return 4.0 * x - x_ext[nbrs].sum(axis=1)


def assemble_system(region, rhs, boundary):
    """Unknown coordinates, neighbor table and right-hand side for the Dirichlet problem."""
    region = np.asarray(region, dtype=bool)
    if region.ndim != 2 or not region.any():
        raise PoissonStructureError("region must be a non-empty 2-D mask")
    if region[0].any() or region[-1].any() or region[:, 0].any() or region[:, -1].any():
        raise PoissonStructureError("region touches the canvas edge; neighbors have no boundary values")
    ys, xs, nbrs = _neighbor_table(region)
    n = ys.size
    b = np.asarray(rhs, dtype=np.float64)[ys, xs].copy()
    boundary = np.asarray(boundary, dtype=np.float64)
    for k, (dy, dx) in enumerate(_OFFSETS):
        outside = nbrs[:, k] == n
        vals = boundary[ys[outside] + dy, xs[outside] + dx]
        if not np.all(np.isfinite(vals)):
            raise PoissonStructureError("a region pixel has a neighbor with no boundary value")
        b[outside] += vals
    return ys, xs, nbrs, b


def conjugate_gradient(b, nbrs, x0=None, tol=1e-4, max_iters=10_000, refresh=50):
    """CG on the region Laplacian; stops once the max-norm residual is at most ``tol``.

    Returns ``(x, iterations, final_residual, initial_residual)``. The
    recursively updated residual is replaced by the true one every ``refresh``
    iterations and before declaring convergence.
    """
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - laplacian_apply(x, nbrs)
    initial = float(np.abs(r).max())
    p = r.copy()
    rr = float(r @ r)
    it = 0
    while it < max_iters:
        if np.abs(r).max() <= tol:
            r = b - laplacian_apply(x, nbrs)
            if np.abs(r).max() <= tol:
                break
            p = r.copy()
            rr = float(r @ r)
        Ap = laplacian_apply(p, nbrs)
        alpha = rr / float(p @ Ap)
        x += alpha * p
        it += 1
        if it % refresh == 0:
            r = b - laplacian_apply(x, nbrs)
        else:
            r -= alpha * Ap
        rr_new = float(r @ r)
        if rr_new == 0.0:
            break
        p = r + (rr_new / rr) * p
        rr = rr_new
    final = float(np.abs(b - laplacian_apply(x, nbrs)).max())
    return x, it, final, initial


def solve_poisson_system(region, rhs, boundary, tol=1e-4, max_iters=10_000, x0=None) -> PoissonSolution:
    """Solve ``4 f_p - sum_{q in region} f_q = rhs_p + sum_{q on boundary} boundary_q``.

    ``region``, ``rhs``, ``boundary`` and the optional initial guess ``x0`` are
    canvas-shaped 2-D arrays. ``boundary`` must be finite on every non-region
    4-neighbor of the region.
    """
    ys, xs, nbrs, b = assemble_system(region, rhs, boundary)
    guess = None if x0 is None else np.asarray(x0, dtype=np.float64)[ys, xs]
    x, it, res, res0 = conjugate_gradient(b, nbrs, guess, tol, max_iters)
    values = np.zeros(np.shape(region), dtype=np.float64)
    values[ys, xs] = x
    return PoissonSolution(values, it, res, res0, res <= tol)


def inverse_norm_bound(region: np.ndarray) -> float:
    """Upper bound on the max-norm of the inverse region Laplacian.

    The quadratic ``x (W + 1 - x) / 2`` across the region's bounding box is a
    supersolution of ``A u = 1``, so by the discrete maximum principle
    ``|error|_max <= (min(W, H) + 1)**2 / 8 * |residual|_max``.
    """
    ys, xs = np.nonzero(region)
    extent = min(ys.max() - ys.min() + 1, xs.max() - xs.min() + 1)
    return (extent + 1) ** 2 / 8.0


def guidance_divergence(source: np.ndarray) -> np.ndarray:
    """``sum_q (g_p - g_q)`` over the 4-neighbors; the source is edge-replicated so
    gradients across its raster border vanish."""
    g = np.pad(source, 1, mode="edge")
    return (4.0 * g[1:-1, 1:-1] - g[:-2, 1:-1] - g[2:, 1:-1] - g[1:-1, :-2] - g[1:-1, 2:])


def poisson_region(cutout) -> np.ndarray:
    return cutout.alpha >= POISSON_REGION_THRESHOLD


def poisson_blend(background: np.ndarray, cutout, top_left, tol=1e-4, max_iters=10_000):
    """Seamless clone of ``cutout`` at ``top_left`` ``(x, y)``.

    Returns ``(image, solutions)`` with one :class:`PoissonSolution` per
    channel. Pixels outside the region ``alpha >= 0.5`` are left untouched.
    ``tol`` bounds the max-norm error of the solved channels: the CG residual
    target is ``tol`` divided by :func:`inverse_norm_bound`. Guidance
    gradients toward pixels beyond the cutout raster are taken as zero.
    """
    x0, y0, w, h = _paste_window(background, cutout, top_left, margin=1)
    omega = poisson_region(cutout)
    if not omega.any():
        raise ValueError(f"{cutout.source_id}: no pixel with alpha >= {POISSON_REGION_THRESHOLD}")
    region = np.pad(omega, 1, constant_values=False)
    window = background[y0 - 1:y0 + h + 1, x0 - 1:x0 + w + 1]
    out = background.copy()
    target = out[y0:y0 + h, x0:x0 + w]
    residual_tol = tol / inverse_norm_bound(omega)
    solutions = []
    for ch in range(background.shape[2]):
        src = cutout.pixels[..., ch]
        rhs = np.pad(guidance_divergence(src), 1)
        guess = np.pad(src, 1)
        sol = solve_poisson_system(region, rhs, window[..., ch], residual_tol, max_iters, x0=guess)
        vals = np.clip(sol.values[1:-1, 1:-1], 0.0, 1.0)
        target[..., ch][omega] = vals[omega]
        solutions.append(sol)
    return out, solutions


def blend(background: np.ndarray, cutout, top_left, cfg: BlendConfig):
    """Dispatch on ``cfg.mode``; returns ``(image, solutions, painted_mask)``.

    ``painted_mask`` is the cutout-shaped mask of pixels the paste may change.
    """
    if cfg.mode == "poisson":
        out, sols = poisson_blend(background, cutout, top_left, cfg.poisson_tol, cfg.poisson_max_iters)
        return out, sols, poisson_region(cutout)
    alpha = cutout.alpha
    if cfg.mode == "gaussian":
        alpha = feather_alpha(alpha, cfg.feather_sigma)
    return alpha_composite(background, cutout, top_left, alpha), [], alpha > 0
