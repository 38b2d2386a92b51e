import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxpaste.bank import make_cutout
from ctxpaste.blending import (
    BlendConfig,
    PoissonStructureError,
    alpha_composite,
    blend,
    feather_alpha,
    gaussian_kernel,
    inverse_norm_bound,
    poisson_blend,
    solve_poisson_system,
)
from ctxpaste.fixtures import draw_cone

OFFSETS = ((-1, 0), (1, 0), (0, -1), (0, 1))


def dense_solve(region, rhs, boundary):
    """Independent oracle: assemble the 5-point system densely and eliminate."""
    coords = [tuple(p) for p in np.argwhere(region)]
    index = {p: k for k, p in enumerate(coords)}
    A = np.zeros((len(coords), len(coords)))
    b = np.zeros(len(coords))
    for k, (y, x) in enumerate(coords):
        A[k, k] = 4.0
        b[k] = rhs[y, x]
        for dy, dx in OFFSETS:
            q = (y + dy, x + dx)
            if q in index:
                A[k, index[q]] = -1.0
            else:
                b[k] += boundary[q]
    out = np.zeros(region.shape)
    for (y, x), v in zip(coords, np.linalg.solve(A, b)):
        out[y, x] = v
    return out


def gauss_seidel(region, rhs, boundary, sweeps=20_000, tol=1e-12):
    """Reference iterative solver kept only for cross-checking CG."""
    f = np.where(region, 0.0, boundary)
    coords = [tuple(p) for p in np.argwhere(region)]
    for _ in range(sweeps):
        delta = 0.0
        for y, x in coords:
            new = (rhs[y, x] + f[y - 1, x] + f[y + 1, x] + f[y, x - 1] + f[y, x + 1]) / 4.0
            delta = max(delta, abs(new - f[y, x]))
            f[y, x] = new
        if delta < tol:
            break
    return np.where(region, f, 0.0)


def matrix_free_residual(values, region, rhs, boundary):
    f = np.where(region, values, boundary)
    res = 4 * f[1:-1, 1:-1] - f[:-2, 1:-1] - f[2:, 1:-1] - f[1:-1, :-2] - f[1:-1, 2:] - rhs[1:-1, 1:-1]
    return np.abs(res[region[1:-1, 1:-1]]).max()


def random_region(rng, h, w, fill=0.7):
    region = np.zeros((h + 2, w + 2), dtype=bool)
    region[1:-1, 1:-1] = rng.random((h, w)) < fill
    if not region.any():
        region[1 + h // 2, 1 + w // 2] = True
    return region


# -- solver ----------------------------------------------------------------------

def test_single_unknown():
    region = np.zeros((3, 3), dtype=bool)
    region[1, 1] = True
    boundary = np.array([[0, 2.0, 0], [4.0, 0, 6.0], [0, 8.0, 0]])
    sol = solve_poisson_system(region, np.zeros((3, 3)), boundary)
    assert sol.values[1, 1] == pytest.approx(5.0, abs=1e-12)


def test_constant_boundary_is_harmonic():
    region = np.zeros((12, 12), dtype=bool)
    region[1:-1, 1:-1] = True
    sol = solve_poisson_system(region, np.zeros((12, 12)), np.full((12, 12), 0.37), tol=1e-10)
    assert np.abs(sol.values[region] - 0.37).max() <= 1e-9


def test_random_rhs_residual_oracle():
    rng = np.random.default_rng(4)
    region = np.zeros((18, 18), dtype=bool)
    region[1:-1, 1:-1] = True
    rhs = rng.normal(size=(18, 18))
    boundary = rng.random((18, 18))
    sol = solve_poisson_system(region, rhs, boundary, tol=1e-4)
    assert sol.converged
    assert matrix_free_residual(sol.values, region, rhs, boundary) <= 1e-4
    assert sol.residual <= sol.initial_residual


@pytest.mark.parametrize("seed", range(12))
def test_cg_matches_dense_and_gauss_seidel(seed):
    rng = np.random.default_rng(seed)
    h, w = rng.integers(1, 9, size=2)
    region = random_region(rng, h, w)
    assert region.sum() <= 64
    rhs = rng.normal(size=region.shape)
    boundary = rng.random(region.shape)
    cg = solve_poisson_system(region, rhs, boundary, tol=1e-12, max_iters=1000).values
    dense = dense_solve(region, rhs, boundary)
    assert np.abs(cg - dense)[region].max() <= 1e-8
    if seed < 3:
        assert np.abs(gauss_seidel(region, rhs, boundary) - dense)[region].max() <= 1e-8


def test_structural_errors():
    region = np.zeros((4, 4), dtype=bool)
    with pytest.raises(PoissonStructureError):
        solve_poisson_system(region, np.zeros((4, 4)), np.zeros((4, 4)))
    region[0, 1] = True
    with pytest.raises(PoissonStructureError, match="edge"):
        solve_poisson_system(region, np.zeros((4, 4)), np.zeros((4, 4)))
    region = np.zeros((4, 4), dtype=bool)
    region[1, 1] = True
    boundary = np.zeros((4, 4))
    boundary[1, 2] = np.nan
    with pytest.raises(PoissonStructureError, match="boundary"):
        solve_poisson_system(region, np.zeros((4, 4)), boundary)


def test_iteration_cap_reports_nonconvergence():
    rng = np.random.default_rng(0)
    region = np.zeros((30, 30), dtype=bool)
    region[1:-1, 1:-1] = True
    sol = solve_poisson_system(region, rng.normal(size=(30, 30)), np.zeros((30, 30)), tol=1e-10, max_iters=3)
    assert not sol.converged and sol.iterations == 3 and sol.residual > 1e-10


def test_inverse_norm_bound_dominates_true_norm():
    region = np.zeros((14, 22), dtype=bool)
    region[1:-1, 1:-1] = True
    ones = solve_poisson_system(region, np.ones(region.shape), np.zeros(region.shape), tol=1e-12).values
    assert ones.max() <= inverse_norm_bound(region)


# -- feathering --------------------------------------------------------------------

def direct_blur(alpha, sigma):
    k = gaussian_kernel(sigma)
    r = len(k) // 2
    h, w = alpha.shape
    out = np.zeros_like(alpha)
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for a in range(-r, r + 1):
                for b in range(-r, r + 1):
                    acc += k[a + r] * k[b + r] * alpha[min(max(i + a, 0), h - 1), min(max(j + b, 0), w - 1)]
            out[i, j] = acc
    return out


def test_feather_identity_and_constant():
    rng = np.random.default_rng(0)
    a = rng.random((9, 7))
    assert np.array_equal(feather_alpha(a, 0), a)
    assert np.abs(feather_alpha(np.ones((20, 20)), 3.0) - 1.0).max() <= 1e-6
    assert len(gaussian_kernel(2.0)) == 2 * math.ceil(6.0) + 1


def test_feather_disk_matches_direct_summation():
    yy, xx = np.mgrid[0:31, 0:31]
    disk = ((yy - 15) ** 2 + (xx - 15) ** 2 <= 10 ** 2).astype(float)
    out = feather_alpha(disk, 2.0)
    assert np.abs(out - direct_blur(disk, 2.0)).max() <= 1e-12
    edge = ((yy - 15) ** 2 + (xx - 15) ** 2 >= 9.5 ** 2) & ((yy - 15) ** 2 + (xx - 15) ** 2 <= 10.5 ** 2)
    assert np.all((out[edge] > 0) & (out[edge] < 1))
    assert np.abs(out[15, 15] - 1.0) <= 1e-6


# -- compositing --------------------------------------------------------------------

def cutout_from(rgb, alpha):
    return make_cutout(np.dstack([rgb, alpha]), "x", (1, 1))


def test_alpha_composite_examples():
    bg = np.random.default_rng(1).random((20, 20, 3))
    c = cutout_from(np.ones((5, 5, 3)), np.ones((5, 5)))
    out = alpha_composite(bg, c, (3, 4))
    assert np.array_equal(out[4:9, 3:8], np.ones((5, 5, 3)))
    mask = np.ones((20, 20), dtype=bool)
    mask[4:9, 3:8] = False
    assert np.array_equal(out[mask], bg[mask])
    assert np.array_equal(alpha_composite(bg, c, (3, 4), alpha=np.zeros((5, 5))), bg)
    half = alpha_composite(np.zeros((10, 10, 3)), cutout_from(np.ones((4, 4, 3)), np.full((4, 4), 0.5)), (2, 2))
    assert np.allclose(half[2:6, 2:6], 0.5)
    with pytest.raises(ValueError):
        alpha_composite(bg, c, (17, 0))


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["plain", "gaussian"]), st.integers(0, 2**32 - 1))
def test_flip_commutes(mode, seed):
    rng = np.random.default_rng(seed)
    bg = rng.random((40, 50, 3))
    cone = draw_cone(int(rng.integers(8, 30)), int(rng.integers(6, 20)), rng.random(3))
    c = make_cutout(cone, "x", (1, 1))
    c_flip = c.with_pixels(np.ascontiguousarray(c.pixels[:, ::-1]))
    x0 = int(rng.integers(0, 50 - c.width + 1))
    y0 = int(rng.integers(0, 40 - c.height + 1))
    cfg = BlendConfig(mode=mode, feather_sigma=float(rng.uniform(0, 3)))
    a, _, _ = blend(bg, c, (x0, y0), cfg)
    b, _, _ = blend(bg[:, ::-1], c_flip, (50 - x0 - c.width, y0), cfg)
    assert np.array_equal(a[:, ::-1], b)


# -- Poisson blend --------------------------------------------------------------------

def ring_cutout(src):
    """Opaque source with a one-pixel translucent ring (alpha 0.25, outside the solve region)."""
    h, w = src.shape[:2]
    alpha = np.full((h, w), 0.25)
    alpha[1:-1, 1:-1] = 1.0
    return cutout_from(src, alpha)


def test_poisson_identity_paste():
    rng = np.random.default_rng(7)
    bg = rng.random((48, 48, 3))
    c = ring_cutout(bg[7:41, 7:41].copy())  # 32x32 opaque interior
    out, sols = poisson_blend(bg, c, (7, 7), tol=1e-4)
    assert np.abs(out - bg).max() <= 1e-4
    assert all(s.converged for s in sols)


def test_poisson_constant_into_constant():
    bg = np.full((48, 48, 3), 0.3)
    c = cutout_from(np.full((32, 32, 3), 0.8), np.ones((32, 32)))
    out, _ = poisson_blend(bg, c, (8, 8), tol=1e-4)
    assert np.abs(out[8:40, 8:40] - 0.3).max() <= 1e-4


def test_poisson_constant_into_ramp():
    ramp = np.tile(np.linspace(0.1, 0.9, 48), (48, 1))
    bg = np.dstack([ramp, ramp * 0.5, 1 - ramp])
    c = cutout_from(np.full((32, 32, 3), 0.8), np.ones((32, 32)))
    out, _ = poisson_blend(bg, c, (8, 8), tol=1e-4)
    assert np.abs(out[8:40, 8:40] - bg[8:40, 8:40]).max() <= 1e-4


def test_poisson_leaves_outside_untouched():
    rng = np.random.default_rng(3)
    bg = rng.random((60, 60, 3))
    c = make_cutout(draw_cone(30, 20, (1, 0.4, 0)), "x", (1, 1))
    out, _ = poisson_blend(bg, c, (20, 15))
    changed = np.any(out != bg, axis=-1)
    omega = np.zeros((60, 60), dtype=bool)
    omega[15:45, 20:40] = c.alpha >= 0.5
    assert not changed[~omega].any()
    assert out.min() >= 0 and out.max() <= 1


def test_poisson_requires_margin_and_region():
    bg = np.zeros((20, 20, 3))
    c = cutout_from(np.ones((5, 5, 3)), np.ones((5, 5)))
    with pytest.raises(ValueError):
        poisson_blend(bg, c, (0, 5))
    faint = cutout_from(np.ones((5, 5, 3)), np.full((5, 5), 0.3))
    with pytest.raises(ValueError, match="alpha"):
        poisson_blend(bg, faint, (5, 5))


def test_poisson_nonconvergence_is_reported():
    rng = np.random.default_rng(5)
    bg = rng.random((50, 50, 3))
    c = cutout_from(rng.random((30, 30, 3)), np.ones((30, 30)))
    _, sols = poisson_blend(bg, c, (10, 10), tol=1e-6, max_iters=2)
    assert not any(s.converged for s in sols)
    assert all(s.iterations == 2 and s.residual > 0 for s in sols)


def test_blend_config_validation():
    with pytest.raises(ValueError):
        BlendConfig(mode="poison")
    with pytest.raises(ValueError):
        BlendConfig(poisson_tol=0)
