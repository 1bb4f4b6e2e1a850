import math
from pathlib import Path

import numpy as np
import pytest

from config import settings
from errors import InvalidParameterError, UnsupportedDimensionError
from models.spectral import CollisionKernel
from utils import kernel_modes
from utils.kernel_modes import compute_kernel_modes, maxwell_beta_origin, quadrature_sizes
from utils.velocity_grid import build_grid


def mirror(km):
    return np.arange(km.table.shape[0])[::-1]


class TestMaxwellModes:
    def test_beta_origin_closed_form(self, grid16):
        km = compute_kernel_modes(grid16, use_cache=False)
        expected = maxwell_beta_origin(grid16.trunc_radius)
        assert km.beta((0, 0), (0, 0)).real == pytest.approx(expected, rel=1e-8)

    def test_slice_integral(self):
        # int_{B_R} 2R/|x| dx = 4 pi R^2, times B~ = 1/pi
        radius = 1.3
        assert maxwell_beta_origin(radius) == pytest.approx(4.0 * math.pi * radius ** 2 / math.pi)

    def test_conjugation_symmetry(self, grid8):
        km = compute_kernel_modes(grid8, use_cache=False)
        flip = mirror(km)
        np.testing.assert_array_equal(km.table[np.ix_(flip, flip)], km.table)

    def test_exchange_symmetry(self, grid8):
        km = compute_kernel_modes(grid8, use_cache=False)
        np.testing.assert_allclose(km.table, km.table.T, atol=1e-12 * np.max(np.abs(km.table)))

    def test_self_check_defect_reported(self, grid8):
        km = compute_kernel_modes(grid8, use_cache=False)
        assert km.self_check_defect is not None
        assert km.self_check_defect <= settings.quadrature_self_check_tolerance

    def test_table_shape(self, grid8):
        km = compute_kernel_modes(grid8, use_cache=False)
        assert km.n_modes == 3
        assert km.table.shape == (49, 49)
        assert km.index_of((0, 0)) == 24


class TestGeneralKernel:
    def test_vhs_alpha_zero_matches_maxwell(self, grid8):
        maxwell = compute_kernel_modes(grid8, use_cache=False)
        # alpha = 0 with the Maxwell constant goes through the decoupled path as well
        vhs = compute_kernel_modes(grid8, CollisionKernel("vhs", 0.0), use_cache=False)
        np.testing.assert_allclose(vhs.table, maxwell.table, rtol=1e-12)

    @pytest.mark.parametrize("level", [2, 3])
    def test_gauss_legendre_path_matches_closed_form(self, grid8, level):
        class CoupledKernel(CollisionKernel):
            is_decoupled = False

        maxwell = compute_kernel_modes(grid8, quadrature_level=level, use_cache=False)
        coupled = compute_kernel_modes(grid8, CoupledKernel("vhs", 0.0), quadrature_level=level, use_cache=False)
        scale = np.max(np.abs(maxwell.table))
        assert np.max(np.abs(coupled.table - maxwell.table)) <= 1e-12 * scale

    def test_hard_sphere_like_kernel(self, grid8):
        km = compute_kernel_modes(grid8, CollisionKernel("vhs", 1.0), quadrature_level=1, use_cache=False)
        flip = mirror(km)
        np.testing.assert_array_equal(km.table[np.ix_(flip, flip)], km.table)
        origin = km.index_of((0, 0))
        assert km.table[origin, origin] > 0

    def test_quadrature_grows_with_level(self):
        coarse = quadrature_sizes(7, 1.4, 1)
        fine = quadrature_sizes(7, 1.4, 2)
        assert fine[0] == 2 * coarse[0] and fine[1] == 2 * coarse[1]


class TestErrors:
    def test_unsupported_dimension(self):
        with pytest.raises(UnsupportedDimensionError):
            compute_kernel_modes(build_grid(3, 4, 1.0), use_cache=False)

    def test_level(self, grid8):
        with pytest.raises(InvalidParameterError):
            compute_kernel_modes(grid8, quadrature_level=0, use_cache=False)

    def test_low_level_warns(self, grid16, monkeypatch):
        warnings = []
        monkeypatch.setattr(kernel_modes.logger, "warning", warnings.append)
        monkeypatch.setattr(settings, "quadrature_self_check_tolerance", 0.0)
        compute_kernel_modes(grid16, CollisionKernel("vhs", 1.0), quadrature_level=1, use_cache=False)
        assert any("too low" in w for w in warnings)


class TestCache:
    def test_round_trip_through_cache(self, grid8):
        built = compute_kernel_modes(grid8)
        files = list(Path(settings.kernel_cache_dir).glob("*.kmod"))
        assert len(files) == 1
        loaded = compute_kernel_modes(grid8)
        np.testing.assert_array_equal(loaded.table, built.table)
        assert loaded.kernel == built.kernel
        assert loaded.self_check_defect == built.self_check_defect

    def test_cache_keyed_by_kernel_and_level(self, grid8):
        compute_kernel_modes(grid8)
        compute_kernel_modes(grid8, quadrature_level=3)
        compute_kernel_modes(grid8, CollisionKernel("vhs", 1.0), quadrature_level=1)
        assert len(list(Path(settings.kernel_cache_dir).glob("*.kmod"))) == 3

    def test_half_width_does_not_change_modes(self):
        first = compute_kernel_modes(build_grid(2, 8, 4.0))
        second = compute_kernel_modes(build_grid(2, 8, 9.0))
        np.testing.assert_array_equal(first.table, second.table)
        assert len(list(Path(settings.kernel_cache_dir).glob("*.kmod"))) == 1

    def test_cache_disabled(self, grid8):
        compute_kernel_modes(grid8, use_cache=False)
        assert not Path(settings.kernel_cache_dir).exists() or not any(Path(settings.kernel_cache_dir).iterdir())
