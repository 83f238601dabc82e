import math

import numpy as np
import pytest

from mhdlab.errors import ConfigurationError
from mhdlab.fields import FieldSpec, gaussian_bump, prepare, random_solenoidal, sample
from mhdlab.spectral import build_grid, divergence_defect, hermitian_defect, l2_norm_sq


class TestGenerators:
    def test_random_solenoidal_norm_and_band(self):
        g = build_grid(2, 32, 2 * math.pi)
        v = random_solenoidal(g, norm=0.3, k_lo=2.0, k_hi=3.0, seed=11)
        assert l2_norm_sq(v, g) == pytest.approx(0.09, rel=1e-12)
        support = np.any(np.abs(v) > 0, axis=0)
        assert np.all((g.kmag[support] >= 2.0) & (g.kmag[support] <= 3.0))
        assert divergence_defect(v, g) <= 1e-12
        assert hermitian_defect(v, g) <= 1e-15

    def test_random_solenoidal_seeded(self):
        g = build_grid(3, 8, 2 * math.pi)
        assert np.array_equal(random_solenoidal(g, seed=5), random_solenoidal(g, seed=5))
        assert not np.array_equal(random_solenoidal(g, seed=5), random_solenoidal(g, seed=6))

    def test_empty_band(self):
        g = build_grid(2, 8, 1.0)
        with pytest.raises(ConfigurationError):
            random_solenoidal(g, k_lo=1.0, k_hi=2.0)

    def test_gaussian_bump_divergence_free(self):
        g = build_grid(2, 64, 20.0)
        v = sample(gaussian_bump(2, 1.0, 1.0, (1.0, -1.0)), g)
        assert divergence_defect(v, g) <= 1e-12

    def test_gaussian_bump_norm(self):
        # ||A (-y, x) exp(-r^2/2)||^2 = pi A^2 in the plane
        g = build_grid(2, 64, 16.0)
        v = sample(gaussian_bump(2, 2.0, 1.0), g)
        assert l2_norm_sq(v, g) == pytest.approx(4 * math.pi, rel=1e-12)

    def test_center_length_checked(self):
        with pytest.raises(ConfigurationError):
            gaussian_bump(3, center=(0.0, 0.0))

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            FieldSpec(kind="vortex-sheet")

    @pytest.mark.parametrize("kind", ["zero", "taylor-green", "shear-mode", "gaussian-bump"])
    def test_specs_are_analytic(self, kind):
        g = build_grid(3, 16, 2 * math.pi)
        spec = FieldSpec(kind=kind, amplitude=0.5)
        assert spec.analytic
        v = prepare(spec.spectral(g), g)
        assert divergence_defect(v, g) <= 1e-12

    def test_shear_mode_measured_on_box(self):
        g = build_grid(2, 16, 4 * math.pi)
        v = FieldSpec(kind="shear-mode", amplitude=1.0, mode=2).spectral(g)
        idx = np.argwhere(np.abs(v[0]) > 1e-12)
        assert {abs(int(g.m[j])) for _, j in idx} == {2}


class TestPrepare:
    def test_mean_removed_and_truncated(self):
        g = build_grid(2, 16, 1.0)
        rng = np.random.default_rng(0)
        v = rng.standard_normal((2, 16, 16)) + 1j * rng.standard_normal((2, 16, 16))
        p = prepare(v, g)
        assert np.all(p[:, 0, 0] == 0)
        assert not np.any(p[:, ~g.dealias_mask])
        assert hermitian_defect(p, g) <= 1e-15
