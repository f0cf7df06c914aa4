import math

import numpy as np
import pytest

from conftest import GOLDEN_ALPHA, PHI
from solhodge.current import (ambient_differential, ambient_from_table, build_kronecker_atlas,
                              coordinate_form, exactness_check, holonomy_translation_residual,
                              homology_class, quadrature_report, random_ambient_form,
                              rs_quadrature, rs_spectral, spectral_report)
from solhodge.errors import IncompatibleForms
from solhodge.foliation import build_frame


@pytest.fixture(scope="module")
def golden_atlas():
    return build_kronecker_atlas(GOLDEN_ALPHA, 4)


def sin_x1():
    return ambient_from_table(2, 0, {((1, 0), ()): -0.5j, ((-1, 0), ()): 0.5j})


class TestHomologyClass:
    def test_golden_line(self, golden_frame):
        got = homology_class(golden_frame)
        assert np.allclose(got, np.array(GOLDEN_ALPHA) / math.sqrt(1 + PHI**2), atol=1e-14)
        assert abs(got[0] - 0.52573) < 5e-6 and abs(got[1] - 0.85065) < 5e-6

    def test_axis_plane(self):
        frame = build_frame([(1.0, 0.0, 0.0), (0.0, 1.0, 0.0)], minimality_asserted=False)
        got = homology_class(frame)  # columns (1,2), (1,3), (2,3)
        assert np.allclose(got, [1.0, 0.0, 0.0], atol=1e-15)

    def test_unit_norm_by_cauchy_binet(self, k2_frame):
        assert np.sum(homology_class(k2_frame) ** 2) == pytest.approx(1.0, abs=1e-12)


class TestSpectralRoute:
    def test_dx1_projects_direction(self, golden_frame):
        value = rs_spectral(coordinate_form(2, 1), golden_frame)
        assert value == pytest.approx(1.0 / math.sqrt(1 + PHI**2), abs=1e-15)
        assert abs(value - 0.52573) < 5e-6

    def test_exact_form_vanishes(self, golden_frame):
        eta = random_ambient_form(2, 0, 6.0, 2.0, seed=12)
        assert rs_spectral(ambient_differential(eta), golden_frame) == 0.0

    def test_zero_mean_coefficients_vanish(self, golden_frame):
        omega = ambient_from_table(2, 1, {((2, 1), (1,)): 1.0, ((-2, -1), (1,)): 1.0})
        assert rs_spectral(omega, golden_frame) == 0.0

    def test_degree_mismatch(self, golden_frame):
        with pytest.raises(IncompatibleForms):
            rs_spectral(ambient_from_table(2, 0, {((0, 0), ()): 1.0}), golden_frame)


class TestAtlas:
    def test_partition_of_unity(self, golden_atlas):
        assert golden_atlas.partition_residual <= 1e-10
        assert golden_atlas.coverage_min > 0.0

    def test_single_box_rejected(self):
        with pytest.raises(ValueError):
            build_kronecker_atlas(GOLDEN_ALPHA, 1)

    def test_degenerate_direction_rejected(self):
        with pytest.raises(ValueError):
            build_kronecker_atlas((0.0, 0.0), 4)

    def test_good_boxes_nested(self, golden_atlas):
        assert golden_atlas.leaf_half < golden_atlas.leaf_half_outer
        assert golden_atlas.trans_half < golden_atlas.trans_half_outer

    def test_holonomy_acts_by_translations(self, golden_atlas):
        assert holonomy_translation_residual(golden_atlas) <= 1e-12

    def test_spec_round_trips_to_json(self, golden_atlas):
        import json
        spec = golden_atlas.spec()
        assert json.loads(json.dumps(spec)) == spec
        assert spec["box_count"] == 4


class TestQuadrature:
    def test_dx1_matches_closed_form(self, golden_atlas, golden_frame):
        result = rs_quadrature(golden_atlas, coordinate_form(2, 1), 1024)
        exact = rs_spectral(coordinate_form(2, 1), golden_frame)
        assert abs(result.value - exact) <= 1e-6
        assert result.estimated_error < 1e-4

    def test_exact_form_small(self, golden_atlas):
        omega = ambient_differential(random_ambient_form(2, 0, 5.0, 2.0, seed=3))
        assert abs(rs_quadrature(golden_atlas, omega, 512).value) <= 1e-5

    def test_zero_form_exact_zero(self, golden_atlas):
        omega = ambient_from_table(2, 1, {((0, 0), (1,)): 0.0})
        assert rs_quadrature(golden_atlas, omega, 256).value == 0.0

    def test_atlas_independence(self, golden_atlas, golden_frame):
        other = build_kronecker_atlas(GOLDEN_ALPHA, 7)
        omega = random_ambient_form(2, 1, 6.0, 2.0, seed=8)
        a = rs_quadrature(golden_atlas, omega, 512).value
        b = rs_quadrature(other, omega, 512).value
        assert abs(a - b) <= 1e-5
        assert abs(a - rs_spectral(omega, golden_frame)) <= 1e-5

    def test_linearity(self, golden_atlas):
        w1 = coordinate_form(2, 1)
        w2 = coordinate_form(2, 2)
        combo = ambient_from_table(2, 1, {((0, 0), (1,)): 2.0, ((0, 0), (2,)): -3.0})
        v = rs_quadrature(golden_atlas, combo, 256).value
        v1 = rs_quadrature(golden_atlas, w1, 256).value
        v2 = rs_quadrature(golden_atlas, w2, 256).value
        assert v == pytest.approx(2 * v1 - 3 * v2, abs=1e-12)

    def test_measure_scaling(self):
        atlas1 = build_kronecker_atlas(GOLDEN_ALPHA, 4, verify=False)
        atlas3 = build_kronecker_atlas(GOLDEN_ALPHA, 4, verify=False, measure_scale=3.0)
        omega = coordinate_form(2, 1)
        v1 = rs_quadrature(atlas1, omega, 256).value
        v3 = rs_quadrature(atlas3, omega, 256).value
        assert v3 == pytest.approx(3.0 * v1, rel=1e-12)

    def test_wrong_degree_rejected(self, golden_atlas):
        with pytest.raises(IncompatibleForms):
            rs_quadrature(golden_atlas, ambient_from_table(2, 0, {((0, 0), ()): 1.0}), 256)


class TestExactness:
    def test_sine_residual(self, golden_atlas):
        assert exactness_check(golden_atlas, sin_x1(), 1024) <= 1e-6

    def test_zero_function(self, golden_atlas):
        eta = ambient_from_table(2, 0, {((0, 0), ()): 0.0})
        assert exactness_check(golden_atlas, eta, 256) == 0.0

    def test_seeded_trials(self, golden_atlas):
        worst = max(exactness_check(golden_atlas,
                                    random_ambient_form(2, 0, 5.0, 2.0, seed=100 + i), 512)
                    for i in range(3))
        assert worst <= 1e-5


class TestReports:
    def test_spectral_report(self, golden_frame):
        report = spectral_report(coordinate_form(2, 1), golden_frame)
        payload = report.to_dict()
        assert payload["method"] == "spectral"
        assert payload["measureNormalization"] == 1.0
        assert payload["atlasSpec"] is None
        assert len(payload["homologyClass"]) == 2

    def test_quadrature_report(self, golden_atlas, golden_frame):
        report = quadrature_report(golden_atlas, coordinate_form(2, 1), 256, golden_frame)
        payload = report.to_dict()
        assert payload["method"] == "quadrature"
        assert payload["atlasSpec"]["box_count"] == 4
        assert payload["estimatedError"] > 0.0


class TestAmbientForms:
    def test_random_form_is_conjugate_symmetric(self):
        omega = random_ambient_form(2, 1, 6.0, 2.0, seed=5)
        table = {tuple(m): omega.coeffs[i].copy() for i, m in enumerate(omega.modes)}
        for m, row in table.items():
            mirrored = table[tuple(-x for x in m)]
            assert np.allclose(row, np.conj(mirrored), atol=1e-15)

    def test_differential_of_constant_is_zero(self):
        eta = ambient_from_table(2, 0, {((0, 0), ()): 4.2})
        assert np.abs(ambient_differential(eta).coeffs).max() == 0.0
