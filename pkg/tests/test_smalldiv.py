import math

import numpy as np
import pytest

from conftest import GOLDEN_ALPHA, LIOUVILLE_ALPHA, PHI, SQRT2
from solhodge import smalldiv as S
from solhodge.errors import (InsufficientData, InsufficientWitnesses,
                             NotSolvableConstantObstruction, ResonantDirection)
from solhodge.forms import form_from_table, inner_product, random_form


def brute_witnesses(alpha, radius):
    """Independent pure-python witness oracle with canonical signs."""
    out = []
    nmax = int(radius)
    for i in range(-nmax, nmax + 1):
        for j in range(-nmax, nmax + 1):
            if i == j == 0 or i * i + j * j > radius * radius:
                continue
            d = i * alpha[0] + j * alpha[1]
            if d < 0 or (d == 0 and (i < 0 or (i == 0 and j < 0))):
                continue
            nrm = math.sqrt(i * i + j * j)
            if abs(d) * nrm < 1.0:
                out.append(((i, j), abs(d), nrm))
    out.sort(key=lambda t: (t[0][0] ** 2 + t[0][1] ** 2, t[0]))
    return out


def brute_records(alpha, radius):
    """Witness-restricted running minima over norm shells."""
    entries = {}
    nmax = int(radius)
    for i in range(-nmax, nmax + 1):
        for j in range(-nmax, nmax + 1):
            ns = i * i + j * j
            if ns == 0 or ns > radius * radius:
                continue
            d = i * alpha[0] + j * alpha[1]
            canonical = d > 0 or (d == 0 and (i > 0 or (i == 0 and j > 0)))
            if not canonical:
                continue
            entries.setdefault(ns, []).append((abs(d), (i, j)))
    best = math.inf
    records = []
    for ns in sorted(entries):
        d, m = sorted(entries[ns])[0]
        if d < best:
            best = d
            if d * math.sqrt(ns) < 1.0:
                records.append((m, d))
    return records


FIB_PAIRS = {(-1, 1), (2, -1), (-3, 2), (5, -3), (-8, 5), (13, -8), (-21, 13), (34, -21)}


class TestContinuedFraction:
    def test_golden_ratio(self):
        cf = S.continued_fraction(PHI, 6)
        assert cf.quotients == (1, 1, 1, 1, 1, 1, 1)
        assert cf.convergents == ((1, 1), (2, 1), (3, 2), (5, 3), (8, 5), (13, 8), (21, 13))
        assert not cf.terminated

    def test_sqrt_two(self):
        assert S.continued_fraction(SQRT2, 4).quotients == (1, 2, 2, 2, 2)

    def test_rational_terminates(self):
        cf = S.continued_fraction(0.5, 2)
        assert cf.quotients == (0, 2)
        assert cf.terminated

    def test_convergent_quality(self):
        from fractions import Fraction
        for x in (PHI, SQRT2, math.pi, 0.110001):
            cf = S.continued_fraction(x, 10)
            exact = Fraction(x)  # the binary rational the double represents
            for (p, q), nxt in zip(cf.convergents, cf.convergents[1:]):
                # equality is attained at the penultimate convergent of a
                # terminating (rational) expansion
                assert abs(q * exact - p) <= Fraction(1, nxt[1])

    def test_preconditions(self):
        with pytest.raises(ValueError):
            S.continued_fraction(PHI, 0)
        with pytest.raises(ValueError):
            S.continued_fraction(float("inf"), 3)


class TestMinkowskiWitnesses:
    def test_golden_includes_fibonacci_pairs(self):
        got = {r.mode for r in S.minkowski_witnesses(GOLDEN_ALPHA, 10.0)}
        for pair in [(-1, 1), (2, -1), (-3, 2), (5, -3), (-8, 5)]:
            assert pair in got

    def test_golden_single_witness_inequality(self):
        records = {r.mode: r for r in S.minkowski_witnesses(GOLDEN_ALPHA, 10.0)}
        r = records[(-8, 5)]
        assert abs(r.divisor - 0.09017) < 5e-6
        assert r.divisor < 1.0 / r.norm

    def test_sqrt2_small_radius(self):
        got = {r.mode for r in S.minkowski_witnesses((1.0, SQRT2), 3.0)}
        assert (-1, 1) in got

    def test_small_radius_may_be_empty(self):
        assert S.minkowski_witnesses((1.0, 50.4), 1.0) == []

    def test_matches_brute_force_oracle(self):
        got = [(r.mode, r.divisor) for r in S.minkowski_witnesses(GOLDEN_ALPHA, 50.0)]
        expected = [(m, d) for m, d, _ in brute_witnesses(GOLDEN_ALPHA, 50.0)]
        assert got == expected

    def test_flags_are_consistent(self):
        for r in S.minkowski_witnesses(GOLDEN_ALPHA, 30.0):
            assert r.is_minkowski_witness == (r.divisor * r.norm < 1.0)


class TestRecordDivisors:
    def test_golden_records_are_fibonacci(self):
        records = S.record_divisors(GOLDEN_ALPHA, 60.0)
        assert [r.mode for r in records] == [
            (-1, 1), (2, -1), (-3, 2), (5, -3), (-8, 5), (13, -8), (-21, 13), (34, -21)]
        divisors = [r.divisor for r in records]
        assert all(a > b for a, b in zip(divisors, divisors[1:]))
        norms = [r.norm for r in records]
        assert all(a < b for a, b in zip(norms, norms[1:]))

    def test_sqrt2_records_are_pell_pairs(self):
        records = S.record_divisors((1.0, SQRT2), 10.0)
        got = {tuple(abs(x) for x in r.mode) for r in records}
        assert got == {(1, 1), (3, 2), (7, 5)}

    def test_matches_brute_force_oracle(self):
        got = [(r.mode, r.divisor) for r in S.record_divisors(GOLDEN_ALPHA, 50.0)]
        assert got == brute_records(GOLDEN_ALPHA, 50.0)

    def test_records_subset_of_witnesses(self):
        witnesses = {r.mode for r in S.minkowski_witnesses(GOLDEN_ALPHA, 40.0)}
        for r in S.record_divisors(GOLDEN_ALPHA, 40.0):
            assert r.mode in witnesses and r.is_record

    def test_rational_direction_hits_exact_zero(self):
        records = S.record_divisors((1.0, 0.5), 5.0)
        assert records[-1].divisor == 0.0
        assert tuple(abs(x) for x in records[-1].mode) == (1, 2)

    def test_convergent_cross_validation(self):
        # for these directions the records coincide exactly with the
        # continued fraction convergent pairs inside the scan ball
        for alpha in (GOLDEN_ALPHA, (1.0, SQRT2)):
            records = [r.mode for r in S.record_divisors(alpha, 60.0)]
            assert records == S.convergent_modes(alpha, 60.0)


class TestEstimateExponent:
    def test_golden_is_badly_approximable(self):
        records = S.record_divisors(GOLDEN_ALPHA, 60.0)
        est = S.estimate_exponent(records, scan_radius=60.0)
        assert abs(est.slope - 1.0) < 0.05
        assert est.tau_hat == 0.0
        assert est.n == 2 and est.n_records == 8
        # product norm * divisor stays above the asymptotic floor 1/sqrt(5)
        assert min(r.norm * r.divisor for r in records) > 1 / math.sqrt(5)

    def test_fit_bound_invariant(self):
        records = S.record_divisors(GOLDEN_ALPHA, 200.0)
        est = S.estimate_exponent(records)
        slack = math.exp(-3.0 * est.residual) * (1 - 1e-9)
        for r in records:
            assert r.divisor >= slack * est.gamma_hat / r.norm ** (est.n + est.tau_hat)

    def test_liouville_truncation_within_desk_radius(self):
        # within radius 1000 the truncated factorial sum still behaves like
        # a badly approximable number: only three records exist and the
        # fitted slope stays near 1.5
        records = S.record_divisors(LIOUVILLE_ALPHA, 1000.0)
        assert [r.mode for r in records] == [(0, 1), (1, -9), (-11, 100)]
        assert records[-1].divisor == pytest.approx(1e-4, rel=1e-6)
        est = S.estimate_exponent(records, scan_radius=1000.0)
        assert est.slope == pytest.approx(1.5248, abs=5e-3)

    def test_insufficient_data(self):
        records = S.record_divisors(GOLDEN_ALPHA, 3.0)
        assert len(records) == 2
        with pytest.raises(InsufficientData):
            S.estimate_exponent(records)

    def test_resonant_record_rejected(self):
        records = S.record_divisors((1.0, 0.5), 10.0)
        with pytest.raises(ResonantDirection):
            S.estimate_exponent(records)


class TestWitnessSequences:
    def test_golden_partial_sums(self):
        seq = S.build_witness_sequence(GOLDEN_ALPHA, 60.0, 5)
        assert list(seq.solution_partial_sums()) == [1.0, 2.0, 3.0, 4.0, 5.0]
        expected = sum(d * d for d in seq.divisors)
        assert seq.data_partial_sums()[-1] == pytest.approx(expected)
        assert seq.data_partial_sums()[-1] == pytest.approx(0.613009, abs=1e-6)

    def test_divisors_strictly_decreasing_and_distinct(self):
        seq = S.build_witness_sequence(GOLDEN_ALPHA, 60.0, 8)
        assert len(set(seq.modes)) == 8
        assert all(a > b for a, b in zip(seq.divisors, seq.divisors[1:]))

    def test_empty_sequence(self):
        seq = S.build_witness_sequence(GOLDEN_ALPHA, 60.0, 0)
        assert seq.modes == ()
        assert list(seq.data_partial_sums()) == []
        assert seq.solution_partial_sums().size == 0

    def test_insufficient_witnesses(self):
        with pytest.raises(InsufficientWitnesses):
            S.build_witness_sequence(GOLDEN_ALPHA, 60.0, 100)

    def test_disjoint_families_give_orthogonal_classes(self, golden_frame):
        families = S.witness_families(GOLDEN_ALPHA, 60.0, 3, 2)
        assert len(families) == 2
        supports = [set(f.modes) for f in families]
        assert supports[0].isdisjoint(supports[1])
        forms = [form_from_table(golden_frame, 1, 60.0,
                                 {(m, (1,)): b for m, b in zip(f.modes, f.coefficients)})
                 for f in families]
        assert inner_product(forms[0], forms[1]) == 0.0


class TestCohomologicalEquation:
    def test_round_trip_recovers_function(self, golden_frame):
        f = random_form(golden_frame, 0, 50.0, 3.0, seed=17)
        f.coeffs[(f.modes == 0).all(axis=1)] = 0.0
        g = S.direction_derivative(f, GOLDEN_ALPHA)
        sol = S.solve_cohomological(g, GOLDEN_ALPHA)
        err = np.abs(sol.solution.coeffs - f.coeffs)
        scale = np.maximum(np.abs(f.coeffs), 1e-300)
        assert (err / scale).max() <= 1e-12

    def test_constant_obstruction(self, golden_frame):
        g = form_from_table(golden_frame, 1, 5.0, {((0, 0), (1,)): 1.0})
        with pytest.raises(NotSolvableConstantObstruction):
            S.solve_cohomological(g, GOLDEN_ALPHA)

    def test_resonant_direction(self):
        frame = S.line_frame((1.0, 0.5), minimality_asserted=False)
        g = form_from_table(frame, 1, 3.0, {((-1, 2), (1,)): 1.0})
        with pytest.raises(ResonantDirection):
            S.solve_cohomological(g, (1.0, 0.5))

    def test_witness_data_diverges_one_per_witness(self, golden_frame):
        seq = S.build_witness_sequence(GOLDEN_ALPHA, 60.0, 8)
        g = form_from_table(golden_frame, 1, 60.0,
                            {(m, (1,)): b for m, b in zip(seq.modes, seq.coefficients)})
        sol = S.solve_cohomological(g, GOLDEN_ALPHA)
        norms = dict(sol.l2_by_radius)
        # witnesses inside each nested radius contribute exactly one each
        for rho, value in norms.items():
            inside = sum(1 for m in seq.modes if sum(x * x for x in m) <= rho * rho)
            assert value ** 2 == pytest.approx(inside, abs=1e-9)
        assert sol.divergence_slope is not None and sol.divergence_slope > 0.1

    def test_derivative_needs_line_frame(self, k2_frame):
        f = random_form(k2_frame, 0, 4.0, 1.0, seed=0)
        with pytest.raises(ValueError):
            S.direction_derivative(f, (1.0, 2.0, 3.0))


class TestDecayTransfer:
    def test_golden_preserves_polynomial_decay(self):
        records = S.record_divisors(GOLDEN_ALPHA, 1000.0)
        est = S.estimate_exponent(records, scan_radius=1000.0)
        report = S.decay_transfer_report(GOLDEN_ALPHA, est, 6.0, radius=1000.0)
        assert report.fitted_output_decay == pytest.approx(4.93, abs=0.1)
        assert report.bound == pytest.approx(6.0 - 2.0 - 0.2)
        assert report.satisfies_bound and not report.liouville_flag

    def test_liouville_truncation_stays_above_bound_in_range(self):
        # honest outcome at radius 1000: the truncated factorial sum has no
        # deep record and the fitted exponent remains above the bound
        records = S.record_divisors(LIOUVILLE_ALPHA, 1000.0)
        est = S.estimate_exponent(records, scan_radius=1000.0)
        report = S.decay_transfer_report(LIOUVILLE_ALPHA, est, 6.0, radius=1000.0)
        assert report.fitted_output_decay == pytest.approx(4.20, abs=0.05)
        assert report.satisfies_bound

    def test_precondition_on_input_decay(self):
        est = S.estimate_exponent(S.record_divisors(GOLDEN_ALPHA, 100.0))
        with pytest.raises(ValueError):
            S.decay_transfer_report(GOLDEN_ALPHA, est, 2.5, radius=100.0)
