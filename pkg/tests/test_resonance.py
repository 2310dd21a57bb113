"""resonance: perturbation radii, spectrum brackets, event classification."""

import numpy as np
import pytest

from alloymsa import (Configuration, classify_resonance, eigensolve,
                      estimate_resonance_probability, exact_potential,
                      find_leading_index, make_box, perturbation_radius,
                      restrict_hamiltonian, spectrum_bracket,
                      truncated_exponential_potential, uniform_density)
from alloymsa.errors import GeometryError, ParameterError
from alloymsa.lattice import DisorderModel, PolynomialPiece
from alloymsa.resonance import (CERTIFIED_IN_A, CERTIFIED_OUT_A, INDETERMINATE,
                                SpectrumBracket)

DELTA0 = exact_potential({(0,): 1.0}, 1.0, 1.0)
UNIFORM = uniform_density(0.0, 1.0)


def leaky_potential(radius=40, alpha=1.0):
    return truncated_exponential_potential(
        1, 1.0, alpha, radius, lambda k: np.exp(-alpha * abs(k[0])))


class TestPerturbationRadius:
    def test_zero_support(self):
        tiny = DisorderModel((PolynomialPiece(0.0, 0.0 + 1e-9, (1e9,)),))
        assert perturbation_radius(DELTA0, tiny, 2.0) == pytest.approx(0.0)

    def test_analytic_cap(self):
        u = leaky_potential()
        r = perturbation_radius(u, UNIFORM, 2.0)
        # capped by omega_+ * C_hat e^{-3 l alpha / 2} ~ 0.2033
        assert 0.0 < r <= 0.2033 + 1e-4

    def test_compact_support_no_leak(self):
        # truncation radius 1 <= 3l for l = 2: nothing escapes the 4l-box
        assert perturbation_radius(
            exact_potential({(0,): 1.0, (1,): -1.0}, 2.8, 1.0), UNIFORM, 2.0
        ) == 0.0

    def test_exact_leak_below_analytic(self):
        u = leaky_potential(radius=40)
        l = 2.0
        from alloymsa.genfun import leaked_mass_bound, tail_bound
        exact = leaked_mass_bound(u, make_box((0,), l), 4.0 * l)
        analytic = tail_bound(u, l, 3.0 * l)
        assert perturbation_radius(u, UNIFORM, l) == \
            pytest.approx(min(exact, analytic))


class TestSpectrumBracket:
    def test_delta0_degenerate(self):
        box = make_box((0,), 2.0)
        enlarged = make_box((0,), 8.0)
        cfg = Configuration(enlarged, UNIFORM.sample(np.random.default_rng(0),
                                                     enlarged.count))
        b = spectrum_bracket(DELTA0, UNIFORM, cfg, box)
        assert b.radius == 0.0
        assert len(b.base_spectrum) == box.count

    def test_zero_potential_free_spectrum(self):
        box = make_box((0,), 2.0)
        enlarged = make_box((0,), 8.0)
        cfg = Configuration(enlarged, np.zeros(enlarged.count))
        b = spectrum_bracket(DELTA0, UNIFORM, cfg, box)
        from alloymsa import free_operator
        free = eigensolve(free_operator(box)).eigenvalues
        assert np.allclose(b.base_spectrum, free, atol=1e-12)

    def test_bracket_soundness_100_completions(self):
        u = leaky_potential(radius=40)
        l = 3.0
        box = make_box((0,), l)
        enlarged = make_box((0,), 4 * l)
        rng = np.random.default_rng(21)
        cfg = Configuration(enlarged, UNIFORM.sample(rng, enlarged.count))
        bracket = spectrum_bracket(u, UNIFORM, cfg, box)
        full = make_box((0,), l + u.truncation_radius + 0.25)
        inner_mask = enlarged.contains_points(full.points)
        base_vals = np.zeros(full.count)
        base_vals[inner_mask] = cfg.values_at(full.points[inner_mask])
        violations = 0
        for _ in range(100):
            vals = base_vals.copy()
            vals[~inner_mask] = UNIFORM.sample(rng, int((~inner_mask).sum()))
            completed = restrict_hamiltonian(u, Configuration(full, vals), box)
            evs = eigensolve(completed).eigenvalues
            if np.max(np.abs(evs - bracket.base_spectrum)) > bracket.radius + 1e-12:
                violations += 1
        assert violations == 0

    def test_domain_mismatch(self):
        box = make_box((0,), 2.0)
        cfg = Configuration(make_box((0,), 5.0), np.zeros(11))
        with pytest.raises(ParameterError):
            spectrum_bracket(DELTA0, UNIFORM, cfg, box)


def _bracket(center, spectrum, radius, l=2.0):
    return SpectrumBracket(
        box=make_box(center, l), enlarged=make_box(center, 4 * l),
        base_spectrum=np.asarray(spectrum, dtype=float), radius=radius)


class TestClassify:
    def test_identical_spectra(self):
        b1 = _bracket((0,), [1.0, 2.0], 0.0)
        b2 = _bracket((100,), [1.0, 3.0], 0.0)
        assert classify_resonance(b1, b2, 0.5) == CERTIFIED_IN_A

    def test_separated(self):
        b1 = _bracket((0,), [0.0], 0.01)
        b2 = _bracket((100,), [1.0], 0.01)
        assert classify_resonance(b1, b2, 0.1) == CERTIFIED_OUT_A

    def test_indeterminate_band(self):
        b1 = _bracket((0,), [0.0], 0.05)
        b2 = _bracket((100,), [0.12], 0.05)
        assert classify_resonance(b1, b2, 0.1) == INDETERMINATE

    def test_overlap_rejected(self):
        b1 = _bracket((0,), [0.0], 0.0)
        b2 = _bracket((1,), [1.0], 0.0)
        with pytest.raises(GeometryError):
            classify_resonance(b1, b2, 0.1)


class TestEstimateProbability:
    def test_huge_eps_vacuous(self):
        lead = find_leading_index(DELTA0)
        rep = estimate_resonance_probability(
            DELTA0, lead, UNIFORM, (0,), (100,), 3.0, 3.0, 50.0, 40, seed=1)
        assert rep.p_lo == 1.0
        assert rep.theory_bound >= 1.0

    def test_eps_zero(self):
        lead = find_leading_index(DELTA0)
        rep = estimate_resonance_probability(
            DELTA0, lead, UNIFORM, (0,), (100,), 3.0, 3.0, 0.0, 40, seed=2)
        assert rep.p_lo == 0.0

    def test_monotone_in_eps(self):
        lead = find_leading_index(DELTA0)
        reps = [estimate_resonance_probability(
            DELTA0, lead, UNIFORM, (0,), (100,), 3.0, 3.0, eps, 120, seed=3)
            for eps in (1e-3, 1e-2, 1e-1)]
        for a, b in zip(reps, reps[1:]):
            assert a.p_lo <= b.p_lo and a.p_hi <= b.p_hi
            assert a.theory_bound < b.theory_bound

    def test_bound_holds_quick(self):
        lead = find_leading_index(DELTA0)
        rep = estimate_resonance_probability(
            DELTA0, lead, UNIFORM, (0,), (100,), 3.0, 3.0, 1e-2, 300, seed=4)
        assert rep.p_hi <= rep.theory_bound + 3 * rep.std_error

    def test_scale_too_small(self):
        lead = find_leading_index(DELTA0)
        with pytest.raises(ParameterError):
            estimate_resonance_probability(
                DELTA0, lead, UNIFORM, (0,), (100,), 2.0, 1.0, 0.1, 10, seed=5)

    def test_overlapping_geometry(self):
        lead = find_leading_index(DELTA0)
        with pytest.raises(GeometryError):
            estimate_resonance_probability(
                DELTA0, lead, UNIFORM, (0,), (10,), 3.0, 3.0, 0.1, 10, seed=6)
