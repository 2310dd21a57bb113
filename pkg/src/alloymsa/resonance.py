"""Uniform control of resonances between two boxes.

Exterior couplings beyond a 4x-enlarged box move every eigenvalue by at
most a certified radius delta_i, so the spectrum at the zeroed exterior
plus a delta-tube brackets the spectrum of every completion.  The
brackets give sound two-sided classification of the resonance event
A(box1, box2, eps) = { uniform spectral distance < eps }, whose
probability the Wegner chain bounds explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mc
from .errors import GeometryError, ParameterError
from .genfun import LeadingIndexData, companion_radius, leaked_mass_bound, tail_bound
from .lattice import (Box, Configuration, DisorderModel, SingleSitePotential,
                      density_bv_norm, make_box, restrict_hamiltonian)
from .spectral import eigensolve
from .wegner import wegner_constant_chain

CERTIFIED_IN_A = "certified_in_A"
CERTIFIED_OUT_A = "certified_out_A"
INDETERMINATE = "indeterminate"


def perturbation_radius(u: SingleSitePotential, model: DisorderModel,
                        l_i: float, box: Box | None = None) -> float:
    """Certified bound on sup_{x in Lambda_l} |v_w(x) - v_w'(x)| over
    configurations agreeing on the 4l-enlarged box.

    Minimum of the analytic bound omega_+ * C_hat e^{-3 l alpha / 2} and the
    exact leaked-mass bound of the table (0 when the tabulated support
    cannot reach past the enlargement and nothing was truncated).
    """
    if l_i <= 0:
        raise ParameterError("l_i must be positive")
    omega_plus = model.omega_plus
    if omega_plus == 0.0:
        return 0.0
    if box is None:
        box = make_box((0,) * u.dimension, l_i)
    analytic = tail_bound(u, l_i, 3.0 * l_i)
    exact = leaked_mass_bound(u, box, 4.0 * l_i)
    return omega_plus * min(analytic, exact)


@dataclass(frozen=True)
class SpectrumBracket:
    """Base spectrum at the zeroed exterior plus a certified radius: every
    completion's j-th eigenvalue lies within `radius` of base j-th."""

    box: Box
    enlarged: Box
    base_spectrum: np.ndarray
    radius: float


def spectrum_bracket(u: SingleSitePotential, model: DisorderModel,
                     config: Configuration, box: Box,
                     radius: float | None = None) -> SpectrumBracket:
    """Eigensolve at the zeroed-exterior configuration on Lambda_{4l}(x).

    `radius` short-circuits the perturbation-radius computation when the
    caller has already evaluated it for this geometry.
    """
    l = box.half_side
    enlarged = make_box(box.center, 4.0 * l)
    if tuple(config.domain.lo) != tuple(enlarged.lo) or \
            tuple(config.domain.hi) != tuple(enlarged.hi):
        raise ParameterError("configuration domain must equal the 4l-enlarged box")
    zeroed = Configuration(config.domain, config.values, exterior_value=0.0)
    op = restrict_hamiltonian(u, zeroed, box)
    spectrum = eigensolve(op).eigenvalues
    if radius is None:
        radius = perturbation_radius(u, model, l, box=box)
    return SpectrumBracket(box=box, enlarged=enlarged,
                           base_spectrum=spectrum, radius=radius)


def classify_resonance(b1: SpectrumBracket, b2: SpectrumBracket,
                       eps: float) -> str:
    """Certified membership in A(box1, box2, eps) via the spectrum brackets.

    d0 = min distance of the base spectra.  d0 < eps puts the zeroed
    completion inside A; d0 - delta1 - delta2 >= eps excludes every
    completion; anything between stays indeterminate.
    """
    if eps < 0:
        raise ParameterError("eps must be nonnegative")
    if not b1.enlarged.disjoint_from(b2.enlarged):
        raise GeometryError("4l-enlarged boxes overlap: independence broken")
    d0 = float(np.min(np.abs(b1.base_spectrum[:, None] - b2.base_spectrum[None, :])))
    if d0 < eps:
        return CERTIFIED_IN_A
    if d0 - b1.radius - b2.radius >= eps:
        return CERTIFIED_OUT_A
    return INDETERMINATE


@dataclass(frozen=True)
class ResonanceReport:
    x: tuple
    y: tuple
    l1: float
    l2: float
    eps: float
    trials: int
    p_lo: float
    p_hi: float
    theory_bound: float
    delta1: float
    delta2: float
    std_error: float


def resonance_theory_bound(
    u: SingleSitePotential,
    lead: LeadingIndexData,
    model: DisorderModel,
    l1: float,
    l2: float,
    eps: float,
) -> tuple[float, float, float]:
    """(bound, delta1, delta2) with the proposition's explicit chain:
    (2 l1 + 1)^d ||rho||_Var (eps + delta1 + delta2) * sum_j ||t_{j,l2}||_1."""
    d = u.dimension
    delta1 = perturbation_radius(u, model, l1)
    delta2 = perturbation_radius(u, model, l2)
    count1 = make_box((0,) * d, l1).count
    bound = count1 * density_bv_norm(model) * (eps + delta1 + delta2) \
        * wegner_constant_chain(u, lead, l2)
    return bound, delta1, delta2


def estimate_resonance_probability(
    u: SingleSitePotential,
    lead: LeadingIndexData,
    model: DisorderModel,
    x: tuple,
    y: tuple,
    l1: float,
    l2: float,
    eps: float,
    trials: int,
    seed: int,
    threads: int | None = 1,
) -> ResonanceReport:
    """Monte-Carlo (p_lo, p_hi) for the event A(Lambda_{l1}(x), Lambda_{l2}(y), eps)
    against the explicit theory bound.

    p_lo counts certified_in_A; p_hi adds indeterminate outcomes, so every
    comparison against the bound stays conservative.
    """
    d = u.dimension
    box1 = make_box(tuple(x), l1)
    box2 = make_box(tuple(y), l2)
    big1 = make_box(tuple(x), 4.0 * l1)
    big2 = make_box(tuple(y), 4.0 * l2)
    if not big1.disjoint_from(big2):
        raise GeometryError("4l-enlarged boxes overlap")
    if 4.0 * l2 < companion_radius(u, lead, l2):
        raise ParameterError(
            f"l2={l2} too small: 4 l2 < R_l2 = {companion_radius(u, lead, l2):.6g}"
        )
    bound, delta1, delta2 = resonance_theory_bound(u, lead, model, l1, l2, eps)

    def worker(_i: int, rng: np.random.Generator) -> str:
        cfg1 = Configuration(big1, model.sample(rng, big1.count), 0.0)
        cfg2 = Configuration(big2, model.sample(rng, big2.count), 0.0)
        b1 = spectrum_bracket(u, model, cfg1, box1, radius=delta1)
        b2 = spectrum_bracket(u, model, cfg2, box2, radius=delta2)
        return classify_resonance(b1, b2, eps)

    outcomes = mc.run_trials(trials, worker, seed, threads)
    in_a = [1.0 if o == CERTIFIED_IN_A else 0.0 for o in outcomes]
    hi = [1.0 if o != CERTIFIED_OUT_A else 0.0 for o in outcomes]
    p_lo, _ = mc.mean_and_stderr(in_a)
    p_hi, stderr = mc.mean_and_stderr(hi)
    return ResonanceReport(
        x=tuple(x), y=tuple(y), l1=l1, l2=l2, eps=eps, trials=trials,
        p_lo=p_lo, p_hi=p_hi, theory_bound=bound,
        delta1=delta1, delta2=delta2, std_error=stderr,
    )
