"""Multiscale-analysis machinery: regularity and non-resonance predicates,
uniform (all-exterior) certification, event probability estimators, and the
deterministic parameter/scale recursion.

Parameter conventions: xi > 2d, kappa in (1, 2xi/(xi+2d)), beta in
(2-kappa, 1), scales l_{k+1} = l_k^kappa, masses
m_{k+1} = m_k (1 - l_{k+1}^{-(1-beta)/kappa}) - l_{k+1}^{-(1-beta)/kappa},
with the non-resonance exponent zeta = kappa (5d + ||I0||_1 + 2 xi) + 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import mc
from .errors import ParameterError, ScheduleError
from .genfun import LeadingIndexData, companion_radius, leaked_mass_bound
from .lattice import (Box, BoxOperator, Configuration, DisorderModel,
                      SingleSitePotential, density_bv_norm, make_box,
                      restrict_hamiltonian)
from .resonance import perturbation_radius
from .spectral import eigensolve, greens_column
from .wegner import wegner_constant_chain
from .tails import decay_tail_constant

CERTIFIED_REGULAR = "certified_regular"
CERTIFIED_IRREGULAR = "certified_irregular"
INDETERMINATE = "indeterminate"


# ---------------------------------------------------------------------------
# deterministic predicates


def regularity_test(op: BoxOperator, center, m: float, E: float) -> bool:
    """(m,E)-regular: E off the spectrum and |G(E; center, w)| <= e^{-m l}
    for every interior-boundary site w.  Resonant E returns False."""
    evals = eigensolve(op).eigenvalues
    if np.min(np.abs(evals - E)) < 1e-12:
        return False
    col = greens_column(op, E, tuple(center))
    l = op.box.half_side
    threshold = math.exp(-m * l)
    for w in op.box.interior_boundary:
        if abs(col[op.box.flat_index(tuple(w))]) > threshold:
            return False
    return True


def nonresonance_test(op: BoxOperator, E: float, zeta_nr: float, l: float) -> bool:
    """E-NR: d(E, spectrum) >= (1/2) l^{-zeta} (closed inequality)."""
    evals = eigensolve(op).eigenvalues
    return bool(np.min(np.abs(evals - E)) >= 0.5 * l ** (-zeta_nr))


def uniform_regularity_test(
    u: SingleSitePotential,
    model: DisorderModel,
    config: Configuration,
    box: Box,
    m: float,
    E: float,
    delta: float | None = None,
) -> str:
    """Certify (m,E)-regularity simultaneously for every exterior completion
    of the couplings outside Lambda_{4l}(center).

    The zeroed-exterior operator is computable exactly; if it is already
    irregular the cube is certainly not uniformly regular.  Otherwise a
    first-order resolvent bracket (radius delta from the perturbation
    radius) either certifies all completions or stays indeterminate.
    """
    center = box.center
    l = box.half_side
    enlarged = make_box(center, 4 * l)
    if tuple(config.domain.lo) != tuple(enlarged.lo) or \
            tuple(config.domain.hi) != tuple(enlarged.hi):
        raise ParameterError("configuration domain must be the 4l-enlarged box")
    zeroed = Configuration(config.domain, config.values, exterior_value=0.0)
    op = restrict_hamiltonian(u, zeroed, box)
    if not regularity_test(op, center, m, E):
        return CERTIFIED_IRREGULAR
    if delta is None:
        delta = perturbation_radius(u, model, l, box=box)
    if delta == 0.0:
        return CERTIFIED_REGULAR
    evals = eigensolve(op).eigenvalues
    d_base = float(np.min(np.abs(evals - E)))
    if delta >= d_base:
        return INDETERMINATE
    g_norm = 1.0 / d_base
    slack = delta * g_norm * g_norm / (1.0 - delta * g_norm)
    col = greens_column(op, E, tuple(center))
    threshold = math.exp(-m * l)
    for w in box.interior_boundary:
        if abs(col[box.flat_index(tuple(w))]) + slack > threshold:
            return INDETERMINATE
    return CERTIFIED_REGULAR


@dataclass(frozen=True)
class SingularityReport:
    p_hi: float
    trials: int
    std_error: float
    per_energy: dict[float, int]


def estimate_singularity_probability(
    u: SingleSitePotential,
    model: DisorderModel,
    l: float,
    m: float,
    interval: tuple[float, float],
    energy_grid: int | list[float],
    trials: int,
    seed: int,
    threads: int | None = 1,
) -> SingularityReport:
    """P(exists E in the grid: the box is not certified uniformly regular),
    counting indeterminate outcomes as singular (conservative side).

    Translation invariance turns this single-box estimate into the pair
    bound by squaring (disjoint enlarged boxes are independent).
    """
    d = u.dimension
    if isinstance(energy_grid, int):
        e1, e2 = interval
        grid = list(np.linspace(e1, e2, energy_grid))
    else:
        grid = list(energy_grid)
    box = make_box((0,) * d, l)
    enlarged = make_box((0,) * d, 4 * l)
    delta = perturbation_radius(u, model, l, box=box)

    def worker(_i: int, rng: np.random.Generator):
        cfg = Configuration(enlarged, model.sample(rng, enlarged.count), 0.0)
        bad = []
        for E in grid:
            verdict = uniform_regularity_test(u, model, cfg, box, m, E,
                                              delta=delta)
            bad.append(verdict != CERTIFIED_REGULAR)
        return bad

    results = mc.run_trials(trials, worker, seed, threads)
    singular = [any(bad) for bad in results]
    per_energy = {E: sum(bad[i] for bad in results) for i, E in enumerate(grid)}
    p_hi, stderr = mc.mean_and_stderr([1.0 if s else 0.0 for s in singular])
    return SingularityReport(p_hi=p_hi, trials=trials, std_error=stderr,
                             per_energy=per_energy)


# ---------------------------------------------------------------------------
# the deterministic parameter recursion


@dataclass(frozen=True)
class MSAParameters:
    xi: float
    kappa: float
    beta: float
    q: float
    m0: float
    l0: float
    zeta_nr: float | None = None

    def interval_violations(self, d: int, order: int) -> list[str]:
        out = []
        if not self.xi > 2 * d:
            out.append(f"xi={self.xi} must exceed 2d={2 * d}")
        kappa_hi = 2 * self.xi / (self.xi + 2 * d)
        if not (1.0 < self.kappa < kappa_hi):
            out.append(f"kappa={self.kappa} outside (1, {kappa_hi:.6g})")
        if not (2.0 - self.kappa < self.beta < 1.0):
            out.append(f"beta={self.beta} outside ({2 - self.kappa:.6g}, 1)")
        if not (0.0 < self.q < 1.0):
            out.append(f"q={self.q} outside (0, 1)")
        if not self.m0 > 0:
            out.append(f"m0={self.m0} must be positive")
        if not self.l0 > 1:
            out.append(f"l0={self.l0} must exceed 1")
        if not self.m0 > self.l0 ** (self.beta - 1.0):
            out.append(
                f"m0={self.m0} must exceed l0^(beta-1)={self.l0 ** (self.beta - 1):.6g}"
            )
        if self.zeta_nr is not None:
            want = derived_zeta(self, d, order)
            if abs(self.zeta_nr - want) > 1e-9:
                out.append(f"zeta_nr={self.zeta_nr} != derived {want:.6g}")
        return out


def derived_zeta(p: MSAParameters, d: int, order: int) -> float:
    """zeta = kappa (5d + ||I0||_1 + 2 xi) + 1."""
    return p.kappa * (5 * d + order + 2 * p.xi) + 1.0


def l_bar(p: MSAParameters) -> float:
    """Anchor scale from the mass-retention bookkeeping:
    ((1-q) m0 / ((1-q) m0 + m0 + 1))^(-kappa/(1-beta))."""
    c = (1.0 - p.q) * p.m0 / ((1.0 - p.q) * p.m0 + p.m0 + 1.0)
    return c ** (-p.kappa / (1.0 - p.beta))


def mass_loss_series(x: float, kappa: float, terms: int = 4000) -> float:
    """sum_{k>=0} x^{kappa^(k+1)} for x in (0,1): the exact correction-term
    series of the mass recursion, truncated when the tail is negligible."""
    if not 0.0 < x < 1.0:
        raise ParameterError("series defined for x in (0,1)")
    log_x = math.log(x)
    total = 0.0
    exponent = kappa
    for _ in range(terms):
        t = exponent * log_x
        if t < -745.0:
            break
        total += math.exp(t)
        exponent *= kappa
    return total


def l_bar_sharp(p: MSAParameters) -> float:
    """Smallest l0 for which the exact mass-loss series closes:
    (m0+1) * sum_k x^{kappa^(k+1)} <= (1-q) m0 with x = l0^{-(1-beta)/kappa}.

    The closed-form l_bar compares the series against a geometric one,
    which is only term-wise valid for kappa >= 3^(1/3); this threshold
    is sound for every admissible kappa.
    """
    budget = (1.0 - p.q) * p.m0 / (p.m0 + 1.0)
    lo, hi = 0.0, 1.0 - 1e-15
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mass_loss_series(mid, p.kappa) <= budget:
            lo = mid
        else:
            hi = mid
    x_max = lo
    if x_max <= 0.0:
        return float("inf")
    return x_max ** (-p.kappa / (1.0 - p.beta))


def _smallest_scale(pred, lo: float = 2.0, hi_cap: float = 1e12) -> float:
    """Smallest integer scale >= lo satisfying an eventually-true predicate."""
    hi = max(lo, 4.0)
    while not pred(hi):
        hi *= 2.0
        if hi > hi_cap:
            return float("inf")
    lo_b = lo
    while hi - lo_b > 1.0:
        mid = math.floor((lo_b + hi) / 2.0)
        if pred(mid):
            hi = mid
        else:
            lo_b = mid + 1.0
    return hi if pred(hi) else hi + 1.0


def induction_thresholds(
    p: MSAParameters,
    lead: LeadingIndexData,
    u: SingleSitePotential,
    model: DisorderModel,
) -> dict[str, float]:
    """The proof-internal scale thresholds l1*..l7*, computed numerically
    from the displayed inequalities (with the explicit Wegner chain in
    place of the opaque constants)."""
    d = u.dimension
    N = lead.order
    xi, kappa, beta = p.xi, p.kappa, p.beta
    zeta = p.zeta_nr if p.zeta_nr is not None else derived_zeta(p, d, N)
    alpha = u.decay_alpha
    bv = density_bv_norm(model)
    omega_plus = model.omega_plus
    c_hat = decay_tail_constant(u.decay_C, alpha, d)
    gamma = 0.5 * ((1.0 - beta) / kappa + (1.0 - 1.0 / kappa))

    def chain(scale: float) -> float:
        from .wegner import _abs_monomial_box_sum
        R = companion_radius(u, lead, scale)
        count = (2 * math.floor(scale) + 1) ** d
        return (2.0 / abs(lead.c_u)) * count * _abs_monomial_box_sum(R, d, lead.leading)

    def pred1(l: float) -> bool:
        L = l**kappa
        return 2.0 ** (4 * d) * L ** (4 * (d - xi / kappa) + 2 * xi) <= 1.0 / 3.0

    def pred2(l: float) -> bool:
        return 24.0 * l + 2.0 <= l**kappa

    def pred3(l: float) -> bool:
        L = l**kappa
        prob = 16.0 * (2 * L + 1) ** (2 * d) * (2 * L + 1) ** d * bv \
            * (l ** (-zeta) + 2.0 * omega_plus * c_hat * math.exp(-12.0 * l * alpha)) \
            * chain(L)
        return prob <= (1.0 / 3.0) * L ** (-2 * xi)

    def pred4(l: float) -> bool:
        m = l ** (beta - 1.0)
        return 2.0**d * d * (l + 1) ** (d - 1) * math.exp(-m * l) < 1.0

    def pred5(l: float) -> bool:
        m = l ** (beta - 1.0)
        li = 24.0 * l + 2.0
        z = 2.0 ** (2 * d + 1) * d * d * ((li + 1) * (l + 1)) ** (d - 1) \
            * li**zeta * math.exp(-m * l)
        return z < 1.0

    def m_L_display(m: float, L: float) -> float:
        t = 2.0 ** (1.0 / kappa) * L ** (-1.0 / kappa)
        return m * (1.0 - t - 63.0 * L ** (1.0 / kappa - 1.0)) \
            - t * math.log(4.0**d * d * L ** (d / kappa)) \
            - math.log(2.0 * L**zeta) / L

    def pred6(l: float) -> bool:
        m = l ** (beta - 1.0)
        L = l**kappa
        return m_L_display(m, L) >= m * (1.0 - L**-gamma) - L**-gamma

    def pred7(l: float) -> bool:
        L = l**kappa
        lower = L ** (-(1 - beta) / kappa) - L ** (-gamma - (1 - beta) / kappa) \
            - L**-gamma
        return lower > L ** (beta - 1.0)

    return {
        "l1": _smallest_scale(pred1),
        "l2": _smallest_scale(pred2),
        "l3": _smallest_scale(pred3),
        "l4": _smallest_scale(pred4),
        "l5": _smallest_scale(pred5),
        "l6": _smallest_scale(pred6),
        "l7": _smallest_scale(pred7),
        "gamma": gamma,
        "zeta": zeta,
    }


@dataclass(frozen=True)
class ValidationReport:
    l_star: float
    l_bar: float
    l_bar_sharp: float
    thresholds: dict[str, float]
    ok: bool
    schedule_ok: bool
    violated: list[str]


def validate_parameters(
    p: MSAParameters,
    lead: LeadingIndexData,
    u: SingleSitePotential,
    model: DisorderModel,
) -> ValidationReport:
    """Check every interval constraint, compute l_bar (closed form),
    the sharp mass-retention scale, and the proof thresholds l1*..l7*.

    ok requires l0 >= max(l_star, l_bar) and m0 > l0^(beta-1);
    schedule_ok additionally requires l0 >= the sharp mass threshold,
    which is what actually guarantees m_k >= q m0 along the recursion.
    """
    violated = p.interval_violations(u.dimension, lead.order)
    if violated:
        return ValidationReport(
            l_star=float("nan"), l_bar=float("nan"), l_bar_sharp=float("nan"),
            thresholds={}, ok=False, schedule_ok=False, violated=violated,
        )
    thresholds = induction_thresholds(p, lead, u, model)
    lstar = max(thresholds[k] for k in ("l1", "l2", "l3", "l4", "l5", "l6", "l7"))
    lb = l_bar(p)
    lbs = l_bar_sharp(p)
    if p.l0 < max(lstar, lb):
        violated.append(
            f"l0={p.l0} below max(l*={lstar:.6g}, l_bar={lb:.6g})"
        )
    ok = not violated
    schedule_ok = ok and p.l0 >= lbs
    return ValidationReport(
        l_star=lstar, l_bar=lb, l_bar_sharp=lbs, thresholds=thresholds,
        ok=ok, schedule_ok=schedule_ok, violated=violated,
    )


@dataclass(frozen=True)
class ScaleSchedule:
    log_lengths: np.ndarray = field(repr=False)
    masses: np.ndarray = field(repr=False)
    m_inf: float
    l_bar: float

    @property
    def lengths(self) -> np.ndarray:
        """l_k, +inf where the double exponential overflows float range."""
        out = np.full(self.log_lengths.shape, np.inf)
        ok = self.log_lengths < 709.0
        out[ok] = np.exp(self.log_lengths[ok])
        return out


def scale_schedule(p: MSAParameters, k_max: int) -> ScaleSchedule:
    """Run l_{k+1} = l_k^kappa and the mass recursion
    m_{k+1} = m_k (1 - l_{k+1}^{-(1-beta)/kappa}) - l_{k+1}^{-(1-beta)/kappa},
    asserting m_k > l_k^{beta-1} and m_k >= q m0 for all k <= k_max.

    Also re-verifies the geometric-series mass-loss bound
    (m0+1) x / (1-x) <= (1-q) m0 with x = l0^{-(1-beta)/kappa}.
    """
    x = p.l0 ** (-(1.0 - p.beta) / p.kappa)
    geo = (p.m0 + 1.0) * x / (1.0 - x)
    budget = (1.0 - p.q) * p.m0
    if geo > budget + 1e-12:
        raise ScheduleError(
            f"geometric mass-loss bound fails: {geo:.6g} > (1-q) m0 = {budget:.6g}"
        )
    m_inf = p.q * p.m0
    log_l = math.log(p.l0)
    log_lengths = [log_l]
    masses = [p.m0]
    m = p.m0
    for k in range(1, k_max + 1):
        log_l_next = log_l * p.kappa
        # l_{k+1}^{-(1-beta)/kappa} in logs to dodge double-exponential overflow
        t_log = -(1.0 - p.beta) / p.kappa * log_l_next
        t = math.exp(t_log) if t_log > -745.0 else 0.0
        m = m * (1.0 - t) - t
        log_l = log_l_next
        log_lengths.append(log_l)
        masses.append(m)
        floor_log = (p.beta - 1.0) * log_l
        floor = math.exp(floor_log) if floor_log > -745.0 else 0.0
        if not m > floor:
            raise ScheduleError(
                f"mass window broken at k={k}: m_k={m:.6g} <= l_k^(beta-1)={floor:.6g}",
                failing_k=k,
            )
        if not m >= m_inf:
            raise ScheduleError(
                f"mass floor broken at k={k}: m_k={m:.6g} < q m0={m_inf:.6g}",
                failing_k=k,
            )
    return ScaleSchedule(
        log_lengths=np.array(log_lengths),
        masses=np.array(masses),
        m_inf=m_inf,
        l_bar=l_bar(p),
    )


def schedule_to_json_dict(schedule: ScaleSchedule, report: ValidationReport) -> dict:
    lengths = [float(v) if math.isfinite(v) else None for v in schedule.lengths]
    return {
        "l": lengths,
        "log_l": [float(v) for v in schedule.log_lengths],
        "m": [float(v) for v in schedule.masses],
        "m_inf": schedule.m_inf,
        "l_bar": report.l_bar,
        "l_star": report.l_star,
    }
