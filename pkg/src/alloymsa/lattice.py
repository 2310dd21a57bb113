"""Lattice geometry, single-site potentials, disorder densities and
finite-box Hamiltonians of the discrete alloy-type model.

The random operator acts on l2(Z^d) as the negative discrete Laplacian
plus the multiplication operator v(x) = sum_k w_k u(x - k), where the
coupling constants w_k are i.i.d. with a bounded-variation density and
u is a (possibly sign-changing) single-site potential with certificate
|u(k)| <= C exp(-alpha ||k||_1).  Finite boxes are [-l, l]^d + center
intersected with Z^d; restrictions are either Dirichlet truncations
(free diagonal 2d) or Neumann (free diagonal = interior neighbor count).

All values are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .errors import CapacityError, ParameterError
from .tails import truncation_tail

Point = tuple[int, ...]

DEFAULT_CAPACITY = 20_000

DIRICHLET = "dirichlet_truncation"
NEUMANN = "neumann"


def capacity_cap(override: int | None = None) -> int:
    """Dense-matrix point cap; ALLOYMSA_CAPACITY overrides the default."""
    if override is not None:
        return int(override)
    env = os.environ.get("ALLOYMSA_CAPACITY")
    if env:
        return int(env)
    return DEFAULT_CAPACITY


def norm1(k: Iterable[int]) -> int:
    return sum(abs(c) for c in k)


def norm_inf(k: Iterable[int]) -> int:
    return max(abs(c) for c in k)


@dataclass(frozen=True)
class Box:
    """Lattice cube ([-l, l]^d + center) intersected with Z^d.

    half_side is real; the enumeration keeps, per axis, the integers in
    [center_r - l, center_r + l], i.e. 2*floor(l) + 1 of them for integer
    centers and non-integer boundary cases.
    """

    center: Point
    half_side: float

    def __post_init__(self):
        if self.half_side <= 0:
            raise ParameterError(f"box half_side must be positive, got {self.half_side}")
        if len(self.center) < 1:
            raise ParameterError("box center must have dimension >= 1")

    @property
    def dimension(self) -> int:
        return len(self.center)

    @cached_property
    def lo(self) -> tuple[int, ...]:
        return tuple(math.ceil(c - self.half_side) for c in self.center)

    @cached_property
    def hi(self) -> tuple[int, ...]:
        return tuple(math.floor(c + self.half_side) for c in self.center)

    @cached_property
    def shape(self) -> tuple[int, ...]:
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    @property
    def count(self) -> int:
        n = 1
        for s in self.shape:
            n *= s
        return n

    @cached_property
    def strides(self) -> tuple[int, ...]:
        # lexicographic enumeration: first axis slowest
        st = [1] * self.dimension
        for r in range(self.dimension - 2, -1, -1):
            st[r] = st[r + 1] * self.shape[r + 1]
        return tuple(st)

    @cached_property
    def points(self) -> np.ndarray:
        """All lattice points, shape (count, d), lexicographic order."""
        axes = [np.arange(l, h + 1) for l, h in zip(self.lo, self.hi)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)

    def contains(self, point: Iterable[int]) -> bool:
        return all(l <= p <= h for p, l, h in zip(point, self.lo, self.hi))

    def contains_points(self, pts: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def flat_index(self, point: Iterable[int]) -> int:
        idx = 0
        for p, l, s in zip(point, self.lo, self.strides):
            idx += (p - l) * s
        return idx

    def flat_indices(self, pts: np.ndarray) -> np.ndarray:
        """Flat indices of points assumed inside the box."""
        lo = np.asarray(self.lo)
        return (pts - lo) @ np.asarray(self.strides)

    @cached_property
    def interior_boundary(self) -> np.ndarray:
        """Points with fewer than 2d neighbors inside the box."""
        pts = self.points
        counts = np.zeros(len(pts), dtype=int)
        for r in range(self.dimension):
            counts += (pts[:, r] > self.lo[r]).astype(int)
            counts += (pts[:, r] < self.hi[r]).astype(int)
        return pts[counts < 2 * self.dimension]

    def disjoint_from(self, other: "Box") -> bool:
        return any(
            self.hi[r] < other.lo[r] or other.hi[r] < self.lo[r]
            for r in range(self.dimension)
        )


def make_box(center: Point, half_side: float) -> Box:
    """Box [-l, l]^d + center intersected with Z^d, enumerated lexicographically."""
    return Box(tuple(int(c) for c in center), float(half_side))


@dataclass(frozen=True)
class SingleSitePotential:
    """Finitely tabulated single-site potential with a decay certificate.

    `values` holds every nonzero entry; entries must obey
    |u(k)| <= decay_C exp(-decay_alpha ||k||_1) and vanish outside
    ||k||_inf <= truncation_radius.  `truncation_residual` is a certified
    upper bound on the total absolute mass of omitted entries; 0 asserts
    the table is the whole function.
    """

    values: Mapping[Point, float]
    decay_C: float
    decay_alpha: float
    truncation_radius: int
    truncation_residual: float

    def __post_init__(self):
        if not self.values:
            raise ParameterError("single-site potential must not be identically zero")
        if self.decay_C <= 0 or self.decay_alpha <= 0:
            raise ParameterError("decay certificate (C, alpha) must be positive")
        if self.truncation_residual < 0:
            raise ParameterError("truncation_residual must be nonnegative")
        d = len(next(iter(self.values)))
        for k, v in self.values.items():
            if len(k) != d:
                raise ParameterError("inconsistent dimension in potential table")
            if norm_inf(k) > self.truncation_radius:
                raise ParameterError(
                    f"table entry {k} outside truncation radius {self.truncation_radius}"
                )
            bound = self.decay_C * math.exp(-self.decay_alpha * norm1(k))
            if abs(v) > bound * (1 + 1e-12) + 1e-300:
                raise ParameterError(
                    f"entry u{k}={v} violates decay certificate {bound:.3e}"
                )
        if all(v == 0 for v in self.values.values()):
            raise ParameterError("single-site potential must not be identically zero")

    @property
    def dimension(self) -> int:
        return len(next(iter(self.values)))

    @cached_property
    def support(self) -> np.ndarray:
        return np.array(sorted(self.values.keys()), dtype=np.int64)

    @cached_property
    def support_values(self) -> np.ndarray:
        return np.array([self.values[tuple(k)] for k in self.support], dtype=float)

    @cached_property
    def l1_norm(self) -> float:
        return float(np.abs(self.support_values).sum()) + self.truncation_residual

    @cached_property
    def mean_value(self) -> float:
        """u-bar = sum_k u(k) over the table (exact for residual 0)."""
        return float(self.support_values.sum())

    @cached_property
    def negative_mass(self) -> float:
        return float(np.abs(self.support_values[self.support_values < 0]).sum())

    def small_negative_decomposition(self, delta: float):
        """Split u = u_plus - delta*u_minus with ||u_minus||_1 <= 1.

        Valid whenever the tabulated negative mass plus the truncation
        residual does not exceed delta.
        """
        if delta <= 0:
            raise ParameterError("delta must be positive")
        if self.negative_mass + self.truncation_residual > delta * (1 + 1e-12):
            raise ParameterError(
                f"negative mass {self.negative_mass + self.truncation_residual:.3e} "
                f"exceeds delta={delta:.3e}: decomposition u = u+ - delta*u- unavailable"
            )
        plus = {tuple(k): v for k, v in self.values.items() if v > 0}
        minus = {tuple(k): -v / delta for k, v in self.values.items() if v < 0}
        return plus, minus

    def to_json_dict(self) -> dict:
        return {
            "d": self.dimension,
            "values": [[list(k), v] for k, v in sorted(self.values.items())],
            "C": self.decay_C,
            "alpha": self.decay_alpha,
            "truncation_radius": self.truncation_radius,
            "truncation_residual": self.truncation_residual,
        }

    @staticmethod
    def from_json_dict(data: dict) -> "SingleSitePotential":
        values = {tuple(int(c) for c in k): float(v) for k, v in data["values"]}
        radius = data.get("truncation_radius")
        if radius is None:
            radius = max(norm_inf(k) for k in values)
        residual = data.get("truncation_residual")
        if residual is None:
            d = data["d"]
            residual = truncation_tail(data["C"], data["alpha"], d, int(radius))
        return SingleSitePotential(
            values=values,
            decay_C=float(data["C"]),
            decay_alpha=float(data["alpha"]),
            truncation_radius=int(radius),
            truncation_residual=float(residual),
        )


def exact_potential(values: Mapping[Point, float], decay_C: float,
                    decay_alpha: float) -> SingleSitePotential:
    """Potential whose table is the entire function (zero omitted mass)."""
    radius = max(norm_inf(k) for k in values)
    return SingleSitePotential(
        values=dict(values),
        decay_C=decay_C,
        decay_alpha=decay_alpha,
        truncation_radius=radius,
        truncation_residual=0.0,
    )


def truncated_exponential_potential(
    d: int,
    decay_C: float,
    decay_alpha: float,
    radius: int,
    profile,
) -> SingleSitePotential:
    """Tabulate profile(k) on ||k||_inf <= radius with the certified residual."""
    box = make_box((0,) * d, float(radius) + 0.25)
    values = {}
    for p in box.points:
        k = tuple(int(c) for c in p)
        v = float(profile(k))
        if v != 0.0:
            values[k] = v
    residual = truncation_tail(decay_C, decay_alpha, d, radius)
    return SingleSitePotential(values, decay_C, decay_alpha, radius, residual)


@dataclass(frozen=True)
class PolynomialPiece:
    """Polynomial density piece on [lo, hi]; coeffs ascending in x."""

    lo: float
    hi: float
    coeffs: tuple[float, ...]

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, np.asarray(self.coeffs))

    @cached_property
    def antiderivative(self) -> tuple[float, ...]:
        return tuple(np.polynomial.polynomial.polyint(np.asarray(self.coeffs)))

    @property
    def mass(self) -> float:
        anti = np.asarray(self.antiderivative)
        pv = np.polynomial.polynomial.polyval
        return float(pv(self.hi, anti) - pv(self.lo, anti))

    def cdf_from_lo(self, x):
        anti = np.asarray(self.antiderivative)
        pv = np.polynomial.polynomial.polyval
        return pv(x, anti) - pv(self.lo, anti)


@dataclass(frozen=True)
class DisorderModel:
    """Coupling-constant distribution: piecewise-polynomial BV density."""

    pieces: tuple[PolynomialPiece, ...]

    def __post_init__(self):
        if not self.pieces:
            raise ParameterError("disorder density needs at least one piece")
        pieces = tuple(sorted(self.pieces, key=lambda p: p.lo))
        object.__setattr__(self, "pieces", pieces)
        for p in pieces:
            if p.hi <= p.lo:
                raise ParameterError("density piece has empty interval")
            grid = np.linspace(p.lo, p.hi, 513)
            if np.min(p(grid)) < -1e-10:
                raise ParameterError("density must be nonnegative")
        for a, b in zip(pieces, pieces[1:]):
            if b.lo < a.hi - 1e-12:
                raise ParameterError("density pieces must not overlap")
        total = sum(p.mass for p in pieces)
        if abs(total - 1.0) > 1e-12:
            raise ParameterError(f"density must integrate to 1, got {total!r}")

    @property
    def support(self) -> tuple[float, float]:
        return (self.pieces[0].lo, self.pieces[-1].hi)

    @property
    def omega_plus(self) -> float:
        """Largest coupling value in the support."""
        return max(abs(self.support[0]), abs(self.support[1]))

    @cached_property
    def bv_norm(self) -> float:
        return _bv_norm(self.pieces)

    @cached_property
    def _cumulative(self) -> np.ndarray:
        masses = np.array([p.mass for p in self.pieces])
        return np.concatenate([[0.0], np.cumsum(masses)])

    def cdf(self, x: float) -> float:
        total = 0.0
        for p, cum in zip(self.pieces, self._cumulative[:-1]):
            if x < p.lo:
                break
            if x >= p.hi:
                total = cum + p.mass
            else:
                return float(cum + p.cdf_from_lo(x))
        return float(total)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Inverse-CDF draws; vectorized, exact for each polynomial piece."""
        t = rng.random(n)
        cum = self._cumulative
        piece_idx = np.clip(np.searchsorted(cum, t, side="right") - 1, 0,
                            len(self.pieces) - 1)
        out = np.empty(n)
        for i, p in enumerate(self.pieces):
            mask = piece_idx == i
            if not mask.any():
                continue
            target = t[mask] - cum[i]
            if len(p.coeffs) == 1:
                out[mask] = p.lo + target / p.coeffs[0]
            else:
                out[mask] = _bisect_cdf(p, target)
        return out

    def to_json_dict(self) -> dict:
        return {
            "pieces": [
                {"interval": [p.lo, p.hi], "coeffs": list(p.coeffs)}
                for p in self.pieces
            ]
        }

    @staticmethod
    def from_json_dict(data: dict) -> "DisorderModel":
        return DisorderModel(tuple(
            PolynomialPiece(float(p["interval"][0]), float(p["interval"][1]),
                            tuple(float(c) for c in p["coeffs"]))
            for p in data["pieces"]
        ))


def uniform_density(lo: float, hi: float) -> DisorderModel:
    return DisorderModel((PolynomialPiece(lo, hi, (1.0 / (hi - lo),)),))


def _bisect_cdf(piece: PolynomialPiece, target: np.ndarray) -> np.ndarray:
    lo = np.full(target.shape, piece.lo)
    hi = np.full(target.shape, piece.hi)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        below = piece.cdf_from_lo(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _bv_norm(pieces) -> float:
    """Total variation: boundary jumps (against 0 or the adjacent piece)
    plus the variation of each polynomial piece."""
    pv = np.polynomial.polynomial.polyval
    total = 0.0
    for i, p in enumerate(pieces):
        left_outside = 0.0
        if i > 0 and abs(pieces[i - 1].hi - p.lo) <= 1e-12:
            left_outside = float(pieces[i - 1](pieces[i - 1].hi))
        total += abs(float(p(p.lo)) - left_outside)
        if i == len(pieces) - 1 or abs(pieces[i + 1].lo - p.hi) > 1e-12:
            total += abs(float(p(p.hi)))
        deriv = np.polynomial.polynomial.polyder(np.asarray(p.coeffs))
        crit = [p.lo, p.hi]
        if len(deriv) > 1:
            roots = np.polynomial.polynomial.polyroots(deriv)
            crit += [float(r.real) for r in roots
                     if abs(r.imag) < 1e-12 and p.lo < r.real < p.hi]
        elif len(deriv) == 1 and deriv[0] == 0.0:
            continue
        crit = sorted(set(crit))
        for a, b in zip(crit, crit[1:]):
            total += abs(float(p(b)) - float(p(a)))
    return total


def density_bv_norm(model: DisorderModel) -> float:
    """||rho||_Var: sum of |jumps| plus integral of |rho'| over pieces."""
    return model.bv_norm


@dataclass(frozen=True)
class Configuration:
    """Coupling constants on a stated box, a fixed value outside it."""

    domain: Box
    values: np.ndarray
    exterior_value: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != (self.domain.count,):
            raise ParameterError(
                f"configuration needs {self.domain.count} values, got {vals.shape}"
            )
        vals.flags.writeable = False

    def value_at(self, point: Point) -> float:
        if self.domain.contains(point):
            return float(self.values[self.domain.flat_index(point)])
        return self.exterior_value

    def values_at(self, pts: np.ndarray) -> np.ndarray:
        inside = self.domain.contains_points(pts)
        out = np.full(len(pts), self.exterior_value)
        if inside.any():
            flat = self.domain.flat_indices(pts[inside])
            out[inside] = self.values[flat]
        return out

    def replace_on(self, box: Box, new_values: np.ndarray) -> "Configuration":
        """New configuration with the couplings on `box` overwritten."""
        mask = self.domain.contains_points(self.domain.points)
        mask &= box.contains_points(self.domain.points)
        arr = self.values.copy()
        arr[mask] = new_values
        return Configuration(self.domain, arr, self.exterior_value)

    def domain_mask(self, box: Box) -> np.ndarray:
        return box.contains_points(self.domain.points)


def constant_configuration(box: Box, value: float,
                           exterior_value: float = 0.0) -> Configuration:
    return Configuration(box, np.full(box.count, float(value)), exterior_value)


def sample_configuration(model: DisorderModel, box: Box, seed: int) -> Configuration:
    """I.i.d. couplings on `box` via inverse-CDF; exterior value 0."""
    rng = np.random.default_rng(seed)
    return Configuration(box, model.sample(rng, box.count), exterior_value=0.0)


def sample_configuration_rng(model: DisorderModel, box: Box,
                             rng: np.random.Generator) -> Configuration:
    return Configuration(box, model.sample(rng, box.count), exterior_value=0.0)


def assemble_potential(u: SingleSitePotential, config: Configuration,
                       box: Box) -> np.ndarray:
    """v(x) = sum_k w_k u(x-k) for every x in `box` (lexicographic order).

    The sum runs over the tabulated support of u; couplings outside the
    configuration domain take its exterior value.
    """
    pts = box.points
    v = np.zeros(len(pts))
    for j, uj in zip(u.support, u.support_values):
        v += uj * config.values_at(pts - j)
    return v


@dataclass
class BoxOperator:
    """Finite-box Hamiltonian as a dense symmetric matrix."""

    box: Box
    matrix: np.ndarray
    boundary_kind: str
    _spectrum_cache: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def dimension(self) -> int:
        return self.box.dimension

    def index_of(self, point: Point) -> int:
        if not self.box.contains(point):
            raise ParameterError(f"point {point} not in operator box")
        return self.box.flat_index(point)


def neighbor_counts(box: Box) -> np.ndarray:
    pts = box.points
    counts = np.zeros(len(pts), dtype=float)
    for r in range(box.dimension):
        counts += (pts[:, r] > box.lo[r]).astype(float)
        counts += (pts[:, r] < box.hi[r]).astype(float)
    return counts


def free_box_matrix(box: Box, boundary_kind: str,
                    capacity: int | None = None) -> np.ndarray:
    n = box.count
    cap = capacity_cap(capacity)
    if n > cap:
        raise CapacityError(f"box has {n} points, dense cap is {cap}")
    d = box.dimension
    M = np.zeros((n, n))
    if boundary_kind == DIRICHLET:
        np.fill_diagonal(M, 2.0 * d)
    elif boundary_kind == NEUMANN:
        M[np.arange(n), np.arange(n)] = neighbor_counts(box)
    else:
        raise ParameterError(f"unknown boundary kind {boundary_kind!r}")
    pts = box.points
    lo = np.asarray(box.lo)
    strides = np.asarray(box.strides)
    flat = (pts - lo) @ strides
    for r in range(d):
        has_up = pts[:, r] < box.hi[r]
        rows = flat[has_up]
        cols = rows + box.strides[r]
        M[rows, cols] = -1.0
        M[cols, rows] = -1.0
    return M


def restrict_hamiltonian(
    u: SingleSitePotential,
    config: Configuration,
    box: Box,
    boundary_kind: str = DIRICHLET,
    capacity: int | None = None,
) -> BoxOperator:
    """Dirichlet-truncated or Neumann restriction of h0 + v to `box`."""
    M = free_box_matrix(box, boundary_kind, capacity)
    v = assemble_potential(u, config, box)
    M[np.arange(box.count), np.arange(box.count)] += v
    return BoxOperator(box=box, matrix=M, boundary_kind=boundary_kind)


def free_operator(box: Box, boundary_kind: str = DIRICHLET,
                  capacity: int | None = None) -> BoxOperator:
    return BoxOperator(box=box, matrix=free_box_matrix(box, boundary_kind, capacity),
                       boundary_kind=boundary_kind)
