"""Dense symmetric eigensolves, eigenvalue counting, lattice Green's
functions and the resolvent identities consumed by the multiscale
analysis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import FitError, ParameterError, ResonantEnergyError, SolverError
from .lattice import Box, BoxOperator, Point

RESONANCE_GUARD = 1e-12
RESIDUAL_CONTRACT = 1e-10


@dataclass(frozen=True)
class SpectrumResult:
    """Full spectrum, ascending; optional orthonormal eigenvector matrix."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None
    residual: float


def eigensolve(op: BoxOperator, want_vectors: bool = False) -> SpectrumResult:
    """Full spectrum of the dense symmetric matrix (LAPACK tridiagonalization
    path); results are cached on the operator."""
    cached = op._spectrum_cache
    if cached is not None and (cached.eigenvectors is not None or not want_vectors):
        return cached
    H = op.matrix
    if want_vectors:
        evals, evecs = scipy.linalg.eigh(H)
        scale = max(1.0, float(np.max(np.abs(evals))))
        residual = float(np.max(np.linalg.norm(H @ evecs - evecs * evals, axis=0))) / scale
    else:
        evals = scipy.linalg.eigh(H, eigvals_only=True)
        evecs = None
        residual = 0.0
    if residual > RESIDUAL_CONTRACT:
        raise SolverError(f"eigensolver residual {residual:.3e} exceeds 1e-10")
    result = SpectrumResult(eigenvalues=np.asarray(evals), eigenvectors=evecs,
                            residual=residual)
    op._spectrum_cache = result
    return result


def count_eigenvalues_in(op: BoxOperator, interval: tuple[float, float]) -> int:
    """Number of eigenvalues in the closed interval = Tr P_[E1,E2]."""
    e1, e2 = interval
    if e1 > e2:
        raise ParameterError("interval endpoints out of order")
    evals = eigensolve(op).eigenvalues
    left = np.searchsorted(evals, e1, side="left")
    right = np.searchsorted(evals, e2, side="right")
    return int(right - left)


def _check_off_spectrum(op: BoxOperator, E: float) -> None:
    evals = eigensolve(op).eigenvalues
    if np.min(np.abs(evals - E)) < RESONANCE_GUARD:
        raise ResonantEnergyError(
            f"E={E!r} within 1e-12 of an eigenvalue of the box operator"
        )


def greens_column(op: BoxOperator, E: float, source: Point) -> np.ndarray:
    """Column G(E; ., source) of (H - E)^{-1}, via a factorized solve."""
    _check_off_spectrum(op, E)
    n = op.box.count
    rhs = np.zeros(n)
    rhs[op.index_of(tuple(source))] = 1.0
    A = op.matrix - E * np.eye(n)
    lu, piv = scipy.linalg.lu_factor(A)
    return scipy.linalg.lu_solve((lu, piv), rhs)


def greens_function(op: BoxOperator, E: float, source: Point,
                    targets) -> dict[Point, float]:
    """G(E; source, target) = <delta_source, (H - E)^{-1} delta_target>."""
    col = greens_column(op, E, source)
    out = {}
    for t in targets:
        t = tuple(int(c) for c in t)
        out[t] = float(col[op.index_of(t)])
    return out


def sub_operator(op: BoxOperator, sub_box: Box) -> BoxOperator:
    """Restriction of a box operator to a contained sub-box (exact: the
    Dirichlet truncation of a truncation is the smaller truncation)."""
    pts = sub_box.points
    if not op.box.contains_points(pts).all():
        raise ParameterError("sub_box is not contained in the operator box")
    idx = op.box.flat_indices(pts)
    return BoxOperator(box=sub_box, matrix=op.matrix[np.ix_(idx, idx)],
                       boundary_kind=op.boundary_kind)


def bond_boundary(sub_box: Box) -> list[tuple[np.ndarray, np.ndarray]]:
    """Bonds (w, w') with w in the box, w' outside, ||w - w'||_1 = 1."""
    bonds = []
    d = sub_box.dimension
    for w in sub_box.points:
        for r in range(d):
            for sign in (-1, 1):
                wp = w.copy()
                wp[r] += sign
                if not sub_box.contains(tuple(wp)):
                    bonds.append((w.copy(), wp))
    return bonds


def resolvent_identity_residual(op_big: BoxOperator, sub_box: Box, E: float,
                                u: Point, v: Point) -> float:
    """|lhs - rhs| of the geometric resolvent identity

    G^L(E;u,v) = sum_{(w,w') in bond boundary of C} G^C(E;u,w) G^L(E;w',v)

    for u in C, v in the big box outside C.
    """
    u = tuple(int(c) for c in u)
    v = tuple(int(c) for c in v)
    if not sub_box.contains(u):
        raise ParameterError("u must lie in the sub-box")
    if not op_big.box.contains(v) or sub_box.contains(v):
        raise ParameterError("v must lie in the big box outside the sub-box")
    op_sub = sub_operator(op_big, sub_box)
    col_sub = greens_column(op_sub, E, u)        # G^C(u, .)
    col_big = greens_column(op_big, E, v)        # G^L(., v) by symmetry
    lhs = float(col_big[op_big.index_of(u)])
    rhs = 0.0
    for w, wp in bond_boundary(sub_box):
        if not op_big.box.contains(tuple(wp)):
            continue
        rhs += float(col_sub[op_sub.index_of(tuple(w))]) * \
            float(col_big[op_big.index_of(tuple(wp))])
    return abs(lhs - rhs)


def boundary_reconstruct(op: BoxOperator, E: float, psi) -> float:
    """Reconstruct psi at the box center from its values on the exterior collar:

    psi(x0) = sum_{i in interior boundary} G(E;x0,i) *
              sum_{y outside box, ||i-y||_1 = 1} psi(y)

    Exact when psi is an eigenvector (for E) of a larger operator containing
    the box; psi maps lattice points to values, absent points count as 0.
    """
    x0 = op.box.center
    col = greens_column(op, E, x0)
    total = 0.0
    d = op.box.dimension
    for i_pt in op.box.interior_boundary:
        outer = 0.0
        for r in range(d):
            for sign in (-1, 1):
                y = i_pt.copy()
                y[r] += sign
                y_t = tuple(int(c) for c in y)
                if not op.box.contains(y_t):
                    outer += float(psi.get(y_t, 0.0))
        if outer != 0.0:
            total += float(col[op.box.flat_index(tuple(i_pt))]) * outer
    return total


def decay_fit(psi: np.ndarray, box: Box, center: Point | None = None
              ) -> tuple[float, float]:
    """Least-squares slope of log shell-max |psi| against ||x - center||_inf.

    center defaults to the argmax of |psi|; shells whose max is below 1e-14
    are dropped; fewer than 3 usable shells is a fit error.
    """
    psi = np.asarray(psi, dtype=float)
    pts = box.points
    if center is None:
        center = tuple(int(c) for c in pts[int(np.argmax(np.abs(psi)))])
    radii = np.max(np.abs(pts - np.asarray(center)), axis=1)
    shells = {}
    for r, a in zip(radii, np.abs(psi)):
        shells[int(r)] = max(shells.get(int(r), 0.0), float(a))
    xs, ys = [], []
    for r in sorted(shells):
        if shells[r] > 1e-14:
            xs.append(float(r))
            ys.append(np.log(shells[r]))
    if len(xs) < 3:
        raise FitError(f"only {len(xs)} usable shells for decay fit")
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(r2)


def spectrum_to_csv(result: SpectrumResult) -> str:
    lines = ["index,eigenvalue"]
    for i, ev in enumerate(result.eigenvalues):
        lines.append(f"{i},{ev!r}")
    return "\n".join(lines) + "\n"
