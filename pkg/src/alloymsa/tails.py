"""Certified tail sums for exponentially decaying lattice functions.

Everything here returns rigorous upper bounds (or exact values of
geometric sums), so callers can convert the decay certificate
|u(k)| <= C exp(-alpha ||k||_1) of a truncated potential into explicit
error terms.
"""

from __future__ import annotations

import math


def two_sided_exp_sum(rate: float) -> float:
    """Exact value of sum_{m in Z} exp(-rate*|m|) = 1 + 2q/(1-q), q = e^-rate."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    q = math.exp(-rate)
    return 1.0 + 2.0 * q / (1.0 - q)


def boxed_exp_sum(rate: float, radius: int) -> float:
    """Exact value of sum_{|m| <= radius} exp(-rate*|m|)."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    if radius < 0:
        return 0.0
    q = math.exp(-rate)
    return 1.0 + 2.0 * q * (1.0 - q**radius) / (1.0 - q)


def truncation_tail(C: float, alpha: float, d: int, radius: int) -> float:
    """Upper bound on sum_{||k||_inf > radius} C exp(-alpha ||k||_1).

    The l1 norm factorizes over coordinates, so the sum over the full
    lattice minus the sum over the inf-ball is exact:
    C * (S^d - S_R^d) with S the two-sided geometric sum.
    """
    full = two_sided_exp_sum(alpha) ** d
    boxed = boxed_exp_sum(alpha, radius) ** d
    return C * max(full - boxed, 0.0)


def decay_tail_constant(C: float, alpha: float, d: int) -> float:
    """Constant C_hat with sum_{||k||_inf > l'} |u(x-k)| <= C_hat e^{-alpha l'/2}
    for all x in a box of half-side l and k outside the (l+l')-box.

    Uses the l1-factorized splitting e^{-a||j||_1} <= e^{-a l'/2} e^{-a ||j||_1 / 2},
    giving C_hat = C * (1 + 2 e^{-a/2} / (1 - e^{-a/2}))^d.
    """
    return C * two_sided_exp_sum(alpha / 2.0) ** d


def poly_exp_axis_sums(alpha: float, i: int, radius: int) -> tuple[float, float]:
    """Certified bounds for the one-axis sums appearing in derivative tails.

    Returns (A, B) with
      A >= sum_{m in Z} (|m|+i)^i exp(-alpha |m|)
      B >= sum_{|m| > radius} (|m|+i)^i exp(-alpha |m|)
    Terms are summed directly; the remainder beyond the last term is
    dominated by a geometric series with ratio e^{-alpha/2} once
    m >= i(2-alpha)/alpha (where (1+1/(m+i))^i <= e^{alpha/2}).
    """
    if i == 0:
        A = two_sided_exp_sum(alpha)
        B = A - boxed_exp_sum(alpha, radius)
        return A, max(B, 0.0)

    def term(m: int) -> float:
        return (m + i) ** i * math.exp(-alpha * m)

    m_safe = max(0, math.ceil(i * (2.0 - alpha) / alpha)) if alpha < 2.0 else 0
    ratio_rem = math.exp(-alpha / 2.0)

    total = term(0)
    tail_from_radius = 0.0
    m = 1
    while True:
        t = term(m)
        total += 2.0 * t
        if m > radius:
            tail_from_radius += 2.0 * t
        if m >= m_safe and t < 1e-300 * (1 + total):
            break
        if m >= m_safe and t / (1.0 - ratio_rem) < 1e-16 * total:
            break
        m += 1
        if m > 10_000_000:
            raise RuntimeError("poly-exponential tail sum failed to converge")
    remainder = 2.0 * term(m + 1) / (1.0 - ratio_rem)
    A = total + remainder
    if radius >= m:
        tail_from_radius = 2.0 * term(radius + 1) / (1.0 - ratio_rem)
        return A, tail_from_radius
    return A, tail_from_radius + remainder
