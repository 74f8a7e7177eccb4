"""Closed-form observable bounds in the localised regime.

All of them reduce to hypercube combinatorics: N(s, n, m, d) counts the
configurations of s spins with m up-spins sitting at Hamming distance d from
a reference configuration with n up-spins.  Magnetisation and two-site
correlation bounds are distance-weighted sums of these counts with weights
C^2 e^(-2d/zeta); as zeta -> 0 with C = 1 they pinch onto the initial values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .errors import ParameterError

WEIGHT_SUM_TOLERANCE = 1e-12


def _comb0(n: int, k: int) -> int:
    """Binomial coefficient that is 0 whenever k is out of [0, n]."""
    if k < 0 or k > n or n < 0:
        return 0
    return math.comb(n, k)


def config_count_n(sprime_size: int, n: int, m: int, d: int) -> int:
    """Number of m-up configurations at Hamming distance d from an n-up one.

    binom(n, (d+n-m)/2) * binom(s-n, (d-n+m)/2) when d+n-m is even, else 0.
    Independent of which n-up reference configuration is chosen.
    """
    if (d + n - m) % 2 != 0:
        return 0
    k_down = (d + n - m) // 2  # up-spins of the reference that flip down
    k_up = d - k_down          # down-spins of the reference that flip up
    return _comb0(n, k_down) * _comb0(sprime_size - n, k_up)


def _distance_weighted_f(sprime_size: int, n0: int, c_const: float, zeta: float) -> float:
    """C^2 sum_m (2m/s) sum_d N(s, n0, m, d) e^(-2d/zeta)."""
    terms = []
    for m in range(sprime_size + 1):
        lam = 2.0 * m / sprime_size
        if lam == 0.0:
            continue
        for d in range(sprime_size + 1):
            count = config_count_n(sprime_size, n0, m, d)
            if count:
                terms.append(lam * count * math.exp(-2.0 * d / zeta))
    return c_const**2 * math.fsum(terms)


@dataclass(frozen=True)
class MagnetisationBound:
    """Time-independent band containing the disorder-averaged magnetisation."""

    n_up: float
    n_down: float
    lower: float
    upper: float
    sprime_size: int
    c_const: float
    zeta: float
    clamped: bool = False
    exceeds_physical: bool = False

    @property
    def width(self) -> float:
        return self.upper - self.lower


def _assemble_magnetisation(
    n_up: float, n_down: float, sprime_size: int, c_const: float, zeta: float,
    clamp: bool,
) -> MagnetisationBound:
    lower, upper = 1.0 - n_down, n_up - 1.0
    exceeds = lower < -1.0 or upper > 1.0
    if clamp:
        lower, upper = max(lower, -1.0), min(upper, 1.0)
    return MagnetisationBound(
        n_up, n_down, lower, upper, sprime_size, c_const, zeta, clamp, exceeds
    )


def magnetisation_bounds(
    sprime_size: int, n0: int, c_const: float, zeta: float, clamp: bool = False
) -> MagnetisationBound:
    """Band 1 - n_down(zeta) <= M(t) <= n_up(zeta) - 1 for a sublattice that
    starts in a single configuration with ``n0`` up-spins."""
    if not 0 <= n0 <= sprime_size:
        raise ParameterError("n0 must lie in [0, sprime_size]")
    if zeta <= 0 or c_const <= 0:
        raise ParameterError("zeta and c_const must be positive")
    n_up = _distance_weighted_f(sprime_size, n0, c_const, zeta)
    n_down = _distance_weighted_f(sprime_size, sprime_size - n0, c_const, zeta)
    return _assemble_magnetisation(n_up, n_down, sprime_size, c_const, zeta, clamp)


def magnetisation_bounds_mixed(
    sprime_size: int,
    weights: Mapping[int, float],
    c_const: float,
    zeta: float,
    clamp: bool = False,
) -> MagnetisationBound:
    """Same band for an incoherent mixture of initial configurations.

    ``weights`` maps configuration bitmasks to probabilities |c_alpha|^2,
    which must be nonnegative and sum to 1 within 1e-12.
    """
    if zeta <= 0 or c_const <= 0:
        raise ParameterError("zeta and c_const must be positive")
    if any(w < 0 for w in weights.values()):
        raise ParameterError("weights must be nonnegative")
    total = math.fsum(weights.values())
    if abs(total - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise ParameterError(f"weights sum to {total}, not 1")
    if any(not 0 <= a < (1 << sprime_size) for a in weights):
        raise ParameterError("configuration out of range for sprime_size")
    n_up = math.fsum(
        w * _distance_weighted_f(sprime_size, bin(a).count("1"), c_const, zeta)
        for a, w in weights.items()
    )
    n_down = math.fsum(
        w
        * _distance_weighted_f(
            sprime_size, sprime_size - bin(a).count("1"), c_const, zeta
        )
        for a, w in weights.items()
    )
    return _assemble_magnetisation(n_up, n_down, sprime_size, c_const, zeta, clamp)


@dataclass(frozen=True)
class CorrelationBound:
    """Band containing the disorder-averaged correlation tau_ij(t)."""

    tau_minus: float
    tau_plus: float
    k_val: float
    q_val: float
    i_up: bool
    j_up: bool
    sprime_size: int
    c_const: float
    zeta: float


def _restricted_sum(sprime_size: int, n_rest: int, shift: int, c_const: float, zeta: float) -> float:
    """C^2 sum over the s-1 remaining sites of N(s-1, n_rest, m, d) e^(-2(d+shift)/zeta).

    ``shift`` is 1 when the distinguished site itself flips between the
    reference and the counted configurations, else 0.
    """
    terms = []
    for m in range(sprime_size):
        for d in range(sprime_size):
            count = config_count_n(sprime_size - 1, n_rest, m, d)
            if count:
                terms.append(count * math.exp(-2.0 * (d + shift) / zeta))
    return c_const**2 * math.fsum(terms)


def correlation_bounds(
    sprime_size: int,
    alpha: int,
    i: int,
    j: int,
    c_const: float,
    zeta: float,
) -> CorrelationBound:
    """Bounds on tau_ij(t) for a sublattice starting in configuration alpha.

    ``i`` and ``j`` index positions within the sublattice (0-based); alpha is
    the configuration bitmask.  K sums the distance weights over final
    configurations with an up-spin at i, Q over those with a down-spin at i;
    which of 2K-1 / 1-2Q plays upper or lower bound is set by j's spin.
    """
    if sprime_size < 2:
        raise ParameterError("correlations need at least two sublattice sites")
    if i == j:
        raise ParameterError("sites i and j must differ")
    if not (0 <= i < sprime_size and 0 <= j < sprime_size):
        raise ParameterError("site index outside the sublattice")
    if not 0 <= alpha < (1 << sprime_size):
        raise ParameterError("alpha out of range for sprime_size")
    if zeta <= 0 or c_const <= 0:
        raise ParameterError("zeta and c_const must be positive")
    n_alpha = bin(alpha).count("1")
    i_up = bool((alpha >> i) & 1)
    j_up = bool((alpha >> j) & 1)
    if i_up:
        k_val = _restricted_sum(sprime_size, n_alpha - 1, 0, c_const, zeta)
        q_val = _restricted_sum(sprime_size, n_alpha - 1, 1, c_const, zeta)
    else:
        k_val = _restricted_sum(sprime_size, n_alpha, 1, c_const, zeta)
        q_val = _restricted_sum(sprime_size, n_alpha, 0, c_const, zeta)
    if j_up:
        tau_minus, tau_plus = 1.0 - 2.0 * q_val, 2.0 * k_val - 1.0
    else:
        tau_minus, tau_plus = 1.0 - 2.0 * k_val, 2.0 * q_val - 1.0
    return CorrelationBound(
        tau_minus, tau_plus, k_val, q_val, i_up, j_up, sprime_size, c_const, zeta
    )


def susceptibility_bound(
    bound_ij: CorrelationBound, bound_ji: CorrelationBound
) -> tuple[float, float]:
    """Interval containing i*chi_ij(t) = tau_ij(t) - tau_ji(-t):

    tau^-_ij - tau^+_ji <= i chi_ij(t) <= tau^+_ij - tau^-_ji.
    Collapses to {0} as zeta -> 0 with C = 1.
    """
    if (bound_ij.sprime_size, bound_ij.c_const, bound_ij.zeta) != (
        bound_ji.sprime_size,
        bound_ji.c_const,
        bound_ji.zeta,
    ):
        raise ParameterError("the two correlation bounds use different inputs")
    if (bound_ij.i_up, bound_ij.j_up) != (bound_ji.j_up, bound_ji.i_up):
        raise ParameterError("bound_ji must be the site-swapped counterpart")
    return (
        bound_ij.tau_minus - bound_ji.tau_plus,
        bound_ij.tau_plus - bound_ji.tau_minus,
    )
