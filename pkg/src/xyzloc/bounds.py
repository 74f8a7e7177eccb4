"""Closed-form localisation bounds and the special functions they need.

Everything here is stateless arithmetic: the weight-1 Lerch transcendent
Phi(z, 1, a), the incomplete Beta function B_z(a, 0), the localisation length
and critical disorder, the headline bound on disorder-averaged evolution flip
norms, and the supporting expectation ceilings and transfer factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import exp1

from .errors import DivergenceError, DomainError, ParameterError

SQRT_2PI = math.sqrt(2.0 * math.pi)

_PHI_REL_TAIL = 1e-13
_PHI_TERM_CAP = 10_000_000


def hurwitz_lerch_phi(z: float, a: float) -> float:
    """Phi(z, 1, a) = sum_{k>=0} z^k / (k + a), for 0 <= z < 1 and a > 0.

    Direct compensated summation until the geometric tail bound drops below
    1e-13 of the partial sum; if the term cap is hit first (z extremely close
    to 1) the remaining tail is completed with an exponential-integral
    approximation.
    """
    if not 0.0 <= z < 1.0:
        raise DomainError(f"z={z} outside [0, 1)")
    if a <= 0.0:
        raise DomainError(f"a={a} must be positive")
    if z == 0.0:
        return 1.0 / a
    total = 0.0
    comp = 0.0  # Neumaier compensation
    term_scale = 1.0 / (1.0 - z)
    power = 1.0
    for k in range(_PHI_TERM_CAP):
        term = power / (k + a)
        t = total + term
        if abs(total) >= abs(term):
            comp += (total - t) + term
        else:
            comp += (term - t) + total
        total = t
        power *= z
        # tail < z^{k+1}/((k+1+a)(1-z)) <= next_term * 1/(1-z)
        if power / (k + 1 + a) * term_scale < _PHI_REL_TAIL * total:
            return total + comp
    # tail completion: integral approximation with midpoint correction
    lam = -math.log(z)
    k = _PHI_TERM_CAP
    tail = math.exp(lam * a) * exp1(lam * (k + a)) + 0.5 * power / (k + a)
    return total + comp + tail


def incomplete_beta_b0(z: float, a: float) -> float:
    """B_z(a, 0) = integral_0^z t^(a-1) (1-t)^(-1) dt, via z^a * Phi(z, 1, a)."""
    if not 0.0 < z < 1.0:
        raise DomainError(f"z={z} outside (0, 1)")
    if a <= 0.0:
        raise DomainError(f"a={a} must be positive")
    return z**a * hurwitz_lerch_phi(z, a)


def _check_positive(**kwargs: float) -> None:
    for name, value in kwargs.items():
        if value <= 0:
            raise ParameterError(f"{name}={value} must be positive")


def sigma_b_min(s: float, d_total: float, j_eff: float, sprime_size: int) -> float:
    """Critical disorder D * J_eff * |S'|^(1/s) / sqrt(2 pi)."""
    _check_positive(d_total=d_total, j_eff=j_eff, sprime_size=sprime_size)
    if not 0.0 < s < 1.0:
        raise ParameterError("s must lie strictly between 0 and 1")
    return d_total * j_eff * sprime_size ** (1.0 / s) / SQRT_2PI


def localisation_length(
    s: float, sigma_b: float, d_total: float, j_eff: float, sprime_size: int
) -> float:
    """zeta with 1/zeta = s * ln(sigma_b sqrt(2 pi) / (D J_eff |S'|^(1/s))).

    Positive exactly when sigma_b exceeds the critical disorder; negative
    below it; math.inf at the boundary where the logarithm vanishes.
    """
    _check_positive(sigma_b=sigma_b, d_total=d_total, j_eff=j_eff, sprime_size=sprime_size)
    if not 0.0 < s < 1.0:
        raise ParameterError("s must lie strictly between 0 and 1")
    arg = sigma_b * SQRT_2PI / (d_total * j_eff * sprime_size ** (1.0 / s))
    log = math.log(arg)
    if log == 0.0:
        return math.inf
    return 1.0 / (s * log)


def c_of_s1(s1: float, k_universal: float) -> float:
    """c[s1] = 4^(1-s1) k^(s1) / (1-s1)."""
    if not 0.0 < s1 < 1.0:
        raise ParameterError("s1 must lie strictly between 0 and 1")
    _check_positive(k_universal=k_universal)
    return 4.0 ** (1.0 - s1) * k_universal**s1 / (1.0 - s1)


def lemma1_transfer(
    c_frac: float, zeta: float, s: float, interval_measure: float, distance: float
) -> float:
    """Turn a fractional-moment bound c_frac * e^(-d/zeta) into a bound on the
    disorder-averaged sup-over-time evolution flip norm:
    (1/2 pi) (2 |I|)^(1/(2-s)) c_frac e^(-d/((2-s) zeta))."""
    _check_positive(c_frac=c_frac, zeta=zeta, interval_measure=interval_measure)
    if not 0.0 < s < 1.0:
        raise ParameterError("s must lie strictly between 0 and 1")
    factor = (2.0 * interval_measure) ** (1.0 / (2.0 - s)) / (2.0 * math.pi)
    return factor * c_frac * math.exp(-distance / ((2.0 - s) * zeta))


def lemma2_ceiling(n: int, s: float, rho_inf: float) -> float:
    """(2n)^s / (1-s) * rho_inf^s: ceiling on E[ ||(Y I + A)^-1||^s ] for
    normal A of dimension n and Y with density bounded by rho_inf."""
    if not 0.0 < s < 1.0:
        raise ParameterError("s must lie strictly between 0 and 1")
    _check_positive(n=n, rho_inf=rho_inf)
    return (2.0 * n) ** s / (1.0 - s) * rho_inf**s


def extension_constants(
    s: float,
    s1: float,
    s_size: int,
    sigma_b: float,
    k_universal: float,
    c_frac: float,
    zeta: float,
    distance: float,
) -> float:
    """Extend a small-exponent fractional-moment bound to exponent s < s1:
    c[s1]^(s/s1) 2^(|S| s) (sigma_b sqrt(2 pi))^(-s) c_frac^((s1-s)/s1)
    e^(-(s1-s) d / (s1 zeta))."""
    if not s < s1:
        raise ParameterError("the extension needs s < s1")
    _check_positive(sigma_b=sigma_b, c_frac=c_frac, zeta=zeta)
    c1 = c_of_s1(s1, k_universal)
    return (
        c1 ** (s / s1)
        * 2.0 ** (s_size * s)
        * (sigma_b * SQRT_2PI) ** (-s)
        * c_frac ** ((s1 - s) / s1)
        * math.exp(-(s1 - s) * distance / (s1 * zeta))
    )


def greens_series_bound(r: float, s: float, sprime_size: int, distance: float) -> float:
    """|S'|^-1 (r^(1/s)/s) B_r(d + 1 - 1/s, 0): closed form of the simple-path
    series sum_{l >= d} r^(l+1) / |1 - (l+1) s| in its convergent regime."""
    if r >= 1.0:
        raise DivergenceError(
            f"r={r} >= 1: the series diverges (localisation length <= 0)"
        )
    if r <= 0.0:
        return 0.0
    if not 0.0 < s < 1.0:
        raise ParameterError("s must lie strictly between 0 and 1")
    a = distance + 1.0 - 1.0 / s
    if a <= 0.0:
        raise DomainError(
            f"distance {distance} too small: need distance > 1/s - 1 = {1.0 / s - 1.0:g}"
        )
    return incomplete_beta_b0(r, a) * r ** (1.0 / s) / (s * sprime_size)


@dataclass(frozen=True)
class BoundInputs:
    """Everything the headline flip-norm bound depends on."""

    s: float
    s1: float
    sprime_size: int
    total_size: int
    j_eff: float
    sigma_b: float
    interval_measure: float
    distance: float
    k_universal: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.s < self.s1 < 1.0:
            raise ParameterError("need 0 < s < s1 < 1")
        if self.s1 <= 2.0 ** (-self.sprime_size):
            raise ParameterError(
                f"s1={self.s1} must exceed 2^-|S'| = {2.0 ** (-self.sprime_size)}"
            )
        if self.sprime_size < 1 or self.total_size < self.sprime_size:
            raise ParameterError("need 1 <= sprime_size <= total_size")
        _check_positive(
            j_eff=self.j_eff,
            sigma_b=self.sigma_b,
            interval_measure=self.interval_measure,
            k_universal=self.k_universal,
        )

    @property
    def d_total(self) -> int:
        return 2**self.total_size


@dataclass(frozen=True)
class BoundReport:
    """Evaluated right-hand side of the flip-norm bound with its pieces.

    When ``zeta_positive`` is false the bound carries no information and the
    prefactor and full right-hand side are reported as +inf.
    """

    inputs: BoundInputs
    zeta: float
    sigma_b_min: float
    zeta_positive: bool
    c_of_s1: float
    lemma1_factor: float
    prefactor: float
    exponential_factor: float
    full_rhs: float


def theorem1_rhs(inputs: BoundInputs) -> BoundReport:
    """Bound on E[sup_t || evolution flip (omega, alpha) ||] at configuration
    distance d:  C(omega, alpha) * e^(-(s1-s) d / (s1 (2-s) zeta)), with

    C = (1/2 pi) (2|I|)^(1/(2-s)) c[s1]^(s/s1) 2^(-|S'| s) D^s
        (sigma_b sqrt(2 pi))^(-s)
        ((1/(s |S'|)) Phi(e^(-1/zeta), 1, d + 1 - 1/s))^((s1-s)/s1)
    """
    s, s1 = inputs.s, inputs.s1
    zeta = localisation_length(
        s, inputs.sigma_b, inputs.d_total, inputs.j_eff, inputs.sprime_size
    )
    smin = sigma_b_min(s, inputs.d_total, inputs.j_eff, inputs.sprime_size)
    positive = inputs.sigma_b > smin
    c1 = c_of_s1(s1, inputs.k_universal)
    lemma1 = (2.0 * inputs.interval_measure) ** (1.0 / (2.0 - s)) / (2.0 * math.pi)
    if not positive or not math.isfinite(zeta):
        return BoundReport(
            inputs, zeta, smin, False, c1, lemma1, math.inf, math.nan, math.inf
        )
    if inputs.distance <= 1.0 / s - 1.0:
        raise DomainError(
            f"distance {inputs.distance} is below the minimal admissible "
            f"distance 1/s - 1 = {1.0 / s - 1.0:g}"
        )
    phi = hurwitz_lerch_phi(math.exp(-1.0 / zeta), inputs.distance + 1.0 - 1.0 / s)
    prefactor = (
        lemma1
        * c1 ** (s / s1)
        * 2.0 ** (-inputs.sprime_size * s)
        * inputs.d_total**s
        * (inputs.sigma_b * SQRT_2PI) ** (-s)
        * (phi / (s * inputs.sprime_size)) ** ((s1 - s) / s1)
    )
    exponential = math.exp(
        -(s1 - s) * inputs.distance / (s1 * (2.0 - s) * zeta)
    )
    return BoundReport(
        inputs, zeta, smin, True, c1, lemma1, prefactor, exponential,
        prefactor * exponential,
    )
