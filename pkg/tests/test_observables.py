import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xyzloc import (
    ParameterError,
    config_count_n,
    correlation_bounds,
    magnetisation_bounds,
    magnetisation_bounds_mixed,
    susceptibility_bound,
)


def brute_force_count(size, n, m, d):
    """Direct hypercube enumeration from a fixed n-up reference."""
    reference = (1 << n) - 1
    return sum(
        1
        for omega in range(1 << size)
        if bin(omega).count("1") == m and bin(omega ^ reference).count("1") == d
    )


# ---------------------------------------------------------------------------
# hypercube counts


def test_count_examples():
    assert config_count_n(4, 2, 2, 2) == 4
    assert config_count_n(3, 1, 2, 2) == 0  # odd parity
    for size, n in [(1, 0), (4, 2), (7, 7)]:
        assert config_count_n(size, n, n, 0) == 1


@pytest.mark.parametrize("size", range(1, 7))
def test_count_matches_enumeration(size):
    for n in range(size + 1):
        for m in range(size + 1):
            for d in range(size + 1):
                assert config_count_n(size, n, m, d) == brute_force_count(size, n, m, d)


def test_count_independent_of_reference():
    size, n = 5, 2
    for reference in (0b00011, 0b10100, 0b01010):
        counts = {}
        for omega in range(1 << size):
            key = (bin(omega).count("1"), bin(omega ^ reference).count("1"))
            counts[key] = counts.get(key, 0) + 1
        for (m, d), c in counts.items():
            assert config_count_n(size, n, m, d) == c


@pytest.mark.parametrize("size", range(1, 11))
def test_count_completeness(size):
    for n in range(size + 1):
        total = sum(
            config_count_n(size, n, m, d)
            for m in range(size + 1)
            for d in range(size + 1)
        )
        assert total == 1 << size


@given(
    size=st.integers(1, 12),
    n=st.integers(0, 12),
    m=st.integers(0, 12),
    d=st.integers(0, 12),
)
@settings(max_examples=200, deadline=None)
def test_count_up_down_symmetry(size, n, m, d):
    if max(n, m, d) > size:
        return
    assert config_count_n(size, n, m, d) == config_count_n(size, size - n, size - m, d)


# ---------------------------------------------------------------------------
# magnetisation bounds


def test_magnetisation_pinches_to_initial_value():
    for size, n0 in [(3, 2), (5, 0), (6, 6), (4, 2)]:
        band = magnetisation_bounds(size, n0, c_const=1.0, zeta=1e-3)
        m0 = 2 * n0 / size - 1
        assert band.upper == pytest.approx(m0, abs=1e-6)
        assert band.lower == pytest.approx(m0, abs=1e-6)


def test_magnetisation_single_site_hand_sum():
    zeta = 0.7
    band = magnetisation_bounds(1, 1, c_const=1.0, zeta=zeta)
    assert band.upper == pytest.approx(1.0)
    assert band.lower == pytest.approx(1.0 - 2.0 * math.exp(-2.0 / zeta))


def test_magnetisation_band_widens_with_zeta_and_c():
    widths_zeta = [
        magnetisation_bounds(4, 3, 1.0, z).width for z in (0.2, 0.5, 1.0, 2.0)
    ]
    assert all(a < b for a, b in zip(widths_zeta, widths_zeta[1:]))
    widths_c = [
        magnetisation_bounds(4, 3, c, 0.8).width for c in (1.0, 1.2, 1.5, 2.0)
    ]
    assert all(a < b for a, b in zip(widths_c, widths_c[1:]))


def test_magnetisation_clamping_flags():
    band = magnetisation_bounds(3, 3, c_const=2.0, zeta=0.5)
    assert band.exceeds_physical and not band.clamped
    clamped = magnetisation_bounds(3, 3, c_const=2.0, zeta=0.5, clamp=True)
    assert clamped.upper == 1.0 and clamped.lower >= -1.0


def test_magnetisation_input_validation():
    with pytest.raises(ParameterError):
        magnetisation_bounds(3, 4, 1.0, 1.0)
    with pytest.raises(ParameterError):
        magnetisation_bounds(3, 1, 1.0, 0.0)


def test_mixed_point_mass_equals_pure():
    pure = magnetisation_bounds(4, 3, 1.1, 0.9)
    mixed = magnetisation_bounds_mixed(4, {0b0111: 1.0}, 1.1, 0.9)
    assert mixed.n_up == pytest.approx(pure.n_up)
    assert mixed.n_down == pytest.approx(pure.n_down)


def test_mixed_symmetric_pair():
    mixed = magnetisation_bounds_mixed(3, {0b110: 0.5, 0b001: 0.5}, 1.0, 0.8)
    assert mixed.n_up == pytest.approx(mixed.n_down)


def test_mixed_uniform_weights_pinch_to_average():
    size = 3
    weights = {a: 1.0 / (1 << size) for a in range(1 << size)}
    band = magnetisation_bounds_mixed(size, weights, 1.0, 1e-3)
    assert band.upper == pytest.approx(0.0, abs=1e-6)
    assert band.lower == pytest.approx(0.0, abs=1e-6)


def test_mixed_rejects_bad_weights():
    with pytest.raises(ParameterError):
        magnetisation_bounds_mixed(3, {0: 0.6, 1: 0.6}, 1.0, 1.0)
    with pytest.raises(ParameterError):
        magnetisation_bounds_mixed(3, {0: 1.2, 1: -0.2}, 1.0, 1.0)


# ---------------------------------------------------------------------------
# correlation bounds


def brute_force_kq(size, alpha, i, c_const, zeta):
    """K and Q from their defining sums over final configurations."""
    k = q = 0.0
    for omega in range(1 << size):
        weight = c_const**2 * math.exp(-2 * bin(alpha ^ omega).count("1") / zeta)
        if (omega >> i) & 1:
            k += weight
        else:
            q += weight
    return k, q


@pytest.mark.parametrize(
    "size,alpha,i,j",
    [(2, 0b01, 0, 1), (3, 0b101, 0, 1), (4, 0b0110, 2, 0), (5, 0b11111, 3, 4)],
)
def test_kq_match_defining_sums(size, alpha, i, j):
    for zeta in (0.3, 1.0, 2.5):
        bound = correlation_bounds(size, alpha, i, j, 1.2, zeta)
        k, q = brute_force_kq(size, alpha, i, 1.2, zeta)
        assert bound.k_val == pytest.approx(k, rel=1e-12)
        assert bound.q_val == pytest.approx(q, rel=1e-12)


def test_correlation_pinches_to_initial_product():
    size = 4
    for alpha in range(1 << size):
        for i, j in [(0, 1), (2, 3), (3, 0)]:
            bound = correlation_bounds(size, alpha, i, j, 1.0, 1e-3)
            s_i = 1 if (alpha >> i) & 1 else -1
            s_j = 1 if (alpha >> j) & 1 else -1
            assert bound.tau_plus == pytest.approx(s_i * s_j, abs=1e-6)
            assert bound.tau_minus == pytest.approx(s_i * s_j, abs=1e-6)


def test_correlation_fig_like_setting():
    # 10 sites, 3 up-spins, i up and j down: tau(0) = -1 endpoint
    alpha = 0b0000010011  # up at positions 0, 1, 4
    bound = correlation_bounds(10, alpha, 0, 2, 1.0, 1e-3)
    assert bound.tau_plus == pytest.approx(-1.0, abs=1e-6)
    assert bound.tau_minus == pytest.approx(-1.0, abs=1e-6)


def test_correlation_case_swap_exchanges_k_and_q():
    size, zeta = 5, 0.9
    alpha = 0b10110
    i, j = 1, 3
    up_case = correlation_bounds(size, alpha, i, j, 1.0, zeta)
    flipped = correlation_bounds(size, alpha ^ (1 << i), i, j, 1.0, zeta)
    assert up_case.k_val == pytest.approx(flipped.q_val, rel=1e-12)
    assert up_case.q_val == pytest.approx(flipped.k_val, rel=1e-12)


@given(
    size=st.integers(2, 8),
    alpha=st.integers(0, 255),
    zeta=st.floats(0.05, 3.0),
    c=st.floats(1.0, 2.0),
)
@settings(max_examples=80, deadline=None)
def test_correlation_band_ordering(size, alpha, zeta, c):
    alpha %= 1 << size
    bound = correlation_bounds(size, alpha, 0, 1, c, zeta)
    assert bound.tau_minus <= bound.tau_plus + 1e-12


def test_correlation_input_validation():
    with pytest.raises(ParameterError):
        correlation_bounds(3, 0b101, 1, 1, 1.0, 1.0)
    with pytest.raises(ParameterError):
        correlation_bounds(3, 0b101, 0, 3, 1.0, 1.0)
    with pytest.raises(ParameterError):
        correlation_bounds(1, 0b1, 0, 0, 1.0, 1.0)


# ---------------------------------------------------------------------------
# susceptibility


def _chi_interval(size, alpha, i, j, c, zeta):
    b_ij = correlation_bounds(size, alpha, i, j, c, zeta)
    b_ji = correlation_bounds(size, alpha, j, i, c, zeta)
    return susceptibility_bound(b_ij, b_ji)


def test_susceptibility_vanishes_deep_in_localised_regime():
    lo, hi = _chi_interval(6, 0b010110, 1, 3, 1.0, 1e-3)
    assert abs(lo) < 1e-6 and abs(hi) < 1e-6


def test_susceptibility_symmetric_sites_symmetric_interval():
    # same spin at both sites: the interval is symmetric about zero
    lo, hi = _chi_interval(4, 0b1011, 0, 1, 1.0, 0.7)
    assert lo == pytest.approx(-hi, rel=1e-12)
    assert lo < 0 < hi


def test_susceptibility_width_grows_with_zeta():
    widths = []
    for zeta in np.linspace(0.1, 2.0, 8):
        lo, hi = _chi_interval(5, 0b00111, 0, 4, 1.0, zeta)
        widths.append(hi - lo)
    assert all(a <= b + 1e-12 for a, b in zip(widths, widths[1:]))


def test_susceptibility_rejects_mismatched_bounds():
    b_ij = correlation_bounds(4, 0b0110, 0, 1, 1.0, 0.5)
    b_other = correlation_bounds(4, 0b0110, 0, 1, 1.0, 0.6)
    with pytest.raises(ParameterError):
        susceptibility_bound(b_ij, b_other)
