import math

import numpy as np
import pytest
from scipy.integrate import quad

from xyzloc import (
    ConditioningError,
    CouplingParams,
    DisorderRealization,
    ParameterError,
    PathSumEvaluator,
    build_config_graph,
    build_full_hamiltonian,
    build_lattice,
    diagonal_greens_pathsum,
    enumerate_simple_cycles_off,
    enumerate_simple_paths,
    fractional_norm_mc,
    make_partition,
    offdiagonal_greens_pathsum,
    partition_operator,
    resolvent_oracle,
    run_greens_verification,
    sample_disorder,
    self_energy,
    y_collapse,
    zero_disorder,
)

from conftest import resolvent_block_on_deleted
from test_configgraph import hypercube_graph


def literal_diagonal(graph, alpha, z, deleted=frozenset()):
    """Reference: diagonal block via explicit cycle enumeration, no sharing."""
    sigma = literal_self_energy(graph, alpha, z, deleted)
    bracket = z * np.eye(graph.dims[alpha]) - graph.static(alpha) - sigma
    return np.linalg.inv(bracket)


def literal_self_energy(graph, alpha, z, deleted=frozenset()):
    # cycle weight: flips on every edge, diagonal blocks at interior vertices
    # evaluated with all previously visited vertices removed
    sigma = np.zeros((graph.dims[alpha],) * 2, dtype=complex)
    for cycle in enumerate_simple_cycles_off(graph, alpha, deleted):
        seen = set(deleted) | {alpha}
        acc = graph.edge_weight(cycle[0], cycle[1])
        prev = cycle[1]
        for nxt in cycle[2:]:
            g_prev = literal_diagonal(graph, prev, z, frozenset(seen))
            acc = graph.edge_weight(prev, nxt) @ g_prev @ acc
            seen.add(prev)
            prev = nxt
        sigma += acc
    return sigma


def literal_offdiagonal(graph, alpha, omega, z):
    total = np.zeros((graph.dims[omega], graph.dims[alpha]), dtype=complex)
    for path in enumerate_simple_paths(graph, alpha, omega, graph.n_vertices):
        seen = set()
        acc = literal_diagonal(graph, alpha, z, frozenset())
        for src, dst in zip(path, path[1:]):
            seen.add(src)
            g_dst = literal_diagonal(graph, dst, z, frozenset(seen))
            acc = g_dst @ graph.edge_weight(src, dst) @ acc
        total += acc
    return total


# ---------------------------------------------------------------------------
# oracle


def test_oracle_single_site_scalar():
    lat = build_lattice("chain", 1)
    dis = DisorderRealization(np.array([0.8]), 1.0, 0)
    h = build_full_hamiltonian(lat, CouplingParams(0, 0, 0), dis)
    part = make_partition(lat, (0,), enforce_nonadjacent=True)
    z = 2.0 + 0.5j
    blk = resolvent_oracle(h, part, 1, 1, z).block
    assert blk.shape == (1, 1)
    assert blk[0, 0] == pytest.approx(1.0 / (z - 0.8))


def test_oracle_large_z_asymptotics():
    lat = build_lattice("chain", 3)
    h = build_full_hamiltonian(lat, CouplingParams(1, 0.5, 0.3), sample_disorder(1, 2, 3))
    part = make_partition(lat, (1,), enforce_nonadjacent=True)
    z = 1e7j
    blk = resolvent_oracle(h, part, 1, 1, z).block
    assert np.linalg.norm(z * blk - np.eye(4)) < 1e-5


def test_oracle_zero_couplings_offdiagonal_vanishes():
    lat = build_lattice("chain", 2)
    h = build_full_hamiltonian(lat, CouplingParams(0, 0, 0), sample_disorder(1, 3, 2))
    part = make_partition(lat, (0,), enforce_nonadjacent=True)
    blk = resolvent_oracle(h, part, 0, 1, 0.4 + 0.2j).block
    assert np.linalg.norm(blk) == 0.0


def test_oracle_rejects_real_z_on_spectrum():
    lat = build_lattice("chain", 2)
    dis = zero_disorder(2)
    h = build_full_hamiltonian(lat, CouplingParams(0, 0, 1.0), dis)
    part = make_partition(lat, (0,), enforce_nonadjacent=True)
    with pytest.raises(ConditioningError):
        resolvent_oracle(h, part, 0, 0, 1.0)


# ---------------------------------------------------------------------------
# path sums versus oracle


def test_diagonal_isolated_vertex():
    graph, part, h, _ = hypercube_graph(2)
    z = 0.7 + 0.4j
    alpha = 0b00
    blk = diagonal_greens_pathsum(graph, alpha, z, deleted={0b01, 0b10}).block
    expected = np.linalg.inv(z * np.eye(graph.dims[alpha]) - graph.static(alpha))
    np.testing.assert_allclose(blk, expected, atol=1e-14)


def test_diagonal_matches_oracle_with_deletions():
    graph, part, h, _ = hypercube_graph(2)
    z = 0.3 + 0.6j
    for deleted in [(), (0b01,), (0b01, 0b10)]:
        blk = diagonal_greens_pathsum(graph, 0b11, z, deleted=deleted).block
        oracle = resolvent_block_on_deleted(h, part, 0b11, 0b11, z, deleted)
        np.testing.assert_allclose(blk, oracle, atol=1e-12)


def test_two_vertex_self_energy_hand_formula():
    graph, part, h, _ = hypercube_graph(1)
    z = 0.2 + 0.5j
    sigma = self_energy(graph, 1, z)
    opening = graph.edge_weight(1, 0)  # flip attached to the edge leaving 1
    closing = graph.edge_weight(0, 1)  # flip attached to the edge back into 1
    g_dn = np.linalg.inv(z * np.eye(graph.dims[0]) - graph.static(0))
    np.testing.assert_allclose(sigma, closing @ g_dn @ opening, atol=1e-13)


def test_self_energy_no_cycles_is_zero():
    graph, _, _, _ = hypercube_graph(2)
    sigma = self_energy(graph, 0b11, 0.1 + 0.3j, deleted={0b01, 0b10})
    assert np.linalg.norm(sigma) == 0.0


def test_self_energy_matches_literal_cycle_sum_on_square():
    graph, _, _, _ = hypercube_graph(2, jx=1.0, jy=1.0)
    z = 0.4 + 0.7j
    engine = self_energy(graph, 0b11, z)
    literal = literal_self_energy(graph, 0b11, z)
    assert len(list(enumerate_simple_cycles_off(graph, 0b11))) == 4
    np.testing.assert_allclose(engine, literal, atol=1e-11)


def test_offdiagonal_reduces_to_diagonal():
    graph, _, _, _ = hypercube_graph(2)
    z = 0.9 + 0.2j
    a = offdiagonal_greens_pathsum(graph, 2, 2, z).block
    b = diagonal_greens_pathsum(graph, 2, z).block
    np.testing.assert_array_equal(a, b)


def test_offdiagonal_unreachable_is_zero_block():
    lat = build_lattice("custom", 2, extra=[])
    part = make_partition(lat, (0,), enforce_nonadjacent=True)
    dis = sample_disorder(1.0, 4, 2)
    h = build_full_hamiltonian(lat, CouplingParams(1, 0.5, 0.1), dis)
    graph = build_config_graph(partition_operator(h, part), dis)
    blk = offdiagonal_greens_pathsum(graph, 0, 1, 0.5 + 0.5j).block
    assert np.count_nonzero(blk) == 0


def test_offdiagonal_matches_literal_pathsum():
    graph, _, _, _ = hypercube_graph(2, jx=1.1, jy=0.6, delta=0.4)
    z = -0.3 + 0.8j
    for omega in (0b01, 0b00):
        engine = offdiagonal_greens_pathsum(graph, 0b11, omega, z).block
        literal = literal_offdiagonal(graph, 0b11, omega, z)
        np.testing.assert_allclose(engine, literal, atol=1e-11)


def test_offdiagonal_matches_oracle_three_spins():
    lat = build_lattice("chain", 3)
    part = make_partition(lat, (0, 2), enforce_nonadjacent=True)
    dis = sample_disorder(1.2, 17, 3)
    params = CouplingParams(1.0, 0.7, 0.5)
    h = build_full_hamiltonian(lat, params, dis)
    graph = build_config_graph(partition_operator(h, part), dis)
    evals = np.linalg.eigvalsh(h)
    z = complex(evals.mean(), 1.0)
    ev = PathSumEvaluator(graph, z)
    for alpha in range(4):
        for omega in range(4):
            got = ev.offdiagonal(alpha, omega)
            want = resolvent_oracle(h, part, omega, alpha, z).block
            scale = max(np.linalg.norm(want), 1e-30)
            assert np.linalg.norm(got - want) / scale < 1e-9


def test_hermitian_symmetry_of_blocks():
    graph, part, h, _ = hypercube_graph(2)
    z = 0.25 + 0.75j
    ev_z = PathSumEvaluator(graph, z)
    ev_zbar = PathSumEvaluator(graph, np.conj(z))
    for alpha in range(4):
        for omega in range(4):
            lhs = ev_zbar.offdiagonal(omega, alpha).conj().T
            rhs = ev_z.offdiagonal(alpha, omega)
            np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_memoisation_is_bit_identical():
    graph, _, _, _ = hypercube_graph(3)
    z = 0.1 + 0.45j
    first = PathSumEvaluator(graph, z).diagonal(5)
    second = PathSumEvaluator(graph, z).diagonal(5)
    assert np.array_equal(first, second)
    ev = PathSumEvaluator(graph, z)
    assert np.array_equal(ev.offdiagonal(0, 5), ev.offdiagonal(0, 5))


def test_collapsed_vertex_dominates_submatrix():
    graph, part, h, _ = hypercube_graph(2)
    z = 0.15 + 0.4j
    collapsed = y_collapse(graph, 0b11)
    g_plain = PathSumEvaluator(graph, z).diagonal(0b11)
    g_merged = PathSumEvaluator(collapsed.graph, z).diagonal(0)
    assert np.linalg.norm(g_plain, 2) <= np.linalg.norm(g_merged, 2) + 1e-12
    # the merged diagonal block is itself a resolvent submatrix: cross-check
    d = graph.dims[0]
    oracle_block = np.zeros_like(g_merged)
    for a, beta in enumerate(collapsed.merged):
        for b, gamma in enumerate(collapsed.merged):
            oracle_block[a * d:(a + 1) * d, b * d:(b + 1) * d] = resolvent_oracle(
                h, part, beta, gamma, z
            ).block
    np.testing.assert_allclose(g_merged, oracle_block, atol=1e-11)


def test_vertex_cap_and_override():
    lat = build_lattice("chain", 5)
    part = make_partition(lat, (0, 1, 2, 3, 4), enforce_nonadjacent=False)
    dis = sample_disorder(1.0, 21, 5)
    params = CouplingParams(1.0, 1.0, 0.5)  # XXZ: graph splits into sectors
    h = build_full_hamiltonian(lat, params, dis)
    graph = build_config_graph(partition_operator(h, part), dis)
    z = 0.3 + 0.9j
    with pytest.raises(ParameterError):
        PathSumEvaluator(graph, z)
    with pytest.warns(RuntimeWarning):
        ev = PathSumEvaluator(graph, z, allow_large=True)
    alpha, omega = 0b00011, 0b00110
    got = ev.offdiagonal(alpha, omega)
    want = resolvent_oracle(h, part, omega, alpha, z).block
    np.testing.assert_allclose(got, want, atol=1e-11)


# ---------------------------------------------------------------------------
# fractional-moment Monte Carlo


def test_fractional_norm_quadrature_oracle():
    lat = build_lattice("chain", 2)
    part = make_partition(lat, (0, 1), enforce_nonadjacent=False)
    params = CouplingParams(0.0, 0.0, 0.0)
    sigma_b, s = 1.4, 0.5
    z = 1j * sigma_b
    alpha = 0b11
    mean, stderr = fractional_norm_mc(
        lat, part, params, sigma_b, alpha, alpha, z, s, 4000, base_seed=77
    )
    # Y ~ N(0, 2 sigma^2); E |i sigma - Y|^(-1/2) by quadrature
    sd = math.sqrt(2.0) * sigma_b
    val, _ = quad(
        lambda y: (sigma_b**2 + y**2) ** (-s / 2)
        * math.exp(-0.5 * (y / sd) ** 2) / (sd * math.sqrt(2 * math.pi)),
        -40 * sd,
        40 * sd,
        limit=200,
    )
    assert abs(mean - val) < 5 * stderr
    # expectation ceiling for [Y I + A]^-1 with block dimension 2^|S| = 1
    ceiling = (2 * 1) ** s / (1 - s) * (sigma_b * math.sqrt(2 * math.pi)) ** (-s)
    assert mean <= ceiling


def test_fractional_norm_disconnected_is_exactly_zero():
    lat = build_lattice("custom", 2, extra=[])
    part = make_partition(lat, (0,), enforce_nonadjacent=True)
    mean, stderr = fractional_norm_mc(
        lat, part, CouplingParams(1, 1, 0), 1.0, 0, 1, 0.5j, 0.5, 10, base_seed=1
    )
    assert mean == 0.0 and stderr == 0.0


def test_fractional_norm_parameter_errors():
    lat = build_lattice("chain", 2)
    part = make_partition(lat, (0,), enforce_nonadjacent=True)
    with pytest.raises(ParameterError):
        fractional_norm_mc(lat, part, CouplingParams(1, 1, 0), 1.0, 0, 1, 0.5j, 1.5, 10, 1)
    with pytest.raises(ParameterError):
        fractional_norm_mc(lat, part, CouplingParams(1, 1, 0), 1.0, 0, 1, 0.5j, 0.5, 1, 1)


# ---------------------------------------------------------------------------
# verification driver


def test_verification_suite_smoke_and_determinism():
    kwargs = dict(total_sizes=(3, 4), sprime_sizes=(1, 2), draws=3, base_seed=5)
    first = run_greens_verification(**kwargs)
    second = run_greens_verification(**kwargs)
    assert first.passed
    assert first.max_discrepancy == second.max_discrepancy
    assert [r.seed for r in first.rows] == [r.seed for r in second.rows]


def test_verification_respects_sprime_cap():
    with pytest.raises(ParameterError):
        run_greens_verification(sprime_sizes=(5,), draws=1)
