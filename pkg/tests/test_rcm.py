import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from artifact.errors import CapacityError, DimensionError, PreconditionError, ValidationError
from artifact.linkpat import (
    LinkPattern,
    NonCrossingPartition,
    enumerate_patterns,
    partition_to_pattern,
    pattern_to_partition,
    rainbow,
    unnested,
)
from artifact.predict import compare_identity
from artifact.rcm import (
    BondConfig,
    LatticePolygon,
    MedialWalker,
    build_polygon,
    cluster_count,
    connectivity_pattern,
    continuum_rectangle,
    corner_offsets,
    corner_visit_table,
    critical_p,
    estimate_probs,
    exact_distribution,
    exploration_corners,
    exploration_path,
    integrated_autocorrelation,
    interface_pairing,
    make_chain,
    run_chains,
    sw_sample,
    trace_interfaces,
)

PAIRS, NESTED = unnested(2), rainbow(2)


def square_with_corners(size):
    return build_polygon(size, size, corner_offsets(size, size))


def brute_force_distribution(poly, beta, q, p):
    """Sum over configurations of the full lattice with the wired arcs glued by hand.

    Independent of the contraction code: every lattice edge is a variable here,
    wired-arc edges are simply required to be open, and the external wiring of
    beta is added as extra edges between arc representatives.
    """
    n_vertices = poly.n_vertices
    edges = [tuple(e) for e in poly.all_edges.tolist()]
    forced = [tuple(sorted(e)) in poly.forced_edges for e in edges]
    arc_root = [poly.vertex_id(*poly.boundary[arc[0]]) for arc in poly.arcs]
    external = []
    for block in pattern_to_partition(beta).blocks:
        members = sorted(block)
        external += [(arc_root[a - 1], arc_root[b - 1]) for a, b in zip(members, members[1:])]
    weights = {}
    free = [e for e, f in zip(edges, forced) if not f]
    fixed = [e for e, f in zip(edges, forced) if f]
    for bits in itertools.product((0, 1), repeat=len(free)):
        opened = fixed + [e for e, b in zip(free, bits) if b]
        internal = _components(n_vertices, opened)
        blocks = {}
        for r, root in enumerate(arc_root):
            blocks.setdefault(internal[root], []).append(r + 1)
        theta = partition_to_pattern(NonCrossingPartition(poly.n_links, blocks.values()))
        clusters = _components(n_vertices, opened + external).max() + 1
        k = sum(bits)
        weight = p**k * (1 - p) ** (len(free) - k) * q**clusters
        weights[theta] = weights.get(theta, 0.0) + weight
    total = sum(weights.values())
    return {t: w / total for t, w in weights.items()}


def _components(n_vertices, edges):
    if not edges:
        return np.arange(n_vertices)
    rows, cols = zip(*edges)
    graph = coo_matrix((np.ones(len(edges)), (rows, cols)), shape=(n_vertices, n_vertices))
    return connected_components(graph, directed=False)[1]


def random_config(poly, rng):
    return BondConfig(rng.integers(0, 2, poly.n_edges))


# ----------------------------------------------------------------------------
# polygons


def test_square_polygon_corners_and_arcs():
    poly = square_with_corners(4)
    assert poly.marked == (0, 4, 8, 12)
    assert poly.marked_vertices() == [(0, 4), (0, 0), (4, 0), (4, 4)]
    assert poly.arcs[0] == (0, 1, 2, 3, 4)
    assert poly.free_arcs[0] == (5, 6, 7)
    assert len(poly.forced_edges) == 8
    assert poly.n_edges == 40 - 8


def test_polygon_with_three_arcs_and_adjacent_marks():
    poly = build_polygon(8, 4, [0, 1, 5, 13, 17, 20])
    assert poly.n_links == 3
    assert poly.arcs[0] == (0, 1)
    assert poly.free_arcs[2] == (21, 22, 23)
    touching = build_polygon(2, 2, [0, 1, 2, 3])
    assert touching.free_arcs[0] == ()


@pytest.mark.parametrize(
    "marked, error",
    [((0, 1, 2), ValidationError), ((0, 2, 1, 3), ValidationError), ((0, 0), ValidationError), ((0, 99), ValidationError)],
)
def test_polygon_validation(marked, error):
    with pytest.raises(error):
        build_polygon(3, 3, marked)


def test_polygon_arc_cap():
    with pytest.raises(CapacityError):
        build_polygon(10, 10, range(0, 28, 2))


def test_continuum_rectangle_adds_dual_margin():
    rect = continuum_rectangle(square_with_corners(8))
    assert (rect.width, rect.height) == (8.0, 9.0)
    assert rect.positions == (0.0, 9.0, 17.0, 26.0)
    plain = continuum_rectangle(square_with_corners(8), dual_margin=False)
    assert plain.positions == (0.0, 8.0, 16.0, 24.0)


# ----------------------------------------------------------------------------
# exact enumeration


def test_single_square_by_hand():
    poly = build_polygon(1, 1, [0, 1, 2, 3])
    assert poly.n_edges == 2
    for q, p in [(2.0, critical_p(2.0)), (3.0, 0.3), (1.0, 0.5)]:
        closed = (1 - p) ** 2
        connected = q * (1 - closed)
        expected = connected / (connected + q * q * closed)
        assert exact_distribution(poly, PAIRS, q, p)[NESTED] == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize(
    "width, height, marked",
    [(2, 2, (0, 2, 4, 6)), (3, 2, (0, 1, 4, 7)), (2, 2, (0, 1, 3, 4, 5, 7)), (3, 1, (1, 3))],
)
def test_enumeration_matches_brute_force(width, height, marked):
    poly = build_polygon(width, height, marked)
    for beta in enumerate_patterns(poly.n_links):
        for q, p in [(2.0, critical_p(2.0)), (3.0, 0.4), (1.0, 0.5)]:
            exact = exact_distribution(poly, beta, q, p)
            oracle = brute_force_distribution(poly, beta, q, p)
            for theta in enumerate_patterns(poly.n_links):
                assert exact[theta] == pytest.approx(oracle.get(theta, 0.0), abs=1e-13)


def test_enumeration_extreme_p():
    poly = build_polygon(2, 2, (0, 1, 3, 4, 5, 7))
    one_block = partition_to_pattern(NonCrossingPartition(3, [[1, 2, 3]]))
    for beta in enumerate_patterns(3):
        assert exact_distribution(poly, beta, 2.0, 1.0)[one_block] == pytest.approx(1.0)
        assert exact_distribution(poly, beta, 2.0, 0.0)[unnested(3)] == pytest.approx(1.0)


def test_comparison_identity_on_small_polygon():
    poly = build_polygon(2, 2, (0, 1, 3, 4, 5, 7))
    for q in (1.0, 2.0, 3.0):
        p = critical_p(q)
        source = exact_distribution(poly, unnested(3), q, p)
        for beta in enumerate_patterns(3):
            direct = exact_distribution(poly, beta, q, p)
            derived = compare_identity(source, beta, q)
            assert np.max(np.abs(direct.as_vector() - derived.as_vector())) < 1e-12


def test_enumeration_caps_and_checks():
    with pytest.raises(CapacityError):
        exact_distribution(square_with_corners(4), PAIRS, 2.0, 0.5)
    poly = square_with_corners(2)
    with pytest.raises(PreconditionError):
        exact_distribution(poly, PAIRS, 0.0, 0.5)
    with pytest.raises(PreconditionError):
        exact_distribution(poly, PAIRS, 2.0, 1.5)
    with pytest.raises(DimensionError):
        exact_distribution(poly, unnested(3), 2.0, 0.5)


# ----------------------------------------------------------------------------
# configurations and interfaces


def test_connectivity_examples():
    poly = square_with_corners(3)
    assert connectivity_pattern(BondConfig(np.zeros(poly.n_edges)), poly) == PAIRS
    assert connectivity_pattern(BondConfig(np.ones(poly.n_edges)), poly) == NESTED
    # the two middle columns hold 8 isolated vertices; the wired sides are glued under NESTED
    assert cluster_count(BondConfig(np.zeros(poly.n_edges)), poly, NESTED) == 1 + 8
    assert cluster_count(BondConfig(np.zeros(poly.n_edges)), poly, PAIRS) == 2 + 8
    with pytest.raises(DimensionError):
        connectivity_pattern(BondConfig(np.zeros(3)), poly)


def test_single_interface_hugs_a_boundary_arc():
    poly = build_polygon(4, 4, (0, 4))
    closed = trace_interfaces(BondConfig(np.zeros(poly.n_edges)), poly)
    assert [(p.start, p.end) for p in closed] == [(1, 2)]
    assert max(x for x, _ in closed[0].midpoints) <= 1
    opened = trace_interfaces(BondConfig(np.ones(poly.n_edges)), poly)
    for x, y in opened[0].midpoints:
        assert x >= 7 or y <= 1 or y >= 7 or x <= -1


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_interfaces_pair_like_connectivity_and_never_share_segments(seed):
    poly = build_polygon(6, 5, (0, 3, 7, 11, 15, 19))
    config = random_config(poly, np.random.default_rng(seed))
    paths = trace_interfaces(config, poly)
    assert interface_pairing(paths) == connectivity_pattern(config, poly)
    segments = [set(p.segments()) for p in paths]
    for a, b in itertools.combinations(segments, 2):
        assert not a & b


def test_exploration_path_ends_at_partner_of_first_point():
    poly = build_polygon(6, 5, (0, 3, 7, 11, 15, 19))
    walker = MedialWalker(poly)
    rng = np.random.default_rng(3)
    for _ in range(30):
        config = random_config(poly, rng)
        for beta in enumerate_patterns(3):
            trace = exploration_path(config, poly, beta, walker)
            assert trace.terminal == beta.partner[1]
            assert trace.corners[0] == 1


def test_exploration_corner_examples():
    assert exploration_corners(PAIRS, PAIRS).corners == (1, 2)
    assert exploration_corners(NESTED, PAIRS).corners == (1, 4, 3, 2)
    table = corner_visit_table(PAIRS)
    assert table.tolist() == [[1, 1, 0, 0], [1, 1, 1, 1]]


# ----------------------------------------------------------------------------
# sampling and estimation


def test_chains_are_reproducible():
    poly = square_with_corners(6)
    first = run_chains(poly, PAIRS, 200, chains=2, seed=9, burn_in=50)
    second = run_chains(poly, PAIRS, 200, chains=2, seed=9, burn_in=50, threads=2)
    other = run_chains(poly, PAIRS, 200, chains=2, seed=10, burn_in=50)
    for a, b in zip(first.indices, second.indices):
        assert np.array_equal(a, b)
    assert not all(np.array_equal(a, b) for a, b in zip(first.indices, other.indices))


def test_full_opening_probability():
    poly = square_with_corners(5)
    for config, pattern in sw_sample(poly, PAIRS, 5, burn_in=0, p=1.0):
        assert config.open.all()
        assert pattern == NESTED


def test_sampler_argument_checks():
    poly = square_with_corners(3)
    with pytest.raises(PreconditionError):
        make_chain(poly, PAIRS, 0, dynamics="metropolis")
    with pytest.raises(PreconditionError):
        make_chain(poly, PAIRS, 0, q=3.0)
    with pytest.raises(PreconditionError):
        make_chain(poly, PAIRS, 0, p=2.0)


@pytest.mark.parametrize("beta", enumerate_patterns(3))
def test_swendsen_wang_matches_enumeration_with_three_arcs(beta):
    poly = build_polygon(3, 3, (0, 2, 4, 6, 8, 10))
    exact = exact_distribution(poly, beta, 2.0, critical_p(2.0))
    run = run_chains(poly, beta, 100_000, chains=1, seed=21)
    empirical = estimate_probs(run.indices, beta)
    for theta in enumerate_patterns(3):
        assert abs(empirical[theta] - exact[theta]) < 4 * empirical.stderr[theta] + 1e-12


@pytest.mark.parametrize("beta", enumerate_patterns(2))
def test_glauber_matches_enumeration_at_q_three(beta):
    poly = build_polygon(2, 2, (0, 2, 4, 6))
    exact = exact_distribution(poly, beta, 3.0, critical_p(3.0))
    run = run_chains(poly, beta, 20000, chains=2, seed=4, burn_in=500, dynamics="glauber", q=3.0)
    empirical = estimate_probs(run.indices, beta)
    for theta in enumerate_patterns(2):
        assert abs(empirical[theta] - exact[theta]) < 4 * empirical.stderr[theta] + 1e-12


def test_estimate_probs_of_constant_stream():
    dist = estimate_probs([PAIRS] * 50)
    assert dist[PAIRS] == 1.0
    assert dist.stderr[PAIRS] == 0.0
    assert dist.samples == 50


def test_estimate_probs_of_fair_stream():
    rng = np.random.default_rng(1)
    indices = rng.integers(0, 2, 100000)
    dist = estimate_probs([indices], PAIRS)
    assert dist[PAIRS] == pytest.approx(0.5, abs=0.01)
    assert dist.stderr[PAIRS] == pytest.approx(math.sqrt(0.25 / 100000), rel=0.2)


def test_estimate_probs_rejects_empty_stream():
    with pytest.raises(PreconditionError):
        estimate_probs([])
    with pytest.raises(PreconditionError):
        estimate_probs([np.array([0, 1])])


def test_autocorrelation_time_of_ar1_series():
    rng = np.random.default_rng(2)
    phi, n = 0.8, 200000
    noise = rng.standard_normal(n)
    series = np.empty(n)
    series[0] = noise[0]
    for t in range(1, n):
        series[t] = phi * series[t - 1] + noise[t]
    assert integrated_autocorrelation(series) == pytest.approx((1 + phi) / (2 * (1 - phi)), rel=0.1)
    assert integrated_autocorrelation(np.ones(10)) == 0.5
