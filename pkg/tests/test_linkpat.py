import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from artifact.errors import CapacityError, DimensionError, PreconditionError, ValidationError
from artifact.linkpat import (
    LinkPattern,
    NonCrossingPartition,
    all_noncrossing_partitions,
    enumerate_patterns,
    loop_count,
    meander_matrix,
    parse_pattern,
    partition_to_pattern,
    pattern_to_partition,
    rainbow,
    remove_link,
    tie,
    unnested,
)


def catalan_by_recurrence(n):
    values = [1]
    for m in range(n):
        values.append(sum(values[i] * values[m - i] for i in range(m + 1)))
    return values[n]


def loops_by_components(alpha, beta):
    """Loops of the meander as connected components of the union of both pairings."""
    parent = list(range(2 * alpha.n_links + 1))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    for a, b in alpha.links + beta.links:
        parent[find(a)] = find(b)
    return len({find(i) for i in range(1, 2 * alpha.n_links + 1)})


def cascade_indices(alpha):
    """Even j >= 4 such that the indices 3..j are paired among themselves."""
    out = []
    for j in range(4, 2 * alpha.n_links + 1, 2):
        if all(3 <= alpha.partner[i] <= j for i in range(3, j + 1)):
            out.append(j)
    return out


def split_cascade(alpha, j):
    inner = LinkPattern([(a - 2, b - 2) for a, b in alpha.links if 3 <= a <= j])
    kept = sorted(i for i in range(1, 2 * alpha.n_links + 1) if not 3 <= i <= j)
    relabel = {old: new for new, old in enumerate(kept, start=1)}
    outer = LinkPattern([(relabel[a], relabel[b]) for a, b in alpha.links if not 3 <= a <= j])
    return inner, outer


patterns_up_to_5 = st.integers(1, 5).flatmap(lambda n: st.sampled_from(enumerate_patterns(n)))


@pytest.mark.parametrize("n", range(1, 8))
def test_pattern_counts_follow_catalan_recurrence(n):
    assert len(enumerate_patterns(n)) == catalan_by_recurrence(n)


def test_small_enumerations():
    assert enumerate_patterns(1) == [LinkPattern([(1, 2)])]
    assert len(enumerate_patterns(3)) == 5
    assert len(enumerate_patterns(5)) == 42
    assert enumerate_patterns(0) == [LinkPattern([])]


def test_enumeration_cap():
    with pytest.raises(CapacityError):
        enumerate_patterns(11)


def test_canonical_order_is_lexicographic_in_right_endpoints():
    for n in range(1, 6):
        keys = [p.sort_key() for p in enumerate_patterns(n)]
        assert keys == sorted(keys) and len(set(keys)) == len(keys)


@pytest.mark.parametrize(
    "links, message",
    [([(1, 3), (2, 4)], "cross"), ([(1, 2), (2, 3)], "two links"), ([(1, 1)], "itself"), ([(1, 5)], "outside")],
)
def test_invalid_patterns_are_rejected(links, message):
    with pytest.raises(ValidationError, match=message):
        LinkPattern(links)


def test_pattern_string_forms():
    beta = parse_pattern(" 1-4 , 2-3 ")
    assert beta == rainbow(2)
    assert beta.index_form() == "1-4,2-3"
    assert beta.paren_form() == "((14)(23))"
    with pytest.raises(ValidationError):
        parse_pattern("1-2,3")


@given(patterns_up_to_5)
def test_string_round_trip(alpha):
    assert parse_pattern(alpha.index_form()) == alpha


def test_loop_count_examples():
    one = LinkPattern([(1, 2)])
    assert loop_count(one, one) == 1
    assert loop_count(unnested(2), rainbow(2)) == 1
    beta = LinkPattern([(1, 6), (2, 5), (3, 4)])
    assert sorted(loop_count(a, beta) for a in enumerate_patterns(3)) == [1, 1, 2, 2, 3]
    with pytest.raises(DimensionError):
        loop_count(one, unnested(2))


@pytest.mark.parametrize("n", range(1, 6))
def test_loop_count_matches_component_oracle_and_is_symmetric(n):
    patterns = enumerate_patterns(n)
    for a in patterns:
        for b in patterns:
            count = loop_count(a, b)
            assert count == loops_by_components(a, b)
            assert count == loop_count(b, a)
            assert 1 <= count <= n


@pytest.mark.parametrize("n", range(1, 7))
def test_self_meander_has_n_loops(n):
    assert all(loop_count(a, a) == n for a in enumerate_patterns(n))


def test_meander_matrix_examples():
    assert np.allclose(meander_matrix(1, 2).entries, [[math.sqrt(2)]])
    m2 = meander_matrix(2, 2).entries
    assert np.allclose(np.diag(m2), 2) and np.allclose(m2[0, 1], math.sqrt(2))
    m3 = meander_matrix(3, 2).entries
    assert np.linalg.matrix_rank(m3, tol=1e-10) == 4
    with pytest.raises(PreconditionError):
        meander_matrix(2, 0.0)


@given(st.integers(1, 5), st.floats(0.1, 4.0))
def test_meander_matrix_symmetric_positive(n, q):
    m = meander_matrix(n, q)
    assert np.array_equal(m.entries, m.entries.T)
    assert np.all(m.entries > 0)
    assert np.allclose(m.entries, math.sqrt(q) ** m.loops)


def test_remove_link_examples():
    assert remove_link(unnested(2), 1) == LinkPattern([(1, 2)])
    assert remove_link(rainbow(2), 2) == LinkPattern([(1, 2)])
    assert remove_link(rainbow(3), 3) == rainbow(2)
    with pytest.raises(PreconditionError):
        remove_link(unnested(2), 2)


def test_tie_examples():
    assert tie(unnested(2), 1) == unnested(2)
    assert tie(unnested(2), 2) == rainbow(2)
    assert tie(rainbow(2), 1) == unnested(2)


@given(patterns_up_to_5, st.data())
def test_tie_produces_planar_pattern_containing_the_pair(beta, data):
    j = data.draw(st.integers(1, 2 * beta.n_links - 1))
    tied = tie(beta, j)
    assert (j, j + 1) in tied
    assert tied.n_links == beta.n_links


@pytest.mark.parametrize("n", range(1, 6))
def test_removing_a_shared_link_removes_one_loop(n):
    for beta in enumerate_patterns(n):
        for j in range(1, 2 * n):
            if (j, j + 1) not in beta:
                continue
            for alpha in enumerate_patterns(n):
                if (j, j + 1) in alpha:
                    reduced = loop_count(remove_link(alpha, j), remove_link(beta, j)) if n > 1 else 0
                    assert loop_count(alpha, beta) == reduced + 1


@pytest.mark.parametrize("n", range(2, 6))
def test_meander_factorizes_along_cascade_indices(n):
    checked = 0
    for alpha in enumerate_patterns(n):
        for j in cascade_indices(alpha):
            inner, outer = split_cascade(alpha, j)
            product = meander_matrix(inner.n_links, 2).entry(inner, unnested(inner.n_links)) * meander_matrix(
                outer.n_links, 2
            ).entry(outer, unnested(outer.n_links))
            assert product == pytest.approx(meander_matrix(n, 2).entry(alpha, unnested(n)), rel=1e-14)
            checked += 1
    assert checked > 0


def test_partition_bijection_examples():
    assert partition_to_pattern(NonCrossingPartition(1, [[1]])) == LinkPattern([(1, 2)])
    for n in range(1, 6):
        singletons = NonCrossingPartition(n, [[r] for r in range(1, n + 1)])
        assert partition_to_pattern(singletons) == unnested(n)
    assert partition_to_pattern(NonCrossingPartition(2, [[1, 2]])) == rainbow(2)


def test_one_block_partition_pattern():
    # for N >= 3 the single block joins consecutive arcs, which is not the rainbow
    assert partition_to_pattern(NonCrossingPartition(3, [[1, 2, 3]])) == parse_pattern("1-6,2-3,4-5")


def test_crossing_partition_is_rejected():
    with pytest.raises(ValidationError):
        NonCrossingPartition(4, [[1, 3], [2, 4]])


@pytest.mark.parametrize("n", range(1, 7))
def test_partition_round_trip_exhaustive(n):
    partitions = all_noncrossing_partitions(n)
    assert len(set(partitions)) == catalan_by_recurrence(n)
    for partition in partitions:
        assert pattern_to_partition(partition_to_pattern(partition)) == partition


def test_random_partition_strings_round_trip():
    rng = random.Random(3)
    for _ in range(50):
        n = rng.randint(1, 6)
        beta = rng.choice(enumerate_patterns(n))
        assert partition_to_pattern(pattern_to_partition(beta)) == beta
