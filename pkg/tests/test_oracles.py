import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixedrates.constructions import oracle_mapping
from mixedrates.errors import ExhaustiveTooLarge
from mixedrates.oracles import (
    EXACT_INT_LIMIT,
    intrinsic_distance,
    ir_converse_log_size,
    ir_distance_lower_bound,
    max_ir_size,
    min_code_size,
    min_resolvability_size,
    optimal_coding_error,
    optimal_resolvability_distance,
)
from mixedrates.sources import MarkovSource, Mixture, bernoulli
from mixedrates.spectrum import ClassedDistribution, exact_classes

from conftest import (
    brute_intrinsic,
    brute_probs,
    brute_resolvability,
    brute_top_mass,
    element_lpt,
)


def cd(probs):
    return ClassedDistribution.from_probabilities(probs)


UNIFORM8 = [1 / 8] * 8
MIX = Mixture(((0.5, bernoulli(0.11)), (0.5, bernoulli(0.45))))


def test_coding_examples():
    assert optimal_coding_error(cd(UNIFORM8), 8).objective == 0.0
    assert optimal_coding_error(exact_classes(bernoulli(0.25), 1), 1).objective == pytest.approx(0.25)
    expected = 1 - (0.75**3 + 3 * 0.75**2 * 0.25)
    assert optimal_coding_error(exact_classes(bernoulli(0.25), 3), 4).objective == pytest.approx(expected)
    assert optimal_coding_error(cd(UNIFORM8), 100).objective == 0.0


def test_code_size_examples():
    assert min_code_size(cd(UNIFORM8), 0.0) == 8
    assert min_code_size(cd(UNIFORM8), 0.5) == 4


def test_code_size_matches_scan():
    classes = exact_classes(bernoulli(0.25), 10)
    probs = brute_probs(bernoulli(0.25), 10)
    scan = next(m for m in range(1, 1025) if 1 - brute_top_mass(probs, m) <= 0.1 + 1e-12)
    assert min_code_size(classes, 0.1) == scan


@pytest.mark.parametrize("source,n", [
    (bernoulli(0.25), 12),
    (MIX, 10),
    (MarkovSource(((0.9, 0.1), (0.4, 0.6))), 10),
    (Mixture(((0.3, bernoulli(0.2)), (0.7, MarkovSource(((0.6, 0.4), (0.1, 0.9)))))), 9),
])
def test_coding_matches_brute_force(source, n):
    classes = exact_classes(source, n)
    probs = brute_probs(source, n)
    for m in (1, 2, 3, 7, 50, 100, 511, len(probs)):
        got = optimal_coding_error(classes, m).objective
        assert got == pytest.approx(1 - brute_top_mass(probs, m), abs=1e-12)


def test_resolvability_examples():
    assert optimal_resolvability_distance(cd([0.25] * 4), 4).objective == 0.0
    half = cd([0.5, 0.5])
    assert [optimal_resolvability_distance(half, m).objective for m in (1, 2, 3, 4)] == \
        pytest.approx([1.0, 0.0, 1 / 3, 0.0])
    probs = [0.7, 0.2, 0.1]
    assert optimal_resolvability_distance(cd(probs), 2).objective == \
        pytest.approx(brute_resolvability(probs, 2))


def test_resolvability_size_examples():
    for k in range(5):
        assert min_resolvability_size(cd([2.0**-k] * 2**k), 0.0) == 2**k
    # the smallest M with distance <= 1/3 for a fair coin is 2, since d(2) = 0
    assert min_resolvability_size(cd([0.5, 0.5]), 1 / 3) == 2


def test_resolvability_size_matches_linear_scan():
    classes = exact_classes(MIX, 12)
    scan = next(m for m in range(1, 5000)
                if optimal_resolvability_distance(classes, m, with_units=False).objective <= 0.6 + 1e-12)
    assert min_resolvability_size(classes, 0.6) == scan


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6), st.integers(1, 10))
def test_resolvability_matches_exhaustive(raw, M):
    probs = [x / math.fsum(raw) for x in raw]
    if abs(math.fsum(probs) - 1.0) > 1e-12:
        return
    got = optimal_resolvability_distance(cd(probs), M).objective
    assert got == pytest.approx(brute_resolvability(probs, M), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from([1, 2, 3, 4]), min_size=1, max_size=6), st.integers(1, 12))
def test_resolvability_ties_match_exhaustive(raw, M):
    # many equal probabilities: exercises the class-level bookkeeping
    probs = [x / sum(raw) for x in raw]
    if abs(math.fsum(probs) - 1.0) > 1e-12:
        return
    got = optimal_resolvability_distance(cd(probs), M)
    assert got.objective == pytest.approx(brute_resolvability(probs, M), abs=1e-12)
    mapping = oracle_mapping(cd(probs), M)
    assert mapping.distance(cd(probs)) == pytest.approx(got.objective, abs=1e-12)


def test_float_path_is_continuous_at_the_int_limit():
    classes = exact_classes(bernoulli(0.3), 80)
    below = optimal_resolvability_distance(classes, EXACT_INT_LIMIT - 1).objective
    above = optimal_resolvability_distance(classes, EXACT_INT_LIMIT + 1).objective
    assert abs(below - above) < 1e-6
    mapping = oracle_mapping(classes, 2**60)
    assert mapping.M == 2**60


def test_intrinsic_examples():
    for M in (1, 2, 4):
        c = cd([1 / M] * M)
        assert intrinsic_distance(c, M).objective == pytest.approx(0.0, abs=1e-15)
        assert intrinsic_distance(c, M, "exhaustive").objective == pytest.approx(0.0, abs=1e-15)
    assert intrinsic_distance(cd([0.6, 0.4]), 2, "exhaustive").objective == pytest.approx(0.2)
    with pytest.raises(ExhaustiveTooLarge):
        intrinsic_distance(cd([1 / 13] * 13), 2, "exhaustive")
    with pytest.raises(ExhaustiveTooLarge):
        intrinsic_distance(cd([0.5, 0.5]), 7, "exhaustive")


def test_max_ir_size_examples():
    assert max_ir_size(cd(UNIFORM8), 0.0) == 8
    assert max_ir_size(cd([1.0]), 0.5) == 1
    assert max_ir_size(cd([0.5, 0.25, 0.25]), 0.5, "exhaustive") == 4


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=7), st.integers(1, 4))
def test_exhaustive_intrinsic_matches_brute_force(raw, M):
    probs = [x / math.fsum(raw) for x in raw]
    if abs(math.fsum(probs) - 1.0) > 1e-12:
        return
    got = intrinsic_distance(cd(probs), M, "exhaustive").objective
    assert got == pytest.approx(brute_intrinsic(probs, M), abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.sampled_from([1, 2, 3, 5, 8]), min_size=1, max_size=40), st.integers(1, 30))
def test_heuristic_equals_element_level_greedy(raw, M):
    probs = [x / sum(raw) for x in raw]
    if abs(math.fsum(probs) - 1.0) > 1e-12:
        return
    got = intrinsic_distance(cd(probs), M).objective
    assert got == pytest.approx(min(2.0, element_lpt(probs, M)), abs=1e-10)


def test_heuristic_matches_greedy_on_binomial_classes():
    probs = brute_probs(bernoulli(0.3), 10)
    classes = exact_classes(bernoulli(0.3), 10)
    for M in (3, 17, 64, 200):
        assert intrinsic_distance(classes, M).objective == pytest.approx(element_lpt(probs, M), abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6), st.integers(1, 4))
def test_bound_ordering(raw, M):
    probs = [x / math.fsum(raw) for x in raw]
    if abs(math.fsum(probs) - 1.0) > 1e-12:
        return
    c = cd(probs)
    lower = ir_distance_lower_bound(c, M)
    exact = intrinsic_distance(c, M, "exhaustive").objective
    greedy = intrinsic_distance(c, M).objective
    assert lower <= exact + 1e-12 <= greedy + 2e-12


def test_converse_log_size_bounds_heuristic():
    for n in (4, 16, 64):
        c = exact_classes(MIX, n)
        assert math.log(max_ir_size(c, 0.6)) <= ir_converse_log_size(c, 0.6) + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=8), st.integers(1, 20))
def test_coding_monotone_and_bounded(raw, M):
    probs = [x / math.fsum(raw) for x in raw]
    if abs(math.fsum(probs) - 1.0) > 1e-12:
        return
    c = cd(probs)
    e1 = optimal_coding_error(c, M).objective
    e2 = optimal_coding_error(c, M + 1).objective
    assert 0.0 <= e2 <= e1 <= 1.0
    kept = sum(k for _, k in optimal_coding_error(c, M).allocation)
    assert kept <= M


def test_allocation_units_sum_to_M():
    c = exact_classes(MIX, 20)
    for M in (1, 5, 1000, 123456):
        res = optimal_resolvability_distance(c, M)
        assert sum(u * k for _, pairs in res.allocation for u, k in pairs) == M
        assert 0.0 <= res.objective <= 2.0


def test_resolvability_distance_not_monotone():
    # why the size search scans instead of bisecting on short ranges
    half = cd([0.5, 0.5])
    d = [optimal_resolvability_distance(half, m).objective for m in range(1, 6)]
    assert d[2] > d[1]
    assert np.all(np.asarray(d) >= 0)


@pytest.mark.parametrize("source,n", [(MIX, 9), (bernoulli(0.3), 8)])
def test_split_classes_change_nothing(source, n):
    c = exact_classes(source, n)
    s = c.split()
    for M in (1, 3, 17, 100, 300):
        assert optimal_resolvability_distance(s, M).objective == pytest.approx(
            optimal_resolvability_distance(c, M).objective, abs=1e-12)
        assert optimal_coding_error(s, M).objective == pytest.approx(
            optimal_coding_error(c, M).objective, abs=1e-12)
        assert intrinsic_distance(s, M).objective == pytest.approx(
            intrinsic_distance(c, M).objective, abs=1e-10)


def test_distance_non_increasing_along_doublings(rng):
    # d(kM) <= d(M): repeat every unit k times.  Plain monotonicity in M fails
    # (see test_resolvability_distance_not_monotone); coding is monotone.
    for _ in range(20):
        probs = rng.dirichlet(np.ones(int(rng.integers(2, 9))))
        c = cd(list(probs / probs.sum()))
        errs = [optimal_coding_error(c, m).objective for m in range(1, 65)]
        assert all(b <= a + 1e-15 for a, b in zip(errs, errs[1:]))
        for m in range(1, 33):
            assert optimal_resolvability_distance(c, 2 * m).objective <= \
                optimal_resolvability_distance(c, m).objective + 1e-12
