"""Randomized property tests for the pure numeric building blocks."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from fctsim.analytic import (mean_queueing_delay, queue_wait_tail_prob,
                             slow_start_rounds, slow_start_rounds_ceil)
from fctsim.metrics import best_case_fct, nearest_rank_p99
from fctsim.oracle import _lindley
from fctsim.topology import FiveTuple, Link, tuple_hash
from fctsim.workload import FlowSizeDistribution, load_distribution


@given(st.floats(0.0, 0.99), st.floats(1.0, 1000.0))
def test_pk_wait_nonnegative_and_increasing_in_load(rho, m):
    w = mean_queueing_delay(rho, m)
    assert w >= 0.0
    assert mean_queueing_delay(min(rho + 0.005, 0.995), m) >= w


@given(st.floats(0.0, 1e4), st.floats(0.01, 0.99), st.floats(1.0, 1000.0))
def test_tail_prob_is_a_probability(w, rho, m):
    p = queue_wait_tail_prob(w, rho, m)
    assert 0.0 <= p <= 1.0
    assert queue_wait_tail_prob(w + 1.0, rho, m) <= p


@given(st.integers(1, 100_000), st.integers(1, 64))
def test_slow_start_round_counts_agree(size, k):
    cont = slow_start_rounds(size, k)
    whole = slow_start_rounds_ceil(size, k)
    assert whole == math.ceil(cont) or math.isclose(cont, round(cont))
    assert whole >= cont - 1e-9


@given(st.lists(st.floats(0.01, 100.0), min_size=1, max_size=200),
       st.floats(0.1, 50.0))
def test_lindley_waits_nonnegative_and_bounded(gaps, service):
    waits = _lindley(np.array(gaps), service)
    assert np.all(waits >= 0.0)
    # each wait grows by at most one service time per arrival
    assert np.all(np.diff(waits) <= service + 1e-9)


@given(st.lists(st.floats(0.0, 1e6), min_size=1, max_size=500))
def test_p99_is_an_order_statistic_above_most_points(values):
    p99 = nearest_rank_p99(values)
    assert p99 in values
    assert sum(v > p99 for v in values) <= max(0, len(values) // 100)


@given(st.integers(1, 300), st.integers(1, 44))
def test_best_case_respects_capacity_bound(size, iw):
    link = Link(0, 0, 1, 1000.0, 1e-4, 100)
    fct = best_case_fct(size, [link], initial_window=iw, max_window=44)
    assert fct >= size / 1000.0 + 1e-4 - 1e-12
    assert fct <= size / 1000.0 + size * 3e-3        # sanity upper bound


@given(st.integers(0, 2**32), st.integers(0, 2**32))
def test_tuple_hash_stays_in_64_bits(salt, port):
    h = tuple_hash(FiveTuple(1, 2, port, 443), salt)
    assert 0 <= h < 2**64


@settings(max_examples=30)
@given(st.lists(st.tuples(st.integers(1, 10**6), st.floats(1e-6, 1.0)),
                min_size=1, max_size=20, unique_by=lambda t: t[0]))
def test_distribution_round_trip_any_table(tmp_path_factory, atoms):
    atoms = sorted(atoms)
    total = sum(p for _, p in atoms)
    cum, acc = [], 0.0
    for _, p in atoms:
        acc += p / total
        cum.append(acc)
    cum[-1] = 1.0
    if any(b <= a for a, b in zip(cum, cum[1:])):
        return                           # degenerate normalization; skip
    d = FlowSizeDistribution("t", tuple(x for x, _ in atoms), tuple(cum))
    path = tmp_path_factory.mktemp("dist") / "t.txt"
    d.save(path)
    assert load_distribution(path, "t") == d
