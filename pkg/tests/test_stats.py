import math

import numpy as np
import pytest
from conftest import COIN, coin_flips, coin_system, uniform_system
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import truncnorm

from rhosim import ContinuousSpace, SeedSpec, TrialRecord, run_trials
from rhosim.scenarios import (
    FACES,
    CubeFactorySpec,
    DieSpec,
    make_cube_factory,
    make_deterministic_die,
    make_nonstationary_walk,
    make_sublimating_die,
    make_weighted_die,
)
from rhosim.stats import (
    DensityModel,
    EmpiricalDistribution,
    EmptyInput,
    Inconclusive,
    InconclusiveError,
    NonStabilizing,
    PredictorConfig,
    RandomnessClass,
    Stabilizing,
    StabilizationConfig,
    TooFewRecords,
    WrongSpaceKind,
    classify_randomness,
    estimate_density,
    estimate_probability,
    frequency_trace,
    geometric_schedule,
    half_width,
    predictor_accuracy,
    relative_frequencies,
    test_stabilization,
)

FAIR = make_weighted_die(DieSpec())


# -- relative frequencies ----------------------------------------------------


def test_six_distinct_faces():
    records = [TrialRecord(i, i) for i in range(6)]
    dist = relative_frequencies(records, FACES)
    assert list(dist.counts) == [1] * 6
    assert np.all(dist.frequencies == 1 / 6)


def test_deterministic_die_frequencies():
    dist = relative_frequencies(run_trials(make_deterministic_die(0), 1000, SeedSpec(1)))
    assert list(dist.frequencies) == [1, 0, 0, 0, 0, 0]


def test_fair_coin_heads():
    dist = relative_frequencies(run_trials(coin_system(), 100_000, SeedSpec(2)))
    assert abs(dist.frequencies[0] - 0.5) <= 0.006


def test_empty_input():
    with pytest.raises(EmptyInput):
        relative_frequencies([], FACES)


def test_out_of_space_records_rejected():
    with pytest.raises(ValueError):
        relative_frequencies([0, 1, 6], FACES)


def test_merge_is_associative_fold():
    labels = np.random.default_rng(0).integers(0, 6, 999)
    whole = relative_frequencies(labels, FACES)
    parts = [relative_frequencies(labels[a:b], FACES) for a, b in [(0, 100), (100, 700), (700, 999)]]
    merged = parts[0].merge(parts[1]).merge(parts[2])
    assert np.array_equal(merged.counts, whole.counts) and merged.n == whole.n


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=1, max_size=300))
def test_frequencies_normalized(labels):
    dist = relative_frequencies(labels, FACES)
    assert dist.counts.sum() == dist.n == len(labels)
    assert math.isclose(dist.frequencies.sum(), 1.0, rel_tol=1e-12)


# -- estimates ---------------------------------------------------------------


def test_estimate_arithmetic():
    dist = EmpiricalDistribution(COIN, [3, 1], 4)
    p, hw = estimate_probability(dist, 0)
    assert p == 0.75
    assert hw == pytest.approx(4 * math.sqrt(0.75 * 0.25 / 4))
    assert estimate_probability(dist, "tails")[0] == 0.25


def test_estimate_fair_die():
    dist = relative_frequencies(run_trials(FAIR, 600_000, SeedSpec(3)))
    for face in range(6):
        p, _ = estimate_probability(dist, face)
        assert 1 / 6 - 0.005 <= p <= 1 / 6 + 0.005


def test_estimate_deterministic_die():
    dist = relative_frequencies(run_trials(make_deterministic_die(0), 5000, SeedSpec(3)))
    assert estimate_probability(dist, 0) == (1.0, 0.0)


def test_estimate_empty():
    with pytest.raises(EmptyInput):
        estimate_probability(EmpiricalDistribution(COIN, [0, 0], 0), 0)


@settings(max_examples=200)
@given(p=st.one_of(st.just(0.0), st.floats(1e-9, 1.0)), n=st.integers(1, 10**9), z=st.floats(0.5, 10.0))
def test_half_width_halves_when_n_quadruples(p, n, z):
    assert half_width(p, 4 * n, z) == pytest.approx(half_width(p, n, z) / 2, rel=1e-12, abs=1e-300)


# -- traces ------------------------------------------------------------------


def test_fair_die_trace_tracks_standard_error():
    records = run_trials(FAIR, 100_000, SeedSpec(4))
    trace = frequency_trace(records, checkpoints=[1000, 10_000, 100_000])
    se = np.sqrt((1 / 6) * (5 / 6) / trace.checkpoints)
    worst = np.max(np.abs(trace.frequencies - 1 / 6), axis=1)
    assert np.all(worst <= 4 * se)
    assert worst[-1] < worst[0]
    assert np.allclose(trace.frequencies.sum(axis=1), 1.0)


def test_trace_uses_prefix_only():
    labels = np.array([0] * 10 + [1] * 10)
    trace = frequency_trace(labels, COIN, checkpoints=[10, 20])
    assert trace.frequencies.tolist() == [[1.0, 0.0], [0.5, 0.5]]


def test_constant_trace():
    records = run_trials(make_deterministic_die(0), 20_000, SeedSpec(0))
    trace = frequency_trace(records)
    assert np.all(trace.frequencies == [1, 0, 0, 0, 0, 0])


def test_sublimating_trace_rises_with_expected_trajectory():
    n = 100_000
    records = run_trials(make_sublimating_die(total_drift=0.3, horizon=n), n, SeedSpec(5))
    cps = np.array([10_000, 25_000, 50_000, 75_000, 100_000])
    face0 = frequency_trace(records, checkpoints=cps).column(0)
    # running mean of a weight rising linearly from 1/6 by 0.3 over n trials
    expected = 1 / 6 + 0.3 * (cps - 1) / (2 * n)
    se = np.sqrt(expected * (1 - expected) / cps)
    assert np.all(np.abs(face0 - expected) <= 4 * se)
    assert np.all(np.diff(face0) > 0)


def test_default_schedule():
    cps = geometric_schedule(10_000, 1000)
    assert cps == [1000, 1500, 2250, 3375, 5063, 7594, 10_000]
    assert geometric_schedule(500, 1000) == [500]


def test_trace_csv():
    trace = frequency_trace(np.array([0, 1, 1]), COIN, checkpoints=[1, 3])
    assert trace.to_csv() == "n,heads,tails\n1,1,0\n3,0.333333333,0.666666667\n"


def test_trace_rejects_bad_checkpoints():
    with pytest.raises(ValueError):
        frequency_trace(np.array([0, 1]), COIN, checkpoints=[2, 1])
    with pytest.raises(ValueError):
        frequency_trace(np.array([0, 1]), COIN, checkpoints=[1, 3])
    with pytest.raises(EmptyInput):
        frequency_trace([], COIN)


# -- stabilization -----------------------------------------------------------


def test_fair_die_stabilizes():
    verdict = test_stabilization(run_trials(FAIR, 600_000, SeedSpec(6)))
    assert isinstance(verdict, Stabilizing)
    assert np.max(np.abs(verdict.estimates - 1 / 6)) <= 0.005
    assert math.isclose(verdict.estimates.sum(), 1.0)


def test_drifting_die_does_not_stabilize():
    n = 100_000
    verdict = test_stabilization(run_trials(make_sublimating_die(total_drift=0.3, horizon=n), n, SeedSpec(6)))
    assert isinstance(verdict, NonStabilizing)
    assert verdict.label == 0
    assert verdict.deviation > verdict.allowance
    lo, hi = verdict.block_pair
    assert lo == 0 and hi == 9


def test_small_n_inconclusive():
    verdict = test_stabilization(run_trials(FAIR, 500, SeedSpec(6)))
    assert isinstance(verdict, Inconclusive)
    assert verdict.n == 500


def test_block_rule_by_hand():
    # 2 blocks of 10 after no burn-in; block frequencies 0.8 / 0.2 vs pooled 0.5
    labels = np.array([0] * 8 + [1] * 2 + [0] * 2 + [1] * 8)
    cfg = StabilizationConfig(blocks=2, burn_in=0.0, z=1.0, min_n=1)
    verdict = test_stabilization(labels, COIN, cfg)
    # allowance = 1 * sqrt(0.25 / 10) = 0.158 < 0.3
    assert isinstance(verdict, NonStabilizing)
    assert verdict.deviation == pytest.approx(0.3)
    assert verdict.allowance == pytest.approx(math.sqrt(0.025))
    loose = StabilizationConfig(blocks=2, burn_in=0.0, z=1.0, eps_abs=0.2, min_n=1)
    assert isinstance(test_stabilization(labels, COIN, loose), Stabilizing)


def test_config_ranges():
    for bad in (dict(blocks=1), dict(burn_in=1.0), dict(z=0), dict(eps_abs=-1), dict(min_n=0)):
        with pytest.raises(ValueError):
            StabilizationConfig(**bad)


def test_false_alarms_rare():
    hits = sum(
        isinstance(test_stabilization(run_trials(FAIR, 100_000, SeedSpec(1000 + r))), Stabilizing)
        for r in range(200)
    )
    assert hits >= 195


def test_drift_always_caught():
    n = 100_000
    die = make_sublimating_die(total_drift=0.3, horizon=n)
    assert all(
        isinstance(test_stabilization(run_trials(die, n, SeedSpec(2000 + r))), NonStabilizing)
        for r in range(200)
    )


# -- predictability and classes ----------------------------------------------


def test_predictor_constant():
    assert predictor_accuracy(np.zeros(100, dtype=int)) == 1.0


def test_predictor_iid_coin():
    assert abs(predictor_accuracy(coin_flips(100_000)) - 0.5) <= 0.01


def test_predictor_period_three():
    seq = np.tile([0, 1, 2], 400)
    assert predictor_accuracy(seq, PredictorConfig(order=2)) == 1.0


def test_predictor_needs_test_records():
    with pytest.raises(TooFewRecords):
        predictor_accuracy(np.zeros(15, dtype=int))


def test_predictor_ties_go_low():
    # context (1,) is followed by 0 and by 2 equally often in training
    seq = np.array([1, 0, 1, 2] * 10 + [1, 2] * 10)
    acc = predictor_accuracy(seq, PredictorConfig(order=1, train_fraction=40 / 60))
    # every test pair "1 -> 2" is mispredicted as 0; "2 -> 1" is learned
    assert acc == pytest.approx(10 / 20)


def test_classify_fair_coin():
    assert classify_randomness(coin_flips(100_000), COIN) is RandomnessClass.P_RANDOM


def test_classify_alternating():
    seq = np.tile([0, 1], 50_000)
    verdict = test_stabilization(seq, COIN)
    assert isinstance(verdict, Stabilizing)
    assert np.allclose(verdict.estimates, [0.5, 0.5])
    assert classify_randomness(seq, COIN) is RandomnessClass.DETERMINISTIC


def test_classify_constant():
    assert classify_randomness(np.zeros(5000, dtype=int), COIN) is RandomnessClass.DETERMINISTIC


def test_classify_walk():
    n = 100_000
    records = run_trials(make_nonstationary_walk(horizon=n), n, SeedSpec(9))
    assert classify_randomness(records) is RandomnessClass.NON_P_RANDOM


def test_classify_small_n_is_not_a_class():
    with pytest.raises(InconclusiveError) as err:
        classify_randomness(np.zeros(500, dtype=int), COIN)
    assert isinstance(err.value.verdict, Inconclusive)


def test_iid_sequences_classify_p_random():
    hits = sum(
        classify_randomness(coin_flips(100_000, seed=r), COIN) is RandomnessClass.P_RANDOM
        for r in range(200)
    )
    assert hits >= 195


@pytest.mark.parametrize("order", [1, 2, 3])
def test_structured_never_p_random(order):
    pred = PredictorConfig(order=order)
    for seq in (np.zeros(20_000, dtype=int), np.tile([0, 1], 10_000)):
        assert classify_randomness(seq, COIN, pred=pred) is not RandomnessClass.P_RANDOM


# -- densities ---------------------------------------------------------------


def test_uniform_density():
    dist = relative_frequencies(run_trials(uniform_system(0.0, 2.0, 4), 400_000, SeedSpec(10)))
    model = estimate_density(dist)
    # cell mass se ~ 0.0007, height = mass / 0.5
    assert np.allclose(model.heights, 0.5, atol=4 * 2 * math.sqrt(0.25 * 0.75 / 400_000))
    assert math.isclose(model.total_mass(), 1.0, abs_tol=1e-9)


def test_one_cell_density():
    space = ContinuousSpace(0.0, 2.0, 4)
    model = estimate_density(EmpiricalDistribution(space, [0, 10, 0, 0], 10))
    assert model.heights.tolist() == [0.0, 2.0, 0.0, 0.0]
    assert model.atoms == ()


def test_cube_density_matches_truncated_gaussian():
    n = 400_000
    dist = relative_frequencies(run_trials(make_cube_factory(CubeFactorySpec(), bins=16), n, SeedSpec(11)))
    model = estimate_density(dist)
    oracle = truncnorm(-4, 4, loc=1.0, scale=0.25)
    edges = dist.space.edges
    expected = np.diff(oracle.cdf(edges))
    se = np.sqrt(expected * (1 - expected) / n)
    assert np.all(np.abs(model.cell_masses() - expected) <= 4 * se + 1e-12)


def test_density_needs_continuous():
    with pytest.raises(WrongSpaceKind):
        estimate_density(EmpiricalDistribution(COIN, [1, 1], 2))


@settings(max_examples=100, deadline=None)
@given(
    counts=st.lists(st.integers(0, 10**6), min_size=1, max_size=80).filter(lambda c: sum(c) > 0),
    lo=st.floats(-100, 100),
    span=st.floats(0.01, 1000),
)
def test_density_consistency(counts, lo, span):
    space = ContinuousSpace(lo, lo + span, len(counts))
    dist = EmpiricalDistribution(space, counts, sum(counts))
    model = estimate_density(dist)
    assert abs(model.total_mass() - 1.0) <= 1e-9
    edges = space.edges
    for k in range(len(counts)):
        assert model.integrate(edges[k], edges[k + 1]) == pytest.approx(dist.frequencies[k], rel=1e-12, abs=1e-15)


def test_density_model_rejects_bad_mass():
    with pytest.raises(ValueError):
        DensityModel(atoms=((0.0, 0.5),))
