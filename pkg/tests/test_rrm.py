import itertools
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_gains
from d2dpredict.propagation import compute_gain_matrices
from d2dpredict.rrm import (Allocation, Mode, PowerDecision, RrmConfig, allocate_channels_greedy,
                            binary_power_control_greedy, dbm_to_w, pair_capacities, pair_capacity,
                            signaling_overhead, sum_capacity)
from d2dpredict.scenario import AreaConfig, Environment, generate_scenario

SHARED = RrmConfig()
DEDICATED = RrmConfig(mode=Mode.DEDICATED)


def shannon(bw, signal_w, noise_dbm_hz, interference_w=0.0):
    noise = bw * 10 ** ((noise_dbm_hz - 30) / 10)
    return bw * math.log2(1 + signal_w / (noise + interference_w))


def test_single_pair_reference():
    g = make_gains([1e-8])
    c = sum_capacity(g, Allocation(np.array([0]), np.zeros(0, int)), None, SHARED)
    assert c == pytest.approx(3.65e7, rel=2e-3)
    assert c == pytest.approx(shannon(2e6, 10 ** (-0.6) * 1e-8, -174.0), rel=1e-12)


def test_vanishing_direct_gain():
    g = make_gains([1e-30])
    assert sum_capacity(g, None, None, DEDICATED) < 1e-6


def test_zero_pairs():
    assert sum_capacity(make_gains([]), None, None, DEDICATED) == 0.0


def test_co_channel_and_cue_interference_oracle():
    direct = [1e-8, 2e-9, 5e-9]
    cross = np.array([[0, 3e-11, 1e-12], [4e-12, 0, 6e-11], [2e-11, 7e-12, 0]])
    cue = np.array([[1e-11, 2e-12, 3e-12], [4e-12, 5e-11, 6e-13]])
    cfg = RrmConfig(n_channels=2)
    g = make_gains(direct, cross, cue)
    alloc = Allocation(np.array([0, 0, 1]), np.array([0, 1]))
    p = [24.0, 10.0, 1.0]
    caps = pair_capacities(g, alloc, PowerDecision(np.array(p)), cfg)
    pw = [10 ** ((x - 30) / 10) for x in p]
    pc = 10 ** ((24.0 - 30) / 10)
    want = [
        shannon(2e6, pw[0] * direct[0], -174, pw[1] * cross[1, 0] + pc * cue[0, 0]),
        shannon(2e6, pw[1] * direct[1], -174, pw[0] * cross[0, 1] + pc * cue[0, 1]),
        shannon(2e6, pw[2] * direct[2], -174, pc * cue[1, 2]),
    ]
    assert np.allclose(caps, want, rtol=1e-12)
    assert pair_capacity(2, 1, g, alloc, PowerDecision(np.array(p)), cfg) == pytest.approx(want[2], rel=1e-12)
    assert pair_capacity(2, 0, g, alloc, PowerDecision(np.array(p)), cfg) == 0.0


def test_dedicated_mode_oracle():
    direct = [1e-8, 3e-9]
    cross = np.array([[0, 1e-10], [2e-11, 0]])
    g = make_gains(direct, cross)
    caps = pair_capacities(g, None, PowerDecision(np.array([24.0, 1.0])), DEDICATED)
    p0, p1 = dbm_to_w(24.0), dbm_to_w(1.0)
    assert caps[0] == pytest.approx(shannon(20e6, p0 * 1e-8, -174, p1 * 2e-11), rel=1e-12)
    assert caps[1] == pytest.approx(shannon(20e6, p1 * 3e-9, -174, p0 * 1e-10), rel=1e-12)


def test_dominant_clean_channel_is_chosen():
    cfg = RrmConfig(n_channels=3, channel_bw_hz=2e6)
    cue = np.array([[1e-9], [1e-16], [1e-9]])
    alloc = allocate_channels_greedy(make_gains([1e-8], cue=cue), cfg)
    assert alloc.pair_channels.tolist() == [1]


def test_two_pairs_separate_when_sharing_hurts():
    cfg = RrmConfig(n_channels=2)
    cross = np.array([[0, 1e-8], [1e-8, 0]])
    cue = np.full((2, 2), 1e-16)
    g = make_gains([1e-8, 1e-8], cross, cue)
    alloc = allocate_channels_greedy(g, cfg)
    assert alloc.pair_channels[0] != alloc.pair_channels[1]
    best = max(sum_capacity(g, Allocation(np.array(c), np.arange(2)), None, cfg)
               for c in itertools.product(range(2), repeat=2))
    assert sum_capacity(g, alloc, None, cfg) == pytest.approx(best, rel=1e-12)


def test_allocation_never_worse_than_all_on_one_channel():
    area = AreaConfig(environment=Environment.URBAN, n_pairs=6, n_cues=10)
    for seed in range(10):
        g = compute_gain_matrices(generate_scenario(area, seed))
        alloc = allocate_channels_greedy(g, SHARED)
        assert np.all((alloc.pair_channels >= 0) & (alloc.pair_channels < 10))
        base = max(sum_capacity(g, Allocation(np.full(6, k), np.arange(10)), None, SHARED) for k in range(10))
        assert sum_capacity(g, alloc, None, SHARED) >= base * (1 - 1e-12)


def test_allocation_requires_one_cue_per_channel():
    with pytest.raises(ValueError):
        allocate_channels_greedy(make_gains([1e-8], cue=np.ones((3, 1)) * 1e-12), SHARED)
    with pytest.raises(ValueError):
        allocate_channels_greedy(make_gains([1e-8]), DEDICATED)


def test_power_control_single_pair_stays_high():
    assert binary_power_control_greedy(make_gains([1e-9]), DEDICATED).powers_dbm.tolist() == [24.0]


def test_power_control_far_pairs_stay_high():
    g = make_gains([1e-8, 2e-9], np.full((2, 2), 1e-25))
    assert binary_power_control_greedy(g, DEDICATED).powers_dbm.tolist() == [24.0, 24.0]


def test_power_control_switches_off_a_strong_interferer():
    cross = np.array([[0, 1e-7], [1e-13, 0]])
    g = make_gains([1e-8, 1e-8], cross)
    decision = binary_power_control_greedy(g, DEDICATED)
    options = {levels: sum_capacity(g, None, PowerDecision(np.array(levels)), DEDICATED)
               for levels in itertools.product((1.0, 24.0), repeat=2)}
    assert tuple(decision.powers_dbm) == max(options, key=options.get) == (24.0, 1.0)


def test_power_control_between_baseline_and_brute_force():
    area = AreaConfig(environment=Environment.URBAN, n_cues=0)
    for N in (1, 2, 3, 4):
        for seed in range(25):
            g = compute_gain_matrices(generate_scenario(replace(area, n_pairs=N), 1000 * N + seed))
            greedy = sum_capacity(g, None, binary_power_control_greedy(g, DEDICATED), DEDICATED)
            all_max = sum_capacity(g, None, None, DEDICATED)
            best = max(sum_capacity(g, None, PowerDecision(np.array(levels, dtype=float)), DEDICATED)
                       for levels in itertools.product((1.0, 24.0), repeat=N))
            assert all_max <= greedy <= best


def test_power_control_requires_dedicated_mode():
    with pytest.raises(ValueError):
        binary_power_control_greedy(make_gains([1e-8]), SHARED)


gain = st.floats(1e-14, 1e-6)


@settings(max_examples=60, deadline=None)
@given(st.lists(gain, min_size=2, max_size=2), st.lists(gain, min_size=4, max_size=4),
       st.lists(gain, min_size=4, max_size=4), st.floats(-3.0, 3.0))
def test_capacity_invariant_to_common_scale(direct, cross, cue, log_c):
    cfg = RrmConfig(n_channels=2)
    c = 10.0 ** log_c
    g = make_gains(direct, np.array(cross).reshape(2, 2), np.array(cue).reshape(2, 2))
    gs = g.scaled(c)
    cfg_s = replace(cfg, noise_density_dbm_hz=cfg.noise_density_dbm_hz + 10 * log_c)
    alloc = Allocation(np.array([0, 0]), np.arange(2))
    a = pair_capacities(g, alloc, None, cfg)
    b = pair_capacities(gs, alloc, None, cfg_s)
    assert np.allclose(a, b, rtol=1e-9)


def test_overhead_reference_values():
    ov = signaling_overhead(3, 10, 10, Mode.SHARED)
    assert tuple(ov) == (670, 90, 580)
    assert ov.ratio == pytest.approx(7.444, abs=1e-3)
    assert tuple(signaling_overhead(3, 2, 10, "dedicated")) == (24, 12, 12)
    assert tuple(signaling_overhead(3, 0, 10)) == (30, 30, 0)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(0, 12), st.integers(0, 12))
def test_overhead_matches_link_count(L, N, M):
    # ordered DUE-DUE links plus one link per (CUE, DUE) pair
    ues = 2 * N + M
    d2d_links = sum(1 for i in range(2 * N) for j in range(2 * N) if i != j)
    d2d_links += sum(1 for m in range(2 * N, ues) for i in range(2 * N))
    ov = signaling_overhead(L, N, M)
    assert ov.cellular == L * ues
    assert ov.reduction == d2d_links
    assert ov.total == ov.cellular + ov.reduction


def test_overhead_ratio_grows_with_pairs():
    ratios = [signaling_overhead(3, n, 10).ratio for n in range(1, 11)]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))


def test_config_validation():
    with pytest.raises(ValueError):
        RrmConfig(n_channels=20)
    with pytest.raises(ValueError):
        RrmConfig(p_min_dbm=30.0)
    with pytest.raises(ValueError):
        signaling_overhead(-1, 2, 3)
