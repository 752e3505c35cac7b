import itertools
import math

import numpy as np
import pytest

from fkpoisson.fk import (FREE, WIRED, BondConfig, BoundaryCondition,
                          FKParams, cluster_count, config_from_bytes,
                          config_to_bytes, finite_energy_floor,
                          heatbath_step, log_weight, sample, sample_states,
                          swendsen_wang_step, weight)
from fkpoisson.lattice import Box

SINGLE = Box((0,), (2,))


def all_configs(box):
    for bits in itertools.product((0, 1), repeat=box.n_bonds):
        yield BondConfig(box, np.array(bits, dtype=np.uint8))


def test_cluster_count_examples():
    b33 = Box.cube(2, 3)
    assert cluster_count(BondConfig.all_closed(b33), FREE) == 9
    assert cluster_count(BondConfig.all_open(b33), FREE) == 1
    assert cluster_count(BondConfig.all_open(b33), WIRED) == 1
    # wired merges the 8 boundary sites; the center stays separate
    assert cluster_count(BondConfig.all_closed(b33), WIRED) == 2
    # cross-check against a hand identification plus component search
    merged = cluster_count(
        BondConfig.all_closed(b33),
        BoundaryCondition.partition([set(b33.boundary)]))
    assert merged == 2


def test_partition_validation():
    b22 = Box.cube(2, 2)
    bad = BoundaryCondition.partition([{(0, 0)}])  # does not cover
    with pytest.raises(ValueError):
        cluster_count(BondConfig.all_open(b22), bad)


def test_weight_single_bond():
    params = FKParams(0.5, 2.0)
    assert weight(BondConfig.all_open(SINGLE), params) == pytest.approx(1.0)
    assert weight(BondConfig.all_closed(SINGLE), params) == pytest.approx(2.0)


def test_weight_extreme_p():
    params = FKParams(1.0, 2.0)
    assert log_weight(BondConfig.all_closed(SINGLE), params) == -math.inf
    assert log_weight(BondConfig.all_open(SINGLE), params) > -math.inf


def test_weight_one_flip_ratio_matches_recount():
    box = Box.cube(2, 2)
    params = FKParams(0.3, 1.7)
    rng = np.random.default_rng(5)
    for _ in range(20):
        state = (rng.random(box.n_bonds) < 0.5).astype(np.uint8)
        cfg = BondConfig(box, state)
        i = int(rng.integers(box.n_bonds))
        flipped = cfg.copy()
        flipped.state[i] ^= 1
        lr = log_weight(flipped, params) - log_weight(cfg, params)
        dcl = cluster_count(flipped, FREE) - cluster_count(cfg, FREE)
        sign = 1 if flipped.state[i] else -1
        expect = sign * math.log(params.p / (1 - params.p)) + dcl * math.log(params.q)
        assert lr == pytest.approx(expect, abs=1e-12)


def test_finite_energy_floor_values_and_guarantee():
    assert finite_energy_floor(FKParams(0.5, 1.0)) == pytest.approx(1.0)
    # direct case analysis over both flip directions and both cluster-count
    # changes gives min(p/( (1-p) q ), (1-p)/p) >= the quoted floor
    assert finite_energy_floor(FKParams(0.5, 2.0)) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        finite_energy_floor(FKParams(1.0, 2.0))
    box = Box.cube(2, 2)
    for p, q in [(0.3, 1.0), (0.5, 2.0), (0.8, 3.5)]:
        params = FKParams(p, q)
        delta = finite_energy_floor(params)
        for cfg in all_configs(box):
            for i in range(box.n_bonds):
                other = cfg.copy()
                other.state[i] ^= 1
                ratio = math.exp(log_weight(cfg, params)
                                 - log_weight(other, params))
                assert ratio >= delta - 1e-12


def exact_open_probability(box, params, bond_idx, state):
    """Conditional P(bond open | rest) from the two weights."""
    o = state.copy(); o[bond_idx] = 1
    c = state.copy(); c[bond_idx] = 0
    wo = weight(BondConfig(box, o), params)
    wc = weight(BondConfig(box, c), params)
    return wo / (wo + wc)


def test_heatbath_conditional_law():
    params = FKParams(0.5, 2.0)
    # single bond, free: exact enumeration gives open probability 1/3
    p_open = exact_open_probability(SINGLE, params, 0,
                                    np.zeros(1, dtype=np.uint8))
    assert p_open == pytest.approx(1.0 / 3.0)
    cfg = BondConfig.all_closed(SINGLE)
    assert heatbath_step(cfg, params, SINGLE.bonds[0], 0.33).state[0] == 1
    assert heatbath_step(cfg, params, SINGLE.bonds[0], 0.34).state[0] == 0

    # q = 1: open probability is p regardless of connectivity
    params1 = FKParams(0.7, 1.0)
    box = Box.cube(2, 2)
    for cfg in all_configs(box):
        for i in range(box.n_bonds):
            assert exact_open_probability(box, params1, i, cfg.state) \
                == pytest.approx(0.7)

    # endpoints joined by an open detour: probability p
    box = Box.cube(2, 2)
    params = FKParams(0.6, 3.0)
    detour = BondConfig.all_open(box)
    i = 0
    detour.state[i] = 0
    assert exact_open_probability(box, params, i, detour.state) \
        == pytest.approx(0.6)


def test_heatbath_detailed_balance():
    # heat-bath conditional probabilities equal the exact weight ratios on
    # every single-bond flip of every configuration
    box = Box.cube(2, 2)
    params = FKParams(0.45, 1.6)
    for cfg in all_configs(box):
        for i in range(box.n_bonds):
            p_exact = exact_open_probability(box, params, i, cfg.state)
            hi = heatbath_step(cfg, params, box.bonds[i], p_exact - 1e-9)
            lo = heatbath_step(cfg, params, box.bonds[i], p_exact + 1e-9)
            assert hi.state[i] == 1 and lo.state[i] == 0


def test_swendsen_wang_q1_is_product():
    box = Box.cube(2, 3)
    params = FKParams(0.4, 1.0)
    rng = np.random.default_rng(11)
    start = BondConfig.all_closed(box)
    hits = np.zeros(box.n_bonds)
    n = 4000
    for _ in range(n):
        out = swendsen_wang_step(start, params, rng)
        hits += out.state
    freq = hits / n
    se = math.sqrt(0.4 * 0.6 / n)
    assert np.all(np.abs(freq - 0.4) < 4 * se)


def test_swendsen_wang_p1_rebonds_everything():
    box = Box.cube(2, 2)
    params = FKParams(1.0, 2.0)
    rng = np.random.default_rng(0)
    out = swendsen_wang_step(BondConfig.all_open(box), params, rng)
    assert out.open_count() == box.n_bonds


def test_swendsen_wang_requires_integer_q():
    with pytest.raises(ValueError):
        swendsen_wang_step(BondConfig.all_open(SINGLE), FKParams(0.5, 1.5),
                           np.random.default_rng(0))


def test_sample_deterministic():
    box = Box.cube(2, 3)
    a = sample(FKParams(0.5, 2.0), box, sweeps=20, seed=42)
    b = sample(FKParams(0.5, 2.0), box, sweeps=20, seed=42)
    assert a == b
    c = sample(FKParams(0.5, 1.5), box, sweeps=5, seed=7)
    d = sample(FKParams(0.5, 1.5), box, sweeps=5, seed=7)
    assert c == d


def test_bond_marginal_monotone_in_p():
    box = Box.cube(2, 2)
    means = []
    for p in (0.3, 0.5, 0.7, 0.9):
        states = sample_states(FKParams(p, 2.0), box, 1500, thinning=3,
                               burn_in=100, seed=123)
        means.append(states[:, 0].mean())
    ses = [math.sqrt(m * (1 - m) / 1500 + 1e-9) for m in means]
    for i in range(len(means) - 1):
        assert means[i + 1] > means[i] - 3 * (ses[i] + ses[i + 1])


def test_serialization_roundtrip():
    box = Box((-1, 2), (3, 2))
    params = FKParams(0.37, 2.5, WIRED)
    rng = np.random.default_rng(9)
    cfg = BondConfig(box, (rng.random(box.n_bonds) < 0.5).astype(np.uint8))
    blob = config_to_bytes(cfg, params, seed=99, sweep_index=5)
    cfg2, params2, meta = config_from_bytes(blob)
    assert cfg2 == cfg
    assert params2.p == params.p and params2.q == params.q
    assert params2.boundary.kind == "wired"
    assert meta == {"seed": 99, "sweep_index": 5}

    part = BoundaryCondition.partition(
        [{s for s in box.boundary if s[0] < 1},
         {s for s in box.boundary if s[0] >= 1}])
    blob = config_to_bytes(cfg, FKParams(0.2, 1.0, part))
    cfg3, params3, _ = config_from_bytes(blob)
    assert cfg3 == cfg
    assert params3.boundary.kind == "partition"
    assert cluster_count(cfg, params3.boundary) \
        == cluster_count(cfg, part)


def test_params_validation():
    with pytest.raises(ValueError):
        FKParams(1.2, 1.0)
    with pytest.raises(ValueError):
        FKParams(0.5, 0.5)
