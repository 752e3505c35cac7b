import itertools

import numpy as np
import pytest

from fkpoisson import oracle
from fkpoisson.fk import FREE, WIRED, FKParams, ResourceCapError
from fkpoisson.lattice import Box

CHAIN4 = Box((0,), (4,))
CHAIN6 = Box((0,), (6,))


def chain_runs(bits):
    """Independent 1-d cluster oracle: clusters of a chain are the maximal
    runs of sites joined by open bonds."""
    k = len(bits) + 1
    runs = []
    start = 0
    for j, b in enumerate(bits):
        if not b:
            runs.append(list(range(start, j + 1)))
            start = j + 1
    runs.append(list(range(start, k)))
    return runs


def test_enumerate_normalization_and_z():
    for p, q in [(0.5, 2.0), (0.3, 1.0), (0.8, 1.5)]:
        dist = oracle.enumerate_measure(Box.cube(2, 2), FKParams(p, q))
        assert dist.probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.isfinite(dist.log_z)


def test_enumerate_single_bond():
    dist = oracle.enumerate_measure(Box((0,), (2,)), FKParams(0.5, 2.0))
    assert dist.probs[0] == pytest.approx(2.0 / 3.0)
    assert dist.probs[1] == pytest.approx(1.0 / 3.0)


def test_enumerate_q1_is_product():
    box = Box.cube(2, 2)
    p = 0.35
    dist = oracle.enumerate_measure(box, FKParams(p, 1.0))
    for i in range(dist.n_configs):
        k = int(i).bit_count()
        expect = p ** k * (1 - p) ** (box.n_bonds - k)
        assert abs(dist.probs[i] - expect) < 1e-12


def test_free_vs_wired_differ_but_normalize():
    box = Box.cube(2, 2)
    d_free = oracle.enumerate_measure(box, FKParams(0.5, 2.0, FREE))
    d_wired = oracle.enumerate_measure(box, FKParams(0.5, 2.0, WIRED))
    assert d_free.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert d_wired.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.abs(d_free.probs - d_wired.probs).max() > 1e-6


def test_enumerate_cap():
    big = Box.cube(2, 6)  # 60 bonds
    with pytest.raises(ResourceCapError):
        oracle.enumerate_measure(big, FKParams(0.5, 1.0))


def test_event_probability():
    dist = oracle.enumerate_measure(Box((0,), (2,)), FKParams(0.5, 2.0))
    assert oracle.event_probability(dist, lambda c: True) == pytest.approx(1.0)
    assert oracle.event_probability(dist, lambda c: False) == 0.0
    open_prob = oracle.event_probability(dist, lambda c: c.state[0] == 1)
    assert open_prob == pytest.approx(1.0 / 3.0)


def test_point_law_n_too_large_is_zero_field():
    dist = oracle.enumerate_measure(CHAIN4, FKParams(0.5, 1.0))
    law = oracle.exact_point_process_law(dist, n=9)
    assert set(law.table) == {oracle._pattern_key(np.zeros(4, dtype=bool))}


def test_point_law_all_finite_surrogate_deterministic():
    box = Box((0,), (3,))
    dist = oracle.enumerate_measure(box, FKParams(1.0, 1.0))
    law = oracle.exact_point_process_law(dist, n=1, surrogate="all")
    assert len(law.table) == 1
    (key, prob), = law.table.items()
    assert prob == pytest.approx(1.0)
    assert list(law.unpack(key).astype(int)) == [0, 1, 0]  # center of 0,1,2


def test_point_law_chain4_vs_independent_runs():
    p, n = 0.5, 2
    dist = oracle.enumerate_measure(CHAIN4, FKParams(p, 1.0))
    law = oracle.exact_point_process_law(dist, n)
    table = {}
    for bits in itertools.product((0, 1), repeat=3):
        prob = np.prod([p if b else 1 - p for b in bits])
        field = np.zeros(4, dtype=bool)
        for run in chain_runs(bits):
            touches = 0 in run or 3 in run
            if not touches and len(run) >= n:
                field[int(np.floor(np.mean(run)))] = True
        key = oracle._pattern_key(field)
        table[key] = table.get(key, 0.0) + float(prob)
    assert set(table) == set(law.table)
    for k in table:
        assert law.table[k] == pytest.approx(table[k], abs=1e-12)


def test_exact_tv_trivial_and_forms_agree():
    dist = oracle.enumerate_measure(CHAIN6, FKParams(0.5, 1.0))
    law = oracle.exact_point_process_law(dist, 2)
    assert oracle.exact_tv(law, law) == 0.0
    px = oracle.exact_px_field(dist, 2)
    prod = oracle.product_law(px, CHAIN6)
    tv = oracle.exact_tv(law, prod)
    assert 0.0 < tv < 2.0
    assert oracle.tv_sup_form(law, prod) == pytest.approx(tv, abs=1e-12)
    # point masses on distinct patterns are at distance 2
    a = oracle.PatternLaw(CHAIN4, 1, "plain",
                          {oracle._pattern_key(np.array([1, 0, 0, 0], bool)): 1.0})
    b = oracle.PatternLaw(CHAIN4, 1, "plain",
                          {oracle._pattern_key(np.array([0, 1, 0, 0], bool)): 1.0})
    assert oracle.exact_tv(a, b) == pytest.approx(2.0)
    assert oracle.tv_sup_form(a, b) == pytest.approx(2.0)


def test_exact_tv_mismatched_spaces():
    d4 = oracle.enumerate_measure(CHAIN4, FKParams(0.5, 1.0))
    d6 = oracle.enumerate_measure(CHAIN6, FKParams(0.5, 1.0))
    with pytest.raises(ValueError):
        oracle.exact_tv(oracle.exact_point_process_law(d4, 2),
                        oracle.exact_point_process_law(d6, 2))


def test_marginal_consistency():
    # exact p_x from the pattern law equals the configuration-level event
    dist = oracle.enumerate_measure(CHAIN6, FKParams(0.6, 1.5))
    law = oracle.exact_point_process_law(dist, 2)
    px = oracle.exact_px_field(dist, 2)
    for i in range(CHAIN6.n_sites):
        assert law.marginal(i) == pytest.approx(px[i], abs=1e-12)


def test_conjecture7_trivial_cases():
    params = FKParams(0.5, 1.0)
    res = oracle.conjecture7_check(CHAIN6, params, n=99, x=(1,), y=(4,))
    assert res.lhs == 0.0 and res.holds
    res = oracle.conjecture7_check(CHAIN6, params, n=2, x=(2,), y=(2,))
    assert res.lhs == 0.0  # same site: clusters cannot be disjoint


def test_conjecture7_exhaustive_value():
    # 1x6 chain: lhs by independent run enumeration
    p, n = 0.5, 2
    params = FKParams(p, 1.0)
    res = oracle.conjecture7_check(CHAIN6, params, n=n, x=(1,), y=(4,))
    lhs = 0.0
    rhs = 0.0
    for bits in itertools.product((0, 1), repeat=5):
        prob = float(np.prod([p if b else 1 - p for b in bits]))
        runs = chain_runs(bits)
        def run_of(site):
            return next(r for r in runs if site in r)
        rx, ry = run_of(1), run_of(4)
        okx = 0 not in rx and 5 not in rx and len(rx) >= n
        oky = 0 not in ry and 5 not in ry and len(ry) >= n
        if rx != ry and okx and oky:
            lhs += prob
        rz = run_of(2)  # center site of the 6-chain
        if 0 not in rz and 5 not in rz and len(rz) >= 2 * n:
            rhs += prob
    assert res.lhs == pytest.approx(lhs, abs=1e-12)
    assert res.rhs == pytest.approx(rhs, abs=1e-12)


def test_ratio_mixing_product_measure_is_zero():
    box = Box((0,), (8,))
    dist = oracle.enumerate_measure(box, FKParams(0.7, 1.0))
    r = oracle.exact_ratio_mixing(dist, [box.bonds[0]], [box.bonds[6]])
    assert r < 1e-12


def test_ratio_mixing_empty_region():
    box = Box((0,), (6,))
    dist = oracle.enumerate_measure(box, FKParams(0.7, 2.0))
    assert oracle.exact_ratio_mixing(dist, [], [box.bonds[0]]) == 0.0


def test_ratio_mixing_overlap_errors():
    box = Box((0,), (6,))
    dist = oracle.enumerate_measure(box, FKParams(0.7, 2.0))
    with pytest.raises(ValueError):
        oracle.exact_ratio_mixing(dist, [box.bonds[0]], [box.bonds[0]])


def test_ratio_mixing_decreases_on_ladder():
    # the one-dimensional chain with free boundary is a tree, where the
    # measure factorizes and every coefficient vanishes; the 2-row ladder
    # is the smallest strip with genuine dependence
    box = Box((0, 0), (2, 5))
    dist = oracle.enumerate_measure(box, FKParams(0.7, 2.0))
    rungs = [b for b in box.bonds if b[0][1] == b[1][1]]
    coefs = [oracle.exact_ratio_mixing(dist, [rungs[0]], [rungs[j]])
             for j in (1, 2, 3, 4)]
    assert all(c > 0 for c in coefs)
    assert coefs == sorted(coefs, reverse=True)


def test_ratio_mixing_brute_force_small():
    # brute-force over all event pairs on two 2-bond regions
    box = Box((0, 0), (2, 4))
    dist = oracle.enumerate_measure(box, FKParams(0.6, 2.0))
    r1 = [box.bond_index[b] for b in box.bonds[:2]]
    r2 = [box.bond_index[b] for b in box.bonds[-2:]]
    got = oracle.exact_ratio_mixing(dist, r1, r2)
    idx = np.arange(dist.n_configs)
    best = 0.0
    for e_mask in range(1, 16):
        in_e = np.zeros(dist.n_configs, dtype=bool)
        for atom in range(4):
            if (e_mask >> atom) & 1:
                sel = ((idx >> r1[0]) & 1) == (atom & 1)
                sel &= ((idx >> r1[1]) & 1) == ((atom >> 1) & 1)
                in_e |= sel
        pe = dist.probs[in_e].sum()
        if pe == 0:
            continue
        for f_mask in range(1, 16):
            in_f = np.zeros(dist.n_configs, dtype=bool)
            for atom in range(4):
                if (f_mask >> atom) & 1:
                    sel = ((idx >> r2[0]) & 1) == (atom & 1)
                    sel &= ((idx >> r2[1]) & 1) == ((atom >> 1) & 1)
                    in_f |= sel
            pf = dist.probs[in_f].sum()
            if pf == 0:
                continue
            pef = dist.probs[in_e & in_f].sum()
            best = max(best, abs(pef / (pe * pf) - 1.0))
    assert got == pytest.approx(best, abs=1e-10)


def test_sample_exact_matches_distribution():
    dist = oracle.enumerate_measure(CHAIN4, FKParams(0.5, 2.0))
    states = oracle.sample_exact(dist, 20000, seed=3)
    weights = 1 << np.arange(3)
    idx = states @ weights
    freq = np.bincount(idx, minlength=8) / len(idx)
    assert np.abs(freq - dist.probs).sum() < 0.02
