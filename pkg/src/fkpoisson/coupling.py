"""Two independent chains, site coloring, and boundary-influence probes.

Running two independent samples (possibly under different boundary
conditions) on the same box, a site is white when every incident in-box
bond is open in both samples, black otherwise.  The black star-cluster
grown from the box boundary, together with its interior boundary D, either
reaches the probe region Gamma or exposes a white separating layer; the
event K that it misses Gamma forces the two samples to agree in law on
Gamma, so 1 - P(K) bounds any boundary-condition influence there.

Boundary sites are colored from in-box bonds only: the out-of-box bonds do
not exist in the finite setting, and reports flag this reading.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fk import BondConfig, BoundaryCondition, FKParams, sample_states
from .lattice import Box, Site, set_distance, star_neighbors


@dataclass
class Coloring:
    box: Box
    white: np.ndarray  # bool per site

    def is_white(self, x: Site) -> bool:
        return bool(self.white[self.box.site_index(x)])


def color_sites(c1: BondConfig, c2: BondConfig) -> Coloring:
    """White iff every incident in-box bond is open in both configurations;
    symmetric in the two arguments."""
    if c1.box != c2.box:
        raise ValueError("configurations live on different boxes")
    box = c1.box
    both = (c1.state & c2.state).astype(bool)
    white = np.ones(box.n_sites, dtype=bool)
    bs = box.bond_sites
    bad = ~both
    np.logical_and.at(white, bs[bad, 0], False)
    np.logical_and.at(white, bs[bad, 1], False)
    return Coloring(box, white)


def black_cluster(coloring: Coloring, v_sites) -> frozenset[Site]:
    """V together with every black site joined to V by a star-path through
    black sites."""
    box = coloring.box
    v_sites = set(v_sites)
    for s in v_sites:
        if not box.contains(s):
            raise ValueError(f"seed site {s} outside the box")
    out = set(v_sites)
    stack = list(v_sites)
    while stack:
        x = stack.pop()
        for y in star_neighbors(x):
            if y in out or not box.contains(y):
                continue
            if not coloring.white[box.site_index(y)]:
                out.add(y)
                stack.append(y)
    return frozenset(out)


def _reachable_avoiding(box: Box, blocked: frozenset[Site], targets) -> set[Site]:
    """Sites with an ordinary path to the target set avoiding blocked sites."""
    seeds = [t for t in targets if t not in blocked and box.contains(t)]
    seen = set(seeds)
    stack = list(seeds)
    while stack:
        x = stack.pop()
        for y in box.neighbors_in(x):
            if y not in seen and y not in blocked:
                seen.add(y)
                stack.append(y)
    return seen


def region_interior(coloring: Coloring, black: frozenset[Site],
                    gamma) -> frozenset[Site]:
    """Sites with an ordinary path to Gamma avoiding the black cluster."""
    return frozenset(_reachable_avoiding(coloring.box, black, gamma))


def interior_boundary(coloring: Coloring, black: frozenset[Site],
                      gamma) -> frozenset[Site]:
    """Sites outside the black cluster, star-adjacent to it, with an
    ordinary path to Gamma avoiding it."""
    box = coloring.box
    reach = _reachable_avoiding(box, black, gamma)
    out = set()
    for x in reach:
        if any(y in black for y in star_neighbors(x)):
            out.add(x)
    return frozenset(out)


@dataclass
class CouplingOutcome:
    box: Box
    gamma: frozenset[Site]
    coloring: Coloring
    black: frozenset[Site]
    interior_bd: frozenset[Site]
    interior: frozenset[Site]
    k: bool

    def to_dict(self) -> dict:
        return {
            "gamma": sorted(list(s) for s in self.gamma),
            "white_sites": sorted(
                list(s) for s in self.box.sites
                if self.coloring.white[self.box.site_index(s)]),
            "black_cluster": sorted(list(s) for s in self.black),
            "interior_boundary": sorted(list(s) for s in self.interior_bd),
            "k": self.k,
        }


def k_event(coloring: Coloring, gamma) -> bool:
    """(black cluster of the boundary, plus its interior boundary) misses
    Gamma."""
    outcome = analyze_pair_coloring(coloring, gamma)
    return outcome.k


def analyze_pair_coloring(coloring: Coloring, gamma) -> CouplingOutcome:
    box = coloring.box
    gamma = frozenset(gamma)
    if not gamma or not all(box.contains(g) for g in gamma):
        raise ValueError("Gamma must be a nonempty subset of the box")
    black = black_cluster(coloring, box.boundary)
    dbd = interior_boundary(coloring, black, gamma)
    interior = region_interior(coloring, black, gamma)
    k = not ((black | dbd) & gamma)
    return CouplingOutcome(box, gamma, coloring, black, dbd, interior, k)


def analyze_pair(c1: BondConfig, c2: BondConfig, gamma) -> CouplingOutcome:
    return analyze_pair_coloring(color_sites(c1, c2), gamma)


# ---------------------------------------------------------------------------
# structural facts that hold on the event K


def _connected(sites: frozenset[Site], neighbor_fn) -> bool:
    if len(sites) <= 1:
        return True
    start = next(iter(sites))
    seen = {start}
    stack = [start]
    while stack:
        x = stack.pop()
        for y in neighbor_fn(x):
            if y in sites and y not in seen:
                seen.add(y)
                stack.append(y)
    return len(seen) == len(sites)


@dataclass
class ClaimsCheck:
    k: bool
    d_connected_ordinary: bool
    d_connected_star: bool
    d_all_white: bool
    d_outside_determined: bool
    interior_bd_adjacent: bool

    @property
    def passed(self) -> bool:
        """Connectivity may hold in either notion; which one is recorded."""
        return (self.d_all_white and self.d_outside_determined
                and self.interior_bd_adjacent
                and (self.d_connected_ordinary or self.d_connected_star))


def check_claims(outcome: CouplingOutcome) -> ClaimsCheck:
    """Verify, on a K-outcome, the structural facts the coupling relies on:

    - D is connected (ordinary and star connectivity both tested);
    - every site of D is white;
    - D is determined by the colors outside the interior region I
      (recomputed with I forced white, nothing changes);
    - every boundary site of I is in D or ordinary-adjacent to D.
    """
    box = outcome.box
    d_set = outcome.interior_bd
    conn_o = _connected(d_set, lambda x: (y for y in box.neighbors_in(x)))
    conn_s = _connected(d_set, lambda x: (y for y in star_neighbors(x)
                                          if box.contains(y)))
    all_white = all(outcome.coloring.white[box.site_index(x)] for x in d_set)

    masked = outcome.coloring.white.copy()
    for x in outcome.interior:
        masked[box.site_index(x)] = True
    recolored = Coloring(box, masked)
    black2 = black_cluster(recolored, box.boundary)
    d2 = interior_boundary(recolored, black2, outcome.gamma)
    determined = (black2 == outcome.black) and (d2 == d_set)

    # boundary of I: sites of I with an in-box neighbor outside I (I never
    # reaches the box boundary, which is part of the black cluster)
    adj = True
    for x in outcome.interior:
        if all(y in outcome.interior for y in box.neighbors_in(x)):
            continue
        if x in d_set or any(y in d_set for y in box.neighbors_in(x)):
            continue
        adj = False
        break
    return ClaimsCheck(outcome.k, conn_o, conn_s, all_white, determined, adj)


# ---------------------------------------------------------------------------
# boundary-influence decay table


@dataclass
class InfluenceRow:
    gamma_label: str
    distance: int
    diff: float
    diff_se: float
    p_k: float
    p_k_se: float
    bound_ok: bool


@dataclass
class InfluenceTable:
    rows: list[InfluenceRow]
    c_hat: float
    fit_r2: float
    boundary_size: int
    event_name: str
    note: str = "boundary sites colored from in-box bonds only"

    def to_csv(self, fh) -> None:
        fh.write("gamma,distance,diff,diff_se,p_k,p_k_se,bound_ok\n")
        for r in self.rows:
            fh.write(f"{r.gamma_label},{r.distance},{r.diff:.8g},"
                     f"{r.diff_se:.3g},{r.p_k:.8g},{r.p_k_se:.3g},"
                     f"{int(r.bound_ok)}\n")
        fh.write(f"# c_hat={self.c_hat:.6g} r2={self.fit_r2:.4g} "
                 f"boundary={self.boundary_size} event={self.event_name}\n")


def influence_decay(params: FKParams, box: Box, gammas: list[tuple[str, set]],
                    eta: BoundaryCondition, xi: BoundaryCondition,
                    event, reps: int, thinning: int = 5,
                    burn_in: int | None = None, seed=0,
                    event_name: str = "event",
                    states: tuple | None = None) -> InfluenceTable:
    """Measured boundary-condition influence on an event supported in Gamma
    against the coupling bound 1 - P(K), for a shrinking schedule of Gamma.

    The same two sample sets (one per boundary condition) serve every row:
    neither the coloring nor the black cluster depends on Gamma.  Pass
    ``states`` to reuse pre-drawn (eta, xi) state matrices.
    """
    if states is not None:
        states_eta, states_xi = states
        reps = len(states_eta)
    else:
        if not isinstance(seed, np.random.SeedSequence):
            seed = np.random.SeedSequence(seed)
        ss = seed.spawn(2)
        states_eta = sample_states(FKParams(params.p, params.q, eta), box,
                                   reps, thinning, burn_in, ss[0])
        states_xi = sample_states(FKParams(params.p, params.q, xi), box,
                                  reps, thinning, burn_in, ss[1])
    ind_eta = np.array([event(BondConfig(box, s)) for s in states_eta], dtype=float)
    ind_xi = np.array([event(BondConfig(box, s)) for s in states_xi], dtype=float)

    colorings = [color_sites(BondConfig(box, a), BondConfig(box, b))
                 for a, b in zip(states_eta, states_xi)]
    blacks = [black_cluster(c, box.boundary) for c in colorings]

    rows = []
    for label, gamma in gammas:
        gamma = frozenset(gamma)
        ks = np.array([
            not ((b | interior_boundary(c, b, gamma)) & gamma)
            for c, b in zip(colorings, blacks)], dtype=float)
        p_k = float(ks.mean())
        p_k_se = float(ks.std(ddof=1) / math.sqrt(reps))
        diff = abs(float(ind_eta.mean() - ind_xi.mean()))
        se = math.sqrt(ind_eta.var(ddof=1) / reps + ind_xi.var(ddof=1) / reps)
        dist = set_distance(gamma, box.boundary)
        bound_ok = diff <= (1.0 - p_k) + 3.0 * math.sqrt(se ** 2 + p_k_se ** 2)
        rows.append(InfluenceRow(label, dist, diff, se, p_k, p_k_se, bound_ok))

    c_hat, r2 = _fit_fixed_intercept(rows, 2 * len(box.boundary))
    return InfluenceTable(rows, c_hat, r2, len(box.boundary),
                          event_name)


def _fit_fixed_intercept(rows, amplitude: float) -> tuple[float, float]:
    """Least squares of ln diff = ln(amplitude) - c * distance; zero-valued
    differences are dropped."""
    pts = [(r.distance, r.diff) for r in rows if r.diff > 0]
    if len(pts) < 2:
        return float("nan"), float("nan")
    d = np.array([p[0] for p in pts], dtype=float)
    y = np.array([math.log(p[1]) for p in pts])
    target = math.log(amplitude) - y
    c = float((d @ target) / (d @ d))
    resid = y - (math.log(amplitude) - c * d)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else float("nan")
    return c, r2


# ---------------------------------------------------------------------------
# empirical mixing-coefficient scan


@dataclass
class MixingRow:
    separation: int
    weak: float          # max |P(E|F) - P(E)| over single-bond cylinders
    weak_se: float
    ratio: float         # max |P(EF)/(P(E)P(F)) - 1|
    ratio_se: float
    skipped: bool = False


@dataclass
class MixingTable:
    rows: list[MixingRow]
    mu_hat: float
    mu1_hat: float
    event_family: str = "single-bond cylinders"

    def to_csv(self, fh) -> None:
        fh.write("separation,weak,weak_se,ratio,ratio_se,skipped\n")
        for r in self.rows:
            fh.write(f"{r.separation},{r.weak:.8g},{r.weak_se:.3g},"
                     f"{r.ratio:.8g},{r.ratio_se:.3g},{int(r.skipped)}\n")
        fh.write(f"# mu_hat={self.mu_hat:.6g} mu1_hat={self.mu1_hat:.6g} "
                 f"family={self.event_family}\n")


def _pair_coefficients(col_e: np.ndarray, col_f: np.ndarray):
    """Weak and ratio deviations with delta-method errors for one pair of
    binary columns, maximized over the four open/closed cylinder pairs."""
    n = len(col_e)
    best = {"weak": (0.0, 0.0), "ratio": (0.0, 0.0)}
    usable = False
    for se_open in (True, False):
        e = col_e if se_open else 1 - col_e
        for sf_open in (True, False):
            f = col_f if sf_open else 1 - col_f
            pe, pf = e.mean(), f.mean()
            pef = (e * f).mean()
            if pf == 0.0 or pe == 0.0:
                continue
            usable = True
            cov_ef = pef - pe * pf
            # conditional difference D = pef/pf - pe
            dval = abs(pef / pf - pe)
            ga = 1.0 / pf
            gb = -1.0
            gc = -pef / pf ** 2
            var = _quad_form(pef, pe, pf, cov_ef, ga, gb, gc, n)
            if dval > best["weak"][0]:
                best["weak"] = (dval, math.sqrt(max(var, 0.0)))
            # ratio deviation R = pef/(pe pf) - 1
            rval = abs(pef / (pe * pf) - 1.0)
            ga = 1.0 / (pe * pf)
            gb = -pef / (pe ** 2 * pf)
            gc = -pef / (pe * pf ** 2)
            var = _quad_form(pef, pe, pf, cov_ef, ga, gb, gc, n)
            if rval > best["ratio"][0]:
                best["ratio"] = (rval, math.sqrt(max(var, 0.0)))
    return best, usable


def _quad_form(pef, pe, pf, cov_ef, ga, gb, gc, n) -> float:
    """Delta-method variance of g(pef, pe, pf) under the multinomial
    covariance of the three indicator means."""
    v_a = pef * (1 - pef)
    v_b = pe * (1 - pe)
    v_c = pf * (1 - pf)
    c_ab = pef * (1 - pe)
    c_ac = pef * (1 - pf)
    c_bc = cov_ef
    return (ga * ga * v_a + gb * gb * v_b + gc * gc * v_c
            + 2 * ga * gb * c_ab + 2 * ga * gc * c_ac
            + 2 * gb * gc * c_bc) / n


def mixing_scan(states: np.ndarray, box: Box,
                region_pairs: list[tuple[list, list]]) -> MixingTable:
    """Empirical mixing coefficients over region pairs from sampled bond
    states, restricted to single-bond cylinder events (the full sigma-field
    supremum is not Monte Carlo estimable; compare exact_ratio_mixing on
    enumerable boxes)."""
    rows = []
    for bonds1, bonds2 in region_pairs:
        i1 = [box.bond_index[b] if not isinstance(b, int) else b for b in bonds1]
        i2 = [box.bond_index[b] if not isinstance(b, int) else b for b in bonds2]
        sep = _region_separation(box, i1, i2)
        best = {"weak": (0.0, 0.0), "ratio": (0.0, 0.0)}
        usable = False
        for a in i1:
            for b in i2:
                res, ok = _pair_coefficients(states[:, a].astype(float),
                                             states[:, b].astype(float))
                usable = usable or ok
                for key in best:
                    if res[key][0] > best[key][0]:
                        best[key] = res[key]
        rows.append(MixingRow(sep, best["weak"][0], best["weak"][1],
                              best["ratio"][0], best["ratio"][1],
                              skipped=not usable))
    mu = _fit_exponent([(r.separation, r.weak) for r in rows if not r.skipped])
    mu1 = _fit_exponent([(r.separation, r.ratio) for r in rows if not r.skipped])
    return MixingTable(rows, mu, mu1)


def _region_separation(box: Box, bonds1, bonds2) -> int:
    s1 = {box.bonds[i][0] for i in bonds1} | {box.bonds[i][1] for i in bonds1}
    s2 = {box.bonds[i][0] for i in bonds2} | {box.bonds[i][1] for i in bonds2}
    return set_distance(s1, s2)


def _fit_exponent(pts) -> float:
    pts = [(s, v) for s, v in pts if v > 0]
    if len(pts) < 2:
        return float("nan")
    x = np.array([p[0] for p in pts], dtype=float)
    y = np.array([-math.log(p[1]) for p in pts])
    slope = float(np.polyfit(x, y, 1)[0])
    return slope
