"""Exhaustive ground truth on tiny boxes.

Every operation here enumerates all 2^|bonds| configurations, so it is
deliberately brute force and refuses beyond a hard cap.  Configuration i
encodes bond j as bit j: state[j] = (i >> j) & 1, in ``box.bonds`` order.

The point-process laws use the same finiteness surrogate as the census
module (a cluster is finite iff it avoids the box boundary); pass
``surrogate="all"`` to count every cluster as finite instead, which is the
only sensible reading on boxes whose every site sits on the boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .census import _qualifies, mass_center
from .fk import BondConfig, DisjointSet, FKParams, ResourceCapError
from .lattice import Box, Site

ENUM_CAP = 24


@dataclass
class ExactDistribution:
    box: Box
    params: FKParams
    probs: np.ndarray  # index = configuration bits
    log_z: float

    @property
    def n_configs(self) -> int:
        return len(self.probs)

    def state_of(self, index: int) -> np.ndarray:
        m = self.box.n_bonds
        return ((index >> np.arange(m)) & 1).astype(np.uint8)

    def config_of(self, index: int) -> BondConfig:
        return BondConfig(self.box, self.state_of(index))

    def index_of(self, config: BondConfig) -> int:
        return int(config.state.astype(np.int64) @ (1 << np.arange(config.box.n_bonds)))

    def to_table(self) -> list[dict]:
        return [{"config": i, "probability": float(p)}
                for i, p in enumerate(self.probs)]


def _cluster_stats(box: Box, state: np.ndarray):
    """Labels plus per-label (size, touches, center_site_index)."""
    ds = DisjointSet(box.n_sites)
    bs = box.bond_sites
    for j in np.flatnonzero(state):
        ds.union(int(bs[j, 0]), int(bs[j, 1]))
    roots = [ds.find(i) for i in range(box.n_sites)]
    groups: dict[int, list[int]] = {}
    for i, r in enumerate(roots):
        groups.setdefault(r, []).append(i)
    sites = box.sites
    bidx = set(int(v) for v in box.boundary_indices)
    labels = np.empty(box.n_sites, dtype=np.int64)
    stats = []
    for li, (r, members) in enumerate(groups.items()):
        for i in members:
            labels[i] = li
        size = len(members)
        touches = any(i in bidx for i in members)
        center = mass_center([sites[i] for i in members])
        stats.append((size, touches, box.site_index(center)))
    return labels, stats


def enumerate_measure(box: Box, params: FKParams,
                      max_bonds: int = ENUM_CAP) -> ExactDistribution:
    """Exact probability of every configuration of the box."""
    m = box.n_bonds
    if m > max_bonds:
        raise ResourceCapError(
            f"{m} bonds exceed the enumeration cap ({max_bonds}); "
            f"2^{m} configurations", size=2.0 ** m)
    params.boundary.validate(box)
    p, q = params.p, params.q
    n = 1 << m
    logw = np.full(n, -np.inf)
    class_lists = params.boundary.class_lists(box)
    bs = box.bond_sites
    lq = math.log(q)
    for i in range(n):
        k = int(i).bit_count()
        if p == 0.0:
            if k != 0:
                continue
            base = 0.0
        elif p == 1.0:
            if k != m:
                continue
            base = 0.0
        else:
            base = k * math.log(p) + (m - k) * math.log(1.0 - p)
        ds = DisjointSet(box.n_sites)
        for j in range(m):
            if (i >> j) & 1:
                ds.union(int(bs[j, 0]), int(bs[j, 1]))
        for group in class_lists:
            for other in group[1:]:
                ds.union(group[0], other)
        cl = len({ds.find(s) for s in range(box.n_sites)})
        logw[i] = base + cl * lq
    mx = logw.max()
    w = np.exp(logw - mx)
    z = w.sum()
    return ExactDistribution(box, params, w / z, float(mx + np.log(z)))


def event_probability(dist: ExactDistribution, predicate) -> float:
    """Probability of {config : predicate(config)}."""
    total = 0.0
    for i in range(dist.n_configs):
        if predicate(dist.config_of(i)):
            total += dist.probs[i]
    return float(total)


def sample_exact(dist: ExactDistribution, n_samples: int, seed=0) -> np.ndarray:
    """(n_samples, n_bonds) i.i.d. draws from the exact distribution.

    Perfect sampling; usable wherever enumeration is feasible, bypassing
    burn-in questions entirely.
    """
    rng = np.random.default_rng(seed)
    idx = rng.choice(dist.n_configs, size=n_samples, p=dist.probs)
    m = dist.box.n_bonds
    return ((idx[:, None] >> np.arange(m)[None, :]) & 1).astype(np.uint8)


# ---------------------------------------------------------------------------
# exact laws of the center point process


@dataclass
class PatternLaw:
    """Distribution of a 0/1 field over the box sites.

    Keys are packbits of the row-major indicator vector.
    """

    box: Box
    n: int
    variant: str
    table: dict[bytes, float]

    @property
    def n_sites(self) -> int:
        return self.box.n_sites

    def unpack(self, key: bytes) -> np.ndarray:
        return np.unpackbits(np.frombuffer(key, dtype=np.uint8),
                             count=self.n_sites).astype(bool)

    def marginal(self, site_index: int) -> float:
        return sum(p for k, p in self.table.items()
                   if self.unpack(k)[site_index])

    def count_distribution(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for k, p in self.table.items():
            c = int(self.unpack(k).sum())
            out[c] = out.get(c, 0.0) + p
        return out


def _pattern_key(field: np.ndarray) -> bytes:
    return np.packbits(field.astype(np.uint8)).tobytes()


def _config_field(box: Box, stats, n: int, variant: str,
                  surrogate: str) -> np.ndarray:
    fld = np.zeros(box.n_sites, dtype=bool)
    for size, touches, cidx in stats:
        finite = (not touches) if surrogate == "boundary" else True
        if finite and _qualifies(size, n, variant):
            fld[cidx] = True
    return fld


def exact_point_process_law(dist: ExactDistribution, n: int,
                            variant: str = "plain",
                            surrogate: str = "boundary") -> PatternLaw:
    """Exact law of the indicator field of qualifying mass centers."""
    if n < 1:
        raise ValueError("n must be >= 1")
    box = dist.box
    table: dict[bytes, float] = {}
    for i in range(dist.n_configs):
        if dist.probs[i] == 0.0:
            continue
        _, stats = _cluster_stats(box, dist.state_of(i))
        key = _pattern_key(_config_field(box, stats, n, variant, surrogate))
        table[key] = table.get(key, 0.0) + float(dist.probs[i])
    return PatternLaw(box, n, variant, table)


def product_law(px: np.ndarray, box: Box, n: int = 0,
                variant: str = "product") -> PatternLaw:
    """Law of independent Bernoulli marks with the given per-site means."""
    k = box.n_sites
    if k > 20:
        raise ResourceCapError(f"product law over {k} sites", size=2.0 ** k)
    patterns = ((np.arange(1 << k)[:, None] >> np.arange(k)[None, :]) & 1)
    probs = np.prod(np.where(patterns == 1, px[None, :], 1.0 - px[None, :]),
                    axis=1)
    table: dict[bytes, float] = {}
    for row, pr in zip(patterns.astype(bool), probs):
        if pr > 0.0:
            table[_pattern_key(row)] = table.get(_pattern_key(row), 0.0) + float(pr)
    return PatternLaw(box, n, variant, table)


def exact_tv(law1: PatternLaw, law2: PatternLaw) -> float:
    """Total variation between two field laws: sum of absolute probability
    differences over patterns (equal to twice the sup over pattern sets)."""
    if law1.n_sites != law2.n_sites or law1.box != law2.box:
        raise ValueError("laws live on different pattern spaces")
    keys = set(law1.table) | set(law2.table)
    return float(sum(abs(law1.table.get(k, 0.0) - law2.table.get(k, 0.0))
                     for k in keys))


def tv_sup_form(law1: PatternLaw, law2: PatternLaw,
                exhaustive_limit: int = 16) -> float:
    """2 sup_A |P1(A) - P2(A)|, by exhaustive subset search when the joint
    support is small and by the positive-part identity otherwise."""
    keys = sorted(set(law1.table) | set(law2.table))
    diff = np.array([law1.table.get(k, 0.0) - law2.table.get(k, 0.0)
                     for k in keys])
    if len(keys) <= exhaustive_limit:
        best = 0.0
        for mask in range(1 << len(keys)):
            sel = (mask >> np.arange(len(keys))) & 1
            best = max(best, abs(float(diff @ sel)))
        return 2.0 * best
    return 2.0 * float(np.maximum(diff, 0.0).sum())


def exact_px_field(dist: ExactDistribution, n: int, variant: str = "plain",
                   surrogate: str = "boundary") -> np.ndarray:
    """Exact P(X(x) = 1) for every site, directly from configurations."""
    box = dist.box
    out = np.zeros(box.n_sites)
    for i in range(dist.n_configs):
        _, stats = _cluster_stats(box, dist.state_of(i))
        out += dist.probs[i] * _config_field(box, stats, n, variant, surrogate)
    return out


def exact_pxy_matrix(dist: ExactDistribution, n: int,
                     window: str = "plain",
                     surrogate: str = "boundary") -> np.ndarray:
    """M[x, y] = P(two distinct qualifying clusters centered at x and y).

    window "plain": n <= |C|, finite;  window "local": n <= |C| < n^2.
    """
    box = dist.box
    out = np.zeros((box.n_sites, box.n_sites))
    variant = "plain" if window == "plain" else "local"
    for i in range(dist.n_configs):
        _, stats = _cluster_stats(box, dist.state_of(i))
        centers = []
        for size, touches, cidx in stats:
            finite = (not touches) if surrogate == "boundary" else True
            if finite and _qualifies_window(size, n, variant):
                centers.append(cidx)
        if len(centers) < 2:
            continue
        pairs = set()
        for i1, a in enumerate(centers):
            for i2, b in enumerate(centers):
                if i1 != i2:
                    pairs.add((a, b))
        for a, b in pairs:
            out[a, b] += dist.probs[i]
    return out


def _qualifies_window(size: int, n: int, variant: str) -> bool:
    if variant == "plain":
        return size >= n
    if variant == "local":
        return n <= size < n * n
    return _qualifies(size, n, variant)


# ---------------------------------------------------------------------------
# the unproven two-cluster comparison


@dataclass
class Conjecture7Result:
    box: Box
    params_p: float
    params_q: float
    n: int
    x: Site
    y: Site
    surrogate: str
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 1e-12


def conjecture7_check(box: Box, params: FKParams, n: int, x: Site, y: Site,
                      surrogate: str = "boundary",
                      dist: ExactDistribution | None = None) -> Conjecture7Result:
    """Exact comparison of P(both x- and y-clusters are n-large, finite and
    disjoint) against P(the re-centered origin cluster is 2n-large and
    finite).  Reported, never asserted: the inequality is conjectural.
    """
    if dist is None:
        dist = enumerate_measure(box, params)
    xi, yi = box.site_index(x), box.site_index(y)
    zi = box.site_index(box.center)
    lhs = rhs = 0.0
    for i in range(dist.n_configs):
        labels, stats = _cluster_stats(box, dist.state_of(i))
        pr = float(dist.probs[i])

        def finite_large(site_idx: int, thresh: int) -> bool:
            size, touches, _ = stats[labels[site_idx]]
            finite = (not touches) if surrogate == "boundary" else True
            return finite and size >= thresh

        if labels[xi] != labels[yi] and finite_large(xi, n) and finite_large(yi, n):
            lhs += pr
        if finite_large(zi, 2 * n):
            rhs += pr
    return Conjecture7Result(box, params.p, params.q, n, x, y, surrogate,
                             lhs, rhs)


# ---------------------------------------------------------------------------
# exact ratio-mixing coefficient between two bond regions


def exact_ratio_mixing(dist: ExactDistribution, bonds1, bonds2,
                       subset_budget: int = 1 << 16) -> float:
    """sup over events E on region 1 and F on region 2 of
    |P(E and F) / (P(E) P(F)) - 1|, restricted to P(E) P(F) > 0.

    Exact: every event of the smaller region's sigma-field is enumerated;
    for each, the optimal event of the other region is a level set of the
    atom ratio (prefix of the sorted atoms), which attains the inner
    supremum.  Refuses when the smaller region's event count exceeds the
    budget: the full search is doubly exponential in the bond count.
    """
    idx1 = [dist.box.bond_index[b] if not isinstance(b, int) else b
            for b in bonds1]
    idx2 = [dist.box.bond_index[b] if not isinstance(b, int) else b
            for b in bonds2]
    if set(idx1) & set(idx2):
        raise ValueError("regions share bonds")
    if not idx1 or not idx2:
        return 0.0
    if len(idx1) > 10 or len(idx2) > 10:
        raise ValueError("regions limited to 10 bonds each")

    k1, k2 = len(idx1), len(idx2)
    all_idx = np.arange(dist.n_configs)
    a_id = np.zeros(dist.n_configs, dtype=np.int64)
    for j, b in enumerate(idx1):
        a_id |= ((all_idx >> b) & 1) << j
    b_id = np.zeros(dist.n_configs, dtype=np.int64)
    for j, b in enumerate(idx2):
        b_id |= ((all_idx >> b) & 1) << j
    joint = np.zeros((1 << k1, 1 << k2))
    np.add.at(joint, (a_id, b_id), dist.probs)

    mu = joint.sum(axis=1)
    nu = joint.sum(axis=0)
    joint = joint[mu > 0][:, nu > 0]
    nu = nu[nu > 0]
    mu = mu[mu > 0]
    if joint.shape[0] > joint.shape[1]:
        joint, mu, nu = joint.T, nu, mu

    n_atoms = len(mu)
    n_subsets = (1 << n_atoms) - 1
    if n_subsets > subset_budget:
        raise ResourceCapError(
            f"{n_subsets} events on the smaller region exceed the "
            f"exhaustive budget {subset_budget}", size=float(n_subsets))

    masks = np.arange(1, n_subsets + 1)
    ind = ((masks[:, None] >> np.arange(n_atoms)[None, :]) & 1).astype(float)
    mu_a = ind @ mu                      # P(E) per subset
    pab = ind @ joint                    # P(E and atom b)
    ratio = pab / (mu_a[:, None] * nu[None, :])
    order = np.argsort(-ratio, axis=1)
    p_sorted = np.take_along_axis(pab, order, axis=1)
    n_sorted = np.take_along_axis(np.broadcast_to(nu, pab.shape), order, axis=1)
    num = np.cumsum(p_sorted, axis=1)
    den = mu_a[:, None] * np.cumsum(n_sorted, axis=1)
    r_max = (num / den).max(axis=1)
    order = np.argsort(ratio, axis=1)
    p_sorted = np.take_along_axis(pab, order, axis=1)
    n_sorted = np.take_along_axis(np.broadcast_to(nu, pab.shape), order, axis=1)
    num = np.cumsum(p_sorted, axis=1)
    den = mu_a[:, None] * np.cumsum(n_sorted, axis=1)
    r_min = (num / den).min(axis=1)
    return float(max((r_max - 1.0).max(), (1.0 - r_min).max(), 0.0))
