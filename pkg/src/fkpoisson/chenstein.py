"""Poisson-approximation coefficients for the mass-center point process.

The three coefficients bound the total variation distance between the
center field X and an independent Bernoulli field Y with the same
marginals:

    b1 = sum_x sum_{y in B_x}        p_x p_y
    b2 = sum_x sum_{y in B_x \\ x}    p_xy
    b3 = sum_x E | E( X(x) - p_x | sigma(X(y), y outside B_x) ) |

    ||L(X) - L(Y)||_TV <= 2 (2 b1 + 2 b2 + b3) + 4 sum_x p_x^2

with B_x the dependence neighborhood of x: the box of side n^2 centered at
x (realized with the odd side 2*floor(n^2/2)+1 so centering is exact),
intersected with the sampling box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .census import Census
from .fk import FKParams, ResourceCapError
from .lattice import Box, Site, set_distance
from . import oracle


def neighborhood_halfwidth(n: int) -> int:
    """Half-width of the side-n^2 dependence box (odd-side convention)."""
    return (2 * ((n * n) // 2) + 1) // 2


def neighborhood(x: Site, n: int, box: Box, side: int | None = None) -> list[Site]:
    """Sites of the dependence box around x, clipped to the sampling box.

    ``side`` overrides the default odd realization of n^2 (must be odd).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if side is None:
        h = neighborhood_halfwidth(n)
    else:
        if side % 2 != 1:
            raise ValueError("neighborhood side must be odd")
        h = side // 2
    ranges = [range(max(xi - h, lo), min(xi + h, hi) + 1)
              for xi, lo, hi in zip(x, box.lower, box.upper)]
    return [s for s in product(*ranges)]


def neighborhood_offsets(n: int, d: int, side: int | None = None) -> list[Site]:
    """All nonzero offsets z with x+z in the dependence box of x."""
    h = neighborhood_halfwidth(n) if side is None else side // 2
    return [z for z in product(range(-h, h + 1), repeat=d) if any(z)]


# ---------------------------------------------------------------------------
# pair-probability estimation with the close/distant split


@dataclass
class OffsetStat:
    offset: Site
    positions: int            # sites x with both x and x+z in the box
    pxy: float                # two finite clusters of size >= n at offset z
    pxy_se: float
    local: float              # both sizes in [n, n^2)
    close: float              # local and d(C, C') <= K ln n
    distant: float            # local and d(C, C') >  K ln n
    pair_samples: int         # samples containing at least one such pair


@dataclass
class PairStats:
    n: int
    K: float
    n_samples: int
    box: Box
    offsets: dict[Site, OffsetStat]

    def require(self, wanted) -> None:
        missing = [z for z in wanted if z not in self.offsets]
        if missing:
            raise ValueError(f"no pair estimates for offsets {missing}")


def estimate_pxy(samples, box: Box, n: int, offsets=None,
                 K: float = 5.0) -> PairStats:
    """Empirical pair probabilities of qualifying mass centers.

    For each offset z, the frequency (over samples and over translated
    positions x) of finding two distinct finite clusters with centers at x
    and x+z.  The windowed variant (both sizes below n^2) is split into a
    close and a distant part at cluster distance K ln n; the two parts add
    up to the windowed estimate exactly, being an event partition.

    ``samples`` is an iterable of ClusterSets sharing ``box``.
    """
    d = box.d
    if offsets is None:
        offsets = neighborhood_offsets(n, d)
    offsets = [tuple(z) for z in offsets]
    oset = set(offsets)
    cut = K * math.log(n) if n > 1 else 0.0

    sides = box.sides
    positions = {z: int(np.prod([max(0, s - abs(zk)) for s, zk in zip(sides, z)]))
                 for z in offsets}
    acc = {z: np.zeros(4) for z in offsets}       # pxy, local, close, distant
    acc_sq = {z: 0.0 for z in offsets}            # for the plain-part SE
    pair_samples = {z: 0 for z in offsets}
    n_samples = 0
    for cs in samples:
        n_samples += 1
        quals = [c for c in cs.clusters
                 if not c.touches_boundary and c.size >= n]
        if len(quals) < 2:
            continue
        hits = {z: [set(), set(), set(), set()] for z in oset}
        any_hit = set()
        for a in quals:
            ca = a.mass_center
            for b in quals:
                if a is b:
                    continue
                z = tuple(cb - cak for cb, cak in zip(b.mass_center, ca))
                if z not in oset:
                    continue
                rec = hits[z]
                rec[0].add(ca)
                if a.size < n * n and b.size < n * n:
                    rec[1].add(ca)
                    if set_distance(a.sites, b.sites) <= cut:
                        rec[2].add(ca)
                    else:
                        rec[3].add(ca)
                any_hit.add(z)
        for z in any_hit:
            rec = hits[z]
            counts = np.array([len(s) for s in rec], dtype=float)
            acc[z] += counts
            acc_sq[z] += counts[0] ** 2
            pair_samples[z] += 1
    if n_samples == 0:
        raise ValueError("no samples")

    out = {}
    for z in offsets:
        npos = positions[z]
        if npos == 0:
            continue
        tot = acc[z] / (n_samples * npos)
        mean_c = acc[z][0] / n_samples
        var_c = acc_sq[z] / n_samples - mean_c ** 2
        se = math.sqrt(max(var_c, 0.0) / n_samples) / npos
        out[z] = OffsetStat(z, npos, tot[0], se, tot[1], tot[2], tot[3],
                            pair_samples[z])
    return PairStats(n, K, n_samples, box, out)


# ---------------------------------------------------------------------------
# b1 and b2


def _box_sum_field(arr: np.ndarray, h: int) -> np.ndarray:
    """For every cell, the sum of arr over the centered cube of half-width
    h clipped to the array (inclusion-exclusion on the integral image)."""
    d = arr.ndim
    pad = np.zeros(tuple(s + 1 for s in arr.shape))
    pad[(slice(1, None),) * d] = arr
    for ax in range(d):
        pad = np.cumsum(pad, axis=ax)
    out = np.zeros_like(arr, dtype=float)
    for corner in product((0, 1), repeat=d):
        sign = (-1) ** (d - sum(corner))
        idx = []
        for ax, c in enumerate(corner):
            i = np.arange(arr.shape[ax])
            if c:
                idx.append(np.minimum(i + h, arr.shape[ax] - 1) + 1)
            else:
                idx.append(np.maximum(i - h, 0))
        out += sign * pad[np.ix_(*idx)]
    return out


def compute_b1_b2(px_field: np.ndarray, pair_stats: PairStats, box: Box,
                  n: int, side: int | None = None) -> tuple[float, float]:
    """The two neighborhood sums from a per-site marginal field and
    translation-averaged pair estimates.

    b1 uses the field directly (boundary truncation exact via clipped box
    sums); b2 multiplies each offset's estimate by the exact number of
    positions where the translated pair fits in the box.  Offsets of the
    dependence box missing from ``pair_stats`` raise, listing them.
    """
    h = neighborhood_halfwidth(n) if side is None else side // 2
    arr = np.asarray(px_field, dtype=float).reshape(box.sides)
    b1 = float((arr * _box_sum_field(arr, h)).sum())

    wanted = [z for z in neighborhood_offsets(n, box.d, side)
              if all(abs(zk) < s for zk, s in zip(z, box.sides))]
    pair_stats.require(wanted)
    b2 = 0.0
    for z in wanted:
        st = pair_stats.offsets[z]
        b2 += st.pxy * st.positions
    return b1, b2


def exact_b1_b2(dist: "oracle.ExactDistribution", n: int,
                side: int | None = None,
                surrogate: str = "boundary") -> tuple[float, float, np.ndarray]:
    """b1, b2 evaluated from exact marginals and exact pair probabilities."""
    box = dist.box
    px = oracle.exact_px_field(dist, n, surrogate=surrogate)
    pxy = oracle.exact_pxy_matrix(dist, n, window="plain", surrogate=surrogate)
    b1 = b2 = 0.0
    for x in box.sites:
        xi = box.site_index(x)
        for y in neighborhood(x, n, box, side):
            yi = box.site_index(y)
            b1 += px[xi] * px[yi]
            if yi != xi:
                b2 += pxy[xi, yi]
    return float(b1), float(b2), px


# ---------------------------------------------------------------------------
# b3: exact conditional form and the stratified estimator


@dataclass
class B3Estimate:
    lo: float
    hi: float
    se: float
    method: str
    populated_mass: float = 1.0

    @property
    def point(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def is_interval(self) -> bool:
        return self.hi > self.lo


def compute_b3_exact(dist: "oracle.ExactDistribution", n: int,
                     side: int | None = None, variant: str = "plain",
                     surrogate: str = "boundary") -> B3Estimate:
    """sum_x E|E(X(x) - p_x | field outside B_x)| from the exact joint law."""
    box = dist.box
    law = oracle.exact_point_process_law(dist, n, variant, surrogate)
    patterns = [(law.unpack(k), p) for k, p in law.table.items()]
    total = 0.0
    for x in box.sites:
        xi = box.site_index(x)
        inside = {box.site_index(y) for y in neighborhood(x, n, box, side)}
        outside = [i for i in range(box.n_sites) if i not in inside]
        px = sum(p for f, p in patterns if f[xi])
        groups: dict[bytes, list[float]] = {}
        for f, p in patterns:
            key = f[outside].tobytes()
            g = groups.setdefault(key, [0.0, 0.0])
            g[0] += p
            g[1] += p if f[xi] else 0.0
        total += sum(abs(g1 - px * g0) for g0, g1 in groups.values())
    return B3Estimate(total, total, 0.0, "exact")


def field_stack(census: Census, n: int, variant: str = "plain") -> np.ndarray:
    """(n_samples, n_sites) boolean stack of center-indicator fields."""
    mask = census.qualifying(n, variant)
    out = np.zeros((census.n_samples, census.box.n_sites), dtype=bool)
    out[census.sample_id[mask], census.center_index()[mask]] = True
    return out


def compute_b3_stratified(stack: np.ndarray, box: Box, n: int,
                          side: int | None = None, min_bin: int = 100,
                          n_boot: int = 200, seed=0) -> B3Estimate:
    """Stratified estimate of b3 from sampled indicator fields.

    Samples are binned by the observed field outside B_x; bins below the
    occupancy threshold are pooled, and the pooled mass enters only the
    upper bound (its conditional deviation is at most 1), so the result is
    an interval, never a silently extrapolated point.  The quoted se is a
    multinomial bootstrap of the lower endpoint.
    """
    n_samples, n_sites = stack.shape
    if n_sites != box.n_sites:
        raise ValueError("stack does not match the box")
    rng = np.random.default_rng(seed)
    lo = hi = 0.0
    boots = np.zeros(n_boot)
    for x in box.sites:
        xi = box.site_index(x)
        inside = {box.site_index(y) for y in neighborhood(x, n, box, side)}
        outside = [i for i in range(n_sites) if i not in inside]
        if len(outside) > 62:
            raise ResourceCapError("conditioning pattern exceeds 62 sites",
                                   size=2.0 ** len(outside))
        if outside:
            keys = stack[:, outside] @ (1 << np.arange(len(outside), dtype=np.int64))
        else:
            keys = np.zeros(n_samples, dtype=np.int64)
        _, inv, counts = np.unique(keys, return_inverse=True,
                                   return_counts=True)
        ones = np.bincount(inv, weights=stack[:, xi].astype(float),
                           minlength=len(counts))
        px = stack[:, xi].mean()
        pop = counts >= min_bin
        contrib = np.abs(ones[pop] - px * counts[pop]).sum() / n_samples
        other = counts[~pop].sum() / n_samples
        lo += contrib
        hi += contrib + other
        # bootstrap the populated-bin contribution cellwise
        cells = np.concatenate([counts - ones, ones]).astype(float)
        pcells = cells / n_samples
        draws = rng.multinomial(n_samples, pcells, size=n_boot).astype(float)
        c0 = draws[:, :len(counts)]
        c1 = draws[:, len(counts):]
        cnt_b = c0 + c1
        px_b = c1.sum(axis=1) / n_samples
        pop_b = cnt_b >= min_bin
        boots += np.where(pop_b, np.abs(c1 - px_b[:, None] * cnt_b), 0.0).sum(axis=1) / n_samples
    se = float(boots.std(ddof=1)) if n_boot > 1 else 0.0
    return B3Estimate(float(lo), float(hi), se, "stratified")


def compute_b3(method: str, *, dist=None, stack=None, box=None, n=None,
               side=None, min_bin: int = 100, n_boot: int = 200,
               seed=0) -> B3Estimate:
    """Dispatch to the exact conditional computation (needs an enumerated
    distribution) or to the stratified sample estimator."""
    if method == "exact":
        if dist is None:
            raise ValueError("exact b3 needs an enumerated distribution")
        return compute_b3_exact(dist, n, side)
    if method == "stratified":
        if stack is None or box is None:
            raise ValueError("stratified b3 needs a field stack and box")
        return compute_b3_stratified(stack, box, n, side, min_bin, n_boot, seed)
    raise ValueError(f"unknown b3 method {method!r}")


# ---------------------------------------------------------------------------
# the bound and the count comparison


def tv_bound(b1: float, b2: float, b3, sum_px2: float):
    """2 (2 b1 + 2 b2 + b3) + 4 sum_x p_x^2; an interval when b3 is one."""
    if isinstance(b3, B3Estimate):
        if b3.is_interval:
            b3 = (b3.lo, b3.hi)
        else:
            b3 = b3.lo
    if isinstance(b3, tuple):
        return tuple(2.0 * (2.0 * b1 + 2.0 * b2 + v) + 4.0 * sum_px2
                     for v in b3)
    return 2.0 * (2.0 * b1 + 2.0 * b2 + b3) + 4.0 * sum_px2


@dataclass
class ExactBoundInstance:
    """Everything of the TV inequality evaluated exactly on one tiny box."""

    box: Box
    params: FKParams
    n: int
    side: int | None
    px: np.ndarray
    b1: float
    b2: float
    b3: float
    sum_px2: float
    bound: float
    tv: float

    @property
    def holds(self) -> bool:
        return self.tv <= self.bound + 1e-12


def exact_bound_instance(box: Box, params: FKParams, n: int,
                         side: int | None = None,
                         surrogate: str = "boundary") -> ExactBoundInstance:
    """Evaluate the TV inequality as a theorem instance: all coefficients,
    both process laws and the distance computed by enumeration."""
    dist = oracle.enumerate_measure(box, params)
    b1, b2, px = exact_b1_b2(dist, n, side, surrogate)
    b3 = compute_b3_exact(dist, n, side, "plain", surrogate).lo
    law_x = oracle.exact_point_process_law(dist, n, "plain", surrogate)
    law_y = oracle.product_law(px, box)
    tv = oracle.exact_tv(law_x, law_y)
    sum_px2 = float((px ** 2).sum())
    bound = tv_bound(b1, b2, b3, sum_px2)
    return ExactBoundInstance(box, params, n, side, px, b1, b2, b3,
                              sum_px2, bound, tv)


@dataclass
class PoissonComparison:
    lambda_hat: float
    tv: float
    ci_lo: float
    ci_hi: float
    n_samples: int
    degenerate: bool
    counts_pmf: dict[int, float]

    def to_dict(self) -> dict:
        return {
            "lambda_hat": self.lambda_hat, "tv": self.tv,
            "ci95": [self.ci_lo, self.ci_hi], "n_samples": self.n_samples,
            "degenerate": self.degenerate,
            "counts_pmf": {str(k): v for k, v in self.counts_pmf.items()},
        }


def _tv_to_poisson(counts: np.ndarray, lam: float, tail: float = 1e-12) -> float:
    emp = np.bincount(counts)
    n = emp.sum()
    emp = emp / n
    if lam == 0.0:
        pois = np.zeros_like(emp)
        pois[0] = 1.0
        return float(np.abs(emp - pois).sum())
    kmax = len(emp) - 1
    pk = math.exp(-lam)
    cum = pk
    tv = abs(emp[0] - pk)
    k = 0
    while k < kmax or 1.0 - cum > tail:
        k += 1
        pk *= lam / k
        cum += pk
        e = emp[k] if k <= kmax else 0.0
        tv += abs(e - pk)
        if k > kmax + 10000:
            break
    tv += max(1.0 - cum, 0.0)
    return float(tv)


def poisson_count_test(counts: np.ndarray, n_boot: int = 500,
                       seed=0) -> PoissonComparison:
    """Total variation between the sampled law of the number of centers and
    a Poisson with the plugged-in mean, with a bootstrap 95% interval.

    The plug-in mean is re-estimated inside every bootstrap replicate so
    the interval absorbs plug-in noise.
    """
    counts = np.asarray(counts, dtype=np.int64)
    n = len(counts)
    if n < 2:
        raise ValueError("need at least 2 samples")
    lam = float(counts.mean())
    tv = _tv_to_poisson(counts, lam)
    degenerate = lam == 0.0
    rng = np.random.default_rng(seed)
    emp = np.bincount(counts)
    boots = np.empty(n_boot)
    for b in range(n_boot):
        res = rng.multinomial(n, emp / n)
        ks = np.arange(len(res))
        lam_b = float((res * ks).sum() / n)
        boots[b] = _tv_to_poisson(np.repeat(ks, res), lam_b)
    lo, hi = np.percentile(boots, [2.5, 97.5])
    pmf = {int(k): float(v / n) for k, v in enumerate(emp) if v > 0}
    return PoissonComparison(lam, tv, float(lo), float(hi), n, degenerate, pmf)


# ---------------------------------------------------------------------------
# assembled report


@dataclass
class ChenSteinReport:
    n: int
    box_sides: tuple[int, ...]
    neighborhood_side: int
    K: float
    n_samples: int
    lambda_hat: float
    b1: float
    b2: float
    b3_lo: float
    b3_hi: float
    b3_method: str
    sum_px2: float
    bound_lo: float
    bound_hi: float
    poisson: PoissonComparison | None = None

    def to_dict(self) -> dict:
        out = {
            "n": self.n, "box_sides": list(self.box_sides),
            "neighborhood_side": self.neighborhood_side, "K": self.K,
            "n_samples": self.n_samples, "lambda_hat": self.lambda_hat,
            "b1": self.b1, "b2": self.b2,
            "b3": {"lo": self.b3_lo, "hi": self.b3_hi,
                   "method": self.b3_method},
            "sum_px2": self.sum_px2,
            "tv_bound": {"lo": self.bound_lo, "hi": self.bound_hi},
        }
        if self.poisson is not None:
            out["poisson"] = self.poisson.to_dict()
        return out
