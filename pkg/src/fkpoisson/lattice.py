"""Finite rectangular boxes of Z^d: sites, bonds, boundaries, distances.

Sites are plain tuples of ints.  A bond joins two nearest neighbours (L1
distance 1) and is stored as an ordered pair ``(a, b)`` where ``b = a + e_k``
for the bond's axis ``k``; this makes bonds hashable and canonical.

Site and bond enumeration order is row-major (last coordinate fastest),
matching C-order numpy arrays of shape ``box.sides``.  Serialized
configurations rely on this order.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np

Site = tuple[int, ...]
Bond = tuple[Site, Site]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``prod_i [lower_i, lower_i + sides_i - 1]`` in Z^d."""

    lower: Site
    sides: tuple[int, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.sides):
            raise ValueError("lower and sides must have equal dimension")
        if len(self.sides) < 1:
            raise ValueError("dimension must be >= 1")
        if any(s < 1 for s in self.sides):
            raise ValueError(f"sides must be positive, got {self.sides}")

    @staticmethod
    def cube(d: int, side: int, lower: int = 0) -> "Box":
        return Box((lower,) * d, (side,) * d)

    @staticmethod
    def centered(d: int, side: int) -> "Box":
        """Box of odd side centered at the origin."""
        if side % 2 == 0:
            raise ValueError("centered box needs an odd side")
        h = side // 2
        return Box((-h,) * d, (side,) * d)

    @property
    def d(self) -> int:
        return len(self.sides)

    @property
    def upper(self) -> Site:
        return tuple(lo + s - 1 for lo, s in zip(self.lower, self.sides))

    @property
    def n_sites(self) -> int:
        n = 1
        for s in self.sides:
            n *= s
        return n

    @property
    def center(self) -> Site:
        return tuple(lo + (s - 1) // 2 for lo, s in zip(self.lower, self.sides))

    def contains(self, x: Site) -> bool:
        return all(lo <= xi <= hi for xi, lo, hi in zip(x, self.lower, self.upper))

    @cached_property
    def sites(self) -> tuple[Site, ...]:
        ranges = [range(lo, lo + s) for lo, s in zip(self.lower, self.sides)]
        return tuple(product(*ranges))

    @cached_property
    def _strides(self) -> tuple[int, ...]:
        strides = [1] * self.d
        for i in range(self.d - 2, -1, -1):
            strides[i] = strides[i + 1] * self.sides[i + 1]
        return tuple(strides)

    def site_index(self, x: Site) -> int:
        """Row-major linear index of a site (last coordinate fastest)."""
        if not self.contains(x):
            raise KeyError(f"site {x} outside box")
        return sum((xi - lo) * st for xi, lo, st in zip(x, self.lower, self._strides))

    @cached_property
    def bonds(self) -> tuple[Bond, ...]:
        """All bonds with both endpoints inside, in canonical order.

        Order: per site (row-major), per axis 0..d-1, the bond to the
        +e_axis neighbour when it lies in the box.
        """
        out = []
        for x in self.sites:
            for k in range(self.d):
                y = x[:k] + (x[k] + 1,) + x[k + 1:]
                if self.contains(y):
                    out.append((x, y))
        return tuple(out)

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    @cached_property
    def bond_index(self) -> dict[Bond, int]:
        idx = {}
        for i, (a, b) in enumerate(self.bonds):
            idx[(a, b)] = i
            idx[(b, a)] = i
        return idx

    @cached_property
    def bond_sites(self) -> np.ndarray:
        """(n_bonds, 2) int array of endpoint site indices."""
        arr = np.empty((self.n_bonds, 2), dtype=np.int64)
        for i, (a, b) in enumerate(self.bonds):
            arr[i, 0] = self.site_index(a)
            arr[i, 1] = self.site_index(b)
        return arr

    @cached_property
    def site_bonds(self) -> tuple[tuple[int, ...], ...]:
        """Per site, the indices of its incident bonds."""
        inc: list[list[int]] = [[] for _ in range(self.n_sites)]
        for i, (ia, ib) in enumerate(self.bond_sites):
            inc[ia].append(i)
            inc[ib].append(i)
        return tuple(tuple(v) for v in inc)

    @cached_property
    def boundary(self) -> frozenset[Site]:
        """Sites with at least one nearest neighbour outside the box."""
        out = set()
        for x in self.sites:
            if any(xi == lo or xi == hi
                   for xi, lo, hi in zip(x, self.lower, self.upper)):
                out.add(x)
        return frozenset(out)

    @cached_property
    def boundary_indices(self) -> np.ndarray:
        return np.array(sorted(self.site_index(x) for x in self.boundary),
                        dtype=np.int64)

    def neighbors_in(self, x: Site) -> list[Site]:
        out = []
        for k in range(self.d):
            for dx in (-1, 1):
                y = x[:k] + (x[k] + dx,) + x[k + 1:]
                if self.contains(y):
                    out.append(y)
        return out


def bonds_of(box: Box) -> list[Bond]:
    """Bonds with both endpoints in the box, each listed once."""
    return list(box.bonds)


def boundary(box: Box) -> frozenset[Site]:
    return box.boundary


def l1(x: Site, y: Site) -> int:
    return sum(abs(a - b) for a, b in zip(x, y))


def linf(x: Site, y: Site) -> int:
    return max(abs(a - b) for a, b in zip(x, y))


def star_neighbors(x: Site) -> set[Site]:
    """The 3^d - 1 sites at L-infinity distance exactly 1 from x."""
    d = len(x)
    out = set()
    for off in product((-1, 0, 1), repeat=d):
        if any(off):
            out.add(tuple(xi + oi for xi, oi in zip(x, off)))
    return out


def set_distance(gamma, delta) -> int:
    """Minimum L1 distance over all pairs (x, y) with x in gamma, y in delta."""
    gamma = list(gamma)
    delta = list(delta)
    if not gamma or not delta:
        raise ValueError("set_distance undefined for empty sets")
    return min(l1(x, y) for x in gamma for y in delta)


def pair_sort_key(pair: tuple[Site, Site]) -> tuple:
    """Total-order key for unordered site pairs.

    Primary key is the L1 distance of the pair; ties are broken
    lexicographically on the concatenated coordinates after putting the
    lexicographically smaller site first.
    """
    u, v = pair
    if v < u:
        u, v = v, u
    return (l1(u, v),) + u + v


def pair_order(a: tuple[Site, Site], b: tuple[Site, Site]) -> int:
    """-1, 0 or 1 comparing two site pairs under pair_sort_key."""
    ka, kb = pair_sort_key(a), pair_sort_key(b)
    if ka < kb:
        return -1
    if ka > kb:
        return 1
    return 0
