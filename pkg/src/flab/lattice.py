"""Site metrics, regions and spread geometry.

A metric carries a kind (chain, grid2d, explicit), a scale factor, and a
distance function on site labels. The triangle inequality is never
assumed anywhere in the package. Regions are ordered tuples of distinct
sites over one metric.

Spread quantities measure how separated a finite set is:

* spread(Y) is the largest distance from a point of Y to the rest of Y
* k_spread(Y, k) maximizes the set-to-set distance over k-point subsets
* spread_optimal_enumeration(Y) orders Y greedily by farthest point, so
  each prefix point realizes the spread of the suffix that starts at it
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .errors import CostGuardError


@dataclass(frozen=True)
class Metric:
    """Distance structure on site labels.

    kind "chain": sites are integers, d(x, y) = scale * |x - y|.
    kind "grid2d": sites are integer pairs, d = scale * l1 distance.
    kind "explicit": finite site list with a symmetric distance table.
    """

    kind: str
    scale: float = 1.0
    sites: tuple = ()
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in ("chain", "grid2d", "explicit"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if not (self.scale > 0.0):
            raise ValueError("metric scale must be positive")

    def check_site(self, x) -> None:
        if self.kind == "chain":
            if not isinstance(x, int):
                raise ValueError(f"chain metric expects integer sites, got {x!r}")
        elif self.kind == "grid2d":
            if (
                not isinstance(x, tuple)
                or len(x) != 2
                or not all(isinstance(c, int) for c in x)
            ):
                raise ValueError(f"grid2d metric expects integer pairs, got {x!r}")
        else:
            if x not in self._index:
                raise ValueError(f"site {x!r} not in explicit metric")

    @property
    def _index(self) -> dict:
        idx = object.__getattribute__(self, "__dict__").get("_index_cache")
        if idx is None:
            idx = {s: i for i, s in enumerate(self.sites)}
            object.__getattribute__(self, "__dict__")["_index_cache"] = idx
        return idx

    def distance(self, x, y) -> float:
        if self.kind == "chain":
            return self.scale * abs(x - y)
        if self.kind == "grid2d":
            return self.scale * (abs(x[0] - y[0]) + abs(x[1] - y[1]))
        i = self._index.get(x)
        j = self._index.get(y)
        if i is None or j is None:
            raise ValueError(f"site {x!r} or {y!r} not in explicit metric")
        return self.table[i][j]

    def site_key(self, x):
        """Total order on sites used for deterministic enumeration."""
        if self.kind == "explicit":
            return self._index[x]
        return x


def chain_metric(scale: float = 1.0) -> Metric:
    return Metric("chain", float(scale))


def grid2d_metric(scale: float = 1.0) -> Metric:
    return Metric("grid2d", float(scale))


def explicit_metric(sites: Sequence, distances: Sequence[Sequence[float]]) -> Metric:
    sites = tuple(sites)
    n = len(sites)
    if n == 0:
        raise ValueError("explicit metric needs at least one site")
    if len(set(sites)) != n:
        raise ValueError("explicit metric sites must be distinct")
    if len(distances) != n or any(len(row) != n for row in distances):
        raise ValueError("distance table shape does not match site count")
    tab = tuple(tuple(float(v) for v in row) for row in distances)
    for i in range(n):
        if tab[i][i] != 0.0:
            raise ValueError("distance table diagonal must be zero")
        for j in range(n):
            if tab[i][j] != tab[j][i]:
                raise ValueError("distance table must be symmetric")
            if i != j and tab[i][j] <= 0.0:
                raise ValueError("off-diagonal distances must be positive")
    return Metric("explicit", 1.0, sites, tab)


def metric_from_json(doc: dict) -> Metric:
    kind = doc.get("kind")
    if kind == "chain":
        return chain_metric(float(doc.get("scale", 1.0)))
    if kind == "grid2d":
        return grid2d_metric(float(doc.get("scale", 1.0)))
    if kind == "explicit":
        return explicit_metric(doc["sites"], doc["distances"])
    raise ValueError(f"unknown metric kind {kind!r}")


class Region:
    """Ordered tuple of distinct sites over one metric."""

    __slots__ = ("metric", "sites")

    def __init__(self, metric: Metric, sites: Iterable):
        sites = tuple(sites)
        if len(sites) == 0:
            raise ValueError("region must contain at least one site")
        if len(set(sites)) != len(sites):
            raise ValueError("region sites must be distinct")
        for s in sites:
            metric.check_site(s)
        self.metric = metric
        self.sites = sites

    def __len__(self) -> int:
        return len(self.sites)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Region)
            and self.metric == other.metric
            and self.sites == other.sites
        )

    def __hash__(self) -> int:
        return hash((self.metric, self.sites))

    def sorted_sites(self) -> tuple:
        return tuple(sorted(self.sites, key=self.metric.site_key))

    def __repr__(self) -> str:
        return f"Region({self.metric.kind}, {len(self.sites)} sites)"


def chain_region(size: int, start: int = 0, scale: float = 1.0) -> Region:
    """Contiguous chain segment start .. start+size-1. Convenience builder."""
    if size < 1:
        raise ValueError("region size must be positive")
    return Region(chain_metric(scale), range(start, start + size))


def region_distance(x: Region, y: Region) -> float:
    """min over pairs of the site distance. Regions must share the metric."""
    if x.metric != y.metric:
        raise ValueError("regions live on different metrics")
    return min(x.metric.distance(a, b) for a in x.sites for b in y.sites)


def _point_to_rest(metric: Metric, y, rest: Sequence) -> float:
    return min(metric.distance(y, z) for z in rest)


def spread(region: Region) -> float:
    """max over y of d(y, Y without y). Needs at least two sites."""
    sites = region.sites
    if len(sites) < 2:
        raise ValueError("spread needs at least two sites")
    m = region.metric
    return max(
        _point_to_rest(m, y, [z for z in sites if z != y]) for y in sites
    )


def k_spread(region: Region, k: int) -> float:
    """max over k-subsets J of d(J, Y without J)."""
    sites = region.sites
    if not (1 <= k < len(sites)):
        raise ValueError("k_spread needs 1 <= k < |Y|")
    m = region.metric
    best = 0.0
    for sub in itertools.combinations(sites, k):
        rest = [z for z in sites if z not in sub]
        d = min(m.distance(a, b) for a in sub for b in rest)
        if d > best:
            best = d
    return best


@lru_cache(maxsize=262144)
def _spread_enum_cached(metric: Metric, sites: tuple) -> tuple:
    order = []
    remaining = list(sites)
    while len(remaining) > 1:
        best_site = None
        best_d = -1.0
        for y in remaining:
            d = _point_to_rest(metric, y, [z for z in remaining if z != y])
            if d > best_d or (d == best_d and metric.site_key(y) < metric.site_key(best_site)):
                best_d = d
                best_site = y
        order.append(best_site)
        remaining.remove(best_site)
    order.append(remaining[0])
    return tuple(order)


def spread_optimal_enumeration(region: Region) -> tuple:
    """Greedy farthest-point order; ties go to the smallest site key.

    The returned order (y_1, ..., y_m) satisfies
    d(y_k, {y_{k+1}, ..., y_m}) = spread({y_k, ..., y_m}) for every k < m.
    """
    return _spread_enum_cached(region.metric, region.sorted_sites())


def ball_count(metric: Metric, r: float, support: Region | None = None) -> int:
    """Number of sites within distance r of a point, maximized over positions.

    Chain and grid2d use the translation-invariant closed form on the full
    lattice; explicit metrics take the max over the given support.
    """
    if r < 0.0:
        raise ValueError("radius must be nonnegative")
    if metric.kind == "chain":
        m = int(math.floor(r / metric.scale))
        while (m + 1) * metric.scale <= r:
            m += 1
        while m > 0 and m * metric.scale > r:
            m -= 1
        return 2 * m + 1
    if metric.kind == "grid2d":
        m = int(math.floor(r / metric.scale))
        while (m + 1) * metric.scale <= r:
            m += 1
        while m > 0 and m * metric.scale > r:
            m -= 1
        return 1 + 2 * m * (m + 1)
    if support is None:
        raise ValueError("explicit metric ball count needs a support region")
    best = 0
    for x in support.sites:
        cnt = sum(1 for y in support.sites if metric.distance(x, y) <= r)
        if cnt > best:
            best = cnt
    return best


def spread_decomposition_witness(region: Region, r: float):
    """Split a set of spread <= r into a smaller such set plus one or two points.

    For Y with spread(Y) <= r and |Y| >= 3, exactly one of two shapes is
    expected: if the 2-spread exceeds r, some pair {x, y} with
    d(x, y) <= r leaves a remainder of spread <= r ("pair" witness);
    otherwise some single point x does ("point" witness). Returns
    ("pair", x, y) or ("point", x), or None when no witness exists.
    Sets of size <= 1 count as spread 0 here.
    """
    sites = region.sites
    if len(sites) < 3:
        raise ValueError("witness decomposition needs at least three sites")
    m = region.metric

    def small_spread(rest: tuple) -> bool:
        if len(rest) <= 1:
            return True
        return max(_point_to_rest(m, y, [z for z in rest if z != y]) for y in rest) <= r

    if k_spread(region, 2) > r:
        for x, y in itertools.combinations(region.sorted_sites(), 2):
            if m.distance(x, y) > r:
                continue
            rest = tuple(z for z in sites if z != x and z != y)
            if small_spread(rest):
                return ("pair", x, y)
        return None
    for x in region.sorted_sites():
        rest = tuple(z for z in sites if z != x)
        if small_spread(rest):
            return ("point", x)
    return None


def count_subsets_with_spread(region: Region, k: int, r: float) -> int:
    """Number of k-subsets of the region whose spread is at most r; brute force."""
    if k < 2:
        raise ValueError("subset spread counting needs k >= 2")
    n = len(region.sites)
    if k > n:
        return 0
    total = math.comb(n, k)
    if total > 2_000_000:
        raise CostGuardError(
            "subset-spread enumeration",
            f"{total} subsets exceeds the enumeration guard",
        )
    m = region.metric
    cnt = 0
    for sub in itertools.combinations(region.sorted_sites(), k):
        sp = max(_point_to_rest(m, y, [z for z in sub if z != y]) for y in sub)
        if sp <= r:
            cnt += 1
    return cnt
