"""Decomposition of induced moments into product part plus correction.

For a homogeneous state, the induced moment of a centered word splits
exactly into the moment the product state with the same single-site
restriction would give, plus a correction assembled from truncated
correlations across the sites that the word actually touches. The
correction is organized subset by subset: for each set of touched sites
(in spread-optimal order) and each ordered assignment of word slots to
those sites, a telescoping sum of truncated tail correlations
reproduces the difference between the true expectation and the
factorized one. This module computes both pieces, the combinatorial
weight sums that bound the correction, and the residual check that ties
everything back to the directly evaluated moment.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .algebra import (
    SiteOperator,
    SiteState,
    expect as site_expect,
    ordered_product,
)
from ._moments import product_moment, product_moment_batch
from .combinatorics import (
    integer_partitions_into_k,
    multinomial,
    ordered_partitions,
    stirling2,
    q_sequence,
)
from .errors import CostGuardError, KahanSum
from .fluctuations import induced_moment
from .gaussian import covariance_from_state, wick_moment
from .lattice import (
    Metric,
    Region,
    ball_count,
    spread,
    spread_optimal_enumeration,
)
from .states import Assignment, GlobalState, correlator

PRODUCT_PART_MAX_DEGREE = 8
CORRECTION_TUPLE_GUARD = 10**7
CENTERED_TOL = 1e-10


def _require_centered(omega: SiteState, word: Sequence[SiteOperator]) -> None:
    for a in word:
        dev = abs(site_expect(omega, a))
        if dev > CENTERED_TOL:
            raise ValueError(
                f"word operator has expectation {dev:.3e}; center it first"
            )


def _region_size(x) -> int:
    if isinstance(x, Region):
        return len(x)
    size = int(x)
    if size < 1:
        raise ValueError("region size must be positive")
    return size


def product_part_moment(omega: SiteState, x, word: Sequence[SiteOperator]) -> complex:
    """Induced moment the factorized state omega^X assigns to a centered word.

    ``x`` may be a region or a plain size; only the site count enters.
    Uncentered input is refused, since the closed form groups tuples by
    block structure under the assumption that singleton blocks vanish in
    the decomposition bookkeeping downstream.
    """
    word = tuple(word)
    n = len(word)
    if n < 1:
        raise ValueError("product part needs a word of degree >= 1")
    if n > PRODUCT_PART_MAX_DEGREE:
        raise CostGuardError(
            "product-part partition sum",
            f"degree {n} exceeds {PRODUCT_PART_MAX_DEGREE}",
        )
    _require_centered(omega, word)
    size = _region_size(x)
    return product_moment(omega.rho, size, [a.mat for a in word])


class ProductPartFunctional:
    """Word functional for the factorized moment at a fixed region size."""

    def __init__(self, omega: SiteState, size: int):
        self.omega = omega
        self.size = int(size)
        self.dim = omega.dim

    def __call__(self, word) -> complex:
        if len(word) == 0:
            return complex(1.0)
        return product_moment(self.omega.rho, self.size, [a.mat for a in word])

    def batch(self, words) -> np.ndarray:
        if not words:
            return np.zeros(0, dtype=complex)
        if len(words[0]) == 0:
            return np.ones(len(words), dtype=complex)
        stack = np.array([[a.mat for a in w] for w in words])
        return product_moment_batch(self.omega.rho, self.size, stack)


def f_correction_moment(
    state: GlobalState, region: Region, word: Sequence[SiteOperator]
) -> complex:
    """Correction that restores the true induced moment over the product part.

    Organized over subsets Y of touched sites in spread-optimal order
    and ordered assignments of word slots to Y's positions. For each
    such assignment the sum over split points of (prefix of single-site
    expectations) times (truncated correlation of the tail) telescopes
    exactly, so adding the factorized moment reproduces the direct one
    up to rounding.
    """
    word = tuple(word)
    n = len(word)
    if n < 1:
        raise ValueError("correction needs a word of degree >= 1")
    size = len(region)
    if float(size) ** n > CORRECTION_TUPLE_GUARD:
        raise CostGuardError(
            "correction tuple sum",
            f"|X|^n = {size}^{n} exceeds {CORRECTION_TUPLE_GUARD}",
        )
    omega = state.single_site_restriction()
    _require_centered(omega, word)
    metric = region.metric
    sites = region.sorted_sites()
    acc = KahanSum()
    for m in range(2, min(n, size) + 1):
        parts = ordered_partitions(m, n)
        for sub in itertools.combinations(sites, m):
            enum = spread_optimal_enumeration(Region(metric, sub))
            for part in parts:
                ops = [
                    ordered_product([word[i - 1] for i in block]) for block in part
                ]
                singles = [site_expect(omega, op) for op in ops]
                tails: list[complex] = [complex(1.0)] * (m + 2)
                for k in range(m, 0, -1):
                    asg = {enum[l - 1]: ops[l - 1] for l in range(k, m + 1)}
                    tails[k] = state.expect(asg)
                prefix = complex(1.0)
                for k in range(1, m):
                    acc.add(prefix * (tails[k] - singles[k - 1] * tails[k + 1]))
                    prefix *= singles[k - 1]
    return acc.value * float(size) ** (-n / 2.0)


class CorrectionFunctional:
    """Word functional for the correction moment on a fixed region."""

    def __init__(self, state: GlobalState, region: Region):
        self.state = state
        self.region = region
        self.dim = state.site_dim

    def __call__(self, word) -> complex:
        if len(word) == 0:
            return complex(0.0)
        return f_correction_moment(self.state, self.region, tuple(word))


@dataclass
class ClusterExpansionCheck:
    lhs: complex
    rhs: complex
    deviation: float
    passed: bool


def cluster_expansion_check(state: GlobalState, assignment: Assignment) -> ClusterExpansionCheck:
    """Expectation of a multi-site product against its telescoped expansion.

    The expansion runs along the spread-optimal enumeration of the
    support: a product of single-site expectations plus, at each split
    point, the truncated correlation of the point against its tail,
    reweighted by e^{-spread} exactly cancelling the correlator's e^{+d}
    factor.
    """
    y = assignment.support
    m = len(y)
    if m > 8:
        raise CostGuardError("expansion support size", f"|Y| = {m} exceeds 8")
    enum = spread_optimal_enumeration(y)
    metric = y.metric
    ops = [assignment.ops[site] for site in enum]
    lhs = state.expect(dict(assignment.ops))
    singles = [state.expect({site: op}) for site, op in zip(enum, ops)]
    rhs = complex(1.0)
    for s in singles:
        rhs *= s
    prefix = complex(1.0)
    for l in range(1, m):
        head = Region(metric, (enum[l - 1],))
        tail = Region(metric, enum[l:])
        corr = correlator(
            state,
            Assignment(head, {enum[l - 1]: ops[l - 1]}),
            Assignment(tail, {site: op for site, op in zip(enum[l:], ops[l:])}),
        )
        delta = spread(Region(metric, enum[l - 1 :]))
        rhs += prefix * corr.value * math.exp(-delta)
        prefix *= singles[l - 1]
    deviation = abs(lhs - rhs)
    return ClusterExpansionCheck(lhs=lhs, rhs=rhs, deviation=deviation, passed=deviation <= 1e-10)


def wick_defect_moment(omega: SiteState, x, word: Sequence[SiteOperator]) -> complex:
    """Factorized moment minus its finite-size Wick value.

    For even degree the Wick moment of the single-site covariance is
    multiplied by prod_{l < n/2} (1 - l / |X|), the exact finite-size
    weight of the fully paired tuples; odd degrees have no Wick part, so
    the defect is the factorized moment itself.
    """
    word = tuple(word)
    n = len(word)
    size = _region_size(x)
    pp = product_part_moment(omega, size, word)
    if n % 2 == 1:
        return pp
    factor = 1.0
    for l in range(n // 2):
        factor *= 1.0 - l / float(size)
    qf = wick_moment(covariance_from_state(omega), word)
    return pp - factor * qf


def b_n_quantity(region: Region, n: int) -> float:
    """Spread-decay weight sum over degree-n site tuples of the region.

    Each tuple contributes, for every split point k before the first
    singleton-occupancy position of its spread-optimally enumerated
    range, the factor e^{-(distance from the k-th point to the rest)}.
    Tuples are grouped by range subset and occupancy composition, which
    keeps the cost polynomial while reproducing the tuple sum exactly.
    """
    if n < 1:
        raise ValueError("degree must be positive")
    size = len(region)
    if float(size) ** n > CORRECTION_TUPLE_GUARD:
        raise CostGuardError(
            "weight-sum enumeration",
            f"|X|^n = {size}^{n} exceeds {CORRECTION_TUPLE_GUARD}",
        )
    if size == 1:
        return 0.0
    metric = region.metric
    sites = region.sorted_sites()
    total = 0.0
    for m in range(2, min(n, size) + 1):
        comps = integer_partitions_into_k(n, m)
        for sub in itertools.combinations(sites, m):
            enum = spread_optimal_enumeration(Region(metric, sub))
            weights = [
                math.exp(
                    -min(metric.distance(enum[k], enum[j]) for j in range(k + 1, m))
                )
                for k in range(m - 1)
            ]
            for comp in comps:
                first_single = next(
                    (idx + 1 for idx, c in enumerate(comp) if c == 1), m + 1
                )
                kmax = min(m - 1, first_single)
                if kmax < 1:
                    continue
                total += multinomial(comp) * sum(weights[:kmax])
    return total


def n_hat_series(k: int, metric: Metric, support: Region | None = None) -> float:
    """Sum over integer radii of (ball count)^k e^{-r}, with a tail majorant.

    The series is truncated once terms decrease below 1e-14; the
    remainder is replaced by a geometric majorant using the next term
    and the (decreasing) term ratio, so the returned value is an upper
    bound on the infinite sum, accurate to about 1e-14.
    """
    if k < 1:
        raise ValueError("power must be positive")
    total = 0.0
    r = 1
    prev = None
    while r <= 100000:
        term = float(ball_count(metric, float(r), support)) ** k * math.exp(-float(r))
        total += term
        if prev is not None and term < prev and term < 1e-14:
            break
        prev = term
        r += 1
    else:
        raise RuntimeError("radius series failed to settle")
    n_next = ball_count(metric, float(r + 1), support)
    n_after = ball_count(metric, float(r + 2), support)
    t_next = float(n_next) ** k * math.exp(-float(r + 1))
    ratio = (float(n_after) / float(n_next)) ** k * math.exp(-1.0) if n_next else 0.0
    if ratio >= 1.0:
        raise RuntimeError("radius series tail is not contracting")
    return total + t_next / (1.0 - ratio)


def b_hat_bound(n: int, metric: Metric, support: Region | None = None) -> float:
    """Size-free majorant of the weight sum per |X|^{n/2}.

    Combines block-count combinatorics with the radius series: n! times
    the sum over block counts k of S(k, n) times sum over split points
    of q-sequence prefactors and radius-series values.
    """
    if n < 1:
        raise ValueError("degree must be positive")
    if n > PRODUCT_PART_MAX_DEGREE:
        raise CostGuardError(
            "weight-majorant degree", f"degree {n} exceeds {PRODUCT_PART_MAX_DEGREE}"
        )
    total = 0.0
    for k in range(2, n + 1):
        inner = 0.0
        for l in range(1, k):
            j = k - l + 1
            inner += q_sequence(j) * n_hat_series(j, metric, support)
        total += stirling2(k, n) * inner
    return math.factorial(n) * total


@dataclass
class DecompositionCheck:
    direct: complex
    product_part: complex
    correction: complex
    residual: float
    passed: bool


def decomposition_check(
    state: GlobalState, region: Region, word: Sequence[SiteOperator]
) -> DecompositionCheck:
    """direct moment == product part + correction, to rounding.

    The word is centered against the homogeneous single-site restriction
    first (construction fails for states without one), then all three
    quantities are computed independently and the residual compared to
    1e-9.
    """
    omega = state.single_site_restriction()
    eye = np.eye(state.site_dim)
    centered = tuple(
        SiteOperator(a.mat - complex(np.trace(omega.rho @ a.mat)) * eye) for a in word
    )
    direct = induced_moment(state, region, centered)
    pp = product_part_moment(omega, len(region), centered)
    fc = f_correction_moment(state, region, centered)
    residual = abs(direct - (pp + fc))
    return DecompositionCheck(
        direct=direct,
        product_part=pp,
        correction=fc,
        residual=residual,
        passed=residual <= 1e-9,
    )
