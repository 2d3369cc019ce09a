"""Product part, correction term, weight sums, and size-free bounds."""

import itertools
import math

import numpy as np
import pytest

from flab import (
    Assignment,
    CorrectionFunctional,
    CostGuardError,
    MarkovState,
    ProductPartFunctional,
    ProductState,
    Region,
    SX,
    SZ,
    SiteOperator,
    SiteState,
    b_hat_bound,
    b_n_quantity,
    center,
    chain_metric,
    classify_tuple,
    cluster_expansion_check,
    covariance_from_state,
    decomposition_check,
    f_correction_moment,
    induced_moment,
    n_hat_series,
    product_part_moment,
    pure_state,
    random_density,
    random_hermitian_unit,
    spread_optimal_enumeration,
    wick_defect_moment,
    wick_moment,
)

RNG = np.random.default_rng(577215)

T_STD = [[0.8, 0.2], [0.2, 0.8]]


def centered(a, omega):
    return center(a, omega)


# =============================================================================
# Product part
# =============================================================================

def test_product_part_equals_product_state_moment():
    """On an actual product state the product part is the whole moment."""
    rho = random_density(RNG, 2)
    ps = ProductState(rho)
    for size in (2, 4, 7):
        region = Region(ps.metric, range(size))
        for n in (2, 3, 4):
            word = tuple(
                centered(SiteOperator(random_hermitian_unit(RNG, 2).mat), rho)
                for _ in range(n)
            )
            pp = product_part_moment(rho, size, word)
            direct = induced_moment(ps, region, word)
            assert abs(pp - direct) < 1e-11


def test_product_part_requires_centered_word():
    rho = SiteState(np.diag([0.75, 0.25]))
    with pytest.raises(ValueError):
        product_part_moment(rho, 4, (SZ, SZ))  # omega(sz) = 1/2, not centered
    product_part_moment(rho, 4, (SX, SX))  # omega(sx) = 0 is fine


def test_product_part_degree_guard():
    rho = SiteState(np.diag([0.5, 0.5]))
    with pytest.raises(CostGuardError):
        product_part_moment(rho, 4, (SX,) * 9)


# =============================================================================
# Correction term and the exact decomposition
# =============================================================================

def test_correction_is_zero_on_product_states():
    rho = random_density(RNG, 2)
    ps = ProductState(rho)
    region = Region(ps.metric, range(5))
    word = tuple(
        centered(SiteOperator(random_hermitian_unit(RNG, 2).mat), rho)
        for _ in range(3)
    )
    assert abs(f_correction_moment(ps, region, word)) < 1e-12


def test_decomposition_residual_markov():
    mk = MarkovState(T_STD, alpha=0.4)
    omega = mk.single_site_restriction()
    for size in (2, 4, 7):
        region = Region(mk.metric, range(size))
        for n in (1, 2, 3, 4):
            chk = decomposition_check(mk, region, (SZ,) * n)
            assert chk.passed, (size, n)
            assert chk.residual < 1e-11
            combined = chk.product_part + chk.correction
            assert abs(chk.direct - combined) < 1e-11


def test_decomposition_matches_sum_on_mixed_words():
    mk = MarkovState([[0.9, 0.1], [0.1, 0.9]], alpha=0.1)
    region = Region(mk.metric, range(5))
    word = (SZ, SX, SZ)
    chk = decomposition_check(mk, region, word)
    assert chk.residual < 1e-11


def test_correction_functional_matches_moment():
    mk = MarkovState(T_STD, alpha=0.4)
    region = Region(mk.metric, range(4))
    omega = mk.single_site_restriction()
    corr = CorrectionFunctional(mk, region)
    assert corr(()) == 0.0
    for _ in range(5):
        word = tuple(
            centered(SiteOperator(random_hermitian_unit(RNG, 2).mat), omega)
            for _ in range(3)
        )
        assert abs(corr(word) - f_correction_moment(mk, region, word)) < 1e-12


# =============================================================================
# Telescoped cluster expansion on explicit assignments
# =============================================================================

def test_cluster_expansion_check_markov():
    mk = MarkovState(T_STD, alpha=0.4)
    m = mk.metric
    for sites in [(0, 2), (1, 3, 4), (0, 1, 5)]:
        reg = Region(m, sites)
        asg = Assignment(reg, {x: SZ for x in sites})
        chk = cluster_expansion_check(mk, asg)
        assert chk.passed, sites
        assert chk.deviation < 1e-11


def test_cluster_expansion_check_random_ops():
    mk = MarkovState(T_STD, alpha=0.4)
    m = mk.metric
    for _ in range(10):
        k = int(RNG.integers(2, 5))
        sites = tuple(sorted(RNG.choice(8, size=k, replace=False).tolist()))
        reg = Region(m, sites)
        ops = {
            x: SiteOperator(random_hermitian_unit(RNG, 2).mat) for x in sites
        }
        chk = cluster_expansion_check(mk, Assignment(reg, ops))
        assert chk.passed, sites
        assert chk.deviation < 1e-10


# =============================================================================
# Weight sums B_n and their size-free majorant
# =============================================================================

def brute_b_n(sites, n, metric):
    """Direct tuple sum over the first-singleton telescoping weights."""
    total = 0.0
    for tup in itertools.product(sites, repeat=n):
        cls = classify_tuple(tup)
        sub = cls.subset
        if len(sub) < 2:
            continue
        enum = spread_optimal_enumeration(Region(metric, sub))
        counts = {}
        for v in tup:
            counts[v] = counts.get(v, 0) + 1
        m = len(enum)
        mults = [counts[y] for y in enum]
        for k in range(1, m):
            if all(mults[l] > 1 for l in range(k - 1)):
                d = min(metric.distance(enum[k - 1], enum[j]) for j in range(k, m))
                total += math.exp(-d)
    return total


def test_b_n_hand_values():
    m = chain_metric(1.0)
    assert b_n_quantity(Region(m, (0, 1)), 2) == pytest.approx(
        2 * math.exp(-1), abs=1e-14
    )
    assert b_n_quantity(Region(m, (0, 1, 2)), 2) == pytest.approx(
        4 * math.exp(-1) + 2 * math.exp(-2), abs=1e-14
    )
    assert b_n_quantity(Region(m, (0,)), 2) == 0.0


def test_b_n_matches_brute_force():
    m = chain_metric(1.0)
    for sites in [(0, 1, 2, 3), (0, 2, 5), (0, 1, 2, 3, 4)]:
        for n in (2, 3, 4):
            grouped = b_n_quantity(Region(m, sites), n)
            brute = brute_b_n(sites, n, m)
            assert grouped == pytest.approx(brute, abs=1e-11), (sites, n)


def test_b_n_scaled_metric():
    half = chain_metric(0.5)
    for n in (2, 3):
        grouped = b_n_quantity(Region(half, (0, 1, 3)), n)
        brute = brute_b_n((0, 1, 3), n, half)
        assert grouped == pytest.approx(brute, abs=1e-12)


def test_n_hat_series_closed_form():
    m = chain_metric(1.0)
    e = math.e
    closed = 2 * e / (e - 1) ** 2 + 1 / (e - 1)
    assert n_hat_series(1, m) == pytest.approx(closed, abs=1e-12)


def test_n_hat_series_majorizes_partial_sums():
    m = chain_metric(1.0)
    for k in (1, 2, 3):
        val = n_hat_series(k, m)
        partial = sum(
            (2 * r + 1) ** k * math.exp(-r) for r in range(1, 60)
        )
        assert val >= partial - 1e-9
        assert val == pytest.approx(partial, rel=1e-10)


def test_b_hat_values_and_bound():
    m = chain_metric(1.0)
    assert b_hat_bound(2, m) == pytest.approx(2 * n_hat_series(2, m), abs=1e-10)
    for n in (2, 3, 4):
        bh = b_hat_bound(n, m)
        for size in range(2, 13):
            region = Region(m, range(size))
            assert b_n_quantity(region, n) <= bh * size ** (n / 2.0) + 1e-9


def test_b_hat_degree_guard():
    with pytest.raises(CostGuardError):
        b_hat_bound(9, chain_metric(1.0))


# =============================================================================
# Wick defect
# =============================================================================

def test_wick_defect_vanishes_at_degree_two():
    rho = SiteState(np.diag([0.75, 0.25]))
    for size in (2, 5, 9):
        assert abs(wick_defect_moment(rho, size, (SX, SX))) < 1e-13


def test_wick_defect_kurtosis_value():
    """For the ground state and the flip word the defect is the finite-size
    prefactor gap: (3 - 2/L) - (1 - 1/L) * 3 = 1/L."""
    rho = pure_state([1.0, 0.0])
    for size in (4, 8, 16):
        d = wick_defect_moment(rho, size, (SX,) * 4)
        assert d.real == pytest.approx(1.0 / size, abs=1e-12)


def test_wick_defect_decays():
    rho = random_density(RNG, 2)
    word = tuple(
        center(SiteOperator(random_hermitian_unit(RNG, 2).mat), rho)
        for _ in range(4)
    )
    values = [abs(wick_defect_moment(rho, size, word)) for size in (4, 16, 64)]
    assert values[2] <= values[0] / 4 + 1e-12


def test_wick_defect_odd_degree_is_product_part():
    rho = SiteState(np.diag([0.75, 0.25]))
    size = 6
    word = (SX, SX, SX)
    assert wick_defect_moment(rho, size, word) == pytest.approx(
        product_part_moment(rho, size, word), abs=1e-14
    )


def test_product_part_functional_batch():
    rho = random_density(RNG, 2)
    F = ProductPartFunctional(rho, 8)
    words = [
        tuple(center(SiteOperator(random_hermitian_unit(RNG, 2).mat), rho)
              for _ in range(3))
        for _ in range(6)
    ]
    vals = F.batch(words)
    for w, v in zip(words, vals):
        assert abs(v - product_part_moment(rho, 8, w)) < 1e-12
