import math

import pytest
from hypothesis import given, settings, strategies as st

from susceptibility import bounds
from susceptibility.bounds import ClassStats, NormOrder
from susceptibility.errors import DomainError, PreconditionError
from susceptibility.geometry import (
    half_sphere_expansion_exact,
    slab_expansion_exact,
    subcube_hamming_expansion_exact,
)
from susceptibility.specfun import std_normal_cdf

L0 = NormOrder.zero()
L1 = NormOrder.finite(1)
L2 = NormOrder.finite(2)
LINF = NormOrder.infinity()
SQRT_PI_8 = math.sqrt(math.pi / 8.0)


def test_norm_order_parse():
    assert NormOrder.parse("0").is_zero
    assert NormOrder.parse("l0").is_zero
    assert NormOrder.parse("inf").is_infinity
    assert NormOrder.parse("linf").is_infinity
    assert NormOrder.parse("∞").is_infinity
    assert NormOrder.parse("l2") == L2
    assert NormOrder.parse("0.5").p == 0.5
    assert NormOrder.parse(3).p_star() == 2.0
    assert NormOrder.parse("0.5").p_star() == 0.5
    assert LINF.p_star() == 2.0
    with pytest.raises(DomainError):
        NormOrder.parse("-1")
    with pytest.raises(DomainError):
        NormOrder.parse("abc")
    with pytest.raises(DomainError):
        L0.p_star()


def test_class_stats_validation():
    with pytest.raises(DomainError):
        ClassStats(10, 0.5, 0.9)
    with pytest.raises(DomainError):
        ClassStats(0, 0.5, 1.0)
    with pytest.raises(DomainError):
        ClassStats(10, 1.5, 1.0)


def test_half_sphere_bound_values():
    for n in (2, 10, 1000):
        assert bounds.half_sphere_expansion_bound(n, 0.0).probability == pytest.approx(1.0 - SQRT_PI_8, rel=1e-14)
    value = bounds.half_sphere_expansion_bound(1000, 0.1).probability
    assert value == pytest.approx(1.0 - SQRT_PI_8 * math.exp(-999 * 0.01 / 2.0), rel=1e-13)
    assert value == pytest.approx(0.995756, abs=1e-6)
    assert bounds.half_sphere_expansion_bound(3, 0.5).probability <= (1.0 + math.sin(0.5)) / 2.0
    with pytest.raises(DomainError):
        bounds.half_sphere_expansion_bound(1, 0.1)


def test_sphere_susceptibility_values():
    assert bounds.sphere_susceptibility_bound(ClassStats(1000, 0.5, 1.0), 0.1).probability == pytest.approx(
        0.995756, abs=1e-6
    )
    value = bounds.sphere_susceptibility_bound(ClassStats(3, 0.5, 2.0), 0.5).probability
    assert value == pytest.approx(1.0 - 2.0 * SQRT_PI_8 * math.exp(-0.25), rel=1e-12)
    # a hemisphere classifier on S^2 leaves unsafe mass sin(0.5)
    assert value <= math.sin(0.5)


def test_sphere_bound_vacuous_at_zero_radius():
    result = bounds.sphere_susceptibility_bound(ClassStats(100, 0.5, 1.6), 0.0)
    assert result.probability == 0.0
    assert result.valid
    assert "vacuous" in result.note


def test_sphere_bound_rejects_majority_class():
    with pytest.raises(PreconditionError, match="f_c ≤ 1/2"):
        bounds.sphere_susceptibility_bound(ClassStats(3, 0.6, 1.0), 0.5)


def test_sphere_bound_metric_variants():
    stats = ClassStats(50, 0.5, 1.0)
    geodesic = bounds.sphere_susceptibility_bound(stats, 0.3)
    chord = bounds.sphere_susceptibility_bound(stats, 0.3, metric="l2")
    linf = bounds.sphere_susceptibility_bound(stats, 0.3, metric="linf")
    assert chord.probability >= geodesic.probability
    assert linf.probability == geodesic.probability
    assert "conservative" in linf.note
    with pytest.raises(DomainError):
        bounds.sphere_susceptibility_bound(stats, 0.3, metric="l1")


def test_cube_tight_bound_values():
    value = bounds.cube_expansion_bound_tight(0.5, L2, 100, 0.2).probability
    assert value == pytest.approx(std_normal_cdf(math.sqrt(2.0 * math.pi) * 0.2), rel=1e-14)
    assert value == pytest.approx(0.6919, abs=1e-4)
    assert value <= slab_expansion_exact(0.5, 0.2, L2)
    for norm in (L1, L2, LINF, NormOrder.finite(0.5)):
        assert bounds.cube_expansion_bound_tight(0.5, norm, 37, 0.0).probability == 0.5
    # the n-dependence cancels once p >= 2
    assert bounds.cube_expansion_bound_tight(0.3, L2, 10, 0.1) == bounds.cube_expansion_bound_tight(0.3, L2, 10_000, 0.1)


@pytest.mark.parametrize("vol", [0.0, 1.0])
def test_cube_tight_bound_needs_interior_volume(vol):
    with pytest.raises(DomainError):
        bounds.cube_expansion_bound_tight(vol, L2, 10, 0.1)


def test_cube_tight_bound_rejects_l0():
    with pytest.raises(DomainError):
        bounds.cube_expansion_bound_tight(0.5, L0, 10, 1)


def test_simple_bound_variants_and_printed_form_ordering():
    mills = bounds.cube_expansion_bound_simple(L2, 100, 0.2, "mills")
    printed = bounds.cube_expansion_bound_simple(L2, 100, 0.2, "as_printed")
    tight = bounds.cube_expansion_bound_tight(0.5, L2, 100, 0.2).probability
    exact = slab_expansion_exact(0.5, 0.2, L2)
    assert mills.probability == pytest.approx(1.0 - math.exp(-math.pi * 0.04) / (2.0 * math.pi * 0.2), rel=1e-13)
    assert mills.probability == pytest.approx(0.2982, abs=1e-4)
    assert printed.probability == pytest.approx(0.8596, abs=1e-4)
    assert mills.probability <= tight <= exact < printed.probability
    assert mills.note == ""
    assert "as printed" in printed.note


def test_simple_bound_approaches_one():
    values = [bounds.cube_expansion_bound_simple(L1, 100, eps).probability for eps in (1.0, 5.0, 10.0, 20.0, 40.0)]
    assert values == sorted(values)
    assert values[-1] > 0.999


def test_simple_bound_needs_positive_radius():
    with pytest.raises(DomainError):
        bounds.cube_expansion_bound_simple(L2, 100, 0.0)
    with pytest.raises(DomainError):
        bounds.cube_expansion_bound_simple(L2, 100, 0.1, "other")


def test_mills_variant_never_exceeds_tight_bound():
    for n in (10, 100, 1000):
        for norm in (L1, L2):
            shift = bounds.gaussian_shift(norm, n)
            for t in (0.5, 1.0, 1.5, 2.0, 3.0, 4.0):
                eps = t / shift
                mills = bounds.cube_expansion_bound_simple(norm, n, eps, "mills").probability
                assert mills <= bounds.cube_expansion_bound_tight(0.5, norm, n, eps).probability


def test_eq5_style_value_is_dimension_free():
    for n in (10, 784, 10 ** 6):
        value = bounds.cube_susceptibility_bound(ClassStats(n, 0.5, 1.0), L2, 1.0, "simple_as_printed").probability
        assert value == pytest.approx(0.993123, abs=1e-6)
        assert value == pytest.approx(1.0 - math.exp(-math.pi) / (2.0 * math.pi), rel=1e-14)


def test_linf_refined_form():
    stats = ClassStats(224 * 224 * 3, 1e-3, 1.0)
    value = bounds.cube_susceptibility_bound(stats, LINF, 1e-3, "linf_refined").probability
    assert 0.0 < value < 1.0
    with pytest.raises(PreconditionError):
        bounds.cube_susceptibility_bound(ClassStats(10, 0.5, 1.0), LINF, 0.1, "linf_refined")
    with pytest.raises(PreconditionError):
        bounds.cube_susceptibility_bound(ClassStats(10, 0.1, 1.0), L1, 0.1, "linf_refined")


@pytest.mark.parametrize("form", bounds.CUBE_FORMS)
def test_cube_susceptibility_saturates_for_large_radius(form):
    stats = ClassStats(100, 0.25, 3.0)
    assert bounds.cube_susceptibility_bound(stats, L2, 1e3, form).probability == 1.0


def test_cube_susceptibility_edge_cases():
    assert bounds.cube_susceptibility_bound(ClassStats(10, 0.0, 1.0), L2, 0.1).probability == 1.0
    with pytest.raises(PreconditionError, match="f_c ≤ 1/2"):
        bounds.cube_susceptibility_bound(ClassStats(10, 0.75, 1.0), L2, 0.1)
    with pytest.raises(DomainError):
        bounds.cube_susceptibility_bound(ClassStats(10, 0.5, 1.0), L2, 0.1, "nope")


def test_small_p_expansion_values():
    assert bounds.small_p_expansion_bound(0.5, L0, 4, 2).probability == pytest.approx(1.0 - 2.0 * math.exp(-1.0), rel=1e-13)
    assert bounds.small_p_expansion_bound(0.5, L0, 4, 2).probability == pytest.approx(0.26424, abs=1e-5)
    vacuous = bounds.small_p_expansion_bound(2.0 ** -10, L0, 10, 5)
    assert vacuous.probability == 0.0 and vacuous.valid
    assert subcube_hamming_expansion_exact(0.5, 10, 5) == pytest.approx(638 / 1024, rel=1e-12)
    for norm in (L0, NormOrder.finite(0.5), L1):
        for vol in (0.25, 0.5, 1.0):
            assert bounds.small_p_expansion_bound(vol, norm, 10, 0).probability == 0.0
    assert bounds.small_p_expansion_bound(0.01, L0, 10, 10).probability == 1.0
    with pytest.raises(DomainError):
        bounds.small_p_expansion_bound(0.0, L0, 10, 1)
    with pytest.raises(DomainError):
        bounds.small_p_expansion_bound(0.5, L0, 10, 1.5)


def test_alpha_family_reduces_to_base_bound_at_one():
    for norm, eps in ((L0, 3), (NormOrder.finite(0.5), 2.0), (L1, 1.5)):
        assert bounds.small_p_expansion_bound_alpha(0.4, norm, 12, eps, 1.0) == bounds.small_p_expansion_bound(0.4, norm, 12, eps)
    with pytest.raises(DomainError):
        bounds.small_p_expansion_bound_alpha(0.4, L0, 12, 3, 0.0)


def test_small_p_tight_bound_activation_edge():
    edge = math.sqrt(784 * math.log(2.0) / 2.0)
    assert edge == pytest.approx(16.48374, abs=1e-5)
    at_edge = bounds.small_p_expansion_bound_tight(0.5, L0, 784, edge)
    assert at_edge.valid
    assert at_edge.probability == pytest.approx(0.0, abs=1e-12)
    value = bounds.small_p_expansion_bound_tight(0.5, L0, 784, 30)
    assert value.valid
    assert value.probability == pytest.approx(1.0 - math.exp(-(2.0 / 784) * (30 - edge) ** 2), rel=1e-12)
    assert value.probability == pytest.approx(0.3726, abs=2e-4)
    below = bounds.small_p_expansion_bound_tight(0.5, L0, 784, 10)
    assert not below.valid
    assert "requires" in below.note


def test_small_p_bounds_dominated_by_binomial_tail():
    for n in range(1, 31):
        for a in (0.3, 0.5, 0.7, 0.9):
            vol = a ** n
            for eps in range(n + 1):
                exact = subcube_hamming_expansion_exact(a, n, eps)
                assert bounds.small_p_expansion_bound(vol, L0, n, eps).probability <= exact + 1e-12
                tight = bounds.small_p_expansion_bound_tight(vol, L0, n, eps)
                if tight.valid:
                    assert tight.probability <= exact + 1e-12


def test_sparse_bound_values():
    stats = ClassStats(784, 0.5, 1.0)
    assert bounds.sparse_susceptibility_bound(stats, 56).probability == pytest.approx(0.963369, abs=1e-6)
    assert bounds.sparse_susceptibility_bound(stats, 0).probability == 0.0
    assert bounds.sparse_susceptibility_bound(stats, 784).probability == pytest.approx(1.0, abs=1e-300)
    assert bounds.small_p_susceptibility_bound(stats, L0, 56) == bounds.sparse_susceptibility_bound(stats, 56)
    with pytest.raises(DomainError):
        bounds.sparse_susceptibility_bound(stats, 2.5)
    with pytest.raises(PreconditionError):
        bounds.sparse_susceptibility_bound(ClassStats(784, 0.7, 1.0), 56)


def test_existence_threshold_values():
    threshold = bounds.existence_support_threshold(L2, 10, 1.0)
    assert threshold.valid
    assert threshold.threshold == pytest.approx(0.021607, abs=1e-6)
    assert bounds.existence_support_threshold(L2, 10, 1.0) == bounds.existence_support_threshold(L2, 10_000, 1.0)
    n = 10
    assert bounds.existence_support_threshold(L2, n, math.sqrt(n)).threshold == pytest.approx(
        0.5 * math.exp(-math.pi * n), rel=1e-12
    )
    assert not bounds.existence_support_threshold(L0, 784, 16).valid
    assert bounds.existence_support_threshold(L0, 784, 17).valid


def test_existence_check():
    assert bounds.existence_check(0.05, L2, 10, 1.0)
    assert not bounds.existence_check(0.01, L2, 10, 1.0)
    assert bounds.existence_check(1.0, L1, 50, 0.3)
    with pytest.raises(PreconditionError):
        bounds.existence_check(0.5, L0, 784, 16)
    with pytest.raises(DomainError):
        bounds.existence_check(1.5, L2, 10, 1.0)


def test_rescale_transfer():
    assert bounds.mnist_rescale_transfer(1.0, 0.9, 2, "up") == bounds.TransferResult(2.0, 0.9)
    assert bounds.mnist_rescale_transfer(1.7, 0.3, 1, "up") == bounds.TransferResult(1.7, 0.3)
    up = bounds.mnist_rescale_transfer(0.7, 0.4, 3, "up")
    back = bounds.mnist_rescale_transfer(up.eps, up.p_fool, 3, "down")
    assert back.eps == pytest.approx(0.7, rel=1e-15)
    assert back.p_fool == 0.4
    with pytest.raises(DomainError):
        bounds.mnist_rescale_transfer(1.0, 0.9, 0, "up")
    with pytest.raises(DomainError):
        bounds.mnist_rescale_transfer(1.0, 0.9, 2, "sideways")


def test_half_sphere_bound_below_exact_expansion():
    for n in (3, 10, 100, 1000, 5000):
        for eps in [0.01 * k for k in range(1, 101)]:
            exact = half_sphere_expansion_exact(n, eps)
            assert bounds.half_sphere_expansion_bound(n, eps).probability <= exact


def test_tight_bound_below_slab_expansion():
    norms = (NormOrder.finite(0.5), L1, L2, NormOrder.finite(3), LINF)
    for a in (0.05, 0.2, 0.5, 0.8, 0.95):
        for norm in norms:
            for eps in (0.01, 0.05, 0.1, 0.3, 1.0):
                for n in (1, 10, 100):
                    bound = bounds.cube_expansion_bound_tight(a, norm, n, eps).probability
                    assert bound <= slab_expansion_exact(a, eps, norm) + 1e-12


probabilities = st.floats(min_value=1e-6, max_value=0.5)
radii = st.floats(min_value=0.0, max_value=5.0)


@given(n=st.integers(2, 5000), f_c=probabilities, u=st.floats(1.0, 50.0), eps=radii, step=st.floats(0.0, 1.0))
@settings(max_examples=200)
def test_sphere_bound_monotone_and_clamped(n, f_c, u, eps, step):
    low = bounds.sphere_susceptibility_bound(ClassStats(n, f_c, u), eps).probability
    high = bounds.sphere_susceptibility_bound(ClassStats(n, f_c, u), eps + step).probability
    denser = bounds.sphere_susceptibility_bound(ClassStats(n, f_c, u * 2.0), eps).probability
    assert 0.0 <= low <= high <= 1.0
    assert denser <= low


@given(
    n=st.integers(1, 10 ** 6),
    f_c=probabilities,
    u=st.floats(1.0, 50.0),
    eps=st.floats(1e-3, 5.0),
    step=st.floats(0.0, 1.0),
    p=st.sampled_from([0.5, 1.0, 2.0, 3.0, math.inf]),
)
@settings(max_examples=200)
def test_cube_bound_monotone_and_clamped(n, f_c, u, eps, step, p):
    norm = NormOrder.parse(p)
    stats = ClassStats(n, f_c, u)
    for form in ("tight", "simple_mills"):
        low = bounds.cube_susceptibility_bound(stats, norm, eps, form).probability
        high = bounds.cube_susceptibility_bound(stats, norm, eps + step, form).probability
        denser = bounds.cube_susceptibility_bound(ClassStats(n, f_c, u * 2.0), norm, eps, form).probability
        assert 0.0 <= low <= high <= 1.0
        assert denser <= low


@given(n=st.integers(1, 2000), u=st.floats(1.0, 50.0), eps=st.integers(0, 3000), step=st.integers(0, 100))
@settings(max_examples=200)
def test_sparse_bound_monotone_and_clamped(n, u, eps, step):
    stats = ClassStats(n, 0.5, u)
    low = bounds.sparse_susceptibility_bound(stats, eps).probability
    high = bounds.sparse_susceptibility_bound(stats, eps + step).probability
    assert 0.0 <= low <= high <= 1.0


def test_lp_norm_comparison_factor():
    assert bounds.lp_norm_comparison_factor(L2, 100) == 1.0
    assert bounds.lp_norm_comparison_factor(LINF, 100) == 1.0
    assert bounds.lp_norm_comparison_factor(NormOrder.finite(4), 100) == 1.0
    assert bounds.lp_norm_comparison_factor(L1, 100) == pytest.approx(10.0, rel=1e-14)
    with pytest.raises(DomainError):
        bounds.lp_norm_comparison_factor(L0, 100)


@pytest.mark.parametrize("norm, form", [(L2, "tight"), (LINF, "linf_refined")])
def test_cube_bound_handles_tiny_class_fraction(norm, form):
    # at eps = 0 the bound is 1 - f_c exactly
    assert bounds.cube_susceptibility_bound(ClassStats(100, 0.1), norm, 0.0, form).probability == pytest.approx(0.9, rel=1e-12)
    tiny = bounds.cube_susceptibility_bound(ClassStats(100, 1e-17), norm, 0.1, form)
    small = bounds.cube_susceptibility_bound(ClassStats(100, 1e-3), norm, 0.1, form)
    assert tiny.valid
    assert 0.0 <= small.probability <= tiny.probability <= 1.0
