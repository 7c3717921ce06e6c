"""Stable jump kernel: dual evaluation routes, jump rates, and envelopes."""

import numpy as np
import pytest

from treestable.stable import (
    check_kernel_envelopes,
    distance_distribution,
    inner_decay_rate,
    inner_exponent_curve,
    inner_saddle_point,
    jump_rate_tail,
    kernel_spectral,
    kernel_subordination,
    levy_measure,
    levy_measure_quad,
    mass_repartition,
    outer_rate_profile,
    outer_saddle,
    sphere_jump_rates,
    total_jump_rate,
)
from treestable.subordinator import StableParams
from treestable.tree import TreeParams, sphere_size

TREE = TreeParams(2)

# regression pins for q = 2, alpha = 1, t = 1; frozen after the quadrature
# and spectral routes agreed on them to 1e-13
KERNEL_SPOTS = [
    (0, 0.40987934473955406),
    (1, 0.07717339573940783),
    (2, 0.016075344371062214),
]

# per-vertex jump intensities nu(n) for q = 2, frozen the same way from the
# accumulation and direct-quadrature routes
LEVY_SPOTS = {
    (1.0, 1): 0.1844883104814,
    (1.0, 2): 0.02017365556827,
    (1.0, 5): 4.551984039737e-4,
    (1.0, 12): 7.855960218597e-7,
    (0.5, 1): 0.1005311377096,
    (1.5, 1): 0.2602363081089,
}


def test_kernel_regression_spots():
    kern = kernel_subordination(TREE, StableParams(1.0), 1.0, 5)
    for n, expected in KERNEL_SPOTS:
        np.testing.assert_allclose(kern.values[n], expected, rtol=1e-10)


def test_dual_routes_agree():
    for alpha in (0.5, 1.0, 1.5):
        s = StableParams(alpha)
        for t in (0.5, 2.0):
            sub = kernel_subordination(TREE, s, t, 15)
            spec = kernel_spectral(TREE, s, t, 15)
            np.testing.assert_allclose(
                spec.values, sub.values, rtol=1e-6,
                err_msg=f"alpha {alpha}, t {t}",
            )


def test_dual_routes_agree_branching_three():
    s = StableParams(1.0)
    sub = kernel_subordination(TreeParams(3), s, 1.0, 10)
    spec = kernel_spectral(TreeParams(3), s, 1.0, 10)
    np.testing.assert_allclose(spec.values, sub.values, rtol=1e-6)


def test_levy_measure_spots_and_quad_route():
    for (alpha, n), expected in LEVY_SPOTS.items():
        s = StableParams(alpha)
        nu = levy_measure(TREE, s, max(n, 1))
        np.testing.assert_allclose(nu[n], expected, rtol=1e-9,
                                   err_msg=f"alpha {alpha}, n {n}")
        np.testing.assert_allclose(levy_measure_quad(TREE, s, n), expected,
                                   rtol=1e-8, err_msg=f"quad alpha {alpha}, n {n}")


def test_levy_measure_domain():
    s = StableParams(1.0)
    with pytest.raises(ValueError):
        levy_measure(TREE, s, 0)
    with pytest.raises(ValueError):
        levy_measure(TREE, s, 901)
    with pytest.raises(ValueError):
        levy_measure_quad(TREE, s, 0)


def test_small_time_limit_recovers_levy_measure():
    # p_t(n) / t -> nu(n); one Richardson step in t kills the linear error
    for alpha in (1.0, 1.5):
        s = StableParams(alpha)
        nu = levy_measure(TREE, s, 3)
        for n in (1, 3):
            t = 0.02
            f1 = kernel_subordination(TREE, s, t, n).values[n] / t
            f2 = kernel_subordination(TREE, s, t / 2, n).values[n] / (t / 2)
            np.testing.assert_allclose(2.0 * f2 - f1, nu[n], rtol=1e-3)


def test_total_rate_identity():
    # lambda* must equal the sphere-summed rates plus the analytic tail
    for alpha in (0.5, 1.0, 1.5):
        s = StableParams(alpha)
        lam = total_jump_rate(TREE, s)
        rates = sphere_jump_rates(TREE, s, 30)
        np.testing.assert_allclose(
            rates[1:].sum() + jump_rate_tail(TREE, s, 30), lam, rtol=1e-9
        )
    np.testing.assert_allclose(
        total_jump_rate(TREE, StableParams(1.0)), 0.9461158864090246, rtol=1e-9
    )


def test_jump_rate_tail_differences():
    s = StableParams(1.5)
    rates = sphere_jump_rates(TREE, s, 12)
    for j in (2, 5, 10):
        diff = jump_rate_tail(TREE, s, j) - jump_rate_tail(TREE, s, j + 1)
        np.testing.assert_allclose(diff, rates[j + 1], rtol=1e-8)
    with pytest.raises(ValueError):
        jump_rate_tail(TREE, s, 0)


def test_distance_distribution_matches_kernel():
    s = StableParams(1.0)
    rho = distance_distribution(TREE, s, 1.0, 15)
    kern = kernel_subordination(TREE, s, 1.0, 15)
    sizes = np.array([sphere_size(TREE, n) for n in range(16)], dtype=float)
    np.testing.assert_allclose(rho, kern.values * sizes, rtol=1e-9)
    assert rho.sum() < 1.0 + 1e-12


def test_mass_repartition_routes_agree():
    s = StableParams(1.0)
    direct = mass_repartition(TREE, s, 30.0, 0.5, 2.0)
    assert direct.method == "direct"
    comp = mass_repartition(TREE, s, 30.0, 0.5, 2.0, direct_budget=100)
    assert comp.method == "complement"
    assert abs(comp.mass - direct.mass) <= comp.error_bound


def test_mass_repartition_exponent_override():
    s = StableParams(1.0)
    ann = mass_repartition(TREE, s, 9.0, 0.5, 2.0, beta_exponent=1.0)
    assert (ann.radius_lo, ann.radius_hi) == (5, 18)
    default = mass_repartition(TREE, s, 9.0, 0.5, 2.0)
    assert (default.radius_lo, default.radius_hi) == (41, 162)
    empty = mass_repartition(TREE, s, 1.0, 1.2, 1.4)
    assert empty.mass == 0.0 and empty.method == "empty"


def test_saddle_point_closed_forms():
    v, value = outer_saddle(TREE)
    q = TREE.branching
    np.testing.assert_allclose(v, (q + 1.0) / (q - 1.0), rtol=1e-5)
    np.testing.assert_allclose(value, -np.log(2.0 * q / (q + 1.0)), rtol=1e-10)
    with pytest.raises(ValueError):
        outer_rate_profile(TREE, 0.0)


def test_inner_exponent_curve_minimum():
    s = StableParams(1.0)
    saddle = inner_saddle_point(TREE, s)
    rate = inner_decay_rate(TREE, s)
    np.testing.assert_allclose(inner_exponent_curve(TREE, s, saddle), rate, rtol=1e-12)
    assert inner_exponent_curve(TREE, s, 1.2 * saddle) > rate
    assert inner_exponent_curve(TREE, s, 0.8 * saddle) > rate


def test_kernel_envelopes_in_band():
    for q in (2, 3):
        for band in check_kernel_envelopes(TreeParams(q), StableParams(1.0)):
            assert band.passed, f"q {q}: {band}"


def test_domain_errors():
    s = StableParams(1.0)
    with pytest.raises(ValueError):
        kernel_subordination(TREE, s, 0.0, 5)
    with pytest.raises(ValueError):
        kernel_spectral(TREE, s, 1.0, 500, size=400)
    with pytest.raises(ValueError):
        mass_repartition(TREE, s, 1.0, 2.0, 0.5)
