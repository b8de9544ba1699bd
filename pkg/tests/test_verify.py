import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from tofwave import verify as vf
from tofwave.errors import OutsideSmallnessBall
from tofwave.gridw import WeightedNormSpec, weighted_norm
from tofwave.spectral import inner

QUICK = vf.SweepSpec(x_range=(1e-2, 1e2), n_x=9, beta_range=(1e-3, 1e2), n_beta=11, epsrel=1e-9)


def eta(x):
    return math.sqrt(1.0 + x * x)


def direct_1(x, beta, k, q):
    """Quadrature in the original variable y on [x, inf)."""
    val, _ = integrate.quad(lambda y: eta(x) ** k * eta(y) ** (-(k + q)) * math.exp(beta * (x - y)), x, np.inf,
                            epsabs=0, epsrel=1e-12, limit=400)
    return val


def direct_3(x, beta, k):
    val, _ = integrate.quad(lambda y: (eta(x) / eta(y)) ** k * math.exp(beta * (y - x)), 0.0, x,
                            epsabs=0, epsrel=1e-12, limit=400)
    return val


@pytest.mark.parametrize("beta", [0.01, 1.0, 50.0])
def test_integral_1_without_weights_is_exponential(beta):
    assert vf.kernel_integral_1(3.0, beta, 0.0, 0.0) == pytest.approx(1.0 / beta, rel=1e-9)


@pytest.mark.parametrize("x, beta, k, q", [(0.0, 1.0, 2.0, 0.5), (5.0, 0.1, 4.0, 1.0), (40.0, 3.0, 10.0, 0.0)])
def test_integral_1_matches_direct_quadrature(x, beta, k, q):
    assert vf.kernel_integral_1(x, beta, k, q) == pytest.approx(direct_1(x, beta, k, q), rel=1e-8)


def test_integral_1_zero_beta_closed_form():
    # k = 1, q = 1 at x = 0: int_0^inf (1 + y^2)^-1 dy = pi / 2
    assert vf.kernel_integral_1(0.0, 0.0, 1.0, 1.0) == pytest.approx(math.pi / 2, rel=1e-9)
    assert vf.kernel_integral_1(0.0, 0.0, 0.5, 0.5) == math.inf


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 50.0), st.floats(1e-3, 1e3), st.floats(0.0, 1.0))
def test_integral_2_flat_weight_closed_form(x, beta, dummy):
    exact = -math.expm1(-beta * x) / beta
    assert vf.kernel_integral_2(x, beta, 0.0) == pytest.approx(exact, rel=1e-8, abs=1e-300)


@pytest.mark.parametrize("x, beta, k", [(1.0, 0.5, 1.0), (20.0, 0.05, 2.0), (300.0, 2.0, 3.0)])
def test_integral_3_matches_direct_quadrature(x, beta, k):
    assert vf.kernel_integral_3(x, beta, k) == pytest.approx(direct_3(x, beta, k), rel=1e-8)


def test_integrals_vanish_at_origin():
    assert vf.kernel_integral_2(0.0, 1.0, 0.5) == 0.0
    assert vf.kernel_integral_3(0.0, 1.0, 2.0) == 0.0


def test_sweep_spec_validation_and_refinement():
    with pytest.raises(ValueError):
        vf.SweepSpec(x_range=(1.0, 0.5))
    fine = QUICK.refined()
    assert fine.n_x == 2 * QUICK.n_x - 1
    assert fine.epsrel == QUICK.epsrel / 10
    assert QUICK.xs[0] == 0.0


def test_bound_1_flat_weights_is_one():
    rep = vf.kernel_bound_1(0.0, 0.0, QUICK, study=False)
    assert rep["sup"] == pytest.approx(1.0, rel=1e-8)
    assert rep["pass"]


def test_bound_1_zero_beta_constant():
    rep = vf.kernel_bound_1(2.0, 1.0, QUICK, beta_zero=True, study=False)
    assert rep["bound"] == pytest.approx(2 ** 1.5 / 2)
    assert rep["sup"] <= rep["bound"] * (1 + 1e-6)
    assert rep["pass"]


def test_bound_1_with_resolution_study():
    rep = vf.kernel_bound_1(3.0, 0.5, QUICK)
    assert math.isfinite(rep["sup"])
    assert rep["resolution_study"]["relative_drift"] < 0.01
    assert rep["pass"]


def test_bound_1_argument_checks():
    with pytest.raises(ValueError):
        vf.kernel_bound_1(2.0, 0.5, QUICK, beta_zero=True)
    with pytest.raises(ValueError):
        vf.kernel_bound_1(0.0, 1.0, QUICK)


def test_bound_2_flat_weight_sup_is_one():
    rep = vf.kernel_bound_2(0.0, QUICK, study=False)
    assert rep["sup"] == pytest.approx(1.0, rel=1e-6)
    assert rep["reversed_orientation_sample"]["value"] == pytest.approx(math.expm1(10.0), rel=1e-8)


def test_bound_2_large_beta_decays():
    for beta in (1.0, 10.0, 100.0):
        assert vf.kernel_integral_2(30.0, beta, 0.5) <= 1.0 / beta


def test_bound_3_penalty_controls_growth():
    k = 2.0
    # with the beta^k factor the product stays bounded; with beta alone it grows as beta -> 0
    scaled = [beta ** k * vf.kernel_integral_3(1.0 / beta, beta, k) for beta in (1e-1, 1e-2, 1e-3)]
    plain = [beta * vf.kernel_integral_3(1.0 / beta, beta, k) for beta in (1e-1, 1e-2, 1e-3)]
    assert max(scaled) < 2.0
    assert plain[2] > 50 * plain[0]
    rep = vf.kernel_bound_3(k, sweep=QUICK, study=False)
    assert math.isfinite(rep["sup"]) and rep["pass"]


def test_bound_3_log_penalty_for_unit_k():
    rep = vf.kernel_bound_3(1.0, sweep=QUICK, study=False)
    assert math.isfinite(rep["sup"])
    with pytest.raises(ValueError):
        vf.kernel_bound_3(0.5, sweep=QUICK)


@pytest.mark.parametrize("p, c3", [(2.0, 4.0), (3.0, 6.0), (1.5, 2 ** 0.5 * 3)])
def test_gronwall_constant(p, c3):
    assert vf.gronwall_constant(p) == pytest.approx(c3, rel=1e-14)


def test_gronwall_constant_rejects_p_at_most_one():
    with pytest.raises(ValueError):
        vf.gronwall_constant(1.0)


def test_gronwall_integral_closed_form_p2():
    # p = 2: (1+t) int_0^t (1+s)^-1 (1+t-s)^-2 ds has an elementary antiderivative
    t = 3.0
    exact = (1 + t) * (2 * math.log(1 + t) / (2 + t) ** 2 + t / ((1 + t) * (2 + t)))
    assert vf.gronwall_integral(2.0, t) == pytest.approx(exact, rel=1e-9)
    assert vf.gronwall_integral(2.0, 0.0) == 0.0


def test_gronwall_kernel_sup_and_monotonicity():
    rep = vf.gronwall_kernel_constant(2.0)
    assert rep["pass"]
    assert rep["bound"] == 4.0
    assert rep["sup"] == pytest.approx(1.1997, abs=1e-3)
    # the integral overshoots its limit for p >= 2
    assert not rep["resolution_study"]["monotone"]
    assert vf.gronwall_kernel_constant(1.5)["resolution_study"]["monotone"]


def test_gronwall_iteration_below_threshold():
    C1 = C2 = 1.0
    eps = 1.0 / (36 * C1 * C2)
    rep = vf.gronwall_iteration_check(2.0, C1, C2, eps)
    assert rep["pass"]
    assert rep["resolution_study"]["max_ratio"] <= 1.0


def test_gronwall_iteration_zero_forcing():
    rep = vf.gronwall_iteration_check(2.0, 1.0, 1.0, 0.0)
    assert np.all(rep["phi"] == 0.0)
    assert rep["pass"]


def test_remainder_vanishes_without_perturbation(small_wave):
    pr = small_wave.profile
    r = vf.remainder_f(pr, 0.0, np.zeros_like(pr.v_star))
    assert np.max(np.abs(r)) == 0.0


def test_remainder_is_quadratic(small_wave, rng):
    pr = small_wave.profile
    w = vf.random_perturbations(pr.grid, 1, 1e-2, rng)[0]
    vals = vf.quadratic_scaling(pr, w)
    assert vals[0] / vals[1] == pytest.approx(4.0, rel=0.2)
    assert vals[1] / vals[2] == pytest.approx(4.0, rel=0.2)


def test_projected_remainder_is_orthogonal(small_wave, rng):
    pr = small_wave.profile
    psi2 = small_wave.psi2
    w = vf.random_perturbations(pr.grid, 1, 1e-2, rng)[0]
    r_f = vf.remainder_f(pr, 0.01, w)
    r_w = vf.remainder_w(pr, psi2, 0.01, r_f)
    spec = WeightedNormSpec(2.0, 0)
    assert abs(inner(psi2, r_w, pr.grid)) <= 1e-10 * weighted_norm(r_w, spec, pr.grid)


def test_random_perturbations_are_scaled(small_wave, rng):
    ws = vf.random_perturbations(small_wave.profile.grid, 3, 0.02, rng)
    assert len(ws) == 3
    for w in ws:
        assert np.max(np.abs(w)) == pytest.approx(0.02)


def test_remainder_checks_reject_large_data(small_wave, rng):
    pr = small_wave.profile
    w = vf.random_perturbations(pr.grid, 2, 1e-2, rng)
    with pytest.raises(OutsideSmallnessBall):
        vf.remainder_checks(pr, small_wave.psi2, [0.5], [(w[0], w[1])])


def test_remainder_constants_of_two_sets(small_wave):
    # the constant is a sampled sup; the 25% stability check runs on the default grid
    pr = small_wave.profile
    rng = np.random.default_rng(0)
    consts = []
    for _ in range(2):
        ws = vf.random_perturbations(pr.grid, 200, 1e-2, rng)
        rep = vf.remainder_checks(pr, small_wave.psi2, [0.0, 3e-3, -7e-3], list(zip(ws[:100], ws[100:])))
        assert rep["resolution_study"]["max_projection_residual"] < 1e-10
        consts.append(rep["sup"])
    assert all(1.0 < c < 3.0 for c in consts)


def test_report_json_keys():
    rep = vf.gronwall_iteration_check(2.0, 1.0, 1.0, 0.01, T=20.0)
    data = json.loads(vf.report_json(rep))
    assert sorted(data) == sorted(["check", "params", "sup", "bound", "pass", "resolution_study"])
