import csv

import numpy as np
import pytest

from tofwave import evolution as ev
from tofwave import spectral as sp
from tofwave.errors import (
    DerivativeDegenerate,
    EmptyWindow,
    NewtonFailed,
    NonPositiveValues,
    TailNotSettled,
)
from tofwave.gridw import Grid, RateParams, WeightedNormSpec, weighted_norm
from tofwave.profile import local_lagrange_interpolate


def bump(x, shift=0.0, amp=0.05):
    return amp * np.stack([np.exp(-(x - shift - 2) ** 2 / 4), np.exp(-(x - shift + 1) ** 2 / 4)], axis=-1)


def run_stepper(profile, u, dt, T, scheme):
    st = ev.PerturbationStepper(profile, dt, scheme)
    for _ in range(int(round(T / dt))):
        u = st.step(u)
    return u


def test_config_validation():
    g = Grid(10.0, 64)
    for kw in (dict(dt=0.0), dict(dt=1.0, T=0.5), dict(scheme="RK4"), dict(output_stride=0)):
        with pytest.raises(ValueError):
            ev.SimulationConfig(g, **kw)
    assert ev.SimulationConfig(g, dt=0.01, T=2.0).n_steps == 200


def test_step_keeps_profile_stationary(small_wave):
    pr = small_wave.profile
    dt = 0.01
    out = ev.step_nonlinear(pr.v_star, dt, pr.params, pr.omega, pr.c, pr.grid, right=pr.v_inf)
    assert np.max(np.abs(out - pr.v_star)) <= dt * 1e-8


def test_step_keeps_zero_state():
    from tofwave.model import DEFAULT_PARAMS, solve_rest_state

    rest = solve_rest_state(DEFAULT_PARAMS)
    g = Grid(20.0, 128)
    out = ev.step_nonlinear(np.zeros((128, 2)), 0.05, DEFAULT_PARAMS, rest.omega, 1.0, g, right=(0.0, 0.0))
    assert np.array_equal(out, np.zeros((128, 2)))


@pytest.mark.parametrize("scheme, order", [("IMEX1", 2.0), ("IMEX2", 4.0)])
def test_time_order(small_wave, scheme, order):
    # successive differences at T = 2 shrink by 2^order per halving of dt
    pr = small_wave.profile
    u0 = bump(pr.grid.x)
    us = [run_stepper(pr, u0, dt, 2.0, scheme) for dt in (0.02, 0.01, 0.005, 0.0025)]
    d = [np.max(np.abs(a - b)) for a, b in zip(us, us[1:])]
    assert d[0] / d[1] == pytest.approx(order, rel=0.15)
    assert d[1] / d[2] == pytest.approx(order, rel=0.1)


def test_perturbation_and_full_field_steps_agree(small_wave):
    pr = small_wave.profile
    u0 = bump(pr.grid.x)
    u1 = ev.PerturbationStepper(pr, 0.01, "IMEX1").step(u0)
    v1 = ev.step_nonlinear(pr.v_star + u0, 0.01, pr.params, pr.omega, pr.c, pr.grid, right=pr.v_inf)
    assert np.max(np.abs(pr.v_star + u1 - v1)) < 1e-12


def test_translation_equivariance(small_wave):
    pr = small_wave.profile
    g = pr.grid
    x = g.x
    d = 0.37
    ua = run_stepper(pr, bump(x), 0.01, 5.0, "IMEX2")
    ub = run_stepper(pr, pr.shift_difference(d) + bump(x, d), 0.01, 5.0, "IMEX2")
    shifted_a = local_lagrange_interpolate(pr.v_star + ua, g, x - d, 8)
    inner_zone = np.abs(x) < 0.5 * g.L
    interp_err = np.max(np.abs(local_lagrange_interpolate(pr.shifted(d), g, x + d, 8) - pr.v_star)[inner_zone])
    assert np.max(np.abs(shifted_a - pr.v_star - ub)[inner_zone]) < 5 * interp_err


def test_dt_above_explicit_bound_is_rejected(small_wave):
    pr = small_wave.profile
    cfg = ev.SimulationConfig(pr.grid, dt=10.0, T=20.0)
    with pytest.raises(ValueError):
        ev.evolve_nonlinear(np.zeros_like(pr.v_star), cfg, pr, small_wave.psi2)


def test_decompose_identity_cases(small_wave):
    pr = small_wave.profile
    psi2 = small_wave.psi2
    tau, w = ev.decompose(pr.v_star, pr, psi2)
    assert tau == 0.0
    assert np.max(np.abs(w)) == 0.0
    g = pr.grid
    r = bump(g.x)
    w0 = r - pr.v_star_x * sp.inner(psi2, r, g) / sp.inner(psi2, pr.v_star_x, g)
    tau, w = ev.decompose(pr.v_star + w0, pr, psi2)
    assert abs(tau) < 1e-14
    assert np.max(np.abs(w - w0)) < 1e-15


def test_decompose_recovers_shift(small_wave):
    pr = small_wave.profile
    tau, w = ev.decompose(pr.shifted(0.3), pr, small_wave.psi2)
    assert tau == pytest.approx(0.3, abs=1e-8)
    assert np.max(np.abs(w)) < 1e-8


def test_decompose_errors(small_wave):
    pr = small_wave.profile
    u = pr.shift_difference(0.3)
    with pytest.raises(DerivativeDegenerate):
        ev.decompose_perturbation(u, pr, np.zeros_like(pr.v_star))
    with pytest.raises(NewtonFailed):
        ev.decompose_perturbation(u, pr, small_wave.psi2, max_iter=1)


@pytest.fixture(scope="module")
def small_run(small_wave):
    pr = small_wave.profile
    cfg = ev.SimulationConfig(pr.grid, dt=0.02, T=10.0, rates=RateParams(4.75, 10, 0.25), output_stride=25)
    u0 = pr.shift_difference(0.05) + bump(pr.grid.x, amp=0.01)
    return cfg, ev.evolve_nonlinear(u0, cfg, pr, small_wave.psi2, keep_fields=True)


def test_zero_perturbation_stays_put(small_wave):
    pr = small_wave.profile
    cfg = ev.SimulationConfig(pr.grid, dt=0.02, T=10.0, output_stride=50)
    res = ev.evolve_nonlinear(np.zeros_like(pr.v_star), cfg, pr, small_wave.psi2)
    assert np.max(np.abs(res.tau)) < 1e-12
    assert np.max(res.norm("H1k")) < 1e-8
    assert all(s.valid for s in res.states)


def test_final_state_reconstruction(small_wave, small_run):
    pr = small_wave.profile
    _, res = small_run
    last = res.states[-1]
    assert np.max(np.abs(res.u_final - pr.shift_difference(last.tau) - last.w)) < 1e-14


def test_orthogonality(small_wave, small_run):
    pr = small_wave.profile
    g = pr.grid
    _, res = small_run
    for st in res.states:
        assert st.valid
        nw = np.sqrt(sp.inner(st.w, st.w, g))
        assert abs(sp.inner(small_wave.psi2, st.w, g)) <= 1e-8 * max(nw, 1e-300) + 1e-15
        assert st.norms["H1k"] == pytest.approx(weighted_norm(st.w, WeightedNormSpec(10, 1), g), rel=1e-12)


def test_timeseries_csv(tmp_path, small_run):
    cfg, res = small_run
    res.write_csv(tmp_path / "ts.csv")
    rows = list(csv.reader(open(tmp_path / "ts.csv")))
    assert rows[0] == ["t", "tau", "norm_H1k", "norm_L2k", "valid"]
    assert len(rows) == 1 + cfg.n_steps // cfg.output_stride + 1


def test_linear_kernel_data_keeps_norm(small_wave):
    pr = small_wave.profile
    cfg = ev.SimulationConfig(pr.grid, dt=0.05, T=30.0, output_stride=20)
    t, n = ev.evolve_linear(pr.v_star_x, cfg, small_wave.L, k=2.0)
    sel = t >= 5
    assert np.max(np.abs(n[sel] / n[0] - 1)) < 0.02


def test_linear_evolution_is_linear(small_wave):
    pr = small_wave.profile
    cfg = ev.SimulationConfig(pr.grid, dt=0.05, T=5.0, output_stride=10)
    w0 = bump(pr.grid.x)
    _, n1 = ev.evolve_linear(w0, cfg, small_wave.L, k=2.0)
    _, n2 = ev.evolve_linear(2 * w0, cfg, small_wave.L, k=2.0)
    assert np.allclose(n2, 2 * n1, rtol=1e-12)


def test_fit_decay_exact_power():
    t = np.linspace(0, 100, 201)
    fit = ev.fit_decay(t, (1 + t) ** -2.0, (5, 100))
    assert fit.exponent == pytest.approx(-2.0, abs=1e-10)
    assert fit.rms < 1e-12


def test_fit_decay_noisy_power():
    t = np.linspace(0, 200, 2001)
    fit = ev.fit_decay(t, 3 * (1 + t) ** -1.5 * (1 + 0.01 * np.sin(t)), (10, 200))
    assert fit.exponent == pytest.approx(-1.5, abs=0.02)


def test_fit_decay_constant_and_errors():
    t = np.linspace(0, 10, 11)
    assert ev.fit_decay(t, np.full(11, 4.0)).exponent == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(EmptyWindow):
        ev.fit_decay(t, np.ones(11), (20, 30))
    with pytest.raises(NonPositiveValues):
        ev.fit_decay(t, np.linspace(-1, 1, 11))


def test_asymptotic_phase_synthetic():
    t = np.linspace(0, 200, 401)
    fit = ev.asymptotic_phase(t, 1 - (1 + t) ** -1.0, m_star=4.5, window=(1, 200))
    assert fit.tau_inf == pytest.approx(1.0, abs=1e-6)
    assert fit.p == pytest.approx(1.0, abs=1e-3)


def test_asymptotic_phase_constant_and_errors():
    t = np.linspace(0, 50, 51)
    fit = ev.asymptotic_phase(t, np.zeros(51))
    assert fit.tau_inf == 0.0
    with pytest.raises(TailNotSettled):
        ev.asymptotic_phase(t, np.zeros(51), window=(49.5, 50))


def test_first_record_matches_direct_decomposition(small_wave, small_run):
    pr = small_wave.profile
    _, res = small_run
    u0 = pr.shift_difference(0.05) + bump(pr.grid.x, amp=0.01)
    u0[0] = u0[-1] = 0.0
    tau, w = ev.decompose_perturbation(u0, pr, small_wave.psi2)
    assert res.tau[0] == tau
    assert np.array_equal(res.states[0].w, w)


def test_default_fit_window(wave):
    pr = wave.profile
    cfg = ev.SimulationConfig(pr.grid, T=200.0)
    t0, t1 = ev.default_fit_window(pr, cfg)
    assert t0 == 10.0
    # the front sits near the origin, so the reflection time is about L / c
    assert t1 == pytest.approx(0.8 * pr.grid.L / pr.c, rel=0.05)
    assert t1 < cfg.T
