import numpy as np
import pytest

from tofwave import fd
from tofwave import spectral as sp
from tofwave.errors import BranchCollision, InsufficientSamples, NoConvergence, SingularA
from tofwave.gridw import WeightedNormSpec
from tofwave.model import DEFAULT_PARAMS, MILD_PARAMS, S_omega, evaluate_Df, solve_rest_state

NU = np.linspace(-10, 10, 2001)


@pytest.fixture(scope="module")
def mild():
    rest = solve_rest_state(MILD_PARAMS)
    return MILD_PARAMS, rest, sp.LimitMatrices.build(MILD_PARAMS, rest, 1.0)


@pytest.fixture(scope="module")
def default_curves(wave):
    pr = wave.profile
    return pr, sp.dispersion_curves(pr.params, pr.rest, pr.c, NU)


def test_limit_matrix_structure(mild):
    _, rest, lm = mild
    assert np.allclose(lm.C_plus, [[rest.sigma1, 0.0], [rest.sigma2, 0.0]], atol=1e-13)
    M = lm.M_plus(0.3 + 0.1j)
    Ainv = np.linalg.inv(lm.A)
    assert np.allclose(M[2:, :2], Ainv @ ((0.3 + 0.1j) * np.eye(2) - lm.C_plus))
    assert np.allclose(M[2:, 2:], -lm.c * Ainv)


def test_dispersion_at_zero_plus_side(mild):
    params, rest, _ = mild
    curves = sp.dispersion_curves(params, rest, 1.0, np.array([-0.1, 0.0, 0.1]))
    s0 = sorted((cv.s[1] for cv in curves if cv.side == "plus"), key=lambda z: z.real)
    assert s0[0] == pytest.approx(rest.sigma1, abs=1e-14)
    assert s0[1] == pytest.approx(0.0, abs=1e-14)


def test_dispersion_at_zero_minus_side(mild):
    params, rest, _ = mild
    curves = sp.dispersion_curves(params, rest, 1.0, np.array([0.0]))
    s0 = sorted((cv.s[0] for cv in curves if cv.side == "minus"), key=lambda z: z.imag)
    g1, g2 = params.g(0.0)
    b = abs(float(g2) + rest.omega)
    assert s0 == pytest.approx([complex(g1, -b), complex(g1, b)], abs=1e-14)
    assert s0[0] == pytest.approx(-0.1 - 1.6746j, abs=1e-4)
    assert s0[1] == pytest.approx(-0.1 + 1.6746j, abs=1e-4)


def test_dispersion_conjugate_symmetry_and_residual(default_curves, wave):
    pr, curves = default_curves
    lm = sp.LimitMatrices.build(pr.params, pr.rest, pr.c)
    for side in ("plus", "minus"):
        pts = np.concatenate([cv.s for cv in curves if cv.side == side])
        mirrored = np.concatenate([cv.s[::-1] for cv in curves if cv.side == side])
        # s(-nu) is the conjugate of some root at nu
        for a in pts[::50]:
            assert np.min(np.abs(np.conj(a) - mirrored)) < 1e-12 * max(1.0, abs(a))
    for cv in curves:
        assert np.all(cv.residuals(lm) <= 1e-10 * (1 + np.abs(cv.s)) ** 2)


def test_first_order_equivalence(default_curves, rng):
    pr, curves = default_curves
    lm = sp.LimitMatrices.build(pr.params, pr.rest, pr.c)
    plus = [cv for cv in curves if cv.side == "plus"]
    for _ in range(20):
        cv = plus[rng.integers(len(plus))]
        j = rng.integers(len(cv.nu))
        ev = np.linalg.eigvals(lm.M_plus(cv.s[j]))
        assert np.min(np.abs(ev - 1j * cv.nu[j])) < 1e-8 * max(1.0, abs(cv.nu[j]))


def test_curves_csv(tmp_path, default_curves):
    _, curves = default_curves
    sp.write_curves_csv(tmp_path / "c.csv", curves)
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "nu,re_s,im_s,branch,side"
    assert len(lines) == 1 + len(curves) * len(NU)


def test_fit_tangency_synthetic_parabola():
    im = np.linspace(-0.2, 0.2, 101)
    fit = sp.fit_tangency(-2.0 * im ** 2 + 1j * im)
    assert fit.kappa_fit == pytest.approx(2.0, abs=1e-8)


def test_fit_tangency_needs_samples():
    with pytest.raises(InsufficientSamples):
        sp.fit_tangency(np.array([1.0 + 1j, 0.5 + 0.5j]))


def test_tangency_on_default_branch(default_curves):
    _, curves = default_curves
    crit = sp.critical_curve(curves)
    assert np.min(np.abs(crit.s)) < 1e-10
    full = sp.fit_tangency(crit, 0.1).kappa_fit
    half = sp.fit_tangency(crit, 0.05).kappa_fit
    assert full > 0
    assert abs(half - full) / full < 0.05


def test_crescent_membership():
    p = sp.CrescentParams(kappa=0.3, gamma=0.05, rho=0.8, delta=0.4)
    assert sp.crescent_contains(p.delta / 2, p)
    assert not sp.crescent_contains(0.0, p)
    y = 0.05
    assert not sp.crescent_contains(-1.5 * p.kappa * y * y + 1j * y, p)
    assert sp.crescent_contains(-0.5 * p.kappa * y * y + 1j * y, p)
    assert not sp.crescent_contains(0.5, p)  # outside the delta ball


def test_fitted_crescent_excludes_dispersion_samples(default_curves):
    _, curves = default_curves
    kfit = sp.fit_tangency(sp.critical_curve(curves)).kappa_fit
    p = sp.fit_crescent(curves, kfit)
    assert 0 < p.delta < p.rho and p.kappa == pytest.approx(0.9 * kfit)
    for cv in curves:
        assert not np.any(sp.crescent_contains(cv.s, p, origin_tol=1e-14))


def test_eigens_diagonal():
    assert np.allclose(np.sort(sp.eigens_4x4(np.diag([1.0, 2.0, 3.0, 4.0])).real), [1, 2, 3, 4], atol=1e-12)


def test_eigens_zero_eigenvector_of_limit_matrix(mild):
    _, _, lm = mild
    M0 = lm.M_plus(0.0)
    assert np.min(np.abs(sp.eigens_4x4(M0))) < 1e-12
    assert np.allclose(M0 @ np.array([0, 1, 0, 0]), 0.0)


def test_eigens_match_numpy_oracle(rng):
    for _ in range(25):
        M = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        ours = sp.eigens_4x4(M)
        ref = np.linalg.eigvals(M)
        assert max(np.min(np.abs(ours - r)) for r in ref) < 1e-8


def test_eigens_reject_non_finite():
    with pytest.raises(NoConvergence):
        sp.eigens_4x4(np.full((4, 4), np.nan))


@pytest.mark.parametrize("c", [0.8, 1.0, 1.5])
def test_lambda_branch_mild_parameters(c):
    rest = solve_rest_state(MILD_PARAMS)
    br = sp.track_lambda(MILD_PARAMS, rest, c)
    assert abs(br.lambda0) < 1e-10
    assert abs(br.d1 * c - 1) < 1e-6
    assert abs(br.d2 - br.predicted["d2"]) / abs(br.predicted["d2"]) < 1e-4
    assert br.predicted["d2"] < 0
    assert br.min_ratio > 0


def test_lambda_second_derivative_formula(mild):
    params, rest, _ = mild
    c = 1.0
    pred = sp.predicted_lambda_derivatives(params, rest, c)
    # q solves c^2 sigma1 q = -(alpha1 sigma1 + alpha2 sigma2) with the sign that makes lambda'' negative
    q = -(params.alpha1 * rest.sigma1 + params.alpha2 * rest.sigma2) / (c * c * rest.sigma1)
    assert pred["d2"] == pytest.approx(2 * q / c)
    assert pred["d1"] == pytest.approx(1 / c)


def test_branch_collision_on_coarse_path(mild):
    _, _, lm = mild
    with pytest.raises(BranchCollision):
        sp.follow_branch(lm, [0.0, 40.0 + 40.0j])


def test_classifier_examples():
    for m in (1, 2, 4):
        assert sp.classify_block_matrix(np.eye(m), np.zeros((m, m)), np.eye(m)) == (m, 0, m)
        C = np.diag(np.arange(m, dtype=float))
        assert sp.classify_block_matrix(np.eye(m), 0.7 * np.eye(m), C) == (m, 1, m - 1)


@pytest.mark.parametrize("m", [2, 3, 5])
@pytest.mark.parametrize("kind, expected", [("hyperbolic", lambda m: (m, 0, m)), ("center", lambda m: (m, 1, m - 1))])
def test_classifier_random_instances(m, kind, expected, rng):
    for _ in range(20):
        A, B, C = sp.random_block_instance(m, kind, rng)
        assert sp.lower_spectral_bound(A) > 0
        if kind == "hyperbolic":
            assert sp.lower_spectral_bound(C) > 0
            assert np.linalg.norm(B - B.T, 2) ** 2 < 16 * sp.lower_spectral_bound(A) * sp.lower_spectral_bound(C)
        else:
            assert sp.lower_spectral_bound(C) > -1e-12
        assert sp.classify_block_matrix(A, B, C) == expected(m)


@pytest.mark.parametrize("kind", ["hyperbolic", "center"])
def test_classifier_similarity_invariance(kind, rng):
    for _ in range(10):
        A, B, C = sp.random_block_instance(3, kind, rng)
        Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        assert sp.classify_block_matrix(Q.T @ A @ Q, Q.T @ B @ Q, Q.T @ C @ Q) == sp.classify_block_matrix(A, B, C)


def test_classifier_singular_A():
    with pytest.raises(SingularA):
        sp.classify_block_matrix(np.zeros((2, 2)), np.eye(2), np.eye(2))


def test_L_on_constant_field(small_wave):
    pr = small_wave.profile
    u = np.tile([1.0, 0.0], (pr.grid.N, 1))
    Lu = small_wave.L.apply(u)
    expected = S_omega(pr.omega) @ np.array([1.0, 0.0]) + evaluate_Df(pr.params, pr.v_star) @ np.array([1.0, 0.0])
    assert np.allclose(Lu[2:-2], expected[2:-2], atol=1e-12)


def test_adjoint_equals_transpose_on_uniform_grid(small_wave):
    assert sp.adjoint_transpose_difference(small_wave.L, small_wave.L_adj) < 1e-12


def test_adjoint_null_vector(wave):
    adj = wave.adj
    pr = wave.profile
    g = pr.grid
    assert sp.inner(adj.psi2, pr.v_star_x, g) == pytest.approx(1.0, abs=1e-10)
    assert adj.residual < 1e-6
    assert adj.singular_values[1] > 10 * adj.singular_values[0]
    # bounded on the right, exponentially decaying on the left
    assert np.isfinite(adj.right_tail_max) and adj.right_tail_max < 1e3
    lm = sp.LimitMatrices.build(pr.params, pr.rest, pr.c)
    # e^{mu x} xi solves the adjoint limit system iff e^{-mu x} solves the original one, so the
    # left decay rates of psi2 are the negated stable eigenvalues of M_minus(0)
    ev = np.linalg.eigvals(lm.M_minus(0.0))
    rates = sorted(-e.real for e in ev if e.real < -1e-9)
    assert adj.left_tail_rate == pytest.approx(rates[0], rel=0.15)


def test_projector(wave, rng):
    pr = wave.profile
    g = pr.grid
    vx = pr.v_star_x
    psi2 = wave.psi2
    assert np.allclose(sp.projector_Pk(vx, psi2, vx, g), vx, atol=1e-10 * np.max(np.abs(vx)))
    r = np.stack([np.exp(-g.x ** 2), np.sin(g.x) * np.exp(-0.1 * g.x ** 2)], axis=-1)
    Pr = sp.projector_Pk(r, psi2, vx, g)
    assert np.max(np.abs(sp.projector_Pk(Pr, psi2, vx, g) - Pr)) < 1e-10
    w = r - vx * sp.inner(psi2, r, g) / sp.inner(psi2, vx, g)
    assert np.max(np.abs(sp.projector_Pk(w, psi2, vx, g))) < 1e-12


def test_projector_commutes_with_L(wave):
    pr = wave.profile
    g = pr.grid
    vx = pr.v_star_x
    u = np.stack([np.exp(-(g.x - 3) ** 2), np.exp(-(g.x + 2) ** 2)], axis=-1)
    Qu = u - sp.projector_Pk(u, wave.psi2, vx, g)
    PLQu = sp.projector_Pk(wave.L.apply(Qu), wave.psi2, vx, g)
    scale = np.sqrt(sp.inner(wave.L.apply(u), wave.L.apply(u), g))
    assert np.sqrt(sp.inner(PLQu, PLQu, g)) < 1e-6 * scale


def test_resolvent_linearity(small_wave):
    g = small_wave.grid
    r = np.stack([np.exp(-g.x ** 2), np.zeros(g.N)], axis=-1)
    s = [0.05 + 0.05j]
    a = sp.resolvent_probe(small_wave.L, r, s, 2.0, 0.25, small_wave.psi2)[0]
    b = sp.resolvent_probe(small_wave.L, 2 * r, s, 2.0, 0.25, small_wave.psi2)[0]
    assert b.norm_v == pytest.approx(2 * a.norm_v, rel=1e-12)


def test_probe_csv(tmp_path):
    rows = [sp.ResolventRow(0.1 + 0.2j, 1.0, 2.0, 3.0)]
    sp.write_probe_csv(tmp_path / "p.csv", rows)
    assert (tmp_path / "p.csv").read_text().splitlines() == ["re_s,im_s,norm_v,norm_Pkr,norm_r_strong",
                                                               "0.1,0.2,1.0,2.0,3.0"]


def test_point_spectrum_empty_far_right(small_wave):
    rep = sp.point_spectrum_probe(small_wave.L, (1e6, 1e6 + 1, -1, 1))
    assert rep.candidates == []
    assert rep.kernel_dims == (1, 1)


def test_point_spectrum_constant_coefficient_operator_is_all_artifacts(small_wave):
    pr = small_wave.profile
    g = pr.grid
    C_plus = S_omega(pr.omega) + evaluate_Df(pr.params, pr.v_inf)
    M = fd.linear_operator(pr.params.A, pr.c, g.h, np.tile(C_plus, (g.N - 2, 1, 1)))
    op = sp.DiscreteOperator(M, g, pr)
    rep = sp.point_spectrum_probe(op, (-1.0, 0.2, -2.0, 2.0), n_shifts=(2, 3))
    assert rep.candidates
    assert all(c["artifact"] for c in rep.candidates)
    assert rep.violations == []


def test_weighted_norm_complex_matches_real(small_wave, rng):
    g = small_wave.grid
    v = rng.normal(size=(g.N, 2)) * np.exp(-0.01 * g.x ** 2)[:, None]
    from tofwave.gridw import weighted_norm

    assert sp.weighted_norm_complex(v + 0j, WeightedNormSpec(2, 1), g) == pytest.approx(
        weighted_norm(v, WeightedNormSpec(2, 1), g), rel=1e-13)
