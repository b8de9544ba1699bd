"""Numerical checks of the weighted kernel estimates, the algebraic Gronwall inequality
and the Lipschitz bounds of the nonlinear remainder.

Every check returns a report dictionary with the keys
`check, params, sup, bound, pass, resolution_study`.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import IterationDiverged, OutsideSmallnessBall, QuadratureNotConverged
from .gridw import WeightedNormSpec, weight_eta, weighted_norm
from .model import evaluate_Df, f_increment
from .profile import WaveProfile
from .spectral import inner


@dataclass(frozen=True)
class SweepSpec:
    x_range: tuple = (1e-2, 1e3)
    n_x: int = 21
    beta_range: tuple = (1e-4, 1e3)
    n_beta: int = 29
    epsrel: float = 1e-10
    include_zero_x: bool = True

    def __post_init__(self):
        if not (0 < self.x_range[0] < self.x_range[1]) or not (0 < self.beta_range[0] <= self.beta_range[1]):
            raise ValueError("ranges must be positive and nonempty")
        if self.n_x < 1 or self.n_beta < 1:
            raise ValueError("need at least one sample per axis")

    @property
    def xs(self) -> np.ndarray:
        xs = np.logspace(math.log10(self.x_range[0]), math.log10(self.x_range[1]), self.n_x)
        return np.concatenate([[0.0], xs]) if self.include_zero_x else xs

    @property
    def betas(self) -> np.ndarray:
        return np.logspace(math.log10(self.beta_range[0]), math.log10(self.beta_range[1]), self.n_beta)

    def refined(self) -> "SweepSpec":
        """Twice the samples per decade and a tenfold tighter quadrature tolerance."""
        return SweepSpec(self.x_range, 2 * self.n_x - 1, self.beta_range, 2 * self.n_beta - 1,
                         self.epsrel / 10, self.include_zero_x)

    def widened(self) -> "SweepSpec":
        """Endpoints of the x range moved out by a factor of two."""
        return SweepSpec((self.x_range[0] / 2, self.x_range[1] * 2), self.n_x + 2, self.beta_range,
                         self.n_beta, self.epsrel, self.include_zero_x)


def _quad_raw(fun, a, b, epsrel):
    with np.errstate(over="ignore", under="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(fun, a, b, epsabs=0.0, epsrel=epsrel, limit=500)


def _checked_sum(pieces, epsrel):
    val = sum(v for v, _ in pieces)
    err = sum(e for _, e in pieces)
    if not math.isfinite(val) or err > max(1e3 * epsrel * abs(val), 1e-300):
        raise QuadratureNotConverged(f"quadrature returned {val} with error estimate {err}")
    return val


def _segments(a, b, scales):
    """Break points at a + s and b - s for the given length scales, clipped to (a, b)."""
    pts = sorted({p for s in scales for p in (a + s, b - s) if a < p < b})
    return [a, *pts, b]


def _piecewise(fun, a, b, scales, epsrel):
    nodes = _segments(a, b, scales)
    return _checked_sum([_quad_raw(fun, lo, hi, epsrel) for lo, hi in zip(nodes[:-1], nodes[1:])], epsrel)


# ---------------------------------------------------------------- kernel integrals


def kernel_integral_1(x: float, beta: float, k: float, q: float, epsrel: float = 1e-10) -> float:
    """eta^k(x) * int_x^inf eta^-(k+q)(y) exp(beta (x - y)) dy."""
    ex = float(weight_eta(x))
    ell = 1.0 / (beta + 1.0 / ex)  # natural decay length of the integrand

    def fun(u):
        z = ell * u
        ey = math.sqrt((x + z) ** 2 + 1.0)
        return ell * (ex / ey) ** k * ey ** (-q) * math.exp(-beta * z)

    if q + k <= 1.0 and beta == 0.0:
        return math.inf
    return _checked_sum([_quad_raw(fun, 0.0, 50.0, epsrel), _quad_raw(fun, 50.0, math.inf, epsrel)], epsrel)


def kernel_integral_2(x: float, beta: float, q: float, epsrel: float = 1e-10, display_form: bool = False) -> float:
    """int_0^x eta^-q(y) exp(beta (y - x)) dy; with display_form the exponent is beta (x - y)."""
    if x == 0.0:
        return 0.0
    sgn = 1.0 if display_form else -1.0

    def fun(z):  # z = x - y
        return float(weight_eta(x - z)) ** (-q) * math.exp(sgn * beta * z)

    return _piecewise(fun, 0.0, x, (1.0, 1.0 / beta, 10.0 / beta), epsrel)


def kernel_integral_3(x: float, beta: float, k: float, epsrel: float = 1e-10) -> float:
    """eta^k(x) * int_0^x eta^-k(y) exp(beta (y - x)) dy."""
    if x == 0.0:
        return 0.0
    ex = float(weight_eta(x))

    def fun(z):  # z = x - y
        return (ex / float(weight_eta(x - z))) ** k * math.exp(-beta * z)

    return _piecewise(fun, 0.0, x, (1.0, 10.0, 1.0 / beta, 10.0 / beta), epsrel)


def _sweep_sup(values_fn, spec: SweepSpec, betas=None):
    """Max over the sample grid, then polished by a local search in log coordinates."""
    betas = spec.betas if betas is None else betas
    best, arg = -math.inf, None
    for x in spec.xs:
        for b in betas:
            v = values_fn(float(x), float(b), spec.epsrel)
            if v > best:
                best, arg = v, (float(x), float(b))
    if arg is None or arg[1] <= 0.0:
        return best, arg
    lb, hb = math.log(betas.min()), math.log(betas.max())
    x0 = arg[0]
    res = optimize.minimize_scalar(lambda z: -values_fn(x0, math.exp(z), spec.epsrel), bounds=(lb, hb),
                                   method="bounded", options={"xatol": 1e-8})
    if -res.fun > best:
        best, arg = float(-res.fun), (x0, math.exp(res.x))
    if x0 > 0.0:
        lo = np.array([math.log(spec.x_range[0]), lb])
        hi = np.array([math.log(spec.x_range[1]), hb])

        def neg(z):
            z = np.clip(z, lo, hi)
            return -values_fn(float(np.exp(z[0])), float(np.exp(z[1])), spec.epsrel)

        res = optimize.minimize(neg, np.log(arg), method="Nelder-Mead",
                                options={"xatol": 1e-8, "fatol": 1e-13 * abs(best), "maxiter": 600})
        if -res.fun > best:
            z = np.clip(res.x, lo, hi)
            best, arg = float(-res.fun), (float(np.exp(z[0])), float(np.exp(z[1])))
    return best, arg


def _report(check, params, sup, bound, ok, study):
    return {"check": check, "params": params, "sup": sup, "bound": bound, "pass": bool(ok),
            "resolution_study": study}


def _resolution(fn, spec: SweepSpec, base: float) -> dict:
    fine = fn(spec.refined())
    wide = fn(spec.widened())
    drift = max(abs(fine - base), abs(wide - base)) / max(abs(base), 1e-300)
    return {"base": base, "refined": fine, "widened": wide, "relative_drift": drift}


def kernel_bound_1(k: float, q: float, sweep: SweepSpec | None = None, beta_zero: bool = False,
                   study: bool = True, drift_tol: float = 0.01) -> dict:
    """Sup of beta^(1-q) * eta^k(x) int_x^inf eta^-(k+q)(y) e^(beta(x-y)) dy over the sweep.

    With beta_zero (only for q = 1) the sup over x at beta = 0 is compared with
    the explicit constant 2^((k+1)/2) / k.
    """
    if k < 0 or not 0 <= q <= 1 or (k == 0 and q == 1):
        raise ValueError("need k >= 0, 0 <= q <= 1 and (k > 0 or q < 1)")
    if beta_zero and q != 1:
        raise ValueError("beta = 0 is admitted only for q = 1")
    sweep = sweep or SweepSpec()

    def run(sp):
        if beta_zero:
            return _sweep_sup(lambda x, b, e: kernel_integral_1(x, 0.0, k, q, e), sp, betas=np.array([0.0]))[0]
        return _sweep_sup(lambda x, b, e: b ** (1.0 - q) * kernel_integral_1(x, b, k, q, e), sp)[0]

    sup = run(sweep)
    bound = 2.0 ** ((k + 1) / 2) / k if beta_zero else None
    res = _resolution(run, sweep, sup) if study else None
    ok = math.isfinite(sup) and (bound is None or sup <= bound * (1 + 1e-6))
    if res is not None:
        ok = ok and res["relative_drift"] < drift_tol
    return _report("kernel_bound_1", {"k": k, "q": q, "beta_zero": beta_zero}, sup, bound, ok, res)


def kernel_bound_2(q: float, sweep: SweepSpec | None = None, study: bool = True, drift_tol: float = 0.01) -> dict:
    """Sup of beta^(1-q) int_0^x eta^-q(y) e^(beta(y-x)) dy (decaying orientation).

    The report also records the same integral with the exponent reversed at the
    largest sweep point, which grows like e^(beta x) and has no uniform bound.
    """
    if not 0 <= q < 1:
        raise ValueError("need 0 <= q < 1")
    sweep = sweep or SweepSpec()

    def run(sp):
        return _sweep_sup(lambda x, b, e: b ** (1.0 - q) * kernel_integral_2(x, b, q, e), sp)[0]

    sup = run(sweep)
    res = _resolution(run, sweep, sup) if study else None
    x_probe, b_probe = 10.0, 1.0
    with np.errstate(over="ignore"):
        reversed_val = kernel_integral_2(x_probe, b_probe, q, sweep.epsrel, display_form=True)
    ok = math.isfinite(sup) and (res is None or res["relative_drift"] < drift_tol)
    rep = _report("kernel_bound_2", {"q": q, "orientation": "exp(beta (y - x))"}, sup, None, ok, res)
    rep["reversed_orientation_sample"] = {"x": x_probe, "beta": b_probe, "value": reversed_val}
    return rep


def _penalty_3(beta: float, k: float) -> float:
    if k > 1:
        return beta ** k
    # |log beta| / beta for small beta, 1 / beta near and above 1
    return beta / max(1.0, abs(math.log(beta)))


def kernel_bound_3(k: float, beta0: float = 1.0, sweep: SweepSpec | None = None, study: bool = True,
                   drift_tol: float = 0.01) -> dict:
    """Sup of eta^k(x) int_0^x eta^-k(y) e^(beta(y-x)) dy divided by beta^-k (k > 1)
    or |log beta| / beta (k = 1), over 0 < beta <= beta0."""
    if k < 1:
        raise ValueError("need k >= 1")
    sweep = sweep or SweepSpec()
    sweep = SweepSpec(sweep.x_range, sweep.n_x, (sweep.beta_range[0], min(sweep.beta_range[1], beta0)),
                      sweep.n_beta, sweep.epsrel, sweep.include_zero_x)

    def run(sp):
        return _sweep_sup(lambda x, b, e: _penalty_3(b, k) * kernel_integral_3(x, b, k, e), sp)[0]

    sup = run(sweep)
    res = _resolution(run, sweep, sup) if study else None
    ok = math.isfinite(sup) and (res is None or res["relative_drift"] < drift_tol)
    return _report("kernel_bound_3", {"k": k, "beta0": beta0}, sup, None, ok, res)


# ---------------------------------------------------------------- Gronwall


def gronwall_constant(p: float) -> float:
    if not p > 1:
        raise ValueError("need p > 1")
    return 2.0 ** (p - 1) * p / (p - 1)


def gronwall_integral(p: float, t: float, epsrel: float = 1e-10) -> float:
    """int_0^t (1+t)^(p-1) / ((1+s)^(p-1) (1+t-s)^p) ds."""
    if t == 0.0:
        return 0.0

    def fun(s):
        return ((1.0 + t) / (1.0 + s)) ** (p - 1) * (1.0 + t - s) ** (-p)

    scales = [10.0 ** j for j in range(0, int(math.log10(max(t, 1.0))) + 1)]
    return _piecewise(fun, 0.0, t, scales + [t / 2], epsrel)


def gronwall_kernel_constant(p: float, t_samples=None, epsrel: float = 1e-10) -> dict:
    """Sup over t of the convolution integral, compared with 2^(p-1) p / (p-1)."""
    C3 = gronwall_constant(p)
    ts = np.concatenate([[0.0], np.logspace(0, 4, 41)]) if t_samples is None else np.asarray(t_samples, float)
    vals = np.array([gronwall_integral(p, float(t), epsrel) for t in ts])
    coarse = np.array([gronwall_integral(p, float(t), epsrel * 1e4) for t in ts])
    monotone = bool(np.all(np.diff(vals) >= -1e-9 * np.max(np.abs(vals))))
    sup = float(np.max(vals))
    study = {"quadrature_error": float(np.max(np.abs(vals - coarse))), "monotone": monotone}
    # monotonicity is recorded only: for p >= 2 the integral overshoots its limit
    return _report("gronwall_kernel_constant", {"p": p, "t_max": float(ts.max())}, sup, C3,
                   sup <= C3 and study["quadrature_error"] < 1e-3, study) | {"t": ts.tolist(), "values": vals.tolist()}


def gronwall_iteration_check(p: float, C1: float, C2: float, eps: float, T: float = 200.0, dt: float = 0.1,
                             max_iter: int = 500, tol: float = 1e-13) -> dict:
    """Iterate phi <- C1 eps (1+t)^-p + C2 int_0^t (eps + phi) phi (1+t-s)^-p ds to its fixed point
    and compare with 3 C1 eps (1+t)^-(p-1)."""
    if not p > 1:
        raise ValueError("need p > 1")
    n = int(round(T / dt)) + 1
    t = np.linspace(0.0, T, n)
    h = t[1] - t[0]
    # trapezoid weights on [0, t_i] times the kernel (1 + t_i - t_j)^-p
    lag = np.tril(t[:, None] - t[None, :])
    K = np.tril((1.0 + lag) ** (-p)) * h
    K[:, 0] *= 0.5
    K[np.arange(n), np.arange(n)] *= 0.5
    K[0, 0] = 0.0
    forcing = C1 * eps * (1.0 + t) ** (-p)
    bound = 3.0 * C1 * eps * (1.0 + t) ** (-(p - 1))
    phi = forcing.copy()
    for it in range(max_iter):
        new = forcing + C2 * K @ ((eps + phi) * phi)
        if not np.all(np.isfinite(new)) or np.max(new) > 1e6 * max(np.max(bound), 1e-300) + 1e6:
            raise IterationDiverged(f"iteration left all bounds after {it} steps")
        change = float(np.max(np.abs(new - phi)))
        phi = new
        if change <= tol * max(float(np.max(np.abs(phi))), 1e-300):
            break
    else:
        raise IterationDiverged(f"no fixed point within {max_iter} iterations")
    ratio = float(np.max(phi / np.where(bound > 0, bound, 1.0))) if eps > 0 else 0.0
    ok = bool(np.all(phi <= bound + 1e-15))
    rep = _report("gronwall_iteration_check", {"p": p, "C1": C1, "C2": C2, "eps": eps, "T": T, "dt": dt},
                  float(np.max(phi)), float(np.max(bound)), ok, {"iterations": it + 1, "max_ratio": ratio})
    rep["t"] = t
    rep["phi"] = phi
    return rep


# ---------------------------------------------------------------- remainders


def remainder_f(profile: WaveProfile, tau: float, w: np.ndarray, Df=None) -> np.ndarray:
    """f(v_star(. - tau) + w) - f(v_star(. - tau)) - Df(v_star) w."""
    vt = profile.shifted(tau)
    Df = evaluate_Df(profile.params, profile.v_star) if Df is None else Df
    return f_increment(profile.params, vt, w) - np.einsum("...ij,...j->...i", Df, w)


def remainder_tau(profile: WaveProfile, psi2: np.ndarray, tau: float, r_f: np.ndarray) -> float:
    g = profile.grid
    return inner(psi2, r_f, g) / inner(psi2, profile.shifted_derivative(tau), g)


def remainder_w(profile: WaveProfile, psi2: np.ndarray, tau: float, r_f: np.ndarray) -> np.ndarray:
    """(I - P) (v_star_x(. - tau) r_tau + r_f) with P the rank-one projector along psi2."""
    g = profile.grid
    z = profile.shifted_derivative(tau) * remainder_tau(profile, psi2, tau, r_f) + r_f
    return z - profile.v_star_x * inner(psi2, z, g)


def random_perturbations(grid, n: int, amplitude: float, rng: np.random.Generator, k_decay: float = 12.0,
                         n_modes: int = 4) -> list:
    """Smooth localized random fields amplitude * eta^-k_decay * (random trigonometric sum)."""
    x = grid.x
    env = weight_eta(x) ** (-k_decay)
    out = []
    for _ in range(n):
        field = np.zeros((x.size, 2))
        for _ in range(n_modes):
            kw = rng.uniform(0.0, 2.0)
            ph = rng.uniform(0.0, 2 * math.pi, size=2)
            a = rng.normal(size=2)
            field += a[None, :] * np.cos(kw * x[:, None] + ph[None, :])
        field *= env[:, None]
        field *= amplitude / max(np.max(np.abs(field)), 1e-300)
        out.append(field)
    return out


def remainder_checks(profile: WaveProfile, psi2: np.ndarray, taus, pairs, k: float = 2.0,
                     delta_check: float = 0.1) -> dict:
    """Empirical Lipschitz constant of r_f in (tau, w) pairs and structural checks.

    taus: phase samples; pairs: list of (w1, w2) fields. The ratio
    ||r_f(tau,w1) - r_f(tau,w2)||_{L2_k} / ((|tau| + max ||w_i||_{H1_k}) ||w1 - w2||_{H1_k})
    is maximised over all samples.
    """
    g = profile.grid
    h1 = WeightedNormSpec(k, 1)
    l2 = WeightedNormSpec(k, 0)
    Df = evaluate_Df(profile.params, profile.v_star)
    ratios, proj = [], []
    for tau in taus:
        for w1, w2 in pairs:
            n1, n2 = weighted_norm(w1, h1, g), weighted_norm(w2, h1, g)
            if abs(tau) > delta_check or max(n1, n2) > delta_check:
                raise OutsideSmallnessBall(f"|tau| = {abs(tau):.3g}, ||w|| = {max(n1, n2):.3g} exceed {delta_check}")
            r1 = remainder_f(profile, tau, w1, Df)
            r2 = remainder_f(profile, tau, w2, Df)
            dn = weighted_norm(w1 - w2, h1, g)
            if dn == 0.0:
                continue
            ratios.append(weighted_norm(r1 - r2, l2, g) / ((abs(tau) + max(n1, n2)) * dn))
            rw = remainder_w(profile, psi2, tau, r1)
            proj.append(abs(inner(psi2, rw, g)) / max(weighted_norm(rw, l2, g), 1e-300))
    constant = float(np.max(ratios)) if ratios else 0.0
    return _report("remainder_checks", {"k": k, "n_tau": len(list(taus)), "n_pairs": len(pairs)},
                   constant, None, math.isfinite(constant),
                   {"max_projection_residual": float(np.max(proj)) if proj else 0.0}) | {"ratios": ratios}


def quadratic_scaling(profile: WaveProfile, w: np.ndarray, k: float = 2.0, factors=(1.0, 0.5, 0.25)) -> list:
    """||r_f(0, s w)||_{L2_k} for the given scale factors s."""
    g = profile.grid
    Df = evaluate_Df(profile.params, profile.v_star)
    return [weighted_norm(remainder_f(profile, 0.0, s * w, Df), WeightedNormSpec(k, 0), g) for s in factors]


def report_json(report: dict) -> str:
    """JSON text of the documented report keys."""
    keys = ("check", "params", "sup", "bound", "pass", "resolution_study")
    return json.dumps({key: report[key] for key in keys}, indent=2, sort_keys=True, default=float) + "\n"
