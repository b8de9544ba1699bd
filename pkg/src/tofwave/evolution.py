"""Time stepping of the co-moving system, the (tau, w) decomposition and decay fits.

Nonlinear runs evolve the perturbation u = v - v_star rather than v, so that
algebraically small tail values keep full relative precision:

    u_t = (A D2 + c D1 + S_omega) u + [f(v_star + u) - f(v_star)].

The bracket is evaluated without cancellation and the stationary residual of
v_star (at round-off level) is dropped, so v_star is an exact rest point.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, sparse
from scipy.sparse.linalg import splu

from . import fd
from .errors import (
    DecompositionLost,
    DerivativeDegenerate,
    EmptyWindow,
    NewtonFailed,
    NonFiniteState,
    NonPositiveValues,
    TailNotSettled,
)
from .gridw import Grid, RateParams, WeightedNormSpec, weighted_norm
from .model import ModelParams, S_omega, evaluate_Df, evaluate_f, f_increment
from .profile import WaveProfile
from .spectral import DiscreteOperator, inner

SCHEMES = ("IMEX1", "IMEX2")


@dataclass
class SimulationConfig:
    grid: Grid
    dt: float = 0.01
    T: float = 200.0
    scheme: str = "IMEX2"
    rates: RateParams = field(default_factory=lambda: RateParams(4.75, 10.0, 0.25))
    output_stride: int = 100
    dt_max: float | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.T < self.dt:
            raise ValueError("need T >= dt")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.output_stride < 1:
            raise ValueError("output stride must be at least 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


def explicit_dt_max(profile: WaveProfile) -> float:
    """Forward Euler bound 2 / max spectral radius of the explicit blocks Df(v_star(x))."""
    rho = float(np.max(np.abs(np.linalg.eigvals(evaluate_Df(profile.params, profile.v_star)))))
    return 2.0 / max(rho, 1e-12)


def _constant_operator(params: ModelParams, omega: float, c: float, grid: Grid) -> sparse.csc_matrix:
    n = grid.N - 2
    diag = np.broadcast_to(S_omega(omega), (n, 2, 2)).copy()
    return fd.linear_operator(params.A, c, grid.h, diag)


def step_nonlinear(v: np.ndarray, dt: float, params: ModelParams, omega: float, c: float, grid: Grid,
                   left=(0.0, 0.0), right=None, reaction: bool = True) -> np.ndarray:
    """One first-order IMEX step of v_t = A v'' + c v' + S_omega v + f(v) on a full field.

    The constant-coefficient part is implicit; f is explicit. Dirichlet values
    left/right (right defaults to the current v at the last node).
    """
    v = np.asarray(v, dtype=float)
    left = np.asarray(left, dtype=float)
    right = v[-1] if right is None else np.asarray(right, dtype=float)
    L0 = _constant_operator(params, omega, c, grid)
    h = grid.h
    A = params.A
    b = np.zeros((grid.N - 2, 2))
    b[0] += (A / (h * h) - c / (2 * h) * np.eye(2)) @ left
    b[-1] += (A / (h * h) + c / (2 * h) * np.eye(2)) @ right
    rhs = v[1:-1] + dt * b
    if reaction:
        rhs = rhs + dt * evaluate_f(params, v[1:-1])
    M = sparse.identity(L0.shape[0], format="csc") - dt * L0
    out = np.empty_like(v)
    out[0] = left
    out[-1] = right
    out[1:-1] = splu(M.tocsc()).solve(rhs.reshape(-1)).reshape(-1, 2)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState("non-finite state after step")
    return out


class PerturbationStepper:
    """IMEX1 / SBDF2 integrator for the perturbation u of a profile (zero Dirichlet ends)."""

    def __init__(self, profile: WaveProfile, dt: float, scheme: str = "IMEX2"):
        if scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        self.profile = profile
        self.dt = dt
        self.scheme = scheme
        g = profile.grid
        L0 = _constant_operator(profile.params, profile.omega, profile.c, g)
        I = sparse.identity(L0.shape[0], format="csc")
        self.lu1 = splu((I - dt * L0).tocsc())
        self.lu2 = splu((1.5 * I - dt * L0).tocsc()) if scheme == "IMEX2" else None
        self.vs = profile.v_star[1:-1]
        self.prev = None  # (u, N(u)) from the previous step

    def reaction(self, u_int: np.ndarray) -> np.ndarray:
        return f_increment(self.profile.params, self.vs, u_int)

    def step(self, u: np.ndarray) -> np.ndarray:
        ui = u[1:-1]
        Nu = self.reaction(ui)
        if self.scheme == "IMEX1" or self.prev is None:
            new = self.lu1.solve((ui + self.dt * Nu).reshape(-1))
        else:
            up, Np = self.prev
            rhs = 2.0 * ui - 0.5 * up + self.dt * (2.0 * Nu - Np)
            new = self.lu2.solve(rhs.reshape(-1))
        self.prev = (ui.copy(), Nu)
        out = np.zeros_like(u)
        out[1:-1] = new.reshape(-1, 2)
        if not np.all(np.isfinite(new)):
            raise NonFiniteState("perturbation became non-finite")
        return out


# ---------------------------------------------------------------- decomposition


@dataclass
class DecompositionState:
    t: float
    tau: float
    w: np.ndarray | None
    norms: dict
    valid: bool


def decompose_perturbation(u: np.ndarray, profile: WaveProfile, psi2: np.ndarray, tau_guess: float = 0.0,
                           tol: float = 1e-12, max_iter: int = 50) -> tuple[float, np.ndarray]:
    """tau and w for v = v_star + u = v_star(. - tau) + w with (psi2, w) = 0.

    Solves (psi2, v_star(. - tau) - v_star) = (psi2, u) by Newton's method.
    """
    g = profile.grid
    target = inner(psi2, u, g)
    tau = float(tau_guess)
    for _ in range(max_iter):
        H = inner(psi2, profile.shift_difference(tau), g) - target
        dH = -inner(psi2, profile.shifted_derivative(tau), g)
        if abs(dH) < 1e-8:
            raise DerivativeDegenerate(f"(psi2, v_star_x(. - tau)) = {dH:.3e} at tau = {tau:.6g}")
        if H == 0.0:
            break
        step = H / dH
        tau -= step
        if not math.isfinite(tau):
            raise NewtonFailed("phase iteration produced a non-finite value")
        if abs(step) <= tol * max(1.0, abs(tau)):
            break
    else:
        raise NewtonFailed(f"phase iteration did not converge in {max_iter} steps")
    w = u - profile.shift_difference(tau)
    return tau, w


def decompose(v: np.ndarray, profile: WaveProfile, psi2: np.ndarray, tau_guess: float = 0.0) -> tuple[float, np.ndarray]:
    """Decomposition of a full field v (tail precision limited by v itself)."""
    u = np.asarray(v, dtype=float) - profile.v_star
    return decompose_perturbation(u, profile, psi2, tau_guess)


@dataclass
class EvolutionResult:
    states: list
    config: SimulationConfig
    u_final: np.ndarray

    @property
    def t(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def tau(self) -> np.ndarray:
        return np.array([s.tau for s in self.states])

    def norm(self, key: str) -> np.ndarray:
        return np.array([s.norms.get(key, np.nan) for s in self.states])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["t", "tau", "norm_H1k", "norm_L2k", "valid"])
            for s in self.states:
                wr.writerow([repr(s.t), repr(s.tau), repr(s.norms.get("H1k", float("nan"))),
                             repr(s.norms.get("L2k", float("nan"))), int(s.valid)])


def _norms(w: np.ndarray, k: float, grid: Grid) -> dict:
    return {"H1k": weighted_norm(w, WeightedNormSpec(k, 1), grid), "L2k": weighted_norm(w, WeightedNormSpec(k, 0), grid)}


def evolve_nonlinear(u0: np.ndarray, config: SimulationConfig, profile: WaveProfile, psi2: np.ndarray,
                     keep_fields: bool = False) -> EvolutionResult:
    """Integrate v = v_star + u from u(0) = u0 and decompose every output_stride steps."""
    dt_max = explicit_dt_max(profile)
    config.dt_max = dt_max
    if config.dt > dt_max:
        raise ValueError(f"dt = {config.dt} exceeds the explicit stability bound {dt_max:.3g}")
    g = profile.grid
    k = config.rates.k
    stepper = PerturbationStepper(profile, config.dt, config.scheme)
    u = np.array(u0, dtype=float)
    u[0] = 0.0
    u[-1] = 0.0
    states = []
    tau = 0.0

    def record(t):
        nonlocal tau
        try:
            tau, w = decompose_perturbation(u, profile, psi2, tau)
        except (NewtonFailed, DerivativeDegenerate) as exc:
            raise DecompositionLost(f"decomposition failed at t = {t:.4g}: {exc}") from exc
        states.append(DecompositionState(t, tau, w if keep_fields else None, _norms(w, k, g), True))

    record(0.0)
    for n in range(1, config.n_steps + 1):
        u = stepper.step(u)
        if n % config.output_stride == 0 or n == config.n_steps:
            record(n * config.dt)
    return EvolutionResult(states, config, u)


def evolve_linear(w0: np.ndarray, config: SimulationConfig, L: DiscreteOperator, k: float | None = None,
                  scheme: str = "BDF2") -> tuple[np.ndarray, np.ndarray]:
    """Integrate w_t = L w implicitly (backward Euler start, then BDF2); returns (t, ||w||_{H1_k})."""
    g = L.grid
    k = config.rates.k if k is None else k
    dt = config.dt
    I = sparse.identity(L.matrix.shape[0], format="csc")
    lu1 = splu((I - dt * L.matrix).tocsc())
    lu2 = splu((1.5 * I - dt * L.matrix).tocsc()) if scheme == "BDF2" else None
    w = fd.flatten_interior(np.asarray(w0, dtype=float))
    w_prev = None
    spec = WeightedNormSpec(k, 1)
    ts = [0.0]
    ns = [weighted_norm(fd.embed_interior(w, g.N), spec, g)]
    for n in range(1, config.n_steps + 1):
        if w_prev is None or lu2 is None:
            w_new = lu1.solve(w)
        else:
            w_new = lu2.solve(2.0 * w - 0.5 * w_prev)
        w_prev, w = w, w_new
        if n % config.output_stride == 0 or n == config.n_steps:
            if not np.all(np.isfinite(w)):
                raise NonFiniteState("linear evolution became non-finite")
            ts.append(n * dt)
            ns.append(weighted_norm(fd.embed_interior(w, g.N), spec, g))
    return np.array(ts), np.array(ns)


# ---------------------------------------------------------------- fits


@dataclass
class DecayFit:
    exponent: float
    intercept: float
    window: tuple
    rms: float
    n_points: int


def fit_decay(t, values, window=None) -> DecayFit:
    """Least squares of log(value) against log(1 + t) inside the window."""
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    t0, t1 = window if window is not None else (t[0], t[-1])
    sel = (t >= t0) & (t <= t1)
    if np.count_nonzero(sel) < 2:
        raise EmptyWindow(f"fewer than two samples in [{t0}, {t1}]")
    if np.any(values[sel] <= 0) or not np.all(np.isfinite(values[sel])):
        raise NonPositiveValues("values must be positive and finite inside the window")
    X = np.log1p(t[sel])
    Y = np.log(values[sel])
    slope, icept = np.polyfit(X, Y, 1)
    rms = float(np.sqrt(np.mean((Y - (slope * X + icept)) ** 2)))
    return DecayFit(float(slope), float(icept), (float(t0), float(t1)), rms, int(np.count_nonzero(sel)))


def default_fit_window(profile: WaveProfile, config: SimulationConfig, t0: float = 10.0) -> tuple:
    """[t0, min(T, 0.8 t_reflect)] with t_reflect the transit time from the right boundary to the front."""
    x = profile.grid.x
    mag = np.sqrt(np.sum(profile.v_star ** 2, axis=-1))
    front = float(x[np.argmin(np.abs(mag - 0.5 * np.linalg.norm(profile.v_inf)))])
    t_reflect = (profile.grid.L - front) / max(abs(profile.c), 1e-12)
    return (t0, min(config.T, 0.8 * t_reflect))


@dataclass
class PhaseFit:
    tau_inf: float
    p: float
    a: float
    window: tuple
    settled: bool


def asymptotic_phase(t, tau, m_star: float | None = None, window=None, noise_floor: float = 1e-12) -> PhaseFit:
    """Fit tau(t) = tau_inf - a (1 + t)^(-p) over the tail window."""
    t = np.asarray(t, dtype=float)
    tau = np.asarray(tau, dtype=float)
    t0, t1 = window if window is not None else (t[0], t[-1])
    sel = (t >= t0) & (t <= t1)
    if np.count_nonzero(sel) < 4:
        raise TailNotSettled("too few samples in the tail window")
    ts, ys = t[sel], tau[sel]
    if float(np.max(np.abs(ys - ys[-1]))) <= noise_floor:
        return PhaseFit(float(ys[-1]), float("nan"), 0.0, (float(t0), float(t1)), True)
    p0 = (m_star - 4.0) / 2.0 if m_star is not None else 1.0
    p0 = max(p0, 0.1)
    scale = float(np.max(np.abs(ys - ys[-1]))) or 1.0

    def resid(theta):
        tinf, a, p = theta
        return (tinf - a * (1.0 + ts) ** (-p) - ys) / scale

    a0 = (ys[-1] - ys[0]) / max(1e-300, (1.0 + ts[0]) ** (-p0) - (1.0 + ts[-1]) ** (-p0))
    sol = optimize.least_squares(resid, x0=[ys[-1], a0, p0], x_scale=[scale, abs(a0) + scale, 1.0],
                                 bounds=([-np.inf, -np.inf, -5.0], [np.inf, np.inf, 50.0]), xtol=1e-15,
                                 ftol=1e-15, gtol=1e-15, max_nfev=5000)
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise TailNotSettled(f"phase fit failed: {sol.message}")
    tinf, a, p = (float(v) for v in sol.x)
    return PhaseFit(tinf, p, a, (float(t0), float(t1)), True)
