"""Front profiles of the co-moving system by Newton's method on a finite-difference BVP.

The unknown is stored as a deviation from a step, e = v - H(x) v_inf with
H = 1 for x >= 0 and 0 otherwise. Both tails of e are then small numbers
carried with full relative precision, which the weighted norms require.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu
from scipy.special import expit

from . import fd
from .errors import (
    BoundaryTooTight,
    ContinuationStalled,
    DimensionMismatch,
    NewtonDiverged,
    SingularJacobian,
    TofwaveError,
)
from .gridw import Grid, write_field_csv
from .model import (
    ModelParams,
    QuinticCoeffs,
    RestState,
    S_omega,
    evaluate_Df,
    evaluate_f,
    f_increment,
    quintic,
    solve_rest_state,
)

# nodes used when evaluating shifted profiles; cubic leaves an O(h^4) floor in decay experiments
SHIFT_POINTS = 8


def step_function(x: np.ndarray) -> np.ndarray:
    return (np.asarray(x) >= 0.0).astype(float)


def tanh_front(x: np.ndarray, v_inf: np.ndarray, width: float, shift: float = 0.0) -> np.ndarray:
    """Deviation from the step of 0.5 (1 + tanh((x - shift)/width)) v_inf."""
    x = np.asarray(x, dtype=float)
    H = step_function(x)
    z = 2.0 * (x - shift) / width
    # 0.5 (1 + tanh(z/2)) = expit(z), and expit(z) - 1 = -expit(-z)
    dev = np.where(H > 0, -expit(-z), expit(z))
    return dev[:, None] * v_inf[None, :]


def tanh_front_derivative(x: np.ndarray, v_inf: np.ndarray, width: float, shift: float = 0.0) -> np.ndarray:
    z = 2.0 * (np.asarray(x, dtype=float) - shift) / width
    s = expit(z) * expit(-z)
    return (2.0 / width) * s[:, None] * v_inf[None, :]


def local_lagrange_interpolate(values: np.ndarray, grid: Grid, xq: np.ndarray, n_points: int = 4,
                               fill: float = 0.0) -> np.ndarray:
    """Lagrange interpolation on the n_points nodes around each query; `fill` outside [-L, L].

    Purely local, so tiny tail values keep their relative accuracy.
    """
    if n_points < 2 or n_points % 2:
        raise ValueError("n_points must be an even number >= 2")
    xq = np.asarray(xq, dtype=float)
    half = n_points // 2
    s = (xq + grid.L) / grid.h
    i = np.clip(np.floor(s).astype(int), half - 1, grid.N - 1 - half)
    t = s - i
    offsets = np.arange(1 - half, half + 1)
    values = np.asarray(values, dtype=float)
    extra = (slice(None),) + (None,) * (values.ndim - 1)
    out = 0.0
    for j in offsets:
        wj = np.ones_like(t)
        for m in offsets:
            if m != j:
                wj = wj * (t - m) / (j - m)
        out = out + wj[extra] * values[i + j]
    out = np.array(out, dtype=float)
    outside = (xq < -grid.L) | (xq > grid.L)
    out[outside] = fill
    return out


def local_cubic_interpolate(values: np.ndarray, grid: Grid, xq: np.ndarray, fill: float = 0.0) -> np.ndarray:
    return local_lagrange_interpolate(values, grid, xq, 4, fill)


@dataclass
class WaveProfile:
    grid: Grid
    e_star: np.ndarray
    c: float
    omega: float
    v_inf: np.ndarray
    residual_norm: float
    tail_rates: dict
    params: ModelParams
    rest: RestState
    template_width: float = 2.0
    template_shift: float = 0.0
    iterations: int = 0
    history: list = field(default_factory=list)

    @property
    def step(self) -> np.ndarray:
        return step_function(self.grid.x)

    @property
    def v_star(self) -> np.ndarray:
        return self.step[:, None] * self.v_inf[None, :] + self.e_star

    @property
    def d_star(self) -> np.ndarray:
        """v_star - v_inf, accurate on the right half-line."""
        return self.e_star - (1.0 - self.step)[:, None] * self.v_inf[None, :]

    def _split_apply(self, fn):
        # apply a linear local operation to v on the left and to v - v_inf on the right
        left = fn(self.v_star)
        right = fn(self.d_star)
        return np.where((self.grid.x >= 0.0)[:, None], right, left)

    @property
    def v_star_x(self) -> np.ndarray:
        """Sixth-order differences of the profile samples."""
        return self._split_apply(lambda v: fd.d1_high_order(v, self.grid.h))

    def shifted(self, tau: float) -> np.ndarray:
        """v_star(x - tau) by local Lagrange interpolation."""
        xq = self.grid.x - tau
        left = local_lagrange_interpolate(self.v_star, self.grid, xq, SHIFT_POINTS)
        right = local_lagrange_interpolate(self.d_star, self.grid, xq, SHIFT_POINTS) + self.v_inf
        return np.where((xq < -self.grid.L)[:, None], 0.0, np.where((self.grid.x >= 0.0)[:, None], right, left))

    def shift_difference(self, tau: float) -> np.ndarray:
        """v_star(x - tau) - v_star(x) with relative accuracy in both tails."""
        if tau == 0.0:
            return np.zeros_like(self.v_star)
        x = self.grid.x
        xq = x - tau
        left = local_lagrange_interpolate(self.v_star, self.grid, xq, SHIFT_POINTS) - self.v_star
        right = local_lagrange_interpolate(self.d_star, self.grid, xq, SHIFT_POINTS) - self.d_star
        return np.where((x >= 0.0)[:, None], right, left)

    def shifted_derivative(self, tau: float) -> np.ndarray:
        return local_lagrange_interpolate(self.v_star_x, self.grid, self.grid.x - tau, SHIFT_POINTS)

    def sidecar(self) -> dict:
        return {
            "c": self.c,
            "omega": self.omega,
            "v_inf": [float(a) for a in self.v_inf],
            "residual_norm": self.residual_norm,
            "tail_rates": self.tail_rates,
            "grid": {"half_width": self.grid.L, "n_points": self.grid.N},
        }

    def save(self, csv_path, json_path=None) -> None:
        csv_path = Path(csv_path)
        write_field_csv(csv_path, self.grid, self.v_star)
        json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
        json_path.write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n")


@dataclass
class ProfileContext:
    params: ModelParams
    rest: RestState
    grid: Grid
    template_width: float = 2.0
    template_shift: float = 0.0
    source: np.ndarray | None = None

    def __post_init__(self):
        x = self.grid.x
        self.H = step_function(x)
        self.d2H = fd.d2_central(self.H, self.grid.h)
        self.d1H = fd.d1_central(self.H, self.grid.h)
        self.S = S_omega(self.rest.omega)
        self.template_dev = tanh_front(x, self.rest.v_inf, self.template_width, self.template_shift)
        self.template_x = tanh_front_derivative(x, self.rest.v_inf, self.template_width, self.template_shift)

    def to_e(self, v: np.ndarray) -> np.ndarray:
        return v - self.H[:, None] * self.rest.v_inf[None, :]


def _nonlinear_part(ctx: ProfileContext, e: np.ndarray) -> np.ndarray:
    """(S_omega + g(|v|^2)) v for v = H v_inf + e, using S v_inf + f(v_inf) = 0 on the right."""
    right = ctx.H > 0
    out = e @ ctx.S.T
    out[~right] += evaluate_f(ctx.params, e[~right])
    vinf = np.broadcast_to(ctx.rest.v_inf, e[right].shape)
    out[right] += f_increment(ctx.params, vinf, e[right])
    return out


def _residual(ctx: ProfileContext, e: np.ndarray, c: float) -> tuple[np.ndarray, float]:
    h = ctx.grid.h
    A = ctx.params.A
    vinf = ctx.rest.v_inf
    D2v = fd.d2_central(e, h) + ctx.d2H[:, None] * vinf[None, :]
    D1v = fd.d1_central(e, h) + ctx.d1H[:, None] * vinf[None, :]
    F = D2v @ A.T + c * D1v + _nonlinear_part(ctx, e)
    if ctx.source is not None:
        F = F + ctx.source
    F[0] = 0.0
    F[-1] = 0.0
    phase = h * float(np.sum((e - ctx.template_dev)[1:-1] * ctx.template_x[1:-1]))
    return F, phase


def assemble_profile_residual(v: np.ndarray, c: float, ctx: ProfileContext) -> tuple[np.ndarray, float]:
    """Interior residual of A v'' + c v' + (S_omega + g(|v|^2)) v and the phase residual.

    Boundary rows are zero; v must carry the pinned end values 0 and v_inf.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (ctx.grid.N, 2):
        raise DimensionMismatch(f"field shape {v.shape} does not match grid ({ctx.grid.N}, 2)")
    return _residual(ctx, ctx.to_e(v), c)


def _jacobian(ctx: ProfileContext, e: np.ndarray, c: float) -> sparse.csc_matrix:
    h = ctx.grid.h
    vinf = ctx.rest.v_inf
    v = ctx.H[:, None] * vinf[None, :] + e
    diag = ctx.S[None, :, :] + evaluate_Df(ctx.params, v[1:-1])
    J = fd.linear_operator(ctx.params.A, c, h, diag)
    D1v = fd.d1_central(e, h) + ctx.d1H[:, None] * vinf[None, :]
    col = sparse.csc_matrix(fd.flatten_interior(D1v)[:, None])
    row = sparse.csc_matrix(h * fd.flatten_interior(ctx.template_x)[None, :])
    return sparse.bmat([[J, col], [row, None]], format="csc")


def _merit(F: np.ndarray, phase: float) -> float:
    return max(float(np.max(np.abs(F))), abs(phase))


def _newton(ctx: ProfileContext, e: np.ndarray, c: float, tol: float, max_iter: int, max_polish: int = 10):
    e = e.copy()
    e[0] = 0.0
    e[-1] = 0.0
    F, ph = _residual(ctx, e, c)
    res = _merit(F, ph)
    history = [res]
    it = 0
    n_polish = 0
    while True:
        if it >= max_iter + max_polish:
            raise NewtonDiverged(f"no convergence after {it} iterations", residual=res)
        try:
            lu = splu(_jacobian(ctx, e, c))
        except RuntimeError as exc:
            raise SingularJacobian(str(exc)) from exc
        rhs = -np.concatenate([fd.flatten_interior(F), [ph]])
        step = lu.solve(rhs)
        if not np.all(np.isfinite(step)):
            raise SingularJacobian("Newton step is not finite")
        de = fd.embed_interior(step[:-1], ctx.grid.N)
        dc = float(step[-1])
        if res < tol:
            # Polishing: full steps until every node has converged relative to its own size,
            # which the tiny tail values need beyond the sup-norm criterion.
            mag = np.abs(e)
            live = mag > 1e-280
            rel = float(np.max(np.abs(de[live]) / mag[live])) if np.any(live) else 0.0
            if rel < 1e-6 or n_polish >= max_polish:
                break
            e = e + de
            c = c + dc
            F, ph = _residual(ctx, e, c)
            res = _merit(F, ph)
            history.append(res)
            n_polish += 1
            it += 1
            continue
        if it >= max_iter:
            raise NewtonDiverged(f"no convergence after {max_iter} iterations", residual=res)
        lam = 1.0
        for _ in range(31):
            e_try = e + lam * de
            c_try = c + lam * dc
            F_try, ph_try = _residual(ctx, e_try, c_try)
            r_try = _merit(F_try, ph_try)
            if np.isfinite(r_try) and r_try <= (1.0 - 1e-4 * lam) * res:
                break
            lam *= 0.5
        else:
            raise NewtonDiverged("line search failed after 30 halvings", residual=res)
        e, c, F, ph, res = e_try, c_try, F_try, ph_try, r_try
        history.append(res)
        it += 1
    return e, c, F, history, it


def fit_tail_rates(grid: Grid, e_left: np.ndarray, d_right: np.ndarray, fraction: float = 0.2,
                   exclude: float = 0.05) -> dict:
    """Exponential rates of |v_star| (left) and |v_star - v_inf| (right) on the outer domain.

    The fit uses x in [-L(1-exclude), -L(1-2 fraction)] and its mirror image.
    Returned rates are positive numbers r with |.| ~ exp(-r |x|).
    """
    x = grid.x
    L = grid.L
    out = {}
    for side, vals, sgn in (("left", e_left, -1.0), ("right", d_right, 1.0)):
        ax = sgn * x
        mag = np.sqrt(np.sum(vals * vals, axis=-1))
        ok = mag > 1e-280
        sel = (ax >= L * (1.0 - 2.0 * fraction)) & (ax <= L * (1.0 - exclude)) & ok
        if np.count_nonzero(sel) < 5 and np.any(ok & (ax > 0)):
            # tail underflows before the outer band: use the same band relative to the last representable point
            a_max = float(np.max(ax[ok & (ax > 0)]))
            sel = (ax >= a_max * (1.0 - 2.0 * fraction)) & (ax <= a_max * (1.0 - exclude)) & ok
        if np.count_nonzero(sel) < 5:
            out[side] = float("nan")
            continue
        slope = np.polyfit(ax[sel], np.log(mag[sel]), 1)[0]
        out[side] = float(-slope)
    return out


def solve_profile(params: ModelParams, rest: RestState | None = None, grid: Grid | None = None,
                  initial_guess: np.ndarray | None = None, c0: float = 1.0, tol: float = 1e-10,
                  template_width: float = 2.0, template_shift: float = 0.0, max_iter: int = 60,
                  source: np.ndarray | None = None, tail_tol: float = 1e-8) -> WaveProfile:
    """Damped Newton for the front v_star and speed c with a tanh phase template.

    initial_guess is a full field v (with end values 0 and v_inf); the default
    is the template itself.
    """
    rest = rest or solve_rest_state(params)
    grid = grid or Grid(200.0, 4096)
    ctx = ProfileContext(params, rest, grid, template_width, template_shift, source)
    if initial_guess is None:
        e0 = ctx.template_dev.copy()
    else:
        initial_guess = np.asarray(initial_guess, dtype=float)
        if initial_guess.shape != (grid.N, 2):
            raise DimensionMismatch("initial guess does not match grid")
        e0 = ctx.to_e(initial_guess)
    e, c, F, history, it = _newton(ctx, e0, float(c0), tol, max_iter)
    prof = WaveProfile(
        grid=grid,
        e_star=e,
        c=c,
        omega=rest.omega,
        v_inf=rest.v_inf.copy(),
        residual_norm=float(np.max(np.abs(F))),
        tail_rates={},
        params=params,
        rest=rest,
        template_width=template_width,
        template_shift=template_shift,
        iterations=it,
        history=history,
    )
    prof.tail_rates = fit_tail_rates(grid, prof.v_star, prof.d_star)
    if source is None:
        j = 10
        left = float(np.linalg.norm(prof.v_star[j]))
        right = float(np.linalg.norm(prof.d_star[-1 - j]))
        if max(left, right) > tail_tol:
            raise BoundaryTooTight(
                f"profile not decayed near the boundary: |v(-L+10h)| = {left:.3e}, |v(L-10h) - v_inf| = {right:.3e}"
            )
    return prof


def _interpolate_params(p0: ModelParams, p1: ModelParams, t: float) -> ModelParams:
    n0, n1 = p0.nonlinearity, p1.nonlinearity
    if not (isinstance(n0, QuinticCoeffs) and isinstance(n1, QuinticCoeffs)):
        raise TypeError("continuation requires quintic coefficients at both ends")
    lerp = lambda a, b: (1.0 - t) * a + t * b  # noqa: E731
    return quintic(
        lerp(p0.alpha, p1.alpha), lerp(n0.beta0, n1.beta0), lerp(n0.beta2, n1.beta2), lerp(n0.beta4, n1.beta4),
        p1.description,
    )


def continue_profile(profile: WaveProfile, target_params: ModelParams, n_steps: int,
                     min_step: float = 1e-3, **solve_kw) -> list[WaveProfile]:
    """Linear homotopy from the profile's parameters to target_params.

    Each step re-solves from the previous profile; a failed step is halved
    until it drops below min_step (as a fraction of the full path).
    """
    p0 = profile.params
    if n_steps <= 0 or p0 == target_params:
        return [profile]
    family = [profile]
    t, dt = 0.0, 1.0 / n_steps
    solve_kw.setdefault("template_width", profile.template_width)
    solve_kw.setdefault("template_shift", profile.template_shift)
    while t < 1.0 - 1e-12:
        dt = min(dt, 1.0 - t)
        prev = family[-1]
        params = target_params if t + dt >= 1.0 - 1e-12 else _interpolate_params(p0, target_params, t + dt)
        try:
            rest = solve_rest_state(params)
            guess = prev.e_star + step_function(prev.grid.x)[:, None] * rest.v_inf[None, :]
            # keep the previous deviation but pin the new end values
            guess[0] = 0.0
            guess[-1] = rest.v_inf
            nxt = solve_profile(params, rest, prev.grid, initial_guess=guess, c0=prev.c, **solve_kw)
        except TofwaveError:
            dt *= 0.5
            if dt < min_step:
                raise ContinuationStalled(f"step fell below {min_step} at t = {t:.6f}", family=family)
            continue
        family.append(nxt)
        t += dt
    return family


def manufactured_source(params: ModelParams, rest: RestState, grid: Grid, v_m: np.ndarray, c_m: float,
                        template_width: float = 2.0, template_shift: float = 0.0) -> np.ndarray:
    """Source s with F_h(v_m, c_m) + s = 0, so that (v_m, c_m) is an exact discrete solution."""
    ctx = ProfileContext(params, rest, grid, template_width, template_shift)
    F, _ = _residual(ctx, ctx.to_e(v_m), c_m)
    return -F


def load_profile(csv_path, params: ModelParams, json_path=None) -> WaveProfile:
    """Rebuild a profile from its CSV and sidecar (tail precision limited to the CSV values)."""
    csv_path = Path(csv_path)
    json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
    meta = json.loads(json_path.read_text())
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    grid = Grid(meta["grid"]["half_width"], meta["grid"]["n_points"])
    rest = solve_rest_state(params)
    v_inf = np.asarray(meta["v_inf"], dtype=float)
    e = data[:, 1:3] - step_function(grid.x)[:, None] * v_inf[None, :]
    return WaveProfile(grid, e, float(meta["c"]), float(meta["omega"]), v_inf, float(meta["residual_norm"]),
                       dict(meta["tail_rates"]), params, rest)

