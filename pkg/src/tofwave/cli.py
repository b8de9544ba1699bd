"""Command-line entry point: `tofwave [global flags] <subcommand> [options]`.

Every run writes its files into --out together with manifest.json. Exit status
is 0 on success, 1 when a run's checks fail or a computation raises, 2 on usage
or configuration errors.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import evolution as ev
from . import spectral as sp
from . import verify as vf
from .config import Config, load_config
from .errors import ConfigError, TofwaveError
from .gridw import algebraic_perturbation, m_star
from .model import solve_rest_state, validate_assumptions
from .profile import solve_profile

SUBCOMMANDS = (
    "rest-state",
    "validate",
    "profile",
    "dispersion",
    "lambda-branch",
    "spectrum-probe",
    "resolvent-probe",
    "evolve",
    "linear-decay",
    "verify-kernels",
    "verify-gronwall",
    "verify-remainders",
    "sweep",
)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Run:
    """Output directory bookkeeping for one subcommand invocation."""

    def __init__(self, out: Path, quiet: bool):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.quiet = quiet
        self.files: list[str] = []
        self.timings: dict[str, float] = {}

    def path(self, name: str) -> Path:
        if name not in self.files:
            self.files.append(name)
        return self.out / name

    def write_json(self, name: str, obj) -> None:
        write_atomic(self.path(name), _dumps(obj))

    def say(self, text: str) -> None:
        if not self.quiet:
            print(text)

    def timed(self, label, fn, *args, **kw):
        t0 = time.perf_counter()
        out = fn(*args, **kw)
        self.timings[label] = time.perf_counter() - t0
        return out


def _resolve_config_path(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if p.exists():
        return p
    packaged = resources.files("tofwave").joinpath("data", p.name)
    if packaged.is_file():
        return Path(str(packaged))
    raise UsageError(f"config file {path} not found")


def _wave(cfg: Config, run: Run | None = None):
    params = cfg.model_params()
    rest = solve_rest_state(params, r_max=cfg["model"]["r_max"])
    pr = cfg["profile"]
    fn = lambda: solve_profile(params, rest, cfg.grid(), c0=pr["c0"], tol=pr["tol"],  # noqa: E731
                               template_width=pr["template_width"], template_shift=pr["template_shift"],
                               max_iter=pr["max_iter"])
    profile = run.timed("profile", fn) if run else fn()
    return params, rest, profile


def _psi2(profile, run: Run | None = None):
    L = sp.assemble_L(profile)
    La = sp.assemble_L_adjoint(profile)
    fn = lambda: sp.adjoint_null_vector(La, profile)  # noqa: E731
    adj = run.timed("adjoint_null_vector", fn) if run else fn()
    return L, adj


def _s_path(cfg: Config) -> tuple[np.ndarray, np.ndarray]:
    s = cfg["spectral"]
    s_abs = np.logspace(math.log10(s["s_min"]), math.log10(s["s_max"]), s["n_s"])
    return s_abs, s_abs * np.exp(1j * s["s_angle"])


# ---------------------------------------------------------------- subcommands


def cmd_rest_state(cfg, run, args):
    params = cfg.model_params()
    rest = solve_rest_state(params, r_max=cfg["model"]["r_max"])
    rep = validate_assumptions(params, rest)
    res = {"r_inf": rest.r_inf, "v_inf": rest.v_inf, "omega": rest.omega, "g1_prime": rest.g1_prime,
           "g2_prime": rest.g2_prime, "sigma1": rest.sigma1, "sigma2": rest.sigma2,
           "slope_combination": rest.slope_combination, "g1_at_zero": rep.g1_at_zero,
           "alpha1": rep.alpha1}
    run.write_json("rest_state.json", res)
    run.say(f"r_inf = {rest.r_inf:.12g}\nomega = {rest.omega:.12g}\n"
            f"margins: alpha1 = {rep.alpha1:.6g}, g1(0) = {rep.g1_at_zero:.6g}, "
            f"g1'(r_inf) = {rest.g1_prime:.6g}, alpha1 g1' + alpha2 g2' = {rest.slope_combination:.6g}")
    return res, None


def cmd_validate(cfg, run, args):
    params = cfg.model_params()
    try:
        rest = solve_rest_state(params, r_max=cfg["model"]["r_max"])
    except TofwaveError as exc:
        rest = None
        run.say(f"rest state: {exc}")
    rep = validate_assumptions(params, rest)
    res = rep.as_dict()
    run.write_json("assumptions.json", res)
    for key, val in res.items():
        run.say(f"{key}: {val}")
    return res, rep.all_pass


def cmd_profile(cfg, run, args):
    _, _, profile = _wave(cfg, run)
    profile.save(run.path("profile.csv"), run.path("profile.json"))
    L = sp.assemble_L(profile)
    res = {"c": profile.c, "omega": profile.omega, "residual_norm": profile.residual_norm,
           "tail_rates": profile.tail_rates, "kernel_residual": sp.kernel_residual(L),
           "iterations": profile.iterations}
    run.write_json("profile_summary.json", res)
    run.say(f"c = {profile.c:.12g}, residual = {profile.residual_norm:.3e}, tails = {profile.tail_rates}, "
            f"kernel residual = {res['kernel_residual']:.3e}")
    return res, res["kernel_residual"] < 1e-4


def cmd_dispersion(cfg, run, args):
    params, rest, profile = _wave(cfg, run)
    s = cfg["spectral"]
    nu = np.linspace(-s["nu_max"], s["nu_max"], s["n_nu"])
    curves = sp.dispersion_curves(params, rest, profile.c, nu)
    sp.write_curves_csv(run.path("curves.csv"), curves)
    crit = sp.critical_curve(curves)
    fit = sp.fit_tangency(crit, s["tangency_radius"])
    half = sp.fit_tangency(crit, s["tangency_radius"] / 2)
    cres = sp.fit_crescent(curves, fit.kappa_fit, s["crescent_factor"])
    inside = int(sum(np.count_nonzero(sp.crescent_contains(cv.s, cres)) for cv in curves))
    closest = float(np.min(np.abs(crit.s)))
    stability = abs(half.kappa_fit - fit.kappa_fit) / abs(fit.kappa_fit)
    res = {"c": profile.c, "closest_to_origin": closest, "kappa_fit": fit.kappa_fit,
           "kappa_fit_half_window": half.kappa_fit, "window_stability": stability,
           "crescent": {"kappa": cres.kappa, "gamma": cres.gamma, "rho": cres.rho, "delta": cres.delta},
           "samples_inside_crescent": inside}
    run.write_json("dispersion.json", res)
    run.say(f"kappa_fit = {fit.kappa_fit:.8g} (half window {half.kappa_fit:.8g}), |s| min = {closest:.2e}, "
            f"crescent {res['crescent']}, samples inside = {inside}")
    return res, closest < 1e-10 and fit.kappa_fit > 0 and stability < 0.05 and inside == 0


def cmd_lambda_branch(cfg, run, args):
    params, rest, profile = _wave(cfg, run)
    c = profile.c
    br = sp.track_lambda(params, rest, c)
    d2p = br.predicted["d2"]
    checks = {
        "lambda0": abs(br.lambda0) < 1e-10,
        "d1_times_c": abs(br.d1 * c - 1.0) < 1e-6,
        "d2_relative": abs(br.d2 - d2p) / abs(d2p) < 1e-4,
        "min_ratio_positive": br.min_ratio > 0,
    }
    res = {"c": c, "lambda0": br.lambda0, "d1": br.d1, "d2": br.d2, "predicted": br.predicted,
           "min_ratio": br.min_ratio, "path_min_ratios": [(p["a"], p["sign"], p["min_ratio"]) for p in br.paths],
           "checks": checks}
    run.write_json("lambda_branch.json", res)
    run.say(f"lambda(0) = {abs(br.lambda0):.2e}, lambda'(0) c = {float(np.real(br.d1 * c)):.10f}, "
            f"lambda''(0) = {float(np.real(br.d2)):.8g} (predicted {d2p:.8g}), min ratio = {br.min_ratio:.4g}")
    return res, all(checks.values())


def cmd_spectrum_probe(cfg, run, args):
    _, _, profile = _wave(cfg, run)
    s = cfg["spectral"]
    L = sp.assemble_L(profile)
    box = (s["box_re_min"], s["box_re_max"], s["box_im_min"], s["box_im_max"])
    rep = run.timed("probe", sp.point_spectrum_probe, L, box, beta_E=s["beta_e"],
                    artifact_radius=s["artifact_radius"])
    res = {"box": box, "beta_E": s["beta_e"], "candidates": rep.candidates, "violations": rep.violations,
           "kernel_dims": rep.kernel_dims, "singular_values_L": rep.singular_values_L,
           "singular_values_L2": rep.singular_values_L2}
    run.write_json("spectrum.json", res)
    run.say(f"{len(rep.candidates)} candidates, {len(rep.violations)} violations, kernel dims {rep.kernel_dims}")
    return res, not rep.violations and tuple(rep.kernel_dims) == (1, 1)


def cmd_resolvent_probe(cfg, run, args):
    _, _, profile = _wave(cfg, run)
    L, adj = _psi2(profile, run)
    g = profile.grid
    rates = cfg.rates()
    vx = profile.v_star_x
    s_abs, s_path = _s_path(cfg)
    r = algebraic_perturbation(rates.k + 1.0 + rates.mu + 0.25, 1.0, "modulated", g)
    r = r - sp.projector_Pk(r, adj.psi2, vx, g)
    rows = sp.resolvent_probe(L, r, s_path, rates.k, rates.mu, adj.psi2)
    sp.write_probe_csv(run.path("probe_projected.csv"), rows)
    ratio = [row.norm_v / row.norm_r_strong for row in rows]
    rows_k = sp.resolvent_probe(L, vx, s_path, rates.k, rates.mu, adj.psi2)
    sp.write_probe_csv(run.path("probe_kernel.csv"), rows_k)
    slope = sp.loglog_slope(s_abs, [row.norm_v for row in rows_k])
    Pv = sp.projector_Pk(vx, adj.psi2, vx, g)
    res = {"psi2_normalisation": sp.inner(adj.psi2, vx, g),
           "idempotency": float(np.max(np.abs(sp.projector_Pk(Pv, adj.psi2, vx, g) - Pv))),
           "ratio_max_over_min": max(ratio) / min(ratio), "kernel_slope": slope}
    run.write_json("resolvent.json", res)
    run.say(f"(psi2, v_x) = {res['psi2_normalisation']:.12f}, ratio max/min = {res['ratio_max_over_min']:.4g}, "
            f"kernel slope = {slope:.4f}")
    return res, (abs(res["psi2_normalisation"] - 1) < 1e-10 and res["ratio_max_over_min"] < 2
                 and abs(slope + 1) <= 0.2)


def _sim_config(cfg: Config, grid, dt=None) -> ev.SimulationConfig:
    e = cfg["evolution"]
    return ev.SimulationConfig(grid, dt=e["dt"] if dt is None else dt, T=e["t_final"], scheme=e["scheme"],
                               rates=cfg.rates(), output_stride=e["output_stride"])


def cmd_evolve(cfg, run, args):
    _, _, profile = _wave(cfg, run)
    _, adj = _psi2(profile, run)
    e = cfg["evolution"]
    g = profile.grid
    sim = _sim_config(cfg, g)
    if e["shift"] != 0.0:
        u0 = profile.shift_difference(e["shift"])
    else:
        u0 = algebraic_perturbation(e["k_decay"], e["amplitude"], e["seed_shape"], g)
    result = run.timed("evolve", ev.evolve_nonlinear, u0, sim, profile, adj.psi2)
    result.write_csv(run.path("timeseries.csv"))
    ms = m_star(sim.rates.m)
    window = ev.default_fit_window(profile, sim, e["fit_t0"])
    fit = ev.fit_decay(result.t, result.norm("H1k"), window)
    phase = ev.asymptotic_phase(result.t, result.tau, ms)
    res = {"m_star": ms, "dt_max": sim.dt_max, "window": window, "decay": fit.__dict__,
           "phase": phase.__dict__, "tau_final": float(result.tau[-1])}
    run.write_json("evolve.json", res)
    run.say(f"||w||_H1k exponent = {fit.exponent:.4g} on {window}, tau_inf = {phase.tau_inf:.10g}, p = {phase.p:.4g}")
    if e["shift"] != 0.0:
        return res, abs(phase.tau_inf - e["shift"]) < 1e-6
    ok = fit.exponent <= -(ms - 2) / 2 + 0.3 and not (phase.p < (ms - 4) / 2 - 0.3)
    return res, ok


def cmd_linear_decay(cfg, run, args):
    _, _, profile = _wave(cfg, run)
    L, adj = _psi2(profile, run)
    e = cfg["evolution"]
    g = profile.grid
    sim = _sim_config(cfg, g, dt=e["linear_dt"])
    sim.output_stride = max(1, int(round(1.0 / sim.dt)))
    vx = profile.v_star_x
    u = algebraic_perturbation(e["k_decay"], 1.0, e["seed_shape"], g)
    w0 = u - sp.projector_Pk(u, adj.psi2, vx, g)
    t, n = run.timed("linear", ev.evolve_linear, w0, sim, L)
    tk, nk = ev.evolve_linear(vx, sim, L)
    with open(run.path("linear_decay.csv"), "w") as fh:
        fh.write("t,norm_H1k,norm_H1k_kernel\n")
        for a, b, c in zip(t, n, nk):
            fh.write(f"{a!r},{b!r},{c!r}\n")
    ms = m_star(sim.rates.m)
    window = ev.default_fit_window(profile, sim, e["fit_t0"])
    fit = ev.fit_decay(t, n, window)
    fit_k = ev.fit_decay(tk, nk, window)
    res = {"m_star": ms, "window": window, "decay": fit.__dict__, "kernel": fit_k.__dict__}
    run.write_json("linear_decay.json", res)
    run.say(f"projected data exponent = {fit.exponent:.4g}, kernel data exponent = {fit_k.exponent:.4g} on {window}")
    return res, fit.exponent <= -ms / 2 + 0.3 and abs(fit_k.exponent) <= 0.05


def cmd_verify_kernels(cfg, run, args):
    reports = [
        vf.kernel_bound_1(3.0, 0.5),
        vf.kernel_bound_1(2.0, 1.0, beta_zero=True),
        vf.kernel_bound_2(0.5),
        vf.kernel_bound_2(0.0),
        vf.kernel_bound_3(2.0),
        vf.kernel_bound_3(1.0),
    ]
    for i, rep in enumerate(reports):
        write_atomic(run.path(f"{rep['check']}_{i}.json"), vf.report_json(rep))
        run.say(f"{rep['check']} {rep['params']}: sup = {rep['sup']:.8g}, bound = {rep['bound']}, pass = {rep['pass']}")
    return {"reports": [{k: r[k] for k in ("check", "params", "sup", "bound", "pass")} for r in reports]}, \
        all(r["pass"] for r in reports)


def cmd_verify_gronwall(cfg, run, args):
    v = cfg["verify"]
    p = args.p if getattr(args, "p", None) is not None else v["p"]
    rep = vf.gronwall_kernel_constant(p)
    C3 = vf.gronwall_constant(p)
    eps = v["eps"] if v["eps"] >= 0 else 1.0 / (9.0 * v["c1"] * v["c2"] * C3)
    it = vf.gronwall_iteration_check(p, v["c1"], v["c2"], eps, v["t_final"], v["dt"])
    write_atomic(run.path("gronwall_kernel_constant.json"), vf.report_json(rep))
    write_atomic(run.path("gronwall_iteration_check.json"), vf.report_json(it))
    run.say(f"sup = {rep['sup']:.10g}, C3 = {C3:.10g}, pass = {rep['pass']}")
    run.say(f"iteration at eps = {eps:.6g}: max phi = {it['sup']:.6g}, bound holds = {it['pass']}")
    return {"sup": rep["sup"], "C3": C3, "eps": eps, "iteration_pass": it["pass"]}, rep["pass"] and it["pass"]


def cmd_verify_remainders(cfg, run, args):
    _, _, profile = _wave(cfg, run)
    _, adj = _psi2(profile, run)
    v = cfg["verify"]
    rng = np.random.default_rng(args.seed)
    g = profile.grid
    n = v["n_pairs"]
    amp = v["amplitude"]
    taus = [0.0, 0.3 * amp, -0.7 * amp]
    sets = []
    for _ in range(2):
        ws = vf.random_perturbations(g, 2 * n, amp, rng)
        sets.append(vf.remainder_checks(profile, adj.psi2, taus, list(zip(ws[:n], ws[n:])), k=v["norm_k"]))
    c1, c2 = sets[0]["sup"], sets[1]["sup"]
    w = vf.random_perturbations(g, 1, amp, rng)[0]
    scal = vf.quadratic_scaling(profile, w, v["norm_k"])
    res = {"constants": [c1, c2], "stability": abs(c1 - c2) / max(c1, c2),
           "projection_residual": max(s["resolution_study"]["max_projection_residual"] for s in sets),
           "quadratic_scaling": [scal[0] / scal[1], scal[1] / scal[2]]}
    run.write_json("remainders.json", res)
    run.say(f"Lipschitz constants {c1:.5g}, {c2:.5g}; halving ratios {res['quadratic_scaling']}")
    ok = (res["stability"] <= 0.25 and res["projection_residual"] < 1e-10
          and all(abs(q / 4 - 1) < 0.2 for q in res["quadratic_scaling"]))
    return res, ok


RUNNERS = {
    "rest-state": cmd_rest_state,
    "validate": cmd_validate,
    "profile": cmd_profile,
    "dispersion": cmd_dispersion,
    "lambda-branch": cmd_lambda_branch,
    "spectrum-probe": cmd_spectrum_probe,
    "resolvent-probe": cmd_resolvent_probe,
    "evolve": cmd_evolve,
    "linear-decay": cmd_linear_decay,
    "verify-kernels": cmd_verify_kernels,
    "verify-gronwall": cmd_verify_gronwall,
    "verify-remainders": cmd_verify_remainders,
}


def _file_hash(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def execute(subcommand: str, cfg: Config, out: Path, args, config_path: Path | None = None) -> bool | None:
    """Run one subcommand and write its manifest; returns the pass flag (None if not applicable)."""
    run = Run(out, args.quiet)
    t0 = time.perf_counter()
    error = None
    passed = None
    try:
        result, passed = RUNNERS[subcommand](cfg, run, args)
    except TofwaveError as exc:
        error = f"{type(exc).__name__}: {exc}"
        result, passed = None, False
    run.timings["total"] = time.perf_counter() - t0
    manifest = {
        "schema": 1,
        "subcommand": subcommand,
        "tool_version": __version__,
        "seed": args.seed,
        "config": cfg.as_dict(),
        "config_digest": cfg.digest(),
        "inputs": {str(config_path): _file_hash(config_path)} if config_path else {},
        "outputs": list(run.files),
        "timings": run.timings,
        "passed": passed,
        "error": error,
    }
    write_atomic(run.out / "manifest.json", _dumps(manifest))
    if error:
        print(f"error: {error}", file=sys.stderr)
    return passed


def _sweep_cell(payload):
    task, values, out, seed, quiet = payload
    cfg = Config()
    for (section, key), val in values:
        cfg.set(section, key, val)
    ns = argparse.Namespace(seed=seed, quiet=True, p=None)
    return execute(task, cfg, Path(out), ns)


def cmd_sweep(base: Config, args, out: Path, threads: int) -> bool:
    if args.task not in RUNNERS:
        raise UsageError(f"unknown sweep task {args.task!r}")
    axes = []
    for spec in args.set or []:
        if "=" not in spec or "." not in spec.split("=", 1)[0]:
            raise UsageError(f"sweep axis must look like section.key=v1,v2: {spec!r}")
        lhs, rhs = spec.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        vals = [v.strip() for v in rhs.split(",") if v.strip()]
        probe = base.copy()
        for val in vals:
            probe.set(section, key, val)  # validates key and value
        axes.append([((section, key), val) for val in vals])
    fixed = [((s, k), str(base[s][k])) for s, k in base.explicit]
    cells = list(itertools.product(*axes)) if axes else [()]
    out.mkdir(parents=True, exist_ok=True)
    payloads = [(args.task, fixed + list(cell), str(out / f"cell_{i:03d}"), args.seed, True)
                for i, cell in enumerate(cells)]
    if threads > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_cell, payloads))
    else:
        results = [_sweep_cell(p) for p in payloads]
    index = {"schema": 1, "task": args.task,
             "cells": [{"dir": Path(p[2]).name, "overrides": {f"{s}.{k}": v for (s, k), v in cell}, "passed": r}
                       for p, cell, r in zip(payloads, cells, results)]}
    write_atomic(out / "index.json", _dumps(index))
    if not args.quiet:
        for c in index["cells"]:
            print(f"{c['dir']}: {c['overrides']} -> {c['passed']}")
    return all(r is not False for r in results)


# ---------------------------------------------------------------- argument parsing


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="configuration file")
    parser.add_argument("--out", default=d, help="output directory")
    parser.add_argument("--seed", type=int, default=d if suppress else 0, help="random seed")
    parser.add_argument("--threads", type=int, default=d, help="worker processes (fallback: TOFWAVE_THREADS)")
    parser.add_argument("--quiet", action="store_true", default=d if suppress else False)
    parser.add_argument("--set", action="append", default=d, metavar="SECTION.KEY=VALUE",
                        help="override a configuration value (sweep: comma-separated values)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tofwave", description="Oscillating front stability toolkit")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    sub.required = True
    for name in SUBCOMMANDS:
        sp_ = sub.add_parser(name)
        _global_flags(sp_, suppress=True)
        if name == "verify-gronwall":
            sp_.add_argument("--p", type=float, default=None, help="Gronwall exponent p > 1")
        if name == "sweep":
            sp_.add_argument("--task", required=True, choices=sorted(RUNNERS), help="subcommand run per cell")
    return parser


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("TOFWAVE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"TOFWAVE_THREADS must be an integer, got {env!r}") from None
    return 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        config_path = _resolve_config_path(args.config)
        cfg = load_config(config_path)
        threads = _threads(args)
        out = Path(args.out) if args.out else Path("tofwave_runs") / args.subcommand
        if args.subcommand == "sweep":
            ok = cmd_sweep(cfg, args, out, threads)
            return 0 if ok else 1
        for assignment in args.set or []:
            cfg.override(assignment)
        passed = execute(args.subcommand, cfg, out, args, config_path)
    except (UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    return 1 if passed is False else 0


if __name__ == "__main__":
    sys.exit(main())
