"""Batch front end: ``gspec solve | verify | ump-search | plotdata``.

Exit codes: 0 all predicates pass (inconclusive and skipped tolerated),
1 some predicate failed, 2 solver failure, 3 configuration or input error.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, RearrangeSpec, dump_config, load_config
from .fieldio import center_slice, dump_field, load_field, write_columns, write_slice_csv
from .grid import Field, forward_transform, inverse_transform, make_grid
from .report import ConvergenceError, HypothesisError, SolverError, VerificationReport

log = logging.getLogger("gspec")

EXIT_PASS, EXIT_FAIL, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2, 3

STATE_FILE = "state.gsfd"
REPORT_FILE = "report.json"
HISTORY_FILE = "residual_history.csv"


def _environment(cfg):
    env = {"version": __version__, "seed": cfg.seed, "mode": cfg.mode}
    if cfg.grid is not None:
        env["grid"] = {"n": cfg.grid.n, "N": cfg.grid.N, "L": cfg.grid.L}
    return env


def _grid(cfg):
    return make_grid(cfg.grid.n, cfg.grid.N, cfg.grid.L)


def _linear_problem(cfg, grid):
    from .linear import NAMED_POTENTIALS, LinearProblem

    pot = cfg.potential
    if pot.file:
        V = load_field(pot.file)
        if V.grid != grid:
            raise ConfigError(f"potential file {pot.file} is on grid {V.grid}, expected {grid}")
    else:
        V = NAMED_POTENTIALS[pot.name](grid, depth=pot.depth, width=pot.width, center=pot.center)
    try:
        return LinearProblem(cfg.symbol.build(grid.dim), V, grid)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _nonlinear_problem(cfg, grid):
    from .nonlinear import NonlinearProblem

    try:
        return NonlinearProblem(cfg.symbol.build(grid.dim), cfg.lam, cfg.sigma, grid)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _as_field(f):
    return f if isinstance(f, Field) else inverse_transform(f)


def _write_history(out, history):
    write_columns(os.path.join(out, HISTORY_FILE), ["iter", "residual"], [np.arange(len(history)), history])


def run_linear(cfg, out, rep_holder):
    from .linear import DENSE_LIMIT, birman_schwinger_iterate, check_negative_transform, solve_dense, solve_iterative, verify_linear

    g = _grid(cfg)
    prob = _linear_problem(cfg, g)
    method = cfg.solver.method or ("dense" if g.size <= DENSE_LIMIT else "iterative")
    if method == "birman_schwinger":
        ok, margin = check_negative_transform(prob)
        if not ok:
            rep = rep_holder
            rep.add("potential_transform_negative", "fail", margin, 0.0, "V^ < 0 almost everywhere")
            raise HypothesisError(f"potential transform is not strictly negative (margin {margin:.3e})")
        sol = birman_schwinger_iterate(prob, cfg.solver.lambda_bracket)
    elif method == "iterative":
        sol = solve_iterative(prob, cfg.solver.tol, cfg.solver.max_iters)
    elif method == "dense":
        sol = solve_dense(prob)
    else:
        raise ConfigError(f"solver.method {method!r} does not apply to linear problems")
    rep = verify_linear(sol, prob)
    rep.quantities["problem"] = {"kind": "linear", "symbol": cfg.symbol.name, "method": method}
    dump_field(os.path.join(out, STATE_FILE), sol.state)
    _write_history(out, sol.history or [sol.residual])
    return rep


def run_nonlinear(cfg, out):
    from .nonlinear import gradient_check, multi_start, omega_fullness, verify_nonlinear
    from .symbols import check_assumptions

    g = _grid(cfg)
    prob = _nonlinear_problem(cfg, g)
    if cfg.solver.method not in (None, "petviashvili"):
        raise ConfigError(f"solver.method {cfg.solver.method!r} does not apply to nonlinear problems")
    best, records = multi_start(prob, cfg.solver.seeds, cfg.solver.tol, cfg.solver.max_iters)
    rep = verify_nonlinear(best, prob, fullness_threshold=cfg.tolerances.fullness)
    actions = [r.action for r in records if r.converged]
    spread = (max(actions) - min(actions)) / abs(min(actions))
    rep.add("minimal_action_selected", bool(best.action_value <= min(actions)), spread, None, "ground states minimize the action")
    if cfg.solver.gradient_check:
        checks = gradient_check(best, prob, seeds=[cfg.seed + i for i in range(3)])
        worst = max(c[2] for c in checks)
        rep.add("action_gradient", bool(worst < 1e-6), worst, 1e-6, "directional derivative matches finite difference")
    rep.quantities["problem"] = {"kind": "nonlinear", "symbol": cfg.symbol.name}
    # fullness of every start, excited critical points included (observation only)
    rep.quantities["multi_start"] = [
        {
            "seed": r.seed,
            "converged": r.converged,
            "action": r.action,
            "residual": r.residual,
            "iterations": r.iterations,
            "omega_fullness": (
                omega_fullness(forward_transform(r.solution.state), cfg.tolerances.fullness)[0] if r.converged else None
            ),
        }
        for r in records
    ]
    sc = check_assumptions(prob.symbol, g)
    rep.quantities["symbol_checks"] = {
        "growth_bounds": sc.bounds_ok,
        "ellipticity": sc.ellipticity_ok,
        "even": sc.even_ok,
        "polynomial": prob.symbol.is_polynomial,
        "min_p": sc.min_p,
    }
    dump_field(os.path.join(out, STATE_FILE), best.state)
    _write_history(out, best.history)
    return rep


def run_rearrange(cfg, out):
    from .rearrangement import autocorrelation, bullet, positive_definite_check, rearrangement_defects
    from .rng import random_bandlimited
    from .symbols import fractional_laplacian

    g = _grid(cfg)
    spec = cfg.rearrange or RearrangeSpec()
    sym = cfg.symbol.build(g.dim) if cfg.symbol else fractional_laplacian(1, dim=g.dim)
    worst = {"l2": 0.0, "reflection": 0.0, "quad": 0.0, "excess": -np.inf, "autocorr": -np.inf}
    pd_ok = True
    for i in range(spec.samples):
        f = random_bandlimited(g, cfg.seed, spec.band, stream=i)
        d = rearrangement_defects(f, sym, spec.sigmas)
        worst["l2"] = max(worst["l2"], d["l2_defect"])
        worst["reflection"] = max(worst["reflection"], d["reflection_defect"])
        worst["quad"] = max(worst["quad"], d["quad_form_defect"])
        worst["excess"] = max(worst["excess"], *(d[f"lp{2 * s + 2}_excess"] for s in spec.sigmas))
        F = forward_transform(f)
        a, b = np.abs(autocorrelation(F).coeffs), autocorrelation(F.modulus()).coeffs.real
        worst["autocorr"] = max(worst["autocorr"], float(np.max(a - b) / b.max()))
        if i < 8:
            ok, _ = positive_definite_check(bullet(f), spec.pd_points, seed=cfg.seed + i)
            pd_ok &= ok
    rep = VerificationReport()
    rep.check("l2_preserved", worst["l2"], 1e-12, "||f_bullet||_2 = ||f||_2")
    rep.add("lp_increase", bool(worst["excess"] <= 1e-10), worst["excess"], 1e-10, "||f||_{2k} <= ||f_bullet||_{2k}")
    rep.check("conjugate_reflection", worst["reflection"], 1e-12, "f_bullet(-x) = conj f_bullet(x)")
    rep.check("quadratic_form_invariant", worst["quad"], 1e-12, "<f, P f> depends on |f^| only")
    rep.add("autocorrelation_majorized", bool(worst["autocorr"] <= 1e-10), worst["autocorr"], 1e-10, "|Psi_f| <= Psi_|f|")
    rep.add("bullet_positive_definite", pd_ok, None, None, "f_bullet is positive definite")
    rep.quantities["problem"] = {"kind": "rearrange", "samples": spec.samples}
    return rep


def run_ump(cfg, out):
    from .grid import lp_norm
    from .rearrangement import is_even_integer, lift_trig_poly, ump_violation_search

    u = cfg.ump
    res = ump_violation_search(u.p, u.max_freq, u.n_points, allow_even=u.allow_even)
    write_columns(
        os.path.join(out, "ump_patterns.csv"),
        ["pattern", "ratio"],
        [[" ".join(str(c) for c in pt) for pt in res.patterns], res.ratios],
    )
    rep = VerificationReport()
    if is_even_integer(u.p):
        rep.add("no_majorant_violation", bool(res.best_ratio <= 1 + 1e-10), res.best_ratio, 1 + 1e-10, "UMP holds for even p")
    else:
        rep.add("majorant_violation_found", "pass" if res.best_ratio > 1 else "inconclusive", res.best_ratio, 1.0, "UMP fails for p outside 2N")
    rep.quantities["ump"] = {"p": u.p, "max_freq": u.max_freq, "best_pattern": list(res.best_pattern), "best_ratio": res.best_ratio}
    if u.lift_lambda is not None and res.best_ratio > 1:
        coeffs = {m: float(c) for m, c in enumerate(res.best_pattern) if c}
        g = _grid(cfg) if cfg.grid is not None else make_grid(1, 4096, 12.0 / np.sqrt(u.lift_lambda))
        q, Q = lift_trig_poly(coeffs, u.lift_lambda, u.p, g)
        ratio = lp_norm(q, u.p) / lp_norm(Q, u.p)
        rep.add("gaussian_lift_violation", bool(ratio > 1), ratio, 1.0, "lifted example keeps ||q|| > ||Q||")
        rep.quantities["ump"]["lift_ratio"] = ratio
    rep.quantities["problem"] = {"kind": "ump_search"}
    return rep


def run_verify(cfg, out):
    from .linear import LinearSolution, linear_energy, verify_linear
    from .nonlinear import NonlinearSolution, action, residual, sobolev_quotient, verify_nonlinear

    state = _as_field(load_field(cfg.verify.field))
    g = _grid(cfg)
    if state.grid != g:
        raise ConfigError(f"field {cfg.verify.field} is on {state.grid}, config grid is {g}")
    if cfg.verify.problem == "linear":
        prob = _linear_problem(cfg, g)
        E = linear_energy(prob, state)
        sol = LinearSolution(E, state, below_essential=E < prob.min_p - 1e-10 * max(1.0, abs(prob.min_p)))
        rep = verify_linear(sol, prob)
    else:
        prob = _nonlinear_problem(cfg, g)
        sol = NonlinearSolution(state, residual(state, prob), 0, action(state, prob), sobolev_quotient(state, prob))
        rep = verify_nonlinear(sol, prob, fullness_threshold=cfg.tolerances.fullness)
        rep.check("residual", sol.residual, cfg.solver.tol * 10, "equation holds")
    rep.quantities["problem"] = {"kind": cfg.verify.problem, "symbol": cfg.symbol.name, "source": "file"}
    return rep


RUNNERS = {
    "solve_nonlinear": run_nonlinear,
    "rearrange": run_rearrange,
    "ump_search": run_ump,
    "verify_only": run_verify,
}


def execute(cfg, out):
    """Run ``cfg`` writing artifacts into ``out``; return the exit status."""
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.yaml"), "w") as fh:
        fh.write(dump_config(cfg))
    status = EXIT_PASS
    partial = VerificationReport()
    try:
        if cfg.mode == "solve_linear":
            rep = run_linear(cfg, out, partial)
        else:
            rep = RUNNERS[cfg.mode](cfg, out)
        status = EXIT_PASS if rep.passed else EXIT_FAIL
    except (SolverError, HypothesisError) as exc:
        rep = partial
        rep.quantities["error"] = str(exc)
        if isinstance(exc, ConvergenceError):
            rep.quantities["residual"] = exc.residual
            if exc.history:
                _write_history(out, exc.history)
        if isinstance(exc, HypothesisError) and not rep.entries:
            rep.add("hypothesis", "fail", None, None, "method hypothesis")
        status = EXIT_SOLVER
    rep.environment = _environment(cfg)
    rep.write(os.path.join(out, REPORT_FILE))
    return status


def emit_plotdata(out):
    """Write profile, spectrum, residual-history and decay-fit CSVs from a run directory."""
    from .nonlinear import decay_fit

    path = os.path.join(out, STATE_FILE)
    if not os.path.exists(path):
        raise FileNotFoundError(f"no field dump {STATE_FILE} in {out}")
    Q = _as_field(load_field(path))
    g = Q.grid
    written = []
    p = os.path.join(out, "profile.csv")
    write_slice_csv(p, Q)
    written.append(p)

    F = center_slice(forward_transform(Q).coeffs, g)
    p = os.path.join(out, "spectrum.csv")
    write_columns(p, ["xi", "abs", "phase"], [g.xi_axis, np.abs(F), np.angle(F)])
    written.append(p)

    hist = os.path.join(out, HISTORY_FILE)
    if not os.path.exists(hist):
        raise FileNotFoundError(f"no residual history {HISTORY_FILE} in {out}")
    written.append(hist)

    fit = decay_fit(Q)
    p = os.path.join(out, "decay_fit.csv")
    write_columns(
        p,
        ["r", "log_abs", "fitted", "slope"],
        [fit.radii, fit.log_profile, fit.intercept - fit.rate * fit.radii, np.full(fit.radii.shape, -fit.rate)],
    )
    written.append(p)
    return written


def build_parser():
    ap = argparse.ArgumentParser(prog="gspec", description="Ground states of Fourier-multiplier equations.")
    ap.add_argument("--version", action="version", version=f"gspec {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("solve", "solve the configured problem and verify it"),
        ("verify", "verify a stored field (mode verify_only)"),
        ("ump-search", "exhaustive majorant search (mode ump_search)"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True)
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
        p.add_argument("--tol", type=float)
    p = sub.add_parser("plotdata", help="write CSVs for plotting from a run directory")
    p.add_argument("--out", required=True)
    return ap


_EXPECTED_MODES = {
    "solve": ("solve_linear", "solve_nonlinear", "rearrange", "ump_search"),
    "verify": ("verify_only",),
    "ump-search": ("ump_search",),
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "plotdata":
        try:
            for path in emit_plotdata(args.out):
                print(path)
        except (FileNotFoundError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return EXIT_PASS
    try:
        cfg = load_config(args.config)
        if cfg.mode not in _EXPECTED_MODES[args.command]:
            raise ConfigError(f"mode {cfg.mode} cannot be run with '{args.command}'")
        if args.seed is not None:
            cfg.seed = args.seed
        if args.tol is not None:
            if not args.tol > 0:
                raise ConfigError("--tol must be positive")
            cfg.solver.tol = args.tol
        out = args.out or cfg.output
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        status = execute(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("report written to %s", os.path.join(out, REPORT_FILE))
    return status


if __name__ == "__main__":
    sys.exit(main())
