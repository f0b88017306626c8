"""``stokeselast <subcommand> --config <path> [--out <dir>] [--deterministic]``.

Exit status: 0 success, 1 configuration or input error, 2 solver failure,
3 non-convergence.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import adjoint, elasticity, landweber, symbols
from .config import ConfigError, RunConfig, load_config, write_resolved
from .fieldio import FieldFileError, read_field, read_manifest, write_field
from .fields import CENTER, ScalarField, l2_norm
from .linsolve import SolverError
from .phantom import PhantomError, add_noise, generate_phantom, shear_boundary_data
from .stokes import AdmissibilityError, StokesProblem, solve_stokes

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_NONCONVERGED = 0, 1, 2, 3
MEASUREMENT_FORMAT = "stokeselast-measurements/1"
FIELD_SUFFIX = ".field"

log = logging.getLogger("stokeselast")


class CommandError(ValueError):
    """Inputs that are well-formed YAML but unusable for the command."""


# ---------------------------------------------------------------------------
# shared setup

def _true_mu(cfg: RunConfig):
    grid = cfg.grid.build()
    if cfg.inputs.mu:
        mu = read_field(cfg.inputs.mu)
        if not isinstance(mu, ScalarField) or mu.location != CENTER:
            raise CommandError(f"{cfg.inputs.mu}: mu must be a cell-centered scalar field")
        if mu.grid != grid:
            raise CommandError(f"{cfg.inputs.mu}: grid differs from the configured grid")
        return mu
    return generate_phantom(cfg.phantom.build(grid, cfg.physics.mu_floor))


def _forward(cfg: RunConfig, mu, F):
    prob = StokesProblem(mu.grid, mu, cfg.physics.omega2, F, mu_floor=cfg.physics.mu_floor)
    return solve_stokes(prob, cfg.physics.solver_tol)


def _synthesize(cfg: RunConfig, mu):
    """Forward data for every configured mode, with noise if requested.

    Returns ``(MeasurementSet, clean velocities, modes)``.
    """
    records, clean, noise_sq = [], [], 0.0
    level = cfg.noise.level
    for k, m in enumerate(cfg.measurements):
        F = shear_boundary_data(mu.grid, m.mode)
        u = _forward(cfg, mu, F).u
        um = add_noise(u, level, cfg.noise.seed + k)
        noise_sq += l2_norm(um - u) ** 2
        records.append(adjoint.Measurement(F, um, m.label))
        clean.append(u)
    model = "gaussian" if level > 0 else "none"
    data = adjoint.MeasurementSet(records, model, level, float(np.sqrt(noise_sq)),
                                  cfg.noise.seed)
    return data, clean, [m.mode for m in cfg.measurements]


def write_measurements(out: Path, data, modes) -> Path:
    lines = {
        "format": MEASUREMENT_FORMAT,
        "count": len(data.records),
        "noise_model": data.noise_model,
        "noise_level": repr(float(data.noise_level)),
        "noise_norm": repr(float(data.noise_norm)),
        "seed": data.seed,
    }
    for k, (rec, mode) in enumerate(zip(data.records, modes)):
        write_field(out / f"F_{rec.label}{FIELD_SUFFIX}", rec.boundary_data, f"F_{rec.label}")
        write_field(out / f"u_m_{rec.label}{FIELD_SUFFIX}", rec.measured, f"u_m_{rec.label}")
        lines[f"record.{k}.label"] = rec.label
        lines[f"record.{k}.mode"] = mode
        lines[f"record.{k}.boundary_data"] = f"F_{rec.label}{FIELD_SUFFIX}"
        lines[f"record.{k}.measured"] = f"u_m_{rec.label}{FIELD_SUFFIX}"
    path = out / "measurements.txt"
    path.write_text("".join(f"{k} = {v}\n" for k, v in lines.items()), encoding="utf-8")
    return path


def read_measurements(path):
    path = Path(path)
    m = read_manifest(path)
    if m.get("format") != MEASUREMENT_FORMAT:
        raise FieldFileError(f"{path}: unsupported measurement format {m.get('format')!r}")
    try:
        records, modes = [], []
        for k in range(int(m["count"])):
            F = read_field(path.parent / m[f"record.{k}.boundary_data"])
            um = read_field(path.parent / m[f"record.{k}.measured"])
            records.append(adjoint.Measurement(F, um, m[f"record.{k}.label"]))
            modes.append(m[f"record.{k}.mode"])
        seed = None if m["seed"] == "None" else int(m["seed"])
        data = adjoint.MeasurementSet(records, m["noise_model"], float(m["noise_level"]),
                                      float(m["noise_norm"]), seed)
    except KeyError as exc:
        raise FieldFileError(f"{path}: manifest is missing {exc.args[0]!r}") from exc
    except (TypeError, AttributeError) as exc:
        raise FieldFileError(f"{path}: {exc}") from exc
    return data, modes


def _data(cfg: RunConfig, mu_true):
    if cfg.inputs.measurements:
        data, _ = read_measurements(cfg.inputs.measurements)
        if data.grid != mu_true.grid:
            raise CommandError("measurements live on a different grid than the configuration")
        return data
    return _synthesize(cfg, mu_true)[0]


def _start_value(cfg: RunConfig, value) -> float:
    return cfg.phantom.background if value is None else value


# ---------------------------------------------------------------------------
# commands

def cmd_phantom(cfg: RunConfig, out: Path) -> int:
    """Generate mu_true, boundary data and measured fields."""
    mu = _true_mu(cfg)
    data, _, modes = _synthesize(cfg, mu)
    write_field(out / f"mu_true{FIELD_SUFFIX}", mu, "mu_true")
    write_measurements(out, data, modes)
    print(f"phantom: mu in [{mu.values.min():.6g}, {mu.values.max():.6g}], "
          f"{len(data.records)} measurement(s), noise norm {data.noise_norm:.6g}")
    return EXIT_OK


def cmd_forward(cfg: RunConfig, out: Path) -> int:
    """Solve the forward problem for each configured boundary mode."""
    mu = _true_mu(cfg)
    lines = []
    for m in cfg.measurements:
        sol = _forward(cfg, mu, shear_boundary_data(mu.grid, m.mode))
        write_field(out / f"u_{m.label}{FIELD_SUFFIX}", sol.u, f"u_{m.label}")
        write_field(out / f"p_{m.label}{FIELD_SUFFIX}", sol.p, f"p_{m.label}")
        r = sol.report
        lines += [f"{m.label}.mode = {m.mode}", f"{m.label}.method = {r.method}",
                  f"{m.label}.residual = {r.relative_residual!r}", f"{m.label}.iterations = {r.iterations}"]
        print(f"forward {m.label} ({m.mode}): relative residual {r.relative_residual:.3e} via {r.method}")
    (out / "forward_report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_limit_study(cfg: RunConfig, out: Path) -> int:
    """Compare elasticity solutions with the incompressible limit."""
    mu = _true_mu(cfg)
    F = shear_boundary_data(mu.grid, cfg.measurements[0].mode)
    res = elasticity.limit_study(mu, cfg.physics.omega2, F, cfg.limit_study.lambdas,
                                 tol=cfg.physics.solver_tol)
    (out / "limit_study.tsv").write_text(res.to_tsv(), encoding="utf-8")
    print("lambda\th1_error\tdiv_norm")
    for lam, e, d in res.rows():
        print(f"{lam:.6g}\t{e:.6e}\t{d:.6e}")
    print(f"slope_h1 = {res.h1_slope:.4f}")
    print(f"slope_div = {res.div_slope:.4f}")
    print(f"monotone = {res.monotone()}")
    return EXIT_OK


def cmd_gradcheck(cfg: RunConfig, out: Path) -> int:
    """Check the adjoint gradient against finite differences."""
    mu_true = _true_mu(cfg)
    data = _data(cfg, mu_true)
    gc = cfg.gradcheck
    mu = ScalarField.constant(mu_true.grid, _start_value(cfg, gc.mu))
    res = adjoint.check_gradient(mu, cfg.physics.omega2, data, gc.directions, gc.epsilons,
                                 cfg.seed, cfg.physics.solver_tol)
    (out / "gradcheck.tsv").write_text(res.to_tsv(), encoding="utf-8")
    ok = res.max_mismatch <= gc.tolerance
    print(f"max relative FD mismatch = {res.max_mismatch:.3e} "
          f"(tolerance {gc.tolerance:g}) {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NONCONVERGED


def cmd_reconstruct(cfg: RunConfig, out: Path) -> int:
    """Run the Landweber reconstruction."""
    mu_true = _true_mu(cfg)
    data = _data(cfg, mu_true)
    lw = cfg.landweber
    lcfg = landweber.LandweberConfig(
        sigma=lw.sigma, max_iterations=lw.max_iterations,
        gradient_tolerance=lw.gradient_tolerance, discrepancy_tau=lw.discrepancy_tau,
        mu_floor=cfg.physics.mu_floor, line_search=lw.line_search, seed=cfg.seed,
        snapshot_every=lw.snapshot_every, solver_tol=cfg.physics.solver_tol)
    mu0 = ScalarField.constant(mu_true.grid, _start_value(cfg, lw.mu0))
    trace = landweber.run(mu0, cfg.physics.omega2, data, lcfg, mu_true=mu_true)
    (out / "trace.tsv").write_text(trace.to_tsv(), encoding="utf-8")
    write_field(out / f"mu_final{FIELD_SUFFIX}", trace.final_mu, "mu_final")
    for n, snap in sorted(trace.snapshots.items()):
        write_field(out / "snapshots" / f"mu_{n:05d}{FIELD_SUFFIX}", snap, f"mu_{n:05d}")
    last = trace.records[-1]
    err = "n/a" if last.l2_error is None else f"{last.l2_error:.4f}"
    print(f"reconstruct: {trace.iterations} iteration(s), stop = {trace.stop_reason}, "
          f"J = {last.objective:.6e}, relative L2 error = {err}")
    if trace.stop_reason == landweber.STOP_SOLVER:
        print(f"solver failure: {trace.message}", file=sys.stderr)
        return EXIT_SOLVER
    if trace.stop_reason == landweber.STOP_LINE_SEARCH or not trace.monotone():
        print(f"no convergence: {trace.message or 'misfit increased'}", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_check_conditions(cfg: RunConfig, out: Path) -> int:
    """Evaluate the symbol and boundary conditions."""
    c = cfg.conditions
    for k, pair in enumerate(c.pairs):
        A, At = np.asarray(pair["A"], float), np.asarray(pair["At"], float)
        # a single 3x3 matrix is one sample point; a stack of them is a field
        A_field = [A] if A.ndim == 2 else list(A)
        At_field = [At] if At.ndim == 2 else list(At)
        rep = symbols.condition_3d(A_field, At_field, c.threshold, c.n_directions)
        (out / f"condition_3d_{k}.txt").write_text(rep.to_text(), encoding="utf-8")
        print(f"condition_3d[{k}]: margin = {rep.margin:.6g} passed = {rep.passed}")
    for k, (a, b, cc) in enumerate(c.lopatinskii):
        rep = symbols.lopatinskii_roots(float(a), float(b), float(cc))
        (out / f"lopatinskii_{k}.txt").write_text(rep.to_text(), encoding="utf-8")
        print(f"lopatinskii[{k}]: decaying roots = {rep.decaying}")
    mu = _true_mu(cfg)
    for m in cfg.measurements:
        u = _forward(cfg, mu, shear_boundary_data(mu.grid, m.mode)).u
        nd = symbols.nondegeneracy_2d(u, c.threshold)
        ce = symbols.curl_ellipticity_2d(u, c.n_angles)
        (out / f"condition_2d_{m.label}.txt").write_text(nd.to_text(), encoding="utf-8")
        (out / f"symbol_2d_{m.label}.txt").write_text(ce.to_text(), encoding="utf-8")
        print(f"condition_2d[{m.label}]: margin = {nd.margin:.6g} passed = {nd.passed}")
    return EXIT_OK


COMMANDS = {
    "phantom": cmd_phantom,
    "forward": cmd_forward,
    "limit-study": cmd_limit_study,
    "gradcheck": cmd_gradcheck,
    "reconstruct": cmd_reconstruct,
    "check-conditions": cmd_check_conditions,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stokeselast",
                                     description="Incompressible elastography toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True, type=Path, help="YAML run configuration")
        p.add_argument("--out", default=None, type=Path,
                       help="output directory (overrides output_dir in the config)")
        p.add_argument("--deterministic", action="store_true",
                       help="single-threaded numerics for bit-identical reruns")
        p.add_argument("--verbose", action="store_true", help="log progress to stderr")
    return parser


def run_command(name: str, cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_resolved(cfg, out)
    limits = threadpool_limits(limits=1) if cfg.deterministic else contextlib.nullcontext()
    with limits:
        return COMMANDS[name](cfg, out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg.output_dir = str(args.out)
        cfg.deterministic = cfg.deterministic or args.deterministic
        return run_command(args.command, cfg)
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, CommandError, FieldFileError, PhantomError, AdmissibilityError,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
