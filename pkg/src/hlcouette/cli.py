"""Command line interface.

Subcommands:
    validate   check a config and its initial data, report eta
    run        integrate the coupled gap problem, write artifacts
    hl-run     integrate a single stress ensemble under a given loading
    oracle     closed-form fully relaxing solution at one time
    diagnose   run the check battery on a stored checkpoint
    nondim     convert parameters between dimensional and scaled form

Exit codes: 0 success, 2 usage, 3 config/validation, 4 numerical failure,
5 diagnostic failure, 6 artifact I/O failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import coupler, diagnostics, snapshots
from .config import RunConfig, load_config
from .errors import ConfigError, HlCouetteError
from .initial import compute_eta, validate_initial
from .meso import compute_tau, hl_solve
from .maxwell import maxwell_p, maxwell_tau
from .params import (DimensionlessParams, PhysicalParams, nondimensionalize,
                     redimensionalize)


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file (defaults used if omitted)")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a config value (repeatable)")


def _load(args) -> RunConfig:
    return load_config(args.config, args.set)


def cmd_validate(args) -> int:
    cfg = _load(args)
    prob = cfg.problem()
    init = cfg.initial()
    report = validate_initial(init, prob.sigma_grid, prob.dp.alpha, prob.dp.mu,
                              protocol=prob.protocol,
                              allow_degenerate=cfg.values["model"]["allow_degenerate"])
    print(f"fingerprint: {cfg.fingerprint}")
    print(f"mode: {cfg.mode}" + (" (fully relaxing)" if cfg.fully_relaxing else ""))
    sg, tg = prob.sigma_grid, prob.space_grid
    print(f"grids: n_y = {tg.n_y}, n_sigma = {sg.n_sigma}, "
          f"sigma_max = {sg.sigma_max:g}, dt = {tg.dt:g}, "
          f"t_final = {tg.t_final:g} ({tg.n_steps} steps)")
    eta, details = compute_eta(init.p0, prob.sigma_grid, prob.dp.alpha)
    print(f"eta = {eta:.17g}")
    if prob.sigma_grid.threshold > 0:
        print(f"  attained at row {details.y_index}, band shift chi = {details.chi:g}")
    for msg in report.messages:
        print(f"note: {msg}")
    if not report.ok:
        print("validation FAILED", file=sys.stderr)
        return 3
    print("validation passed" + ("" if report.theory_backed
                                 else " (outside the theory-backed regime)"))
    return 0


def _print_report(report: diagnostics.DiagnosticsReport) -> None:
    print(report.format())


def cmd_run(args) -> int:
    cfg = _load(args)
    prob, init, eta, _ = cfg.build()
    out = Path(args.out) if args.out else None
    scales = cfg.scales if cfg.mode == "dimensional" else None
    print(f"fingerprint: {cfg.fingerprint}")
    print(f"eta = {eta:.17g}")

    sink = None
    if out is not None and cfg.checkpoint_every:
        def sink(payload):
            snapshots.save_checkpoint(out / f"checkpoint_{payload.step:06d}.npz",
                                      payload, cfg.fingerprint)

    resume = None
    if args.resume:
        resume = snapshots.load_checkpoint(args.resume,
                                           expect_fingerprint=cfg.fingerprint)
        check = diagnostics.verify_resume(resume, prob.sigma_grid,
                                          prob.space_grid.dt, init.p0,
                                          prob.dp.alpha, cfg.c_comparison)
        _print_report(check)
        check.raise_if_failed()
        print(f"resuming at step {resume.step} "
              f"(t = {prob.space_grid.time(resume.step):g})")

    use_maxwell = cfg.fully_relaxing and not args.force_general
    t_start = time.perf_counter()
    if use_maxwell:
        print(f"integrating {prob.space_grid.n_steps} steps (relaxation closed form)")
        result = coupler.run_maxwell(
            prob, tau0=np.asarray(compute_tau(init.p0, prob.sigma_grid)),
            u0=init.u0, snap_every=cfg.snapshot_every)
    else:
        print(f"integrating {prob.space_grid.n_steps} steps (kinetic path)")
        try:
            result = coupler.run(prob, init, eta,
                                 snap_every=cfg.snapshot_every,
                                 checkpoint_every=cfg.checkpoint_every,
                                 checkpoint_sink=sink, resume=resume)
        except HlCouetteError as exc:
            payload = getattr(exc, "payload", None)
            if payload is not None and out is not None:
                dump = out / "failure_dump.npz"
                snapshots.save_checkpoint(dump, payload, cfg.fingerprint)
                print(f"state dumped to {dump}", file=sys.stderr)
            raise
    elapsed = time.perf_counter() - t_start
    print(f"done in {elapsed:.2f} s; max fixed-point iterations = "
          f"{int(result.picard_iters.max()) if result.picard_iters.size else 0}")
    for msg in result.warnings:
        print(f"warning: {msg}")

    report = None
    if not args.skip_checks:
        report = diagnostics.evaluate(result, c_comp=cfg.c_comparison,
                                      c_mom=cfg.c_moment)
        _print_report(report)

    if out is not None:
        written = snapshots.write_snapshots(out, result, cfg.fingerprint,
                                            scales=scales,
                                            dump_density=args.dump_density)
        snapshots.write_series(out / "series.npz", result, cfg.fingerprint)
        if result.kind == "general":
            final = coupler.ResumePayload(
                step=result.state.step, u=result.state.u, p=result.state.p,
                accum=result.accum,
                series={"tau": result.tau_series, "u": result.u_series,
                        "b": result.b_series, "trunc": result.trunc_series,
                        "inner": result.inner_series,
                        "mass_err": result.mass_err_series,
                        "min_d": result.min_d_series,
                        "max_p": result.max_p_series,
                        "iters": result.picard_iters,
                        "ratios": result.picard_ratios,
                        "warnings": result.warnings})
            snapshots.save_checkpoint(out / "checkpoint_final.npz", final,
                                      cfg.fingerprint)
        ratios = result.picard_ratios
        finite = ratios[np.isfinite(ratios)]
        summary = {
            "fingerprint": cfg.fingerprint,
            "kind": result.kind,
            "mode": cfg.mode,
            "eta": eta,
            "params": {"rho": prob.dp.rho, "alpha": prob.dp.alpha,
                       "g0": prob.dp.g0, "mu": prob.dp.mu},
            "grid": {"n_y": prob.space_grid.n_y,
                     "n_sigma": prob.sigma_grid.n_sigma,
                     "sigma_max": prob.sigma_grid.sigma_max,
                     "threshold": prob.sigma_grid.threshold},
            "run": {"dt": prob.space_grid.dt, "t_final": prob.space_grid.t_final,
                    "n_steps": prob.space_grid.n_steps,
                    "snapshot_every": cfg.snapshot_every},
            "protocol": {"kind": prob.protocol.kind, **prob.protocol.spec},
            "picard": {"max_iterations": int(result.picard_iters.max())
                       if result.picard_iters.size else 0,
                       "max_ratio": float(finite.max()) if finite.size else None},
            "warnings": result.warnings,
            "diagnostics": [vars(r).copy() for r in report.results] if report else [],
        }
        snapshots.write_summary(out / "summary.json", summary)
        print(f"wrote {len(written)} snapshot file(s) and series to {out}")

    if report is not None:
        report.raise_if_failed()
    return 0


def cmd_hl_run(args) -> int:
    cfg = _load(args)
    if cfg.mode != "dimensionless":
        raise ConfigError("hl-run works in scaled units; set model.mode = dimensionless")
    grid = cfg.sigma_grid()
    tgrid = cfg.space_grid()
    init = cfg.initial()
    alpha = cfg.values["model"]["alpha"]
    loading = cfg.protocol()  # interpreted directly as the loading b(t)
    print(f"fingerprint: {cfg.fingerprint}")
    traj = hl_solve(init.p0[0], loading, grid, alpha,
                    dt=tgrid.dt, t_final=tgrid.t_final, record_p=False)
    print(f"t = {traj.times[-1]:g}: tau = {traj.tau[-1]:.10g}, "
          f"D = {traj.d[-1]:.10g}, mass = {traj.mass[-1]:.12g}, "
          f"max p = {traj.max_density:.6g}")
    if args.out:
        out = Path(args.out)
        snapshots.write_fields_csv(
            out / "point_series.csv", tgrid.t_final, traj.times,
            {"tau": traj.tau, "d": traj.d, "mass": traj.mass},
            cfg.fingerprint, index_name="t")
        snapshots.write_fields_csv(
            out / "point_density.csv", tgrid.t_final, grid.centers,
            {"p": traj.p_final}, cfg.fingerprint, index_name="sigma")
        print(f"wrote point series and final density to {out}")
    return 0


def cmd_oracle(args) -> int:
    cfg = _load(args)
    if not cfg.fully_relaxing:
        raise ConfigError("the closed form applies to fully relaxing runs; "
                          "set model.fully_relaxing = true")
    grid = cfg.sigma_grid()
    init = cfg.initial()
    alpha = cfg.values["model"]["alpha"]
    loading = cfg.protocol()
    t = args.t
    if t < 0:
        raise ConfigError("--t must be nonnegative")
    p0 = init.p0[0]
    tau0 = float(compute_tau(p0, grid))
    p_t = maxwell_p(p0, loading, t, grid, alpha)
    tau_t = maxwell_tau(tau0, loading, t)
    mass = float(grid.mass(p_t))
    print(f"fingerprint: {cfg.fingerprint}")
    print(f"t = {t:.17g}")
    print(f"tau = {tau_t:.17g}")
    print(f"density mass = {mass:.17g}")
    print(f"density first moment = {float(grid.first_moment(p_t)):.17g}")
    if args.out:
        snapshots.write_fields_csv(Path(args.out), t, grid.centers,
                                   {"p": p_t}, cfg.fingerprint,
                                   index_name="sigma")
        print(f"wrote density to {args.out}")
    return 0


def cmd_diagnose(args) -> int:
    cfg = _load(args)
    prob, init, eta, _ = cfg.build()
    payload = snapshots.load_checkpoint(args.checkpoint,
                                        expect_fingerprint=cfg.fingerprint
                                        if not args.any_config else None)
    result = diagnostics.result_from_checkpoint(prob, init, eta, payload)
    print(f"fingerprint: {cfg.fingerprint}")
    print(f"checkpoint step {payload.step} "
          f"(t = {prob.space_grid.time(payload.step):g})")
    report = diagnostics.evaluate(result, c_comp=cfg.c_comparison,
                                  c_mom=cfg.c_moment)
    _print_report(report)
    report.raise_if_failed()
    return 0


def cmd_nondim(args) -> int:
    if args.invert:
        dp = DimensionlessParams(rho=args.rho, alpha=args.alpha, g0=args.g0,
                                 mu=args.mu, t0=args.t0, sigma_c=args.sigma_c,
                                 length=args.length)
        phys = redimensionalize(dp)
        for name in ("rho", "mu", "g0", "alpha"):
            print(f"{name} = {getattr(phys, name):.17g}")
    else:
        phys = PhysicalParams(rho=args.rho, mu=args.mu, g0=args.g0,
                              alpha=args.alpha, t0=args.t0,
                              sigma_c=args.sigma_c, length=args.length)
        dp = nondimensionalize(phys)
        for name in ("rho", "alpha", "g0", "mu"):
            print(f"{name} = {getattr(dp, name):.17g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hlcouette",
        description="Coupled stress-kinetics / Couette-flow simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a config and its initial data")
    _add_config_args(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="integrate the coupled gap problem")
    _add_config_args(p)
    p.add_argument("--out", help="directory for snapshots, series, checkpoints")
    p.add_argument("--resume", help="continue from a checkpoint file")
    p.add_argument("--dump-density", action="store_true",
                   help="also write density matrices at snapshot times")
    p.add_argument("--force-general", action="store_true",
                   help="use the kinetic path even for fully relaxing runs")
    p.add_argument("--skip-checks", action="store_true",
                   help="skip the post-run diagnostic battery")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("hl-run", help="single stress ensemble under a loading")
    _add_config_args(p)
    p.add_argument("--out", help="directory for the point series CSVs")
    p.set_defaults(func=cmd_hl_run)

    p = sub.add_parser("oracle", help="closed-form fully relaxing solution")
    _add_config_args(p)
    p.add_argument("--t", type=float, required=True, help="evaluation time")
    p.add_argument("--out", help="CSV file for the density")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("diagnose", help="run all checks on a checkpoint")
    _add_config_args(p)
    p.add_argument("--checkpoint", required=True, help="checkpoint file to inspect")
    p.add_argument("--any-config", action="store_true",
                   help="skip the fingerprint match (inspecting foreign artifacts)")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("nondim", help="convert parameters between unit systems")
    for name, req in (("rho", True), ("mu", True), ("g0", True), ("alpha", True),
                      ("t0", True), ("sigma-c", True), ("length", True)):
        p.add_argument(f"--{name}", type=float, required=req,
                       dest=name.replace("-", "_"))
    p.add_argument("--invert", action="store_true",
                   help="treat inputs as scaled values and recover physical ones")
    p.set_defaults(func=cmd_nondim)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except HlCouetteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
