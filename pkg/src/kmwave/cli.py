"""Command-line front end: ``kmwave <command> [--config FILE] [--out DIR] ...``.

Commands
--------
``r0``            R0, eps_sup and the Floquet exponent at the disease-free state
``cstar``         critical speed and the dispersion curve ``c(mu)``
``simulate``      PDE run: snapshots, front track, speed estimate, manifest
``verify-proof``  assemble the lower-solution gadget at ``c_fraction * c*``
``sweep``         c* (and optionally the measured speed) over a parameter grid

Every command prints a JSON summary on stdout and writes its files under the
output directory (``--out``, else ``$KMWAVE_OUT``, else the config's
``output``).  On failure a JSON error object goes to stderr and the exit code
is 2 (configuration), 3 (non-convergence), 4 (precondition) or 5 (domain
exhausted).
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, default_config, load_config, sweep_values, validate, with_parameter
from .errors import ArgumentError, ConfigError, GadgetInfeasibleError, KMWaveError, PreconditionError
from .io import params_digest, params_to_dict, save_checkpoint, to_json, write_csv, write_json

ENV_OUT = "KMWAVE_OUT"

# CSV schemas (header rows), one per artifact.
CSV_DISPERSION = ("mu", "c_of_mu")
CSV_SNAPSHOT = ("x", "S", "I")
CSV_FRONT = ("t", "x_front")
CSV_SWEEP = ("parameter", "value", "R0", "c_star", "mu_star", "measured_speed")
CSV_SUBSOLUTION = ("n_t", "n_z", "max_residual", "majorant_error", "exact_error")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_r0(cfg: ExperimentConfig, out: Path):
    from .threshold import epsilon_sup, threshold_report

    p, npd = cfg.params, cfg.n_per_delay
    rep = threshold_report(p, 0.0, n_per_delay=npd)
    eps_sup = epsilon_sup(p, n_per_delay=npd) if rep.R0_eps > 1 else None
    summary = {"command": "r0", "R0": rep.R0_eps, "eps_sup": eps_sup,
               "lambda0": rep.exponent, "autonomous": p.autonomous}
    write_json(out / "r0.json", summary)
    return summary


def _critical(cfg, executor=None):
    from .wavespeed import critical_speed
    return critical_speed(cfg.params, mu_range=cfg.mu_range, n_grid=cfg.n_grid,
                          n_per_delay=cfg.n_per_delay, executor=executor)


def cmd_cstar(cfg: ExperimentConfig, out: Path):
    cs = _critical(cfg)
    write_csv(out / "dispersion.csv", CSV_DISPERSION, zip(cs.mus, cs.cs))
    summary = {"command": "cstar", "c_star": cs.c_star, "mu_star": cs.mu_star,
               "Lambda_at_star": cs.Lambda_at_star, "unimodal": cs.unimodal,
               "curve": "dispersion.csv"}
    write_json(out / "cstar.json", summary)
    return summary


def cmd_simulate(cfg: ExperimentConfig, out: Path, *, checkpoint=True):
    from .pde import front_position, periodic_wave_residual, simulate, spreading_speed

    p = cfg.params
    started = time.time()
    snaps = simulate(p, cfg.domain, cfg.seed, cfg.horizon, cfg.sample_every, dt=cfg.dt,
                     threshold=cfg.threshold)
    elapsed = time.time() - started
    state = snaps.meta.pop("state")
    ratio = round(cfg.snapshot_every / cfg.sample_every)
    written = []
    for k in range(0, len(snaps), ratio):
        name = f"snapshot_{k // ratio:05d}.csv"
        write_csv(out / "snapshots" / name, CSV_SNAPSHOT,
                  zip(snaps.x, snaps.S[k], snaps.I[k]))
        written.append({"file": f"snapshots/{name}", "t": float(snaps.times[k])})
    fronts = [front_position(snaps.x, I, cfg.threshold) for I in snaps.I]
    write_csv(out / "front.csv", CSV_FRONT, zip(snaps.times, fronts))
    speed = None
    try:
        est = spreading_speed(snaps, cfg.threshold)
        speed = {"speed": est.speed, "window": est.window, "fit_residual": est.fit_residual,
                 "reliable": est.reliable}
        speed["periodic_wave_residual"] = periodic_wave_residual(snaps, est.speed, p)
    except (KMWaveError, ArgumentError) as exc:
        speed = {"error": type(exc).__name__, "message": str(exc)}
    if checkpoint:
        save_checkpoint(out / "final.ckpt", state, p)
    summary = {"command": "simulate", "speed": speed, "S_inf": snaps.S_inf,
               "snapshots": len(written), "front": "front.csv"}
    manifest = {
        **summary,
        "params": params_to_dict(p), "params_sha256": params_digest(p),
        "grid": {"x_min": cfg.domain[0], "x_max": cfg.domain[1], "dx": cfg.domain[2],
                 "dt": cfg.dt, "nodes": int(snaps.x.size)},
        "seed": {"center": cfg.seed.center, "width": cfg.seed.width,
                 "amplitude": cfg.seed.amplitude},
        "run": {"horizon": cfg.horizon, "sample_every": cfg.sample_every,
                "snapshot_every": cfg.snapshot_every, "threshold": cfg.threshold},
        "snapshot_files": written,
        "checkpoint": "final.ckpt" if checkpoint else None,
        "timing": {"wall_seconds": elapsed,
                   "finished": datetime.now(timezone.utc).isoformat(timespec="seconds")},
        "software": {"kmwave": __version__, "python": platform.python_version(),
                     "numpy": np.__version__},
    }
    write_json(out / "manifest.json", manifest)
    return summary


def cmd_verify_proof(cfg: ExperimentConfig, out: Path, c_fraction=None, *,
                     enforce_attractor_bound=True):
    from .wavespeed import attractor_residual, proof_gadgets, subsolution_residual

    frac = cfg.c_fraction if c_fraction is None else c_fraction
    if not 0 < frac < 1:
        raise ArgumentError("c-fraction must lie in (0, 1)")
    cs = _critical(cfg)
    c = frac * cs.c_star
    try:
        g = proof_gadgets(cfg.params, c, cfg.varrho, c_star=cs.c_star, variant=cfg.variant,
                          enforce_attractor_bound=enforce_attractor_bound,
                          n_per_delay=cfg.n_per_delay)
    except GadgetInfeasibleError as exc:
        write_json(out / "proof.json", {"command": "verify-proof", "assembled": False,
                                        "c_fraction": frac, "reason": str(exc),
                                        "report": exc.report})
        raise
    inv = g.invariants()
    n_t, n_z = cfg.proof_grid
    rows, reports = [], []
    for k in range(3):
        rep = subsolution_residual(g, (n_t * 2 ** k, n_z * 2 ** k),
                                   require_attractor_bound=enforce_attractor_bound)
        reports.append(rep)
        rows.append((rep.grid[0], rep.grid[1], rep.max_residual, rep.majorant_error,
                     rep.exact_error))
    write_csv(out / "subsolution.csv", CSV_SUBSOLUTION, rows)
    orders = [float(np.log2(a.exact_error / b.exact_error)) for a, b in zip(reports, reports[1:])]
    att = attractor_residual(cfg.params, g.attractor, g.eps_star)
    if not enforce_attractor_bound:
        # Diagnostic mode: the bound is reported in the gadget record only.
        inv = {k: v for k, v in inv.items() if k != "attractor_below_bound"}
    checks = {
        **inv,
        "residual_nonpositive": reports[-1].max_residual <= 1e-6,
        "second_order_match": min(orders) >= 1.9,
        "attractor_residual_small": att.residual <= 1e-6,
    }
    summary = {"command": "verify-proof", "assembled": True, "c_fraction": frac,
               "attractor_bound_enforced": enforce_attractor_bound,
               "gadget": g.to_dict(), "subsolution": [dict(zip(CSV_SUBSOLUTION, r)) for r in rows],
               "observed_order": orders, "attractor_residual": att.residual,
               "checks": checks, "passed": all(checks.values())}
    write_json(out / "proof.json", summary)
    if not summary["passed"]:
        failed = [k for k, v in checks.items() if not v]
        raise PreconditionError(f"gadget checks failed: {failed}")
    return summary


def _sweep_point(args):
    cfg_raw, name, value = args
    from .pde import simulate, spreading_speed
    from .threshold import compute_R0_eps
    from .wavespeed import critical_speed

    cfg = validate(cfg_raw)
    p = with_parameter(cfg.params, name, value)
    r0 = compute_R0_eps(p, n_per_delay=cfg.n_per_delay)
    if r0 <= 1:
        return (name, value, r0, None, None, None)
    cs = critical_speed(p, mu_range=cfg.mu_range, n_grid=cfg.n_grid, n_per_delay=cfg.n_per_delay)
    measured = None
    if cfg.measure_speed:
        snaps = simulate(p, cfg.domain, cfg.seed, cfg.horizon, cfg.sample_every, dt=cfg.dt,
                         threshold=cfg.threshold)
        measured = spreading_speed(snaps, cfg.threshold).speed
    return (name, value, r0, cs.c_star, cs.mu_star, measured)


def cmd_sweep(cfg: ExperimentConfig, out: Path, workers=1):
    values = sweep_values(cfg)
    jobs = [(cfg.raw, cfg.sweep_parameter, v) for v in values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    write_csv(out / "sweep.csv", CSV_SWEEP, rows)
    summary = {"command": "sweep", "parameter": cfg.sweep_parameter, "rows": len(rows),
               "table": "sweep.csv",
               "c_star": [r[3] for r in rows]}
    write_json(out / "sweep.json", summary)
    return summary


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def _parse_range(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected LO,HI,COUNT")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad range {text!r}") from exc
    return lo, hi, n


def build_parser():
    parser = argparse.ArgumentParser(prog="kmwave", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment file (default settings if omitted)")
    common.add_argument("--out", type=Path, help=f"output directory (default: ${ENV_OUT} or config)")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("r0", parents=[common], help="reproduction number and eps_sup")
    sub.add_parser("cstar", parents=[common], help="critical wave speed")
    sim = sub.add_parser("simulate", parents=[common], help="run the PDE simulation")
    sim.add_argument("--no-checkpoint", action="store_true", help="skip the final checkpoint")
    vp = sub.add_parser("verify-proof", parents=[common], help="check the lower-solution gadget")
    vp.add_argument("--c-fraction", type=float, help="speed as a fraction of c* (default 0.5)")
    vp.add_argument("--no-attractor-bound", action="store_true",
                    help="do not require max u < A - 1 (diagnostic mode)")
    sw = sub.add_parser("sweep", parents=[common], help="c* over a parameter grid")
    sw.add_argument("--workers", type=int, default=1, help="worker processes")
    sw.add_argument("--amplitude-range", type=_parse_range, metavar="LO,HI,COUNT",
                    help="sweep the seasonal amplitude of beta")
    return parser


def _load(args):
    if args.config is None:
        return validate(default_config()), default_config()
    cfg = load_config(args.config)
    return cfg, cfg.raw


def _output_dir(args, cfg):
    out = args.out or os.environ.get(ENV_OUT) or cfg.output
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _error_payload(exc):
    code = getattr(exc, "exit_code", 1)
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, ConfigError):
        payload["kind"] = exc.kind
    return payload, code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, raw = _load(args)
        if args.command == "sweep" and args.amplitude_range is not None:
            lo, hi, n = args.amplitude_range
            raw = dict(raw, sweep={**raw.get("sweep", {}), "parameter": "amplitude",
                                   "range": [lo, hi], "count": n})
            cfg = validate(raw)
        out = _output_dir(args, cfg)
        if args.command == "r0":
            summary = cmd_r0(cfg, out)
        elif args.command == "cstar":
            summary = cmd_cstar(cfg, out)
        elif args.command == "simulate":
            summary = cmd_simulate(cfg, out, checkpoint=not args.no_checkpoint)
        elif args.command == "verify-proof":
            summary = cmd_verify_proof(cfg, out, args.c_fraction,
                                       enforce_attractor_bound=not args.no_attractor_bound)
        else:
            if args.workers < 1:
                raise ConfigError("range", "--workers must be at least 1")
            summary = cmd_sweep(cfg, out, args.workers)
    except (KMWaveError, ArgumentError) as exc:
        payload, code = _error_payload(exc)
        print(json.dumps(payload, sort_keys=True, default=str), file=sys.stderr)
        return code
    print(to_json(summary))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
