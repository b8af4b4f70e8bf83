"""Command-line entry point.

Exit codes: 0 ok, 2 bad configuration or input, 3 numerical blow-up
(artifacts are still written), 4 invariant violation or failed verification.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import yaml

from . import __version__
from .config import RunConfig, parse_config, taylor_green_exact
from .diagnostics import EnergyBalance, bochner_seminorm, data_seminorm, make_record
from .errors import ConfigError, InvariantViolation, SnapshotError
from .integrator import SimulationState, run
from .radial import SelfSimProblem, refinement_table, selfsim_ode_integrate, shoot_farfield
from .snapshot import read_snapshot, write_snapshot
from .spectral_core import l2_norm, max_abs, sobolev_norm
from .verify import run_suites

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_INVARIANT = 0, 2, 3, 4
OUT_ENV = "ERSATZNS_OUT"
CSV_VERSION = 1



def _out_dir(args, command: str, configured: Optional[str] = None) -> Path:
    if args.out:
        return Path(args.out)
    if configured:
        return Path(configured)
    return Path(os.environ.get(OUT_ENV, "ersatzns-out")) / command


def _write_csv(path: Path, kind: str, meta: dict[str, Any], header: Sequence[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# ersatzns {kind} v{CSV_VERSION}\n")
        for k, v in meta.items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


# --- simulate / resume ---------------------------------------------------------


def _snapshot_name(step: int) -> str:
    return f"snap_{step:08d}.tfld"


def _absolute_paths(rc: RunConfig, base: Path) -> RunConfig:
    fixes = {}
    for section in ("initial", "forcing"):
        p = rc.raw[section].get("path")
        if rc.raw[section]["kind"] == "snapshot" and p and not Path(p).is_absolute():
            fixes[section] = {"path": str((base / p).resolve())}
    return rc.with_overrides(**fixes) if fixes else rc


def execute(rc: RunConfig, out: Path, start: Optional[SimulationState] = None) -> int:
    """Run the torus solver for ``rc`` and write all artifacts under ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(rc.dump())
    spec, sim, grid = rc.nonlinearity, rc.sim, rc.grid
    forcing = rc.build_forcing()
    u0 = None if start is not None else rc.build_initial()
    balance = EnergyBalance(spec, sim.mu, forcing, sim.dealias)
    s_list = rc.sobolev_s
    rows = []
    snap_every = rc.snapshot_every

    def sink(state: SimulationState):
        rec = make_record(state.t, state.u, spec, s_list, balance, sim.dealias)
        rows.append(
            [rec.t, rec.l2_norm, rec.h1_norm, *rec.h_s_norms, rec.grad_norm, rec.divergence_max,
             rec.energy_residual, rec.exp_energy, rec.exp_overflow, rec.trilinear_value]
        )
        if snap_every and state.step_index % snap_every == 0:
            write_snapshot(out / "snapshots" / _snapshot_name(state.step_index), state.u, state.t)

    meta = {
        "n": grid.n, "N": grid.N, "ell": repr(grid.ell), "mu": repr(sim.mu), "a": sim.a,
        "scheme": sim.scheme, "dt": repr(sim.dt), "nonlinearity": json.dumps(spec.to_dict()),
        "exp_energy": "log value when exp_overflow=1",
    }
    header = ["t", "l2", "h1", *[f"hs_{s:g}" for s in s_list], "grad_l2", "div_max",
              "energy_residual", "exp_energy", "exp_overflow", "trilinear"]
    code = EXIT_OK
    try:
        summary = run(sim, spec, forcing, u0=u0, sink=sink, start=start)
    except InvariantViolation as exc:
        _write_csv(out / "diagnostics.csv", "diagnostics", meta, header, [[_fmt(x) for x in r] for r in rows])
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    _write_csv(out / "diagnostics.csv", "diagnostics", meta, header, [[_fmt(x) for x in r] for r in rows])
    final = summary.final
    write_snapshot(out / "final.tfld", final.u, final.t)
    info = {
        "version": __version__,
        "t_final": final.t,
        "steps": summary.steps,
        "blowup": summary.blowup,
        "blowup_time": summary.blowup_time,
        "peak_l2": summary.peak_l2,
        "peak_linf": summary.peak_linf,
        "final_l2": l2_norm(final.u),
        "projection_correction": summary.projection_correction,
        "energy_relative_defect": balance.relative_defect,
        "message": summary.message,
    }
    tg = _taylor_green_error(rc, final)
    if tg is not None:
        info["taylor_green_sup_error"] = tg
        print(f"taylor-green sup error at t={final.t:.6g}: {tg:.3e}")
    (out / "summary.json").write_text(json.dumps(info, indent=2))
    if summary.blowup:
        print(f"blow-up detected near t={summary.blowup_time:.6g}; last finite state at t={final.t:.6g} saved to {out / 'final.tfld'}")
        code = EXIT_BLOWUP
    else:
        print(f"finished t={final.t:.6g} after {summary.steps} steps; final L2 {info['final_l2']:.6e}; output in {out}")
    return code


def _taylor_green_error(rc: RunConfig, final: SimulationState) -> Optional[float]:
    if rc.initial["kind"] != "taylor_green" or rc.forcing["kind"] != "zero" or rc.sim.a != 1:
        return None
    if rc.nonlinearity.kind == "custom":
        return None
    exact = taylor_green_exact(rc.grid, rc.initial["amplitude"], rc.sim.mu, final.t)
    return max_abs(final.u - exact)


def _load_run_config(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required")
    rc = parse_config(args.config)
    rc = _absolute_paths(rc, Path(args.config).resolve().parent)
    if args.seed is not None:
        rc = rc.with_overrides(initial={"seed": args.seed})
    return rc


def cmd_simulate(args) -> int:
    rc = _load_run_config(args)
    return execute(rc, _out_dir(args, "simulate", rc.output_dir))


def _latest_snapshot(run_dir: Path) -> Path:
    snaps = sorted((run_dir / "snapshots").glob("snap_*.tfld"))
    if not snaps:
        raise ConfigError(f"no snapshots under {run_dir / 'snapshots'}")
    return snaps[-1]


def cmd_resume(args) -> int:
    run_dir = Path(args.run)
    cfg_path = Path(args.config) if args.config else run_dir / "config.yaml"
    rc = _absolute_paths(parse_config(cfg_path), cfg_path.resolve().parent)
    if args.T is not None:
        rc = rc.with_overrides(sim={"T": args.T})
    snap = Path(args.snapshot) if args.snapshot else _latest_snapshot(run_dir)
    u, t = read_snapshot(snap)
    if (u.grid.n, u.grid.N, u.grid.ell) != (rc.grid.n, rc.grid.N, rc.grid.ell):
        raise ConfigError(f"snapshot {snap} does not match the configured grid")
    k = int(round(t / rc.sim.dt))
    if abs(k * rc.sim.dt - t) > 1e-9 * max(1.0, t):
        raise ConfigError(f"snapshot time {t} is not on the time grid of dt={rc.sim.dt}")
    if k > rc.sim.nsteps:
        raise ConfigError(f"snapshot time {t} lies beyond T={rc.sim.T}")
    print(f"resuming from {snap} at t={t:.6g} (step {k})")
    return execute(rc, _out_dir(args, "resume"), start=SimulationState(t, u, None, k))


# --- norms ---------------------------------------------------------------------


def cmd_norms(args) -> int:
    run_dir = Path(args.run)
    snaps = sorted((run_dir / "snapshots").glob("*.tfld"))
    if not snaps:
        raise ConfigError(f"no snapshots under {run_dir / 'snapshots'}")
    cfg = run_dir / "config.yaml"
    rc = parse_config(cfg) if cfg.exists() else None
    mu = args.mu if args.mu is not None else (rc.sim.mu if rc else None)
    if mu is None:
        raise ConfigError("viscosity unknown: pass --mu or keep config.yaml next to the snapshots")
    loaded = sorted((read_snapshot(p)[::-1] for p in snaps), key=lambda tu: tu[0])
    times = [t for t, _ in loaded]
    fields = [u for _, u in loaded]
    s_list = args.s or [1.0, 2.0]
    rows = [[repr(t), repr(l2_norm(u)), *[repr(sobolev_norm(u, s)) for s in s_list]] for t, u in loaded]
    out = _out_dir(args, "norms", str(run_dir))
    _write_csv(out / "norms.csv", "norms", {"mu": repr(mu), "source": str(run_dir)}, ["t", "l2", *[f"hs_{s:g}" for s in s_list]], rows)
    seminorms, ratios = {}, {}
    if len(times) >= 2:
        forcing = rc.build_forcing() if rc else None
        f_fields = [forcing(t) for t in times] if forcing else None
        for i in range(args.max_order + 1):
            seminorms[i] = bochner_seminorm(times, fields, i, mu)
            print(f"bochner seminorm ||u||_{{{i},mu,T}} = {seminorms[i]:.6e}")
            # empirical constant of the a-priori estimate ||u|| <= c ||(f, u0)||
            data = data_seminorm(times, f_fields, fields[0], i, mu)
            if data > 0:
                ratios[i] = seminorms[i] / data
                print(f"  ratio to data norm ||(f,u0)||_{{{i},mu,T}}: {ratios[i]:.6e}")
    info = {"mu": mu, "times": times, "bochner": seminorms, "estimate_ratio": ratios}
    (out / "norms.json").write_text(json.dumps(info, indent=2))
    return EXIT_OK


# --- self-similar studies ---------------------------------------------------------

SELFSIM_KEYS = {"n", "gamma", "kappa", "kappa_bracket", "multiplier", "y_max", "samples", "t_blow", "h"}


def _selfsim_params(args) -> dict[str, Any]:
    params: dict[str, Any] = {}
    if args.config:
        data = yaml.safe_load(Path(args.config).read_text()) or {}
        if not isinstance(data, dict):
            raise ConfigError("self-similar config must be a mapping")
        unknown = sorted(set(data) - SELFSIM_KEYS)
        if unknown:
            raise ConfigError([f"unknown key {k}" for k in unknown])
        params.update(data)
    for key in SELFSIM_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    return params


def cmd_selfsim(args) -> int:
    p = _selfsim_params(args)
    missing = [k for k in ("n", "gamma", "kappa") if k not in p]
    if missing:
        raise ConfigError([f"{k} is required" for k in missing])
    prob = SelfSimProblem(int(p["n"]), float(p["kappa"]), float(p["gamma"]), int(p.get("multiplier", 2)), float(p.get("y_max", 4.0)))
    sol = selfsim_ode_integrate(prob)
    out = _out_dir(args, "selfsim")
    meta = {"n": prob.n, "kappa": repr(prob.kappa), "gamma": repr(prob.gamma), "multiplier": prob.multiplier, "y_max": repr(prob.y_max)}
    _write_csv(out / "profile.csv", "selfsim-profile", meta, ["y", "w", "dw"],
               [[repr(float(a)), repr(float(b)), repr(float(c))] for a, b, c in zip(sol.y, sol.w, sol.wp)])
    if sol.blowup:
        print(f"w blows up at y={sol.y_end:.6g} < y_max={prob.y_max}")
    else:
        print(f"integrated to y={sol.y_end:.6g}; w(y_max)={sol.w[-1]:.6e}, y^2 w - 1 = {sol.y_end**2 * sol.w[-1] - 1:.3e}")
    if prob.gamma > 0 and not sol.blowup:
        hs = p.get("h") or [0.02, 0.01, 0.005]
        rows = refinement_table(prob, float(p.get("t_blow", 1.0)), [float(h) for h in hs])
        _write_csv(out / "refinement.csv", "selfsim-refinement", {**meta, "t_blow": p.get("t_blow", 1.0)}, ["h", "residual", "order"],
                   [[repr(h), repr(r), repr(o)] for h, r, o in rows])
        for h, r, o in rows:
            print(f"h={h:.3g} residual={r:.3e} order={o:.3f}")
    return EXIT_OK


def cmd_shoot(args) -> int:
    p = _selfsim_params(args)
    missing = [k for k in ("n", "gamma", "kappa_bracket") if k not in p]
    if missing:
        raise ConfigError([f"{k} is required" for k in missing])
    lo, hi = (float(x) for x in p["kappa_bracket"])
    res = shoot_farfield(int(p["n"]), float(p["gamma"]), int(p.get("multiplier", 2)), (lo, hi),
                         float(p.get("y_max", 4.0)), int(p.get("samples", 16)), workers=args.threads or 1)
    out = _out_dir(args, "shoot")
    meta = {"n": res.n, "gamma": repr(res.gamma), "multiplier": res.multiplier, "y_max": repr(res.y_max)}
    _write_csv(out / "shoot_log.csv", "shoot-log", meta, ["kappa", "mismatch", "blowup"],
               [[repr(k), repr(m), int(b)] for k, m, b in res.scan])
    info = {k: getattr(res, k) for k in ("n", "gamma", "multiplier", "y_max", "found", "kappa", "residual", "log_derivative", "message")}
    (out / "shoot.json").write_text(json.dumps(info, indent=2))
    print(res.message)
    return EXIT_OK


# --- verify ---------------------------------------------------------------------------


def cmd_verify(args) -> int:
    results = run_suites(args.suite or None)
    lines = [r.line() for r in results]
    for line in lines:
        print(line)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify.txt").write_text("\n".join(lines) + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT


# --- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<command>)")
    common.add_argument("--seed", type=int, help="override the random initial-data seed")
    common.add_argument("--threads", type=int, default=1, help="worker processes for parameter sweeps")
    common.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="ersatzns", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", parents=[common], help="run the torus solver")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("resume", parents=[common], help="continue a run from a snapshot")
    sp.add_argument("--run", required=True, help="directory of the run to continue")
    sp.add_argument("--snapshot", help="snapshot to start from (default: latest in the run)")
    sp.add_argument("--T", type=float, help="new final time")
    sp.set_defaults(func=cmd_resume)

    sp = sub.add_parser("norms", parents=[common], help="norms of stored snapshots")
    sp.add_argument("--run", required=True)
    sp.add_argument("--mu", type=float)
    sp.add_argument("--s", type=float, nargs="+", help="Sobolev orders")
    sp.add_argument("--max-order", type=int, default=1, dest="max_order")
    sp.set_defaults(func=cmd_norms)

    for name, func in (("selfsim", cmd_selfsim), ("shoot", cmd_shoot)):
        sp = sub.add_parser(name, parents=[common], help=f"self-similar profile ({name})")
        sp.add_argument("--n", type=int)
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--multiplier", type=int, choices=(1, 2))
        sp.add_argument("--ymax", type=float, dest="y_max")
        if name == "selfsim":
            sp.add_argument("--kappa", type=float)
            sp.add_argument("--t-blow", type=float, dest="t_blow")
            sp.add_argument("--h", type=float, nargs="+")
        else:
            sp.add_argument("--kappa-bracket", type=float, nargs=2, dest="kappa_bracket", metavar=("LO", "HI"))
            sp.add_argument("--samples", type=int)
        sp.set_defaults(func=func)

    sp = sub.add_parser("verify", parents=[common], help="run the built-in identity suites")
    sp.add_argument("--suite", action="append", help="run only this suite (repeatable)")
    sp.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except SnapshotError as exc:
        print(f"snapshot error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
