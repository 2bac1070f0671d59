"""Command line driver: one scenario per invocation, driven by a TOML file.

    nlwave check-wellposed    --config run.toml --out out/
    nlwave solve-linear       --config run.toml --out out/
    nlwave solve              --config run.toml --out out/ --seed 3
    nlwave energy-report      --traj out/
    nlwave convergence-study  --config run.toml --out out/

Every run directory receives ``manifest.json`` (also on failure) with the
resolved config, status, exit code and key metrics.  CSV files are written
with ``repr`` floats so equal runs give byte-identical files.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import traceback
from importlib import metadata
from pathlib import Path

import numpy as np

from . import spectral
from .config import ScenarioConfig, from_dict, parse_config
from .energy import check_lemma42_regularity, energy_drift_monitor, write_energy_csv
from .errors import ConfigError, IOFailure, NlwaveError
from .kernels import check_admissible, check_decay_class
from .linear import Trajectory, check_wellposed, multipoint_residuals, solve_linear
from .nonlinear import continue_solution, equation_residual

log = logging.getLogger("nlwave")

COMMANDS = ("check-wellposed", "solve-linear", "solve", "energy-report", "convergence-study")
EXIT_BLOWUP = 4
NORM_COLUMNS = ("t", "u_l2", "u_linf", "u_hs", "ut_l2", "ut_linf", "ut_hs")


def _version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, float) and not np.isfinite(v):
        return repr(v)
    return v


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) if not isinstance(v, (int, str)) or isinstance(v, bool)
                              else str(v) for v in row))
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def write_json(path, obj):
    try:
        Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def _norm_rows(traj: Trajectory, s: float, p: float):
    table = traj.norm_table(s, p)
    return list(zip(*(np.asarray(table[c]).tolist() for c in NORM_COLUMNS)))


def _save_traj(out: Path, traj: Trajectory):
    try:
        with open(out / "traj.npz", "wb") as fh:
            np.savez(fh, times=traj.times, u_hat=traj.u_hat, ut_hat=traj.ut_hat,
                     real=np.array(traj.real), lambda_index=np.array(traj.meta.get("lambda_index", []), dtype=int))
    except OSError as exc:
        raise IOFailure(f"cannot write trajectory: {exc}") from exc


def load_traj(run_dir) -> tuple[Trajectory, ScenarioConfig]:
    run_dir = Path(run_dir)
    try:
        manifest = json.loads((run_dir / "manifest.json").read_text())
        data = np.load(run_dir / "traj.npz")
    except (OSError, ValueError) as exc:
        raise IOFailure(f"cannot read trajectory from {run_dir}: {exc}") from exc
    cfg = from_dict(manifest["config"])
    grid = cfg.grid()
    traj = Trajectory(grid, data["times"], data["u_hat"], data["ut_hat"], bool(data["real"]),
                      meta={"lambda_index": [int(j) for j in data["lambda_index"]]})
    return traj, cfg


def _dump_fields(out: Path, cfg: ScenarioConfig, traj: Trajectory):
    if "bin" not in cfg["output"]["formats"]:
        return
    every = cfg["output"]["every"]
    last = len(traj.times) - 1
    picks = sorted(set((list(range(0, last + 1, every)) if every > 0 else []) + [last]))
    fields = out / "fields"
    fields.mkdir(exist_ok=True)
    for j in picks:
        t = float(traj.times[j])
        spectral.write_field_dump(fields / f"u_{j:06d}.bin", traj.field(j), t)
        spectral.write_field_dump(fields / f"ut_{j:06d}.bin", traj.field_t(j), t)


# -- commands --------------------------------------------------------------------------------

def cmd_check_wellposed(cfg: ScenarioConfig, out: Path, metrics: dict) -> int:
    grid, kernel, mp = cfg.grid(), cfg.kernel(), cfg.multipoint()
    adm = check_admissible(kernel, grid)
    decay = check_decay_class(kernel, grid)
    rep = check_wellposed(kernel, mp, grid, tol=cfg["run"]["tol_d0"])
    metrics.update(min_abs_d0=rep.min_abs_d0, argmin_xi=rep.argmin_xi, n_offending=len(rep.offending),
                   admissible=adm.passed, admissibility_problems=adm.problems,
                   decay_passed=decay.passed, decay_worst_ratio=decay.worst_ratio)
    write_csv(out / "offending_modes.csv", [f"xi{d}" for d in range(grid.n)],
              [tuple(x) for x in rep.offending])
    if not rep.passed:
        metrics["status"] = "singular"
        return 2
    if not adm.passed:
        metrics["status"] = "inadmissible"
        return 1
    return 0


def _horizon(cfg: ScenarioConfig):
    dt = cfg["run"]["dt"]
    return max(1, int(np.floor(cfg["run"]["T_total"] / dt + 1e-9)))


def cmd_solve_linear(cfg: ScenarioConfig, out: Path, metrics: dict) -> int:
    grid, kernel, mp = cfg.grid(), cfg.kernel(), cfg.multipoint()
    phi, psi = cfg.data(grid)
    r = cfg["run"]
    n_steps = _horizon(cfg)
    traj = solve_linear(phi, psi, kernel, mp, n_steps * r["dt"], r["dt"], tol_d0=r["tol_d0"],
                        localize=r["localize"])
    res = multipoint_residuals(traj, phi, psi, mp)
    metrics.update(min_abs_d0=traj.meta["min_abs_d0"], lambda_snap_error=traj.meta["lambda_snap_error"],
                   multipoint_residual_u=res[0], multipoint_residual_ut=res[1],
                   multipoint_ok=max(res) < r["tol_mp"])
    _save_traj(out, traj)
    traj = traj.window(0, n_steps)
    metrics.update(sup_u_linf=float(np.max(traj.norm_table()["u_linf"])), T_reached=traj.T)
    write_csv(out / "norms.csv", NORM_COLUMNS, _norm_rows(traj, r["s"], r["p"]))
    _dump_fields(out, cfg, traj)
    return 0


def cmd_solve(cfg: ScenarioConfig, out: Path, metrics: dict) -> int:
    grid, kernel, mp, f = cfg.grid(), cfg.kernel(), cfg.multipoint(), cfg.nonlinearity()
    phi, psi = cfg.data(grid)
    r = cfg["run"]
    spectral.check_localized(phi, action=r["localize"])
    spectral.check_localized(psi, action=r["localize"])
    fp = cfg.fixed_point()
    res = continue_solution(phi, psi, kernel, mp, f, _horizon(cfg) * r["dt"], fp)
    write_csv(out / "iterations.csv", ("window", "iter", "diff", "ratio"),
              [(w, rec.iteration, rec.diff, rec.ratio) for w, rec in res.iter_log])
    write_csv(out / "windows.csv", ("window", "t0", "T", "iterations", "y_norm", "max_ratio"),
              [(i, w.t0, w.T, w.iterations, w.y_norm, w.max_ratio) for i, w in enumerate(res.windows)])
    status = {"status": res.status, "T_reached": res.T_reached, "T_est": res.T_est, "reason": res.reason}
    write_json(out / "status.json", status)
    metrics.update(status_detail=status, windows=len(res.windows),
                   iterations=sum(w.iterations for w in res.windows),
                   max_ratio=max((w.max_ratio for w in res.windows), default=float("nan")),
                   y_log=res.y_log)
    traj = res.traj
    if traj is not None:
        write_csv(out / "norms.csv", NORM_COLUMNS, _norm_rows(traj, r["s"], r["p"]))
        if res.windows:
            first = res.windows[0]
            n0 = int(round(first.T / fp.dt))
            mres = multipoint_residuals(traj.window(0, min(n0, len(traj.times) - 1)), phi, psi, mp)
            metrics.update(multipoint_residual_u=mres[0], multipoint_residual_ut=mres[1])
        if len(traj.times) >= 3 and not res.blowup:
            metrics["equation_residual"] = equation_residual(traj, kernel, f)
        _save_traj(out, traj)
        _dump_fields(out, cfg, traj)
    if res.blowup:
        metrics["T_est"] = res.T_est
        return EXIT_BLOWUP
    return 0


def cmd_energy_report(traj_dir: Path, out: Path, metrics: dict) -> tuple[int, ScenarioConfig]:
    traj, cfg = load_traj(traj_dir)
    kernel, f, mp = cfg.kernel(), cfg.nonlinearity(), cfg.multipoint()
    r = cfg["run"]
    rep = energy_drift_monitor(traj, kernel, f, tol_E=r["tol_E"], policy=r["energy_policy"])
    write_energy_csv(out / "energy.csv", rep)
    phi, psi = cfg.data(traj.grid)
    reg = check_lemma42_regularity(traj, kernel, mp, f, psi)
    metrics.update(max_drift_derived=rep.max_drift, max_drift_paper=rep.max_paper_drift,
                   drift_flagged=rep.flagged, tol_E=r["tol_E"],
                   integrated_identity_residual=reg.max_residual, integrated_identity_tol=reg.tol,
                   integrated_identity_ok=reg.passed, B_ut_finite=reg.bu_t_finite, notes=reg.notes)
    return 0, cfg


def _observed_orders(hs, errs):
    out = []
    for i in range(1, len(hs)):
        if errs[i] > 0 and errs[i - 1] > 0:
            out.append(float(np.log(errs[i - 1] / errs[i]) / np.log(hs[i - 1] / hs[i])))
        else:
            out.append(float("nan"))
    return out


def cmd_convergence_study(cfg: ScenarioConfig, out: Path, metrics: dict) -> int:
    kernel, mp, f = cfg.kernel(), cfg.multipoint(), cfg.nonlinearity()
    r = cfg["run"]
    T = r["T_total"]

    def run(grid, dt):
        phi, psi = cfg.data(grid)
        fp = cfg.fixed_point(dt)
        res = continue_solution(phi, psi, kernel, mp, f, T, fp)
        if res.blowup:
            raise NlwaveError(f"convergence study run blew up: {res.reason}")
        return res.traj

    grid = cfg.grid()
    dts = sorted(r["dt_ladder"], reverse=True)
    resid = [equation_residual(run(grid, dt), kernel, f) for dt in dts]
    orders = _observed_orders(dts, resid)
    ratios = [float("nan")] + [resid[i - 1] / resid[i] for i in range(1, len(resid))]
    write_csv(out / "convergence_dt.csv", ("dt", "residual", "ratio", "order"),
              [(dt, e, q, o) for dt, e, q, o in zip(dts, resid, ratios, [float("nan")] + orders)])

    Ns = sorted(r["N_ladder"])
    finals = []
    for N in Ns:
        traj = run(cfg.grid(N), r["dt"])
        finals.append(traj.field(-1))
    ref = finals[-1]
    errs = []
    for fld in finals[:-1]:
        step = ref.grid.N // fld.grid.N
        sub = ref.values[tuple(slice(None, None, step) for _ in range(fld.grid.n))]
        errs.append(spectral.norm_lp(fld - spectral.Field(fld.grid, values=sub), 2))
    write_csv(out / "convergence_N.csv", ("N", "error_vs_finest"), list(zip(Ns[:-1], errs)))
    metrics.update(dt_ladder=dts, residuals=resid, temporal_orders=orders,
                   min_temporal_order=min(orders) if orders else float("nan"),
                   N_ladder=Ns, N_errors=errs)
    return 0


# -- driver ------------------------------------------------------------------------------------

def run_scenario(cmd: str, cfg: ScenarioConfig | None, out, traj_dir=None) -> int:
    """Run one command and write its artifacts; returns the exit code."""
    out = Path(out)
    metrics = {}
    manifest = {"command": cmd, "version": _version(), "status": "ok", "exit_code": 0}
    start = time.perf_counter()
    code = 0
    try:
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IOFailure(f"cannot create output directory {out}: {exc}") from exc
        if cmd == "check-wellposed":
            code = cmd_check_wellposed(cfg, out, metrics)
        elif cmd == "solve-linear":
            code = cmd_solve_linear(cfg, out, metrics)
        elif cmd == "solve":
            code = cmd_solve(cfg, out, metrics)
        elif cmd == "energy-report":
            code, cfg = cmd_energy_report(Path(traj_dir), out, metrics)
        elif cmd == "convergence-study":
            code = cmd_convergence_study(cfg, out, metrics)
        else:
            raise ConfigError(f"unknown command {cmd!r}")
        manifest["status"] = {0: "ok", 2: "singular", EXIT_BLOWUP: "blowup"}.get(code, metrics.get("status", "failed"))
    except NlwaveError as exc:
        code = exc.exit_code
        manifest["status"] = "error"
        manifest["error"] = {"type": type(exc).__name__, "message": str(exc)}
        if hasattr(exc, "min_abs_d0") and exc.min_abs_d0 is not None:
            metrics["min_abs_d0"] = exc.min_abs_d0
            metrics["argmin_xi"] = exc.xi
        log.error("%s: %s", type(exc).__name__, exc)
    except Exception as exc:  # unexpected failures still leave a manifest
        code = 1
        manifest["status"] = "error"
        manifest["error"] = {"type": type(exc).__name__, "message": str(exc),
                             "traceback": traceback.format_exc()}
        log.error("unexpected %s: %s", type(exc).__name__, exc)
    metrics.pop("status", None)
    manifest["exit_code"] = code
    manifest["metrics"] = metrics
    manifest["config"] = None if cfg is None else cfg.resolved
    manifest["elapsed_s"] = time.perf_counter() - start
    try:
        write_json(out / "manifest.json", manifest)
    except IOFailure as exc:
        log.error("%s", exc)
        return 5
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlwave", description="Multipoint nonlocal wave equation solver")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="TOML scenario file")
    parser.add_argument("--out", type=Path, help="output directory (default: output.dir from the config)")
    parser.add_argument("--seed", type=int, help="override run.seed")
    parser.add_argument("--traj", type=Path, help="run directory holding traj.npz (energy-report)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = None
    if args.command == "energy-report":
        if args.traj is None:
            print("energy-report needs --traj <run dir>", file=sys.stderr)
            return 1
        out = args.out or args.traj
    else:
        if args.config is None:
            print(f"{args.command} needs --config <file>", file=sys.stderr)
            return 1
        try:
            cfg = parse_config(args.config)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            if args.out is not None:
                run_failed = {"command": args.command, "status": "error", "exit_code": exc.exit_code,
                              "error": {"type": type(exc).__name__, "message": str(exc)}, "config": None}
                try:
                    args.out.mkdir(parents=True, exist_ok=True)
                    write_json(args.out / "manifest.json", run_failed)
                except (OSError, IOFailure):
                    return 5
            return exc.exit_code
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        out = args.out or Path(cfg["output"]["dir"])
    code = run_scenario(args.command, cfg, out, args.traj)
    print(f"{args.command}: exit {code} -> {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
