"""Command line entry point: ``mimo-isac <subcommand> [--config f.json] [--set k=v] ...``.

Every subcommand writes ``<name>.csv`` (data, config echo as ``#`` comment
lines before the header) and ``<name>.json`` (result record) into ``--out``;
``--figures`` also renders ``<name>.png``.
Exit codes: 0 ok, 1 other failure, 2 thresholds infeasible, 3 solver stalled,
4 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__, metrics
from .config import RunConfig, build_scenario, build_thresholds, build_weights, load_config
from .errors import ConfigError, DomainError, IsacError, SolverStalledError, ThresholdsInfeasibleError
from .metrics import BeamformerSet
from .pareto import SchemeMode, bisection_solve, pareto_sweep, scenario_for_mode, solver_params
from .rankone import extract_rank_one, verify_preservation
from .scenario import Scenario
from .sensing import capon_spectrum, default_grid, rmse_mc, simulate_echo, synthesize_transmit, EchoScenario

log = logging.getLogger("mimo_isac")

EXIT_OK, EXIT_FAIL, EXIT_THRESHOLDS, EXIT_STALLED, EXIT_CONFIG = 0, 1, 2, 3, 4

APPROXIMATIONS = {
    SchemeMode.MI_CONSTRAINED.value: "communication-centric weights, no radar streams, no ZF boxes",
}


def artifact_version() -> str:
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if rev.returncode == 0 and rev.stdout.strip():
            return f"{__version__}+g{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


class Output:
    """Writes the products of one subcommand into the output directory."""

    def __init__(self, cfg: RunConfig, name: str):
        self.cfg, self.name = cfg, name
        self.dir = Path(cfg.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.echo = cfg.echo()
        self.t0 = time.perf_counter()

    def path(self, suffix: str, stem: str | None = None) -> Path:
        return self.dir / f"{stem or self.name}{suffix}"

    def csv(self, header: Sequence[str], rows: Iterable[Sequence], stem: str | None = None) -> Path:
        p = self.path(".csv", stem)
        with open(p, "w", newline="", encoding="utf-8") as f:
            f.write(f"# mimo-isac {artifact_version()} {self.name}\n")
            f.write("# config: " + json.dumps(self.echo, sort_keys=True) + "\n")
            w = csv.writer(f, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        return p

    def record(self, results: dict, diagnostics: dict | None = None) -> Path:
        rec = {
            "subcommand": self.name,
            "version": artifact_version(),
            "config": self.echo,
            "results": _jsonable(results),
            "diagnostics": _jsonable(diagnostics or {}),
            "timing_s": time.perf_counter() - self.t0,
        }
        p = self.path(".json")
        p.write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return p


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    """Ordered map, in worker processes when ``threads > 1``."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# --- solving ---------------------------------------------------------------


def _solve(cfg: RunConfig, scn: Scenario, mode: SchemeMode, alpha: float | None = None):
    scn = scenario_for_mode(scn, mode)
    w = build_weights(cfg, scn.n_users, scn.n_targets, alpha)
    t = build_thresholds(cfg, scn.n_users)
    sc = cfg.solver
    params = solver_params(scn, sc.tau_feas, sc.max_iter)
    res = bisection_solve(scn, w, t, mode, eps=sc.eps, kappa=sc.kappa, params=params, warm_start=sc.warm_start)
    return scn, res


def _extract(scn: Scenario, res) -> tuple[BeamformerSet, dict]:
    rep = extract_rank_one(res.point, scn.users, scn.signal.total_power)
    chk = verify_preservation(res.point, rep, scn)
    diag = {
        "radar_vectors": rep.n_radar,
        "configured_radar_streams": scn.signal.n_radar_streams,
        "cov_sum_residual": rep.cov_sum_residual,
        "residual_min_eig": rep.residual_min_eig,
        "preserved": chk.ok,
        "preservation_failures": chk.failures,
    }
    return rep.beamformers, diag


def _solver_diag(res) -> dict:
    fr = res.final_report
    return {
        "r_max": res.r_max,
        "bisection_iterations": res.iterations,
        "history": [{"r": r, "verdict": v} for r, v in res.history],
        "final_sweeps": fr.iterations if fr else None,
        "final_max_violation": fr.max_violation if fr else None,
        "power_rescale": res.rescaled,
    }


def cmd_solve(cfg: RunConfig, args) -> int:
    out = Output(cfg, "solve")
    scn, res = _solve(cfg, build_scenario(cfg), cfg.mode)
    bf, ext = _extract(scn, res)
    rows = []
    for kind, vecs in (("comm", bf.comm), ("radar", bf.radar)):
        for i, v in enumerate(vecs):
            rows.append([kind, i, *np.column_stack([v.real, v.imag]).ravel()])
    n = scn.geometry.n_tx
    header = ["kind", "index"] + [f"{p}{j}" for j in range(n) for p in ("re", "im")]
    out.csv(header, rows, stem="beamformers")
    results = {"r_star": res.r_star, **res.achieved}
    diag = {**_solver_diag(res), **ext, "mode": cfg.mode.value, "approximation": APPROXIMATIONS.get(cfg.mode.value)}
    out.record(results, diag)
    if cfg.figures:
        from .plotting import plot_curves

        grid = default_grid(cfg.experiment.grid_step_deg)
        bp = metrics.beampattern(metrics.tx_covariance(bf), grid, scn.geometry)
        plot_curves(out.path(".png"), grid, {cfg.mode.value: bp}, "angle (deg)", "beampattern (dB)",
                    out.echo, marks=scn.targets.angles, db=True)
    print(f"r* = {res.r_star:.6g}  I_up = {res.achieved['i_up_bits']:.4f} bits  "
          f"avg rate = {res.achieved['avg_rate']:.4f} bit/s/Hz")
    return EXIT_OK


def _sweep_point(job):
    cfg, mode, alpha = job
    scn = scenario_for_mode(build_scenario(cfg), mode)
    t = build_thresholds(cfg, scn.n_users)
    sc = cfg.solver
    return pareto_sweep(scn, t, [alpha], mode, eps=sc.eps, kappa=sc.kappa,
                        params=solver_params(scn, sc.tau_feas, sc.max_iter))[0]


def cmd_pareto(cfg: RunConfig, args) -> int:
    out = Output(cfg, "pareto-sweep")
    grid = cfg.experiment.alpha_grid
    pts = _map(_sweep_point, [(cfg, cfg.mode, a) for a in grid], args.threads)
    header = ["alpha", "i_up_bits", "exact_mi_bits", "avg_rate", "r_star", "status"]
    out.csv(header, [[p.alpha, p.i_up_bits, p.exact_mi_bits, p.avg_rate, p.r_star, p.status] for p in pts])
    out.record({"points": [p.row() for p in pts]}, {"mode": cfg.mode.value})
    if cfg.figures:
        from .plotting import plot_tradeoff

        plot_tradeoff(out.path(".png"), [p.avg_rate for p in pts], [p.i_up_bits for p in pts], grid, out.echo)
    return EXIT_OK if all(p.status == "ok" for p in pts) else EXIT_FAIL


def _scheme_job(job):
    cfg, mode = job
    try:
        scn, res = _solve(cfg, build_scenario(cfg), mode)
    except (ThresholdsInfeasibleError, SolverStalledError, ConfigError) as exc:
        return mode, None, None, type(exc).__name__
    bf, _ = _extract(scn, res)
    return mode, res, bf, "ok"


def cmd_beampattern(cfg: RunConfig, args) -> int:
    out = Output(cfg, "beampattern")
    scn = build_scenario(cfg)
    grid = default_grid(cfg.experiment.grid_step_deg)
    done = _map(_scheme_job, [(cfg, m) for m in cfg.experiment.schemes], args.threads)
    cols, status = {}, {}
    for mode, res, bf, st in done:
        status[mode.value] = st
        if res is not None:
            cols[mode.value] = metrics.beampattern(metrics.tx_covariance(res.point), grid, scn.geometry)
    out.csv(["angle_deg", *cols], zip(grid, *cols.values()))
    out.record({"status": status}, {"approximations": {m: APPROXIMATIONS[m] for m in status if m in APPROXIMATIONS}})
    if cfg.figures and cols:
        from .plotting import plot_curves

        plot_curves(out.path(".png"), grid, cols, "angle (deg)", "beampattern (dB)", out.echo,
                    marks=scn.targets.angles, db=True)
    return EXIT_OK if all(s == "ok" for s in status.values()) else EXIT_FAIL


def _snr_job(job):
    cfg, mode, snr_db, which = job
    scn = build_scenario(cfg)
    lin = 10.0 ** (snr_db / 10.0)
    p_t = scn.signal.total_power
    if which == "radar":
        scn = scn.replace(radar_noise=float(np.mean(scn.targets.variances)) * p_t / lin)
    else:
        scn = scn.replace(noise_powers=np.full(scn.n_users, p_t / lin))
    try:
        scn, res = _solve(cfg, scn, mode)
    except (ThresholdsInfeasibleError, SolverStalledError, ConfigError) as exc:
        nan = math.nan
        return [snr_db, mode.value, nan, nan, nan, type(exc).__name__]
    a = res.achieved
    return [snr_db, mode.value, a["i_up_bits"], a["exact_mi_bits"], a["avg_rate"], "ok"]


def _cmd_snr(cfg: RunConfig, args, which: str) -> int:
    name = "mi-vs-snr" if which == "radar" else "rate-vs-snr"
    out = Output(cfg, name)
    jobs = [(cfg, m, float(s), which) for m in cfg.experiment.schemes for s in cfg.experiment.snr_grid_db]
    rows = _map(_snr_job, jobs, args.threads)
    out.csv(["snr_db", "scheme", "i_up_bits", "exact_mi_bits", "avg_rate", "status"], rows)
    out.record({"rows": rows}, {"snr_axis": which})
    if cfg.figures:
        from .plotting import plot_curves

        col = 2 if which == "radar" else 4
        curves = {m.value: [r[col] for r in rows if r[1] == m.value] for m in cfg.experiment.schemes}
        plot_curves(out.path(".png"), cfg.experiment.snr_grid_db, curves, f"{which} SNR (dB)",
                    "sensing MI upper bound (bits)" if which == "radar" else "average rate (bit/s/Hz)", out.echo)
    return EXIT_OK if all(r[-1] == "ok" for r in rows) else EXIT_FAIL


def cmd_capon(cfg: RunConfig, args) -> int:
    out = Output(cfg, "capon")
    scn = build_scenario(cfg)
    grid = default_grid(cfg.experiment.grid_step_deg)
    noise = scn.signal.total_power / 10.0 ** (cfg.experiment.radar_snr_db / 10.0)
    cols, status = {}, {}
    for mode, res, bf, st in _map(_scheme_job, [(cfg, m) for m in cfg.experiment.schemes], args.threads):
        status[mode.value] = st
        if bf is None:
            continue
        for label, b in ((mode.value, bf), (f"{mode.value}_no_radar", bf.without_radar())):
            x = synthesize_transmit(b, scn.signal.block_length, cfg.seed)
            y = simulate_echo(x, scn.targets, EchoScenario(np.ones(scn.n_targets), noise, cfg.seed), scn.geometry)
            cols[label] = capon_spectrum(y, scn.geometry, grid).spectrum
    out.csv(["angle_deg", *cols], zip(grid, *cols.values()))
    out.record({"status": status}, {"radar_noise": noise})
    if cfg.figures and cols:
        from .plotting import plot_curves

        plot_curves(out.path(".png"), grid, cols, "angle (deg)", "Capon spectrum (dB)", out.echo,
                    marks=scn.targets.angles, db=True)
    return EXIT_OK if all(s == "ok" for s in status.values()) else EXIT_FAIL


def cmd_rmse(cfg: RunConfig, args) -> int:
    out = Output(cfg, "rmse")
    scn = build_scenario(cfg)
    grid = default_grid(cfg.experiment.grid_step_deg)
    rows, status = [], {}
    for mode, res, bf, st in _map(_scheme_job, [(cfg, m) for m in cfg.experiment.schemes], args.threads):
        status[mode.value] = st
        if bf is None:
            continue
        for label, b in ((mode.value, bf), (f"{mode.value}_no_radar", bf.without_radar())):
            for snr, err in rmse_mc(scn, b, cfg.experiment.snr_grid_db, cfg.experiment.trials, cfg.seed, grid):
                rows.append([snr, label, err])
    out.csv(["snr_db", "scheme", "rmse_deg"], rows)
    out.record({"rows": rows, "status": status})
    if cfg.figures and rows:
        from .plotting import plot_curves

        labels = list(dict.fromkeys(r[1] for r in rows))
        curves = {lab: [r[2] for r in rows if r[1] == lab] for lab in labels}
        plot_curves(out.path(".png"), cfg.experiment.snr_grid_db, curves, "radar SNR (dB)", "RMSE (deg)", out.echo)
    return EXIT_OK if all(s == "ok" for s in status.values()) else EXIT_FAIL


def cmd_selftest(cfg: RunConfig, args) -> int:
    from .selftest import run_all

    out = Output(cfg, "selftest")
    results = run_all()
    out.csv(["suite", "ok", "seconds", "detail"], [[r["suite"], r["ok"], r["seconds"], r["detail"]] for r in results])
    out.record({"suites": results})
    for r in results:
        print(f"{'PASS' if r['ok'] else 'FAIL'}  {r['suite']}: {r['detail']}")
    return EXIT_OK if all(r["ok"] for r in results) else EXIT_FAIL


COMMANDS = {
    "solve": cmd_solve,
    "pareto-sweep": cmd_pareto,
    "beampattern": cmd_beampattern,
    "mi-vs-snr": lambda cfg, args: _cmd_snr(cfg, args, "radar"),
    "rate-vs-snr": lambda cfg, args: _cmd_snr(cfg, args, "comm"),
    "capon": cmd_capon,
    "rmse": cmd_rmse,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mimo-isac", description="Multi-objective MIMO-ISAC beamforming experiments.")
    p.add_argument("subcommand", choices=list(COMMANDS))
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted override, e.g. --set signal.total_power_dbm=30 (repeatable)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="scenario seed (u64)")
    p.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    p.add_argument("--figures", action="store_true", help="also render PNG figures")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = list(args.overrides)
    if args.out:
        overrides.append(f"out={json.dumps(args.out)}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.figures:
        overrides.append("figures=true")
    try:
        cfg = load_config(args.config, overrides)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return COMMANDS[args.subcommand](cfg, args)
    except ThresholdsInfeasibleError as exc:
        print(f"error: thresholds infeasible: {exc}", file=sys.stderr)
        return EXIT_THRESHOLDS
    except SolverStalledError as exc:
        print(f"error: solver stalled: {exc}", file=sys.stderr)
        return EXIT_STALLED
    except (ConfigError, DomainError) as exc:
        print(f"error: configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IsacError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
