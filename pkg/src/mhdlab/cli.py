"""Command-line entry point: ``mhdlab <config> [--out DIR] [--seed U64] [--threads K]``.

Exit status 0 when the experiment's checks pass, 1 when they fail or the
run aborts, 2 for configuration errors.
"""

import argparse
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy.fft

from . import diagnostics as dg
from . import experiments as ex
from .config import parse_config
from .errors import ConfigurationError, MHDLabError
from .snapshot import write_snapshot
from .solver import picard_history, run

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
PICARD_TOLERANCE = 1e-4
KATO_SLACK = 1e-12


class _Outputs:
    """Tracks written files so the manifest can list and checksum them."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files = []

    def csv(self, name, header, rows):
        buf = io.StringIO(newline="")
        dg.write_csv(buf, header, rows)
        self.text(name, buf.getvalue())

    def text(self, name, content):
        (self.root / name).write_text(content, encoding="utf-8", newline="")
        self.files.append(name)

    def snapshot(self, name, state):
        write_snapshot(self.root / name, state)
        self.files.append(name)

    def checksums(self):
        out = {}
        for name in self.files:
            out[name] = hashlib.sha256((self.root / name).read_bytes()).hexdigest()
        return out


def _data(cfg):
    grid = cfg.grid
    u0 = cfg.u_data.spectral(grid, seed=[cfg.seed, 0])
    B0 = cfg.B_data.spectral(grid, seed=[cfg.seed, 1])
    return grid, u0, B0


def _plot_script(title, csv_name, columns, ylabel, logy=True):
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set title '{title}'",
        f"set xlabel '{columns[0]}'",
        f"set ylabel '{ylabel}'",
    ]
    if logy:
        lines.append("set logscale y")
    plots = [f"'{csv_name}' using 1:{i + 2} with lines" for i in range(len(columns) - 1)]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def _write_series(out, series, name="diagnostics.csv"):
    out.text(name, dg.series_csv(series))


def _simulate(cfg, out, summary):
    grid, u0, B0 = _data(cfg)
    series = run(u0, B0, cfg.delta, cfg.solver_config(), grid, lq_orders=cfg.lq)
    _write_series(out, series)
    for i, st in enumerate(series.snapshots):
        out.snapshot(f"snapshot_{i:04d}.bin", st)
    out.text("plot.gp", _plot_script("energies", "diagnostics.csv", ("t", "E_u", "E_B"),
                                     "energy"))
    summary["energy_balance_residual"] = dg.energy_balance_residual(series)
    return True


def _nonuniform(cfg, out, summary, threads):
    fam = ex.ScaledFamilyConfig(
        u_data=cfg.u_data, B_data=cfg.B_data, alphas=cfg.alphas, T=cfg.T,
        epsilon=cfg.epsilon, base_grid=cfg.grid, dt=cfg.dt, delta=cfg.delta,
        box_policy=cfg.box_policy, nonlinear=cfg.nonlinear, dealias=cfg.dealias,
        threads=threads)
    rows = ex.nonuniform_decay_experiment(fam)
    out.csv("report.csv", ex.NONUNIFORM_COLUMNS, [r.row() for r in rows])
    out.text("plot.gp", _plot_script("decay ratio vs scale factor", "report.csv",
                                     ("alpha", "linear_ratio", "duhamel_bound",
                                      "simulated_ratio"), "ratio", logy=False)
             .replace("with lines", "with linespoints"))
    summary["row_errors"] = {f"{r.alpha:g}": r.error for r in rows if r.error}
    if summary["row_errors"]:
        summary["partial"] = True
    return ex.nonuniform_verdict(rows)


def _oscillation(cfg, out, summary):
    grid, u0, B0 = _data(cfg)
    rep = ex.compensated_oscillation_experiment(
        u0, B0, grid, cfg.T, cfg.dt, record_every=cfg.record_every, window=cfg.window,
        lq_orders=cfg.lq)
    out.csv("oscillation.csv", ("t", "E_u", "E_B"), ex.oscillation_rows(rep.series))
    out.text("oscillation_summary.txt", rep.summary() + "\n")
    _write_series(out, rep.series)
    out.text("plot.gp", _plot_script("energies without magnetic diffusion", "oscillation.csv",
                                     ("t", "E_u", "E_B"), "energy"))
    summary["oscillation"] = rep.summary()
    return rep.passed()


def _kato(cfg, out, summary):
    grid, u0, B0 = _data(cfg)
    series = run(u0, B0, cfg.delta, cfg.solver_config(), grid, lq_orders=cfg.lq)
    _write_series(out, series)
    cols, ok = {}, True
    for q in cfg.lq:
        obs = dg.kato_observable(series, cfg.p, q, cfg.t_min)
        vals = np.array([v for _, v in obs])
        cols[q] = obs
        if len(vals) > 1 and np.any(np.diff(vals) > KATO_SLACK * vals[0]):
            ok = False
    times = [t for t, _ in cols[cfg.lq[0]]]
    header = ["t"] + [f"kato_q{q:g}" for q in cfg.lq]
    rows = [[t] + [cols[q][i][1] for q in cfg.lq] for i, t in enumerate(times)]
    out.csv("kato.csv", header, rows)
    out.text("plot.gp", _plot_script("weighted Lq norms", "kato.csv", header, "observable"))
    summary["kato_non_increasing"] = ok
    return ok


def _picard(cfg, out, summary):
    grid, u0, B0 = _data(cfg)
    scfg = replace(cfg.solver_config(), scheme="if-rk4")
    series = run(u0, B0, cfg.delta, scfg, grid, lq_orders=cfg.lq)
    _write_series(out, series)
    ref = series.snapshots[-1]
    _, u, B, dist = picard_history(u0, B0, cfg.delta, cfg.T, cfg.picard_iterations,
                                   scfg.steps + 1, grid, cfg.dealias)
    gap = math.sqrt(grid.volume * np.sum(np.abs(u[-1] - ref.u) ** 2))
    ratios = [a / b if b > 0 else math.inf for a, b in zip(dist[1:], dist[2:])]
    out.csv("picard.csv", ("iteration", "distance"),
            [[i + 1, d] for i, d in enumerate(dist)])
    out.text("plot.gp", _plot_script("Picard iterate distances", "picard.csv",
                                     ("iteration", "distance"), "distance"))
    summary["picard_gap_u"] = gap
    summary["picard_contraction"] = ratios
    return gap <= PICARD_TOLERANCE and all(r >= 2.0 for r in ratios)


def orchestrate(cfg, out_dir=None, threads=1):
    """Run the configured experiment, write outputs and a manifest; return exit status."""
    out = _Outputs(out_dir or cfg.out)
    summary = {"partial": False}
    start = time.perf_counter()
    status, message = EXIT_FAIL, ""
    try:
        with scipy.fft.set_workers(threads):
            if cfg.experiment == "simulate":
                ok = _simulate(cfg, out, summary)
            elif cfg.experiment == "nonuniform":
                ok = _nonuniform(cfg, out, summary, threads)
            elif cfg.experiment == "oscillation":
                ok = _oscillation(cfg, out, summary)
            elif cfg.experiment == "kato":
                ok = _kato(cfg, out, summary)
            else:
                ok = _picard(cfg, out, summary)
        status = EXIT_PASS if ok else EXIT_FAIL
    except ConfigurationError as exc:
        status, message = EXIT_CONFIG, str(exc)
        summary["partial"] = True
    except MHDLabError as exc:
        status, message = EXIT_FAIL, f"{type(exc).__name__}: {exc}"
        summary["partial"] = True
    manifest = {
        "config": cfg.to_text(),
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "status": {EXIT_PASS: "pass", EXIT_FAIL: "fail", EXIT_CONFIG: "config-error"}[status],
        "error": message,
        "partial": summary.pop("partial"),
        "summary": summary,
        "files": out.checksums(),
        "wall_clock_seconds": time.perf_counter() - start,
    }
    (out.root / "manifest.json").write_text(json.dumps(manifest, indent=2, default=float) + "\n",
                                           encoding="utf-8")
    if message:
        print(message, file=sys.stderr)
    return status


def _threads(value):
    k = int(value)
    if k < 1:
        raise argparse.ArgumentTypeError(f"thread count must be >= 1, got {value}")
    return k


def _seed(value):
    s = int(value)
    if not 0 <= s < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {value}")
    return s


def main(argv=None):
    parser = argparse.ArgumentParser(prog="mhdlab", description=__doc__.splitlines()[0])
    parser.add_argument("config", help="path to a run configuration file")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--seed", type=_seed, help="random seed (overrides the config)")
    parser.add_argument("--threads", type=_threads,
                        help="worker threads (default: $MHDLAB_THREADS or 1)")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    try:
        threads = args.threads or _threads(os.environ.get("MHDLAB_THREADS", "1"))
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text)
    except (OSError, ValueError, argparse.ArgumentTypeError) as exc:
        print(f"mhdlab: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out=args.out)
    return orchestrate(cfg, threads=threads)


if __name__ == "__main__":
    sys.exit(main())
