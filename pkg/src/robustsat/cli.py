"""Command-line front end: generate / design / analyze / simulate / table.

Every run writes a manifest echoing the full configuration, seed and output
list, so results replay bit-identically from the recorded flags (timing
fields aside).  Exit codes: 0 ok, 2 usage error, 3 infeasible problem,
4 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .analysis import analyze_deterministic, close_loop, verify_probability, worst_case_estimate
from .benchmark import BenchmarkConfig, build_design_model, default_physical_data
from .errors import Infeasible, RobustSatError, SolverFailure
from .sampling import RandomizedSettings, sample_at, sample_size
from .sim import simulate_linear
from .synthesis import Controller, demeter_design_spec, design_deterministic, design_scenario, design_sequential

__all__ = ["main"]


def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--axes", default="1,2,3", help="comma list from 1..3")
    p.add_argument("--appendices", default="1,2,3,4", help="comma list from 1..4")
    p.add_argument("--model-type", type=int, default=1, choices=(1, 2))
    p.add_argument("--uncertainty-type", type=int, default=1, choices=(1, 2, 3))
    p.add_argument("--rwheels", type=int, default=1, choices=(0, 1))
    p.add_argument("--perf", type=int, default=0, choices=(0, 1, 2))


def _common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--solver", default=None, help="clarabel or cvxopt")
    p.add_argument("--jobs", type=int, default=1, help="worker cap for sample loops")
    p.add_argument("--out-dir", default=".")


def _parse_ints(text: str, what: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad {what} list: {text!r}")


def _config_from(args) -> BenchmarkConfig:
    return BenchmarkConfig(
        axes=_parse_ints(args.axes, "axes"),
        appendices=_parse_ints(args.appendices, "appendices"),
        model_type=args.model_type,
        uncertainty_type=args.uncertainty_type,
        rwheels=args.rwheels,
        perf_channel=getattr(args, "perf", 0),
    )


def _solver_from(args) -> str | None:
    return os.environ.get("ROBUSTSAT_SOLVER") or args.solver


def _write(out_dir: str, name: str, text: str, outputs: list) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        fh.write(text)
    outputs.append(name)
    return path


def _manifest(args, subcommand: str, outputs: list, timings: dict, extra: dict | None = None):
    doc = {
        "subcommand": subcommand,
        "version": __version__,
        "args": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
        "timings": timings,
        "outputs": sorted(outputs),
    }
    if extra:
        doc.update(extra)
    _write(args.out_dir, "manifest.json", json.dumps(doc, indent=1, sort_keys=True),
           outputs=[])


def cmd_generate(args) -> int:
    t0 = time.perf_counter()
    config = _config_from(args)
    phys = default_physical_data()
    outputs: list[str] = []
    wrote = {}
    for perf, name in ((0, "demeter_aug.json"), (1, "demeter_w1z1.json"),
                       (2, "demeter_w2z2.json")):
        if perf == 2 and not config.rwheels:
            print("note: no wheel model, skipping the w2/z2 variant")
            continue
        model = build_design_model(config.with_perf(perf), phys)
        meta = {"config": config.with_perf(perf).to_dict(), "generator": "demeter"}
        _write(args.out_dir, name, model.to_json(meta), outputs)
        wrote[name] = {"order": model.n, "delta_dim": model.q}
    print(f"plant order {model.n}, uncertainty channel {model.q} "
          f"({len(model.structure.names)} scalar/matrix names)")
    _manifest(args, "generate", outputs, {"wall": time.perf_counter() - t0},
              {"config": config.to_dict(), "models": wrote})
    return 0


def _design_controller(args, config: BenchmarkConfig) -> Controller:
    spec = demeter_design_spec(config)
    solver = _solver_from(args)
    if args.method == "det":
        return design_deterministic(spec, solver=solver)
    settings = RandomizedSettings(args.epsilon, args.delta, args.seed,
                                  "scenario" if args.method == "scenario" else "sequential")
    if args.method == "scenario":
        return design_scenario(spec, settings, solver=solver)
    return design_sequential(spec, settings, solver=solver)


def cmd_design(args) -> int:
    t0 = time.perf_counter()
    config = _config_from(args)
    ctl = _design_controller(args, config)
    outputs: list[str] = []
    _write(args.out_dir, "controller.json", ctl.to_json(), outputs)
    levels = ctl.levels
    print(f"method {args.method}: certified i2p {levels.get('i2p', float('nan')):.4g}, "
          f"hinf {levels.get('hinf', float('nan')):.4g}")
    _manifest(args, "design", outputs, {"wall": time.perf_counter() - t0},
              {"config": config.to_dict(), "levels": levels})
    return 0


def _load_controller(args) -> tuple[Controller, BenchmarkConfig]:
    with open(args.controller) as fh:
        ctl = Controller.from_json(fh.read())
    conf = ctl.provenance.get("config")
    if conf is None:
        raise RobustSatError("controller file carries no config echo")
    config = BenchmarkConfig(
        axes=tuple(conf["axes"]), appendices=tuple(conf["appendices"]),
        model_type=conf["model_type"], uncertainty_type=conf["uncertainty_type"],
        rwheels=conf["rwheels"])
    return ctl, config


def _samples_csv(path: str, values: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample", "value"])
        for k, v in enumerate(values):
            writer.writerow([k, f"{v:.17g}"])


def cmd_analyze(args) -> int:
    t0 = time.perf_counter()
    ctl, config = _load_controller(args)
    solver = _solver_from(args)
    phys = default_physical_data()
    os.makedirs(args.out_dir, exist_ok=True)
    outputs: list[str] = []
    results = {}
    counts = {}
    perfs = ("hinf", "i2p") if args.performance == "all" else (args.performance,)
    for perf in perfs:
        if perf == "stability":
            clsys = close_loop(build_design_model(config.with_perf(0), phys), ctl.gain)
        else:
            chan = 1 if perf == "hinf" else 2
            clsys = close_loop(build_design_model(config.with_perf(chan), phys), ctl.gain)
        if args.method == "det":
            res = analyze_deterministic(clsys, perf, solver=solver)
        else:
            settings = RandomizedSettings(args.epsilon, args.delta, args.seed)
            if perf == "stability":
                res = verify_probability(clsys, "stability", None, settings, solver=solver)
                counts["chernoff"] = res.sample_count
            else:
                res = worst_case_estimate(clsys, perf, settings, solver=solver)
                counts["loglog"] = res.sample_count
            _samples_csv(os.path.join(args.out_dir, f"samples_{perf}.csv"),
                         res.per_sample or [])
            outputs.append(f"samples_{perf}.csv")
        results[perf] = res.to_dict()
        print(f"{perf}: {res.kind} = {res.value:.6g} (samples {res.sample_count})")
    _write(args.out_dir, "analysis.json", json.dumps(results, indent=1, sort_keys=True),
           outputs)
    _manifest(args, "analyze", outputs, {"wall": time.perf_counter() - t0},
              {"config": config.to_dict(), "sample_counts": counts})
    return 0


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    ctl, config = _load_controller(args)
    phys = default_physical_data()
    plant = build_design_model(config.with_perf(2), phys)
    clsys = close_loop(plant, ctl.gain)
    x0 = clsys.b_w.sum(axis=1)
    names = plant.state_names
    th_cols = [i for i, nm in enumerate(names) if nm.startswith("th") and not nm.startswith("thd")]
    thd_cols = [i for i, nm in enumerate(names) if nm.startswith("thd")]
    eta_cols = [i for i, nm in enumerate(names) if nm.startswith("eta_")]
    outputs: list[str] = []
    header = (["t"] + [names[i] for i in th_cols] + [names[i] for i in thd_cols]
              + [names[i] for i in eta_cols] + [f"z2_{j}" for j in range(clsys.nz)])
    overlay_blocks = []

    def one(k):
        smp = sample_at(clsys.structure, args.seed, k)
        sys_k = clsys.close_delta(smp)
        return simulate_linear(sys_k, x0=x0, t_final=args.t_final, dt_out=args.dt)

    if args.jobs > 1:
        from joblib import Parallel, delayed

        trajs = Parallel(n_jobs=args.jobs)(delayed(one)(k) for k in range(args.samples))
    else:
        trajs = [one(k) for k in range(args.samples)]
    for k, tr in enumerate(trajs):
        rows = np.column_stack([tr.t] + [tr.states[:, i] for i in th_cols]
                               + [tr.states[:, i] for i in thd_cols]
                               + [tr.states[:, i] for i in eta_cols]
                               + ([tr.outputs] if tr.outputs is not None else []))
        name = f"sample_{k:03d}.csv"
        text = ",".join(header) + "\n" + "\n".join(
            ",".join(f"{v:.17g}" for v in row) for row in rows)
        _write(args.out_dir, name, text + "\n", outputs)
        overlay_blocks.append("\n".join(" ".join(f"{v:.17g}" for v in row) for row in rows))
    _write(args.out_dir, "overlay.dat", "\n\n\n".join(overlay_blocks) + "\n", outputs)
    ncol = len(header)
    _write(args.out_dir, "plot.gp", (
        "# gnuplot script for the Monte Carlo overlay\n"
        "set xlabel 't [s]'\n"
        f"plot for [i=0:{args.samples - 1}] 'overlay.dat' index i using 1:2 with lines notitle\n"
        f"# columns: {' '.join(header)} ({ncol} columns)\n"), outputs)
    print(f"wrote {args.samples} trajectories")
    _manifest(args, "simulate", outputs, {"wall": time.perf_counter() - t0},
              {"config": config.to_dict()})
    return 0


TABLE_HEADER = ["axes", "appendices", "model_type", "uncertainty_type", "rwheels",
                "Design Method", "Design i2p", "Design hinf",
                "Det i2p", "Det hinf", "Prob i2p", "Prob hinf", "Complexity(s)"]


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float) and math.isinf(v):
        return "Inf"
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


def cmd_table(args) -> int:
    t0 = time.perf_counter()
    with open(args.rows) as fh:
        rows_spec = json.load(fh)
    solver = _solver_from(args)
    phys = default_physical_data()
    os.makedirs(args.out_dir, exist_ok=True)
    table = []
    for row in rows_spec:
        config = BenchmarkConfig(
            axes=tuple(row["axes"]), appendices=tuple(row["appendices"]),
            model_type=row.get("model_type", 1),
            uncertainty_type=row.get("uncertainty_type", 1),
            rwheels=row.get("rwheels", 1))
        method = row.get("method", "det")
        eps = row.get("epsilon", 0.1)
        delta = row.get("delta", 1e-9)
        spec = demeter_design_spec(config, phys)
        t_row = time.perf_counter()
        cells = {
            "axes": ",".join(map(str, config.axes)),
            "appendices": ",".join(map(str, config.appendices)),
            "model_type": config.model_type,
            "uncertainty_type": config.uncertainty_type,
            "rwheels": config.rwheels,
            "Design Method": "Det" if method == "det" else "Prob",
        }
        try:
            if method == "det":
                ctl = design_deterministic(spec, solver=solver)
            else:
                settings = RandomizedSettings(eps, delta, args.seed, "scenario")
                ctl = design_scenario(spec, settings, solver=solver)
            cells["Design i2p"] = ctl.levels.get("i2p")
            cells["Design hinf"] = ctl.levels.get("hinf")
        except Infeasible:
            ctl = None
            cells["Design i2p"] = math.inf
            cells["Design hinf"] = math.inf
        if ctl is None:
            for key in ("Det i2p", "Det hinf", "Prob i2p", "Prob hinf"):
                cells[key] = None
        else:
            cl1 = close_loop(build_design_model(config.with_perf(1), phys), ctl.gain)
            cl2 = close_loop(build_design_model(config.with_perf(2), phys), ctl.gain)
            cells["Det i2p"] = analyze_deterministic(cl2, "i2p", solver=solver).value
            cells["Det hinf"] = analyze_deterministic(cl1, "hinf", solver=solver).value
            rand = RandomizedSettings(row.get("an_epsilon", 0.1),
                                      row.get("an_delta", 1e-6), args.seed)
            cells["Prob i2p"] = worst_case_estimate(cl2, "i2p", rand, solver=solver).value
            cells["Prob hinf"] = worst_case_estimate(cl1, "hinf", rand, solver=solver).value
        cells["Complexity(s)"] = round(time.perf_counter() - t_row, 2)
        table.append(cells)
        print(" | ".join(_fmt(cells.get(h)) for h in TABLE_HEADER))
    outputs: list[str] = []
    md = ["| " + " | ".join(TABLE_HEADER) + " |",
          "|" + "|".join("---" for _ in TABLE_HEADER) + "|"]
    for cells in table:
        md.append("| " + " | ".join(_fmt(cells.get(h)) for h in TABLE_HEADER) + " |")
    _write(args.out_dir, "table.md", "\n".join(md) + "\n", outputs)
    with open(os.path.join(args.out_dir, "table.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TABLE_HEADER)
        writer.writeheader()
        for cells in table:
            writer.writerow({h: _fmt(cells.get(h)) for h in TABLE_HEADER})
    outputs.append("table.csv")
    _manifest(args, "table", outputs, {"wall": time.perf_counter() - t0})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robustsat",
        description="Uncertain flexible-satellite benchmark: generation, robust "
                    "and randomized state-feedback design, analysis, simulation.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("generate", help="write the three design models as JSON")
    _config_args(p)
    _common_args(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("design", help="design a state-feedback gain")
    _config_args(p)
    _common_args(p)
    p.add_argument("--method", default="det", choices=("det", "scenario", "sequential"))
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=1e-9)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("analyze", help="closed-loop analysis of a controller file")
    _common_args(p)
    p.add_argument("--controller", required=True)
    p.add_argument("--method", default="det", choices=("det", "rand"))
    p.add_argument("--performance", default="all",
                   choices=("all", "hinf", "i2p", "stability"))
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=1e-6)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="Monte Carlo closed-loop trajectories")
    _common_args(p)
    p.add_argument("--controller", required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--t-final", type=float, default=200.0)
    p.add_argument("--dt", type=float, default=0.1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("table", help="run a list of configs and emit a summary table")
    _common_args(p)
    p.add_argument("--rows", required=True, help="JSON list of row configs")
    p.set_defaults(func=cmd_table)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 4
    except RobustSatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
