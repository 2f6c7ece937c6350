"""Command-line entry point: run scenarios, summarize metrics, train models.

Exit codes: 0 success, 1 user/scenario error, 2 internal invariant breach.
``TS3RA_LOG`` (error|info|debug) controls log verbosity.
"""

from __future__ import annotations

import argparse
import copy
import logging
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .engine import Engine, InvariantViolation
from .metrics import METRICS_COLUMNS, SLICE_ORDER
from .scenario import Scenario, ScenarioError
from .scenario_io import apply_override, parse_scenario
from .serialization import save_hopfield, save_slicenet

log = logging.getLogger("ts3ra")

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_INTERNAL = 2


def _configure_logging() -> None:
    level_name = os.environ.get("TS3RA_LOG", "error").lower()
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        level_name, logging.ERROR
    )
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


class _FileSink:
    def __init__(self, path: Path):
        self.fh = open(path, "w")

    def __call__(self, line: str) -> None:
        self.fh.write(line)
        self.fh.write("\n")

    def close(self) -> None:
        self.fh.close()


def _execute_run(scenario: Scenario, out_dir: str, label: str, trace: bool) -> str:
    """Simulate one scenario and write its artifacts; returns the metrics path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    suffix = f"_{label}" if label else ""
    sinks: list[_FileSink] = []

    def sink(name: str) -> _FileSink:
        s = _FileSink(out / f"{name}{suffix}.csv")
        sinks.append(s)
        return s

    trace_sink = sink("trace") if trace else None
    detection_sink = sink("detection")
    migration_sink = sink("migrations")
    engine = Engine(
        scenario,
        trace_sink=trace_sink,
        detection_sink=detection_sink,
        migration_sink=migration_sink,
    )
    report = engine.run()
    for s in sinks:
        s.close()

    metrics_path = out / f"metrics{suffix}.csv"
    metrics_path.write_text("\n".join(report.to_csv_rows()) + "\n")
    save_slicenet(engine.model, out / f"model{suffix}.bin")
    save_hopfield(
        engine.allocator.we, engine.allocator.thresholds, out / f"hopfield{suffix}.bin"
    )
    if engine.loss_curve is not None:
        (out / f"loss_curve{suffix}.csv").write_text(
            "\n".join(engine.loss_curve.rows()) + "\n"
        )
    log.info("run %s finished: %s", label or "default", metrics_path)
    return str(metrics_path)


def _run_job(args: tuple) -> str:
    scenario, out_dir, label, trace = args
    return _execute_run(scenario, out_dir, label, trace)


def _cmd_run(args: argparse.Namespace) -> int:
    if args.scenario:
        path = Path(args.scenario)
        if not path.exists():
            print(f"error: scenario file not found: {path}", file=sys.stderr)
            return EXIT_USER_ERROR
        scenario = parse_scenario(path.read_text())
    else:
        scenario = Scenario()
        scenario.validate()
    if args.seed is not None:
        scenario.seed = args.seed

    jobs: list[tuple] = []
    if args.sweep:
        if "=" not in args.sweep:
            raise ScenarioError("--sweep expects key=v1,v2,...")
        key, joined = args.sweep.split("=", 1)
        values = [v for v in joined.split(",") if v]
        if not values:
            raise ScenarioError("--sweep needs at least one value")
        for value in values:
            variant = copy.deepcopy(scenario)
            apply_override(variant, key.strip(), value.strip())
            label = f"{key.strip().replace('.', '_')}_{value.strip()}"
            jobs.append((variant, args.out, label, args.trace))
    else:
        jobs.append((scenario, args.out, "", args.trace))

    if len(jobs) > 1 and args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for path in pool.map(_run_job, jobs):
                print(path)
    else:
        for job in jobs:
            print(_run_job(job))
    return EXIT_OK


def _cmd_summarize(args: argparse.Namespace) -> int:
    """Per-slice mean and standard deviation across metric files."""
    rows_by_slice: dict[str, list[list[float]]] = {}
    header = None
    for path in args.files:
        lines = Path(path).read_text().strip().splitlines()
        if not lines:
            print(f"error: empty metrics file {path}", file=sys.stderr)
            return EXIT_USER_ERROR
        if header is None:
            header = lines[0]
        elif lines[0] != header:
            print(f"error: inconsistent columns in {path}", file=sys.stderr)
            return EXIT_USER_ERROR
        for line in lines[1:]:
            cells = line.split(",")
            rows_by_slice.setdefault(cells[0], []).append(
                [float(c) for c in cells[1:]]
            )
    numeric_cols = METRICS_COLUMNS[1:]
    print("slice,stat," + ",".join(numeric_cols))
    order = [st.slice_id for st in SLICE_ORDER] + ["TOTAL"]
    for slice_id in order:
        if slice_id not in rows_by_slice:
            continue
        arr = np.asarray(rows_by_slice[slice_id])
        means = arr.mean(axis=0)
        stds = arr.std(axis=0)
        print(f"{slice_id},mean," + ",".join(f"{v:.9g}" for v in means))
        print(f"{slice_id},std," + ",".join(f"{v:.9g}" for v in stds))
    return EXIT_OK


def _cmd_train_slicenet(args: argparse.Namespace) -> int:
    from . import slicenet as sn

    data_path = Path(args.data)
    if not data_path.exists():
        print(f"error: data file not found: {data_path}", file=sys.stderr)
        return EXIT_USER_ERROR
    rows = []
    for line in data_path.read_text().strip().splitlines():
        cells = line.split(",")
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            continue  # header row
    if not rows:
        print("error: no numeric rows in data file", file=sys.stderr)
        return EXIT_USER_ERROR
    arr = np.asarray(rows)
    features, labels = arr[:, :-1], arr[:, -1].astype(int)
    model = sn.SliceNetModel(
        n_features=features.shape[1],
        d_model=args.d_model,
        rng=np.random.default_rng(args.seed),
    )
    curve = sn.train(
        model,
        features,
        labels,
        epochs=args.epochs,
        learning_rate=args.lr,
        rng=np.random.default_rng(args.seed + 1),
    )
    save_slicenet(model, args.out)
    if args.curve:
        Path(args.curve).write_text("\n".join(curve.rows()) + "\n")
    print(f"{args.out} (final accuracy {curve.accuracies[-1]:.4f})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ts3ra",
        description="Simulate a secured, sliced SDN/NFV 5G access network.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario")
    p_run.add_argument("--scenario", help="scenario file (defaults when omitted)")
    p_run.add_argument("--seed", type=int, help="override the scenario seed")
    p_run.add_argument("--out", default="results", help="output directory")
    p_run.add_argument("--trace", action="store_true", help="write the event trace CSV")
    p_run.add_argument("--sweep", help="key=v1,v2,... run once per value")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel runs for sweeps")
    p_run.set_defaults(func=_cmd_run)

    p_sum = sub.add_parser("summarize", help="aggregate metric files")
    p_sum.add_argument("files", nargs="+", help="metrics CSV files")
    p_sum.set_defaults(func=_cmd_summarize)

    p_train = sub.add_parser("train-slicenet", help="train a slice-selection model")
    p_train.add_argument("--data", required=True, help="CSV of feature columns + label")
    p_train.add_argument("--epochs", type=int, default=10)
    p_train.add_argument("--lr", type=float, default=0.01)
    p_train.add_argument("--out", required=True, help="model output path")
    p_train.add_argument("--curve", help="optional loss-curve CSV path")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--d-model", type=int, default=8)
    p_train.set_defaults(func=_cmd_train_slicenet)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER_ERROR
    except InvariantViolation as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
