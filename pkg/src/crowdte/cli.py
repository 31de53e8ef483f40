"""Command-line entry point: ``crowdte {bench,estimate,predict,bounds,simulate}``.

Exit codes: 0 success, 1 usage or input error, 2 bound violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings

from . import bench
from .bench import EXIT_OK, EXIT_USAGE
from .data import BinarizationConfig, LabelFileError, write_gold, write_labels
from .simulate import InstanceKind, InstanceSpec, generate_run, resolve_b

log = logging.getLogger("crowdte")

DEFAULTS = {
    "instance": "i",
    "a": 0.9,
    "b": "1",
    "n": 50,
    "t": 10_000,
    "alpha": 0.25,
    "runs": 200,
    "seed": 0,
    "algorithms": "te,majority,oracle",
    "format": "csv",
    "min_worker_labels": 10,
    "jobs": 1,
    "trials": 10_000,
    "sweeps": "lemma1,thresholds,tail,chernoff",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _instance_flags(p):
    p.add_argument("--instance", help="i (half informative), ii (three informative), iii (sign hard) or explicit")
    p.add_argument("--a", type=float, help="reliability level a")
    p.add_argument("--b", help="total reliability b for instance iii; 'sqrt-n' for sqrt(n)")
    p.add_argument("--n", type=int, help="number of workers")
    p.add_argument("--t", type=int, help="number of tasks per run")
    p.add_argument("--alpha", type=float, help="answer probability")
    p.add_argument("--theta", help="comma-separated reliabilities for --instance explicit")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crowdte", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file whose keys mirror the long flags")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bench", help="average TE, majority and oracle over synthetic runs")
    _instance_flags(p)
    p.add_argument("--published", action="store_true", help="run all six published synthetic rows")
    p.add_argument("--runs", type=int)
    p.add_argument("--algorithms", help="comma-separated subset of te,majority,oracle")
    p.add_argument("--jobs", type=int)
    p.add_argument("--format", choices=("csv", "markdown"))
    p.add_argument("--output", help="table file (default: stdout)")

    p = sub.add_parser("simulate", help="write one synthetic run as label/gold CSV files")
    _instance_flags(p)
    p.add_argument("--run-index", type=int, default=0)
    p.add_argument("--output", required=True, help="label CSV path")
    p.add_argument("--gold", help="gold CSV path")
    p.add_argument("--theta-output", help="CSV of the (permuted) generating reliabilities")

    for name, helptext in (("estimate", "TE reliability estimates for a label file"),
                           ("predict", "TE plug-in and majority predictions for a label file")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("labels", help="label CSV/TSV with header task,worker,label")
        if name == "predict":
            p.add_argument("--gold", help="gold CSV with header task,label")
            p.add_argument("--seed", type=int)
        else:
            p.add_argument("--snapshot", help="also write the TE counter snapshot here")
        p.add_argument("--labels-config", help="JSON {\"positive\": [...], \"negative\": [...]}")
        p.add_argument("--min-worker-labels", type=int)
        p.add_argument("--format", choices=("csv", "markdown"))
        p.add_argument("--output")

    p = sub.add_parser("bounds", help="verify the lower-bound and concentration inequalities")
    p.add_argument("--sweeps", help="comma-separated subset of lemma1,thresholds,tail,chernoff,chernoff-kl")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--set-constant", action="append", default=[], metavar="NAME=VALUE",
                   help="override a proof constant (negative controls), e.g. kl_abs_factor=5.12")
    p.add_argument("--format", choices=("csv", "markdown"))
    p.add_argument("--output")
    return parser


def _settings(args) -> dict:
    merged = dict(DEFAULTS)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            merged.update({k.replace("-", "_"): v for k, v in json.load(fh).items()})
    merged.update({k: v for k, v in vars(args).items() if v is not None})
    return merged


def _instance(s) -> InstanceSpec:
    kind = s["instance"]
    if str(kind).lower() == "explicit":
        if not s.get("theta"):
            raise UsageError("--instance explicit needs --theta")
        theta = s["theta"]
        if isinstance(theta, str):
            theta = [float(v) for v in theta.split(",")]
        return InstanceSpec(InstanceKind.EXPLICIT, t=s["t"], alpha=s["alpha"], explicit_theta=tuple(theta))
    return InstanceSpec(kind, n=s["n"], t=s["t"], alpha=s["alpha"], a=s["a"], b=resolve_b(s["b"], s["n"]))


def _emit(text, output):
    if output:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _labels_config(s):
    if s.get("labels_config"):
        return BinarizationConfig.from_file(s["labels_config"])
    if "positive" in s and "negative" in s:
        return BinarizationConfig.from_mapping(s)
    return BinarizationConfig.default()


def _run_bench(s):
    algorithms = tuple(a.strip() for a in s["algorithms"].split(",") if a.strip())
    if s.get("published"):
        specs = [InstanceSpec.published(kind, value) for kind, value in bench.REFERENCE_ROWS]
    else:
        specs = [_instance(s)]
    rows = []
    for spec in specs:
        result = bench.cmd_bench(bench.BenchConfig(spec, s["runs"], s["seed"], algorithms, s["jobs"]))
        log.info("%s: %d runs in %.1fs", bench.instance_label(spec), result.runs, result.wall_time)
        rows += result.rows()
    _emit(bench.render_table(rows, s["format"]), s.get("output"))
    return EXIT_OK


def _run_simulate(s):
    run = generate_run(_instance(s), s["seed"], s["run_index"])
    write_labels(s["output"], run.answers)
    if s.get("gold"):
        write_gold(s["gold"], run.truth, answers=run.answers)
    if s.get("theta_output"):
        rows = [{"worker_id": f"w{k:0{len(str(run.n - 1))}d}", "theta": repr(float(v))}
                for k, v in enumerate(run.theta)]
        _emit(bench.render_table(rows, "csv"), s["theta_output"])
    return EXIT_OK


def _run_estimate(s):
    rows = bench.cmd_estimate(s["labels"], _labels_config(s), s["min_worker_labels"], s.get("snapshot"))
    _emit(bench.render_table(rows, s["format"]), s.get("output"))
    return EXIT_OK


def _run_predict(s):
    report = bench.cmd_predict(s["labels"], s.get("gold"), _labels_config(s), s["min_worker_labels"], s["seed"])
    _emit(bench.render_table(report.rows, s["format"]), s.get("output"))
    summary = {"tasks": len(report.rows), "tied_tasks_te": report.tied_tasks}
    if report.te_error is not None:
        summary.update(gold_tasks=report.gold_tasks, te_error=report.te_error,
                       majority_error=report.majority_error)
    stream = sys.stderr if not s.get("output") else sys.stdout
    print(json.dumps(summary), file=stream)
    return EXIT_OK


def _run_bounds(s):
    constants = {}
    for item in s.get("set_constant") or []:
        name, _, value = item.partition("=")
        if not value:
            raise UsageError(f"--set-constant expects NAME=VALUE, got {item!r}")
        constants[name] = float(value)
    sweeps = tuple(x.strip() for x in s["sweeps"].split(",") if x.strip())
    rows, code = bench.cmd_bounds(sweeps, constants or None, s["trials"], s["seed"])
    _emit(bench.render_table(rows, s["format"]), s.get("output"))
    failed = sum(1 for r in rows if not r["satisfied"] and not r["vacuous"])
    log.info("%d rows, %d violations", len(rows), failed)
    if code != EXIT_OK:
        print(f"bound violated at {failed} grid point(s)", file=sys.stderr)
    return code


COMMANDS = {
    "bench": _run_bench,
    "simulate": _run_simulate,
    "estimate": _run_estimate,
    "predict": _run_predict,
    "bounds": _run_bounds,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](_settings(args))
    except (UsageError, LabelFileError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"crowdte {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
