"""Command-line driver.

Subcommands ``simulate``, ``sweep``, ``reliability`` and ``overhead`` print
CSV to stdout (or ``--out``). Exit status is 0 on success, 1 when a run
fails, and 2 for usage or configuration errors.

Configuration files are INI style, one section per component::

    [accelerator]
    chips = 1
    tiles_per_chip = 4

    [trace]
    burst_length = 1000
    gap_length = 400

Every key is optional and defaults to the evaluated system; unknown
sections or keys are rejected.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import logging
import os
import sys
from dataclasses import dataclass, field, replace

from . import reliability
from .accel import AcceleratorConfig, InputTrace, RunReport, SweepAxis, run_trace, sweep
from .dataprep import SumMode, ValueLayout, storage_overhead
from .errors import ConfigurationError, DomainError, EnumerationTooLarge, FatPimError
from .faults import FaultScenario
from .pipeline import AdcSpec
from .xbar import CrossbarConfig

log = logging.getLogger("fatpim")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

METRIC_COLUMNS = [
    "throughput", "completed_results", "flagged_results", "flagged_fraction",
    "truly_faulty", "missed", "false_positives", "correction_events", "stalls",
    "host_interrupts", "permanently_faulty", "total_cycles",
]


class UsageError(Exception):
    pass


# --- configuration ------------------------------------------------------------

def _bool(text: str) -> bool:
    key = text.strip().lower()
    if key in ("1", "true", "yes", "on"):
        return True
    if key in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


def _optional_int(text: str):
    return None if text.strip().lower() in ("", "none") else int(text)


# section -> key -> (parser, target, attribute)
SCHEMA = {
    "accelerator": {
        "chips": (int, "accel", "chips"),
        "tiles_per_chip": (int, "accel", "tiles_per_chip"),
        "imas_per_tile": (int, "accel", "imas_per_tile"),
        "crossbars_per_ima": (int, "accel", "crossbars_per_ima"),
        "read_latency_ns": (float, "accel", "read_latency_ns"),
        "write_latency_ns": (float, "accel", "write_latency_ns"),
        "fatpim": (_bool, "accel", "fatpim_enabled"),
        "correction": (_bool, "accel", "correction_enabled"),
        "retry_limit": (int, "accel", "reprogram_retry_limit"),
        "clock_hz": (float, "accel", "clock_hz"),
        "threshold": (_optional_int, "accel", "threshold"),
        "check_inputs": (_bool, "accel", "check_inputs"),
        "start_stagger_cycles": (int, "accel", "start_stagger_cycles"),
    },
    "crossbar": {
        "rows": (int, "crossbar", "rows"),
        "data_cols": (int, "crossbar", "data_cols"),
        "sum_cols": (int, "crossbar", "sum_cols"),
        "bits_per_cell": (int, "crossbar", "bits_per_cell"),
        "write_noise_sigma": (float, "crossbar", "write_noise_sigma"),
    },
    "layout": {
        "value_bits": (int, "layout", "value_bits"),
        "sum_mode": (SumMode.parse, "layout", "sum_mode"),
    },
    "adc": {
        "resolution_bits": (int, "adc", "resolution_bits"),
        "samples_per_second": (float, "adc", "samples_per_second"),
        "count_per_ima": (int, "adc", "count_per_ima"),
    },
    "trace": {
        "burst_length": (int, "trace", "burst_length"),
        "gap_length": (int, "trace", "gap_length"),
        "total_cycles": (_optional_int, "trace", "total_cycles"),
        "input_value_bits": (int, "trace", "input_value_bits"),
        "vectors_per_crossbar": (_optional_int, "trace", "vectors_per_crossbar"),
    },
    "faults": {
        "fit_per_cell_per_hour": (float, "faults", "fit_per_cell_per_hour"),
        "delay_hours": (float, "faults", "delay_after_programming"),
        "inject_during_run": (_bool, "faults", "inject_during_run"),
    },
    "seeds": {
        "weights": (int, "seeds", "weights"),
        "inputs": (int, "seeds", "inputs"),
        "faults": (int, "seeds", "faults"),
    },
}


@dataclass
class RunSetup:
    config: AcceleratorConfig = field(default_factory=AcceleratorConfig)
    trace: InputTrace = field(default_factory=InputTrace)
    scenario: FaultScenario = field(default_factory=FaultScenario)
    weights_seed: int = 0
    inputs_seed: int = 1


def load_config(path: str | None, environ=os.environ) -> RunSetup:
    """Build a :class:`RunSetup` from an INI file (``None`` gives the defaults)."""
    parts = {"accel": {}, "crossbar": {}, "layout": {}, "adc": {}, "trace": {}, "faults": {}, "seeds": {}}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
        except configparser.Error as exc:
            raise ConfigurationError(f"malformed config {path}: {exc}") from None
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigurationError(f"unknown section [{section}]")
            for key, raw in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigurationError(f"unknown key '{key}' in [{section}]")
                conv, target, attr = SCHEMA[section][key]
                try:
                    parts[target][attr] = conv(raw)
                except (ValueError, ConfigurationError) as exc:
                    raise ConfigurationError(f"[{section}] {key}: {exc}") from None

    seeds = {"weights": 0, "inputs": 1, "faults": 0, **parts.pop("seeds")}
    env_seed = environ.get("FATPIM_SEED")
    if env_seed not in (None, ""):
        try:
            base = int(env_seed)
        except ValueError:
            raise ConfigurationError(f"FATPIM_SEED must be an integer, got {env_seed!r}") from None
        seeds = {"weights": base, "inputs": base + 1, "faults": base + 2}

    crossbar = CrossbarConfig(**parts["crossbar"])
    layout = ValueLayout(data_cols=crossbar.data_cols, bits_per_cell=crossbar.bits_per_cell, **parts["layout"])
    adc = AdcSpec(**parts["adc"])
    config = AcceleratorConfig(crossbar=crossbar, layout=layout, adc=adc, **parts["accel"])
    trace = InputTrace(**parts["trace"])
    # faults accumulate for an hour before operation unless told otherwise
    parts["faults"].setdefault("delay_after_programming", 1.0)
    scenario = FaultScenario(rng_seed=seeds["faults"], **parts["faults"])
    return RunSetup(config, trace, scenario, seeds["weights"], seeds["inputs"])


# --- CSV ---------------------------------------------------------------------

def fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".12g")
    if value is None:
        return ""
    return str(value)


def write_csv(header, rows, out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])


def report_metrics(rep: RunReport) -> list:
    return [
        rep.throughput, rep.completed_results, rep.flagged_results, rep.flagged_fraction,
        rep.truly_faulty_results, rep.missed_detections, rep.false_positives,
        rep.correction_events, rep.stall_cycles, rep.host_interrupts,
        rep.permanently_faulty_crossbars, rep.total_cycles,
    ]


def _emit(args, header, rows) -> None:
    if args.out:
        buf = io.StringIO()
        write_csv(header, rows, buf)
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        write_csv(header, rows, sys.stdout)


# --- subcommands ---------------------------------------------------------------

def _parse_pair(text: str) -> tuple[int, int]:
    sep = ":" if ":" in text else ","
    try:
        x, y = (int(p) for p in text.split(sep))
    except ValueError:
        raise UsageError(f"trace must look like X,Y or X:Y, got {text!r}") from None
    return x, y


def _apply_overrides(setup: RunSetup, args) -> RunSetup:
    cfg, trace = setup.config, setup.trace
    if getattr(args, "fatpim", None) is not None:
        cfg = replace(cfg, fatpim_enabled=args.fatpim)
    if getattr(args, "correction", None) is not None:
        cfg = replace(cfg, correction_enabled=args.correction)
    if getattr(args, "trace", None):
        x, y = _parse_pair(args.trace)
        trace = replace(trace, burst_length=x, gap_length=y)
    if getattr(args, "cycles", None) is not None:
        trace = replace(trace, total_cycles=args.cycles)
    return replace(setup, config=cfg, trace=trace)


def _summary(label: str, rep: RunReport) -> None:
    print(
        f"{label}: {rep.completed_results} results in {rep.total_cycles:.0f} cycles "
        f"(throughput {rep.throughput:.6g}/cycle), {rep.flagged_results} flagged, "
        f"{rep.correction_events} corrections",
        file=sys.stderr,
    )


def cmd_simulate(args) -> int:
    setup = _apply_overrides(load_config(args.config), args)
    rep = run_trace(setup.config, setup.trace, setup.scenario, setup.weights_seed,
                    setup.inputs_seed, workers=args.workers)
    header = ["run_id", "fatpim", "trace", "fit_per_cell_per_hour"] + METRIC_COLUMNS
    row = ["simulate-0", setup.config.fatpim_enabled, setup.trace.name,
           setup.scenario.fit_per_cell_per_hour] + report_metrics(rep)
    _emit(args, header, [row])
    _summary(setup.trace.name, rep)
    return EXIT_OK


def _sweep_values(axis: SweepAxis, text: str) -> list:
    items = [v.strip() for v in text.split(",") if v.strip()] if axis is not SweepAxis.TRACE else \
        [v.strip() for v in text.split(";") if v.strip()]
    if not items:
        raise UsageError("--values is empty")
    try:
        if axis is SweepAxis.TRACE:
            return [_parse_pair(v) for v in items]
        if axis is SweepAxis.SUM_COLS:
            return [int(v) for v in items]
        return [float(v) for v in items]
    except ValueError:
        raise UsageError(f"bad value list for {axis.value}: {text!r}") from None


def cmd_sweep(args) -> int:
    try:
        axis = SweepAxis(args.axis)
    except ValueError:
        raise UsageError(f"unknown axis {args.axis!r}; choose from "
                         + ", ".join(a.value for a in SweepAxis)) from None
    values = _sweep_values(axis, args.values)
    setup = _apply_overrides(load_config(args.config), args)
    rows_out = sweep(setup.config, axis, values, setup.trace, setup.scenario,
                     setup.weights_seed, setup.inputs_seed, workers=args.workers)
    header = ["run_id", "axis", "value"] + METRIC_COLUMNS + ["error"]
    rows = []
    failed = False
    for idx, row in enumerate(rows_out):
        value = f"{row.value[0]}:{row.value[1]}" if axis is SweepAxis.TRACE else row.value
        if row.report is None:
            failed = True
            rows.append([f"sweep-{idx}", axis.value, value] + [None] * len(METRIC_COLUMNS) + [row.error])
        else:
            rows.append([f"sweep-{idx}", axis.value, value] + report_metrics(row.report) + [""])
            _summary(f"{axis.value}={value}", row.report)
    _emit(args, header, rows)
    return EXIT_FAILURE if failed else EXIT_OK


def _require(args, names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError("missing parameters: " + ", ".join("--" + n for n in missing))


def cmd_reliability(args) -> int:
    if args.lemma:
        _require(args, ["delta", "sigma"])
        n = reliability.lemma_max_n(args.delta, args.sigma, args.confidence)
        header = ["analysis", "delta", "sigma", "confidence_sigmas", "max_n", "confidence"]
        rows = [["lemma", args.delta, args.sigma, args.confidence, n,
                 reliability.lemma_confidence(args.confidence)]]
    elif args.misdetect:
        _require(args, ["p", "m", "w", "i", "N", "s"])
        joint, cond = reliability.missed_detection_probability(
            args.p, args.m, args.w, args.i, args.N, args.s, args.case)
        header = ["analysis", "p", "m", "w", "i", "N", "s", "case", "joint", "conditional"]
        rows = [["misdetect", args.p, args.m, args.w, args.i, args.N, args.s,
                 reliability.FaultCase.parse(args.case).value, joint, cond]]
    elif args.bruteforce:
        _require(args, ["n", "w", "m", "i", "N"])
        layout_bits = args.k if args.k is not None else 2 * args.m
        layout = ValueLayout(value_bits=layout_bits, bits_per_cell=args.m, data_cols=args.w)
        cfg = CrossbarConfig(rows=args.n, data_cols=args.w, sum_cols=layout.sum_cols, bits_per_cell=args.m)
        res = reliability.brute_force_missed_detection(cfg, layout, args.N, args.i,
                                                      rng_seed=args.seed, budget=args.budget)
        header = ["analysis", "n", "w", "m", "i", "N", "undetected", "missed", "total",
                  "exact_conditional_probability", "disagreements"]
        rows = [["bruteforce", args.n, args.w, args.m, args.i, args.N, res.undetected, res.missed,
                 res.total, res.exact_conditional_probability, res.disagreements]]
    else:
        _require(args, ["n", "sigma", "delta", "trials"])
        res = reliability.detection_monte_carlo(args.n, args.sigma, args.delta, args.trials,
                                                args.magnitude, args.seed)
        header = ["analysis", "n", "sigma", "delta", "trials", "magnitude", "seed",
                  "false_positives", "false_positive_rate", "detections", "detection_rate"]
        rows = [["montecarlo", args.n, args.sigma, args.delta, args.trials, args.magnitude, args.seed,
                 res.false_positives, res.false_positive_rate, res.detections, res.detection_rate]]
    _emit(args, header, rows)
    return EXIT_OK


def cmd_overhead(args) -> int:
    try:
        layout = ValueLayout(value_bits=args.k, bits_per_cell=args.m, data_cols=args.w, sum_mode=args.mode)
    except ConfigurationError as exc:
        raise UsageError(str(exc)) from None
    ov = storage_overhead(layout)
    header = ["w", "m", "k", "mode", "v", "b", "sum_cols", "overhead", "overhead_unrounded"]
    rows = [[args.w, args.m, args.k, layout.sum_mode.value, ov.values_per_wordline,
             ov.sum_value_bits, ov.sum_cols, ov.fraction, ov.unrounded_fraction]]
    _emit(args, header, rows)
    return EXIT_OK


# --- argument parsing ------------------------------------------------------------

def _onoff(text: str) -> bool:
    try:
        return _bool(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fatpim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_options(p):
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--out", help="write CSV here instead of stdout")
        p.add_argument("--fatpim", type=_onoff, help="on/off")
        p.add_argument("--correction", type=_onoff, help="on/off")
        p.add_argument("--trace", help="X,Y for App_X_Y")
        p.add_argument("--cycles", type=int, help="measurement horizon in cycles")
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("simulate", help="run one trace")
    run_options(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="vary one parameter")
    run_options(p)
    p.add_argument("--axis", required=True, help="adc_rate, sum_cols, trace or fit")
    p.add_argument("--values", required=True,
                   help="comma separated; for the trace axis use X:Y pairs separated by ';'")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reliability", help="analytic and Monte Carlo reliability")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--lemma", action="store_true")
    mode.add_argument("--misdetect", action="store_true")
    mode.add_argument("--bruteforce", action="store_true")
    mode.add_argument("--montecarlo", action="store_true")
    p.add_argument("--out")
    p.add_argument("--delta", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--confidence", type=float, default=6.0)
    p.add_argument("--p", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--w", type=int)
    p.add_argument("--i", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--k", type=int, help="value bits for --bruteforce (default 2m)")
    p.add_argument("--case", default="same_bitline")
    p.add_argument("--n", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--magnitude", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=5_000_000)
    p.set_defaults(func=cmd_reliability)

    p = sub.add_parser("overhead", help="checksum storage overhead")
    p.add_argument("--w", type=int, default=128)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--k", type=int, default=16)
    p.add_argument("--mode", default="value")
    p.add_argument("--out")
    p.set_defaults(func=cmd_overhead)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", 1) is not None and getattr(args, "workers", 1) < 1:
        print("fatpim: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigurationError, DomainError, EnumerationTooLarge) as exc:
        print(f"fatpim: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FatPimError as exc:
        print(f"fatpim: run failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
