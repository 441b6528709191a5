"""Command-line interface: ``addrtaint {simulate,taint,filter,evaluate,cluster}``.

Every input and output is a file (``--out`` defaults to stdout). Any error
exits with status 2.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io
from .chain import DAY, build_index
from .clustering import cluster_addresses, format_clusters
from .errors import AddrTaintError
from .evaluate import evaluate_case, render_report
from .filters import apply_filters, filter_verdicts, render_filter_report
from .case import deposit_value
from .sim import PRESETS, T1_CALIBRATION, preset, random_scenario, reference_chain_T1, simulate, with_seed
from .taint import METHODS, case_window, run_method

log = logging.getLogger("addrtaint")


def _days(x):
    return round(float(x) * DAY)


def _write(args, text):
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_chain(path):
    return build_index(io.iter_chain(path))


def _select_case(args):
    cases = io.load_cases(args.case)
    if args.case_id is None:
        if not cases:
            raise ValueError(f"{args.case}: no cases")
        return cases[0]
    for c in cases:
        if c.case_id == args.case_id:
            return c
    raise ValueError(f"{args.case}: no case with id {args.case_id!r}")


def _calibrations(args):
    if args.calibration:
        return io.load_calibration(args.calibration)
    cals = io.load_service_calibration()
    cals["T1"] = T1_CALIBRATION
    return cals


def _windows(args):
    return dict(lookback=_days(args.lookback_days), horizon=_days(args.horizon_days),
                backtrace=_days(args.backtrace_days))


# subcommands

def cmd_simulate(args):
    out = Path(args.out)
    stem = out.with_suffix("")
    truth_path = Path(args.truth) if args.truth else stem.with_suffix(".truth.json")
    cases_path = Path(args.cases) if args.cases else stem.with_suffix(".cases.json")

    if args.scenario == "T1":
        txs, truth = reference_chain_T1()
    else:
        if args.scenario in PRESETS:
            scenario = preset(args.scenario)
        elif args.scenario == "random":
            scenario = random_scenario(args.seed or 0)
        else:
            scenario = io.load_scenario(args.scenario)
        if args.seed is not None:
            scenario = with_seed(scenario, args.seed)
        txs, truth = simulate(scenario)
    io.save_chain(txs, out)
    truth_path.write_text(io.dumps_truth(truth), encoding="utf-8")
    io.save_cases(truth.cases(), cases_path)
    log.info("wrote %d transactions to %s", len(txs), out)


def cmd_taint(args):
    chain = _load_chain(args.chain)
    case = _select_case(args)
    result = run_method(chain, case, args.method, **_windows(args))
    if args.format == "table":
        w = result.window
        text = (f"method   {result.method}\n"
                f"case     {case.case_id} ({case.service})\n"
                f"window   propagate [{w.taint_start}, {w.taint_end}]  count [{w.count_start}, {w.count_end}]\n"
                f"outputs  {len(result.tainted_outputs):,}\n"
                f"addresses {len(result.tainted_addresses):,}\n"
                f"targets  {'all found' if result.contains_all(case.targets) else 'missing'}\n")
    else:
        text = io.dumps_result(result)
    _write(args, text)


def cmd_filter(args):
    chain = _load_chain(args.chain)
    case = _select_case(args)
    cals = _calibrations(args)
    if case.service not in cals:
        raise ValueError(f"no calibration for service {case.service!r}")
    cal = cals[case.service]
    result = io.load_result(args.result)
    if args.format == "table":
        verdicts = filter_verdicts(chain, result.tainted_outputs, deposit_value(chain, case), cal)
        text = (f"applied criteria: {', '.join(cal.enabled()) or 'none'}\n"
                + render_filter_report(verdicts, "table"))
    else:
        text = io.dumps_result(apply_filters(chain, result, case, cal))
    _write(args, text)


def cmd_evaluate(args):
    chain = _load_chain(args.chain)
    cases = io.load_cases(args.case)
    cals = _calibrations(args)
    reports = [evaluate_case(chain, c, cals, **_windows(args)) for c in cases]
    _write(args, render_report(reports, args.format))


def cmd_cluster(args):
    chain = _load_chain(args.chain)
    case = _select_case(args)
    window = case_window(chain, case, _days(args.lookback_days), _days(args.horizon_days))
    partition = cluster_addresses(chain, window,
                                  input_sharing=args.kind in ("input", "both"),
                                  output_sharing=args.kind in ("output", "both"))
    _write(args, format_clusters(partition, args.format))


def build_parser():
    p = argparse.ArgumentParser(prog="addrtaint",
                                description="Address taint analysis for mixed bitcoins.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *, case=True, windows=True, fmt="jsonl"):
        sp.add_argument("--chain", required=True, help="chain file (JSON lines)")
        if case:
            sp.add_argument("--case", required=True, help="case file (JSON)")
            sp.add_argument("--case-id", help="case to use when the file holds several")
        if windows:
            sp.add_argument("--lookback-days", type=float, default=5)
            sp.add_argument("--horizon-days", type=float, default=3,
                            help="used when the case has no horizon of its own")
            sp.add_argument("--backtrace-days", type=float, default=3)
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--format", choices=("table", "jsonl"), default=fmt)

    sp = sub.add_parser("simulate", help="generate a chain with a simulated mixer")
    sp.add_argument("--scenario", default="D1",
                    help=f"scenario file, 'random', 'T1' or a preset: {', '.join(PRESETS)}")
    sp.add_argument("--seed", type=int, help="RNG seed (unsigned 64-bit)")
    sp.add_argument("--out", required=True, help="chain file to write")
    sp.add_argument("--truth", help="ground truth file (default: <out>.truth.json)")
    sp.add_argument("--cases", help="case file (default: <out>.cases.json)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("taint", help="run one tracking method on a case")
    common(sp)
    sp.add_argument("--method", choices=METHODS, required=True)
    sp.set_defaults(func=cmd_taint)

    sp = sub.add_parser("filter", help="apply a service's filtering criteria to a result")
    common(sp, windows=False)
    sp.add_argument("--result", required=True, help="result file written by 'taint'")
    sp.add_argument("--calibration", help="calibration file (default: built-in service table)")
    sp.set_defaults(func=cmd_filter)

    sp = sub.add_parser("evaluate", help="run every method on every case and report")
    common(sp, case=False, fmt="table")
    sp.add_argument("--case", required=True, help="case file (JSON)")
    sp.add_argument("--calibration", help="calibration file (default: built-in service table)")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("cluster", help="dump address clusters for a case's window")
    common(sp, fmt="table")
    sp.add_argument("--kind", choices=("input", "output", "both"), default="input")
    sp.set_defaults(func=cmd_cluster)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (AddrTaintError, OSError, ValueError, KeyError, json.JSONDecodeError) as e:
        print(f"addrtaint: error: {e}", file=sys.stderr)
        return 2
    return 0
