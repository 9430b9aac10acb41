"""Command-line entry point: ``simcrit test | simulate | estimate-pi1``.

Exit codes: 0 success, 2 data error, 64 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
import warnings

import jsonschema
import numpy as np

from . import baselines, simulate
from ._errors import DomainError
from .critical import ControlSpec, data_driven_critical, reject
from .fileio import DataError, read_groups, read_matrix, write_json, write_tsv
from .pi1 import GridSpec, estimate_pi1
from .tstats import Dataset, TwoSample, t_statistics

EXIT_OK = 0
EXIT_DATA = 2
EXIT_USAGE = 64
SCHEMA_VERSION = 1

logger = logging.getLogger("simcrit")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _probability(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (0.0 < v < 1.0):
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {text}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return v


def _grid(text: str):
    if text == "auto":
        return None
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid must be lo:hi:points")
    try:
        lo, hi, pts = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse grid {text!r}") from None
    if not (0 < lo < hi) or pts < 2:
        raise argparse.ArgumentTypeError(f"grid needs 0 < lo < hi and at least 2 points, got {text}")
    return GridSpec(lo, hi, pts)


def _pi1_arg(text: str):
    if text == "auto":
        return None
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--pi1 must be 'auto' or a number, got {text!r}") from None
    if not (0.0 <= v <= 1.0):
        raise argparse.ArgumentTypeError(f"--pi1 must lie in [0, 1], got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="simcrit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def data_args(p):
        p.add_argument("--input", required=True, help="feature-by-sample matrix (.tsv or .csv)")
        p.add_argument("--groups", help="one group label per matrix column (two-sample design)")

    p = sub.add_parser("test", help="critical value and rejection set for a data matrix")
    data_args(p)
    p.add_argument("--method", choices=["fdr", "fdtp", "kfwer"], default="fdr")
    p.add_argument("--gamma", type=_probability, default=0.05)
    p.add_argument("--alpha", type=_probability, help="FDP bound for --method fdtp")
    p.add_argument("--k", type=_positive_int, help="false-rejection count for --method kfwer")
    p.add_argument("--dependence", choices=["dependent", "independent"], default="dependent")
    p.add_argument("--pi1", type=_pi1_arg, default=None, metavar="auto|VALUE")
    p.add_argument("--grid", type=_grid, default=None, metavar="auto|LO:HI:POINTS")
    p.add_argument("--pvalues", choices=["t", "normal"], default="t")
    p.add_argument("--compare", action="store_true", help="also report BH and ST rejection counts")
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; unused")
    p.add_argument("--timing", action="store_true", help="add wall-clock timing to the summary")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", help="Monte-Carlo study driven by a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate-pi1", help="estimate the alternative proportion")
    data_args(p)
    p.add_argument("--grid", type=_grid, default=None, metavar="auto|LO:HI:POINTS")
    p.add_argument("--dump-grid", metavar="PATH", help="write the evaluated grid as TSV")
    p.set_defaults(func=cmd_estimate_pi1)
    return parser


def load_dataset(input_path, groups_path) -> Dataset:
    ids, samples, rows = read_matrix(input_path)
    values = np.array(rows, dtype=float)
    groups = read_groups(groups_path, len(samples)) if groups_path else None
    try:
        return Dataset(values, ids, groups)
    except DomainError as exc:
        raise DataError(str(exc)) from None


def _statistics(args):
    data = load_dataset(args.input, args.groups)
    tv = t_statistics(data)
    if tv.m == 0:
        raise DataError("no valid features: every row has zero variance")
    return data, tv


def _design_dict(tv) -> dict:
    d = tv.design
    if isinstance(d, TwoSample):
        return {"type": "two_sample", "n1": d.n1, "n2": d.n2}
    return {"type": "one_sample", "n": d.n}


def cmd_test(args) -> int:
    started = time.perf_counter()
    if args.method == "fdtp" and args.alpha is None:
        raise UsageError("--method fdtp requires --alpha")
    if args.method == "kfwer" and args.k is None:
        raise UsageError("--method kfwer requires --k")
    data, tv = _statistics(args)
    spec = ControlSpec(args.method, args.gamma, alpha=args.alpha if args.method == "fdtp" else None,
                       k=args.k if args.method == "kfwer" else None, dependence=args.dependence)
    est = None
    if args.pi1 is None:
        est = estimate_pi1(tv, args.grid)
        pi1 = est.pi1_hat
    else:
        pi1 = args.pi1
    if spec.method == "fdtp" and pi1 == 0.0 and spec.dependence == "dependent":
        logger.warning("alternative proportion estimated as 0; fdtp variance clipped")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cv = data_driven_critical(tv, pi1, spec)
    for w in caught:
        logger.warning("%s", w.message)
    decision = reject(tv, cv)
    pv = baselines.p_values(tv, args.pvalues)
    st_pi0 = baselines.storey_pi0(pv)
    q = baselines.q_values(pv, st_pi0.pi0_hat).q

    ids = data.ids()
    rows = []
    for i, fid in enumerate(ids):
        t = tv.stats[i]
        rows.append([fid, t, abs(t), int(decision.rejected[i]), pv.p[i], q[i]])
    features_path = f"{args.out}.features.tsv"
    write_tsv(features_path, ["feature_id", "t_stat", "abs_t", "rejected", "p_value", "q_value"], rows)

    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "test",
        "design": _design_dict(tv),
        "m_total": int(tv.stats.size),
        "m_valid": tv.m,
        "num_flagged": int(tv.flagged.sum()),
        "method": spec.method,
        "alpha": spec.alpha,
        "gamma": spec.gamma,
        "k": spec.k,
        "dependence": spec.dependence,
        "pi1_source": "estimated" if est is not None else "override",
        "pi1_hat": pi1,
        "pi1_used": cv.pi1_used,
        "c_star": est.c_star if est is not None else None,
        "t_hat": cv.t_hat,
        "num_rejected": decision.R,
        "flags": list(cv.flags),
        "features_file": os.path.basename(features_path),
    }
    if args.compare:
        bh = baselines.bh_procedure(pv, spec.gamma).rejected
        st = q <= spec.gamma
        ck = decision.rejected
        report["compare"] = {
            "pvalues": args.pvalues,
            "st_pi0_hat": st_pi0.pi0_hat,
            "bh_rejected": int(bh.sum()),
            "st_rejected": int(st.sum()),
            "ck_rejected": decision.R,
            "ck_contains_st": bool(np.all(ck[st])),
            "st_contains_bh": bool(np.all(st[bh])),
        }
    if args.timing:
        report["timing_seconds"] = time.perf_counter() - started
    write_json(f"{args.out}.summary.json", report)
    return EXIT_OK


def _load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(simulate.CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            where = "/".join([where] + extra) if where != "<root>" else "/".join(extra)
        raise DataError(f"{path}: config field '{where}': {err.message}")
    try:
        return doc, simulate.config_from_dict(doc), simulate.procedures_from_dict(doc)
    except DomainError as exc:
        raise DataError(f"{path}: {exc}") from None


def cmd_simulate(args) -> int:
    doc, cfg, procedures = _load_config(args.config)
    levels = doc.get("levels", [0.05, 0.1, 0.15, 0.2])
    grid = GridSpec(**doc["pi1_grid"]) if "pi1_grid" in doc else None
    evals = simulate.run_study(cfg, procedures, levels, grid)

    rows = []
    for ev in evals:
        for r in ev.records:
            rows.append([ev.procedure.label(), ev.level, r.rep, r.t_hat, r.pi1_hat,
                         r.R, r.V, r.S, r.m1, r.fdp, int(r.failed)])
    reps_path = f"{args.out}.reps.tsv"
    write_tsv(reps_path, ["procedure", "level", "rep", "t_hat", "pi1_hat", "R", "V", "S", "m1", "fdp", "failed"], rows)

    aggregates = [ev.summary() for ev in evals]
    curves_path = f"{args.out}.curves.tsv"
    write_tsv(curves_path, ["procedure", "nominal", "realized_fdr", "realized_fdtp", "realized_kfwer", "ndr"],
              [[a["procedure"], a["level"], a["fdr"], a["fdtp"], a["kfwer"], a["ndr"]] for a in aggregates])
    if doc.get("gold_standard"):
        for agg, ev in zip(aggregates, evals):
            if ev.procedure.kind in ("fdr", "fdtp", "kfwer") and cfg.reps >= 100:
                agg["gold_standard_t"] = simulate.gold_standard_critical(cfg, ev.procedure.spec(ev.level))
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "simulate",
        "config": doc,
        "pi1_true": cfg.pi1,
        "reps_file": os.path.basename(reps_path),
        "curves_file": os.path.basename(curves_path),
        "results": aggregates,
    }
    write_json(f"{args.out}.summary.json", summary)
    return EXIT_OK


def cmd_estimate_pi1(args) -> int:
    _, tv = _statistics(args)
    est = estimate_pi1(tv, args.grid)
    print(f"pi1_hat\t{est.pi1_hat:.17g}")
    print(f"c_star\t{est.c_star:.17g}")
    if args.dump_grid:
        write_tsv(args.dump_grid, ["c", "g_hat", "expected_g", "ratio"],
                  zip(est.c, est.g_hat, est.expected, est.ratio))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"simcrit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DomainError) as exc:
        print(f"simcrit: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
