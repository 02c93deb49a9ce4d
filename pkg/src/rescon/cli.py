"""
Command-line front end.

    rescon validate table1_consensus
    rescon run table1_consensus --out runs/ --set horizon=200
    rescon compare table1_consensus
    rescon check-robustness table1_consensus --r 7
    rescon check-redundancy table1_optimization
    rescon check-sarymsakov matrix.yaml

Exit codes: 0 success, 2 usage error (including unknown override keys), 3 scenario validation failure,
4 runtime failure (e.g. empty safe kernel), 5 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from .analysis import StochasticMatrix, sarymsakov_witness
from .graph import check_r_robust, check_rs_robust
from .optimization import check_redundancy
from .scenario import (OVERRIDE_KEYS, ScenarioError, _edge, _graph_from_dict, apply_overrides, bundled_names,
                       bundled_path, is_override_key, load_scenario, read_raw, scenario_from_dict, validation_report)
from .simulator import SimulationError, compare_policies, run

log = logging.getLogger("rescon")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4
EXIT_IO = 5

OUT_ENV = "RESCON_OUT"


def _resolve(path: str) -> Path:
    p = Path(path)
    if not p.exists() and path in bundled_names():
        return bundled_path(path)
    if not p.exists():
        raise FileNotFoundError(f"no such scenario or file: {path}")
    return p


def _overrides(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs or ():
        k, v = pair.split("=", 1)
        out[k.strip()] = v
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, (set, frozenset, tuple)):
        return sorted(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _print_report(report: list[dict]) -> None:
    for r in report:
        tag = "PASS" if r["passed"] else ("FAIL" if r["enforced"] else "WARN")
        detail = r["detail"] if isinstance(r["detail"], str) else json.dumps(r["detail"], default=_json_default)
        print(f"  [{tag}] {r['id']:<13} {r['name']}: {detail}")


# ------------------------------------------------------------------ verbs

def cmd_validate(args, out: Path) -> int:
    raw = read_raw(_resolve(args.scenario))
    raw = apply_overrides(raw, _overrides(args.set))
    s = scenario_from_dict(raw)
    report = validation_report(s)
    _print_report(report)
    _write_json(out / "validation.json", {"scenario": s.name, "digest": s.digest(), "report": report})
    failed = [r for r in report if r["enforced"] and not r["passed"]]
    if failed:
        print(f"{s.name}: {len(failed)} enforced check(s) failed", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"{s.name}: valid")
    return EXIT_OK


def cmd_run(args, out: Path) -> int:
    s = load_scenario(_resolve(args.scenario), _overrides(args.set))
    log.info("running %s (%d rounds, policy %s)", s.name, s.horizon, s.policy)
    tr = run(s)
    tr.write_csv(out / "trace.csv")
    summary = tr.summary(args.tol)
    summary["validation"] = validation_report(s, check_definitions=False)
    _write_json(out / "summary.json", summary)
    print(f"final diameter {summary['final_diameter']}, validity {summary['validity']}, "
          f"rounds to {args.tol:g}: {summary['rounds_to_tolerance']}")
    return EXIT_OK


def cmd_compare(args, out: Path) -> int:
    s = load_scenario(_resolve(args.scenario), _overrides(args.set))
    res = compare_policies(s, args.tol)
    for policy, tr in res["traces"].items():
        tr.write_csv(out / f"trace_{policy}.csv")
    _write_json(out / "comparison.json", res["summary"])
    for policy in res["traces"]:
        row = res["summary"][policy]
        print(f"{policy}: final diameter {row['final_diameter']}, validity {row['validity']}, "
              f"agreement {row['agreement_point']}")
    return EXIT_OK


def cmd_check_robustness(args, out: Path) -> int:
    raw = read_raw(_resolve(args.graph))
    g = _graph_from_dict(raw["graph"] if "graph" in raw else raw)
    if args.drop_edge:
        g = g.with_edges(remove=[_edge(e) for e in args.drop_edge])
    r = args.r
    if r is None:
        if "d" not in raw or "F" not in raw:
            raise ScenarioError("--r is required when the file carries no d and F")
        r = (int(raw["d"]) + 1) * int(raw["F"]) + 1
    cert = check_rs_robust(g, r, args.s) if args.s is not None else check_r_robust(g, r)
    _write_json(out / "robustness.json", cert.to_dict())
    label = f"({r},{args.s})-robust" if args.s is not None else f"{r}-robust"
    print(f"{label}: {'holds' if cert.holds else 'does not hold'}"
          + ("" if cert.holds else f"; witness {[sorted(w) for w in cert.witness]}"))
    return EXIT_OK


def cmd_check_redundancy(args, out: Path) -> int:
    s = load_scenario(_resolve(args.scenario), _overrides(args.set), validate=False)
    if not s.costs:
        raise ScenarioError(f"scenario {s.name!r} has no cost functions")
    fs = [s.costs[i] for i in s.benign]
    r = s.F if args.r is None else args.r
    box = [tuple(args.box)] * s.d
    holds = check_redundancy(fs, r, box, args.resolution)
    cert = {"r": r, "holds": holds, "box": box, "resolution": args.resolution, "agents": s.benign}
    _write_json(out / "redundancy.json", cert)
    print(f"{r}-redundant on {box} at resolution {args.resolution:g}: {'holds' if holds else 'does not hold'}")
    return EXIT_OK


def _read_matrix(path: Path) -> np.ndarray:
    text = path.read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError:
        data = None
    if isinstance(data, dict):
        data = data.get("matrix", data.get("entries"))
    if isinstance(data, list):
        return np.array(data, dtype=float)
    return np.atleast_2d(np.loadtxt(path, dtype=float))


def cmd_check_sarymsakov(args, out: Path) -> int:
    try:
        A = StochasticMatrix(_read_matrix(_resolve(args.matrix)))
    except ValueError as exc:
        raise ScenarioError(f"invalid matrix: {exc}") from exc
    w = sarymsakov_witness(A)
    cert = {"holds": w is None, "witness": None if w is None else [sorted(w[0]), sorted(w[1])], "n": A.n}
    _write_json(out / "sarymsakov.json", cert)
    print("Sarymsakov: " + ("holds" if w is None else f"does not hold; witness {cert['witness']}"))
    return EXIT_OK


# ------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rescon", description="Resilient multi-dimensional consensus and "
                                "distributed optimization under agent and DoS attacks.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("scenario", help="scenario YAML file or bundled scenario name")
            sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                            help="override a scenario key; allowed: " + ", ".join(sorted(OVERRIDE_KEYS))
                            + ", costs.<agent>")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./rescon-out)")

    sp = sub.add_parser("validate", help="check every assumption and definition")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    for name, func, helptext in (("run", cmd_run, "simulate and write trace + summary"),
                                 ("compare", cmd_compare, "hold-last vs zero-substitute")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--tol", type=float, default=1e-2, help="diameter tolerance for rounds-to-tolerance")
        sp.set_defaults(func=func)

    sp = sub.add_parser("check-robustness", help="exhaustive r- or (r,s)-robustness check")
    sp.add_argument("graph", help="scenario or graph YAML file (or bundled scenario name)")
    sp.add_argument("--r", type=int, help="r (default (d+1)F+1 from the scenario)")
    sp.add_argument("--s", type=int, help="s for (r,s)-robustness")
    sp.add_argument("--drop-edge", action="append", metavar="I<-J", help="remove an edge before checking")
    common(sp, scenario=False)
    sp.set_defaults(func=cmd_check_robustness)

    sp = sub.add_parser("check-redundancy", help="grid oracle for objective redundancy")
    common(sp)
    sp.add_argument("--r", type=int, help="redundancy order (default F)")
    sp.add_argument("--box", type=float, nargs=2, default=(-2.0, 2.0), metavar=("LO", "HI"))
    sp.add_argument("--resolution", type=float, default=0.01)
    sp.set_defaults(func=cmd_check_redundancy)

    sp = sub.add_parser("check-sarymsakov", help="exhaustive Sarymsakov check of a row-stochastic matrix")
    sp.add_argument("matrix", help="file with dense rows (YAML list of lists or whitespace-separated)")
    common(sp, scenario=False)
    sp.set_defaults(func=cmd_check_sarymsakov)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for pair in getattr(args, "set", None) or ():
        key = pair.split("=", 1)[0].strip()
        if "=" not in pair or not is_override_key(key):
            parser.error(f"bad override {pair!r}; allowed keys: {', '.join(sorted(OVERRIDE_KEYS))}")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        out = Path(args.out or os.environ.get(OUT_ENV) or "rescon-out")
        out.mkdir(parents=True, exist_ok=True)
        return args.func(args, out)
    except ScenarioError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        if exc.report:
            _print_report([r for r in exc.report if not r["passed"]])
        return EXIT_VALIDATION
    except SimulationError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
