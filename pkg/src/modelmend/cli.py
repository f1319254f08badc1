"""Batch front end: load inputs, run propagation, write report + repaired model.

Exit codes: 0 = plan(s) found, 1 = input error (with file diagnostics),
2 = no plan within the depth bound. With ``--server`` the CLI becomes a thin
client of a running service; outputs and exit codes are identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .core import (
    CostConfig,
    ModelError,
    metamodel_from_dict,
    model_from_dict,
    model_to_dict,
    parse_costs,
    script_from_list,
)
from .dsl import ParseError, ResolutionError, parse_constraint_file
from .run import METRICS, RunConfig, execute_run, report_bytes
from .search import STRATEGIES, SearchConfig


class InputError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 1 on unknown flags / bad values
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="modelmend", description=__doc__.splitlines()[0])
    parser.add_argument("--metamodel", required=True, metavar="FILE")
    parser.add_argument("--constraints", required=True, metavar="FILE")
    parser.add_argument("--model", required=True, metavar="FILE")
    parser.add_argument("--changes", required=True, metavar="FILE")
    parser.add_argument("--strategy", choices=STRATEGIES, default="astar")
    parser.add_argument("--costs", default="", metavar="KIND=COST,...", help="e.g. create=1,delete=3,setattr=1")
    parser.add_argument("--max-depth", type=int, default=8)
    parser.add_argument("--k", type=int, default=1)
    parser.add_argument("--check-postulates", action="store_true")
    parser.add_argument("--oracle-bound", type=int, default=3)
    parser.add_argument("--metric", choices=METRICS, default="structural")
    parser.add_argument("--heuristic", choices=("admissible", "weighted"), default="admissible")
    parser.add_argument("--out", default=".", metavar="DIR")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--server", default=None, metavar="URL", help="POST to a running service instead of running in-process")
    return parser


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc


def _read_json(path: str):
    text = _read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _run_config(args: argparse.Namespace) -> RunConfig:
    costs = parse_costs(args.costs, CostConfig())
    return RunConfig(
        search=SearchConfig(
            strategy=args.strategy,
            costs=costs,
            max_depth=args.max_depth,
            k=args.k,
            heuristic=args.heuristic,
        ),
        metric=args.metric,
        check_postulates=args.check_postulates,
        oracle_bound=args.oracle_bound,
        seed=args.seed,
        threads=args.threads,
    )


def _run_local(args: argparse.Namespace) -> tuple[int, dict]:
    mm_doc = _read_json(args.metamodel)
    model_doc = _read_json(args.model)
    changes_doc = _read_json(args.changes)
    constraints_text = _read_text(args.constraints)
    try:
        mm = metamodel_from_dict(mm_doc)
    except ModelError as exc:
        raise InputError(f"{args.metamodel}: {exc}") from exc
    try:
        model = model_from_dict(model_doc, mm)
    except ModelError as exc:
        raise InputError(f"{args.model}: {exc}") from exc
    try:
        constraints = parse_constraint_file(constraints_text, mm)
    except (ParseError, ResolutionError) as exc:
        raise InputError(f"{args.constraints}: {exc}") from exc
    try:
        script = script_from_list(changes_doc)
    except (ModelError, TypeError) as exc:
        raise InputError(f"{args.changes}: {exc}") from exc
    cfg = _run_config(args)
    try:
        outcome = execute_run(mm, model, constraints, script, cfg)
    except ModelError as exc:
        raise InputError(str(exc)) from exc
    return outcome.exit_code, outcome.report


def _run_remote(args: argparse.Namespace) -> tuple[int, dict]:
    import httpx

    payload = {
        "metamodel": _read_json(args.metamodel),
        "model": _read_json(args.model),
        "constraints": _read_text(args.constraints),
        "changes": _read_json(args.changes),
        "config": {
            "strategy": args.strategy,
            "costs": _costs_payload(args.costs),
            "max_depth": args.max_depth,
            "k": args.k,
            "heuristic": args.heuristic,
            "metric": args.metric,
            "check_postulates": args.check_postulates,
            "oracle_bound": args.oracle_bound,
            "seed": args.seed,
            "threads": args.threads,
        },
    }
    response = httpx.post(args.server.rstrip("/") + "/propagate", json=payload, timeout=300.0)
    if response.status_code != 200:
        raise InputError(f"server returned {response.status_code}: {response.text}")
    report = response.json()
    return (0 if report.get("status") == "ok" else 2), report


def _costs_payload(spec: str) -> dict:
    costs = parse_costs(spec, CostConfig())
    from .report import render_cost

    return {k: render_cost(costs.of_kind(k)) for k in ("create", "delete", "addlink", "removelink", "setattr")}


def _write_outputs(report: dict, out_dir: str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "report.json"
    report_path.write_bytes(report_bytes(report))
    if report.get("status") == "ok" and report.get("plans"):
        model_doc = report["plans"][0]["result_model"]
        (out / "repaired_model.json").write_text(
            json.dumps(model_doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
    return report_path


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.server:
            code, report = _run_remote(args)
        else:
            code, report = _run_local(args)
    except InputError as exc:
        print(f"modelmend: error: {exc}", file=sys.stderr)
        return 1
    report_path = _write_outputs(report, args.out)
    if code == 0:
        plans = report.get("plans", [])
        cost = plans[0]["cost"] if plans else "0"
        print(f"plan found: cost {cost}, {len(plans[0]['actions'])} action(s); report: {report_path}")
    else:
        print(f"no plan within depth bound; diagnostics: {report_path}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
