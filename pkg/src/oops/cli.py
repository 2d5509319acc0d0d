"""Command line: run curricula, replay frozen code, check anchors, dump the table."""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .anchors import compute_anchors
from .core_state import CodeStore
from .driver import CeilingReached, ConfigError, Driver, parse_config
from .instructions import OpcodeTable
from .interpreter import Machine
from .tasks import SUITES, make_task

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_STOPPED = 3


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _dumps(obj) -> str:
    return json.dumps(obj, default=_jsonable, sort_keys=True)


def results_root(default: Path) -> Path:
    env = os.environ.get("OOPS_RESULTS_DIR")
    return Path(env) if env else default


def cmd_run(args) -> int:
    path = Path(args.config)
    try:
        raw = path.read_bytes()
    except OSError as e:
        print(f"error: cannot read config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(raw.decode(), path.parent)
        if args.ceiling is not None:
            cfg.ceiling = args.ceiling
            cfg.validate()
    except (ConfigError, UnicodeDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    out = results_root(Path(args.out))
    out.mkdir(parents=True, exist_ok=True)
    results_path = out / "results.jsonl"
    snapshot_path = out / "snapshot.json"
    trace = open(args.trace, "a") if args.trace else None
    results = open(results_path, "a")

    def emit(event: dict) -> None:
        if event.get("event") in ("task-report", "suite", "lsearch-report"):
            results.write(_dumps(event) + "\n")
            results.flush()
        if trace is not None:
            trace.write(_dumps(event) + "\n")

    try:
        driver = Driver(cfg, on_event=emit)
    except Exception as e:  # declaration errors surface here
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if trace is not None:
        driver.vm.trace = lambda task, ip, op, cost, kind: trace.write(
            _dumps({"event": "step", "task": task, "ip": ip, "op": op, "cost": cost, "outcome": kind}) + "\n")
    if args.resume:
        try:
            driver.resume(json.loads(Path(args.resume).read_text()))
        except (OSError, ValueError) as e:
            print(f"error: cannot resume: {e}", file=sys.stderr)
            return EXIT_CONFIG

    emit_manifest = {
        "event": "manifest",
        "version": __version__,
        "config": str(path),
        "config_digest": hashlib.sha256(raw).hexdigest(),
        "results": str(results_path),
        "snapshot": str(snapshot_path),
        "resumed_from": args.resume,
    }
    results.write(_dumps(emit_manifest) + "\n")

    def on_task(drv: Driver) -> None:
        if cfg.snapshot_every and drv.next_task % cfg.snapshot_every == 0:
            drv.write_snapshot(snapshot_path)
        if not args.quiet and drv.reports:
            r = drv.reports[-1]
            print(f"task {r.task_index + 1}: {r.suite} n={r.n} {r.outcome} T={r.T} "
                  f"steps={r.total_steps} code=({r.code})", flush=True)

    status = EXIT_OK
    try:
        driver.run_curriculum(on_task=on_task)
        print(f"done: {driver.next_task} tasks, {driver.total_steps} steps")
    except (CeilingReached, KeyboardInterrupt) as e:
        status = EXIT_STOPPED
        reason = str(e) or "interrupted"
        print(f"stopped: {reason}; snapshot at {snapshot_path}", file=sys.stderr)
        results.write(_dumps({"event": "stopped", "reason": reason, "next_task": driver.next_task,
                              "total_steps": driver.total_steps}) + "\n")
    finally:
        driver.write_snapshot(snapshot_path)
        results.close()
        if trace is not None:
            trace.close()
    return status


def cmd_replay(args) -> int:
    try:
        snap = json.loads(Path(args.snapshot).read_text())
        store = CodeStore.from_dict(snap)
        decls = Path(args.declarations).read_text() if args.declarations else ""
        vm = Machine(declarations=decls)
        vm.load_store(store)
        a, _, b = args.range.partition(":")
        start, end = int(a), int(b)
        if not 1 <= start <= end <= vm.store.a_frozen:
            raise ValueError(f"range {args.range} outside frozen code 1..{vm.store.a_frozen}")
        task = make_task(args.suite, args.n)
    except (OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    drv = snap.get("driver") or {}
    pattern = [int(x) for x in drv["pattern"]] if drv.get("pattern") else None
    tp = vm.new_tape(task, 1, pattern)
    report = vm.run_frozen(tp, start, end, limit=args.limit)
    report.update({"suite": args.suite, "n": args.n, "range": [start, end],
                   "code": vm.table.decode(vm.store.q[start : end + 1])})
    print(_dumps(report))
    return EXIT_OK if report["solved"] else EXIT_FAIL


def cmd_verify_anchors(args) -> int:
    anchors = compute_anchors()
    for a in anchors:
        print(a.line())
    return EXIT_OK if all(a.ok for a in anchors) else EXIT_FAIL


def cmd_dump_table(args) -> int:
    table = OpcodeTable(CodeStore())
    last = table.size if args.all else 73
    for e in table.entries[1 : last + 1]:
        print(f"{e.number}: {e.mnemonic}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oops", description="Incremental program search engine")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a task curriculum")
    r.add_argument("--config", required=True)
    r.add_argument("--resume", help="snapshot to resume from")
    r.add_argument("--ceiling", type=int, help="global step ceiling")
    r.add_argument("--trace", help="append every search event and step to this JSONL file")
    r.add_argument("--out", default="oops-results", help="output directory (OOPS_RESULTS_DIR overrides)")
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=cmd_run)

    rp = sub.add_parser("replay", help="run frozen code on a fresh task")
    rp.add_argument("--snapshot", required=True)
    rp.add_argument("--range", required=True, help="A:B code addresses")
    rp.add_argument("--suite", required=True, choices=sorted(SUITES))
    rp.add_argument("--n", type=int, required=True)
    rp.add_argument("--declarations", help="extra declaration file used by the run")
    rp.add_argument("--limit", type=int, default=10**9, help="step limit")
    rp.set_defaults(func=cmd_replay)

    va = sub.add_parser("verify-anchors", help="recompute the reference probabilities")
    va.set_defaults(func=cmd_verify_anchors)

    dt = sub.add_parser("dump-table", help="print opcode numbers and mnemonics")
    dt.add_argument("--all", action="store_true", help="include opcodes above 73")
    dt.set_defaults(func=cmd_dump_table)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
