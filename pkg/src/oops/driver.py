"""Outer loops: incremental solver with two half-budget branches, the
latest-task-only variant, and a plain phase-doubling reference search."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

from .core_state import CodeStore
from .instructions import BIAS_SHIFTERS
from .interpreter import Machine
from .search import Searcher
from .tasks import Task, default_schedule, make_task, parse_task_file

HALF = Fraction(1, 2)
MODES = ("universal-solver", "optimize-latest", "lsearch-reference")
DEFAULT_BOOSTS = {
    "onetwon": ["c1", "c2", "by2", "dec", "boostq"],
    "hanoi": ["c3", "c4", "c5", "by2", "dec", "boostq"],
}


class ConfigError(ValueError):
    pass


class CeilingReached(RuntimeError):
    pass


@dataclass
class DriverConfig:
    mode: str = "universal-solver"
    tasks: list[tuple[str, int]] = field(default_factory=default_schedule)
    boosts: dict[str, list[str]] = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_BOOSTS.items()})
    t_initial: int = 2
    growth: int = 2
    ceiling: int = 10**11
    snapshot_every: int = 1
    declarations: str = ""

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.t_initial < 1:
            raise ConfigError("t_initial must be at least 1")
        if self.growth < 2:
            raise ConfigError("growth must be at least 2")
        if self.ceiling < 1:
            raise ConfigError("ceiling must be positive")
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be non-negative")


def _int(key: str, value: str) -> int:
    try:
        return int(float(value)) if "e" in value.lower() else int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def parse_config(text: str, base_dir: Path | None = None) -> DriverConfig:
    """key = value lines. Keys: mode, tasks (file path or inline
    ``suite a-b, suite n``), boost.<suite>, t_initial, growth, ceiling,
    snapshot_every, declarations (file path)."""
    base_dir = base_dir or Path(".")
    cfg = DriverConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "mode":
            cfg.mode = value
        elif key == "tasks":
            cfg.tasks = _parse_tasks(value, base_dir)
        elif key.startswith("boost."):
            cfg.boosts[key[6:]] = value.split()
        elif key in ("t_initial", "growth", "ceiling", "snapshot_every"):
            setattr(cfg, key, _int(key, value))
        elif key == "declarations":
            path = base_dir / value
            try:
                cfg.declarations = path.read_text()
            except OSError as e:
                raise ConfigError(f"declarations: {e}") from None
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    cfg.validate()
    return cfg


def _parse_tasks(value: str, base_dir: Path) -> list[tuple[str, int]]:
    path = base_dir / value
    try:
        if path.is_file():
            return parse_task_file(path.read_text())
        out = []
        for part in value.split(","):
            suite, span = part.split()
            lo, _, hi = span.partition("-")
            out += [(suite, n) for n in range(int(lo), int(hi or lo) + 1)]
        parse_task_file("\n".join(f"{s} {n}" for s, n in out))
        return out
    except ValueError as e:
        raise ConfigError(f"tasks: {e}") from None


@dataclass
class PhaseLog:
    T: int
    branch1_steps: int = 0
    branch2_steps: int = 0
    init_cost: int = 0
    outcome: str = "none"


@dataclass
class PhaseReport:
    task_index: int
    suite: str
    n: int
    outcome: str
    T: int
    branch1_steps: int
    branch2_steps: int
    total_steps: int
    frozen: tuple[int, int] | None
    code: str
    bias_degree: str
    phases: list[PhaseLog]

    def to_json(self) -> dict:
        d = asdict(self)
        d["event"] = "task-report"
        return d


class Driver:
    def __init__(self, config: DriverConfig | None = None, vm: Machine | None = None,
                 on_event=None) -> None:
        self.config = config or DriverConfig()
        self.vm = vm or Machine(declarations=self.config.declarations)
        self.on_event = on_event
        self.pattern = self.vm.base_pattern()
        self.boost_deltas: list[tuple[int, int]] = []
        self.total_steps = 0
        self.next_task = 0
        self.suite: str | None = None
        self.suite_start = 0
        self.suite_tasks: list[Task] = []
        self.reports: list[PhaseReport] = []
        self.abandonments: list = []
        self.record_abandonments = False

    # -- boosts ------------------------------------------------------------

    def apply_boosts(self, names: list[str]) -> None:
        for name in names:
            op = self.vm.table.opcode(name)
            self.pattern[op] += self.vm.n_q
            self.boost_deltas.append((op, self.vm.n_q))

    def undo_boosts(self) -> None:
        for op, delta in reversed(self.boost_deltas):
            self.pattern[op] -= delta
        self.boost_deltas = []

    # -- one task ----------------------------------------------------------

    def _searcher(self) -> Searcher:
        s = Searcher(self.vm, self.on_event, self.record_abandonments)
        return s

    def _try(self, ring, T: int, t0: int) -> tuple[bool, int]:
        s = self._searcher()
        ok = s.try_(ring, 0, t0, HALF, T)
        if self.record_abandonments:
            self.abandonments += s.stats.abandonments
        return ok, s.stats.steps

    def solve_next(self, tasks: list[Task], reduced: bool = False, task_index: int = 0) -> PhaseReport:
        """Solve tasks[-1] given that tasks[:-1] are solved by the code from a_last.

        Each phase gives half of T to prolonging the latest solver on the
        new task and half to fresh code that must solve all tasks (only the
        new one if ``reduced``), then doubles T.
        """
        vm = self.vm
        store = vm.store
        cfg = self.config
        tapes = [vm.new_tape(task, i + 1, self.pattern) for i, task in enumerate(tasks)]
        newest = tapes[-1]
        ring = [newest] if reduced else tapes
        init = sum(tp.init_cost for tp in ring)
        T = cfg.t_initial
        phases: list[PhaseLog] = []
        b1_total = b2_total = 0
        while True:
            if self.total_steps + T > cfg.ceiling:
                raise CeilingReached(f"step ceiling {cfg.ceiling} reached at T={T}")
            log = PhaseLog(T, init_cost=init)
            phases.append(log)
            self._emit({"event": "phase", "task_index": task_index, "T": T})
            solved_by = None
            if store.a_last > 0:
                store.truncate(store.a_frozen)
                vm.place(newest, store.a_last)
                ok, spent = self._try([newest], T, 0)
                log.branch1_steps = spent
                if ok:
                    store.record_solution(store.a_last, fresh=False)
                    solved_by = "branch-1"
            if solved_by is None and 2 * init <= T:
                store.truncate(store.a_frozen)
                a = store.a_frozen + 1
                for tp in ring:
                    vm.place(tp, a)
                ok, spent = self._try(ring, T, init)
                log.branch2_steps = init + spent
                if ok:
                    store.record_solution(a, fresh=True)
                    solved_by = "branch-2"
            self.total_steps += log.branch1_steps + log.branch2_steps
            b1_total += log.branch1_steps
            b2_total += log.branch2_steps
            if solved_by:
                log.outcome = solved_by
                break
            T *= cfg.growth
        task_steps = b1_total + b2_total
        start, end = store.frozen_index[-1]
        report = PhaseReport(
            task_index=task_index,
            suite=tasks[-1].suite,
            n=tasks[-1].n,
            outcome=solved_by,
            T=T,
            branch1_steps=b1_total,
            branch2_steps=b2_total,
            total_steps=task_steps,
            frozen=(start, end),
            code=vm.table.decode(store.q[start : end + 1]),
            bias_degree=f"1/{task_steps}" if task_steps else "1",
            phases=phases,
        )
        return report

    # -- curriculum --------------------------------------------------------

    def _emit(self, event: dict) -> None:
        if self.on_event is not None:
            self.on_event(event)

    def switch_suite(self, suite: str) -> None:
        self.undo_boosts()
        self.apply_boosts(self.config.boosts.get(suite, []))
        self.suite = suite
        self.suite_start = self.next_task
        self.suite_tasks = []
        self._emit({"event": "suite", "suite": suite, "pattern_sum": sum(self.pattern)})

    def run_curriculum(self, on_task=None) -> list[PhaseReport]:
        cfg = self.config
        if cfg.mode == "lsearch-reference":
            for suite, n in cfg.tasks[self.next_task :]:
                rep = self.lsearch_reference(make_task(suite, n))
                self._emit(rep)
                self.next_task += 1
                if on_task:
                    on_task(self)
            return self.reports
        reduced = cfg.mode == "optimize-latest"
        while self.next_task < len(cfg.tasks):
            suite, n = cfg.tasks[self.next_task]
            if suite != self.suite:
                self.switch_suite(suite)
            task = make_task(suite, n)
            tasks = [task] if reduced else self.suite_tasks + [task]
            report = self.solve_next(tasks, reduced, self.next_task)
            self.suite_tasks.append(task)
            self.reports.append(report)
            self._emit(report.to_json())
            self.next_task += 1
            if on_task:
                on_task(self)
        return self.reports

    # -- reference search --------------------------------------------------

    def lsearch_reference(self, task: Task) -> dict:
        """Phase-doubling search from T=1 with P=1 on a fixed distribution.

        Bias-shifting instructions are removed from the alphabet and nothing
        is frozen.
        """
        vm = self.vm
        store = vm.store
        pattern = list(self.pattern)
        for name in BIAS_SHIFTERS:
            pattern[vm.table.opcode(name)] = 0
        tp = vm.new_tape(task, 1, pattern)
        frozen = store.a_frozen
        T = 1
        total = 0
        while True:
            if total + T > self.config.ceiling:
                return {"event": "lsearch-report", "suite": task.suite, "n": task.n,
                        "solved": False, "steps": total, "T": T, "code": None}
            store.truncate(frozen)
            vm.place(tp, frozen + 1)
            s = self._searcher()
            ok = s.try_([tp], 0, tp.init_cost, Fraction(1), T)
            total += tp.init_cost + s.stats.steps
            if ok:
                code = store.q[frozen + 1 : store.a_frozen + 1]
                store.a_frozen = frozen
                store.truncate(frozen)
                return {"event": "lsearch-report", "suite": task.suite, "n": task.n,
                        "solved": True, "steps": total, "T": T, "code": vm.table.decode(code)}
            T *= 2

    # -- snapshots ---------------------------------------------------------

    def snapshot(self) -> dict:
        d = self.vm.store.to_dict()
        d["driver"] = {
            "next_task": self.next_task,
            "suite": self.suite,
            "suite_start": self.suite_start,
            "pattern": self.pattern,
            "boost_deltas": [list(x) for x in self.boost_deltas],
            "total_steps": self.total_steps,
        }
        return d

    def write_snapshot(self, path: Path) -> None:
        tmp = Path(str(path) + ".tmp")
        tmp.write_text(json.dumps(self.snapshot()))
        tmp.replace(path)

    def resume(self, snap: dict) -> None:
        try:
            self.vm.load_store(CodeStore.from_dict(snap))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"bad snapshot: {e}") from None
        drv = snap.get("driver")
        if drv:
            self.next_task = int(drv["next_task"])
            self.suite = drv["suite"]
            self.suite_start = int(drv["suite_start"])
            self.pattern = [int(x) for x in drv["pattern"]]
            self.boost_deltas = [(int(a), int(b)) for a, b in drv["boost_deltas"]]
            self.total_steps = int(drv["total_steps"])
            self.suite_tasks = [make_task(s, n) for s, n in self.config.tasks[self.suite_start : self.next_task]]
