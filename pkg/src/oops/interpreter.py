"""Fetch/execute loop, round-robin task rings and prefix replay."""

from __future__ import annotations

from fractions import Fraction

from .core_state import (
    CS,
    R_CP,
    R_IDLE,
    R_QUOTE,
    CodeStore,
    Halt,
    Layout,
    TaskTape,
    UndoJournal,
)
from .instructions import OpcodeTable

RAN = "ran"
SOLVED = "solved"
HALTED = "halted"
REQUEST = "token-request"
IDLE = "idle"

ALL_SOLVED = "all-solved"
OVER_BUDGET = "budget-exceeded"


class ReplayError(RuntimeError):
    pass


class Machine:
    """Owns the code store, opcode table and journal of one search worker."""

    def __init__(self, store: CodeStore | None = None, table: OpcodeTable | None = None,
                 journal: UndoJournal | None = None, declarations: str = "") -> None:
        self.store = store if store is not None else CodeStore()
        self.table = table if table is not None else OpcodeTable(self.store, declarations)
        self.journal = journal if journal is not None else UndoJournal()
        self.dispatch = self.table.handlers
        self.size = self.table.size
        self.n_q = self.table.n_q
        self.qot = self.table.opcode("qot")
        self.trace = None  # callable(task_id, ip, opcode, cost, kind)
        self.instructions = 0
        self.refused_at = 0  # t just before the last refused instruction

    def load_store(self, store: CodeStore) -> None:
        """Adopt the code of a snapshot taken with the same declarations."""
        mine = self.store
        if len(store.frozen_index) < mine.n_user or store.frozen_index[: mine.n_user] != mine.frozen_index[: mine.n_user] \
                or store.q[: mine.a_frozen + 1] != mine.q[: mine.a_frozen + 1]:
            raise ValueError("snapshot was taken with different declarations")
        mine.q[:] = store.q
        mine.a_last = store.a_last
        mine.a_frozen = store.a_frozen
        mine.frozen_index[:] = store.frozen_index
        mine.n_user = store.n_user

    # -- tapes -------------------------------------------------------------

    def base_pattern(self) -> list[int]:
        """All searchable tokens get numerator 1, extended ones 0."""
        nums = [0] * (self.size + 1)
        for op in self.table.searchable:
            nums[op] = 1
        return nums

    def new_tape(self, task, task_id: int = 1, pattern: list[int] | None = None) -> TaskTape:
        layout = Layout(self.size, task.env_size if task is not None else 0)
        tp = TaskTape(task_id, layout, self.journal, task)
        tp.load_pattern(0, pattern if pattern is not None else self.base_pattern())
        if task is not None:
            tp.init_cost = task.init(tp)
        return tp

    @staticmethod
    def place(tp: TaskTape, addr: int) -> None:
        """Set the main frame's ip directly (no journaling)."""
        tp.cells[CS + 3 * tp.cells[R_CP]] = addr

    # -- execution ---------------------------------------------------------

    def step(self, tp: TaskTape, qp: int) -> tuple[str, int]:
        """Execute one instruction of tp. Returns (kind, cost).

        Cost includes the task's solution test when the instruction ran.
        """
        c = tp.cells
        if c[R_IDLE]:
            return IDLE, 0
        frame = CS + 3 * c[R_CP]
        ip = c[frame]
        if ip > qp:
            return (REQUEST, 0) if ip == qp + 1 else (HALTED, 0)
        if ip > 0:
            tok = self.store.q[ip]
        elif -ip < len(c):
            tok = c[-ip]
        else:
            return HALTED, 0
        if tok < 1 or tok > self.size:
            return HALTED, 0
        try:
            tp.set(frame, ip + 1)
            if c[R_QUOTE] and tok != self.qot:
                tp.push(tok)
                cost = 1
            else:
                cost = self.dispatch[tok](self, tp)
        except Halt:
            if self.trace:
                self.trace(tp.task_id, ip, tok, 1, HALTED)
            return HALTED, 1
        self.instructions += 1
        solved, tcost = tp.task.test(tp) if tp.task is not None else (False, 0)
        kind = SOLVED if solved else RAN
        if self.trace:
            self.trace(tp.task_id, ip, tok, cost + tcost, kind)
        return kind, cost + tcost

    def run_ring(self, ring: list[TaskTape], pos: int, qp: int, t: int, limit: int):
        """Round-robin the ring until something other than a plain step happens.

        Returns (outcome, ring, pos, t) where outcome is ALL_SOLVED, HALTED,
        REQUEST (ring[pos] wants a token) or OVER_BUDGET (t is then the time
        the refused instruction would have needed; ``refused_at`` keeps the
        time charged before it). ``ring`` is copied before
        solved tasks are removed.
        """
        step = self.step
        idle = 0
        while True:
            tp = ring[pos]
            kind, cost = step(tp, qp)
            if kind is REQUEST:
                return REQUEST, ring, pos, t
            if kind is IDLE:
                idle += 1
                if idle >= len(ring):
                    return HALTED, ring, pos, t
                pos = (pos + 1) % len(ring)
                continue
            idle = 0
            if t + cost > limit:
                self.refused_at = t
                return OVER_BUDGET, ring, pos, t + cost
            t += cost
            if kind is HALTED:
                return HALTED, ring, pos, t
            if kind is SOLVED:
                ring = ring[:pos] + ring[pos + 1 :]
                if not ring:
                    return ALL_SOLVED, ring, 0, t
                pos %= len(ring)
            else:
                pos = (pos + 1) % len(ring)

    # -- replay ------------------------------------------------------------

    def replay(self, tapes: list[TaskTape], code: list[int], limit: int = 10**9,
               start: int | None = None) -> dict:
        """Grow ``code`` beyond a_frozen on the given (freshly initialized) tapes.

        Tokens are supplied on request, each multiplying the prefix
        probability by its current selection probability. Tapes and the
        store are restored afterwards.
        """
        store = self.store
        saved_q = list(store.q)
        store.truncate(store.a_frozen)
        addr = store.a_frozen + 1 if start is None else start
        for tp in tapes:
            self.place(tp, addr)
        mark = self.journal.watermark()
        self.journal.unmark(mark)
        prob = Fraction(1)
        ring = list(tapes)
        pos = 0
        t = 0
        used = 0
        outcome = None
        try:
            while True:
                outcome, ring, pos, t = self.run_ring(ring, pos, store.qp, t, limit)
                if outcome is not REQUEST:
                    break
                if used == len(code):
                    break
                tp = ring[pos]
                nums, total = tp.pattern()
                tok = code[used]
                if not 1 <= tok <= self.size or nums[tok] == 0:
                    raise ReplayError(f"token {tok} cannot be selected")
                prob *= Fraction(nums[tok], total)
                store.append(tok)
                used += 1
            return {"outcome": outcome, "probability": prob, "steps": t, "consumed": used,
                    "remaining": len(ring)}
        finally:
            self.journal.rollback(mark)
            store.q[:] = saved_q

    def prefix_probability_of(self, code: list[int], tapes: list[TaskTape]) -> Fraction:
        res = self.replay(tapes, code)
        if res["consumed"] != len(code):
            raise ReplayError(f"prefix stopped after {res['consumed']} of {len(code)} tokens "
                              f"({res['outcome']})")
        return res["probability"]

    def run_frozen(self, tp: TaskTape, start: int, end: int, limit: int = 10**9) -> dict:
        """Run frozen code q[start..end] on tp from start; state is restored."""
        self.place(tp, start)
        mark = self.journal.watermark()
        self.journal.unmark(mark)
        try:
            outcome, ring, _, t = self.run_ring([tp], 0, end, 0, limit)
            report = {"outcome": outcome, "steps": t, "solved": outcome == ALL_SOLVED}
            if tp.task is not None:
                report.update(tp.task.report(tp))
            return report
        finally:
            self.journal.rollback(mark)
