"""Per-task tapes, the global code store and the undo journal.

A tape is a flat list of integer cells. Every stack, register, pattern and
environment slot has a fixed cell index, so one journal of
``(tape, cell, old_value)`` entries can restore any of them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

MAX_STATE = 3000
MAX_ABS = 10**9
MAXDP = 200
MAXDDP = 200
MAXCP = 100
MAXFNS = 100
MAXPATS = 20

# ds[k] lives at cell DS_TOP - k, so its address (-cell) is k - DS_TOP and
# code written onto ds runs upward as ip increments.
DS_TOP = MAXDP

R_DP = DS_TOP + 1
R_DDP = R_DP + 1
R_CP = R_DP + 2
R_FNP = R_DP + 3
R_PATP = R_DP + 4
R_CURP = R_DP + 5
R_QUOTE = R_DP + 6
R_TASK = R_DP + 7
R_IDLE = R_DP + 8
R_ARRP = R_DP + 9  # integer-array stack pointer, never used

DDS = R_ARRP + 1  # Ds[k] at DDS + k
CS = DDS + MAXDDP + 1  # frame k: CS + 3k = ip, +1 = base, +2 = out
FNS = CS + 3 * (MAXCP + 1)  # entry k >= 1: FNS + 3(k-1) = code, +1 = in, +2 = out
PATS = FNS + 3 * MAXFNS

REGISTER_NAMES = ("dp", "Dp", "cp", "fnp", "patp", "curp", "quote", "task", "idle", "arrp")


class Halt(Exception):
    """Illegal use of an instruction; ends the current program prefix."""


class JournalError(RuntimeError):
    """Misuse of the journal API (a programming error, not a search event)."""


class UndoJournal:
    """Global trail of overwritten cells with generation-stamped marks.

    A cell is journaled once per generation. ``unmark`` and ``rollback``
    start a new generation, which clears every mark in O(1).
    """

    def __init__(self) -> None:
        self.trail: list[tuple[TaskTape, int, int]] = []
        self.gen = 1

    def watermark(self) -> int:
        return len(self.trail)

    def _check(self, to: int) -> None:
        if not 0 <= to <= len(self.trail):
            raise JournalError(f"invalid journal position {to} (trail length {len(self.trail)})")

    def rollback(self, to: int) -> None:
        self._check(to)
        trail = self.trail
        if len(trail) > to:
            entries = trail[to:]
            del trail[to:]
            for tape, i, old in reversed(entries):
                tape.cells[i] = old
        self.gen += 1

    def unmark(self, to: int) -> None:
        self._check(to)
        self.gen += 1


@dataclass(frozen=True)
class Layout:
    """Cell offsets that depend on the opcode table size and environment."""

    n_tokens: int
    env_size: int = 0

    @property
    def stride(self) -> int:
        return self.n_tokens + 1  # numerators then sum

    @property
    def env(self) -> int:
        return PATS + (MAXPATS + 1) * self.stride

    @property
    def length(self) -> int:
        return self.env + self.env_size

    def pattern(self, k: int) -> int:
        return PATS + k * self.stride


class TaskTape:
    """Mutable state s(r) of one task."""

    def __init__(self, task_id: int, layout: Layout, journal: UndoJournal, task=None) -> None:
        if layout.length > MAX_STATE:
            raise ValueError(f"tape needs {layout.length} cells, limit is {MAX_STATE}")
        self.task_id = task_id
        self.layout = layout
        self.journal = journal
        self.task = task
        self.init_cost = 0
        self.size = layout.n_tokens
        self.stride = layout.stride
        self.env = layout.env
        self.cells = [0] * layout.length
        self.stamp = [0] * layout.length
        self.cells[R_TASK] = task_id
        self.cells[CS + 2] = -1  # frame 0 returns everything

    def __len__(self) -> int:
        return len(self.cells)

    # -- raw access --------------------------------------------------------

    def set(self, i: int, v: int) -> None:
        """Journaled write."""
        if v > MAX_ABS or v < -MAX_ABS:
            raise Halt("cell value out of range")
        j = self.journal
        if self.stamp[i] != j.gen:
            self.stamp[i] = j.gen
            j.trail.append((self, i, self.cells[i]))
        self.cells[i] = v

    def poke(self, i: int, v: int) -> None:
        """Unjournaled write, for initialization outside any search."""
        if v > MAX_ABS or v < -MAX_ABS:
            raise ValueError("cell value out of range")
        self.cells[i] = v

    def read_z(self, i: int, store: CodeStore) -> int:
        """Token at address i: code for i > 0, tape cell -i otherwise."""
        if i > 0:
            if i > store.qp:
                raise Halt("address beyond code")
            return store.q[i]
        if -i >= len(self.cells):
            raise Halt("address below tape")
        return self.cells[-i]

    def snapshot(self) -> tuple[int, ...]:
        return tuple(self.cells)

    # -- data stack --------------------------------------------------------

    @property
    def dp(self) -> int:
        return self.cells[R_DP]

    def ds(self, k: int) -> int:
        return self.cells[DS_TOP - k]

    def push(self, v: int) -> None:
        dp = self.cells[R_DP] + 1
        if dp > MAXDP:
            raise Halt("data stack overflow")
        self.set(DS_TOP - dp, v)
        self.set(R_DP, dp)

    def pop(self) -> int:
        dp = self.cells[R_DP]
        if dp < 1:
            raise Halt("data stack underflow")
        self.set(R_DP, dp - 1)
        return self.cells[DS_TOP - dp]

    def stack(self) -> list[int]:
        return [self.cells[DS_TOP - k] for k in range(1, self.cells[R_DP] + 1)]

    # -- auxiliary stack ---------------------------------------------------

    def aux(self) -> list[int]:
        return [self.cells[DDS + k] for k in range(1, self.cells[R_DDP] + 1)]

    # -- call stack --------------------------------------------------------

    def frame(self) -> int:
        return CS + 3 * self.cells[R_CP]

    @property
    def ip(self) -> int:
        return self.cells[CS + 3 * self.cells[R_CP]]

    @property
    def base(self) -> int:
        return self.cells[CS + 3 * self.cells[R_CP] + 1]

    def set_ip(self, addr: int) -> None:
        self.set(CS + 3 * self.cells[R_CP], addr)

    # -- patterns ----------------------------------------------------------

    def pattern(self, k: int | None = None) -> tuple[list[int], int]:
        """(numerators indexed by opcode with index 0 unused, sum) of pattern k."""
        if k is None:
            k = self.cells[R_CURP]
        off = PATS + k * self.stride
        nums = [0] + self.cells[off : off + self.size]
        return nums, self.cells[off + self.size]

    def load_pattern(self, k: int, numerators: list[int]) -> None:
        """Unjournaled: numerators indexed by opcode (index 0 ignored)."""
        off = PATS + k * self.stride
        total = 0
        for op in range(1, self.size + 1):
            v = numerators[op] if op < len(numerators) else 0
            self.poke(off + op - 1, v)
            total += v
        self.poke(off + self.size, total)


@dataclass
class CodeStore:
    """Append-only global code q with frozen-program bookkeeping."""

    q: list[int] = field(default_factory=lambda: [0])
    a_last: int = 0
    a_frozen: int = 0
    frozen_index: list[tuple[int, int]] = field(default_factory=list)
    n_user: int = 0

    SNAPSHOT_FORMAT = "oops-codestore"
    SNAPSHOT_VERSION = 1

    @property
    def qp(self) -> int:
        return len(self.q) - 1

    def truncate(self, qp: int) -> None:
        if qp < self.a_frozen:
            raise JournalError("cannot truncate frozen code")
        del self.q[qp + 1 :]

    def append(self, token: int) -> None:
        self.q.append(token)

    def set_token(self, addr: int, token: int) -> None:
        if addr <= self.a_frozen:
            raise Halt("write to frozen code")
        if addr == len(self.q):
            self.q.append(token)
        elif 0 < addr < len(self.q):
            self.q[addr] = token
        else:
            raise Halt("code address out of range")

    def freeze(self, qp: int) -> None:
        if qp < self.a_frozen or qp > self.qp:
            raise JournalError("freeze outside code")
        self.a_frozen = qp

    def declare(self, body: list[int]) -> int:
        """Append and freeze a user-declared body; returns its start address."""
        if self.qp != self.a_frozen or len(self.frozen_index) != self.n_user:
            raise JournalError("declarations must precede search")
        start = self.qp + 1
        self.q.extend(body)
        self.a_frozen = self.qp
        self.frozen_index.append((start, self.a_frozen))
        self.n_user += 1
        return start

    def record_solution(self, start: int, fresh: bool) -> None:
        """Index code frozen by the search; ``fresh`` marks a new a_last."""
        end = self.a_frozen
        covered = self.frozen_index[-1][1] if self.frozen_index else 0
        if end == covered:
            return
        if fresh or len(self.frozen_index) == self.n_user:
            self.frozen_index.append((covered + 1, end))
        else:
            s, _ = self.frozen_index[-1]
            self.frozen_index[-1] = (s, end)
        if fresh:
            self.a_last = start

    def program(self, n: int) -> list[int]:
        """Tokens of frozen program n (1-based, all frozen programs)."""
        if not 1 <= n <= len(self.frozen_index):
            raise Halt("no such frozen program")
        s, e = self.frozen_index[n - 1]
        return self.q[s : e + 1]

    def discovered(self, n: int) -> list[int]:
        """Tokens of the n-th program frozen by the search (1-based)."""
        k = self.n_user + n
        if n < 1 or k > len(self.frozen_index):
            raise Halt("no such discovered program")
        return self.program(k)

    # -- snapshots ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": self.SNAPSHOT_FORMAT,
            "version": self.SNAPSHOT_VERSION,
            "q": self.q[1:],
            "a_last": self.a_last,
            "a_frozen": self.a_frozen,
            "frozen_index": [list(e) for e in self.frozen_index],
            "n_user": self.n_user,
        }

    @classmethod
    def from_dict(cls, d: dict) -> CodeStore:
        if d.get("format") != cls.SNAPSHOT_FORMAT or d.get("version") != cls.SNAPSHOT_VERSION:
            raise ValueError("unsupported snapshot format")
        store = cls(
            q=[0] + [int(x) for x in d["q"]],
            a_last=int(d["a_last"]),
            a_frozen=int(d["a_frozen"]),
            frozen_index=[(int(s), int(e)) for s, e in d["frozen_index"]],
            n_user=int(d["n_user"]),
        )
        store.truncate(store.a_frozen)
        return store

    def dumps(self) -> str:
        return json.dumps(self.to_dict())
