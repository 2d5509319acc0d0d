"""Task descriptors: 1^n 2^n construction, Towers of Hanoi, planted targets."""

from __future__ import annotations

from .core_state import DDS, DS_TOP, R_DDP, R_DP, Halt


class Task:
    suite = ""
    env_size = 0

    def __init__(self, n: int) -> None:
        if n < 0:
            raise ValueError("instance size must be non-negative")
        self.n = n

    def init(self, tp) -> int:
        """Write the task inputs (unjournaled); returns cells written."""
        raise NotImplementedError

    def test(self, tp) -> tuple[bool, int]:
        raise NotImplementedError

    def report(self, tp) -> dict:
        return {}

    def __repr__(self) -> str:
        return f"{self.suite}({self.n})"


def _push_raw(tp, values) -> None:
    dp = tp.cells[R_DP]
    for v in values:
        dp += 1
        tp.poke(DS_TOP - dp, v)
    tp.poke(R_DP, dp)


class OneTwoTask(Task):
    """Leave n ones followed by n twos on top of the auxiliary stack Ds."""

    suite = "onetwon"

    def init(self, tp) -> int:
        _push_raw(tp, [self.n])
        return 1

    def test(self, tp) -> tuple[bool, int]:
        c = tp.cells
        n = self.n
        Dp = c[R_DDP]
        if Dp < 2 * n:
            return False, 0
        # from the top: n twos, then n ones
        for j in range(2 * n):
            want = 2 if j < n else 1
            if c[DDS + Dp - j] != want:
                return False, j + 1
        return True, 2 * n

    def report(self, tp) -> dict:
        return {"Dp": tp.cells[R_DDP]}


class HanoiTask(Task):
    """Move n disks from peg 1 to peg 3.

    Each peg owns n+1 environment cells: a top counter followed by the disk
    sizes bottom-up. One further cell counts executed moves.
    """

    suite = "hanoi"

    def __init__(self, n: int) -> None:
        super().__init__(n)
        self.env_size = 3 * (n + 1) + 1

    def peg(self, tp, k: int) -> int:
        return tp.env + (k - 1) * (self.n + 1)

    def moves_cell(self, tp) -> int:
        return tp.env + 3 * (self.n + 1)

    def init(self, tp) -> int:
        n = self.n
        _push_raw(tp, [1, 2, 3, n])
        p1 = self.peg(tp, 1)
        tp.poke(p1, n)
        for j in range(n):
            tp.poke(p1 + 1 + j, n - j)
        return 4 + (n + 1 if n else 0)

    def move_disk(self, tp, s: int, d: int) -> None:
        if s not in (1, 2, 3) or d not in (1, 2, 3) or s == d:
            raise Halt("bad peg")
        c = tp.cells
        ps, pd = self.peg(tp, s), self.peg(tp, d)
        hs, hd = c[ps], c[pd]
        if hs == 0:
            raise Halt("empty peg")
        disk = c[ps + hs]
        if hd and c[pd + hd] < disk:
            raise Halt("larger disk onto smaller")
        tp.set(pd + hd + 1, disk)
        tp.set(pd, hd + 1)
        tp.set(ps + hs, 0)
        tp.set(ps, hs - 1)
        m = self.moves_cell(tp)
        tp.set(m, c[m] + 1)

    def test(self, tp) -> tuple[bool, int]:
        c = tp.cells
        return c[self.peg(tp, 1)] == 0 and c[self.peg(tp, 2)] == 0, 1

    def pegs(self, tp) -> list[list[int]]:
        c = tp.cells
        out = []
        for k in (1, 2, 3):
            p = self.peg(tp, k)
            out.append([c[p + 1 + j] for j in range(c[p])])
        return out

    def report(self, tp) -> dict:
        return {"moves": tp.cells[self.moves_cell(tp)], "pegs": self.pegs(tp)}


class TargetTask(Task):
    """Planted task: solved once the top of ds equals ``n``."""

    suite = "target"

    def init(self, tp) -> int:
        return 0

    def test(self, tp) -> tuple[bool, int]:
        dp = tp.cells[R_DP]
        return dp > 0 and tp.cells[DS_TOP - dp] == self.n, 1


SUITES = {"onetwon": OneTwoTask, "hanoi": HanoiTask, "target": TargetTask}


def make_task(suite: str, n: int) -> Task:
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}")
    return SUITES[suite](n)


def reference_hanoi(n: int, s: int = 1, a: int = 2, d: int = 3) -> list[tuple[int, int]]:
    """Standard recursive move list (source, destination), 2^n - 1 moves."""
    if n == 0:
        return []
    return reference_hanoi(n - 1, s, d, a) + [(s, d)] + reference_hanoi(n - 1, a, s, d)


def parse_task_file(text: str) -> list[tuple[str, int]]:
    """Lines of ``suite n``; ``#`` starts a comment."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2 or parts[0] not in SUITES:
            raise ValueError(f"line {lineno}: expected 'suite n'")
        try:
            n = int(parts[1])
        except ValueError:
            raise ValueError(f"line {lineno}: bad instance size {parts[1]!r}") from None
        if n < 0:
            raise ValueError(f"line {lineno}: negative instance size")
        out.append((parts[0], n))
    return out


def default_schedule() -> list[tuple[str, int]]:
    return [("onetwon", n) for n in range(1, 31)] + [("hanoi", n) for n in range(1, 31)]
