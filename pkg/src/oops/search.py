"""Depth-first, probability-budgeted enumeration of self-delimiting prefixes.

A prefix with probability P may spend at most P*T steps (summed over the
ring). Tokens are appended only when a running task asks for one; every
node's tape changes are journaled and undone before its siblings run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .core_state import PATS, R_CURP, TaskTape
from .interpreter import ALL_SOLVED, OVER_BUDGET, REQUEST, Machine


def enumerate_tokens(numerators: list[int]) -> list[int]:
    """Positive-numerator tokens by descending probability, ties by opcode."""
    toks = [i for i in range(1, len(numerators)) if numerators[i] > 0]
    toks.sort(key=lambda i: (-numerators[i], i))
    return toks


def fraction_str(num: int, den: int) -> str:
    f = Fraction(num, den)
    return f"{f.numerator}/{f.denominator}"


@dataclass
class SearchStats:
    nodes: int = 0
    steps: int = 0
    abandoned: int = 0
    max_depth: int = 0
    max_trail: int = 0
    # (t_required, prob_num, prob_den) of every budget abandonment, if recorded
    abandonments: list = field(default_factory=list)


class _Node:
    __slots__ = ("qp", "ring", "pos", "t", "num", "den", "mark", "tokens", "nums", "total", "cursor")


class Searcher:
    def __init__(self, vm: Machine, on_event=None, record_abandonments: bool = False) -> None:
        self.vm = vm
        self.on_event = on_event
        self.record = record_abandonments
        self.stats = SearchStats()

    def _emit(self, kind: str, **data) -> None:
        if self.on_event is not None:
            self.on_event({"event": kind, **data})

    def try_(self, ring: list[TaskTape], pos: int, t0: int, prob: Fraction, T: int) -> bool:
        """Search extensions of q[1..qp] (qp = current end of code).

        The caller has placed every ring task's ip. Returns True when some
        prefix solved all ring tasks; that prefix is then frozen. All tapes
        are restored either way.
        """
        vm = self.vm
        store = vm.store
        journal = vm.journal
        stats = self.stats
        root_mark = journal.watermark()
        stack: list[_Node] = []
        done = False

        root_qp = store.qp
        num, den = prob.numerator, prob.denominator
        node = self._enter(store.qp, list(ring), pos, t0, num, den, T)
        if node is True:
            done = True
        elif node is not None:
            stack.append(node)

        while stack and not done:
            nd = stack[-1]
            if nd.cursor >= len(nd.tokens):
                journal.rollback(nd.mark)
                stack.pop()
                continue
            z = nd.tokens[nd.cursor]
            nd.cursor += 1
            cnum = nd.num * nd.nums[z]
            cden = nd.den * nd.total
            if cnum * T // cden < nd.t + 1:
                # later tokens are no more probable: none can run an instruction
                nd.cursor = len(nd.tokens)
                continue
            store.truncate(nd.qp)
            store.append(z)
            self._emit("token-selected", address=nd.qp + 1, token=z,
                       probability=fraction_str(cnum, cden))
            child = self._enter(nd.qp + 1, nd.ring, nd.pos, nd.t, cnum, cden, T)
            if child is True:
                done = True
            elif child is not None:
                stack.append(child)
                if len(stack) > stats.max_depth:
                    stats.max_depth = len(stack)

        journal.rollback(root_mark)
        if done:
            self._emit("solved", start=root_qp + 1, end=store.a_frozen)
        else:
            store.truncate(store.a_frozen)
        return done

    def _enter(self, qp, ring, pos, t, num, den, T):
        """Run one node (steps 1 and 2). Returns True on success, a node to
        expand on a token request, or None."""
        vm = self.vm
        journal = vm.journal
        stats = self.stats
        stats.nodes += 1
        mark = journal.watermark()
        journal.unmark(mark)
        limit = num * T // den
        self._emit("node-enter", qp=qp, t=t, probability=fraction_str(num, den))
        outcome, ring2, pos2, t2 = vm.run_ring(ring, pos, qp, t, limit)
        # t already includes the ancestors' time; charge only this node's part
        stats.steps += (t2 if outcome is not OVER_BUDGET else vm.refused_at) - t
        if len(journal.trail) > stats.max_trail:
            stats.max_trail = len(journal.trail)
        journal.unmark(mark)
        if outcome is ALL_SOLVED:
            vm.store.freeze(qp)
            return True
        if outcome is REQUEST:
            tp = ring2[pos2]
            off = PATS + tp.cells[R_CURP] * tp.stride
            nums = [0] + tp.cells[off : off + tp.size]
            nd = _Node()
            nd.qp, nd.ring, nd.pos, nd.t = qp, ring2, pos2, t2
            nd.num, nd.den, nd.mark = num, den, mark
            nd.nums, nd.total = nums, tp.cells[off + tp.size]
            nd.tokens = enumerate_tokens(nums)
            nd.cursor = 0
            return nd
        if outcome is OVER_BUDGET:
            stats.abandoned += 1
            if self.record:
                stats.abandonments.append((t2, num, den, T))
            self._emit("prefix-abandoned", reason="budget", qp=qp, t=t2,
                       probability=fraction_str(num, den), T=T)
        else:
            self._emit("prefix-abandoned", reason="halted", qp=qp, t=t2)
        journal.rollback(mark)
        return None
