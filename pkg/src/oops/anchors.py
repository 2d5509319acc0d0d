"""Reference programs and probability figures used to check the engine.

Closed forms are computed with exact rationals and compared against the
same quantities measured by replaying the programs through the machine.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .interpreter import Machine
from .tasks import HanoiTask, OneTwoTask

ONETWO_SOLVER = "defnp c1 calltp c2 endnp"
HANOI_SOLVER = "c3 dec boostq defnp c4 calltp c3 c5 calltp endnp"
HANOI_SUFFIX = "defnp c4 calltp c3 c5 calltp endnp"
# Any earlier discovered program, so that the 1^n 2^n solver is the second.
FIRST_PROGRAM = "1toD 2toD"

ONETWO_BOOSTS = ["c1", "c2", "by2", "dec", "boostq"]
HANOI_BOOSTS = ["c3", "c4", "c5", "by2", "dec", "boostq"]


def freeze_program(vm: Machine, code: str) -> tuple[int, int]:
    """Append code after a_frozen as a newly discovered program."""
    store = vm.store
    store.truncate(store.a_frozen)
    start = store.qp + 1
    for tok in vm.table.encode(code):
        store.append(tok)
    store.freeze(store.qp)
    store.record_solution(start, fresh=True)
    return start, store.a_frozen


def solver_machine(with_hanoi: bool = True) -> tuple[Machine, dict[str, tuple[int, int]]]:
    """Machine whose discovered programs are FIRST_PROGRAM, the 1^n 2^n
    solver and (optionally) the Hanoi solver."""
    vm = Machine()
    ranges = {"first": freeze_program(vm, FIRST_PROGRAM), "onetwon": freeze_program(vm, ONETWO_SOLVER)}
    if with_hanoi:
        ranges["hanoi"] = freeze_program(vm, HANOI_SOLVER)
    return vm, ranges


def boosted_pattern(vm: Machine, names: list[str]) -> list[int]:
    nums = vm.base_pattern()
    for name in names:
        nums[vm.table.opcode(name)] += vm.n_q
    return nums


def static_probability(vm: Machine, code: str, pattern: list[int]) -> Fraction:
    total = sum(pattern)
    p = Fraction(1)
    for tok in vm.table.encode(code):
        p *= Fraction(pattern[tok], total)
    return p


@dataclass
class Anchor:
    name: str
    exact: Fraction
    measured: Fraction
    target: float
    tolerance: float = 0.01

    @property
    def ok(self) -> bool:
        return self.exact == self.measured and abs(float(self.exact) - self.target) <= self.tolerance * self.target

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return (f"{status} {self.name}: {self.exact.numerator}/{self.exact.denominator} "
                f"= {float(self.exact):.4g} (target {self.target:g})")


def compute_anchors() -> list[Anchor]:
    vm, _ = solver_machine(with_hanoi=False)
    n_q = vm.n_q
    hanoi = boosted_pattern(vm, HANOI_BOOSTS)
    assert sum(hanoi) == 7 * n_q

    # full code: the prefix's boostq(2) changes the pattern mid-way
    full_exact = Fraction(74**3 * 74**7, 511**3 * 876**7)
    full_measured = vm.prefix_probability_of(vm.table.encode(HANOI_SOLVER), [vm.new_tape(HanoiTask(3), 1, hanoi)])

    suffix_exact = Fraction(74, 511) ** 3 * Fraction(1, 511) ** 4
    suffix_measured = static_probability(vm, HANOI_SUFFIX, hanoi)

    plain_exact = Fraction(1, 73) ** 7
    plain_measured = static_probability(vm, HANOI_SUFFIX, vm.base_pattern())

    return [
        Anchor("10-token Hanoi code, boosted", full_exact, full_measured, 9.3e-11),
        Anchor("Hanoi suffix, initial boosts only", suffix_exact, suffix_measured, 4.5e-14),
        Anchor("Hanoi suffix, no boosts", plain_exact, plain_measured, 9e-14),
    ]


def onetwo_replay(vm: Machine, start: int, end: int, sizes=range(1, 31)) -> dict[int, dict]:
    return {n: vm.run_frozen(vm.new_tape(OneTwoTask(n)), start, end) for n in sizes}


def hanoi_replay(vm: Machine, start: int, end: int, sizes=range(1, 9)) -> dict[int, dict]:
    pattern = boosted_pattern(vm, HANOI_BOOSTS)
    return {n: vm.run_frozen(vm.new_tape(HanoiTask(n), 1, pattern), start, end) for n in sizes}
