from __future__ import annotations

import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oops.anchors import ONETWO_SOLVER, freeze_program
from oops.core_state import FNS, MAXFNS, R_CP, R_FNP, R_PATP, Halt
from oops.instructions import (
    SIGNATURES,
    TAILREC_DECLARATION,
    DeclarationError,
    OpcodeTable,
    parse_declarations,
)
from oops.interpreter import ALL_SOLVED, Machine
from oops.tasks import TargetTask


def tape_with(vm, values, task=None):
    tp = vm.new_tape(task)
    for v in values:
        tp.push(v)
    return tp


def run(vm, tp, name):
    return vm.dispatch[vm.table.opcode(name)](vm, tp)


def execute(vm, tp, code, limit=10**6):
    """Run code placed after a_frozen on tp until it stops; no rollback."""
    store = vm.store
    store.truncate(store.a_frozen)
    start = store.qp + 1
    for tok in vm.table.encode(code):
        store.append(tok)
    vm.place(tp, start)
    return vm.run_ring([tp], 0, store.qp, 0, limit)


def test_constants(vm):
    for k in range(6):
        tp = tape_with(vm, [])
        assert run(vm, tp, f"c{k}") == 1
        assert tp.stack() == [k]


def test_powr_cost_is_exponent(vm):
    tp = tape_with(vm, [2, 10])
    assert run(vm, tp, "powr") == 10
    assert tp.stack() == [1024]


@pytest.mark.parametrize("x,y,want", [(7, 2, 3), (-7, 2, -4), (7, -2, -4), (6, 3, 2)])
def test_div_floors(vm, x, y, want):
    tp = tape_with(vm, [x, y])
    run(vm, tp, "div")
    assert tp.stack() == [want]


def test_div_by_zero_halts(vm):
    with pytest.raises(Halt):
        run(vm, tape_with(vm, [1, 0]), "div")


def test_arithmetic_range_check(vm):
    with pytest.raises(Halt):
        run(vm, tape_with(vm, [10**9, 2]), "mul")
    with pytest.raises(Halt):
        run(vm, tape_with(vm, [10, 10]), "powr")


def test_booleans(vm):
    for name, x, y, want in [("eq", 3, 3, 1), ("eq", 3, 4, 0), ("grt", 4, 3, 1), ("grt", 3, 4, 0),
                             ("geq", 3, 3, 1), ("and", 1, 0, 0), ("or", 1, 0, 1)]:
        tp = tape_with(vm, [x, y])
        run(vm, tp, name)
        assert tp.stack() == [want], name
    for x, want in [(0, 1), (-3, 1), (2, 0)]:
        tp = tape_with(vm, [x])
        run(vm, tp, "neg")
        assert tp.stack() == [want]


def test_boostq_second_discovered_program(vm):
    freeze_program(vm, "1toD 2toD")
    freeze_program(vm, ONETWO_SOLVER)
    tp = tape_with(vm, [2])
    before, total = tp.pattern()
    assert total == 73
    assert run(vm, tp, "boostq") == 5
    after, total2 = tp.pattern()
    assert total2 == 73 + 5 * 73
    for name in ONETWO_SOLVER.split():
        op = vm.table.opcode(name)
        assert after[op] == before[op] + 73
    with pytest.raises(Halt):
        run(vm, tape_with(vm, [3]), "boostq")


def test_quoted_token_is_pushed(vm):
    tp = vm.new_tape(None)
    execute(vm, tp, "qot mul")
    assert tp.stack() == [vm.table.opcode("mul")]


def test_ret_copies_results_down(vm):
    tp = tape_with(vm, [10, 11, 12, 13, 14])
    tp.cells[R_CP] = 1
    tp.cells[tp.frame()] = 0
    tp.cells[tp.frame() + 1] = 2
    tp.cells[tp.frame() + 2] = 1
    run(vm, tp, "ret")
    assert tp.stack() == [10, 11, 14]
    assert tp.cells[R_CP] == 0


def test_ret_everything(vm):
    tp = tape_with(vm, [1, 2, 3])
    tp.cells[R_CP] = 1
    tp.cells[tp.frame() + 1] = 1
    tp.cells[tp.frame() + 2] = -1
    run(vm, tp, "ret")
    assert tp.stack() == [1, 2, 3]
    assert tp.cells[R_CP] == 0


def test_rt0_only_returns_on_nonpositive(vm):
    tp = tape_with(vm, [5, 1])
    tp.cells[R_CP] = 1
    tp.cells[tp.frame() + 2] = -1
    run(vm, tp, "rt0")
    assert tp.cells[R_CP] == 1 and tp.stack() == [5]
    tp.push(0)
    run(vm, tp, "rt0")
    assert tp.cells[R_CP] == 0


def test_def_records_following_address(vm):
    tp = vm.new_tape(None)
    start = vm.store.a_frozen + 1
    execute(vm, tp, "c1 c1 def c2 c3 def")
    assert tp.cells[R_FNP] == 2
    assert tp.cells[FNS : FNS + 3] == [start + 3, 1, 1]
    assert tp.cells[FNS + 3] == start + 6


def test_def_overflow_halts(vm):
    tp = tape_with(vm, [1, 1])
    tp.cells[R_FNP] = MAXFNS
    with pytest.raises(Halt):
        run(vm, tp, "def")


def test_dof_without_functions_halts(vm):
    with pytest.raises(Halt):
        run(vm, tape_with(vm, [1]), "dof")


def test_dof_all_arguments_keeps_callers_base(vm):
    tp2 = tape_with(vm, [7, 8])
    tp2.cells[R_FNP] = 1
    tp2.cells[FNS : FNS + 3] = [vm.store.a_frozen + 1, -1, -1]
    tp2.push(1)
    run(vm, tp2, "dof")
    assert tp2.cells[R_CP] == 1
    assert tp2.base == 0
    tp3 = tape_with(vm, [7, 8])
    tp3.cells[R_FNP] = 1
    tp3.cells[FNS : FNS + 3] = [vm.store.a_frozen + 1, 1, 1]
    tp3.push(1)
    run(vm, tp3, "dof")
    assert tp3.base == 1


def test_pushdp_counts_itself(vm):
    tp = tape_with(vm, [4, 4, 4])
    run(vm, tp, "pushdp")
    assert tp.stack()[-1] == 4
    run(vm, tp, "dp2ds")
    assert tp.stack()[-1] == 4


def test_aux_stack(vm):
    tp = tape_with(vm, [6])
    run(vm, tp, "toD")
    assert tp.stack() == [] and tp.aux() == [6]
    run(vm, tp, "fromD")
    assert tp.stack() == [6] and tp.aux() == [6]
    run(vm, tp, "delD")
    assert tp.aux() == []
    with pytest.raises(Halt):
        run(vm, tp, "fromD")
    run(vm, tp, "1toD")
    run(vm, tp, "2toD")
    assert tp.aux() == [1, 2]


# -- declarations ------------------------------------------------------------


def eval_token(vm, code, expected):
    tp = vm.new_tape(TargetTask(expected))
    outcome, *_ = execute(vm, tp, code)
    return outcome, tp


def test_c999(vm):
    outcome, tp = eval_token(vm, "c999", 999)
    assert outcome == ALL_SOLVED


@settings(max_examples=25, deadline=None)
@given(st.integers(-3, 6), st.integers(-3, 6))
def test_testexp_matches_formula(x, y):
    vm = Machine()
    want = (6 * x * (4 * y - 1)) ** 2
    tp = vm.new_tape(None)
    tp.push(x)
    tp.push(y)
    execute(vm, tp, "testexp")
    assert tp.stack() == [want]


@settings(max_examples=12, deadline=None)
@given(st.integers(1, 11))
def test_factorials_match_math(n):
    vm = Machine()
    for name in ("fak", "fak2"):
        tp = vm.new_tape(None)
        tp.push(n)
        execute(vm, tp, name)
        assert tp.stack()[-1] == math.factorial(n), name


def test_tailrec_factorial():
    vm = Machine(declarations=TAILREC_DECLARATION)
    assert vm.table.opcode("tailrec") == 83
    for n in (1, 4, 6):
        tp = vm.new_tape(None)
        tp.push(n)
        execute(vm, tp, "qot c1 mul qot tailrec ret")
        assert tp.stack()[-1] == math.factorial(n)


def test_declaration_numbers_and_aliases(vm):
    assert [vm.table.opcode(n) for n in ("fak", "fak2", "c999", "testexp", "defnp", "calltp", "endnp")] == list(range(67, 74))
    assert vm.table.opcode("fac") == 67
    assert vm.table.opcode("pushpat") == vm.table.opcode("pupat") == 21
    assert vm.table.opcode("not") == 34
    assert vm.n_q == 73
    assert vm.store.a_frozen == vm.store.frozen_index[-1][1]


def test_declaration_errors():
    with pytest.raises(DeclarationError):
        parse_declarations("decl 1 x: c1")
    with pytest.raises(DeclarationError):
        Machine(declarations="decl 0 1 foo: c1 nosuch")
    with pytest.raises(DeclarationError):
        Machine(declarations="decl 0 1 fak: c1")
    with pytest.raises(DeclarationError):
        Machine(declarations="decl 0 1 a: b c\ndecl 0 1 b: c1\ndecl 0 1 c: c1")


def test_forward_reference():
    vm = Machine(declarations="# mutual\ndecl 1 1 ev: odd\ndecl 1 1 odd: c1 ret")
    assert vm.table.opcode("ev") == 83 and vm.table.opcode("odd") == 84
    assert vm.store.program(8) == [84]


# -- bias shifting -------------------------------------------------------------


def test_incq_keeps_argument(vm):
    tp = tape_with(vm, [9])
    run(vm, tp, "incQ")
    nums, total = tp.pattern()
    assert nums[9] == 2 and total == 74
    assert tp.stack() == [9]


def test_decq_keeps_two_options(vm):
    tp = tape_with(vm, [])
    nums = [0] * 83
    nums[1] = nums[2] = 1
    nums[3] = 1
    tp.load_pattern(0, nums)
    tp.push(1)
    run(vm, tp, "decQ")
    tp.push(2)
    with pytest.raises(Halt):
        run(vm, tp, "decQ")


def test_pattern_stack(vm):
    tp = tape_with(vm, [9])
    run(vm, tp, "incQ")
    assert run(vm, tp, "pupat") == tp.stride
    assert tp.cells[R_PATP] == 1
    assert tp.pattern(1) == tp.pattern(0)
    tp.push(1)
    run(vm, tp, "setpat")
    tp.push(2)
    with pytest.raises(Halt):
        run(vm, tp, "setpat")
    tp.push(0)
    run(vm, tp, "setpat")
    run(vm, tp, "poppat")
    assert tp.cells[R_PATP] == 0


BIAS = ["incQ", "decQ", "pupat", "setpat", "poppat"]


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(BIAS), st.integers(0, 90)), max_size=40))
def test_pattern_consistency(ops):
    vm = Machine()
    tp = vm.new_tape(None)
    for name, arg in ops:
        tp.push(arg)
        try:
            run(vm, tp, name)
        except Halt:
            pass
        for k in range(tp.cells[R_PATP] + 1):
            nums, total = tp.pattern(k)
            assert sum(nums) == total
            assert sum(1 for v in nums if v > 0) >= 2


# -- editing -------------------------------------------------------------------


small = st.integers(0, 6)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(-5, 50), min_size=1, max_size=12), small, small, small)
def test_insn_matches_list_model(data, a, b, n):
    vm = Machine()
    tp = tape_with(vm, data + [a, b, n])
    try:
        run(vm, tp, "insn")
    except Halt:
        assert a + n > len(data) or b > len(data)
        return
    block = data[a : a + n]
    assert tp.stack() == data[:b] + block + data[b:]


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(-5, 50), min_size=1, max_size=12), small, small)
def test_deln_matches_list_model(data, a, n):
    vm = Machine()
    tp = tape_with(vm, data + [a, n])
    try:
        run(vm, tp, "deln")
    except Halt:
        assert a + n > len(data)
        return
    assert tp.stack() == data[:a] + data[a + n :]


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(-5, 50), min_size=1, max_size=12), small, small, small)
def test_mvn_matches_list_model(data, a, b, n):
    vm = Machine()
    tp = tape_with(vm, data + [a, b, n])
    try:
        run(vm, tp, "mvn")
    except Halt:
        return
    model = list(data)
    block = data[a - 1 : a - 1 + n]
    for j, v in enumerate(block):
        if b - 1 + j < len(model):
            model[b - 1 + j] = v
        else:
            model.append(v)
    assert tp.stack() == model


def test_getq_and_insq(vm):
    tp = tape_with(vm, [3])
    assert run(vm, tp, "getq") == 11
    assert tp.stack() == vm.store.program(3)
    tp = tape_with(vm, [5, 6, 3, 1])
    run(vm, tp, "insq")
    assert tp.stack() == [5] + vm.store.program(3) + [6]


def test_findb_and_find(vm):
    tp = tape_with(vm, [4, 7, 9, 7, 7])
    assert run(vm, tp, "findb") == 2  # scans 4 then 7
    assert tp.stack()[-1] == 2
    tp = tape_with(vm, [4, 7, 9, 11])
    run(vm, tp, "findb")
    assert tp.stack()[-1] == 0
    tp = tape_with(vm, [7, 1, 2, 7])
    run(vm, tp, "find")
    assert tp.stack()[-1] == 1


def test_stack_access(vm):
    tp = tape_with(vm, [1, 2, 3, 2])
    run(vm, tp, "outn")
    assert tp.stack() == [1, 2, 3, 2]
    tp = tape_with(vm, [1, 2, 3, 1, 3])
    run(vm, tp, "xmn")
    assert tp.stack() == [3, 2, 1]
    tp = tape_with(vm, [5, 6, 2])
    run(vm, tp, "outb")
    assert tp.stack() == [5, 6, 6]
    tp = tape_with(vm, [5, 6, 9, 1])
    run(vm, tp, "inb")
    assert tp.stack() == [9, 6, 9]
    tp = tape_with(vm, [5, 6, 2])
    assert run(vm, tp, "cpnb") == 2
    assert tp.stack() == [5, 6, 5, 6]
    tp = tape_with(vm, [5, 6, 7, 2])
    assert run(vm, tp, "cpn") == 2
    assert tp.stack() == [5, 6, 7, 6, 7]


def test_exec_costs_one_plus_inner(vm):
    tp = tape_with(vm, [2, 5, vm.table.opcode("powr")])
    assert run(vm, tp, "exec") == 6
    assert tp.stack() == [32]


# -- table-wide properties --------------------------------------------------------


def test_signatures_cover_table(vm):
    for e in vm.table.entries[1:]:
        if e.kind != "user":
            assert SIGNATURES[e.mnemonic][2] == e.cost


UNIT = [n for n, (_, _, c) in SIGNATURES.items() if c == "1"]


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(UNIT), st.lists(st.integers(-3, 90), max_size=8))
def test_unit_cost_instructions_cost_one(name, data):
    vm = Machine()
    tp = tape_with(vm, data)
    try:
        cost = run(vm, tp, name)
    except Halt:
        return
    assert cost == 1


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(1, 82), max_size=25))
def test_quoting_round_trip(words):
    vm = Machine()
    qot = vm.table.opcode("qot")
    assume(qot not in words)
    tp = vm.new_tape(None)
    outcome, *_ = execute(vm, tp, ["qot"] + [vm.table.mnemonic(w) for w in words] + ["qot"])
    assert tp.stack() == words


def test_table_layout():
    from oops.core_state import CodeStore

    t = OpcodeTable(CodeStore())
    assert t.size == 82
    assert [e.kind for e in t.entries[1:6]] == ["task"] * 5
    assert all(e.kind == "extended" for e in t.entries[74:])
    assert t.searchable == list(range(1, 74))
