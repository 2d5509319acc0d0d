"""Opcode table, primitive semantics and user declarations.

Every handler has the signature ``handler(vm, tp) -> cost`` where ``vm`` is
the interpreter (for the code store and dispatch table) and ``tp`` the
executing task's tape. Handlers raise :class:`Halt` on illegal use. The
instruction pointer has already been advanced past the instruction when a
handler runs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .core_state import (
    CS,
    DDS,
    DS_TOP,
    FNS,
    MAX_ABS,
    MAXCP,
    MAXDDP,
    MAXDP,
    MAXFNS,
    MAXPATS,
    PATS,
    R_CP,
    R_CURP,
    R_DDP,
    R_DP,
    R_FNP,
    R_IDLE,
    R_PATP,
    R_QUOTE,
    CodeStore,
    Halt,
)

# Opcodes 1..73 in the canonical order. 1..5 are the task-specific
# primitives, 67..73 the stock declarations.
CORE_MNEMONICS = (
    "1toD 2toD mvdsk xAD xSA bsf boostq add mul powr sub div inc dec by2 "
    "getq insq findb incQ decQ pupat setpat insn mvn deln intpf def topf dof "
    "oldf bsjmp ret rt0 neg eq grt clear del up ex jmp1 outn inn cpn xmn outb "
    "inb cpnb xmnb ip2ds pip pushdp dp2ds toD fromD delD tsk c0 c1 c2 c3 c4 c5 "
    "exec qot nop fak fak2 c999 testexp defnp calltp endnp"
).split()

# Implemented but not part of the searched alphabet (numerator 0 initially).
EXTENDED_MNEMONICS = "geq and or base setdp popf outopf poppat find".split()

ALIASES = {
    "pushpat": "pupat",
    "not": "neg",
    "oldq": "oldf",
    "fac": "fak",
    "fac2": "fak2",
    "ins": "insn",
    "innb": "inb",
    "intopf": "intpf",
}

BIAS_SHIFTERS = ("incQ", "decQ", "boostq", "pupat", "setpat", "poppat")

STOCK_DECLARATIONS = """\
# factorial, recursive through its own name
decl 1 1 fak: up c1 ex rt0 del up dec fak mul ret
# factorial through a self-made function
decl 1 1 fak2: c1 c1 def up c1 ex rt0 del up dec topf dof mul ret
decl 0 1 c999: c5 c5 mul c5 c4 c2 mul mul mul dec ret
# [6x(4y-1)]^2
decl 2 1 testexp: by2 by2 dec c3 by2 mul mul up mul ret
# make a recursive function from the code that follows, up to endnp
decl -1 -1 defnp: c0 toD pushdp dec toD qot def up rt0 dec intpf cpn qot ret
decl -1 -1 calltp: qot topf dof intpf cpn qot ret
decl -1 -1 endnp: qot ret qot fromD cpnb fromD up delD fromD ex bsf ret
"""

# Not loaded by default; `qot c1 mul qot tailrec ret` computes factorial.
TAILREC_DECLARATION = (
    "decl -1 -1 tailrec: qot c1 c1 def up qot c2 outb qot ex rt0 del up dec "
    "topf dof qot c3 outb qot ret qot c1 outb c3 bsjmp\n"
)

# (inputs, outputs, cost model). Cost models: "1" fixed; "y" the exponent;
# "n" cells written; "scan" cells scanned; "len" program length; "call"
# one step plus whatever the callee executes.
SIGNATURES = {
    "1toD": (0, 0, "1"), "2toD": (0, 0, "1"), "mvdsk": (0, 0, "1"),
    "xAD": (0, 0, "1"), "xSA": (0, 0, "1"), "bsf": (1, 0, "call"),
    "boostq": (1, 0, "len"), "add": (2, 1, "1"), "mul": (2, 1, "1"),
    "powr": (2, 1, "y"), "sub": (2, 1, "1"), "div": (2, 1, "1"),
    "inc": (1, 1, "1"), "dec": (1, 1, "1"), "by2": (1, 1, "1"),
    "getq": (1, -1, "len"), "insq": (2, -1, "n"), "findb": (1, 1, "scan"),
    "incQ": (0, 0, "1"), "decQ": (0, 0, "1"), "pupat": (0, 0, "n"),
    "setpat": (1, 0, "1"), "insn": (3, -1, "n"), "mvn": (3, -1, "n"),
    "deln": (2, -1, "n"), "intpf": (0, 1, "1"), "def": (2, 0, "1"),
    "topf": (0, 1, "1"), "dof": (1, 0, "call"), "oldf": (1, 0, "call"),
    "bsjmp": (1, 0, "1"), "ret": (0, 0, "n"), "rt0": (1, 0, "n"),
    "neg": (1, 1, "1"), "eq": (2, 1, "1"), "grt": (2, 1, "1"),
    "clear": (0, 0, "1"), "del": (1, 0, "1"), "up": (1, 2, "1"),
    "ex": (2, 2, "1"), "jmp1": (2, 0, "1"), "outn": (1, 1, "1"),
    "inn": (1, 0, "1"), "cpn": (1, -1, "n"), "xmn": (2, 0, "1"),
    "outb": (1, 1, "1"), "inb": (1, 0, "1"), "cpnb": (1, -1, "n"),
    "xmnb": (2, 0, "1"), "ip2ds": (0, 1, "1"), "pip": (1, 0, "1"),
    "pushdp": (0, 1, "1"), "dp2ds": (0, 1, "1"), "toD": (1, 0, "1"),
    "fromD": (0, 1, "1"), "delD": (0, 0, "1"), "tsk": (0, 1, "1"),
    "c0": (0, 1, "1"), "c1": (0, 1, "1"), "c2": (0, 1, "1"),
    "c3": (0, 1, "1"), "c4": (0, 1, "1"), "c5": (0, 1, "1"),
    "exec": (1, -1, "call"), "qot": (0, 0, "1"), "nop": (0, 0, "1"),
    "geq": (2, 1, "1"), "and": (2, 1, "1"), "or": (2, 1, "1"),
    "base": (0, 1, "1"), "setdp": (1, 0, "1"), "popf": (0, 1, "1"),
    "outopf": (0, 1, "1"), "poppat": (0, 1, "1"), "find": (1, 1, "scan"),
}


class DeclarationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# helpers


def _val(v: int) -> int:
    if v > MAX_ABS or v < -MAX_ABS:
        raise Halt("arithmetic result out of range")
    return v


def _base(tp) -> int:
    return tp.cells[CS + 3 * tp.cells[R_CP] + 1]


def _need(tp, k: int) -> int:
    """dp, after checking that k elements are on ds."""
    dp = tp.cells[R_DP]
    if dp < k:
        raise Halt("data stack underflow")
    return dp


def _call(tp, target: int, base: int, out: int) -> None:
    cp = tp.cells[R_CP] + 1
    if cp > MAXCP:
        raise Halt("call stack overflow")
    if base < 0 or base > tp.cells[R_DP]:
        raise Halt("bad frame base")
    f = CS + 3 * cp
    tp.set(f, target)
    tp.set(f + 1, base)
    tp.set(f + 2, out)
    tp.set(R_CP, cp)


def _ret(tp) -> int:
    c = tp.cells
    cp = c[R_CP]
    f = CS + 3 * cp
    base = c[f + 1]
    out = c[f + 2]
    cost = 1
    if out >= 0:
        dp = c[R_DP]
        if dp - base < out:
            raise Halt("too few return values")
        for j in range(out):
            tp.set(DS_TOP - (base + 1 + j), c[DS_TOP - (dp - out + 1 + j)])
        tp.set(R_DP, base + out)
        cost = max(1, out)
    if cp == 0:
        tp.set(R_IDLE, 1)
    else:
        tp.set(R_CP, cp - 1)
    return cost


def _ds_address(tp, k: int) -> int:
    if k < 1 or k > MAXDP:
        raise Halt("address outside data stack")
    return k - DS_TOP


def _pat_offset(tp) -> int:
    return PATS + tp.cells[R_CURP] * tp.stride


def _token_index(tp, i: int) -> int:
    if i < 1 or i > tp.size:
        raise Halt("no such token")
    return i


# ---------------------------------------------------------------------------
# task-specific primitives


def op_1toD(vm, tp) -> int:
    _push_aux(tp, 1)
    return 1


def op_2toD(vm, tp) -> int:
    _push_aux(tp, 2)
    return 1


def _push_aux(tp, v: int) -> None:
    Dp = tp.cells[R_DDP] + 1
    if Dp > MAXDDP:
        raise Halt("auxiliary stack overflow")
    tp.set(DDS + Dp, v)
    tp.set(R_DDP, Dp)


def _peg_slots(tp) -> int:
    # The peg symbols S, A, D are the three cells just below the top of ds
    # (the top holds the disk count in the canonical layout).
    dp = tp.cells[R_DP]
    if dp - 3 <= _base(tp):
        raise Halt("peg symbols not available")
    return dp


def op_mvdsk(vm, tp) -> int:
    move = getattr(tp.task, "move_disk", None)
    if move is None:
        raise Halt("task has no disks")
    dp = _peg_slots(tp)
    move(tp, tp.cells[DS_TOP - (dp - 3)], tp.cells[DS_TOP - (dp - 1)])
    return 1


def _swap(tp, a: int, b: int) -> None:
    c = tp.cells
    va, vb = c[DS_TOP - a], c[DS_TOP - b]
    tp.set(DS_TOP - a, vb)
    tp.set(DS_TOP - b, va)


def op_xAD(vm, tp) -> int:
    if not hasattr(tp.task, "move_disk"):
        raise Halt("task has no pegs")
    dp = _peg_slots(tp)
    _swap(tp, dp - 2, dp - 1)
    return 1


def op_xSA(vm, tp) -> int:
    if not hasattr(tp.task, "move_disk"):
        raise Halt("task has no pegs")
    dp = _peg_slots(tp)
    _swap(tp, dp - 3, dp - 2)
    return 1


# ---------------------------------------------------------------------------
# arithmetic and boolean


def _binary(fn):
    def op(vm, tp) -> int:
        y = tp.pop()
        x = tp.pop()
        tp.push(_val(fn(x, y)))
        return 1

    op.__name__ = fn.__name__
    return op


def _unary(fn):
    def op(vm, tp) -> int:
        tp.push(_val(fn(tp.pop())))
        return 1

    op.__name__ = fn.__name__
    return op


def _div(x: int, y: int) -> int:
    if y == 0:
        raise Halt("division by zero")
    return x // y


op_add = _binary(lambda x, y: x + y)
op_mul = _binary(lambda x, y: x * y)
op_sub = _binary(lambda x, y: x - y)
op_div = _binary(_div)
op_eq = _binary(lambda x, y: int(x == y))
op_grt = _binary(lambda x, y: int(x > y))
op_geq = _binary(lambda x, y: int(x >= y))
op_and = _binary(lambda x, y: int(x > 0 and y > 0))
op_or = _binary(lambda x, y: int(x > 0 or y > 0))
op_inc = _unary(lambda x: x + 1)
op_dec = _unary(lambda x: x - 1)
op_by2 = _unary(lambda x: 2 * x)
op_neg = _unary(lambda x: int(x <= 0))


def op_powr(vm, tp) -> int:
    y = tp.pop()
    x = tp.pop()
    if y < 0:
        raise Halt("negative exponent")
    # repeated multiplication, checked at every step
    r = 1
    for _ in range(y):
        r = _val(r * x)
    tp.push(r)
    return max(1, y)


def _const(k: int):
    def op(vm, tp) -> int:
        tp.push(k)
        return 1

    op.__name__ = f"c{k}"
    return op


# ---------------------------------------------------------------------------
# stack manipulation


def op_clear(vm, tp) -> int:
    tp.set(R_DP, 0)
    return 1


def op_del(vm, tp) -> int:
    tp.pop()
    return 1


def op_up(vm, tp) -> int:
    dp = _need(tp, 1)
    tp.push(tp.cells[DS_TOP - dp])
    return 1


def op_ex(vm, tp) -> int:
    dp = _need(tp, 2)
    _swap(tp, dp, dp - 1)
    return 1


def op_outn(vm, tp) -> int:
    n = tp.pop()
    dp = tp.cells[R_DP]
    if n < 1 or n > dp:
        raise Halt("outn index")
    tp.push(tp.cells[DS_TOP - (dp - n + 1)])
    return 1


def op_inn(vm, tp) -> int:
    n = tp.pop()
    dp = tp.cells[R_DP]
    if n < 1 or n > dp:
        raise Halt("inn index")
    tp.set(DS_TOP - (dp - n + 1), tp.cells[DS_TOP - dp])
    return 1


def op_cpn(vm, tp) -> int:
    n = tp.pop()
    dp = tp.cells[R_DP]
    if n < 0 or n > dp or dp + n > MAXDP:
        raise Halt("cpn range")
    for k in range(dp - n + 1, dp + 1):
        tp.push(tp.cells[DS_TOP - k])
    return max(1, n)


def op_xmn(vm, tp) -> int:
    n = tp.pop()
    m = tp.pop()
    dp = tp.cells[R_DP]
    if not (1 <= m <= dp and 1 <= n <= dp):
        raise Halt("xmn index")
    _swap(tp, dp - m + 1, dp - n + 1)
    return 1


def op_outb(vm, tp) -> int:
    n = tp.pop()
    k = _base(tp) + n
    if n < 1 or k > tp.cells[R_DP]:
        raise Halt("outb index")
    tp.push(tp.cells[DS_TOP - k])
    return 1


def op_inb(vm, tp) -> int:
    n = tp.pop()
    k = _base(tp) + n
    dp = tp.cells[R_DP]
    if n < 1 or k > dp:
        raise Halt("inb index")
    tp.set(DS_TOP - k, tp.cells[DS_TOP - dp])
    return 1


def op_cpnb(vm, tp) -> int:
    n = tp.pop()
    b = _base(tp)
    dp = tp.cells[R_DP]
    if n < 0 or b + n > dp or dp + n > MAXDP:
        raise Halt("cpnb range")
    for k in range(b + 1, b + n + 1):
        tp.push(tp.cells[DS_TOP - k])
    return max(1, n)


def op_xmnb(vm, tp) -> int:
    n = tp.pop()
    m = tp.pop()
    b = _base(tp)
    dp = tp.cells[R_DP]
    if not (1 <= m and b + m <= dp and 1 <= n and b + n <= dp):
        raise Halt("xmnb index")
    _swap(tp, b + m, b + n)
    return 1


def op_ip2ds(vm, tp) -> int:
    tp.push(tp.cells[CS + 3 * tp.cells[R_CP]] - 1)
    return 1


def op_pushdp(vm, tp) -> int:
    # depth above base, counting the pushed cell itself
    tp.push(tp.cells[R_DP] - _base(tp) + 1)
    return 1


def op_dp2ds(vm, tp) -> int:
    tp.push(tp.cells[R_DP])
    return 1


def op_base(vm, tp) -> int:
    tp.push(_base(tp))
    return 1


def op_setdp(vm, tp) -> int:
    x = tp.pop()
    if x < 0 or x > MAXDP:
        raise Halt("setdp range")
    tp.set(R_DP, x)
    return 1


def op_toD(vm, tp) -> int:
    _push_aux(tp, tp.pop())
    return 1


def op_fromD(vm, tp) -> int:
    Dp = tp.cells[R_DDP]
    if Dp < 1:
        raise Halt("auxiliary stack empty")
    tp.push(tp.cells[DDS + Dp])
    return 1


def op_delD(vm, tp) -> int:
    Dp = tp.cells[R_DDP]
    if Dp < 1:
        raise Halt("auxiliary stack empty")
    tp.set(R_DDP, Dp - 1)
    return 1


def op_tsk(vm, tp) -> int:
    tp.push(tp.task_id)
    return 1


# ---------------------------------------------------------------------------
# code pushing and editing


def op_getq(vm, tp) -> int:
    prog = vm.store.program(tp.pop())
    if tp.cells[R_DP] + len(prog) > MAXDP:
        raise Halt("data stack overflow")
    for tok in prog:
        tp.push(tok)
    return max(1, len(prog))


def _insert(tp, pos: int, values: list[int]) -> int:
    """Insert values so the first lands at ds[pos]; returns cells written."""
    c = tp.cells
    dp = c[R_DP]
    n = len(values)
    if pos < 1 or pos > dp + 1 or dp + n > MAXDP:
        raise Halt("insert range")
    for k in range(dp, pos - 1, -1):
        tp.set(DS_TOP - (k + n), c[DS_TOP - k])
    for j, v in enumerate(values):
        tp.set(DS_TOP - (pos + j), v)
    tp.set(R_DP, dp + n)
    return max(1, n + dp - pos + 1)


def op_insq(vm, tp) -> int:
    a = tp.pop()
    prog = vm.store.program(tp.pop())
    b = _base(tp)
    if a < 0:
        raise Halt("insq index")
    return _insert(tp, b + a + 1, prog)


def op_insn(vm, tp) -> int:
    n = tp.pop()
    bb = tp.pop()
    a = tp.pop()
    base = _base(tp)
    dp = tp.cells[R_DP]
    if n < 0 or a < 0 or bb < 0 or base + a + n > dp or base + bb > dp:
        raise Halt("insn range")
    block = [tp.cells[DS_TOP - k] for k in range(base + a + 1, base + a + n + 1)]
    return _insert(tp, base + bb + 1, block)


def op_mvn(vm, tp) -> int:
    n = tp.pop()
    bb = tp.pop()
    a = tp.pop()
    base = _base(tp)
    dp = tp.cells[R_DP]
    src, dst = base + a, base + bb
    if n < 0 or a < 1 or bb < 1 or src + n - 1 > dp or dst + n - 1 > MAXDP or dst > dp + 1:
        raise Halt("mvn range")
    block = [tp.cells[DS_TOP - k] for k in range(src, src + n)]
    for j, v in enumerate(block):
        tp.set(DS_TOP - (dst + j), v)
    if dst + n - 1 > dp:
        tp.set(R_DP, dst + n - 1)
    return max(1, n)


def op_deln(vm, tp) -> int:
    n = tp.pop()
    a = tp.pop()
    base = _base(tp)
    c = tp.cells
    dp = c[R_DP]
    lo = base + a + 1
    if n < 0 or a < 0 or lo + n - 1 > dp:
        raise Halt("deln range")
    for k in range(lo, dp - n + 1):
        tp.set(DS_TOP - k, c[DS_TOP - (k + n)])
    tp.set(R_DP, dp - n)
    return max(1, dp - n - lo + 1)


def op_findb(vm, tp) -> int:
    x = tp.pop()
    base = _base(tp)
    c = tp.cells
    scanned = 0
    found = 0
    for k in range(base + 1, c[R_DP] + 1):
        scanned += 1
        if c[DS_TOP - k] == x:
            found = k - base
            break
    tp.push(found)
    return max(1, scanned)


def op_find(vm, tp) -> int:
    x = tp.pop()
    c = tp.cells
    scanned = 0
    found = 0
    for k in range(c[R_DP], 0, -1):
        scanned += 1
        if c[DS_TOP - k] == x:
            found = k
            break
    tp.push(found)
    return max(1, scanned)


# ---------------------------------------------------------------------------
# functions and control


def _fn_entry(tp, name: int) -> int:
    if name < 1 or name > tp.cells[R_FNP]:
        raise Halt("no such function")
    return FNS + 3 * (name - 1)


def op_def(vm, tp) -> int:
    n = tp.pop()
    m = tp.pop()
    fnp = tp.cells[R_FNP] + 1
    if fnp > MAXFNS:
        raise Halt("too many functions")
    e = FNS + 3 * (fnp - 1)
    tp.set(e, tp.cells[CS + 3 * tp.cells[R_CP]])
    tp.set(e + 1, m)
    tp.set(e + 2, n)
    tp.set(R_FNP, fnp)
    return 1


def op_topf(vm, tp) -> int:
    fnp = tp.cells[R_FNP]
    if fnp < 1:
        raise Halt("no functions")
    tp.push(fnp)
    return 1


def op_intpf(vm, tp) -> int:
    tp.push(tp.cells[_fn_entry(tp, tp.cells[R_FNP]) + 1])
    return 1


def op_outopf(vm, tp) -> int:
    tp.push(tp.cells[_fn_entry(tp, tp.cells[R_FNP]) + 2])
    return 1


def op_popf(vm, tp) -> int:
    fnp = tp.cells[R_FNP]
    if fnp < 1:
        raise Halt("no functions")
    tp.set(R_FNP, fnp - 1)
    tp.push(fnp)
    return 1


def op_dof(vm, tp) -> int:
    e = _fn_entry(tp, tp.pop())
    c = tp.cells
    m = c[e + 1]
    base = _base(tp) if m < 0 else c[R_DP] - m
    _call(tp, c[e], base, c[e + 2])
    return 1


def op_oldf(vm, tp) -> int:
    n = tp.pop()
    store = vm.store
    if n < 1 or n > len(store.frozen_index):
        raise Halt("no such frozen program")
    _call(tp, store.frozen_index[n - 1][0], tp.cells[R_DP], 0)
    return 1


def op_bsf(vm, tp) -> int:
    n = tp.pop()
    base = _base(tp)
    _call(tp, _ds_address(tp, base + n + 1), base, -1)
    return 1


def op_bsjmp(vm, tp) -> int:
    n = tp.pop()
    tp.set_ip(_ds_address(tp, _base(tp) + n + 1))
    return 1


def op_ret(vm, tp) -> int:
    return _ret(tp)


def op_rt0(vm, tp) -> int:
    if tp.pop() <= 0:
        return _ret(tp)
    return 1


def op_jmp1(vm, tp) -> int:
    n = tp.pop()
    val = tp.pop()
    if val > 0:
        tp.set_ip(n)
    return 1


def op_pip(vm, tp) -> int:
    tp.set_ip(tp.pop())
    return 1


def op_exec(vm, tp) -> int:
    n = tp.pop()
    if n < 1 or n > tp.size:
        raise Halt("exec of unknown instruction")
    return 1 + vm.dispatch[n](vm, tp)


def op_qot(vm, tp) -> int:
    tp.set(R_QUOTE, 1 - tp.cells[R_QUOTE])
    return 1


def op_nop(vm, tp) -> int:
    return 1


def user_token(start: int, m: int, n: int):
    """Semantics of a declared token: call its body like a self-made function."""

    def op(vm, tp) -> int:
        base = _base(tp) if m < 0 else tp.cells[R_DP] - m
        _call(tp, start, base, n)
        return 1

    return op


# ---------------------------------------------------------------------------
# bias shifting


def op_incQ(vm, tp) -> int:
    i = _token_index(tp, tp.ds(_need(tp, 1)))
    off = _pat_offset(tp)
    tp.set(off + i - 1, tp.cells[off + i - 1] + 1)
    tp.set(off + tp.size, tp.cells[off + tp.size] + 1)
    return 1


def op_decQ(vm, tp) -> int:
    i = _token_index(tp, tp.ds(_need(tp, 1)))
    off = _pat_offset(tp)
    c = tp.cells
    v = c[off + i - 1]
    if v < 1:
        raise Halt("numerator already zero")
    if v == 1:
        positive = sum(1 for k in range(off, off + tp.size) if c[k] > 0)
        if positive <= 2:
            raise Halt("need two positive options")
    tp.set(off + i - 1, v - 1)
    tp.set(off + tp.size, c[off + tp.size] - 1)
    return 1


def op_boostq(vm, tp) -> int:
    prog = vm.store.discovered(tp.pop())
    off = _pat_offset(tp)
    c = tp.cells
    size = tp.size
    for tok in prog:
        if 1 <= tok <= size:
            tp.set(off + tok - 1, c[off + tok - 1] + vm.n_q)
            tp.set(off + size, c[off + size] + vm.n_q)
    return max(1, len(prog))


def op_pupat(vm, tp) -> int:
    patp = tp.cells[R_PATP] + 1
    if patp > MAXPATS:
        raise Halt("too many patterns")
    src = _pat_offset(tp)
    dst = PATS + patp * tp.stride
    for j in range(tp.stride):
        tp.set(dst + j, tp.cells[src + j])
    tp.set(R_PATP, patp)
    return tp.stride


def op_setpat(vm, tp) -> int:
    x = tp.pop()
    if x < 0 or x > tp.cells[R_PATP]:
        raise Halt("no such pattern")
    tp.set(R_CURP, x)
    return 1


def op_poppat(vm, tp) -> int:
    patp = tp.cells[R_PATP]
    if patp < 1 or tp.cells[R_CURP] >= patp:
        raise Halt("cannot drop pattern")
    tp.set(R_PATP, patp - 1)
    tp.push(patp)
    return 1


# ---------------------------------------------------------------------------
# table


@dataclass(frozen=True)
class OpEntry:
    number: int
    mnemonic: str
    kind: str  # "task", "primitive", "user" or "extended"
    n_in: int
    n_out: int
    cost: str


@dataclass(frozen=True)
class Declaration:
    m: int
    n: int
    name: str
    body: tuple[str, ...]


_DECL_RE = re.compile(r"^decl\s+(-?\d+)\s+(-?\d+)\s+(\S+?)\s*:\s*(.*)$")


def parse_declarations(text: str) -> list[Declaration]:
    decls = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        mt = _DECL_RE.match(line)
        if not mt:
            raise DeclarationError(f"line {lineno}: expected 'decl m n name: tokens'")
        m, n, name, body = mt.groups()
        toks = tuple(body.split())
        if not toks:
            raise DeclarationError(f"line {lineno}: empty body for {name}")
        decls.append(Declaration(int(m), int(n), name, toks))
    return decls


def _primitive_handlers() -> dict:
    g = globals()
    table = {}
    for name in CORE_MNEMONICS[:66] + EXTENDED_MNEMONICS:
        if name in ("c0", "c1", "c2", "c3", "c4", "c5"):
            table[name] = _const(int(name[1]))
        else:
            table[name] = g[f"op_{name}"]
    return table


PRIMITIVES = _primitive_handlers()


class OpcodeTable:
    """Opcode number -> entry and handler.

    Layout: 1..66 primitives, then the stock declarations (67..73), then the
    extended primitives, then any further user declarations.
    """

    def __init__(self, store: CodeStore, extra_declarations: str = "", stock: bool = True) -> None:
        self.entries: list[OpEntry | None] = [None]
        self.handlers: list = [None]
        self.by_name: dict[str, int] = {}
        for name in CORE_MNEMONICS[:66]:
            kind = "task" if len(self.entries) <= 5 else "primitive"
            self._add_primitive(name, kind)
        if stock:
            self.declare_all(store, STOCK_DECLARATIONS)
        for name in EXTENDED_MNEMONICS:
            self._add_primitive(name, "extended")
        if extra_declarations:
            self.declare_all(store, extra_declarations)

    def _add_primitive(self, name: str, kind: str) -> None:
        n_in, n_out, cost = SIGNATURES[name]
        self._bind(OpEntry(len(self.entries), name, kind, n_in, n_out, cost), PRIMITIVES[name])

    def _bind(self, entry: OpEntry, handler) -> None:
        self.entries.append(entry)
        self.handlers.append(handler)
        self.by_name[entry.mnemonic] = entry.number

    @property
    def size(self) -> int:
        return len(self.entries) - 1

    @property
    def searchable(self) -> list[int]:
        return [e.number for e in self.entries[1:] if e.kind != "extended"]

    @property
    def n_q(self) -> int:
        return len(self.searchable)

    def opcode(self, name: str) -> int:
        name = ALIASES.get(name, name)
        if name not in self.by_name:
            raise KeyError(name)
        return self.by_name[name]

    def mnemonic(self, number: int) -> str:
        return self.entries[number].mnemonic

    def encode(self, text: str | list[str]) -> list[int]:
        toks = text.split() if isinstance(text, str) else text
        return [self.opcode(t) for t in toks]

    def decode(self, code: list[int]) -> str:
        return " ".join(self.mnemonic(t) if 1 <= t <= self.size else str(t) for t in code)

    def declare_all(self, store: CodeStore, text: str) -> list[int]:
        decls = parse_declarations(text)
        first = self.size + 1
        planned = {}
        for k, d in enumerate(decls):
            name = ALIASES.get(d.name, d.name)
            if name in self.by_name or name in planned:
                raise DeclarationError(f"duplicate name {d.name}")
            planned[name] = first + k
        numbers = []
        for d in decls:
            name = ALIASES.get(d.name, d.name)
            body = []
            forward = set()
            for tok in d.body:
                t = ALIASES.get(tok, tok)
                if t in self.by_name:
                    body.append(self.by_name[t])
                elif t in planned:
                    if t != name:
                        forward.add(t)
                    body.append(planned[t])
                else:
                    raise DeclarationError(f"{d.name}: unknown token {tok}")
            if len(forward) > 1:
                raise DeclarationError(f"{d.name}: more than one forward reference")
            start = store.declare(body)
            entry = OpEntry(planned[name], name, "user", d.m, d.n, "call")
            assert entry.number == self.size + 1
            self._bind(entry, user_token(start, d.m, d.n))
            numbers.append(entry.number)
        return numbers

    def dump(self) -> str:
        return "\n".join(f"{e.number}: {e.mnemonic}" for e in self.entries[1:])
