"""Symbolic expression trees over 256-bit words.

Leaves name transaction inputs (caller, callvalue, timestamp, calldata
arguments), environment reads (the contract's own balance, initial storage
words) and unconstrained unknowns.  Interior nodes are the IR operators.
Every expression renders to a canonical prefix form, e.g.
``div(sub(store(1), calldata(0x11223344,0)), 100)``; leaf renderings double
as the binding keys for concrete evaluation.
"""
from __future__ import annotations

from dataclasses import dataclass

WORD = 1 << 256
MASK = WORD - 1

_BINARY = ("add", "sub", "mul", "div", "mod", "lt", "gt", "eq", "and", "or")
_LEAVES = ("const", "fresh", "caller", "callvalue", "timestamp", "balance_self", "store", "calldata")


class UnboundLeaf(KeyError):
    """A concrete evaluation met a leaf with no binding."""

    def __init__(self, name: str):
        super().__init__(name)
        self.name = name


@dataclass(frozen=True)
class SymExpr:
    op: str
    args: tuple["SymExpr", ...] = ()
    value: int | None = None
    name: str | None = None

    def render(self) -> str:
        return render(self)

    @property
    def is_const(self) -> bool:
        return self.op == "const"


def const(value: int) -> SymExpr:
    return SymExpr("const", value=value % WORD)


def fresh(name: str) -> SymExpr:
    return SymExpr("fresh", name=name)


def caller() -> SymExpr:
    return SymExpr("caller")


def callvalue() -> SymExpr:
    return SymExpr("callvalue")


def timestamp() -> SymExpr:
    return SymExpr("timestamp")


def balance_self() -> SymExpr:
    return SymExpr("balance_self")


def store(slot: int) -> SymExpr:
    """The word sitting in storage slot `slot` when the call starts."""
    return SymExpr("store", value=slot)


def calldata(selector: str, index: int) -> SymExpr:
    return SymExpr("calldata", value=index, name=selector)


def _apply(op: str, a: int, b: int) -> int:
    if op == "add":
        return (a + b) % WORD
    if op == "sub":
        return (a - b) % WORD
    if op == "mul":
        return (a * b) % WORD
    if op == "div":
        return a // b if b else 0
    if op == "mod":
        return a % b if b else 0
    if op == "lt":
        return int(a < b)
    if op == "gt":
        return int(a > b)
    if op == "eq":
        return int(a == b)
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    raise ValueError(f"unknown operator {op!r}")


def binop(op: str, lhs: SymExpr, rhs: SymExpr) -> SymExpr:
    """Build an operator node, folding constants.  Division or modulo by a
    constant zero folds to 0 outright, so such a node is never built."""
    if op not in _BINARY:
        raise ValueError(f"unknown operator {op!r}")
    if lhs.is_const and rhs.is_const:
        return const(_apply(op, lhs.value, rhs.value))
    if op in ("div", "mod") and rhs.is_const and rhs.value == 0:
        return const(0)
    return SymExpr(op, args=(lhs, rhs))


def iszero(x: SymExpr) -> SymExpr:
    if x.is_const:
        return const(int(x.value == 0))
    return SymExpr("iszero", args=(x,))


def render(e: SymExpr) -> str:
    if e.op == "const":
        return str(e.value)
    if e.op == "fresh":
        return e.name
    if e.op in ("caller", "callvalue", "timestamp"):
        return e.op
    if e.op == "balance_self":
        return "balance(self)"
    if e.op == "store":
        return f"store({e.value})"
    if e.op == "calldata":
        return f"calldata({e.name},{e.value})"
    inner = ", ".join(render(a) for a in e.args)
    return f"{e.op}({inner})"


def leaves(e: SymExpr) -> frozenset[str]:
    """Rendered names of all non-constant leaves."""
    if e.op == "const":
        return frozenset()
    if not e.args:
        return frozenset((render(e),))
    out: set[str] = set()
    for a in e.args:
        out |= leaves(a)
    return frozenset(out)


def contains_op(e: SymExpr, op: str) -> bool:
    if e.op == op:
        return True
    return any(contains_op(a, op) for a in e.args)


def eval_concrete(e: SymExpr, bindings: dict[str, int]) -> int:
    """Evaluate under 256-bit wrapping semantics; division and modulo by
    zero yield 0; comparisons yield 0/1.  Non-constant leaves are looked up
    by their rendered name."""
    if e.op == "const":
        return e.value
    if e.op in _LEAVES:
        key = render(e)
        if key not in bindings:
            raise UnboundLeaf(key)
        return bindings[key] % WORD
    if e.op == "iszero":
        return int(eval_concrete(e.args[0], bindings) == 0)
    a = eval_concrete(e.args[0], bindings)
    b = eval_concrete(e.args[1], bindings)
    return _apply(e.op, a, b)
