"""Line-oriented text format for the contract IR.

Grammar (one construct per line, `#` starts a comment):

    contract 0x<40 hex>
    function <name> public sig 0x<8 hex> params (v0, v1) {
    function <name> private params () {
    block <id>:
    <sid>: [<var> =] <OPCODE> <operand>*
    jump <id> | jumpi <var> <then> <else> | return <vars> |
    returnprivate <target> <vars> | revert | stop
    }

Operands are `v`-prefixed variable names, decimal or 0x literals, or the
`slot(<n>)` sugar for a literal storage slot.  Textual statement labels are
accepted but discarded; statements are identified positionally as
`function.block.index`, which is what the printer emits.
"""
from __future__ import annotations

import re

from .model import (
    ArityMismatch,
    IrBlock,
    IrFunction,
    IrProgram,
    IrStatement,
    IrSyntaxError,
    Opcode,
    TermKind,
    Terminator,
    UnknownOpcode,
    _ARITY,
    validate,
)

_ADDRESS_RE = re.compile(r"^0x[0-9a-fA-F]{40}$")
_SELECTOR_RE = re.compile(r"^0x[0-9a-fA-F]{8}$")
_VAR_RE = re.compile(r"^v[A-Za-z0-9_]*$")
_SLOT_RE = re.compile(r"^slot\((0x[0-9a-fA-F]+|\d+)\)$")
_TERMINATORS = {k.value for k in TermKind}


def _operand(tok: str, line: int) -> str | int:
    if _VAR_RE.match(tok):
        return tok
    m = _SLOT_RE.match(tok)
    if m:
        tok = m.group(1)
    try:
        return int(tok, 16) if tok.lower().startswith("0x") else int(tok, 10)
    except ValueError:
        raise IrSyntaxError(line, f"bad operand {tok!r}") from None


def parse_ir(text: str) -> IrProgram:
    """Parse and validate a program; raises IrError subclasses."""
    address: str | None = None
    functions: list[IrFunction] = []

    fn_name: str | None = None
    fn_selector: str | None = None
    fn_params: tuple[str, ...] = ()
    fn_blocks: list[IrBlock] = []

    blk_id: str | None = None
    blk_stmts: list[IrStatement] = []
    blk_term: Terminator | None = None

    def close_block(line: int) -> None:
        nonlocal blk_id, blk_stmts, blk_term
        if blk_id is None:
            return
        if blk_term is None:
            raise IrSyntaxError(line, f"block {blk_id} has no terminator")
        fn_blocks.append(IrBlock(blk_id, tuple(blk_stmts), blk_term))
        blk_id, blk_stmts, blk_term = None, [], None

    def close_function(line: int) -> None:
        nonlocal fn_name, fn_selector, fn_params, fn_blocks
        close_block(line)
        if not fn_blocks:
            raise IrSyntaxError(line, f"function {fn_name} has no blocks")
        functions.append(IrFunction(fn_name, fn_selector, fn_params, tuple(fn_blocks)))
        fn_name, fn_selector, fn_params, fn_blocks = None, None, (), []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue

        if line.startswith("contract "):
            tok = line.split()[1]
            if not _ADDRESS_RE.match(tok):
                raise IrSyntaxError(lineno, f"bad contract address {tok!r}")
            if address is not None:
                raise IrSyntaxError(lineno, "duplicate contract header")
            address = tok.lower()
            continue

        if line.startswith("function "):
            if fn_name is not None:
                raise IrSyntaxError(lineno, "function inside function")
            m = re.match(
                r"^function\s+(\w+)\s+(public\s+sig\s+(0x[0-9a-fA-F]{8})|private)"
                r"\s+params\s*\(([^)]*)\)\s*\{$",
                line,
            )
            if not m:
                raise IrSyntaxError(lineno, f"bad function header: {line!r}")
            fn_name = m.group(1)
            fn_selector = m.group(3).lower() if m.group(3) else None
            params = [p.strip() for p in m.group(4).split(",") if p.strip()]
            for p in params:
                if not _VAR_RE.match(p):
                    raise IrSyntaxError(lineno, f"bad parameter name {p!r}")
            fn_params = tuple(params)
            continue

        if line == "}":
            if fn_name is None:
                raise IrSyntaxError(lineno, "unmatched '}'")
            close_function(lineno)
            continue

        if fn_name is None:
            raise IrSyntaxError(lineno, f"statement outside function: {line!r}")

        if line.startswith("block "):
            close_block(lineno)
            m = re.match(r"^block\s+(\w+)\s*:$", line)
            if not m:
                raise IrSyntaxError(lineno, f"bad block header: {line!r}")
            blk_id = m.group(1)
            continue

        if blk_id is None:
            raise IrSyntaxError(lineno, f"statement outside block: {line!r}")
        if blk_term is not None:
            raise IrSyntaxError(lineno, f"statement after terminator: {line!r}")

        toks = line.split()
        if toks[0] in _TERMINATORS:
            blk_term = _parse_terminator(toks, lineno)
            continue

        # "<sid>: [<var> =] OPCODE operands..."
        if not toks[0].endswith(":"):
            raise IrSyntaxError(lineno, f"missing statement label: {line!r}")
        body = toks[1:]
        defvar: str | None = None
        if len(body) >= 2 and body[1] == "=":
            if not _VAR_RE.match(body[0]):
                raise IrSyntaxError(lineno, f"bad def variable {body[0]!r}")
            defvar = body[0]
            body = body[2:]
        if not body:
            raise IrSyntaxError(lineno, "empty statement")
        try:
            opcode = Opcode(body[0])
        except ValueError:
            raise UnknownOpcode(lineno, f"unknown opcode {body[0]!r}") from None

        if opcode is Opcode.CALLPRIVATE:
            if len(body) < 2:
                raise ArityMismatch(lineno, "CALLPRIVATE needs a callee")
            args: tuple[str | int, ...] = (body[1],) + tuple(
                _operand(t, lineno) for t in body[2:]
            )
        else:
            args = tuple(_operand(t, lineno) for t in body[1:])

        lo, hi, need_def, may_def = _ARITY[opcode]
        n = len(args) - (1 if opcode is Opcode.CALLPRIVATE else 0)
        if n < lo or (hi is not None and n > hi):
            raise ArityMismatch(lineno, f"{opcode.value} takes {lo}..{hi} operands, got {n}")
        if opcode is Opcode.CONST and not isinstance(args[0], int):
            raise ArityMismatch(lineno, "CONST takes a literal")
        if need_def and defvar is None:
            raise ArityMismatch(lineno, f"{opcode.value} must define a variable")
        if defvar is not None and not may_def:
            raise ArityMismatch(lineno, f"{opcode.value} cannot define a variable")

        sid = f"{fn_name}.{blk_id}.{len(blk_stmts)}"
        blk_stmts.append(IrStatement(sid, opcode, defvar, args))

    if fn_name is not None:
        raise IrSyntaxError(len(text.splitlines()), "unterminated function")
    if address is None:
        raise IrSyntaxError(1, "missing contract header")

    program = IrProgram(address, tuple(functions))
    validate(program)
    return program


def _parse_terminator(toks: list[str], line: int) -> Terminator:
    kind = TermKind(toks[0])
    rest = toks[1:]
    if kind is TermKind.JUMP:
        if len(rest) != 1:
            raise ArityMismatch(line, "jump takes one target")
        return Terminator(kind, targets=(rest[0],))
    if kind is TermKind.JUMPI:
        if len(rest) != 3:
            raise ArityMismatch(line, "jumpi takes cond, then, else")
        return Terminator(kind, cond=_operand(rest[0], line), targets=(rest[1], rest[2]))
    if kind is TermKind.RETURN:
        return Terminator(kind, values=tuple(_operand(t, line) for t in rest))
    if kind is TermKind.RETURNPRIVATE:
        if not rest:
            raise ArityMismatch(line, "returnprivate takes a continuation target")
        return Terminator(
            kind,
            ret_target=rest[0],
            values=tuple(_operand(t, line) for t in rest[1:]),
        )
    if rest:
        raise ArityMismatch(line, f"{kind.value} takes no operands")
    return Terminator(kind)


def _fmt_operand(op: str | int) -> str:
    return op if isinstance(op, str) else hex(op)


def print_ir(program: IrProgram) -> str:
    """Canonical emission; parse(print(p)) is structurally equal to p."""
    out: list[str] = [f"contract {program.address}"]
    for fn in program.functions:
        vis = f"public sig {fn.selector}" if fn.is_public else "private"
        out.append(f"function {fn.name} {vis} params ({', '.join(fn.params)}) {{")
        for b in fn.blocks:
            out.append(f"  block {b.bid}:")
            for s in b.statements:
                lhs = f"{s.defvar} = " if s.defvar is not None else ""
                if s.opcode is Opcode.CALLPRIVATE:
                    ops = [str(s.args[0])] + [_fmt_operand(a) for a in s.args[1:]]
                else:
                    ops = [_fmt_operand(a) for a in s.args]
                tail = (" " + " ".join(ops)) if ops else ""
                out.append(f"    {s.sid}: {lhs}{s.opcode.value}{tail}")
            out.append(f"    {_fmt_terminator(b.terminator)}")
        out.append("}")
    return "\n".join(out) + "\n"


def _fmt_terminator(t: Terminator) -> str:
    if t.kind is TermKind.JUMP:
        return f"jump {t.targets[0]}"
    if t.kind is TermKind.JUMPI:
        return f"jumpi {_fmt_operand(t.cond)} {t.targets[0]} {t.targets[1]}"
    if t.kind is TermKind.RETURN:
        vals = " ".join(_fmt_operand(v) for v in t.values)
        return f"return {vals}".rstrip()
    if t.kind is TermKind.RETURNPRIVATE:
        vals = " ".join(_fmt_operand(v) for v in t.values)
        return f"returnprivate {t.ret_target} {vals}".rstrip()
    return t.kind.value
