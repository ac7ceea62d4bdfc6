"""Induced facts: fund transfers, sender guards and storage-slot roles.

Every rule premise is evaluated against the base relations; rules fire once
per (site, reaching public selector).  Only constant storage slots
participate in guard and role inference.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, unique

from .facts import FactDb
from .model import Opcode, Operand, TermKind
from .signatures import GETTER_ROLES, OWNER_NAME, selectors_named, transfer_shape


@unique
class TransferKind(Enum):
    ERC20_TRANSFER = "erc20_transfer"
    ERC20_TRANSFER_FROM = "erc20_transfer_from"
    ETHER = "ether"


@dataclass(frozen=True)
class TransferFact:
    call_site: str
    recipient: Operand
    amount: Operand
    selector: str
    kind: TransferKind


@dataclass(frozen=True)
class SenderGuardFact:
    """Execution under `selector` compares storage slot `slot` to the caller."""

    slot: int
    selector: str
    load_site: str
    compare_site: str


@unique
class StorageRole(Enum):
    OWNER = "owner"
    SUPPLY = "supply"
    PAUSE = "pause"
    LOCK_TIME = "lock_time"
    TOKEN_URI = "token_uri"


# Rule identifiers, in precedence order for deduplication.
RULE_OWNER_ACCESS = "owner-access"
RULE_STANDARD_SELECTOR = "standard-selector"
RULE_TIME_LOCK_SUM = "time-lock-sum"
RULE_SUPPLY_ACCUMULATE = "supply-accumulate"
RULE_PAUSE_GUARD = "pause-guard"
_RULE_ORDER = {
    RULE_OWNER_ACCESS: 0,
    RULE_STANDARD_SELECTOR: 1,
    RULE_TIME_LOCK_SUM: 2,
    RULE_SUPPLY_ACCUMULATE: 3,
    RULE_PAUSE_GUARD: 4,
}


@dataclass(frozen=True)
class StorageRoleFact:
    role: StorageRole
    slot: int
    selector: str
    rule: str
    site: str


def infer_transfers(db: FactDb) -> tuple[TransferFact, ...]:
    """Token transfers via ABI-decoded calls, ether sends via plain calls."""
    out: list[TransferFact] = []
    for cs, _target, sig in db.external_call:
        sig_value = db.const_of(sig)
        if sig_value is None:
            continue
        shape = transfer_shape(sig_value)
        if shape is None:
            continue
        r_idx, a_idx, kind = shape
        args = {i: a for c, a, i in db.call_arg if c == cs}
        if r_idx not in args or a_idx not in args:
            continue
        for selector in sorted(db.selectors_of(cs)):
            out.append(
                TransferFact(cs, args[r_idx], args[a_idx], selector, TransferKind(kind))
            )
    for s in db.plain_calls():
        for selector in sorted(db.selectors_of(s.sid)):
            out.append(TransferFact(s.sid, s.args[0], s.args[1], selector, TransferKind.ETHER))
    return tuple(sorted(out, key=lambda t: (t.call_site, t.selector)))


def infer_sender_guards(db: FactDb) -> tuple[SenderGuardFact, ...]:
    """Constant-slot loads compared against the caller, per selector."""
    caller_defs = db.defs_of(Opcode.CALLER)
    out: dict[tuple[int, str], SenderGuardFact] = {}
    for load in db.sloads():
        if load.slot is None or not isinstance(load.value, str):
            continue
        sites = [
            sid
            for c in caller_defs
            for sid in db.compared(load.value, c)
        ]
        if not sites:
            continue
        for selector in sorted(db.selectors_of(load.sid)):
            out.setdefault(
                (load.slot, selector),
                SenderGuardFact(load.slot, selector, load.sid, min(sites)),
            )
    return tuple(sorted(out.values(), key=lambda g: (g.slot, g.selector)))


def infer_storage_roles(
    db: FactDb, guards: tuple[SenderGuardFact, ...] | None = None
) -> tuple[StorageRoleFact, ...]:
    if guards is None:
        guards = infer_sender_guards(db)
    guard_set = {(g.slot, g.selector) for g in guards}
    found: list[StorageRoleFact] = []

    owner_selectors = selectors_named(OWNER_NAME)
    getter_roles = {
        sel: StorageRole(role)
        for name, role in GETTER_ROLES.items()
        for sel in selectors_named(name)
    }

    # Loads with constant slots drive the read-side rules.
    for load in db.sloads():
        if load.slot is None or not isinstance(load.value, str):
            continue
        x = load.value
        for selector in sorted(db.selectors_of(load.sid)):
            returns_x = _flows_to_return(db, x, selector)
            if selector in owner_selectors and returns_x:
                found.append(
                    StorageRoleFact(StorageRole.OWNER, load.slot, selector, RULE_OWNER_ACCESS, load.sid)
                )
            if (load.slot, selector) in guard_set and _controls_anything(db, x):
                found.append(
                    StorageRoleFact(StorageRole.OWNER, load.slot, selector, RULE_OWNER_ACCESS, load.sid)
                )
            role = getter_roles.get(selector)
            if role is not None and returns_x:
                found.append(
                    StorageRoleFact(role, load.slot, selector, RULE_STANDARD_SELECTOR, load.sid)
                )

    # Store-side rules.
    timestamp_defs = db.defs_of(Opcode.TIMESTAMP)
    public_params = [v for _, v, _ in db.func_arg]
    for store in db.sstores():
        if store.slot is None:
            continue
        z = store.value
        if db.df_any(timestamp_defs, z) and db.df_any(public_params, z):
            for selector in sorted(db.selectors_of(store.sid)):
                found.append(
                    StorageRoleFact(
                        StorageRole.LOCK_TIME, store.slot, selector, RULE_TIME_LOCK_SUM, store.sid
                    )
                )
        if _accumulates_own_slot(db, store.slot, z):
            for selector in sorted(db.selectors_of(store.sid)):
                found.append(
                    StorageRoleFact(
                        StorageRole.SUPPLY, store.slot, selector, RULE_SUPPLY_ACCUMULATE, store.sid
                    )
                )

    # A load whose value decides whether a nonzero constant is stored back
    # to the same slot marks a pause flag.
    for load in db.sloads():
        if load.slot is None or not isinstance(load.value, str):
            continue
        for store in db.sstores():
            if store.slot != load.slot:
                continue
            stored = db.const_of(store.value)
            if stored is None or stored == 0:
                continue
            if not db.value_controls(load.value, store.sid):
                continue
            for selector in sorted(db.selectors_of(load.sid)):
                found.append(
                    StorageRoleFact(
                        StorageRole.PAUSE, load.slot, selector, RULE_PAUSE_GUARD, store.sid
                    )
                )

    # One fact per (role, slot, selector); earlier rules win.
    found.sort(key=lambda f: (f.role.value, f.slot, f.selector, _RULE_ORDER[f.rule], f.site))
    unique: dict[tuple[StorageRole, int, str], StorageRoleFact] = {}
    for f in found:
        unique.setdefault((f.role, f.slot, f.selector), f)
    return tuple(unique.values())


def _flows_to_return(db: FactDb, x: str, selector: str) -> bool:
    """Does x reach a returned operand of the public function `selector`?"""
    fn = db.program.function_of_selector(selector)
    if fn is None:
        return False
    for b in fn.blocks:
        if b.terminator.kind is TermKind.RETURN:
            for v in b.terminator.values:
                if db.df(x, v):
                    return True
    return False


def _controls_anything(db: FactDb, x: str) -> bool:
    conds = {c for c, _, _ in db.controls}
    return any(db.df(x, c) for c in conds)


def _accumulates_own_slot(db: FactDb, slot: int, stored: Operand) -> bool:
    """stored is ADD-derived from a load of the same slot."""
    if not isinstance(stored, str):
        return False
    loads_of_slot = [l.value for l in db.sloads() if l.slot == slot and isinstance(l.value, str)]
    for r, op, operands in db.math_op:
        if op != "add" or not db.df(r, stored):
            continue
        for v in operands:
            if isinstance(v, str) and any(db.df(x, v) for x in loads_of_slot):
                return True
    return False
