"""End-to-end audit orchestration shared by the command-line entry points.

A RunConfig names the inputs for one contract: the IR file, exactly one
claim source (attributes JSON or a description for the language-model
endpoint), and an optional chain backend. audit_contract runs the whole
chain parse -> facts -> graphs -> plan -> symbolic execution -> semantics
-> detection and returns the report; audit_many fans that out over
per-contract configs with results identical to sequential runs.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .chain import ChainState, MockChain, RpcChain
from .claims import (
    BOOLEAN_ATTRIBUTES,
    NUMERIC_ATTRIBUTES,
    FrontendAttributes,
    LabeledResponse,
    extract_attributes,
)
from .detector import InconsistencyReport, detect_all
from .executor import ExecutionResult, Limits, execute_function
from .facts import FactDb, build_facts, dump_facts
from .graphs import AnalysisPlan, FundTransferGraph, StateDependencyGraph, build_graphs
from .llm import LlmClient
from .parser import IrProgram, parse_ir
from .prompts import build_prompts
from .semantics import ContractSemantics, summarize_semantics
from .symexpr import render

CHAIN_ENV = "CHAIN_RPC_URL"


class ConfigError(ValueError):
    """A RunConfig that cannot be executed as requested."""


@dataclass(frozen=True)
class RunConfig:
    ir_path: Path
    attrs_path: Path | None = None
    description_path: Path | None = None
    chain_mock: Path | None = None
    chain_rpc: str | None = None
    llm_url: str | None = None
    out_path: Path | None = None
    facts_dump: Path | None = None
    limits: Limits = field(default_factory=Limits)
    strict_supply_check: bool = False
    jobs: int = 1

    def __post_init__(self):
        if (self.attrs_path is None) == (self.description_path is None):
            raise ConfigError(
                "exactly one of an attributes file or a description file is required"
            )
        if self.chain_mock is not None and self.chain_rpc is not None:
            raise ConfigError("choose one chain backend: mock file or RPC URL")
        for name in ("max_depth", "loop_bound", "max_states"):
            if getattr(self.limits, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be positive")


@dataclass(frozen=True)
class ContractAnalysis:
    """Every intermediate product of one contract's static pipeline."""

    program: IrProgram
    db: FactDb
    ftg: FundTransferGraph
    sdg: StateDependencyGraph
    plan: AnalysisPlan
    executions: tuple[ExecutionResult, ...]
    semantics: ContractSemantics


def analyze_ir(text: str, limits: Limits = Limits()) -> ContractAnalysis:
    program = parse_ir(text)
    db = build_facts(program)
    ftg, sdg, plan = build_graphs(db)
    executions = tuple(
        execute_function(program, sel, plan, limits) for sel in plan.selectors()
    )
    semantics = summarize_semantics(executions, db, ftg, sdg)
    return ContractAnalysis(program, db, ftg, sdg, plan, executions, semantics)


def chain_backend(cfg: RunConfig) -> ChainState | None:
    if cfg.chain_mock is not None:
        return MockChain.from_file(str(cfg.chain_mock))
    url = cfg.chain_rpc or os.environ.get(CHAIN_ENV)
    return RpcChain(url) if url else None


def extract_from_description(
    description: str, client: LlmClient, jobs: int = 1
) -> FrontendAttributes:
    """Ask the endpoint about every attribute and assemble the answers."""
    responses: list[LabeledResponse] = []
    for kind, attributes in (
        ("numeric", NUMERIC_ATTRIBUTES),
        ("boolean", BOOLEAN_ATTRIBUTES),
    ):
        for attr in attributes:
            bundle = build_prompts(description, kind, attribute=attr)
            for text in client.run_bundle(bundle, jobs=jobs):
                responses.append(LabeledResponse(attr, text))
    return extract_attributes(responses)


def load_attributes(cfg: RunConfig) -> FrontendAttributes:
    if cfg.attrs_path is not None:
        doc = json.loads(cfg.attrs_path.read_text())
        return FrontendAttributes.from_json(doc)
    description = cfg.description_path.read_text()
    client = LlmClient(url=cfg.llm_url)
    return extract_from_description(description, client, jobs=cfg.jobs)


def audit_contract(cfg: RunConfig) -> InconsistencyReport:
    analysis = analyze_ir(cfg.ir_path.read_text(), cfg.limits)
    if cfg.facts_dump is not None:
        dump_facts(analysis.db, cfg.facts_dump)
    attrs = load_attributes(cfg)
    chain = chain_backend(cfg)
    report = detect_all(
        attrs,
        analysis.semantics,
        chain,
        strict_supply_check=cfg.strict_supply_check,
    )
    if cfg.out_path is not None:
        cfg.out_path.parent.mkdir(parents=True, exist_ok=True)
        cfg.out_path.write_text(report.render())
    return report


def expand_directory(
    ir_dir: Path, out_dir: Path, **common
) -> tuple[RunConfig, ...]:
    """Per-contract configs for every *.ir under ir_dir, pairing each with
    its <name>.attrs.json sidecar and a report path under out_dir. Shared
    settings (chain backend, limits, strict mode) pass through `common`."""
    ir_files = sorted(ir_dir.glob("*.ir"))
    if not ir_files:
        raise ConfigError(f"no .ir files under {ir_dir}")
    # Relation dumps and endpoint fan-out are single-contract concerns.
    common = {**common, "facts_dump": None, "jobs": 1}
    configs = []
    for ir in ir_files:
        sidecar = ir.with_suffix(".attrs.json")
        if not sidecar.exists():
            raise ConfigError(f"missing attributes sidecar: {sidecar}")
        configs.append(
            RunConfig(
                ir_path=ir,
                attrs_path=sidecar,
                out_path=out_dir / f"{ir.stem}.report.json",
                **common,
            )
        )
    return tuple(configs)


def audit_many(
    configs: tuple[RunConfig, ...], jobs: int = 1
) -> list[InconsistencyReport]:
    """Audit each config; report order follows config order regardless of
    jobs, and every config names its own output path, so parallel runs
    are byte-identical to sequential ones."""
    if jobs == 1:
        return [audit_contract(c) for c in configs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(audit_contract, configs))


def checkpoint_dump(analysis: ContractAnalysis) -> dict:
    """JSON-ready view of every checkpoint the plan asked for."""
    selectors = []
    for sel, res in zip(analysis.plan.selectors(), analysis.executions):
        selectors.append(
            {
                "selector": sel,
                "budget_exceeded": res.budget_exceeded,
                "states_explored": res.states_explored,
                "checkpoints": [
                    {
                        "checkpoint": cp.checkpoint,
                        "opcode": cp.opcode,
                        "feasibility": cp.feasibility.value,
                        "args": [render(a) for a in cp.args],
                    }
                    for cp in res.checkpoints
                ],
            }
        )
    return {"contract": analysis.program.address, "selectors": selectors}
