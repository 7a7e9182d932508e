"""The evolutionary fuzzing loop, its black-box baseline, persistence and replay.

A campaign directory holds::

    config.json      campaign parameters
    service.json     method signatures of the target
    target.json      copy of the synthetic target (when there is one)
    gen-NNNN.jsonl   one test record per line, in execution order
    summary.json     final counters, coverage curve and target-size history
"""

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Tuple, Union

from .core import (
    CampaignConfig,
    Community,
    ContractViolation,
    ExecutionResult,
    GlobalCoverageState,
    Individual,
    Outcome,
    Population,
    ServiceDescriptor,
    decode_value,
    encode_value,
    validate_individual,
)
from .evolution import evaluate_fitness, next_generation, update_global_coverage, update_target_sizes
from .genome import Rng, random_individual
from .harness import Call, SyntheticService

log = logging.getLogger(__name__)

LOG_EXCERPT = 200


class ReplayError(Exception):
    """A persisted campaign that cannot be replayed."""


@dataclass
class TestRecord:
    individual: Individual
    generation: int
    outcome: Outcome
    log: str
    blocks: Optional[FrozenSet[str]] = None
    branches: Optional[Dict[str, int]] = None
    fitness: Optional[float] = None

    __test__ = False  # not a pytest class

    def to_json(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "gen": self.generation,
            "id": self.individual.id,
            "method": self.individual.method_id,
            "args": [encode_value(v) for v in self.individual.inputs],
            "outcome": self.outcome.value,
            "log": self.log,
        }
        if self.blocks is not None:
            out["blocks"] = sorted(self.blocks)
            out["branches"] = dict(sorted(self.branches.items()))
        if self.fitness is not None:
            out["fitness"] = self.fitness
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_json(cls, obj: Dict[str, Any]) -> "TestRecord":
        ind = Individual(int(obj["method"]), tuple(decode_value(a) for a in obj["args"]), int(obj["id"]))
        blocks = frozenset(obj["blocks"]) if "blocks" in obj else None
        branches = {str(k): int(v) for k, v in obj["branches"].items()} if "branches" in obj else None
        return cls(ind, int(obj["gen"]), Outcome(obj["outcome"]), obj.get("log", ""),
                   blocks, branches, obj.get("fitness"))


@dataclass
class CampaignState:
    config: CampaignConfig
    community: Community
    coverage: GlobalCoverageState
    generation: int = 0
    tests_executed: int = 0
    failures: List[Tuple[int, Outcome, str]] = field(default_factory=list)
    records: List[TestRecord] = field(default_factory=list)
    size_history: List[Dict[int, int]] = field(default_factory=list)
    started_at: float = field(default_factory=time.time)
    elapsed: float = 0.0

    def summary(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "service": self.community.service.name,
            "generations": self.generation,
            "tests": self.tests_executed,
            "failures": len(self.failures),
            "blackbox": self.config.blackbox,
            "size_history": [{str(k): v for k, v in h.items()} for h in self.size_history],
            "elapsed_s": round(self.elapsed, 3),
        }
        if not self.config.blackbox and self.records:
            out.update(coverage_summary(self.records))
        return out


def _stop_between_generations(state: CampaignState) -> bool:
    cfg = state.config
    if cfg.generations is not None and state.generation >= cfg.generations:
        return True
    if cfg.time_limit is not None and state.elapsed >= cfg.time_limit:
        return True
    return _stop_after_test(state)


def _stop_after_test(state: CampaignState) -> bool:
    cfg = state.config
    if cfg.failure_limit is not None and len(state.failures) >= cfg.failure_limit:
        return True
    return cfg.test_limit is not None and state.tests_executed >= cfg.test_limit


def _run_one(harness, ind: Individual) -> ExecutionResult:
    try:
        return harness.execute(Call.of(ind))
    except ContractViolation:
        raise
    except Exception as e:  # a misbehaving target must not end the campaign
        return ExecutionResult(frozenset(), {}, Outcome.CRASH, f"harness failure: {type(e).__name__}: {e}")


def _write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def init_campaign_dir(out_dir: Path, service: ServiceDescriptor, harness, config: CampaignConfig) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for stale in out_dir.glob("gen-*.jsonl"):
        stale.unlink()
    _write_json(out_dir / "config.json", config.to_json())
    _write_json(out_dir / "service.json", service.to_json())
    if isinstance(harness, SyntheticService):
        (out_dir / "target.json").write_text(harness.dumps(), encoding="utf-8")


def run_campaign(
    service: ServiceDescriptor,
    harness,
    config: CampaignConfig,
    out_dir: Union[str, Path, None] = None,
    coverage: Optional[GlobalCoverageState] = None,
    keep_records: bool = True,
) -> CampaignState:
    """Run one campaign to its stop condition.

    Every individual of a generation is executed and recorded; fitness is then
    scored against the coverage accumulated before that generation, target
    sizes are updated and the next generation is bred. In black-box mode the
    coverage state is never consulted and records carry no coverage.
    """
    rng = Rng(config.seed)
    community = Community(service, [
        Population(m.method_id, config.population_initial_target_size) for m in service.methods
    ])
    for sig, pop in zip(service.methods, community.populations):
        pop.individuals = [random_individual(sig, rng) for _ in range(pop.target_size)]
        pop.offspring = []

    state = CampaignState(config, community, coverage if coverage is not None else GlobalCoverageState())
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        init_campaign_dir(out, service, harness, config)
    t0 = time.monotonic()
    evolve = not config.blackbox

    while not _stop_between_generations(state):
        gen = state.generation
        state.size_history.append({p.method_id: len(p.individuals) for p in community.populations})
        executed: List[Tuple[Population, Individual, ExecutionResult]] = []
        halted = False
        for pop in community.populations:
            for ind in pop.individuals:
                res = _run_one(harness, ind)
                state.tests_executed += 1
                executed.append((pop, ind, res))
                if res.outcome is Outcome.CRASH:
                    state.failures.append((ind.id, res.outcome, res.log[:LOG_EXCERPT]))
                if _stop_after_test(state):
                    halted = True
                    break
            if halted:
                break

        records = []
        if evolve:
            for pop, ind, res in executed:
                pop.fitness[ind.id] = evaluate_fitness(res, state.coverage, config.fitness)
            for _, _, res in executed:
                update_global_coverage(state.coverage, res)
            for pop, ind, res in executed:
                records.append(TestRecord(ind, gen, res.outcome, res.log, res.blocks,
                                          dict(res.branches), pop.fitness[ind.id]))
        else:
            records = [TestRecord(ind, gen, res.outcome, res.log) for _, ind, res in executed]

        if out is not None:
            with open(out / f"gen-{gen:04d}.jsonl", "w", encoding="utf-8") as fh:
                for r in records:
                    fh.write(r.dumps() + "\n")
        if keep_records:
            state.records.extend(records)
        state.generation += 1
        state.elapsed = time.monotonic() - t0
        log.debug("generation %d: %d tests, %d failures", gen, len(executed), len(state.failures))

        if halted or _stop_between_generations(state):
            break
        if evolve and config.community:
            update_target_sizes(community, config.max_community_size)
        next_generation(community, config, rng)

    state.elapsed = time.monotonic() - t0
    if out is not None:
        _write_json(out / "summary.json", state.summary())
    return state


# -- coverage ----------------------------------------------------------------------

def coverage_summary(records: Iterable[TestRecord]) -> Dict[str, Any]:
    """Distinct blocks/branches over all records plus the cumulative per-generation curve."""
    blocks: set = set()
    branches: set = set()
    curve: List[Dict[str, int]] = []
    for r in records:
        if r.blocks is None:
            raise ValueError(f"record {r.individual.id} carries no coverage; replay the campaign first")
        blocks |= r.blocks
        branches |= set(r.branches)
        point = {"generation": r.generation, "blocks": len(blocks), "branches": len(branches)}
        if curve and curve[-1]["generation"] == r.generation:
            curve[-1] = point
        else:
            curve.append(point)
    return {"distinct_blocks": len(blocks), "distinct_branches": len(branches), "curve": curve}


def with_coverage(records: Iterable[TestRecord], harness) -> List[TestRecord]:
    """Re-execute records and attach the coverage each test produces."""
    out = []
    for r in records:
        res = _run_one(harness, r.individual)
        out.append(TestRecord(r.individual, r.generation, res.outcome, res.log,
                              res.blocks, dict(res.branches), r.fitness))
    return out


# -- replay ------------------------------------------------------------------------

def load_records(campaign_dir: Union[str, Path]) -> Tuple[ServiceDescriptor, List[TestRecord]]:
    d = Path(campaign_dir)
    try:
        service = ServiceDescriptor.from_json(json.loads((d / "service.json").read_text(encoding="utf-8")))
    except FileNotFoundError:
        raise ReplayError(f"{d}: not a campaign directory (service.json missing)") from None
    except (ValueError, KeyError, TypeError) as e:
        raise ReplayError(f"{d / 'service.json'}: corrupt descriptor: {e}") from None
    files = sorted(d.glob("gen-*.jsonl"))
    if not files:
        raise ReplayError(f"{d}: no generation record files")
    records: List[TestRecord] = []
    for path in files:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                try:
                    rec = TestRecord.from_json(json.loads(line))
                    sig = service.method(rec.individual.method_id)
                except (ValueError, KeyError, TypeError) as e:
                    raise ReplayError(f"{path}:{lineno}: corrupt record: {e}") from None
                if not validate_individual(rec.individual, sig):
                    raise ReplayError(f"{path}:{lineno}: record does not match signature of {sig.name!r}")
                records.append(rec)
    return service, records


@dataclass
class ReplayReport:
    records: List[TestRecord]
    summary: Dict[str, Any]
    mismatches: List[int]

    def to_json(self) -> Dict[str, Any]:
        return {**self.summary, "tests": len(self.records), "mismatches": self.mismatches}


def replay(campaign_dir: Union[str, Path], harness) -> ReplayReport:
    """Re-execute every persisted test in order with coverage collection on.

    ``mismatches`` lists the ids of tests whose recorded coverage differs from
    the replayed one (black-box records carry none and never mismatch).
    """
    service, recorded = load_records(campaign_dir)
    if service != harness.descriptor:
        raise ReplayError(f"{campaign_dir}: target signatures differ from the recorded service {service.name!r}")
    replayed = with_coverage(recorded, harness)
    mismatches = [
        old.individual.id for old, new in zip(recorded, replayed)
        if old.blocks is not None and (old.blocks != new.blocks or old.branches != new.branches)
    ]
    return ReplayReport(replayed, coverage_summary(replayed), mismatches)
