"""Repeated campaigns: EVO-vs-BB comparison and fitness x selection ranking.

Each repetition is an isolated job described by plain JSON (target document and
campaign config), so repetitions can run in worker processes.
"""

import csv
import json
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from .campaign import coverage_summary, run_campaign, with_coverage
from .core import CampaignConfig, FitnessKind, SelectionKind
from .harness import parse_target
from .stats import (
    SampleGroup,
    comparison_row,
    kruskal_wallis,
    rank_configurations,
    render_rows,
)

log = logging.getLogger(__name__)


@dataclass
class RepetitionResult:
    label: str
    seed: int
    blocks: Optional[int] = None
    branches: Optional[int] = None
    tests: int = 0
    generations: int = 0
    final_sizes: Dict[int, int] = field(default_factory=dict)
    error: Optional[str] = None

    def to_json(self) -> Dict[str, Any]:
        return {
            "label": self.label, "seed": self.seed, "blocks": self.blocks, "branches": self.branches,
            "tests": self.tests, "generations": self.generations,
            "final_sizes": {str(k): v for k, v in self.final_sizes.items()}, "error": self.error,
        }


def run_repetition(label: str, target_doc: Dict[str, Any], config_json: Dict[str, Any],
                   out_dir: Optional[str] = None) -> RepetitionResult:
    """Run one campaign and measure its coverage; BB coverage comes from replay."""
    config = CampaignConfig.from_json(config_json)
    res = RepetitionResult(label, config.seed)
    try:
        svc = parse_target(target_doc, target_doc.get("name", "<target>"))
        state = run_campaign(svc.descriptor, svc, config, out_dir)
        records = with_coverage(state.records, svc) if config.blackbox else state.records
        cov = coverage_summary(records)
    except Exception as e:  # one bad repetition must not sink the others
        log.warning("repetition %s seed %d failed: %s", label, config.seed, e)
        res.error = f"{type(e).__name__}: {e}"
        return res
    res.blocks = cov["distinct_blocks"]
    res.branches = cov["distinct_branches"]
    res.tests = state.tests_executed
    res.generations = state.generation
    res.final_sizes = {p.method_id: p.target_size for p in state.community.populations}
    return res


def _run_all(jobs: List[tuple], workers: int) -> List[RepetitionResult]:
    if workers <= 1 or len(jobs) <= 1:
        return [run_repetition(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_repetition, *j) for j in jobs]
        return [f.result() for f in futures]


def _group(label: str, results: Sequence[RepetitionResult]) -> SampleGroup:
    values = [float(r.blocks) for r in results if r.error is None]
    if not values:
        raise RuntimeError(f"every repetition of {label!r} failed")
    return SampleGroup(label, values)


def _sub_dir(out_dir: Optional[Path], name: str) -> Optional[str]:
    return str(out_dir / name) if out_dir is not None else None


@dataclass
class ExperimentReport:
    title: str
    rows: List[Dict[str, Any]]
    repetitions: List[RepetitionResult]
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> Dict[str, Any]:
        return {"title": self.title, "rows": self.rows, **self.extra,
                "repetitions": [r.to_json() for r in self.repetitions]}

    def render(self) -> str:
        parts = [self.title, render_rows(self.rows)]
        for key, val in self.extra.items():
            if isinstance(val, dict) and "H" in val:
                parts.append(f"Kruskal-Wallis {key}: H={val['H']:.4g} p={val['p_value']:.4g}")
        failed = [r for r in self.repetitions if r.error]
        if failed:
            parts.append(f"{len(failed)} repetition(s) failed: " + "; ".join(
                f"{r.label}#{r.seed}: {r.error}" for r in failed))
        return "\n".join(parts)

    def write(self, out_dir: Path, stem: str) -> None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{stem}.json").write_text(
            json.dumps(self.to_json(), indent=1, default=str) + "\n", encoding="utf-8")
        with open(out_dir / f"{stem}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(self.rows[0]))
            writer.writeheader()
            writer.writerows(self.rows)
        (out_dir / f"{stem}.txt").write_text(self.render() + "\n", encoding="utf-8")


def compare(target_doc: Dict[str, Any], base: CampaignConfig, reps: int, seed: int = 0,
            workers: int = 1, slowdown: Optional[float] = None,
            out_dir: Optional[Path] = None) -> ExperimentReport:
    """``reps`` EVO campaigns against ``reps`` BB campaigns on paired seeds.

    Each BB repetition gets the test count of its EVO partner as budget, scaled
    by ``slowdown`` when EVO is charged an instrumentation cost per test.
    """
    if reps < 2:
        raise ValueError("compare needs at least 2 repetitions")
    if slowdown is not None and slowdown <= 0:
        raise ValueError("slowdown must be positive")
    evo_cfg = replace(base, blackbox=False)
    evo_jobs = [("EVO", target_doc, replace(evo_cfg, seed=seed + i).to_json(), _sub_dir(out_dir, f"evo-{i:02d}"))
                for i in range(reps)]
    evo = _run_all(evo_jobs, workers)

    bb_jobs = []
    for i, e in enumerate(evo):
        cfg = replace(base, blackbox=True, seed=seed + i)
        if e.error is None:
            budget = max(1, round(e.tests * (slowdown or 1.0)))
            cfg = replace(cfg, generations=None, time_limit=None, test_limit=budget)
        bb_jobs.append(("BB", target_doc, cfg.to_json(), _sub_dir(out_dir, f"bb-{i:02d}")))
    bb = _run_all(bb_jobs, workers)

    row = comparison_row(_group("EVO", evo), _group("BB", bb))
    title = f"EVO vs BB on {target_doc.get('name', 'target')} ({reps} repetitions)"
    if slowdown:
        title += f", BB budget x{slowdown:g}"
    return ExperimentReport(title, [row], evo + bb, {"slowdown": slowdown})


def _label(f: FitnessKind, s: SelectionKind) -> str:
    return f"{f.value}/{s.value}"


def rank(target_doc: Dict[str, Any], base: CampaignConfig, reps: int, seed: int = 0,
         workers: int = 1, factor: Optional[str] = None, alpha: float = 0.05,
         out_dir: Optional[Path] = None) -> ExperimentReport:
    """Rank fitness x selection configurations by pairwise significant wins.

    ``factor`` restricts the matrix to the three fitness functions (with the
    base selection) or the three selection schemes (with the base fitness).
    """
    if reps < 2:
        raise ValueError("rank needs at least 2 repetitions")
    if factor == "fitness":
        configs = [(f, base.selection) for f in FitnessKind]
    elif factor == "selection":
        configs = [(base.fitness, s) for s in SelectionKind]
    elif factor is None:
        configs = [(f, s) for f in FitnessKind for s in SelectionKind]
    else:
        raise ValueError(f"unknown factor {factor!r}")

    jobs = []
    for f, s in configs:
        cfg = replace(base, blackbox=False, fitness=f, selection=s)
        for i in range(reps):
            sub = _sub_dir(out_dir, f"{f.value}-{s.value}-{i:02d}")
            jobs.append((_label(f, s), target_doc, replace(cfg, seed=seed + i).to_json(), sub))
    results = _run_all(jobs, workers)
    by_label: Dict[str, List[RepetitionResult]] = {}
    for r in results:
        by_label.setdefault(r.label, []).append(r)
    groups = {k: _group(k, v).values for k, v in by_label.items()}

    rows = [{"rank": r.rank, "configuration": r.label, "score": r.score, "mean": r.mean, "std": r.std}
            for r in rank_configurations(groups, alpha)]
    extra: Dict[str, Any] = {"alpha": alpha}
    if factor is None:
        for name, key in (("fitness", 0), ("selection", 1)):
            pooled: Dict[str, List[float]] = {}
            for (f, s) in configs:
                pooled.setdefault((f, s)[key].value, []).extend(groups[_label(f, s)])
            kw = kruskal_wallis(list(pooled.values()))
            extra[f"{name} factor"] = {"H": kw.statistic, "p_value": kw.p_value}
    else:
        kw = kruskal_wallis(list(groups.values()))
        extra[f"{factor} factor"] = {"H": kw.statistic, "p_value": kw.p_value}
    medians = {k: statistics.median(v) for k, v in groups.items()}
    extra["medians"] = medians
    title = f"Configuration ranking on {target_doc.get('name', 'target')} ({reps} repetitions)"
    return ExperimentReport(title, rows, results, extra)
