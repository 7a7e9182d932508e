"""Nonparametric comparison of campaign outcomes.

Mann-Whitney U with the normal approximation, the Vargha-Delaney effect size,
Kruskal-Wallis H with the chi-square approximation, pairwise configuration
scoring, and the EVO/BB coverage gain.
"""

import math
import statistics
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, List, Mapping, Optional, Sequence, Union

from scipy.stats import chi2


@dataclass(frozen=True)
class SampleGroup:
    label: str
    values: Sequence[float]

    def __post_init__(self):
        if not self.values:
            raise ValueError(f"sample group {self.label!r} is empty")


@dataclass(frozen=True)
class TestReport:
    statistic: float
    p_value: float
    effect_size: Optional[float] = None
    z: Optional[float] = None

    __test__ = False


def rankdata(values: Sequence[float]) -> List[float]:
    """1-based ranks, ties sharing the mean of the ranks they span."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


def _tie_sum(values: Sequence[float]) -> float:
    counts: Dict[float, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return float(sum(t ** 3 - t for t in counts.values()))


def _values(g: Union[SampleGroup, Sequence[float]]) -> List[float]:
    return list(g.values if isinstance(g, SampleGroup) else g)


def u_statistic(a: Sequence[float], b: Sequence[float]) -> float:
    """U of the first sample: the number of (a, b) pairs with a > b, ties counting half."""
    m = len(a)
    ranks = rankdata(list(a) + list(b))
    return sum(ranks[:m]) - m * (m + 1) / 2


def vargha_delaney(a, b) -> float:
    """Â = P(X > Y) + P(X = Y) / 2 for X drawn from ``a`` and Y from ``b``."""
    a, b = _values(a), _values(b)
    if not a or not b:
        raise ValueError("vargha_delaney needs two nonempty samples")
    m, n = len(a), len(b)
    r1 = sum(rankdata(a + b)[:m])
    return (r1 / m - (m + 1) / 2) / n


def normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2))


def mann_whitney(a, b, continuity: bool = True) -> TestReport:
    """Two-sided Mann-Whitney U test via the tie-corrected normal approximation.

    ``statistic`` is U of the first sample; ``effect_size`` is Â(a, b).
    """
    a, b = _values(a), _values(b)
    if not a or not b:
        raise ValueError("mann_whitney needs two nonempty samples")
    m, n = len(a), len(b)
    big_n = m + n
    u = u_statistic(a, b)
    effect = u / (m * n)
    var = m * n / 12 * ((big_n + 1) - _tie_sum(a + b) / (big_n * (big_n - 1)))
    if var <= 0:
        return TestReport(u, 1.0, effect, 0.0)
    diff = u - m * n / 2
    if continuity:
        diff = math.copysign(max(abs(diff) - 0.5, 0.0), diff)
    z = diff / math.sqrt(var)
    return TestReport(u, min(1.0, 2 * normal_sf(abs(z))), effect, z)


def kruskal_wallis(groups: Sequence[Union[SampleGroup, Sequence[float]]]) -> TestReport:
    samples = [_values(g) for g in groups]
    if len(samples) < 2:
        raise ValueError("kruskal_wallis needs at least two groups")
    if any(not s for s in samples):
        raise ValueError("kruskal_wallis groups must be nonempty")
    pooled = [v for s in samples for v in s]
    big_n = len(pooled)
    ranks = rankdata(pooled)
    h = 0.0
    start = 0
    for s in samples:
        r = ranks[start:start + len(s)]
        start += len(s)
        h += len(s) * (sum(r) / len(s) - (big_n + 1) / 2) ** 2
    h *= 12 / (big_n * (big_n + 1))
    correction = 1 - _tie_sum(pooled) / (big_n ** 3 - big_n)
    if correction <= 0:
        return TestReport(0.0, 1.0)
    h /= correction
    return TestReport(h, float(chi2.sf(h, len(samples) - 1)))


def coverage_gain(evo, bb) -> float:
    """mean(evo) / mean(bb); ``inf`` when the black-box mean is zero."""
    evo_mean = statistics.fmean(_values(evo))
    bb_mean = statistics.fmean(_values(bb))
    if bb_mean == 0:
        return math.inf if evo_mean > 0 else math.nan
    return evo_mean / bb_mean


@dataclass(frozen=True)
class RankRow:
    rank: int
    label: str
    score: int
    mean: float
    std: float


def rank_configurations(matrix: Mapping[str, Sequence[float]], alpha: float = 0.05) -> List[RankRow]:
    """Score every configuration +1 per significant pairwise win and -1 per
    significant loss; rows come back best first with shared ranks for ties."""
    labels = list(matrix)
    if len(labels) < 2:
        raise ValueError("need at least two configurations to rank")
    score = {k: 0 for k in labels}
    for x, y in combinations(labels, 2):
        rep = mann_whitney(matrix[x], matrix[y])
        if rep.p_value < alpha and rep.effect_size != 0.5:
            winner, loser = (x, y) if rep.effect_size > 0.5 else (y, x)
            score[winner] += 1
            score[loser] -= 1
    ordered = sorted(labels, key=lambda k: -score[k])
    rows = []
    for pos, k in enumerate(ordered):
        rank = rows[-1].rank if rows and rows[-1].score == score[k] else pos + 1
        vals = list(matrix[k])
        rows.append(RankRow(rank, k, score[k], statistics.fmean(vals),
                            statistics.stdev(vals) if len(vals) > 1 else 0.0))
    return rows


def comparison_row(x: SampleGroup, y: SampleGroup) -> Dict[str, object]:
    """One machine-readable results row for a pairwise comparison."""
    rep = mann_whitney(x.values, y.values)
    sd = lambda v: statistics.stdev(v) if len(v) > 1 else 0.0  # noqa: E731
    return {
        "group_1": x.label,
        "group_2": y.label,
        "n_1": len(x.values),
        "n_2": len(y.values),
        "mean_1": statistics.fmean(x.values),
        "mean_2": statistics.fmean(y.values),
        "median_1": statistics.median(x.values),
        "median_2": statistics.median(y.values),
        "std_1": sd(list(x.values)),
        "std_2": sd(list(y.values)),
        "U": rep.statistic,
        "p_value": rep.p_value,
        "A12": rep.effect_size,
        "gain": coverage_gain(x.values, y.values),
    }


def render_rows(rows: Sequence[Mapping[str, object]], columns: Optional[Sequence[str]] = None) -> str:
    """Plain-text table for terminal output."""
    if not rows:
        return ""
    columns = list(columns or rows[0].keys())

    def fmt(v):
        if isinstance(v, float):
            if math.isinf(v) or math.isnan(v):
                return str(v)
            return f"{v:.4g}"
        return str(v)

    cells = [[fmt(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)
