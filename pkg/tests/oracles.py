"""Independent reference computations the package results are checked against.

Nothing here imports the statistics or evolution code under test.
"""

import math
from collections import Counter
from itertools import combinations
from typing import Dict, List, Sequence, Tuple

from hypothesis import strategies as st

from evofuzz.core import Kind, MethodSignature, ValueType

# Worked examples, computed by hand.
# ranks 1..9, group mean ranks 2, 5, 8; 12/(9*10) * 3*((2-5)^2 + 0 + (8-5)^2) = 7.2
KW_EXAMPLE = ([1, 2, 3], [4, 5, 6], [7, 8, 9])
KW_H = 7.2
KW_P = math.exp(-KW_H / 2)  # chi-square with 2 degrees of freedom has sf(x) = exp(-x/2)

# U = 0, var = 3*3*7/12 = 5.25, z = -4.5 / sqrt(5.25)
MW_EXAMPLE = ([1, 2, 3], [4, 5, 6])
MW_Z_PLAIN = -4.5 / math.sqrt(5.25)
MW_P_PLAIN = math.erfc(abs(MW_Z_PLAIN) / math.sqrt(2))


def pair_u(a: Sequence[float], b: Sequence[float]) -> float:
    """U by direct pair counting: wins of a over b, ties worth half."""
    return sum(1.0 if x > y else 0.5 if x == y else 0.0 for x in a for y in b)


def pair_a12(a, b) -> float:
    return pair_u(a, b) / (len(a) * len(b))


def permutation_p(a: Sequence[float], b: Sequence[float]) -> float:
    """Exact two-sided p: share of relabelings whose |U - mn/2| is at least the observed one."""
    pooled = list(a) + list(b)
    m, n = len(a), len(b)
    centre = m * n / 2
    observed = abs(pair_u(a, b) - centre)
    hits = total = 0
    for idx in combinations(range(m + n), m):
        chosen = set(idx)
        x = [pooled[i] for i in idx]
        y = [pooled[i] for i in range(m + n) if i not in chosen]
        total += 1
        hits += abs(pair_u(x, y) - centre) >= observed - 1e-12
    return hits / total


def exact_u_distribution(m: int, n: int) -> Counter:
    """Counts of U over every assignment of the untied ranks 1..m+n to the first group."""
    dist = Counter()
    for idx in combinations(range(1, m + n + 1), m):
        dist[sum(idx) - m * (m + 1) // 2] += 1
    return dist


def exact_p_by_u(m: int, n: int) -> Dict[int, float]:
    """Exact two-sided p for every attainable U of untied samples."""
    dist = exact_u_distribution(m, n)
    total = sum(dist.values())
    centre = m * n / 2
    return {u: sum(c for v, c in dist.items() if abs(v - centre) >= abs(u - centre)) / total for u in dist}


def split_with_u(m: int, n: int, u: int) -> Tuple[List[int], List[int]]:
    """Untied samples of sizes m, n whose first group wins exactly u pairs."""
    for idx in combinations(range(m + n), m):
        if sum(idx) - m * (m - 1) // 2 == u:
            return list(idx), [v for v in range(m + n) if v not in idx]
    raise ValueError(u)


def max_p_gap(m: int, n: int, p_approx) -> float:
    """Worst |approximate p - exact p| over every attainable U of untied samples of sizes m, n."""
    return max(abs(p_approx(*split_with_u(m, n, u)) - p) for u, p in exact_p_by_u(m, n).items())


def floor_log2(n: int) -> int:
    k = 0
    while 2 ** (k + 1) <= n:
        k += 1
    return k


# -- hypothesis strategies for typed signatures --------------------------------------

SCALAR_KINDS = [Kind.BOOLEAN, Kind.BYTE, Kind.SHORT, Kind.INTEGER, Kind.LONG,
                Kind.CHAR, Kind.FLOAT, Kind.DOUBLE, Kind.STRING]


def _object_of(children):
    return st.lists(children, min_size=0, max_size=3).map(
        lambda fs: ValueType(Kind.OBJECT, class_name="Rec", fields=tuple((f"f{i}", t) for i, t in enumerate(fs))))


value_types = st.recursive(
    st.sampled_from(SCALAR_KINDS).map(ValueType),
    lambda children: st.one_of(children.map(lambda t: ValueType(Kind.ARRAY, element=t)), _object_of(children)),
    max_leaves=6,
)

signatures = st.lists(value_types, min_size=0, max_size=4).map(
    lambda ps: MethodSignature(0, "m", tuple(ps)))


def type_pool(rng, depth: int = 2) -> ValueType:
    """Random type for loops that run far more often than hypothesis examples."""
    roll = rng.random()
    if depth == 0 or roll < 0.6:
        return ValueType(rng.choice(SCALAR_KINDS))
    if roll < 0.8:
        return ValueType(Kind.ARRAY, element=type_pool(rng, depth - 1))
    fields = tuple((f"f{i}", type_pool(rng, depth - 1)) for i in range(rng.randint(0, 3)))
    return ValueType(Kind.OBJECT, class_name="Rec", fields=fields)


def random_signature(rng, method_id: int = 0) -> MethodSignature:
    return MethodSignature(method_id, "m", tuple(type_pool(rng) for _ in range(rng.randint(0, 4))))


def block_ids_on_path(doc, method_id: int, choose) -> Tuple[List[str], List[str]]:
    """Walk a target document by hand; ``choose(block)`` decides each guard."""
    blocks = {b["id"]: b for b in doc["blocks"]}
    bid = doc["entry"][str(method_id)]
    covered, edges = [], []
    while bid is not None:
        covered.append(bid)
        b = blocks[bid]
        nxt = b["on_true"] if choose(b) else b["on_false"]
        edges.append(f"{bid}→{nxt if nxt is not None else '⊥'}")
        bid = nxt
    return covered, edges
