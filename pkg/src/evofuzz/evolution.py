"""Fitness evaluation, parent selection and community target-size dynamics."""

import math
from typing import Callable, Iterable, List, Optional

from .core import (
    CampaignConfig,
    Community,
    ContractViolation,
    ExecutionResult,
    FitnessKind,
    GlobalCoverageState,
    Individual,
    Population,
    SelectionKind,
)
from .genome import Rng, clone_individual, crossover, mutate_individual

MIN_TARGET_SIZE = 2


def bucket(n: int) -> int:
    """AFL-style logarithmic hit-count bin: floor(log2 n) for n >= 1."""
    if n < 1:
        raise ValueError(f"bucket is defined for n >= 1, got {n}")
    return n.bit_length() - 1


def evaluate_fitness(res: ExecutionResult, prev: GlobalCoverageState, kind: FitnessKind) -> float:
    """Score one execution against the coverage seen before its generation.

    ``executed-blocks`` counts covered blocks; ``least-executed`` weighs each
    block by 1/(1 + times it was covered before); ``least-branch-hit-count``
    weighs each branch by 2**-bucket(cumulative hits so far).
    """
    if kind is FitnessKind.EXECUTED_BLOCKS:
        return float(len(res.blocks))
    if kind is FitnessKind.LEAST_EXECUTED:
        counts = prev.block_exec_count
        return sum(1.0 / (1 + counts.get(b, 0)) for b in res.blocks)
    if kind is FitnessKind.LEAST_BRANCH_HIT_COUNT:
        hits = prev.branch_hit_count
        return sum(2.0 ** -bucket(max(hits.get(e, 0), 1)) for e in res.branches)
    raise ContractViolation(f"unknown fitness kind {kind!r}")


def update_global_coverage(state: GlobalCoverageState, res: ExecutionResult) -> GlobalCoverageState:
    blocks = state.block_exec_count
    for b in res.blocks:
        blocks[b] = blocks.get(b, 0) + 1
    branches = state.branch_hit_count
    for e, n in res.branches.items():
        branches[e] = branches.get(e, 0) + n
    state.tests_executed += 1
    return state


# -- selection --------------------------------------------------------------------

def _roulette(weights: List[float], rng: Rng) -> int:
    total = sum(weights)
    pick = rng.random() * total
    acc = 0.0
    for i, w in enumerate(weights):
        acc += w
        if pick < acc:
            return i
    # float round-off: fall back to the last index with positive weight
    return max(i for i, w in enumerate(weights) if w > 0)


def _rank_order(pop: Population) -> List[Individual]:
    fit = pop.fitness
    return sorted(pop.individuals, key=lambda i: (fit.get(i.id, 0.0), i.id))


def _rank_pick(ordered: List[Individual], rng: Rng) -> Individual:
    mu = len(ordered)
    pick = rng.randrange(mu * (mu + 1) // 2)
    # rank r (1-based) owns the integer slots [r(r-1)/2, r(r+1)/2)
    r = (math.isqrt(8 * pick + 1) - 1) // 2 + 1
    return ordered[r - 1]


def select(pop: Population, kind: SelectionKind, tour: int, rng: Rng) -> Individual:
    members = pop.individuals
    if not members:
        raise ContractViolation(f"selection from empty population {pop.method_id}")
    fit = pop.fitness
    if kind is SelectionKind.FITNESS_PROPORTIONATE:
        weights = [fit.get(i.id, 0.0) for i in members]
        if sum(weights) <= 0:
            return members[rng.randrange(len(members))]
        return members[_roulette(weights, rng)]
    if kind is SelectionKind.RANKING:
        return _rank_pick(_rank_order(pop), rng)
    if kind is SelectionKind.TOURNAMENT:
        group = rng.sample(members, min(tour, len(members)))
        return min(group, key=lambda i: (-fit.get(i.id, 0.0), i.id))
    raise ContractViolation(f"unknown selection kind {kind!r}")


def selection_probabilities(pop: Population, kind: SelectionKind) -> List[float]:
    """Exact per-member probabilities for the two parameter-free schemes."""
    members = pop.individuals
    fit = [pop.fitness.get(i.id, 0.0) for i in members]
    if kind is SelectionKind.FITNESS_PROPORTIONATE:
        total = sum(fit)
        if total <= 0:
            return [1.0 / len(members)] * len(members)
        return [f / total for f in fit]
    if kind is SelectionKind.RANKING:
        mu = len(members)
        order = sorted(range(mu), key=lambda k: (fit[k], members[k].id))
        probs = [0.0] * mu
        for rank, k in enumerate(order, start=1):
            probs[k] = 2.0 * rank / (mu * (mu + 1))
        return probs
    raise ContractViolation("tournament probabilities are not tabulated")


# -- community dynamics -------------------------------------------------------------

def _by_strength(pops: Iterable[Population]) -> List[Population]:
    """Weakest first; ties on mean fitness ordered by method id."""
    return sorted(pops, key=lambda p: (p.mean_fitness(), p.method_id))


def update_target_sizes(community: Community, max_community_size: int) -> Community:
    pops = community.populations
    if not pops:
        return community
    ordered = _by_strength(pops)
    best_mean = max(p.mean_fitness() for p in pops)
    best = min((p for p in pops if p.mean_fitness() == best_mean), key=lambda p: p.method_id)
    best.target_size += 1

    weakest = ordered[0]
    if weakest.target_size > MIN_TARGET_SIZE:
        weakest.target_size -= 1
    else:
        # next-weakest population above the floor that still ranks below the best
        for p in ordered[1:]:
            if p is best:
                break
            if p.target_size > MIN_TARGET_SIZE:
                p.target_size -= 1
                break

    total = community.total_target_size()
    if total > max_community_size:
        budget = math.ceil((total - max_community_size) / 2)
        for p in ordered:
            if budget == 0:
                break
            cut = min(budget, p.target_size - MIN_TARGET_SIZE)
            if cut > 0:
                p.target_size -= cut
                budget -= cut
    return community


# -- breeding ---------------------------------------------------------------------

def breed_population(
    pop: Population,
    config: CampaignConfig,
    rng: Rng,
    selector: Optional[Callable[[Population, Rng], Individual]] = None,
    cross: Callable = crossover,
    mutate: Callable = mutate_individual,
) -> Population:
    """Fill the offspring list up to the target size, then promote it."""
    if selector is None and config.selection is SelectionKind.RANKING and pop.individuals:
        ordered = _rank_order(pop)  # fitness is fixed while breeding, sort once

        def selector(p, r):
            return _rank_pick(ordered, r)
    elif selector is None:
        def selector(p, r):
            return select(p, config.selection, config.tour, r)
    pop.offspring = []
    while len(pop.offspring) < pop.target_size:
        parent = selector(pop, rng)
        child = None
        if rng.random() < config.crossover_rate:
            child = cross(parent, selector(pop, rng), rng)
        if rng.random() < config.mutation_rate:
            child = mutate(child if child is not None else parent, rng)
        if child is None:
            child = clone_individual(parent, rng)
        pop.offspring.append(child)
    pop.individuals = pop.offspring
    pop.offspring = []
    pop.fitness = {}
    return pop


def uniform_selector(pop: Population, rng: Rng) -> Individual:
    return pop.individuals[rng.randrange(len(pop.individuals))]


def next_generation(
    community: Community,
    config: CampaignConfig,
    rng: Rng,
    selector: Optional[Callable[[Population, Rng], Individual]] = None,
    cross: Callable = crossover,
    mutate: Callable = mutate_individual,
) -> Community:
    if config.blackbox and selector is None:
        selector = uniform_selector
    for pop in community.populations:
        breed_population(pop, config, rng, selector, cross, mutate)
    return community
