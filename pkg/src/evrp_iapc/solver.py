"""Bilevel Late Acceptance Hill Climbing.

The upper level mutates customer-only routes with four operators; every
mutated route is re-charged by the lower level (``charging.charge_route``).
Each candidate solution costs one evaluation. An operator keeps control
until it sees ``max_attempts`` consecutive rejections or one acceptance, and
a full operator cycle without any acceptance triggers a restart from a new
randomized construction (the best solution found is kept).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .charging import EnergyInfeasible, charge_route
from .instance import Instance
from .solution import BudgetExhausted, EvaluationBudget, RouteSolution

LH_BOUNDS = (1, 200_000)
ETA_BOUNDS = (1, 10_000)
GLOBAL_HISTORY_LENGTH = 5723
GLOBAL_MAX_ATTEMPTS = 60

OPERATORS = ("two_opt", "relocate", "swap", "or_opt")
_MEMO_LIMIT = 200_000
_CONSTRUCTION_TRIES = 50


class NoFeasibleInitialSolution(RuntimeError):
    pass


@dataclass(frozen=True)
class ParameterConfig:
    history_length: int = GLOBAL_HISTORY_LENGTH
    max_attempts: int = GLOBAL_MAX_ATTEMPTS

    def __post_init__(self):
        lo, hi = LH_BOUNDS
        if not (isinstance(self.history_length, (int, np.integer)) and lo <= self.history_length <= hi):
            raise ValueError(f"history_length must be an integer in [{lo}, {hi}]")
        lo, hi = ETA_BOUNDS
        if not (isinstance(self.max_attempts, (int, np.integer)) and lo <= self.max_attempts <= hi):
            raise ValueError(f"max_attempts must be an integer in [{lo}, {hi}]")


GLOBAL_CONFIG = ParameterConfig()


@dataclass
class TraceRecord:
    iteration: int
    operator: str
    candidate_cost: float
    current_cost: float
    history_value: float
    accepted: bool
    best_cost: float
    activation: int


@dataclass
class SolverRunResult:
    best_solution: RouteSolution
    best_objective: float
    evaluations_used: int
    restarts: int
    seed: int
    acceptance_trace: list[TraceRecord] | None = None
    events: list[tuple[int, str, float]] = field(default_factory=list)


def lahc_accept(candidate_cost: float, current_cost: float, history_value: float) -> bool:
    return candidate_cost <= current_cost or candidate_cost <= history_value


class _Charger:
    """Memoized lower level.

    charge_route depends only on the customer order, so the memo lives on the
    instance and is shared by every run on it. Budget accounting is separate.
    """

    def __init__(self, instance: Instance):
        self.instance = instance
        self.memo: dict[tuple[int, ...], tuple[tuple[int, ...], float] | None] = instance.__dict__.setdefault(
            "_charge_memo", {}
        )

    def __call__(self, customers) -> tuple[tuple[int, ...], float] | None:
        key = tuple(customers)
        try:
            return self.memo[key]
        except KeyError:
            pass
        try:
            value = charge_route(key, self.instance)
        except EnergyInfeasible:
            value = None
        if len(self.memo) >= _MEMO_LIMIT:
            self.memo.clear()
        self.memo[key] = value
        return value


class _State:
    """Customer routes with their charged sequences, lengths and loads."""

    __slots__ = ("routes", "charged", "lengths", "loads")

    def __init__(self, routes, charged, lengths, loads):
        self.routes = routes
        self.charged = charged
        self.lengths = lengths
        self.loads = loads

    @property
    def cost(self) -> float:
        return math.fsum(self.lengths)

    def copy(self) -> "_State":
        return _State([list(r) for r in self.routes], list(self.charged), list(self.lengths), list(self.loads))

    def to_solution(self) -> RouteSolution:
        sol = RouteSolution([list(c) for c, r in zip(self.charged, self.routes) if r])
        sol._objective = self.cost
        return sol


def _nearest_neighbour_routes(instance: Instance, rng: random.Random) -> list[list[int]]:
    dist = instance.distance_rows
    demand = instance.demands.tolist()
    capacity = instance.vehicle_capacity
    unrouted = set(instance.customer_indices)
    routes = []
    while unrouted:
        route, load, last = [], 0.0, 0
        while True:
            fits = [c for c in unrouted if load + demand[c] <= capacity]
            if not fits:
                break
            fits.sort(key=lambda c: (dist[last][c], c))
            c = fits[rng.randrange(min(3, len(fits)))]
            route.append(c)
            unrouted.discard(c)
            load += demand[c]
            last = c
        routes.append(route)
    return routes


def _packed_routes(instance: Instance, rng: random.Random) -> list[list[int]] | None:
    """Fleet-respecting fallback: randomized first-fit-decreasing packing, then NN order."""
    dist = instance.distance_rows
    demand = instance.demands.tolist()
    capacity = instance.vehicle_capacity
    k = instance.num_vehicles
    customers = sorted(instance.customer_indices, key=lambda c: (-demand[c], rng.random()))
    # seed bins with far-apart customers grouped by polar angle for spatial coherence
    angle = instance.coords[:, :] - instance.coords[0]
    theta = np.arctan2(angle[:, 1], angle[:, 0]).tolist()
    offset = rng.uniform(-math.pi, math.pi)
    bins: list[list[int]] = [[] for _ in range(k)]
    loads = [0.0] * k
    for c in customers:
        sector = int(((theta[c] - offset) % (2 * math.pi)) / (2 * math.pi) * k) % k
        order = sorted(range(k), key=lambda b: (b != sector, loads[b]))
        for b in order:
            if loads[b] + demand[c] <= capacity:
                bins[b].append(c)
                loads[b] += demand[c]
                break
        else:
            return None
    routes = []
    for members in bins:
        if not members:
            continue
        left, last, route = set(members), 0, []
        while left:
            c = min(left, key=lambda x: (dist[last][x], x))
            route.append(c)
            left.discard(c)
            last = c
        routes.append(route)
    return routes


def _construct(instance: Instance, rng: random.Random, charger: _Charger) -> _State:
    demand = instance.demands.tolist()
    for attempt in range(_CONSTRUCTION_TRIES):
        routes = _nearest_neighbour_routes(instance, rng)
        if len(routes) > instance.num_vehicles:
            routes = _packed_routes(instance, rng)
            if routes is None:
                continue
        charged = [charger(r) for r in routes]
        if any(c is None for c in charged):
            continue
        return _State(
            routes,
            [c[0] for c in charged],
            [c[1] for c in charged],
            [math.fsum(demand[v] for v in r) for r in routes],
        )
    raise NoFeasibleInitialSolution(
        f"no feasible construction for {instance.name} after {_CONSTRUCTION_TRIES} attempts"
    )


def build_initial_solution(instance: Instance, seed: int, budget: EvaluationBudget | None = None) -> RouteSolution:
    """Randomized nearest-neighbour construction followed by charging repair."""
    state = _construct(instance, random.Random(seed), _Charger(instance))
    if budget is not None:
        budget.consume()
    return state.to_solution()


# -- operators ---------------------------------------------------------------
#
# Each operator returns (touched route indices, new customer routes) or None when
# the random move is not applicable or breaks capacity.


def _op_two_opt(state: _State, rng: random.Random, instance: Instance):
    candidates = [k for k, r in enumerate(state.routes) if len(r) >= 2]
    if not candidates:
        return None
    k = rng.choice(candidates)
    r = state.routes[k]
    i, j = sorted(rng.sample(range(len(r)), 2))
    return (k,), (r[:i] + r[i : j + 1][::-1] + r[j + 1 :],)


def _op_or_opt(state: _State, rng: random.Random, instance: Instance):
    candidates = [k for k, r in enumerate(state.routes) if len(r) >= 3]
    if not candidates:
        return None
    k = rng.choice(candidates)
    r = state.routes[k]
    seg_len = rng.choice((2, 3)) if len(r) >= 4 else 2
    i = rng.randrange(len(r) - seg_len + 1)
    segment = r[i : i + seg_len]
    rest = r[:i] + r[i + seg_len :]
    positions = [p for p in range(len(rest) + 1) if p != i]
    p = rng.choice(positions)
    return (k,), (rest[:p] + segment + rest[p:],)


def _op_relocate(state: _State, rng: random.Random, instance: Instance, demand, capacity):
    routes = state.routes
    sources = [k for k, r in enumerate(routes) if r]
    k = rng.choice(sources)
    targets = [t for t in range(len(routes)) if t != k]
    if len(routes) < instance.num_vehicles:
        targets.append(len(routes))
    if not targets:
        return None
    t = rng.choice(targets)
    src = routes[k]
    i = rng.randrange(len(src))
    c = src[i]
    if t == len(routes):
        return (k, t), (src[:i] + src[i + 1 :], [c])
    if state.loads[t] + demand[c] > capacity:
        return None
    dst = routes[t]
    p = rng.randrange(len(dst) + 1)
    return (k, t), (src[:i] + src[i + 1 :], dst[:p] + [c] + dst[p:])


def _op_swap(state: _State, rng: random.Random, instance: Instance, demand, capacity):
    routes = state.routes
    nonempty = [k for k, r in enumerate(routes) if r]
    if len(nonempty) < 2:
        return None
    k, t = rng.sample(nonempty, 2)
    a, b = routes[k], routes[t]
    i, j = rng.randrange(len(a)), rng.randrange(len(b))
    ca, cb = a[i], b[j]
    if state.loads[k] - demand[ca] + demand[cb] > capacity:
        return None
    if state.loads[t] - demand[cb] + demand[ca] > capacity:
        return None
    return (k, t), (a[:i] + [cb] + a[i + 1 :], b[:j] + [ca] + b[j + 1 :])


def run(
    instance: Instance,
    params: ParameterConfig = GLOBAL_CONFIG,
    budget: EvaluationBudget | None = None,
    seed: int = 0,
    *,
    trace: bool = False,
) -> SolverRunResult:
    """One b-LAHC run until the evaluation budget is exhausted."""
    if budget is None:
        budget = EvaluationBudget.for_instance(instance)
    seq = np.random.SeedSequence(seed)
    search_rng = random.Random(int(seq.generate_state(1)[0]))

    def fresh_rng():
        return random.Random(int(seq.spawn(1)[0].generate_state(1)[0]))

    charger = _Charger(instance)
    demand = instance.demands.tolist()
    capacity = instance.vehicle_capacity
    history_length = int(params.history_length)
    max_attempts = int(params.max_attempts)
    log: list[TraceRecord] | None = [] if trace else None
    events: list[tuple[int, str, float]] = []

    current = _construct(instance, fresh_rng(), charger)
    budget.consume()
    current_cost = current.cost
    best = current.copy()
    best_cost = current_cost
    events.append((0, "initial", current_cost))

    operators = (
        ("two_opt", lambda s: _op_two_opt(s, search_rng, instance)),
        ("relocate", lambda s: _op_relocate(s, search_rng, instance, demand, capacity)),
        ("swap", lambda s: _op_swap(s, search_rng, instance, demand, capacity)),
        ("or_opt", lambda s: _op_or_opt(s, search_rng, instance)),
    )
    history = [current_cost] * history_length
    iteration = 0
    activation = 0
    restarts = 0
    try:
        while True:
            accepted_in_cycle = False
            for name, op in operators:
                activation += 1
                rejections = 0
                while rejections < max_attempts:
                    move = op(current)
                    new_parts = None
                    if move is not None:
                        touched, new_routes = move
                        new_parts = [charger(r) for r in new_routes]
                        if any(p is None for p in new_parts):
                            new_parts = None
                    budget.consume()
                    if new_parts is None:
                        cand_cost = math.inf
                    else:
                        lengths = list(current.lengths)
                        lengths.extend([0.0] * (max(touched) + 1 - len(lengths)))
                        for k, part in zip(touched, new_parts):
                            lengths[k] = part[1]
                        cand_cost = math.fsum(lengths)
                    slot = iteration % history_length
                    hist = history[slot]
                    accepted = lahc_accept(cand_cost, current_cost, hist)
                    before = current_cost
                    if accepted:
                        _apply(current, touched, new_routes, new_parts, demand)
                        current_cost = cand_cost
                        if current_cost < best_cost:
                            best = current.copy()
                            best_cost = current_cost
                    history[slot] = current_cost
                    if log is not None:
                        log.append(
                            TraceRecord(iteration, name, cand_cost, before, hist, accepted, best_cost, activation)
                        )
                    iteration += 1
                    if accepted:
                        accepted_in_cycle = True
                        break
                    rejections += 1
            if not accepted_in_cycle:
                current = _construct(instance, fresh_rng(), charger)
                budget.consume()
                restarts += 1
                current_cost = current.cost
                history = [current_cost] * history_length
                events.append((iteration, "restart", current_cost))
                if current_cost < best_cost:
                    best = current.copy()
                    best_cost = current_cost
    except BudgetExhausted:
        pass

    solution = best.to_solution()
    return SolverRunResult(
        best_solution=solution,
        best_objective=solution.objective,
        evaluations_used=budget.used,
        restarts=restarts,
        seed=seed,
        acceptance_trace=log,
        events=events,
    )


def _apply(state: _State, touched, new_routes, new_parts, demand) -> None:
    for k, route, part in zip(touched, new_routes, new_parts):
        if k == len(state.routes):
            state.routes.append([])
            state.charged.append((0, 0))
            state.lengths.append(0.0)
            state.loads.append(0.0)
        state.routes[k] = list(route)
        state.charged[k] = part[0]
        state.lengths[k] = part[1]
        state.loads[k] = math.fsum(demand[v] for v in route)
    # drop emptied routes so the fleet bound and indices stay tight
    keep = [k for k, r in enumerate(state.routes) if r]
    if len(keep) != len(state.routes):
        state.routes = [state.routes[k] for k in keep]
        state.charged = [state.charged[k] for k in keep]
        state.lengths = [state.lengths[k] for k in keep]
        state.loads = [state.loads[k] for k in keep]
