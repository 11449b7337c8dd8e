"""Solutions, budgeted evaluation and the independent feasibility checker."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .instance import Instance

EVALS_PER_NODE = 25_000
BATTERY_TOLERANCE = 1e-9


class BudgetExhausted(RuntimeError):
    """Raised on the first evaluation attempted beyond the budget."""


def max_evals(pz: int) -> int:
    if pz < 3:
        raise ValueError(f"problem size must be at least 3, got {pz}")
    return EVALS_PER_NODE * pz


@dataclass
class EvaluationBudget:
    max_evals: int
    used: int = 0

    @classmethod
    def for_instance(cls, instance: Instance, scale: float = 1.0) -> "EvaluationBudget":
        from .instance import problem_size

        return cls(max(1, int(round(max_evals(problem_size(instance)) * scale))))

    @property
    def remaining(self) -> int:
        return self.max_evals - self.used

    def consume(self) -> None:
        if self.used >= self.max_evals:
            raise BudgetExhausted(f"evaluation budget of {self.max_evals} exhausted")
        self.used += 1


@dataclass
class RouteSolution:
    """Routes as internal node indices, each starting and ending at the depot (0)."""

    routes: list[list[int]]
    _objective: float | None = field(default=None, repr=False, compare=False)

    @property
    def objective(self) -> float | None:
        return self._objective

    def set_routes(self, routes: list[list[int]]) -> None:
        self.routes = routes
        self._objective = None

    def copy(self) -> "RouteSolution":
        return RouteSolution([list(r) for r in self.routes], self._objective)

    def loads(self, instance: Instance) -> list[float]:
        demand = instance.demands
        return [float(sum(demand[i] for i in r)) for r in self.routes]

    def energy_traces(self, instance: Instance) -> list[list[float]]:
        """Remaining battery on arrival at each node of each route."""
        return [_energy_trace(r, instance) for r in self.routes]


def _energy_trace(route: list[int], instance: Instance) -> list[float]:
    full = instance.battery_capacity
    energy = instance.energy_rows
    trace = [full]
    battery = full
    for a, b in zip(route, route[1:]):
        battery -= energy[a][b]
        trace.append(battery)
        if b == 0 or instance.is_station(b):
            battery = full
    return trace


def route_length(route: list[int], instance: Instance) -> float:
    dist = instance.distance_rows
    return math.fsum(dist[a][b] for a, b in zip(route, route[1:]))


def objective_from_scratch(solution: RouteSolution, instance: Instance) -> float:
    return math.fsum(route_length(r, instance) for r in solution.routes)


def evaluate(solution: RouteSolution, instance: Instance, budget: EvaluationBudget) -> float:
    """Total distance; costs exactly one unit of budget."""
    budget.consume()
    value = objective_from_scratch(solution, instance)
    solution._objective = value
    return value


# -- feasibility -----------------------------------------------------------


@dataclass
class RouteReport:
    load_violation: float = 0.0
    battery_violation_arc: tuple[int, int] | None = None
    malformed: str | None = None

    @property
    def ok(self) -> bool:
        return (
            self.load_violation == 0.0
            and self.battery_violation_arc is None
            and self.malformed is None
        )


@dataclass
class FeasibilityReport:
    routes: list[RouteReport]
    missing_customers: list[int]
    duplicated_customers: list[int]
    too_many_routes: bool = False

    @property
    def feasible(self) -> bool:
        return (
            all(r.ok for r in self.routes)
            and not self.missing_customers
            and not self.duplicated_customers
            and not self.too_many_routes
        )

    def describe(self) -> str:
        if self.feasible:
            return "feasible"
        parts = []
        for k, r in enumerate(self.routes):
            if r.malformed:
                parts.append(f"route {k}: {r.malformed}")
            if r.load_violation:
                parts.append(f"route {k}: load exceeds capacity by {r.load_violation:g}")
            if r.battery_violation_arc:
                parts.append(f"route {k}: battery negative on arc {r.battery_violation_arc}")
        if self.missing_customers:
            parts.append(f"missing customers {self.missing_customers}")
        if self.duplicated_customers:
            parts.append(f"duplicated customers {self.duplicated_customers}")
        if self.too_many_routes:
            parts.append("more routes than vehicles")
        return "; ".join(parts)


def check_feasibility(solution: RouteSolution, instance: Instance) -> FeasibilityReport:
    """Check capacity, battery and coverage from scratch.

    Deliberately shares no code with the solver's incremental bookkeeping:
    coordinates are read directly and energy is recomputed per arc.
    """
    n_cust = instance.num_customers
    n_nodes = instance.num_nodes
    xy = [(node.x, node.y) for node in instance.nodes]
    demand = [0.0] + [c.demand for c in instance.customers] + [0.0] * instance.num_stations
    rate = instance.energy_consumption
    full = instance.battery_capacity

    counts = [0] * (n_cust + 1)
    reports = []
    for route in solution.routes:
        report = RouteReport()
        reports.append(report)
        if len(route) < 2 or route[0] != 0 or route[-1] != 0:
            report.malformed = "route must start and end at the depot"
            continue
        if any(not 0 <= v < n_nodes for v in route):
            report.malformed = "unknown node index"
            continue
        load = 0.0
        for v in route:
            if 1 <= v <= n_cust:
                counts[v] += 1
                load += demand[v]
        report.load_violation = max(0.0, load - instance.vehicle_capacity)
        battery = full
        for a, b in zip(route, route[1:]):
            arc = math.hypot(xy[a][0] - xy[b][0], xy[a][1] - xy[b][1])
            battery -= rate * arc
            if battery < -BATTERY_TOLERANCE:
                report.battery_violation_arc = (a, b)
                break
            if b == 0 or b > n_cust:
                battery = full
    missing = [c for c in range(1, n_cust + 1) if counts[c] == 0]
    duplicated = [c for c in range(1, n_cust + 1) if counts[c] > 1]
    return FeasibilityReport(
        routes=reports,
        missing_customers=missing,
        duplicated_customers=duplicated,
        too_many_routes=len(solution.routes) > instance.num_vehicles,
    )


# -- serialization ---------------------------------------------------------


def format_solution(solution: RouteSolution, instance: Instance, objective: float | None = None) -> str:
    """One route per line as space separated file node ids, then ``OBJECTIVE <value>``."""
    ids = instance.node_ids
    lines = [" ".join(str(ids[v]) for v in r) for r in solution.routes]
    if objective is None:
        objective = solution.objective
    if objective is None:
        objective = objective_from_scratch(solution, instance)
    lines.append(f"OBJECTIVE {objective!r}")
    return "\n".join(lines) + "\n"


def parse_solution(text: str, instance: Instance) -> tuple[RouteSolution, float | None]:
    routes = []
    objective = None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.upper().startswith("OBJECTIVE"):
            objective = float(line.split()[1])
            continue
        routes.append([instance.index_of[int(tok)] for tok in line.split()])
    return RouteSolution(routes), objective


def save_solution(solution: RouteSolution, instance: Instance, path: str | Path) -> None:
    Path(path).write_text(format_solution(solution, instance))


def load_solution(path: str | Path, instance: Instance) -> tuple[RouteSolution, float | None]:
    return parse_solution(Path(path).read_text(), instance)
