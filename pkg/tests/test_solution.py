import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import MINIMAL_TEXT
from evrp_iapc.instance import generate_instance, parse_instance
from evrp_iapc.solution import (
    BudgetExhausted,
    EvaluationBudget,
    RouteSolution,
    check_feasibility,
    evaluate,
    format_solution,
    max_evals,
    objective_from_scratch,
    parse_solution,
)
from evrp_iapc.solver import build_initial_solution


def test_max_evals():
    assert max_evals(4) == 100_000
    assert max_evals(30) == 750_000
    with pytest.raises(ValueError):
        max_evals(2)


def test_budget_for_instance(minimal):
    assert EvaluationBudget.for_instance(minimal).max_evals == 100_000
    assert EvaluationBudget.for_instance(minimal, 0.02).max_evals == 2_000


def test_budget_raises_on_the_extra_evaluation(minimal):
    budget = EvaluationBudget(3)
    sol = RouteSolution([[0, 1, 2, 0]])
    for _ in range(3):
        evaluate(sol, minimal, budget)
    assert budget.used == 3
    with pytest.raises(BudgetExhausted):
        evaluate(sol, minimal, budget)
    assert budget.used == 3


def test_evaluate_examples():
    inst = parse_instance(MINIMAL_TEXT.replace("2 1 0\n", "2 3 4\n"))
    budget = EvaluationBudget(10)
    assert evaluate(RouteSolution([[0, 1, 0]]), inst, budget) == 10.0
    assert evaluate(RouteSolution([]), inst, budget) == 0.0
    sol = RouteSolution([[0, 1, 2, 0]])
    a = evaluate(sol, inst, budget)
    b = evaluate(sol, inst, budget)
    assert a == b == sol.objective
    assert budget.used == 4


def test_capacity_boundary_is_feasible(minimal):
    assert check_feasibility(RouteSolution([[0, 1, 2, 0]]), minimal).feasible


def test_battery_violation_reports_first_arc():
    inst = parse_instance(MINIMAL_TEXT.replace("ENERGY_CAPACITY: 100", "ENERGY_CAPACITY: 0.5"))
    report = check_feasibility(RouteSolution([[0, 1, 2, 0]]), inst)
    assert not report.feasible
    assert report.routes[0].battery_violation_arc == (0, 1)


def test_coverage_and_fleet_violations(minimal):
    report = check_feasibility(RouteSolution([[0, 1, 0], [0, 1, 0], [0, 3, 0]]), minimal)
    assert report.missing_customers == [2]
    assert report.duplicated_customers == [1]
    assert report.too_many_routes
    assert "missing" in report.describe()


def test_load_violation_amount():
    inst = parse_instance(MINIMAL_TEXT.replace("3 5\n", "3 8\n").replace("CAPACITY: 10\n", "CAPACITY: 12\n"))
    report = check_feasibility(RouteSolution([[0, 1, 2, 0]]), inst)
    assert report.routes[0].load_violation == pytest.approx(1.0)


def test_station_and_depot_visits_recharge():
    inst = parse_instance(
        MINIMAL_TEXT.replace("ENERGY_CAPACITY: 100", "ENERGY_CAPACITY: 2")
    )
    # two unit hops fit between recharges; 0-1-2-0 needs 1 + sqrt(2) before the depot
    sol = RouteSolution([[0, 1, 3, 2, 0]])
    assert check_feasibility(sol, inst).feasible
    assert check_feasibility(RouteSolution([[0, 1, 0, 2, 0]]), inst).feasible
    assert not check_feasibility(RouteSolution([[0, 1, 2, 0]]), inst).feasible


@settings(max_examples=25, deadline=None)
@given(st.integers(5, 20), st.integers(1, 4), st.integers(0, 5000))
def test_solution_text_round_trip(n, s, seed):
    inst = generate_instance(n, s, seed=seed)
    sol = build_initial_solution(inst, seed)
    text = format_solution(sol, inst)
    again, obj = parse_solution(text, inst)
    assert again.routes == sol.routes
    assert obj == sol.objective
    assert abs(objective_from_scratch(again, inst) - obj) <= 1e-9 * max(1.0, obj)


@settings(max_examples=25, deadline=None)
@given(st.integers(5, 20), st.integers(1, 4), st.integers(0, 5000))
def test_energy_trace_matches_checker(n, s, seed):
    inst = generate_instance(n, s, seed=seed)
    sol = build_initial_solution(inst, seed)
    assert check_feasibility(sol, inst).feasible
    rate, full = inst.energy_consumption, inst.battery_capacity
    xy = inst.coords
    for route, trace in zip(sol.routes, sol.energy_traces(inst)):
        battery = full
        expected = [full]
        for a, b in zip(route, route[1:]):
            battery -= rate * float(((xy[a] - xy[b]) ** 2).sum() ** 0.5)
            expected.append(battery)
            if b == 0 or inst.is_station(b):
                battery = full
        assert trace == pytest.approx(expected, abs=1e-9)
        assert min(trace) >= -1e-9
