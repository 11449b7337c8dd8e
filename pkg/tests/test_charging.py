import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import best_station_insertion, route_energy_ok
from evrp_iapc.charging import (
    ChargedRoute,
    EnergyInfeasible,
    charge_route,
    is_energy_feasible,
    remove_redundant_stations,
    repair_energy,
)
from evrp_iapc.instance import Customer, Instance, Station, generate_instance
from evrp_iapc.solution import route_length


def line_instance(battery=12.0):
    return Instance(
        "line", Station(1, 0.0, 0.0), (Customer(2, 10.0, 0.0, 1.0),), (Station(3, 5.0, 0.0),), 1, 10.0, battery, 1.0
    )


def test_collinear_station_costs_nothing():
    # 10 out and 10 back exceeds a range of 12; the only fix is a station
    # visit on both legs, and the station sits on the segment
    route = repair_energy([1], line_instance())
    assert route.nodes == (0, 2, 1, 2, 0)
    assert route.added_distance == pytest.approx(0.0, abs=1e-12)


def test_feasible_route_untouched():
    inst = generate_instance(10, 3, seed=1)
    big = Instance(
        inst.name, inst.depot, inst.customers, inst.stations, inst.num_vehicles, inst.vehicle_capacity, 1e9, 1.0
    )
    route = repair_energy([1, 2, 3, 4], big)
    assert route.nodes == (0, 1, 2, 3, 4, 0)
    assert route.added_distance == 0.0


def test_unreachable_customer_raises():
    inst = Instance(
        "far", Station(1, 0.0, 0.0), (Customer(2, 100.0, 0.0, 1.0),), (Station(3, 5.0, 0.0),), 1, 10.0, 12.0, 1.0
    )
    with pytest.raises(EnergyInfeasible):
        repair_energy([1], inst)


def test_remove_redundant_with_huge_battery():
    inst = line_instance(battery=1e6)
    out = remove_redundant_stations((0, 2, 1, 2, 0), inst)
    assert out.nodes == (0, 1, 0)


def test_remove_redundant_keeps_needed_station():
    inst = line_instance()
    out = remove_redundant_stations(ChargedRoute((0, 2, 1, 2, 0), 0.0), inst)
    assert out.nodes == (0, 2, 1, 2, 0)


def test_repair_is_deterministic():
    inst = generate_instance(15, 4, seed=9, range_fraction=0.5)
    custs = list(inst.customer_indices)[:6]
    try:
        a = repair_energy(custs, inst)
    except EnergyInfeasible:
        pytest.skip("route not repairable")
    assert repair_energy(custs, inst) == a


def _longest_chain(nodes, instance):
    longest = run = 0
    for v in nodes[1:-1]:
        run = run + 1 if (v == 0 or instance.is_station(v)) else 0
        longest = max(longest, run)
    return longest


def test_repair_against_exhaustive_insertion():
    """6-customer routes on 20 synthetic instances versus all insertions of up to 2 recharges per arc."""
    agree = compared = failures = solvable = 0
    for seed in range(20):
        inst = generate_instance(8, 4, seed=seed, range_fraction=0.5)
        rng = random.Random(seed)
        for _ in range(3):
            custs = rng.sample(list(inst.customer_indices), 6)
            ref = best_station_insertion(inst, custs, max_chain=2)
            try:
                got = repair_energy(custs, inst)
                nodes, length = got.nodes, route_length(list(got.nodes), inst)
            except EnergyInfeasible:
                nodes = None
            if ref is not None:
                solvable += 1
                if nodes is None:
                    failures += 1
                    continue
            if nodes is None:
                continue
            assert route_energy_ok(inst, list(nodes))
            assert [v for v in nodes if 1 <= v <= inst.num_customers] == custs
            if ref is None or _longest_chain(nodes, inst) > 2:
                continue  # a longer chain than the oracle enumerates
            compared += 1
            assert got.added_distance == pytest.approx(length - route_length([0, *custs, 0], inst), abs=1e-9)
            assert length >= ref[0] - 1e-6
            agree += abs(length - ref[0]) <= 1e-6
    assert compared >= 30
    assert agree / compared >= 0.8, (agree, compared)
    assert failures / max(1, solvable) <= 0.1, (failures, solvable)


def test_charge_route_never_worse_than_repair():
    for seed in range(15):
        inst = generate_instance(10, 3, seed=seed, range_fraction=0.45)
        rng = random.Random(seed)
        custs = rng.sample(list(inst.customer_indices), 4)
        try:
            raw = repair_energy(custs, inst)
        except EnergyInfeasible:
            continue
        nodes, length = charge_route(custs, inst)
        assert length <= route_length(list(raw.nodes), inst) + 1e-9
        assert is_energy_feasible(nodes, inst)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6), st.lists(st.integers(0, 3), min_size=1, max_size=8))
def test_remove_redundant_monotone(seed, n_cust, extra):
    """Random feasible routes padded with extra station visits: pruning keeps feasibility and never lengthens."""
    inst = generate_instance(8, 4, seed=seed)
    rng = random.Random(seed)
    custs = rng.sample(list(inst.customer_indices), n_cust)
    try:
        nodes, _ = charge_route(custs, inst)
    except EnergyInfeasible:
        return
    seq = list(nodes)
    stations = list(inst.station_indices)
    for e in extra:
        seq.insert(rng.randint(1, len(seq) - 1), stations[e % len(stations)])
    if not route_energy_ok(inst, seq):
        return
    out = remove_redundant_stations(seq, inst)
    assert route_energy_ok(inst, list(out.nodes))
    assert route_length(list(out.nodes), inst) <= route_length(seq, inst) + 1e-9
    assert [v for v in out.nodes if 1 <= v <= inst.num_customers] == custs
