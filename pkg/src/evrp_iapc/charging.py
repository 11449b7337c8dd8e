"""Lower level of the bilevel model: charging-station insertion along a route.

A route is repaired by a forward sweep. At the first arc whose traversal
would drain the battery below zero, station visits (one or a chain of two)
are tried on that arc and on the arc before it, drawing candidates from the
stations nearest to each arc endpoint plus the depot, which also recharges. The cheapest insertion that makes the
failing arc traversable wins; if none does, the cheapest insertion that at
least raises the battery at the failing node is applied and the sweep
repeats. If the sweep gets stuck, a second pass that keeps enough charge
at every customer to reach some charger is used instead. Once feasible,
recharge visits are moved to the cheapest arcs where they still work.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .instance import Instance
from .solution import BATTERY_TOLERANCE, route_length

_TOL = BATTERY_TOLERANCE
_CHAIN_CACHE_LIMIT = 100_000


class EnergyInfeasible(ValueError):
    """No station insertion makes the route energy-feasible."""


@dataclass(frozen=True)
class ChargedRoute:
    nodes: tuple[int, ...]
    added_distance: float

    def customers(self, instance: Instance) -> tuple[int, ...]:
        return tuple(v for v in self.nodes[1:-1] if v != 0 and not instance.is_station(v))


def _sweep(seq: Sequence[int], instance: Instance) -> tuple[int | None, list[float]]:
    """Index of the first failing arc (or None) and departure battery per node."""
    full = instance.battery_capacity
    energy = instance.energy_rows
    n_cust = len(instance.customers)
    departure = [full]
    battery = full
    for p in range(len(seq) - 1):
        a, b = seq[p], seq[p + 1]
        battery -= energy[a][b]
        if battery < -_TOL:
            return p, departure
        if b == 0 or b > n_cust:
            battery = full
        departure.append(battery)
    return None, departure


def is_energy_feasible(seq: Sequence[int], instance: Instance) -> bool:
    full = instance.battery_capacity
    energy = instance.energy_rows
    n_cust = len(instance.customers)
    battery = full
    a = seq[0]
    for b in seq[1:]:
        battery -= energy[a][b]
        if battery < -_TOL:
            return False
        if b == 0 or b > n_cust:
            battery = full
        a = b
    return True


def _chain_options(a: int, b: int, instance: Instance) -> list[tuple]:
    """All one- and two-station chains between a and b, sorted by detour.

    Entries are (detour, chain, energy needed at a, battery on arrival at b);
    chains with an internal hop longer than the battery range are left out.
    Cached per instance since the list depends only on the arc.
    """
    cache = instance.__dict__.setdefault("_chain_options", {})
    key = (a, b)
    options = cache.get(key)
    if options is not None:
        return options
    full = instance.battery_capacity
    energy = instance.energy_rows
    dist = instance.distance_rows
    shortlist = instance.station_shortlist
    candidates = []
    # the depot recharges too, so a mid-route depot visit is a candidate
    for s in shortlist[a] + shortlist[b] + [0]:
        if s != a and s != b and s not in candidates:
            candidates.append(s)
    base = dist[a][b]
    options = []
    for s in candidates:
        if energy[s][b] <= full + _TOL:
            options.append((dist[a][s] + dist[s][b] - base, (s,), energy[a][s], full - energy[s][b]))
    for s1 in candidates:
        for s2 in candidates:
            if s2 == s1 or energy[s1][s2] > full + _TOL or energy[s2][b] > full + _TOL:
                continue
            detour = dist[a][s1] + dist[s1][s2] + dist[s2][b] - base
            options.append((detour, (s1, s2), energy[a][s1], full - energy[s2][b]))
    options.sort(key=lambda o: (o[0], len(o[1]), o[1]))
    if len(cache) >= _CHAIN_CACHE_LIMIT:
        cache.clear()
    cache[key] = options
    return options


def repair_energy(customers: Sequence[int], instance: Instance) -> ChargedRoute:
    """Insert station visits into a customer-only route until it is energy-feasible."""
    seq = [0, *customers, 0]
    energy = instance.energy_rows
    n_cust = instance.num_customers
    original = route_length(seq, instance)
    for _ in range(4 * len(seq) + 8):
        p, departure = _sweep(seq, instance)
        if p is None:
            seq = _relocate_blocks(seq, instance)
            added = route_length(seq, instance) - original
            return ChargedRoute(tuple(seq), max(0.0, added))
        u, v = seq[p], seq[p + 1]
        need = energy[u][v]
        resolving = None  # (detour, position, chain)
        helping = None
        battery = departure[p] + _TOL
        for detour, chain, cost, _ in _chain_options(u, v, instance):
            if cost <= battery:
                resolving = (detour, p + 1, chain)
                break
        if p >= 1 and 1 <= u <= n_cust:
            t = seq[p - 1]
            battery = departure[p - 1] + _TOL
            for detour, chain, cost, arrival in _chain_options(t, u, instance):
                if resolving is not None and detour >= resolving[0]:
                    break
                if cost > battery:
                    continue
                if arrival - need >= -_TOL:
                    resolving = (detour, p, chain)
                    break
                if helping is None and arrival > departure[p] + _TOL:
                    helping = (detour, p, chain)
        choice = resolving or helping
        if choice is None:
            break
        _, pos, chain = choice
        seq[pos:pos] = chain
    # the sweep got stuck; a slower sweep that never strands the vehicle
    seq = _reach_safe_sweep(customers, instance)
    seq = _relocate_blocks(seq, instance)
    return ChargedRoute(tuple(seq), max(0.0, route_length(seq, instance) - original))


def _reach_safe_sweep(customers: Sequence[int], instance: Instance) -> list[int]:
    """Walk the route, recharging before any customer from which no charger is reachable."""
    full = instance.battery_capacity
    energy = instance.energy_rows
    n_cust = instance.num_customers
    shortlist = instance.station_shortlist
    # energy from each customer to its nearest recharge (station or depot)
    escape = {c: min([energy[c][0]] + [energy[c][s] for s in shortlist[c]]) for c in customers}
    seq = [0]
    battery = full
    for v in [*customers, 0]:
        u = seq[-1]
        reserve = 0.0 if v == 0 else escape[v]
        if battery - energy[u][v] >= reserve - _TOL:
            seq.append(v)
            battery = full if v == 0 else battery - energy[u][v]
            continue
        for _, chain, cost, arrival in _chain_options(u, v, instance):
            if cost <= battery + _TOL and arrival >= reserve - _TOL:
                seq.extend(chain)
                seq.append(v)
                battery = full if v == 0 else arrival
                break
        else:
            raise EnergyInfeasible(
                f"cannot make arc ({instance.node_ids[u]}, {instance.node_ids[v]}) energy-feasible"
            )
    return seq


def _relocate_blocks(seq: list[int], instance: Instance) -> list[int]:
    """Drop or move recharge visits while the route stays feasible.

    A visit that is not needed is dropped. Otherwise a single visit, or a pair of consecutive visits, may move to any arc
    between the neighbouring recharges and be replaced by any one- or
    two-stop chain there. Repeats until no move shortens the route.
    """
    n_cust = instance.num_customers
    dist = instance.distance_rows

    def charger(v: int) -> bool:
        return v == 0 or v > n_cust

    improved = True
    while improved:
        improved = False
        for i in range(1, len(seq) - 1):
            if not charger(seq[i]):
                continue
            for j in (i + 1, i + 2):
                if j >= len(seq) or (j == i + 2 and not charger(seq[i + 1])):
                    continue
                # visits seq[i:j] sit on the arc (seq[i-1], seq[j])
                current = route_length(seq[i - 1 : j + 1], instance) - dist[seq[i - 1]][seq[j]]
                bare = seq[:i] + seq[j:]
                lo = i - 1
                while lo > 0 and not charger(bare[lo]):
                    lo -= 1
                hi = i
                while hi < len(bare) - 1 and not charger(bare[hi]):
                    hi += 1
                # the battery is full at bare[lo] and bare[hi], so only that stretch needs checking
                segment = bare[lo : hi + 1]
                best = (current, None) if is_energy_feasible(segment, instance) else None
                for q in range(lo, hi if best is None else lo):
                    for detour, chain, _, _ in _chain_options(bare[q], bare[q + 1], instance):
                        if detour >= current - 1e-9 or (best is not None and detour >= best[0]):
                            break
                        k = q + 1 - lo
                        if is_energy_feasible(segment[:k] + list(chain) + segment[k:], instance):
                            best = (detour, (q, chain))
                            break
                if best is not None:
                    if best[1] is None:
                        seq = bare
                    else:
                        q, chain = best[1]
                        seq = bare[: q + 1] + list(chain) + bare[q + 1 :]
                    improved = True
                    break
            if improved:
                break
    return seq


def remove_redundant_stations(route: ChargedRoute | Sequence[int], instance: Instance) -> ChargedRoute:
    """Drop station visits whose removal keeps the route energy-feasible."""
    seq = list(route.nodes if isinstance(route, ChargedRoute) else route)
    n_cust = instance.num_customers
    changed = True
    while changed:
        changed = False
        i = 1
        while i < len(seq) - 1:
            if seq[i] == 0 or seq[i] > n_cust:
                trial = seq[:i] + seq[i + 1 :]
                if is_energy_feasible(trial, instance):
                    seq = trial
                    changed = True
                    continue
            i += 1
    customers = [v for v in seq[1:-1] if 1 <= v <= n_cust]
    added = route_length(seq, instance) - route_length([0, *customers, 0], instance)
    return ChargedRoute(tuple(seq), max(0.0, added))


def charge_route(customers: Sequence[int], instance: Instance) -> tuple[tuple[int, ...], float]:
    """Repair then prune; returns the full node sequence and its length."""
    if not customers:
        return (0, 0), 0.0
    charged = remove_redundant_stations(repair_energy(customers, instance), instance)
    return charged.nodes, route_length(charged.nodes, instance)
