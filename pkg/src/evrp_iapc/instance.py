"""E-CVRP benchmark instances: parsing, writing, distances and problem size.

The file format is the one used by the IEEE WCCI-2020 EVRP benchmark::

    NAME: E-n22-k4.evrp
    VEHICLES: 4
    DIMENSION: 22
    STATIONS: 8
    CAPACITY: 6000
    ENERGY_CAPACITY: 94
    ENERGY_CONSUMPTION: 1.20
    EDGE_WEIGHT_FORMAT: EUC_2D
    NODE_COORD_SECTION
    1 145 215
    ...
    DEMAND_SECTION
    1 0
    ...
    STATIONS_COORD_SECTION
    23
    ...
    DEPOT_SECTION
    1
    -1
    EOF

DIMENSION counts the depot plus the customers; NODE_COORD_SECTION lists
DIMENSION + STATIONS nodes. Internally nodes are indexed depot first (0),
then customers (1..n), then stations (n+1..n+s), in file order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

import numpy as np

# stations kept per node when repairing energy violations
STATION_SHORTLIST = 5

_HEADER_KEYS = (
    "VEHICLES",
    "DIMENSION",
    "STATIONS",
    "CAPACITY",
    "ENERGY_CAPACITY",
    "ENERGY_CONSUMPTION",
)
_SECTIONS = (
    "NODE_COORD_SECTION",
    "DEMAND_SECTION",
    "STATIONS_COORD_SECTION",
    "DEPOT_SECTION",
)


class InstanceFormatError(ValueError):
    """Base class for malformed benchmark files."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingSection(InstanceFormatError):
    pass


class HeaderMismatch(InstanceFormatError):
    pass


class NonPositiveCapacity(InstanceFormatError):
    pass


class DuplicateNodeId(InstanceFormatError):
    pass


class InvalidDemand(InstanceFormatError):
    pass


class UnknownNode(KeyError):
    pass


class Customer(NamedTuple):
    id: int
    x: float
    y: float
    demand: float


class Station(NamedTuple):
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class Instance:
    name: str
    depot: Station
    customers: tuple[Customer, ...]
    stations: tuple[Station, ...]
    num_vehicles: int
    vehicle_capacity: float
    battery_capacity: float
    energy_consumption: float
    num_depot: int = 1

    def __post_init__(self):
        if self.vehicle_capacity <= 0:
            raise NonPositiveCapacity("vehicle capacity must be positive")
        if self.battery_capacity <= 0:
            raise NonPositiveCapacity("battery capacity must be positive")
        if self.energy_consumption <= 0:
            raise NonPositiveCapacity("energy consumption must be positive")
        seen = set()
        for node in self.nodes:
            if node.id in seen:
                raise DuplicateNodeId(f"node id {node.id} appears twice")
            seen.add(node.id)
        for c in self.customers:
            if not 0 < c.demand <= self.vehicle_capacity:
                raise InvalidDemand(
                    f"customer {c.id} demand {c.demand} outside (0, {self.vehicle_capacity}]"
                )

    # -- node bookkeeping -------------------------------------------------

    @property
    def nodes(self) -> tuple:
        return (self.depot, *self.customers, *self.stations)

    @property
    def num_customers(self) -> int:
        return len(self.customers)

    @property
    def num_stations(self) -> int:
        return len(self.stations)

    @property
    def num_nodes(self) -> int:
        return 1 + len(self.customers) + len(self.stations)

    @property
    def customer_indices(self) -> range:
        return range(1, 1 + len(self.customers))

    @property
    def station_indices(self) -> range:
        n = 1 + len(self.customers)
        return range(n, n + len(self.stations))

    @cached_property
    def node_ids(self) -> tuple[int, ...]:
        return tuple(node.id for node in self.nodes)

    @cached_property
    def index_of(self) -> dict[int, int]:
        return {nid: i for i, nid in enumerate(self.node_ids)}

    def is_station(self, index: int) -> bool:
        return index > len(self.customers)

    @cached_property
    def coords(self) -> np.ndarray:
        return np.array([(node.x, node.y) for node in self.nodes], dtype=float)

    @cached_property
    def demands(self) -> np.ndarray:
        """Demand per internal index; zero for the depot and the stations."""
        d = np.zeros(self.num_nodes)
        d[1 : 1 + len(self.customers)] = [c.demand for c in self.customers]
        return d

    @cached_property
    def distance_matrix(self) -> np.ndarray:
        diff = self.coords[:, None, :] - self.coords[None, :, :]
        return np.sqrt((diff**2).sum(axis=-1))

    @cached_property
    def distance_rows(self) -> list[list[float]]:
        """Distance matrix as nested lists, for fast scalar access in hot loops."""
        return self.distance_matrix.tolist()

    @cached_property
    def energy_rows(self) -> list[list[float]]:
        return (self.distance_matrix * self.energy_consumption).tolist()

    @cached_property
    def station_shortlist(self) -> list[list[int]]:
        """The STATION_SHORTLIST stations nearest to each node (internal indices)."""
        stations = np.array(list(self.station_indices), dtype=int)
        if len(stations) == 0:
            return [[] for _ in range(self.num_nodes)]
        d = self.distance_matrix[:, stations]
        order = np.argsort(d, axis=1, kind="stable")[:, :STATION_SHORTLIST]
        return stations[order].tolist()


def distance(instance: Instance, i: int, j: int) -> float:
    """Euclidean distance between two nodes given by their file ids."""
    try:
        a = instance.index_of[i]
        b = instance.index_of[j]
    except KeyError as exc:
        raise UnknownNode(exc.args[0]) from None
    (xa, ya), (xb, yb) = instance.coords[a], instance.coords[b]
    return math.sqrt((xa - xb) ** 2 + (ya - yb) ** 2)


def problem_size(instance: Instance) -> int:
    """Depots + customers + stations."""
    return instance.num_depot + instance.num_customers + instance.num_stations


# -- parsing ---------------------------------------------------------------


def _number(token: str) -> float:
    value = float(token)
    return value


def _int_token(token: str, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        try:
            value = float(token)
        except ValueError:
            raise InstanceFormatError(f"expected an integer, got {token!r}", lineno) from None
        if not value.is_integer():
            raise InstanceFormatError(f"expected an integer, got {token!r}", lineno) from None
        return int(value)


def parse_instance(text: str, name: str | None = None) -> Instance:
    """Parse the contents of an EVRP benchmark file."""
    header: dict[str, tuple[str, int]] = {}
    sections: dict[str, list[tuple[int, list[str]]]] = {}
    section_line: dict[str, int] = {}
    current = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        upper = line.upper()
        if upper == "EOF":
            break
        keyword = upper.split()[0].rstrip(":")
        if keyword in _SECTIONS:
            current = keyword
            if current in sections:
                raise InstanceFormatError(f"section {current} repeated", lineno)
            sections[current] = []
            section_line[current] = lineno
            continue
        if ":" in line and not line[0].isdigit() and not line[0] == "-":
            key, value = line.split(":", 1)
            header[key.strip().upper()] = (value.strip(), lineno)
            current = None
            continue
        if current is None:
            raise InstanceFormatError(f"unexpected content {line!r}", lineno)
        sections[current].append((lineno, line.split()))

    for key in _HEADER_KEYS:
        if key not in header:
            raise MissingSection(f"header field {key} is missing")
    for key in _SECTIONS:
        if key not in sections:
            raise MissingSection(f"section {key} is missing")

    def header_int(key):
        value, lineno = header[key]
        return _int_token(value, lineno)

    def header_float(key):
        value, lineno = header[key]
        try:
            return float(value)
        except ValueError:
            raise InstanceFormatError(f"{key} is not a number: {value!r}", lineno) from None

    dimension = header_int("DIMENSION")
    num_stations = header_int("STATIONS")
    vehicles = header_int("VEHICLES")
    capacity = header_float("CAPACITY")
    battery = header_float("ENERGY_CAPACITY")
    consumption = header_float("ENERGY_CONSUMPTION")
    for key, value in (
        ("CAPACITY", capacity),
        ("ENERGY_CAPACITY", battery),
        ("ENERGY_CONSUMPTION", consumption),
        ("VEHICLES", vehicles),
    ):
        if value <= 0:
            raise NonPositiveCapacity(f"{key} must be positive, got {value}", header[key][1])

    coords: dict[int, tuple[float, float]] = {}
    order: list[int] = []
    for lineno, tokens in sections["NODE_COORD_SECTION"]:
        if len(tokens) < 3:
            raise InstanceFormatError("coordinate line needs id x y", lineno)
        nid = _int_token(tokens[0], lineno)
        if nid in coords:
            raise DuplicateNodeId(f"node id {nid} appears twice", lineno)
        coords[nid] = (_number(tokens[1]), _number(tokens[2]))
        order.append(nid)
    expected = dimension + num_stations
    if len(order) != expected:
        raise HeaderMismatch(
            f"NODE_COORD_SECTION has {len(order)} nodes, DIMENSION + STATIONS = {expected}",
            section_line["NODE_COORD_SECTION"],
        )

    demands: dict[int, float] = {}
    for lineno, tokens in sections["DEMAND_SECTION"]:
        if len(tokens) < 2:
            raise InstanceFormatError("demand line needs id demand", lineno)
        nid = _int_token(tokens[0], lineno)
        if nid in demands:
            raise DuplicateNodeId(f"demand for node {nid} given twice", lineno)
        if nid not in coords:
            raise InstanceFormatError(f"demand given for unknown node {nid}", lineno)
        demands[nid] = _number(tokens[1])
    if len(demands) != dimension:
        raise HeaderMismatch(
            f"DEMAND_SECTION has {len(demands)} entries, DIMENSION = {dimension}",
            section_line["DEMAND_SECTION"],
        )

    station_ids: list[int] = []
    for lineno, tokens in sections["STATIONS_COORD_SECTION"]:
        nid = _int_token(tokens[0], lineno)
        if nid in station_ids:
            raise DuplicateNodeId(f"station {nid} listed twice", lineno)
        if len(tokens) >= 3:
            xy = (_number(tokens[1]), _number(tokens[2]))
            if nid in coords and coords[nid] != xy:
                raise InstanceFormatError(f"station {nid} coordinates disagree", lineno)
            coords.setdefault(nid, xy)
        if nid not in coords:
            raise InstanceFormatError(f"station {nid} has no coordinates", lineno)
        if nid in demands and demands[nid] != 0:
            raise InstanceFormatError(f"station {nid} has a non-zero demand", lineno)
        station_ids.append(nid)
    if len(station_ids) != num_stations:
        raise HeaderMismatch(
            f"STATIONS_COORD_SECTION has {len(station_ids)} entries, STATIONS = {num_stations}",
            section_line["STATIONS_COORD_SECTION"],
        )

    depot_ids = []
    for lineno, tokens in sections["DEPOT_SECTION"]:
        for token in tokens:
            nid = _int_token(token, lineno)
            if nid == -1:
                break
            depot_ids.append((nid, lineno))
    if len(depot_ids) != 1:
        raise HeaderMismatch(
            f"expected exactly one depot, found {len(depot_ids)}", section_line["DEPOT_SECTION"]
        )
    depot_id, depot_line = depot_ids[0]
    if depot_id not in coords:
        raise InstanceFormatError(f"depot {depot_id} has no coordinates", depot_line)
    if demands.get(depot_id, 0) != 0:
        raise InvalidDemand(f"depot {depot_id} has a non-zero demand", depot_line)

    station_set = set(station_ids)
    if depot_id in station_set:
        raise InstanceFormatError(f"depot {depot_id} is also listed as a station", depot_line)
    customers = []
    for nid in order:
        if nid == depot_id or nid in station_set:
            continue
        if nid not in demands:
            raise HeaderMismatch(f"customer {nid} has no demand")
        customers.append(Customer(nid, *coords[nid], demands[nid]))
    if len(customers) != dimension - 1:
        raise HeaderMismatch(
            f"{len(customers)} customers found, DIMENSION - 1 = {dimension - 1}"
        )

    if name is None:
        name = header.get("NAME", ("", 0))[0] or "instance"
        name = name.removesuffix(".evrp")
    return Instance(
        name=name,
        depot=Station(depot_id, *coords[depot_id]),
        customers=tuple(customers),
        stations=tuple(Station(sid, *coords[sid]) for sid in station_ids),
        num_vehicles=vehicles,
        vehicle_capacity=capacity,
        battery_capacity=battery,
        energy_consumption=consumption,
    )


def load_instance(path: str | Path) -> Instance:
    path = Path(path)
    return parse_instance(path.read_text(), name=path.stem)


# -- writing ---------------------------------------------------------------


def _fmt(value: float) -> str:
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def write_instance(instance: Instance) -> str:
    """Serialize to the benchmark format; parse_instance(write_instance(x)) == x."""
    lines = [
        f"NAME: {instance.name}",
        "TYPE: EVRP",
        f"VEHICLES: {instance.num_vehicles}",
        f"DIMENSION: {1 + instance.num_customers}",
        f"STATIONS: {instance.num_stations}",
        f"CAPACITY: {_fmt(instance.vehicle_capacity)}",
        f"ENERGY_CAPACITY: {_fmt(instance.battery_capacity)}",
        f"ENERGY_CONSUMPTION: {_fmt(instance.energy_consumption)}",
        "EDGE_WEIGHT_FORMAT: EUC_2D",
        "NODE_COORD_SECTION",
    ]
    for node in instance.nodes:
        lines.append(f"{node.id} {_fmt(node.x)} {_fmt(node.y)}")
    lines.append("DEMAND_SECTION")
    lines.append(f"{instance.depot.id} 0")
    for c in instance.customers:
        lines.append(f"{c.id} {_fmt(c.demand)}")
    lines.append("STATIONS_COORD_SECTION")
    for s in instance.stations:
        lines.append(str(s.id))
    lines += ["DEPOT_SECTION", str(instance.depot.id), "-1", "EOF", ""]
    return "\n".join(lines)


def save_instance(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(write_instance(instance))


# -- synthetic instances ---------------------------------------------------


def generate_instance(
    num_customers: int,
    num_stations: int,
    seed: int = 0,
    *,
    num_vehicles: int | None = None,
    capacity: float = 100.0,
    grid: float = 100.0,
    range_fraction: float = 0.6,
    consumption: float = 1.0,
    clustered: bool = False,
    name: str | None = None,
) -> Instance:
    """Random benchmark-format instance.

    Battery capacity is ``range_fraction`` of the depot-to-farthest-customer
    round trip, so some routes need charging. Stations are placed so that
    every customer is reachable (a station within half a battery range).
    """
    rng = np.random.default_rng(seed)
    if clustered:
        centers = rng.uniform(0.15 * grid, 0.85 * grid, size=(max(2, num_customers // 8), 2))
        pick = rng.integers(len(centers), size=num_customers)
        cust_xy = centers[pick] + rng.normal(scale=0.06 * grid, size=(num_customers, 2))
    else:
        cust_xy = rng.uniform(0, grid, size=(num_customers, 2))
    cust_xy = np.round(cust_xy, 2)
    depot_xy = np.round(np.full(2, grid / 2) + rng.normal(scale=0.05 * grid, size=2), 2)
    station_xy = np.round(rng.uniform(0, grid, size=(num_stations, 2)), 2)

    far = np.sqrt(((cust_xy - depot_xy) ** 2).sum(axis=1)).max()
    battery = round(max(2 * far * range_fraction, 1.0) * consumption, 2)
    reach = battery / consumption
    # every customer within reach/2 of the depot or a station, else move a free station there
    anchored: set[int] = set()
    for xy in cust_xy:
        hubs = np.vstack([depot_xy[None, :], station_xy])
        free = [j for j in range(num_stations) if j not in anchored]
        if np.sqrt(((hubs - xy) ** 2).sum(axis=1)).min() > 0.45 * reach and free:
            j = min(free, key=lambda s: float(np.hypot(*(station_xy[s] - xy))))
            station_xy[j] = np.round(xy + rng.uniform(-0.1, 0.1, 2) * reach, 2)
            anchored.add(j)

    demands = rng.integers(1, max(2, int(capacity * 0.3)), size=num_customers)
    if num_vehicles is None:
        num_vehicles = int(math.ceil(demands.sum() / capacity)) + 1
    depot = Station(1, float(depot_xy[0]), float(depot_xy[1]))
    customers = tuple(
        Customer(2 + i, float(x), float(y), float(d))
        for i, ((x, y), d) in enumerate(zip(cust_xy, demands))
    )
    stations = tuple(
        Station(2 + num_customers + j, float(x), float(y)) for j, (x, y) in enumerate(station_xy)
    )
    if name is None:
        name = f"S-n{num_customers + 1}-k{num_vehicles}-s{num_stations}-r{seed}"
    from .charging import EnergyInfeasible, charge_route

    while True:
        inst = Instance(
            name=name,
            depot=depot,
            customers=customers,
            stations=stations,
            num_vehicles=num_vehicles,
            vehicle_capacity=float(capacity),
            battery_capacity=float(battery),
            energy_consumption=float(consumption),
        )
        try:
            for c in inst.customer_indices:
                charge_route([c], inst)
            return inst
        except EnergyInfeasible:
            # stations too sparse for this range: widen the battery until singletons work
            battery = round(battery * 1.1, 2)
