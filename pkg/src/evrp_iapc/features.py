"""Instance features: basic descriptors, mutual-kNN graph structure, demand statistics.

Structural features come from a mutual k-nearest-neighbour graph over all
nodes (depot, customers, stations). Degree statistics use the whole graph;
everything needing connectivity is computed on its giant component.
Clustering, assortativity and the Laplacian spectrum use the unweighted
structure; paths, centralities, the MST and edge statistics use Euclidean
edge weights.
"""

from __future__ import annotations

import csv
import hashlib
import heapq
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .instance import Instance

KNN_K = 10
ENTROPY_BINS = 10
# relative tolerance when deciding that two path lengths tie
PATH_TIE_RTOL = 1e-12

BASIC_FEATURES = (
    "num_customers",
    "num_stations",
    "num_depot",
    "num_vehicles",
    "vehicle_capacity",
    "battery_capacity",
    "energy_consumption",
)
GRAPH_FEATURES = (
    "depot_in_giant_component",
    "is_connected",
    "N_giant",
    "M_giant",
    "deg_mean",
    "deg_std",
    "deg_min",
    "deg_max",
    "deg_gc_mean",
    "deg_gc_std",
    "edge_w_gc_mean",
    "edge_w_gc_std",
    "edge_w_gc_min",
    "edge_w_gc_max",
    "clust_gc_mean",
    "clust_gc_std",
    "mst_weight",
    "mst_weight_per_node",
    "mst_deg_mean",
    "mst_deg_max",
    "avg_shortest_path_w",
    "diameter_unweighted",
    "depot_betweenness_w",
    "depot_closeness_w",
    "degree_assortativity",
    "lap_eig_min",
    "lap_eig_max",
    "lap_eig_mean",
    "lap_eig_std",
    "algebraic_connectivity",
    "pairdist_mean",
    "pairdist_std",
    "pairdist_cv",
    "nn_dist_mean",
    "nn_dist_std",
    "nn_dist_cv",
    "cust_to_station_nn_mean",
    "cust_to_station_nn_std",
)
DEMAND_FEATURES = (
    "demand_mean",
    "demand_std",
    "demand_cv",
    "demand_to_capacity_mean",
    "demand_to_capacity_max",
    "total_demand_to_capacity",
    "demand_skewness",
    "demand_entropy",
    "high_demand_ratio",
    "demand_weighted_station_dist",
)
FEATURE_NAMES = BASIC_FEATURES + GRAPH_FEATURES + DEMAND_FEATURES
SCHEMA_VERSION = "evrp-features-1"
SCHEMA_HASH = hashlib.sha256((SCHEMA_VERSION + ":" + ",".join(FEATURE_NAMES)).encode()).hexdigest()[:16]


class DegenerateInstance(ValueError):
    pass


class SingularDegree(ValueError):
    pass


@dataclass(frozen=True)
class KnnGraph:
    """Undirected mutual-kNN graph; ``adjacency`` is a symmetric boolean matrix."""

    adjacency: np.ndarray
    weights: np.ndarray
    k: int

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(i.tolist(), j.tolist()))

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def subgraph(self, nodes: np.ndarray) -> "KnnGraph":
        idx = np.ix_(nodes, nodes)
        return KnnGraph(self.adjacency[idx], self.weights[idx], self.k)


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[float, ...]
    names: tuple[str, ...] = FEATURE_NAMES
    schema: str = SCHEMA_VERSION

    def __post_init__(self):
        if len(self.values) != len(self.names):
            raise ValueError("feature values and names differ in length")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values))

    def __getitem__(self, name: str) -> float:
        return self.values[self.names.index(name)]

    def to_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)


# -- graph construction -----------------------------------------------------


def _knn_from_distances(dist: np.ndarray, k: int) -> KnnGraph:
    n = dist.shape[0]
    kk = min(k, n - 1)
    masked = dist.copy()
    np.fill_diagonal(masked, np.inf)
    # stable sort: equal distances keep ascending node order
    order = np.argsort(masked, axis=1, kind="stable")[:, :kk]
    listed = np.zeros((n, n), dtype=bool)
    listed[np.repeat(np.arange(n), kk), order.ravel()] = True
    mutual = listed & listed.T
    return KnnGraph(mutual, dist * mutual, k)


def build_knn_graph(instance: Instance, k: int = KNN_K) -> KnnGraph:
    if instance.num_nodes < 2 or k < 1:
        raise ValueError("need at least two nodes and k >= 1")
    return _knn_from_distances(instance.distance_matrix, k)


def giant_component(graph: KnnGraph) -> tuple[np.ndarray, int, int]:
    """Largest connected component (ties: the one holding the smallest node).

    Returns (sorted node indices, N_giant, M_giant).
    """
    count, labels = connected_components(csr_matrix(graph.adjacency), directed=False)
    sizes = np.bincount(labels, minlength=count)
    best = max(range(count), key=lambda c: (sizes[c], -int(np.argmax(labels == c))))
    nodes = np.flatnonzero(labels == best)
    edges = int(np.triu(graph.adjacency[np.ix_(nodes, nodes)], 1).sum())
    return nodes, len(nodes), edges


def laplacian_spectrum(graph: KnnGraph) -> np.ndarray:
    """Eigenvalues of I - D^-1/2 A D^-1/2 (unweighted), ascending."""
    a = graph.adjacency.astype(float)
    deg = a.sum(axis=1)
    if len(deg) < 2:
        raise SingularDegree("spectrum needs at least two nodes")
    if np.any(deg == 0):
        raise SingularDegree("isolated node in graph")
    inv_sqrt = 1.0 / np.sqrt(deg)
    lap = np.eye(len(deg)) - inv_sqrt[:, None] * a * inv_sqrt[None, :]
    return np.sort(np.linalg.eigvalsh(lap))


# -- weighted path machinery -----------------------------------------------


def _neighbour_lists(graph: KnnGraph) -> list[list[tuple[int, float]]]:
    adj = graph.adjacency
    w = graph.weights
    return [[(int(j), float(w[i, j])) for j in np.flatnonzero(adj[i])] for i in range(adj.shape[0])]


def _brandes(nbrs: list[list[tuple[int, float]]], target: int) -> tuple[np.ndarray, float]:
    """All-pairs weighted distances and the raw (ordered-pair) betweenness of ``target``."""
    n = len(nbrs)
    all_dist = np.empty((n, n))
    between = 0.0
    for s in range(n):
        dist = [math.inf] * n
        sigma = [0.0] * n
        preds: list[list[int]] = [[] for _ in range(n)]
        dist[s] = 0.0
        sigma[s] = 1.0
        order = []
        heap = [(0.0, s)]
        done = [False] * n
        while heap:
            d, v = heapq.heappop(heap)
            if done[v]:
                continue
            done[v] = True
            order.append(v)
            for w, weight in nbrs[v]:
                nd = d + weight
                dw = dist[w]
                tie = PATH_TIE_RTOL * max(1.0, nd)
                if nd < dw - tie:
                    dist[w] = nd
                    sigma[w] = sigma[v]
                    preds[w] = [v]
                    heapq.heappush(heap, (nd, w))
                elif abs(nd - dw) <= tie and not done[w]:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        all_dist[s] = dist
        delta = [0.0] * n
        for w in reversed(order):
            coeff = (1.0 + delta[w]) / sigma[w]
            for v in preds[w]:
                delta[v] += sigma[v] * coeff
        if s != target:
            between += delta[target]
    return all_dist, between


def _kruskal(n: int, edges: Iterable[tuple[float, int, int]]) -> list[tuple[int, int, float]]:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree = []
    for w, i, j in sorted(edges):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            tree.append((i, j, w))
    return tree


def _stats(values: np.ndarray) -> tuple[float, float]:
    if len(values) == 0:
        return 0.0, 0.0
    return float(np.mean(values)), float(np.std(values))


def _cv(mean: float, std: float) -> float:
    return std / mean if mean != 0 else 0.0


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    if len(x) == 0:
        return 0.0
    sx, sy = np.std(x), np.std(y)
    if sx == 0 or sy == 0:
        return 0.0
    return float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy))


# -- feature groups ----------------------------------------------------------


def _graph_features(instance: Instance, k: int) -> dict[str, float]:
    graph = build_knn_graph(instance, k)
    n = graph.num_nodes
    deg = graph.degrees().astype(float)
    nodes, n_giant, m_giant = giant_component(graph)
    gc = graph.subgraph(nodes)
    gc_deg = gc.degrees().astype(float)
    depot_pos = np.flatnonzero(nodes == 0)
    depot_in_gc = len(depot_pos) == 1
    f: dict[str, float] = {
        "depot_in_giant_component": float(depot_in_gc),
        "is_connected": float(n_giant == n),
        "N_giant": float(n_giant),
        "M_giant": float(m_giant),
    }
    f["deg_mean"], f["deg_std"] = _stats(deg)
    f["deg_min"], f["deg_max"] = float(deg.min()), float(deg.max())
    f["deg_gc_mean"], f["deg_gc_std"] = _stats(gc_deg)

    ei, ej = np.nonzero(np.triu(gc.adjacency, 1))
    edge_w = gc.weights[ei, ej]
    f["edge_w_gc_mean"], f["edge_w_gc_std"] = _stats(edge_w)
    f["edge_w_gc_min"] = float(edge_w.min()) if len(edge_w) else 0.0
    f["edge_w_gc_max"] = float(edge_w.max()) if len(edge_w) else 0.0

    a = gc.adjacency.astype(float)
    triangles = np.einsum("ij,jk,ki->i", a, a, a) / 2.0
    possible = gc_deg * (gc_deg - 1) / 2.0
    clust = np.divide(triangles, possible, out=np.zeros_like(triangles), where=possible > 0)
    f["clust_gc_mean"], f["clust_gc_std"] = _stats(clust)

    tree = _kruskal(n_giant, zip(edge_w.tolist(), ei.tolist(), ej.tolist()))
    mst_deg = np.zeros(n_giant)
    for i, j, _ in tree:
        mst_deg[i] += 1
        mst_deg[j] += 1
    f["mst_weight"] = math.fsum(w for _, _, w in tree)
    f["mst_weight_per_node"] = f["mst_weight"] / n_giant
    f["mst_deg_mean"] = float(mst_deg.mean())
    f["mst_deg_max"] = float(mst_deg.max())

    target = int(depot_pos[0]) if depot_in_gc else -1
    all_dist, raw_between = _brandes(_neighbour_lists(gc), target)
    off_diag = ~np.eye(n_giant, dtype=bool)
    f["avg_shortest_path_w"] = float(all_dist[off_diag].mean()) if n_giant > 1 else 0.0
    hops = shortest_path(csr_matrix(gc.adjacency.astype(float)), unweighted=True, directed=False)
    f["diameter_unweighted"] = float(hops.max())
    if depot_in_gc and n_giant > 2:
        f["depot_betweenness_w"] = raw_between / ((n_giant - 1) * (n_giant - 2))
    else:
        f["depot_betweenness_w"] = 0.0
    if depot_in_gc and n_giant > 1:
        total = all_dist[target].sum()
        f["depot_closeness_w"] = (n_giant - 1) / total if total > 0 else 0.0
    else:
        f["depot_closeness_w"] = 0.0

    f["degree_assortativity"] = _pearson(
        np.concatenate([gc_deg[ei], gc_deg[ej]]), np.concatenate([gc_deg[ej], gc_deg[ei]])
    )

    spectrum = laplacian_spectrum(gc)
    f["lap_eig_min"] = float(spectrum[0])
    f["lap_eig_max"] = float(spectrum[-1])
    f["lap_eig_mean"], f["lap_eig_std"] = _stats(spectrum)
    f["algebraic_connectivity"] = float(spectrum[1])

    dist = instance.distance_matrix
    pair = dist[np.triu_indices(n, 1)]
    f["pairdist_mean"], f["pairdist_std"] = _stats(pair)
    f["pairdist_cv"] = _cv(f["pairdist_mean"], f["pairdist_std"])
    masked = dist + np.diag(np.full(n, np.inf))
    nn = masked.min(axis=1)
    f["nn_dist_mean"], f["nn_dist_std"] = _stats(nn)
    f["nn_dist_cv"] = _cv(f["nn_dist_mean"], f["nn_dist_std"])
    to_station = _customer_station_distances(instance)
    f["cust_to_station_nn_mean"], f["cust_to_station_nn_std"] = _stats(to_station)
    return f


def _customer_station_distances(instance: Instance) -> np.ndarray:
    cust = np.array(list(instance.customer_indices), dtype=int)
    stations = np.array(list(instance.station_indices), dtype=int)
    if len(stations) == 0 or len(cust) == 0:
        return np.zeros(len(cust))
    return instance.distance_matrix[np.ix_(cust, stations)].min(axis=1)


def _skewness(x: np.ndarray) -> float:
    n = len(x)
    if n < 3:
        return 0.0
    m2 = np.mean((x - x.mean()) ** 2)
    if m2 == 0:
        return 0.0
    g1 = np.mean((x - x.mean()) ** 3) / m2**1.5
    return float(g1 * math.sqrt(n * (n - 1)) / (n - 2))


def _entropy(x: np.ndarray, bins: int = ENTROPY_BINS) -> float:
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        return 0.0
    counts, _ = np.histogram(x, bins=bins, range=(lo, hi))
    p = counts[counts > 0] / len(x)
    return float(-(p * np.log(p)).sum())


def _demand_features(instance: Instance) -> dict[str, float]:
    d = np.array([c.demand for c in instance.customers], dtype=float)
    q = instance.vehicle_capacity
    f: dict[str, float] = {}
    f["demand_mean"], f["demand_std"] = _stats(d)
    f["demand_cv"] = _cv(f["demand_mean"], f["demand_std"])
    f["demand_to_capacity_mean"] = f["demand_mean"] / q
    f["demand_to_capacity_max"] = float(d.max()) / q
    f["total_demand_to_capacity"] = float(d.sum()) / q
    f["demand_skewness"] = _skewness(d)
    f["demand_entropy"] = _entropy(d)
    f["high_demand_ratio"] = float(np.mean(d > q / 2))
    to_station = _customer_station_distances(instance)
    f["demand_weighted_station_dist"] = float((d * to_station).sum() / d.sum())
    return f


def compute_features(instance: Instance, k: int = KNN_K) -> FeatureVector:
    if instance.num_nodes < 3:
        raise DegenerateInstance("feature extraction needs at least three nodes")
    f = {
        "num_customers": float(instance.num_customers),
        "num_stations": float(instance.num_stations),
        "num_depot": float(instance.num_depot),
        "num_vehicles": float(instance.num_vehicles),
        "vehicle_capacity": float(instance.vehicle_capacity),
        "battery_capacity": float(instance.battery_capacity),
        "energy_consumption": float(instance.energy_consumption),
    }
    f.update(_graph_features(instance, k))
    f.update(_demand_features(instance))
    return FeatureVector(tuple(f[name] for name in FEATURE_NAMES))


# -- CSV -----------------------------------------------------------------------


def write_feature_csv(rows: dict[str, FeatureVector], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance", *FEATURE_NAMES])
        for name in sorted(rows):
            writer.writerow([name, *(f"{v:.12g}" for v in rows[name].values)])


def read_feature_csv(path: str | Path) -> dict[str, FeatureVector]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header[1:]) != FEATURE_NAMES:
            raise ValueError(f"{path}: feature columns do not match schema {SCHEMA_VERSION}")
        return {row[0]: FeatureVector(tuple(float(v) for v in row[1:])) for row in reader}
