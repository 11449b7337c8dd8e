"""Independent brute-force references used only by the tests.

Nothing here imports the package's graph, charging or regression code; the
inputs are plain coordinates, demands and scalars.
"""

from __future__ import annotations

import heapq
import itertools
import math
from collections import deque

import numpy as np


# -- instance-level plain data -----------------------------------------------------


def plain(instance):
    """(coords list, customer demands, capacity, stations idx, customer idx, scalars) with depot first."""
    pts = [(instance.depot.x, instance.depot.y)]
    pts += [(c.x, c.y) for c in instance.customers]
    pts += [(s.x, s.y) for s in instance.stations]
    n_c = len(instance.customers)
    return {
        "pts": pts,
        "demand": [c.demand for c in instance.customers],
        "customers": list(range(1, n_c + 1)),
        "stations": list(range(n_c + 1, len(pts))),
        "capacity": instance.vehicle_capacity,
        "battery": instance.battery_capacity,
        "rate": instance.energy_consumption,
    }


def euclid(p, q):
    return math.sqrt((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2)


def _mean(xs):
    return math.fsum(xs) / len(xs) if xs else 0.0


def _pstd(xs):
    if not xs:
        return 0.0
    m = _mean(xs)
    return math.sqrt(math.fsum((x - m) ** 2 for x in xs) / len(xs))


# -- graph oracle ----------------------------------------------------------------------


def mutual_knn(pts, k):
    n = len(pts)
    d = [[euclid(pts[i], pts[j]) for j in range(n)] for i in range(n)]
    near = []
    for i in range(n):
        others = sorted((d[i][j], j) for j in range(n) if j != i)
        near.append({j for _, j in others[: min(k, n - 1)]})
    adj = [set() for _ in range(n)]
    for i in range(n):
        for j in near[i]:
            if i in near[j]:
                adj[i].add(j)
    return d, adj


def union_find_components(n, adj):
    parent = list(range(n))

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for i in range(n):
        for j in adj[i]:
            a, b = find(i), find(j)
            if a != b:
                parent[max(a, b)] = min(a, b)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: (-len(g), min(g)))


def jacobi_eigenvalues(a, tol=1e-13, sweeps=200):
    """Cyclic Jacobi rotations on a symmetric matrix given as nested lists."""
    n = len(a)
    m = [row[:] for row in a]
    for _ in range(sweeps):
        off = math.sqrt(sum(m[i][j] ** 2 for i in range(n) for j in range(n) if i != j))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(m[p][q]) < 1e-300:
                    continue
                theta = (m[q][q] - m[p][p]) / (2 * m[p][q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                for k in range(n):
                    mkp, mkq = m[k][p], m[k][q]
                    m[k][p] = c * mkp - s * mkq
                    m[k][q] = s * mkp + c * mkq
                for k in range(n):
                    mpk, mqk = m[p][k], m[q][k]
                    m[p][k] = c * mpk - s * mqk
                    m[q][k] = s * mpk + c * mqk
    return sorted(m[i][i] for i in range(n))


def dijkstra(src, nbrs):
    dist = {src: 0.0}
    heap = [(0.0, src)]
    done = set()
    while heap:
        d, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        for w, wt in nbrs[v]:
            nd = d + wt
            if nd < dist.get(w, math.inf):
                dist[w] = nd
                heapq.heappush(heap, (nd, w))
    return dist


def count_shortest_paths(src, nbrs, dist, rtol=1e-12):
    """Number of shortest paths from src to every node, by DP in distance order."""
    order = sorted(dist, key=lambda v: dist[v])
    sigma = {src: 1}
    for v in order:
        if v == src:
            continue
        total = 0
        for u, wt in nbrs[v]:
            if u in dist and abs(dist[u] + wt - dist[v]) <= rtol * max(1.0, dist[v]):
                total += sigma.get(u, 0)
        sigma[v] = total
    return sigma


def prim(nodes, wt):
    """MST weight and per-node tree degree over a complete-by-dict weight map."""
    nodes = list(nodes)
    in_tree = {nodes[0]}
    degree = {v: 0 for v in nodes}
    total = 0.0
    while len(in_tree) < len(nodes):
        best = None
        for u in in_tree:
            for v, w in wt[u].items():
                if v not in in_tree and (best is None or (w, u, v) < best):
                    best = (w, u, v)
        w, u, v = best
        total += w
        degree[u] += 1
        degree[v] += 1
        in_tree.add(v)
    return total, degree


def bfs_eccentricity(src, adj):
    seen = {src: 0}
    q = deque([src])
    while q:
        v = q.popleft()
        for w in adj[v]:
            if w not in seen:
                seen[w] = seen[v] + 1
                q.append(w)
    return max(seen.values())


def feature_oracle(instance, k=10):
    """Every feature value by name, from brute-force graph analysis."""
    P = plain(instance)
    pts = P["pts"]
    n = len(pts)
    d, adj = mutual_knn(pts, k)
    f = {
        "num_customers": len(P["customers"]),
        "num_stations": len(P["stations"]),
        "num_depot": 1,
        "num_vehicles": instance.num_vehicles,
        "vehicle_capacity": P["capacity"],
        "battery_capacity": P["battery"],
        "energy_consumption": P["rate"],
    }
    comps = union_find_components(n, adj)
    gc = sorted(comps[0])
    pos = {v: i for i, v in enumerate(gc)}
    gset = set(gc)
    g_adj = {v: adj[v] & gset for v in gc}
    edges = sorted((u, v) for u in gc for v in g_adj[u] if u < v)
    f["depot_in_giant_component"] = float(0 in gset)
    f["is_connected"] = float(len(gc) == n)
    f["N_giant"] = len(gc)
    f["M_giant"] = len(edges)
    deg = [len(adj[i]) for i in range(n)]
    f["deg_mean"], f["deg_std"], f["deg_min"], f["deg_max"] = _mean(deg), _pstd(deg), min(deg), max(deg)
    gdeg = {v: len(g_adj[v]) for v in gc}
    f["deg_gc_mean"], f["deg_gc_std"] = _mean(list(gdeg.values())), _pstd(list(gdeg.values()))
    ew = [d[u][v] for u, v in edges]
    f["edge_w_gc_mean"], f["edge_w_gc_std"] = _mean(ew), _pstd(ew)
    f["edge_w_gc_min"], f["edge_w_gc_max"] = (min(ew), max(ew)) if ew else (0.0, 0.0)

    clust = []
    for v in gc:
        nb = sorted(g_adj[v])
        kv = len(nb)
        if kv < 2:
            clust.append(0.0)
            continue
        links = sum(1 for a, b in itertools.combinations(nb, 2) if b in g_adj[a])
        clust.append(links / (kv * (kv - 1) / 2))
    f["clust_gc_mean"], f["clust_gc_std"] = _mean(clust), _pstd(clust)

    wt = {u: {v: d[u][v] for v in g_adj[u]} for u in gc}
    mst_w, mst_deg = prim(gc, wt)
    f["mst_weight"] = mst_w
    f["mst_weight_per_node"] = mst_w / len(gc)
    f["mst_deg_mean"] = _mean(list(mst_deg.values()))
    f["mst_deg_max"] = max(mst_deg.values())

    nbrs = {u: [(v, d[u][v]) for v in g_adj[u]] for u in gc}
    apsp = {s: dijkstra(s, nbrs) for s in gc}
    pair_lengths = [apsp[s][t] for s in gc for t in gc if s != t]
    f["avg_shortest_path_w"] = _mean(pair_lengths)
    f["diameter_unweighted"] = max(bfs_eccentricity(v, g_adj) for v in gc)

    N = len(gc)
    if 0 in gset and N > 2:
        sig = {s: count_shortest_paths(s, nbrs, apsp[s]) for s in gc}
        total = 0.0
        for s in gc:
            for t in gc:
                if s == t or 0 in (s, t):
                    continue
                if abs(apsp[s][0] + apsp[0][t] - apsp[s][t]) <= 1e-12 * max(1.0, apsp[s][t]):
                    total += sig[s][0] * sig[0][t] / sig[s][t]
        f["depot_betweenness_w"] = total / ((N - 1) * (N - 2))
    else:
        f["depot_betweenness_w"] = 0.0
    if 0 in gset and N > 1:
        f["depot_closeness_w"] = (N - 1) / math.fsum(apsp[0][t] for t in gc if t != 0)
    else:
        f["depot_closeness_w"] = 0.0

    # assortativity: Pearson over both orientations of every edge
    xs = [gdeg[u] for u, v in edges] + [gdeg[v] for u, v in edges]
    ys = [gdeg[v] for u, v in edges] + [gdeg[u] for u, v in edges]
    sx, sy = _pstd(xs), _pstd(ys)
    if not xs or sx == 0 or sy == 0:
        f["degree_assortativity"] = 0.0
    else:
        mx, my = _mean(xs), _mean(ys)
        f["degree_assortativity"] = _mean([(a - mx) * (b - my) for a, b in zip(xs, ys)]) / (sx * sy)

    lap = [[0.0] * N for _ in range(N)]
    for u in gc:
        i = pos[u]
        lap[i][i] = 1.0
        for v in g_adj[u]:
            lap[i][pos[v]] = -1.0 / math.sqrt(gdeg[u] * gdeg[v])
    eig = jacobi_eigenvalues(lap)
    f["lap_eig_min"], f["lap_eig_max"] = eig[0], eig[-1]
    f["lap_eig_mean"], f["lap_eig_std"] = _mean(eig), _pstd(eig)
    f["algebraic_connectivity"] = eig[1]

    pair = [d[i][j] for i in range(n) for j in range(i + 1, n)]
    f["pairdist_mean"], f["pairdist_std"] = _mean(pair), _pstd(pair)
    f["pairdist_cv"] = f["pairdist_std"] / f["pairdist_mean"]
    nn = [min(d[i][j] for j in range(n) if j != i) for i in range(n)]
    f["nn_dist_mean"], f["nn_dist_std"] = _mean(nn), _pstd(nn)
    f["nn_dist_cv"] = f["nn_dist_std"] / f["nn_dist_mean"]
    to_st = [min((d[c][s] for s in P["stations"]), default=0.0) for c in P["customers"]]
    f["cust_to_station_nn_mean"], f["cust_to_station_nn_std"] = _mean(to_st), _pstd(to_st)

    dem = P["demand"]
    q = P["capacity"]
    m, s = _mean(dem), _pstd(dem)
    f["demand_mean"], f["demand_std"] = m, s
    f["demand_cv"] = s / m if m else 0.0
    f["demand_to_capacity_mean"] = m / q
    f["demand_to_capacity_max"] = max(dem) / q
    f["total_demand_to_capacity"] = math.fsum(dem) / q
    nd = len(dem)
    if nd >= 3 and s > 0:
        g1 = _mean([(x - m) ** 3 for x in dem]) / s**3
        f["demand_skewness"] = g1 * math.sqrt(nd * (nd - 1)) / (nd - 2)
    else:
        f["demand_skewness"] = 0.0
    lo, hi = min(dem), max(dem)
    if lo == hi:
        f["demand_entropy"] = 0.0
    else:
        width = (hi - lo) / 10
        counts = [0] * 10
        for x in dem:
            counts[min(9, int((x - lo) / width))] += 1
        f["demand_entropy"] = -sum(c / nd * math.log(c / nd) for c in counts if c)
    f["high_demand_ratio"] = sum(x > q / 2 for x in dem) / nd
    f["demand_weighted_station_dist"] = math.fsum(x * t for x, t in zip(dem, to_st)) / math.fsum(dem)
    return {name: float(v) for name, v in f.items()}, eig


# -- charging oracle ---------------------------------------------------------------------


def best_station_insertion(instance, customers, max_chain=2):
    """Shortest energy-feasible route visiting ``customers`` in order.

    Exhaustive over every arc receiving a chain of up to ``max_chain``
    recharge visits (stations or the depot). Returns (length, sequence) in
    internal indices, or None if no such route exists.
    """
    P = plain(instance)
    pts = P["pts"]
    chargers = [0] + P["stations"]
    chains = [()]
    for r in range(1, max_chain + 1):
        chains += list(itertools.permutations(chargers, r))
    full = P["battery"]
    rate = P["rate"]
    seq = [0, *customers, 0]
    best = None
    # DP over arcs keeps, for each arrival battery, the shortest prefix; exact because
    # battery after a chain depends only on its last charger
    states = {(full, 0.0): [0]}  # (departure battery, length) -> prefix
    for a, b in zip(seq, seq[1:]):
        nxt = {}
        for (battery, length), prefix in states.items():
            for chain in chains:
                path = [a, *chain, b]
                bat, ok, extra = battery, True, 0.0
                for u, v in zip(path, path[1:]):
                    e = euclid(pts[u], pts[v])
                    bat -= rate * e
                    extra += e
                    if bat < -1e-9:
                        ok = False
                        break
                    if v == 0 or v in P["stations"]:
                        bat = full
                if not ok:
                    continue
                key = (round(bat, 9), round(length + extra, 9))
                if key not in nxt:
                    nxt[key] = prefix + list(path[1:])
        # prune dominated states: keep pareto front over (battery high, length low)
        front = {}
        for (bat, length), prefix in sorted(nxt.items(), key=lambda kv: (kv[0][1], -kv[0][0])):
            if all(not (fb >= bat and fl <= length) for fb, fl in front):
                front[(bat, length)] = prefix
        states = front
        if not states:
            return None
    for (_, length), prefix in states.items():
        if best is None or length < best[0]:
            best = (length, prefix)
    return best


def route_energy_ok(instance, seq):
    P = plain(instance)
    pts = P["pts"]
    full, rate = P["battery"], P["rate"]
    bat = full
    for u, v in zip(seq, seq[1:]):
        bat -= rate * euclid(pts[u], pts[v])
        if bat < -1e-9:
            return False
        if v == 0 or v in P["stations"]:
            bat = full
    return True


# -- ridge oracle -----------------------------------------------------------------------------


def ridge_normal_equations(x, y, lam):
    """Solve the bordered normal equations with an explicit inverse (intercept unpenalized)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = x.shape
    design = np.hstack([np.ones((n, 1)), x])
    penalty = lam * np.eye(d + 1)
    penalty[0, 0] = 0.0
    beta = np.linalg.inv(design.T @ design + penalty) @ (design.T @ y)
    return beta[0], beta[1:]


def ridge_stationarity(x, y, b0, b, lam):
    """Max-abs gradient of ||y - b0 - Xb||^2 + lam ||b||^2, scaled by the data."""
    x = np.asarray(x, dtype=float)
    r = np.asarray(y, dtype=float) - b0 - x @ b
    g0 = r.sum()
    g = x.T @ r - lam * b
    scale = max(1.0, float(np.abs(x).max()) * float(np.abs(y).max()) * len(y))
    return max(abs(g0), float(np.abs(g).max())) / scale


# -- trace replay ------------------------------------------------------------------------------


def replay_lahc(records, events, history_length):
    """Re-derive every acceptance decision from an independent history array.

    Returns (decisions checked, mismatches).
    """
    restarts = {it: cost for it, kind, cost in events if kind in ("initial", "restart")}
    checked = mismatches = 0
    history = None
    current = None
    for rec in records:
        if rec.iteration in restarts:
            current = restarts[rec.iteration]
            history = [current] * history_length
        if rec.iteration == 0 and history is None:
            raise ValueError("trace must start with an initial event")
        slot = rec.iteration % history_length
        expect = rec.candidate_cost <= current or rec.candidate_cost <= history[slot]
        checked += 1
        if (
            expect != rec.accepted
            or history[slot] != rec.history_value
            or current != rec.current_cost
        ):
            mismatches += 1
        if expect:
            current = rec.candidate_cost
        history[slot] = current
    return checked, mismatches
