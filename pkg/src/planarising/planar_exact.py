"""Exact field-free planar ground states via frustrated faces and T-joins.

A face is frustrated when its boundary walk carries an odd number of
strictly positive couplings; any assignment leaves an odd number of
unsatisfied edges on such a face. Unsatisfied edge sets realisable by some
assignment are exactly the T-joins of the dual graph with T the frustrated
faces, so the optimum is -W + 2 * (minimum T-join weight). The minimum
T-join reduces to shortest paths among T plus a minimum-weight perfect
matching.

Convention for zero couplings: c = 0 edges count as "prefer aligned" for
witness construction and are excluded from frustration parity (zero is not
positive). They carry zero dual weight, so shortest paths may use them
freely. This convention is pinned by brute-force oracle agreement.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Optional, Sequence

import networkx as nx
import numpy as np

from .model import (
    Faces,
    Guarantee,
    InternalCheckError,
    IsingInstance,
    ParityError,
    PlanarEmbedding,
    SolveResult,
    SpinAssignment,
    Stopwatch,
    UnsupportedInstanceError,
    dart_tail,
    extract_faces,
)

MATCHING_DP_CAP = 16


@dataclass(frozen=True)
class DualGraph:
    """One vertex per face; one edge per primal edge joining adjacent faces.

    Parallel dual edges and self-loops (bridges) are legitimate; each dual
    edge keeps its primal edge index and weight |c|.
    """

    n_faces: int
    edges: tuple[tuple[int, int, float, int], ...]  # (face_a, face_b, |c|, primal edge)

    def adjacency(self) -> list[list[tuple[int, float, int]]]:
        adj: list[list[tuple[int, float, int]]] = [[] for _ in range(self.n_faces)]
        for a, b, w, e in self.edges:
            if a == b:
                continue  # self-loops never help a minimum join
            adj[a].append((b, w, e))
            adj[b].append((a, w, e))
        return adj


@dataclass(frozen=True)
class FrustrationSet:
    faces: tuple[int, ...]


@dataclass(frozen=True)
class TJoin:
    edges: tuple[int, ...]  # primal edge indices (= dual edge indices)
    weight: float


def build_dual(instance: IsingInstance, embedding: PlanarEmbedding) -> DualGraph:
    faces = extract_faces(instance, embedding)
    dual_edges = []
    for e in range(len(instance.edges)):
        fa = faces.face_of_dart[2 * e]
        fb = faces.face_of_dart[2 * e + 1]
        dual_edges.append((fa, fb, abs(instance.edges[e][2]), e))
    return DualGraph(len(faces), tuple(dual_edges))


def frustrated_faces(
    instance: IsingInstance, embedding: PlanarEmbedding, faces: Optional[Faces] = None
) -> FrustrationSet:
    """Faces whose boundary walk has an odd count of positive couplings.

    A bridge edge appears twice on the same walk and therefore never flips
    parity. The total count must be even (each positive edge borders exactly
    two face incidences).
    """
    if faces is None:
        faces = extract_faces(instance, embedding)
    t = []
    for f, walk in enumerate(faces.walks):
        cnt = sum(1 for d in walk if instance.edges[d >> 1][2] > 0)
        if cnt % 2 == 1:
            t.append(f)
    if len(t) % 2 != 0:
        raise ParityError(f"odd number of frustrated faces: {len(t)}")
    return FrustrationSet(tuple(t))


# ---------------------------------------------------------------------------
# Matching engines
# ---------------------------------------------------------------------------


def _matching_subset_dp(dist: np.ndarray) -> tuple[list[tuple[int, int]], float]:
    """Exact O(2^k * k^2) matcher; also the oracle for the blossom engine."""
    k = dist.shape[0]
    full = (1 << k) - 1
    inf = float("inf")
    dp = np.full(1 << k, inf)
    choice = np.full(1 << k, -1, dtype=np.int64)
    dp[0] = 0.0
    for mask in range(1, 1 << k):
        if bin(mask).count("1") % 2 != 0:
            continue
        i = (mask & -mask).bit_length() - 1
        rest = mask ^ (1 << i)
        m = rest
        while m:
            j = (m & -m).bit_length() - 1
            m ^= 1 << j
            cand = dp[mask ^ (1 << i) ^ (1 << j)] + dist[i, j]
            if cand < dp[mask]:
                dp[mask] = cand
                choice[mask] = j
        if choice[mask] < 0:
            dp[mask] = inf
    pairs = []
    mask = full
    while mask:
        i = (mask & -mask).bit_length() - 1
        j = int(choice[mask])
        pairs.append((i, j))
        mask ^= (1 << i) | (1 << j)
    return pairs, float(dp[full])


def _matching_blossom(dist: np.ndarray) -> tuple[list[tuple[int, int]], float]:
    k = dist.shape[0]
    g = nx.Graph()
    g.add_nodes_from(range(k))
    for i in range(k):
        for j in range(i + 1, k):
            g.add_edge(i, j, weight=float(dist[i, j]))
    mate = nx.min_weight_matching(g)
    pairs = sorted((min(a, b), max(a, b)) for a, b in mate)
    total = float(sum(dist[a, b] for a, b in pairs))
    return pairs, total


def min_weight_perfect_matching(dist: np.ndarray) -> tuple[list[tuple[int, int]], float]:
    """Minimum-weight perfect matching on an even point set.

    Small sets use the subset DP (exact, deterministic tie-breaks); larger
    ones the blossom algorithm. ``dist`` must be symmetric and nonnegative.
    """
    dist = np.asarray(dist, dtype=np.float64)
    k = dist.shape[0]
    if k % 2 != 0:
        raise ParityError(f"perfect matching needs an even point count, got {k}")
    if k == 0:
        return [], 0.0
    if k <= MATCHING_DP_CAP:
        return _matching_subset_dp(dist)
    return _matching_blossom(dist)


# ---------------------------------------------------------------------------
# T-joins
# ---------------------------------------------------------------------------


def _dijkstra(adj, source: int, n: int):
    """Distances plus deterministic predecessor (vertex, dual-edge) pairs."""
    dist = np.full(n, np.inf)
    pred_edge = np.full(n, -1, dtype=np.int64)
    pred_vtx = np.full(n, -1, dtype=np.int64)
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = np.zeros(n, dtype=bool)
    while heap:
        dv, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for w, wt, e in adj[v]:
            nd = dv + wt
            if nd < dist[w] or (nd == dist[w] and not done[w] and (v, e) < (int(pred_vtx[w]), int(pred_edge[w]))):
                dist[w] = nd
                pred_edge[w] = e
                pred_vtx[w] = v
                heapq.heappush(heap, (nd, w))
    return dist, pred_vtx, pred_edge


def _path_edges(pred_vtx, pred_edge, source: int, target: int) -> list[int]:
    path = []
    v = target
    while v != source:
        path.append(int(pred_edge[v]))
        v = int(pred_vtx[v])
    return path


def min_weight_tjoin(dual: DualGraph, t_set: FrustrationSet, threads: int = 1) -> TJoin:
    """Minimum T-join: shortest paths among T, matching, symmetric difference."""
    t = list(t_set.faces)
    if len(t) % 2 != 0:
        raise ParityError("|T| must be even")
    if not t:
        return TJoin((), 0.0)
    adj = dual.adjacency()
    from .parallel import pmap

    runs = pmap(lambda s: _dijkstra(adj, s, dual.n_faces), t, threads)
    # group T by dual connected component (disconnected primal instances)
    comp = np.full(dual.n_faces, -1, dtype=np.int64)
    for f in range(dual.n_faces):
        if comp[f] != -1:
            continue
        comp[f] = f
        stack = [f]
        while stack:
            x = stack.pop()
            for y, _, _ in adj[x]:
                if comp[y] == -1:
                    comp[y] = f
                    stack.append(y)
    groups: dict[int, list[int]] = {}
    for idx, f in enumerate(t):
        groups.setdefault(int(comp[f]), []).append(idx)

    join: set[int] = set()
    for members in groups.values():
        if len(members) % 2 != 0:
            raise ParityError("odd frustration count within a component")
        k = len(members)
        dist = np.zeros((k, k))
        for a in range(k):
            for b in range(k):
                dist[a, b] = runs[members[a]][0][t[members[b]]]
        if not np.all(np.isfinite(dist)):
            raise InternalCheckError("frustrated faces unreachable within their component")
        pairs, _ = min_weight_perfect_matching(dist)
        for a, b in pairs:
            _, pv, pe = runs[members[a]]
            for e in _path_edges(pv, pe, t[members[a]], t[members[b]]):
                join.symmetric_difference_update((e,))
    weight = float(sum(dual.edges[e][2] for e in join))

    # parity audit: odd degree exactly at T
    deg = np.zeros(dual.n_faces, dtype=np.int64)
    for e in join:
        a, b, _, _ = dual.edges[e]
        deg[a] += 1
        deg[b] += 1
    t_mask = np.zeros(dual.n_faces, dtype=bool)
    t_mask[t] = True
    if not np.all((deg % 2 == 1) == t_mask):
        raise InternalCheckError("T-join parity condition violated")
    return TJoin(tuple(sorted(join)), weight)


# ---------------------------------------------------------------------------
# Exact solver
# ---------------------------------------------------------------------------


def _preferred_product(c: float) -> int:
    """Satisfied edges have S_u*S_v == -1 for c > 0, +1 otherwise."""
    return -1 if c > 0 else 1


def _witness_from_join(instance: IsingInstance, join: set[int]) -> SpinAssignment:
    """Propagate spins over a spanning forest so unsatisfied edges match J."""
    n = instance.n
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for e, (u, v, _) in enumerate(instance.edges):
        adj[u].append((v, e))
        adj[v].append((u, e))
    spins = np.zeros(n, dtype=np.int64)
    for root in range(n):
        if spins[root] != 0:
            continue
        spins[root] = 1
        stack = [root]
        while stack:
            u = stack.pop()
            for v, e in adj[u]:
                if spins[v] == 0:
                    c = instance.edges[e][2]
                    prod = _preferred_product(c) * (-1 if e in join else 1)
                    spins[v] = spins[u] * prod
                    stack.append(v)
    for e, (u, v, c) in enumerate(instance.edges):
        unsat = spins[u] * spins[v] == -_preferred_product(c)
        if unsat != (e in join):
            raise InternalCheckError(f"witness reconstruction inconsistent at edge {e}")
    return SpinAssignment.from_array(spins)


def planar_exact_min(
    instance: IsingInstance,
    embedding: PlanarEmbedding,
    threads: int = 1,
) -> SolveResult:
    """Exact ground state of a field-free simple planar instance."""
    if any(d != 0 for _, d in instance.fields):
        raise UnsupportedInstanceError("exact planar kernel requires all fields zero")
    if not instance.simple:
        raise UnsupportedInstanceError("exact planar kernel requires a simple graph")

    with Stopwatch() as sw:
        faces = extract_faces(instance, embedding)
        dual = build_dual(instance, embedding)
        frustration = frustrated_faces(instance, embedding, faces)
        join = min_weight_tjoin(dual, frustration, threads=threads)
        w = instance.coupling_weight
        value = -w + 2.0 * join.weight
        if instance.is_integral:
            value = int(round(value))
        assignment = _witness_from_join(instance, set(join.edges))

    from .model import energy

    recomputed = energy(instance, assignment)
    if instance.is_integral:
        if recomputed != value:
            raise InternalCheckError(f"energy identity violated: {recomputed} != {value}")
    elif abs(recomputed - value) > 1e-9 * (1 + abs(value)):
        raise InternalCheckError("energy identity violated beyond float tolerance")

    return SolveResult(
        energy=value,
        assignment=assignment,
        guarantee=Guarantee("exact"),
        diagnostics={
            "method": "planar-exact",
            "frustrated_faces": len(frustration.faces),
            "tjoin_weight": join.weight,
            "tjoin_edges": len(join.edges),
            "wall_ms": sw.ms,
        },
    )
