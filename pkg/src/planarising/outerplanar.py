"""General-planar PTAS: layer peeling, edge-class removal, treewidth DP.

Peeling layers are computed by breadth-first search on the vertex-face
incidence structure rooted at the outer face: removing the vertices on the
current boundary merges every face that touched them into the outer region,
so a vertex's layer is one plus the incidence distance of its nearest face
to the outer face. Removing every t-th cross-layer edge class leaves
components that are t-outerplanar, hence of bounded treewidth, where an
exact dynamic program over a (machine-verified) tree decomposition finishes
the job.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import (
    Guarantee,
    InternalCheckError,
    IsingInstance,
    PlanarEmbedding,
    SizeError,
    SolveResult,
    SpinAssignment,
    Stopwatch,
    UnsupportedInstanceError,
    dart_tail,
    energy,
    extract_faces,
)
from .parallel import pmap

TD_FALLBACK_CAP = 22
TD_WIDTH_SLACK = 2


# ---------------------------------------------------------------------------
# Layer peeling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LayerPartition:
    """Vertex levels 1..h plus the cross-level edge classes.

    ``cross_edges[i]`` holds the edge indices joining level i+1 to level
    i+2 (0-based list for levels V_1 -> V_2 etc.); ``intra_edges`` the
    edges within a level.
    """

    level_of: tuple[int, ...]
    levels: tuple[tuple[int, ...], ...]
    cross_edges: tuple[tuple[int, ...], ...]
    intra_edges: tuple[int, ...]

    @property
    def depth(self) -> int:
        return len(self.levels)


def peel_layers(instance: IsingInstance, embedding: PlanarEmbedding) -> LayerPartition:
    """Outerplanarity levels via incidence BFS from the outer face.

    Disconnected instances are peeled per component, each rooted at its own
    longest face walk (the designated outer face for the component that
    contains it).
    """
    faces = extract_faces(instance, embedding)
    n = instance.n
    m = len(instance.edges)

    vert_faces: list[list[int]] = [[] for _ in range(n)]
    face_verts: list[set[int]] = [set() for _ in range(len(faces.walks))]
    for f, walk in enumerate(faces.walks):
        for d in walk:
            face_verts[f].add(dart_tail(d, instance.edges))
    for f, vs in enumerate(face_verts):
        for v in vs:
            vert_faces[v].append(f)

    comps = instance.components()
    comp_of = {}
    for ci, comp in enumerate(comps):
        for v in comp:
            comp_of[v] = ci

    # pick a root face per component: the global outer face where it lives,
    # the longest walk elsewhere (ties toward the lowest face id)
    root_faces: dict[int, int] = {}
    outer_comp = -1
    if len(faces.walks):
        outer_comp = comp_of[dart_tail(faces.walks[faces.outer][0], instance.edges)]
        root_faces[outer_comp] = faces.outer
    for f, walk in enumerate(faces.walks):
        ci = comp_of[dart_tail(walk[0], instance.edges)]
        if ci == outer_comp:
            continue
        cur = root_faces.get(ci)
        if cur is None or len(walk) > len(faces.walks[cur]):
            root_faces[ci] = f
    for ci in range(len(comps)):
        root_faces.setdefault(ci, -1)  # edgeless component: all vertices level 1

    level = np.zeros(n, dtype=np.int64)
    fdist = np.full(len(faces.walks), -1, dtype=np.int64)
    queue: deque[tuple[str, int]] = deque()
    for ci in sorted(root_faces):
        f = root_faces[ci]
        if f >= 0 and fdist[f] == -1:
            fdist[f] = 0
            queue.append(("f", f))
    while queue:
        kind, x = queue.popleft()
        if kind == "f":
            for v in sorted(face_verts[x]):
                if level[v] == 0:
                    level[v] = fdist[x] + 1
                    queue.append(("v", v))
        else:
            for f in vert_faces[x]:
                if fdist[f] == -1:
                    fdist[f] = level[x]
                    queue.append(("f", f))
    for ci, comp in enumerate(comps):
        for v in comp:
            if level[v] == 0:
                level[v] = 1  # edgeless components sit on their outer region

    h = int(level.max()) if n else 0
    levels = tuple(tuple(int(v) for v in range(n) if level[v] == k) for k in range(1, h + 1))
    cross: list[list[int]] = [[] for _ in range(max(h - 1, 0))]
    intra: list[int] = []
    for e, (u, v, _) in enumerate(instance.edges):
        lu, lv = int(level[u]), int(level[v])
        if abs(lu - lv) > 1:
            raise InternalCheckError(f"edge {e} skips a level: {lu} vs {lv}")
        if lu == lv:
            intra.append(e)
        else:
            cross[min(lu, lv) - 1].append(e)
    return LayerPartition(
        tuple(int(x) for x in level),
        levels,
        tuple(tuple(c) for c in cross),
        tuple(intra),
    )


def remove_edge_class(
    partition: LayerPartition, instance: IsingInstance, t: int, j: int
) -> tuple[IsingInstance, float, tuple[int, ...]]:
    """Drop cross-level classes E_i with i = j (mod t); components become
    t-outerplanar. Returns (sub-instance, removed |c| weight, removed ids).
    """
    if t < 1 or not (0 <= j < t):
        raise SizeError("need t >= 1 and 0 <= j < t")
    removed: list[int] = []
    for i, cls in enumerate(partition.cross_edges, start=1):
        if i % t == j % t:
            removed.extend(cls)
    removed_set = set(removed)
    kept = tuple(
        (u, v, c) for e, (u, v, c) in enumerate(instance.edges) if e not in removed_set
    )
    sub = IsingInstance(instance.n, kept, instance.fields, simple=instance.simple)
    weight = float(sum(abs(instance.edges[e][2]) for e in removed))
    return sub, weight, tuple(sorted(removed))


# ---------------------------------------------------------------------------
# Tree decompositions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TreeDecomposition:
    bags: tuple[tuple[int, ...], ...]  # sorted vertex tuples
    parent: tuple[int, ...]  # parent index per bag; root has -1

    @property
    def width(self) -> int:
        return max((len(b) for b in self.bags), default=1) - 1

    def children(self) -> list[list[int]]:
        ch: list[list[int]] = [[] for _ in self.bags]
        for i, p in enumerate(self.parent):
            if p >= 0:
                ch[p].append(i)
        return ch

    def preorder(self) -> list[int]:
        ch = self.children()
        roots = [i for i, p in enumerate(self.parent) if p < 0]
        order = []
        stack = list(reversed(roots))
        while stack:
            x = stack.pop()
            order.append(x)
            stack.extend(reversed(ch[x]))
        return order


def verify_tree_decomposition(n: int, edges: Sequence[tuple[int, int]], td: TreeDecomposition) -> None:
    """Machine-check the three decomposition rules; raise on any violation."""
    covered = set()
    for b in td.bags:
        covered.update(b)
    if covered != set(range(n)) and not covered.issuperset(range(n)):
        missing = set(range(n)) - covered
        raise InternalCheckError(f"vertices missing from all bags: {sorted(missing)[:5]}")
    bagsets = [set(b) for b in td.bags]
    for u, v in edges:
        if not any(u in bs and v in bs for bs in bagsets):
            raise InternalCheckError(f"edge ({u},{v}) not covered by any bag")
    # connectivity of the bag set of each vertex
    ch = td.children()
    for v in range(n):
        holders = [i for i, bs in enumerate(bagsets) if v in bs]
        if not holders:
            raise InternalCheckError(f"vertex {v} in no bag")
        holder_set = set(holders)
        seen = {holders[0]}
        stack = [holders[0]]
        while stack:
            x = stack.pop()
            for y in ch[x] + ([td.parent[x]] if td.parent[x] >= 0 else []):
                if y in holder_set and y not in seen:
                    seen.add(y)
                    stack.append(y)
        if seen != holder_set:
            raise InternalCheckError(f"bags containing vertex {v} are not connected")


def build_tree_decomposition(
    n: int,
    edges: Sequence[tuple[int, int]],
    width_cap: Optional[int] = None,
) -> Optional[TreeDecomposition]:
    """Greedy min-fill elimination; ties by degree then vertex id.

    Returns None when the achieved width exceeds ``width_cap`` (callers may
    fall back to brute force). Every returned decomposition has been
    machine-verified against the three validity rules.
    """
    adj: list[set[int]] = [set() for _ in range(n)]
    for u, v in edges:
        if u != v:
            adj[u].add(v)
            adj[v].add(u)

    work = [set(s) for s in adj]
    alive = set(range(n))
    order: list[int] = []
    elim_bags: list[tuple[int, ...]] = []

    def fill_count(v: int) -> int:
        nb = list(work[v])
        cnt = 0
        for i in range(len(nb)):
            for j in range(i + 1, len(nb)):
                if nb[j] not in work[nb[i]]:
                    cnt += 1
        return cnt

    while alive:
        v = min(alive, key=lambda x: (fill_count(x), len(work[x]), x))
        nb = sorted(work[v])
        elim_bags.append(tuple(sorted([v] + nb)))
        order.append(v)
        for i in range(len(nb)):
            for j in range(i + 1, len(nb)):
                work[nb[i]].add(nb[j])
                work[nb[j]].add(nb[i])
        for w in nb:
            work[w].discard(v)
        work[v] = set()
        alive.discard(v)

    pos = {v: i for i, v in enumerate(order)}
    parent = [-1] * len(elim_bags)
    for i, bag in enumerate(elim_bags):
        v = order[i]
        later = [w for w in bag if w != v and pos[w] > i]
        if later:
            parent[i] = pos[min(later, key=lambda w: pos[w])]
        elif i + 1 < len(elim_bags):
            parent[i] = i + 1  # keep a single tree across components
    td = TreeDecomposition(tuple(elim_bags), tuple(parent))
    if width_cap is not None and td.width > width_cap:
        return None
    verify_tree_decomposition(n, [(u, v) for u, v in edges], td)
    return td


# ---------------------------------------------------------------------------
# Dynamic programming over a tree decomposition
# ---------------------------------------------------------------------------


def _assign_terms(instance: IsingInstance, td: TreeDecomposition):
    """Every term to exactly one bag: the first preorder bag covering it."""
    pre = td.preorder()
    bagsets = [set(b) for b in td.bags]
    edge_terms: list[list[tuple[int, int, float]]] = [[] for _ in td.bags]
    field_terms: list[list[tuple[int, float]]] = [[] for _ in td.bags]
    for u, v, c in instance.edges:
        for t in pre:
            if u in bagsets[t] and v in bagsets[t]:
                edge_terms[t].append((u, v, c))
                break
        else:
            raise InternalCheckError(f"edge ({u},{v}) not coverable: invalid decomposition")
    for u, d in instance.fields:
        for t in pre:
            if u in bagsets[t]:
                field_terms[t].append((u, d))
                break
        else:
            raise InternalCheckError(f"field at {u} not coverable: invalid decomposition")
    return edge_terms, field_terms


def _bag_tables(bag: tuple[int, ...], edge_terms, field_terms) -> np.ndarray:
    """Local energies over all 2^|bag| assignments (bit i = bag[i] spin -1)."""
    k = len(bag)
    idx = {v: i for i, v in enumerate(bag)}
    masks = np.arange(1 << k, dtype=np.int64)
    spins = 1 - 2 * ((masks[:, None] >> np.arange(k)[None, :]) & 1).astype(np.float64)
    out = np.zeros(1 << k)
    for u, v, c in edge_terms:
        out += c * spins[:, idx[u]] * spins[:, idx[v]]
    for u, d in field_terms:
        out += d * spins[:, idx[u]]
    return out


def td_dp_min(instance: IsingInstance, td: TreeDecomposition) -> tuple[float, SpinAssignment]:
    """Exact optimum by leaf-to-root DP over bag assignments.

    Child tables are projected onto the parent intersection by minimisation;
    the witness is rebuilt root-to-leaf from stored argmins.
    """
    verify_tree_decomposition(instance.n, [(u, v) for u, v, _ in instance.edges], td)
    edge_terms, field_terms = _assign_terms(instance, td)
    pre = td.preorder()
    ch = td.children()

    tables: dict[int, np.ndarray] = {}
    # proj_arg[(parent, child)] maps a shared-assignment index to child argmin
    proj_arg: dict[tuple[int, int], np.ndarray] = {}
    shared_kappa: dict[tuple[int, int], np.ndarray] = {}

    for t in reversed(pre):
        bag = td.bags[t]
        table = _bag_tables(bag, edge_terms[t], field_terms[t])
        for s in ch[t]:
            cbag = td.bags[s]
            shared = [v for v in cbag if v in set(bag)]
            cpos = {v: i for i, v in enumerate(cbag)}
            ppos = {v: i for i, v in enumerate(bag)}
            cmask = np.arange(1 << len(cbag), dtype=np.int64)
            kappa_c = np.zeros_like(cmask)
            for si, v in enumerate(shared):
                kappa_c |= (((cmask >> cpos[v]) & 1) << si)
            proj = np.full(1 << len(shared), np.inf)
            arg = np.zeros(1 << len(shared), dtype=np.int64)
            ctab = tables.pop(s)
            order = np.argsort(kappa_c, kind="stable")
            ks = kappa_c[order]
            vals = ctab[order]
            # first (smallest child mask) minimiser per kappa for determinism
            for pos_i in range(len(order)):
                kk = ks[pos_i]
                if vals[pos_i] < proj[kk]:
                    proj[kk] = vals[pos_i]
                    arg[kk] = order[pos_i]
            pmask = np.arange(1 << len(bag), dtype=np.int64)
            kappa_p = np.zeros_like(pmask)
            for si, v in enumerate(shared):
                kappa_p |= (((pmask >> ppos[v]) & 1) << si)
            table = table + proj[kappa_p]
            proj_arg[(t, s)] = arg
            shared_kappa[(t, s)] = kappa_p
        tables[t] = table

    roots = [i for i, p in enumerate(td.parent) if p < 0]
    total = 0.0
    chosen: dict[int, int] = {}
    for root in roots:
        table = tables[root]
        best = int(np.argmin(table))
        total += float(table[best])
        chosen[root] = best
    # walk down, decoding child argmins
    stack = list(roots)
    while stack:
        t = stack.pop()
        for s in ch[t]:
            kp = int(shared_kappa[(t, s)][chosen[t]])
            chosen[s] = int(proj_arg[(t, s)][kp])
            stack.append(s)

    spins = np.zeros(instance.n, dtype=np.int64)
    for t in pre:
        bag = td.bags[t]
        mask = chosen[t]
        for i, v in enumerate(bag):
            val = -1 if (mask >> i) & 1 else 1
            if spins[v] == 0:
                spins[v] = val
            elif spins[v] != val:
                raise InternalCheckError("inconsistent spin decoding across bags")
    spins[spins == 0] = 1
    assignment = SpinAssignment.from_array(spins)
    val = energy(instance, assignment)
    if abs(val - total) > 1e-6 * (1 + abs(total)):
        raise InternalCheckError(f"TD DP energy mismatch: {val} vs {total}")
    return val, assignment


# ---------------------------------------------------------------------------
# PTAS driver
# ---------------------------------------------------------------------------


def _solve_component(
    instance: IsingInstance,
    comp: list[int],
    width_cap: int,
    fallback_cap: int,
) -> tuple[list[int], np.ndarray]:
    sub_idx = {v: i for i, v in enumerate(comp)}
    sub_edges = tuple(
        (sub_idx[u], sub_idx[v], c)
        for u, v, c in instance.edges
        if u in sub_idx and v in sub_idx
    )
    sub_fields = tuple((sub_idx[u], d) for u, d in instance.fields if u in sub_idx)
    sub = IsingInstance(len(comp), sub_edges, sub_fields, simple=instance.simple)
    td = build_tree_decomposition(sub.n, [(u, v) for u, v, _ in sub_edges], width_cap)
    if td is not None:
        _, assign = td_dp_min(sub, td)
        return comp, assign.array
    if sub.n <= fallback_cap:
        from .oracle import brute_force_min

        _, assign = brute_force_min(sub)
        return comp, assign.array
    raise SizeError(
        f"component of {sub.n} vertices exceeded width cap {width_cap} and brute-force cap"
    )


def planar_ptas_min(
    instance: IsingInstance,
    embedding: PlanarEmbedding,
    eps: float,
    width_cap: Optional[int] = None,
    fallback_cap: int = TD_FALLBACK_CAP,
    threads: int = 1,
) -> SolveResult:
    """Planar PTAS: peel, drop the cheapest residue class, solve the rest.

    All t residue classes are tried; every stitched candidate is evaluated
    on the full Hamiltonian, so the returned energy is an upper bound
    attained by a concrete assignment and exceeds the optimum by at most
    2*eps*W.
    """
    if not instance.simple:
        raise UnsupportedInstanceError("the planar PTAS requires a simple instance")
    if not (0 < eps <= 1):
        raise SizeError("epsilon must be in (0, 1]")
    t = max(1, math.ceil(1.0 / eps - 1e-12))
    cap = width_cap if width_cap is not None else 3 * t - 1 + TD_WIDTH_SLACK

    with Stopwatch() as sw:
        partition = peel_layers(instance, embedding)

        def run(j: int):
            sub, removed_w, removed = remove_edge_class(partition, instance, t, j)
            grid = np.zeros(instance.n, dtype=np.int64)
            for comp in sub.components():
                comp_list, arr = _solve_component(sub, comp, cap, fallback_cap)
                grid[comp_list] = arr
            assignment = SpinAssignment.from_array(grid)
            return energy(instance, assignment), assignment, removed_w, len(removed)

        results = pmap(run, range(t), threads)

    best = min(range(t), key=lambda j: results[j][0])
    e, assignment, removed_w, removed_n = results[best]
    return SolveResult(
        energy=e,
        assignment=assignment,
        guarantee=Guarantee("relative_error", min(6 * eps, 1.0)),
        diagnostics={
            "method": "planar-ptas",
            "classes": t,
            "chosen_class": best,
            "levels": partition.depth,
            "removed_weight": removed_w,
            "removed_edges": removed_n,
            "absolute_error_bound": 2 * eps * instance.coupling_weight,
            "wall_ms": sw.ms,
        },
    )
