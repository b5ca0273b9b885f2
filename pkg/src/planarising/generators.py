"""Seeded instance generators for every solver family.

Random planar graphs are grown as stacked triangulations: starting from a
triangle, a new vertex is inserted into a uniformly chosen face and joined
to its three corners, which keeps an explicit rotation system valid at all
times. Optional edge deletions (never bridges) then thin the graph while
the embedding remains a rotation system by construction.

All randomness flows through a counter-based Philox generator keyed by the
spec seed, so identical specs reproduce instances bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lattice import LatticeInstance
from .model import (
    GeneratorSpecError,
    IsingInstance,
    PlanarEmbedding,
    extract_faces,
)
from .quantum import PauliTwoBody, QuantumIsingHamiltonian, term_norm
from .star import StarInstance


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str  # lattice | random_planar | star | quantum_planar | quantum_lattice
    size: tuple[int, ...]
    coupling: str = "int"  # int | gauss | pm1
    coupling_range: int = 5
    with_fields: bool = True
    delete_frac: float = 0.35
    a: float = 0.5
    b: float = 1.0
    seed: int = 0

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.seed))


@dataclass(frozen=True)
class Generated:
    kind: str
    instance: Optional[IsingInstance] = None
    embedding: Optional[PlanarEmbedding] = None
    lattice: Optional[LatticeInstance] = None
    quantum: Optional[QuantumIsingHamiltonian] = None
    star: Optional[StarInstance] = None

    def to_json(self) -> dict:
        from .model import instance_to_json

        if self.kind == "lattice":
            return self.lattice.to_json()
        if self.kind == "random_planar":
            return instance_to_json(self.instance, self.embedding)
        if self.kind == "star":
            return self.star.to_json()
        doc = self.quantum.to_json()
        if self.embedding is not None:
            doc["rotation"] = [list(r) for r in self.embedding.rotation]
            doc["outer_face"] = self.embedding.outer_face
        return doc


def _draw_coupling(rng: np.random.Generator, spec: GeneratorSpec) -> float:
    if spec.coupling == "int":
        return float(rng.integers(-spec.coupling_range, spec.coupling_range + 1))
    if spec.coupling == "gauss":
        return float(rng.normal())
    if spec.coupling == "pm1":
        return float(rng.choice((-1.0, 1.0)))
    raise GeneratorSpecError(f"unknown coupling distribution {spec.coupling!r}")


# ---------------------------------------------------------------------------
# Planar topology by face subdivision
# ---------------------------------------------------------------------------


class _Triangulation:
    """Stacked triangulation with explicit rotations and triangular faces."""

    def __init__(self):
        # triangle 0-1-2; edge list fixes dart ids (2e: u->v, 2e+1: v->u)
        self.edges: list[tuple[int, int]] = [(0, 1), (1, 2), (0, 2)]
        self.rotation: list[list[int]] = [[0, 4], [2, 1], [5, 3]]
        self.faces: list[list[int]] = []
        self._rebuild_faces()

    def _succ(self, d: int) -> int:
        # rotation successor of twin(d) at the head vertex of d
        u, v = self.edges[d >> 1]
        head = v if d % 2 == 0 else u
        rot = self.rotation[head]
        i = rot.index(d ^ 1)
        return rot[(i + 1) % len(rot)]

    def _rebuild_faces(self):
        seen = set()
        self.faces = []
        for d0 in range(2 * len(self.edges)):
            if d0 in seen:
                continue
            walk = []
            d = d0
            while d not in seen:
                seen.add(d)
                walk.append(d)
                d = self._succ(d)
            self.faces.append(walk)

    def n_vertices(self) -> int:
        return len(self.rotation)

    def _dart_vertices(self, d: int) -> tuple[int, int]:
        u, v = self.edges[d >> 1]
        return (u, v) if d % 2 == 0 else (v, u)

    def subdivide(self, face_idx: int):
        """Insert a vertex inside a triangular face, joined to its corners."""
        walk = self.faces[face_idx]
        assert len(walk) == 3
        w = self.n_vertices()
        self.rotation.append([])
        new_darts_at_w = []
        for d in walk:
            tail, head = self._dart_vertices(d)
            e = len(self.edges)
            self.edges.append((w, head))  # dart 2e: w->head, 2e+1: head->w
            # at the corner: insert (head -> w) right after twin(d) = (head -> tail)
            rot = self.rotation[head]
            i = rot.index(d ^ 1)
            rot.insert(i + 1, 2 * e + 1)
            new_darts_at_w.append(2 * e)
        # rotation at w: successor of (w->head(d_i)) must be (w->tail(d_i)),
        # i.e. the new darts in reverse walk order close the three faces
        d1, d2, d3 = walk
        e1, e2, e3 = new_darts_at_w  # e_i = dart w->head(d_i)
        # faces become (d1, head1->w, w->tail1), etc.; tail1 = head3
        self.rotation[w] = [e1, e3, e2]
        # face bookkeeping: replace the split face by its three children
        he = {d1: e1, d2: e2, d3: e3}
        prev = {d1: d3, d2: d1, d3: d2}
        children = []
        for d in (d1, d2, d3):
            # walk: d, then head(d)->w, then w->tail(d)
            into_w = (he[d] ^ 1)
            out_w = he[prev[d]]
            children.append([d, into_w, out_w])
        self.faces[face_idx : face_idx + 1] = children

    def verify_faces(self):
        for walk in self.faces:
            d = walk[0]
            for expect in walk[1:] + [walk[0]]:
                d = self._succ(d)
                if d != expect:
                    raise AssertionError("face bookkeeping out of sync")


def random_planar_topology(
    n: int, rng: np.random.Generator, delete_frac: float
) -> tuple[int, list[tuple[int, int]], list[list[int]]]:
    """Connected simple planar graph with rotation system, n >= 1 vertices."""
    if n <= 0:
        raise GeneratorSpecError("need at least one vertex")
    if n == 1:
        return 1, [], [[]]
    if n == 2:
        return 2, [(0, 1)], [[0], [1]]
    tri = _Triangulation()
    while tri.n_vertices() < n:
        tri.subdivide(int(rng.integers(0, len(tri.faces))))

    edges = list(tri.edges)
    rotation = [list(r) for r in tri.rotation]

    # thin out: delete random non-bridge edges, keeping connectivity
    m = len(edges)
    target_deletions = int(delete_frac * m)
    alive = [True] * m
    order = rng.permutation(m)
    deleted = 0

    def connected_without(skip: int) -> bool:
        adj = [[] for _ in range(n)]
        for e, (u, v) in enumerate(edges):
            if alive[e] and e != skip:
                adj[u].append(v)
                adj[v].append(u)
        seen = [False] * n
        stack = [0]
        seen[0] = True
        cnt = 1
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if not seen[y]:
                    seen[y] = True
                    cnt += 1
                    stack.append(y)
        return cnt == n

    for e in order:
        if deleted >= target_deletions:
            break
        if connected_without(int(e)):
            alive[int(e)] = False
            deleted += 1

    remap = {}
    new_edges = []
    for e, (u, v) in enumerate(edges):
        if alive[e]:
            remap[e] = len(new_edges)
            new_edges.append((u, v))
    new_rotation = []
    for rot in rotation:
        new_rotation.append([2 * remap[d >> 1] + (d & 1) for d in rot if alive[d >> 1]])
    return n, new_edges, new_rotation


def _planar_instance(spec: GeneratorSpec, rng: np.random.Generator) -> tuple[IsingInstance, PlanarEmbedding]:
    n = spec.size[0]
    n, edges, rotation = random_planar_topology(n, rng, spec.delete_frac)
    couplings = tuple((u, v, _draw_coupling(rng, spec)) for u, v in edges)
    fields = ()
    if spec.with_fields:
        fields = tuple(
            (u, _draw_coupling(rng, spec)) for u in range(n) if rng.random() < 0.8
        )
        fields = tuple((u, d) for u, d in fields if d != 0)
    inst = IsingInstance(n, couplings, fields)
    emb = PlanarEmbedding(tuple(tuple(r) for r in rotation), outer_face=0)
    faces = extract_faces(inst, emb)
    # designate the longest walk as the outer face (deterministic tie: lowest id)
    outer = max(range(len(faces.walks)), key=lambda i: (len(faces.walks[i]), -i)) if len(faces) else 0
    emb = PlanarEmbedding(emb.rotation, outer_face=outer)
    return inst, emb


# ---------------------------------------------------------------------------
# Quantum term helpers
# ---------------------------------------------------------------------------


def _random_two_body(rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    return scale * rng.normal(size=(3, 3))


def random_interaction_in_band(
    rng: np.random.Generator, a: float, b: float
) -> tuple[np.ndarray, np.ndarray]:
    """(h, bath_local) with the joint 4x4 norm uniformly rescaled into [a, b]."""
    h = rng.normal(size=(3, 3))
    bl = rng.normal(size=3)
    cur = term_norm_pair(h, bl)
    target = float(rng.uniform(a, b))
    f = target / cur
    return h * f, bl * f


def term_norm_pair(h: np.ndarray, bath_local: np.ndarray) -> float:
    """Norm of sum_ab h[a,b] P^a x P^b + sum_b bath_local[b] I x P^b."""
    from .quantum import AXES, PAULI

    m = np.zeros((4, 4), dtype=np.complex128)
    for i, aa in enumerate(AXES):
        for j, bb in enumerate(AXES):
            if h[i, j] != 0:
                m += h[i, j] * np.kron(PAULI[aa], PAULI[bb])
    for j, bb in enumerate(AXES):
        if bath_local[j] != 0:
            m += bath_local[j] * np.kron(PAULI["I"], PAULI[bb])
    ev = np.linalg.eigvalsh(m)
    return float(np.max(np.abs(ev)))


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def generate(spec: GeneratorSpec) -> Generated:
    rng = spec.rng()
    if spec.kind == "lattice":
        if len(spec.size) != 2 or min(spec.size) < 1:
            raise GeneratorSpecError("lattice size must be (width, height), both >= 1")
        w, h = spec.size
        lat = LatticeInstance(
            w,
            h,
            np.array([[_draw_coupling(rng, spec) for _ in range(w - 1)] for _ in range(h)]).reshape(h, max(w - 1, 0)),
            np.array([[_draw_coupling(rng, spec) for _ in range(w)] for _ in range(h - 1)]).reshape(max(h - 1, 0), w),
            np.array(
                [[_draw_coupling(rng, spec) if spec.with_fields else 0.0 for _ in range(w)] for _ in range(h)]
            ).reshape(h, w),
        )
        return Generated("lattice", lattice=lat)

    if spec.kind == "random_planar":
        inst, emb = _planar_instance(spec, rng)
        return Generated("random_planar", instance=inst, embedding=emb)

    if spec.kind == "star":
        if len(spec.size) != 1 or spec.size[0] < 1:
            raise GeneratorSpecError("star size must be (n_bath,)")
        if not (0 < spec.a <= spec.b):
            raise GeneratorSpecError("need 0 < a <= b")
        n = spec.size[0]
        central = rng.normal(size=3)
        bath = []
        for _ in range(n):
            h, bl = random_interaction_in_band(rng, spec.a, spec.b)
            bath.append((h, bl))
        return Generated("star", star=StarInstance.build(central, bath, spec.a, spec.b))

    if spec.kind in ("quantum_planar", "quantum_lattice"):
        if spec.kind == "quantum_planar":
            base, emb = _planar_instance(spec, rng)
            graph_edges = [(u, v) for u, v, _ in base.edges]
            n = base.n
        else:
            if len(spec.size) != 2:
                raise GeneratorSpecError("quantum_lattice size must be (width, height)")
            w, h = spec.size
            lat = LatticeInstance(w, h, np.zeros((h, max(w - 1, 0))), np.zeros((max(h - 1, 0), w)), np.zeros((h, w)))
            base = lat.to_instance()
            graph_edges = [(u, v) for u, v, _ in base.edges]
            n = base.n
            emb = lat.embedding()
        edges = [(u, v, _random_two_body(rng)) for u, v in graph_edges]
        locs = [(u, rng.normal(size=3)) for u in range(n) if spec.with_fields]
        ham = QuantumIsingHamiltonian.build(n, edges, locs)
        return Generated(spec.kind, quantum=ham, embedding=emb)

    raise GeneratorSpecError(f"unknown generator kind {spec.kind!r}")
