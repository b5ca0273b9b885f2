"""Core data model: Ising instances, spin assignments, planar embeddings.

Instances store pairwise couplings c_uv and local fields d_u for the energy

    H(S) = sum_{(u,v)} c_uv * S_u * S_v + sum_u d_u * S_u,   S_u in {-1, +1}.

A positive coupling prefers anti-aligned endpoints, a negative one aligned;
either way a satisfiable edge contributes -|c_uv|.

Embeddings are combinatorial rotation systems. Edge i owns two darts 2i
(directed u -> v) and 2i + 1 (v -> u); ``rotation[v]`` lists the darts with
tail v in cyclic (counterclockwise) order. Faces are orbits of the walk that
steps from a dart to the rotation successor of its twin.

Everything here is immutable after construction and numerically two-moded:
instances whose couplings and fields are all integers are handled exactly
(int64 arrays in the kernels), everything else in float64.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

INT_EXACT_CAP = 2**53  # inputs above this are not exactly representable


class PlanarIsingError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(PlanarIsingError):
    pass


class InvalidInstanceError(PlanarIsingError):
    pass


class EmbeddingError(PlanarIsingError):
    pass


class SizeError(PlanarIsingError):
    pass


class ParityError(PlanarIsingError):
    pass


class CertificateNotApplicableError(PlanarIsingError):
    pass


class UnsupportedInstanceError(PlanarIsingError):
    pass


class InternalCheckError(PlanarIsingError):
    pass


class ConvergenceError(PlanarIsingError):
    pass


class GeneratorSpecError(PlanarIsingError):
    pass


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IsingInstance:
    """A weighted interaction graph with optional local fields.

    ``edges`` holds (u, v, c_uv) triples, ``fields`` holds (u, d_u) pairs.
    ``simple`` asserts no parallel edges; multigraphs must pass
    ``simple=False`` explicitly and lose the planar-extensivity certificates.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...]
    fields: tuple[tuple[int, float], ...] = ()
    simple: bool = True

    def __post_init__(self):
        if self.n < 0:
            raise InvalidInstanceError("vertex count must be nonnegative")
        object.__setattr__(self, "edges", tuple((int(u), int(v), float(c)) for u, v, c in self.edges))
        object.__setattr__(self, "fields", tuple((int(u), float(d)) for u, d in self.fields))
        seen = set()
        for u, v, c in self.edges:
            if u == v:
                raise InvalidInstanceError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise InvalidInstanceError(f"edge ({u},{v}) out of range")
            if not math.isfinite(c):
                raise InvalidInstanceError("non-finite coupling")
            key = (min(u, v), max(u, v))
            if self.simple and key in seen:
                raise InvalidInstanceError(f"parallel edge {key} in simple instance")
            seen.add(key)
        for u, d in self.fields:
            if not (0 <= u < self.n):
                raise InvalidInstanceError(f"field vertex {u} out of range")
            if not math.isfinite(d):
                raise InvalidInstanceError("non-finite field")

    @cached_property
    def is_integral(self) -> bool:
        vals = [c for _, _, c in self.edges] + [d for _, d in self.fields]
        return all(v == round(v) and abs(v) <= INT_EXACT_CAP for v in vals)

    @cached_property
    def dtype(self) -> np.dtype:
        return np.dtype(np.int64) if self.is_integral else np.dtype(np.float64)

    @cached_property
    def coupling_weight(self) -> float:
        return float(sum(abs(c) for _, _, c in self.edges))

    @cached_property
    def field_vector(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=self.dtype)
        for u, val in self.fields:
            d[u] += val
        return d

    @cached_property
    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not self.edges:
            e = np.zeros(0, dtype=np.int64)
            return e, e.copy(), np.zeros(0, dtype=self.dtype)
        u = np.array([e[0] for e in self.edges], dtype=np.int64)
        v = np.array([e[1] for e in self.edges], dtype=np.int64)
        w = np.array([e[2] for e in self.edges], dtype=self.dtype)
        return u, v, w

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric adjacency in CSR form (indptr, neighbor, weight)."""
        deg = np.zeros(self.n + 1, dtype=np.int64)
        for u, v, _ in self.edges:
            deg[u + 1] += 1
            deg[v + 1] += 1
        indptr = np.cumsum(deg)
        nbr = np.zeros(indptr[-1], dtype=np.int64)
        wgt = np.zeros(indptr[-1], dtype=self.dtype)
        cursor = indptr[:-1].copy()
        for u, v, c in self.edges:
            nbr[cursor[u]] = v
            wgt[cursor[u]] = c
            cursor[u] += 1
            nbr[cursor[v]] = u
            wgt[cursor[v]] = c
            cursor[v] += 1
        return indptr, nbr, wgt

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v, _ in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def components(self) -> list[list[int]]:
        """Connected components as sorted vertex lists, ordered by minimum vertex."""
        indptr, nbr, _ = self.csr
        seen = np.zeros(self.n, dtype=bool)
        comps = []
        for s in range(self.n):
            if seen[s]:
                continue
            stack = [s]
            seen[s] = True
            comp = []
            while stack:
                x = stack.pop()
                comp.append(x)
                for t in range(indptr[x], indptr[x + 1]):
                    y = int(nbr[t])
                    if not seen[y]:
                        seen[y] = True
                        stack.append(y)
            comps.append(sorted(comp))
        return comps


@dataclass(frozen=True)
class SpinAssignment:
    """One spin in {-1, +1} per vertex."""

    spins: tuple[int, ...]

    def __post_init__(self):
        if any(s not in (-1, 1) for s in self.spins):
            raise InvalidInstanceError("spins must be -1 or +1")

    def __len__(self) -> int:
        return len(self.spins)

    @cached_property
    def array(self) -> np.ndarray:
        return np.array(self.spins, dtype=np.int64)

    @staticmethod
    def from_array(arr: Iterable[int]) -> "SpinAssignment":
        return SpinAssignment(tuple(int(s) for s in arr))

    @staticmethod
    def from_revkey(key: int, n: int) -> "SpinAssignment":
        """Decode the kernel encoding: bit (n-1-u) set means spin u is -1."""
        return SpinAssignment(tuple(-1 if (key >> (n - 1 - u)) & 1 else 1 for u in range(n)))

    def revkey(self) -> int:
        n = len(self.spins)
        key = 0
        for u, s in enumerate(self.spins):
            if s == -1:
                key |= 1 << (n - 1 - u)
        return key

    def flipped(self) -> "SpinAssignment":
        return SpinAssignment(tuple(-s for s in self.spins))


def energy(instance: IsingInstance, assignment: SpinAssignment) -> float:
    """Evaluate H(S); exact for integral instances."""
    if len(assignment) != instance.n:
        raise DimensionError(f"assignment length {len(assignment)} != n {instance.n}")
    s = assignment.array
    eu, ev, w = instance.edge_arrays
    quad = int(np.dot(w.astype(np.int64), s[eu] * s[ev])) if instance.is_integral else float(np.dot(w, (s[eu] * s[ev]).astype(np.float64)))
    lin_vec = instance.field_vector
    lin = int(np.dot(lin_vec, s)) if instance.is_integral else float(np.dot(lin_vec, s.astype(np.float64)))
    return (quad + lin) if instance.is_integral else float(quad + lin)


def quadratic_energy(instance: IsingInstance, assignment: SpinAssignment) -> float:
    """The coupling part of H(S) only."""
    s = assignment.array
    eu, ev, w = instance.edge_arrays
    if instance.is_integral:
        return int(np.dot(w.astype(np.int64), s[eu] * s[ev]))
    return float(np.dot(w, (s[eu] * s[ev]).astype(np.float64)))


def coupling_weight(instance: IsingInstance) -> float:
    """W = sum of |c_uv| over edges."""
    return instance.coupling_weight


# ---------------------------------------------------------------------------
# Embeddings and faces
# ---------------------------------------------------------------------------


def dart_tail(dart: int, edges: Sequence[tuple[int, int, float]]) -> int:
    u, v, _ = edges[dart >> 1]
    return u if dart & 1 == 0 else v


def dart_head(dart: int, edges: Sequence[tuple[int, int, float]]) -> int:
    u, v, _ = edges[dart >> 1]
    return v if dart & 1 == 0 else u


@dataclass(frozen=True)
class PlanarEmbedding:
    """Rotation system: per vertex, the cyclic order of outgoing darts.

    ``outer_face`` indexes into the deterministic face enumeration produced
    by :func:`extract_faces` (faces discovered in ascending order of their
    smallest dart).
    """

    rotation: tuple[tuple[int, ...], ...]
    outer_face: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rotation", tuple(tuple(int(d) for d in r) for r in self.rotation))


@dataclass(frozen=True)
class Faces:
    """Faces of an embedded instance: each face is a closed walk of darts."""

    walks: tuple[tuple[int, ...], ...]
    face_of_dart: tuple[int, ...]
    outer: int

    def __len__(self) -> int:
        return len(self.walks)

    def boundary_edges(self, face: int) -> list[int]:
        """Edge indices on the boundary walk, with multiplicity."""
        return [d >> 1 for d in self.walks[face]]


def _check_rotation(instance: IsingInstance, embedding: PlanarEmbedding) -> None:
    m = len(instance.edges)
    if len(embedding.rotation) != instance.n:
        raise EmbeddingError("rotation length != vertex count")
    seen = [False] * (2 * m)
    for v, rot in enumerate(embedding.rotation):
        for d in rot:
            if not (0 <= d < 2 * m):
                raise EmbeddingError(f"dart {d} out of range")
            if dart_tail(d, instance.edges) != v:
                raise EmbeddingError(f"dart {d} listed at vertex {v}, tail is {dart_tail(d, instance.edges)}")
            if seen[d]:
                raise EmbeddingError(f"dart {d} listed twice")
            seen[d] = True
    if not all(seen):
        raise EmbeddingError("some darts missing from rotation")


def extract_faces(instance: IsingInstance, embedding: PlanarEmbedding) -> Faces:
    """Traverse all faces and verify Euler's formula per connected component.

    The successor of dart d in its face walk is the rotation successor of
    twin(d) at the head vertex of d. Components with no edges count one face
    by convention (an isolated vertex sits in a single region).
    """
    _check_rotation(instance, embedding)
    edges = instance.edges
    m = len(edges)
    # next_in_face(d) = rotation successor of twin(d) at the head vertex of d
    rot_pos: dict[int, tuple[int, int]] = {}
    for v, rot in enumerate(embedding.rotation):
        for i, d in enumerate(rot):
            rot_pos[d] = (v, i)
    nxt = [0] * (2 * m)
    for d in range(2 * m):
        v, i = rot_pos[d ^ 1]
        rot = embedding.rotation[v]
        nxt[d] = rot[(i + 1) % len(rot)]

    face_of = [-1] * (2 * m)
    walks: list[tuple[int, ...]] = []
    for d0 in range(2 * m):
        if face_of[d0] != -1:
            continue
        walk = []
        d = d0
        while True:
            if face_of[d] != -1:
                raise EmbeddingError("face traversal is not a permutation orbit")
            face_of[d] = len(walks)
            walk.append(d)
            d = nxt[d]
            if d == d0:
                break
        walks.append(tuple(walk))

    # Euler per connected component: V - E + F == 2 (F=1 for edgeless comps)
    comps = instance.components()
    comp_of = np.zeros(instance.n, dtype=np.int64)
    for ci, comp in enumerate(comps):
        for v in comp:
            comp_of[v] = ci
    e_count = [0] * len(comps)
    f_count = [0] * len(comps)
    for u, v, _ in edges:
        e_count[comp_of[u]] += 1
    for w in walks:
        f_count[comp_of[dart_tail(w[0], edges)]] += 1
    for ci, comp in enumerate(comps):
        fc = f_count[ci] if e_count[ci] > 0 else 1
        if len(comp) - e_count[ci] + fc != 2:
            raise EmbeddingError(
                f"Euler check failed on component {ci}: V={len(comp)} E={e_count[ci]} F={fc}"
            )

    outer = embedding.outer_face
    if walks and not (0 <= outer < len(walks)):
        raise EmbeddingError(f"outer face index {outer} out of range ({len(walks)} faces)")
    return Faces(tuple(walks), tuple(face_of), outer)


def rotation_from_coordinates(
    instance: IsingInstance, pos: Sequence[tuple[float, float]]
) -> PlanarEmbedding:
    """Rotation system of a straight-line drawing: darts sorted by angle.

    The outer face is identified by signed area (the unbounded walk is the
    one traced with opposite orientation). Only valid when the drawing has
    no crossing edges; the Euler check in :func:`extract_faces` will catch
    violations.
    """
    m = len(instance.edges)
    rot: list[list[int]] = [[] for _ in range(instance.n)]
    for e, (u, v, _) in enumerate(instance.edges):
        rot[u].append(2 * e)
        rot[v].append(2 * e + 1)
    for v in range(instance.n):
        def angle(d: int) -> float:
            h = dart_head(d, instance.edges)
            return math.atan2(pos[h][1] - pos[v][1], pos[h][0] - pos[v][0])
        rot[v].sort(key=angle)
    emb = PlanarEmbedding(tuple(tuple(r) for r in rot), outer_face=0)
    faces = extract_faces(instance, emb)
    outer = _outer_by_area(instance, faces, pos)
    return PlanarEmbedding(emb.rotation, outer_face=outer)


def _outer_by_area(instance: IsingInstance, faces: Faces, pos) -> int:
    best, outer = None, 0
    for i, walk in enumerate(faces.walks):
        area = 0.0
        for d in walk:
            t, h = dart_tail(d, instance.edges), dart_head(d, instance.edges)
            area += pos[t][0] * pos[h][1] - pos[h][0] * pos[t][1]
        if best is None or area < best:
            best, outer = area, i
    return outer


# ---------------------------------------------------------------------------
# Validation diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    simple: bool
    connected: bool
    n_components: int
    max_degree: int
    integral: bool
    embedding_consistent: Optional[bool]
    n_faces: Optional[int]
    theorem1_applicable: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def validate(instance: IsingInstance, embedding: Optional[PlanarEmbedding] = None) -> ValidationReport:
    """Diagnostics only; never raises for bad instances."""
    seen = set()
    simple = True
    for u, v, _ in instance.edges:
        key = (min(u, v), max(u, v))
        if key in seen:
            simple = False
        seen.add(key)
    comps = instance.components()
    emb_ok: Optional[bool] = None
    n_faces: Optional[int] = None
    if embedding is not None:
        try:
            faces = extract_faces(instance, embedding)
            emb_ok = True
            n_faces = len(faces)
        except PlanarIsingError:
            emb_ok = False
    return ValidationReport(
        simple=simple,
        connected=len(comps) <= 1,
        n_components=len(comps),
        max_degree=int(instance.degrees.max()) if instance.n else 0,
        integral=instance.is_integral,
        embedding_consistent=emb_ok,
        n_faces=n_faces,
        theorem1_applicable=simple and (emb_ok is not False),
    )


# ---------------------------------------------------------------------------
# Solve results
# ---------------------------------------------------------------------------


ENERGY_RTOL = 1e-9


@dataclass(frozen=True)
class Guarantee:
    kind: str  # 'exact' | 'relative_error' | 'absolute_error'
    value: Optional[float] = None

    def as_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class SolveResult:
    energy: float
    assignment: Optional[SpinAssignment]
    guarantee: Guarantee
    diagnostics: dict = field(default_factory=dict)
    state: Optional[dict] = None  # quantum witness description, when applicable

    def verify_energy(self, instance: IsingInstance) -> bool:
        if self.assignment is None:
            return True
        recomputed = energy(instance, self.assignment)
        return abs(self.energy - recomputed) <= ENERGY_RTOL * (1.0 + abs(self.energy))

    def as_dict(self) -> dict:
        out = {
            "energy": self.energy,
            "guarantee": self.guarantee.as_dict(),
            "diagnostics": self.diagnostics,
        }
        if self.assignment is not None:
            out["assignment"] = list(self.assignment.spins)
        if self.state is not None:
            out["state"] = self.state
        return out


# ---------------------------------------------------------------------------
# JSON instance format (shared by all modules and the CLI)
# ---------------------------------------------------------------------------


def instance_to_json(instance: IsingInstance, embedding: Optional[PlanarEmbedding] = None) -> dict:
    doc = {
        "n": instance.n,
        "edges": [[u, v, c] for u, v, c in instance.edges],
        "fields": [[u, d] for u, d in instance.fields],
        "simple": instance.simple,
    }
    if embedding is not None:
        doc["rotation"] = [list(r) for r in embedding.rotation]
        doc["outer_face"] = embedding.outer_face
    return doc


def instance_from_json(doc: dict) -> tuple[IsingInstance, Optional[PlanarEmbedding]]:
    try:
        inst = IsingInstance(
            n=int(doc["n"]),
            edges=tuple((e[0], e[1], e[2]) for e in doc.get("edges", [])),
            fields=tuple((f[0], f[1]) for f in doc.get("fields", [])),
            simple=bool(doc.get("simple", True)),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise InvalidInstanceError(f"malformed instance document: {exc}") from exc
    emb = None
    if "rotation" in doc:
        emb = PlanarEmbedding(
            tuple(tuple(r) for r in doc["rotation"]),
            outer_face=int(doc.get("outer_face", 0)),
        )
    return inst, emb


def load_instance(path: str) -> tuple[IsingInstance, Optional[PlanarEmbedding]]:
    with open(path) as fh:
        return instance_from_json(json.load(fh))


def save_instance(path: str, instance: IsingInstance, embedding: Optional[PlanarEmbedding] = None) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_json(instance, embedding), fh)


class Stopwatch:
    """Wall-clock helper for diagnostics."""

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.ms = (time.perf_counter() - self.t0) * 1000.0
        return False
