"""Two-local qubit Hamiltonians: exact diagonalisation and extensivity bounds.

Terms are stored as real Pauli coefficients: a 3x3 matrix h[a][b] per edge
(a, b ranging over X, Y, Z) and a 3-vector per vertex. Identity components
supplied inside an edge term are folded into the endpoint 1-local terms at
ingestion so that edge norms and W = sum ||Q_uv|| are unambiguous; a
residual identity*identity component violates tracelessness and is
rejected.

Ground energies come from dense Hermitian diagonalisation for small systems
and from a matrix-free Lanczos solve (only H|psi> required) beyond.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse.linalg as spla

from .model import (
    ConvergenceError,
    InvalidInstanceError,
    SizeError,
    UnsupportedInstanceError,
)

PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}
AXES = ("X", "Y", "Z")

DENSE_QUBIT_CAP = 13
ITER_QUBIT_CAP = 20
EIG_TOL = 1e-9
EIG_MAXITER = 10_000


@dataclass(frozen=True)
class PauliTwoBody:
    """Purely 2-local interaction: coefficients over {X,Y,Z} x {X,Y,Z}."""

    h: np.ndarray  # 3x3 real

    def __post_init__(self):
        a = np.asarray(self.h, dtype=np.float64).reshape(3, 3)
        a.flags.writeable = False
        object.__setattr__(self, "h", a)

    @staticmethod
    def from_full(coeffs: np.ndarray) -> tuple["PauliTwoBody", np.ndarray, np.ndarray]:
        """Split a 4x4 coefficient matrix over {I,X,Y,Z}^2 into 2-local + 1-local parts.

        Returns (two_body, left_local, right_local). coeffs[0,0] must vanish.
        """
        c = np.asarray(coeffs, dtype=np.float64).reshape(4, 4)
        if abs(c[0, 0]) > 1e-12:
            raise InvalidInstanceError("identity*identity component breaks tracelessness")
        return PauliTwoBody(c[1:, 1:]), c[1:, 0].copy(), c[0, 1:].copy()

    @cached_property
    def matrix(self) -> np.ndarray:
        m = np.zeros((4, 4), dtype=np.complex128)
        for i, a in enumerate(AXES):
            for j, b in enumerate(AXES):
                if self.h[i, j] != 0:
                    m += self.h[i, j] * np.kron(PAULI[a], PAULI[b])
        return m

    @cached_property
    def norm(self) -> float:
        return term_norm(self)

    def is_zero(self) -> bool:
        return bool(np.all(self.h == 0))


def local_matrix(l: np.ndarray) -> np.ndarray:
    l = np.asarray(l, dtype=np.float64).reshape(3)
    return l[0] * PAULI["X"] + l[1] * PAULI["Y"] + l[2] * PAULI["Z"]


def term_norm(term) -> float:
    """Spectral norm via Hermitian eigendecomposition (4x4 or 2x2)."""
    if isinstance(term, PauliTwoBody):
        m = term.matrix
    else:
        m = local_matrix(term)
    if not np.any(m):
        return 0.0
    ev = np.linalg.eigvalsh(m)
    return float(np.max(np.abs(ev)))


def dominating_coupling(term: PauliTwoBody) -> tuple[str, str, float]:
    """Largest-magnitude coefficient; ties break lexicographically on (a, b).

    The returned magnitude is guaranteed to be at least ||term||/9 (there
    are only nine coefficients, so the largest carries a ninth of the
    triangle-inequality budget).
    """
    if term.is_zero():
        raise UnsupportedInstanceError("dominating coupling undefined for the zero term")
    best = None
    for i, a in enumerate(AXES):
        for j, b in enumerate(AXES):
            c = float(term.h[i, j])
            if best is None or abs(c) > abs(best[2]):
                best = (a, b, c)
    assert abs(best[2]) >= term.norm / 9.0 - 1e-12
    return best


@dataclass(frozen=True)
class QuantumIsingHamiltonian:
    """Interaction graph with a PauliTwoBody per edge and a 3-vector per vertex."""

    n: int
    edges: tuple[tuple[int, int, PauliTwoBody], ...]
    locals_: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.locals_) != self.n:
            raise InvalidInstanceError("need one local coefficient vector per vertex")
        object.__setattr__(
            self,
            "locals_",
            tuple(np.asarray(l, dtype=np.float64).reshape(3) for l in self.locals_),
        )
        for u, v, t in self.edges:
            if u == v or not (0 <= u < self.n and 0 <= v < self.n):
                raise InvalidInstanceError(f"bad edge ({u},{v})")
            if not isinstance(t, PauliTwoBody):
                raise InvalidInstanceError("edge terms must be PauliTwoBody")

    @staticmethod
    def build(
        n: int,
        edges: Iterable[tuple[int, int, np.ndarray]],
        locals_: Optional[Iterable[tuple[int, np.ndarray]]] = None,
        full_edge_coeffs: bool = False,
    ) -> "QuantumIsingHamiltonian":
        """Assemble from raw coefficients, folding any 1-local edge parts."""
        loc = [np.zeros(3) for _ in range(n)]
        for u, l in locals_ or ():
            loc[u] = loc[u] + np.asarray(l, dtype=np.float64).reshape(3)
        out_edges = []
        for u, v, coeffs in edges:
            if full_edge_coeffs:
                two, lu, lv = PauliTwoBody.from_full(coeffs)
                loc[u] = loc[u] + lu
                loc[v] = loc[v] + lv
            else:
                two = PauliTwoBody(coeffs)
            out_edges.append((u, v, two))
        return QuantumIsingHamiltonian(n, tuple(out_edges), tuple(loc))

    @cached_property
    def interaction_weight(self) -> float:
        """W = sum of edge-term spectral norms."""
        return float(sum(t.norm for _, _, t in self.edges))

    @cached_property
    def local_norms(self) -> np.ndarray:
        return np.array([term_norm(l) for l in self.locals_])

    def graph_edges(self) -> list[tuple[int, int, float]]:
        return [(u, v, t.norm) for u, v, t in self.edges]

    def subhamiltonian(self, keep_edges: Sequence[int]) -> "QuantumIsingHamiltonian":
        keep = sorted(keep_edges)
        return QuantumIsingHamiltonian(
            self.n, tuple(self.edges[e] for e in keep), self.locals_
        )

    def restricted(self, vertices: Sequence[int]) -> "QuantumIsingHamiltonian":
        """Induced sub-Hamiltonian on ``vertices`` (relabelled 0..k-1)."""
        vset = {v: i for i, v in enumerate(vertices)}
        edges = tuple(
            (vset[u], vset[v], t) for u, v, t in self.edges if u in vset and v in vset
        )
        return QuantumIsingHamiltonian(
            len(vertices), edges, tuple(self.locals_[v] for v in vertices)
        )

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "edges": [[u, v, {"h": t.h.tolist()}] for u, v, t in self.edges],
            "locals": [[u, list(map(float, l))] for u, l in enumerate(self.locals_) if np.any(l)],
        }

    @staticmethod
    def from_json(doc: dict) -> "QuantumIsingHamiltonian":
        return QuantumIsingHamiltonian.build(
            int(doc["n"]),
            [(e[0], e[1], np.array(e[2]["h"], dtype=np.float64)) for e in doc.get("edges", [])],
            [(l[0], np.array(l[1], dtype=np.float64)) for l in doc.get("locals", [])],
        )


# ---------------------------------------------------------------------------
# State application and diagonalisation
# ---------------------------------------------------------------------------


def _apply_single(psi: np.ndarray, n: int, q: int, m: np.ndarray) -> np.ndarray:
    """Apply a 2x2 operator to qubit q (qubit 0 = most significant axis)."""
    t = psi.reshape(1 << q, 2, 1 << (n - q - 1))
    return np.einsum("ab,xbz->xaz", m, t).reshape(-1)


def apply_hamiltonian(ham: QuantumIsingHamiltonian, psi: np.ndarray) -> np.ndarray:
    """Matrix-free H|psi> built from per-term single-qubit applications."""
    n = ham.n
    out = np.zeros_like(psi, dtype=np.complex128)
    for u, l in enumerate(ham.locals_):
        if np.any(l):
            out += _apply_single(psi, n, u, local_matrix(l))
    for u, v, t in ham.edges:
        for i, a in enumerate(AXES):
            row = t.h[i]
            if not np.any(row):
                continue
            tmp = _apply_single(psi, n, u, PAULI[a])
            m = row[0] * PAULI["X"] + row[1] * PAULI["Y"] + row[2] * PAULI["Z"]
            out += _apply_single(tmp, n, v, m)
    return out


def _kron_embed(ops: dict[int, np.ndarray], n: int) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for q in range(n):
        out = np.kron(out, ops.get(q, PAULI["I"]))
    return out


def dense_matrix(ham: QuantumIsingHamiltonian, cap: int = DENSE_QUBIT_CAP) -> np.ndarray:
    """Assemble the full 2^n x 2^n Hamiltonian by Kronecker accumulation."""
    n = ham.n
    if n > cap:
        raise SizeError(f"dense assembly capped at {cap} qubits")
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=np.complex128)
    for u, l in enumerate(ham.locals_):
        if np.any(l):
            out += _kron_embed({u: local_matrix(l)}, n)
    for u, v, t in ham.edges:
        for i, a in enumerate(AXES):
            for j, b in enumerate(AXES):
                if t.h[i, j] != 0:
                    out += t.h[i, j] * _kron_embed({u: PAULI[a], v: PAULI[b]}, n)
    return out


def exact_diag_min(
    ham: QuantumIsingHamiltonian,
    dense_cap: int = 10,
    iter_cap: int = ITER_QUBIT_CAP,
    tol: float = EIG_TOL,
    maxiter: int = EIG_MAXITER,
    want_vector: bool = True,
) -> tuple[float, Optional[np.ndarray]]:
    """Smallest eigenvalue (and ground vector) of the full 2^n Hamiltonian.

    Systems up to ``dense_cap`` qubits are solved densely; larger ones use a
    matrix-free Lanczos solve that needs only H|psi> applications.
    """
    n = ham.n
    if n == 0:
        return 0.0, None
    if n > iter_cap:
        raise SizeError(f"diagonalisation capped at {iter_cap} qubits, got {n}")
    dim = 1 << n
    if n <= max(dense_cap, 3):  # tiny spaces always dense (Lanczos needs k < dim)
        m = dense_matrix(ham, cap=max(dense_cap, 3))
        if want_vector:
            vals, vecs = np.linalg.eigh(m)
            return float(vals[0]), vecs[:, 0]
        return float(np.linalg.eigvalsh(m)[0]), None
    op = spla.LinearOperator(
        (dim, dim),
        matvec=lambda x: apply_hamiltonian(ham, np.asarray(x, dtype=np.complex128).reshape(-1)),
        dtype=np.complex128,
    )
    rng = np.random.default_rng(12345)
    v0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    try:
        vals, vecs = spla.eigsh(op, k=1, which="SA", tol=tol, maxiter=maxiter, v0=v0)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(f"Lanczos failed to converge: {exc}") from exc
    if want_vector:
        return float(vals[0]), vecs[:, 0]
    return float(vals[0]), None


def spectrum(ham: QuantumIsingHamiltonian, cap: int = 10) -> np.ndarray:
    """Full sorted spectrum; small systems only."""
    return np.linalg.eigvalsh(dense_matrix(ham, cap=cap))


def flip_locals(ham: QuantumIsingHamiltonian) -> QuantumIsingHamiltonian:
    """Q + L -> Q - L; spectra of the two agree (anti-unitary conjugation)."""
    return QuantumIsingHamiltonian(ham.n, ham.edges, tuple(-l for l in ham.locals_))


# ---------------------------------------------------------------------------
# Pauli frames
# ---------------------------------------------------------------------------

_FRAME_ROWS = (
    "XXXX",
    "XYZY",
    "XZYZ",
    "YXZZ",
    "YYYX",
    "YZXY",
    "ZXYY",
    "ZYXZ",
    "ZZZX",
)


@dataclass(frozen=True)
class PauliFrameTable:
    rows: tuple[tuple[str, str, str, str], ...]

    def frame(self, j: int) -> tuple[str, str, str, str]:
        return self.rows[j]


def pauli_frames() -> PauliFrameTable:
    """The 9x4 strength-2 orthogonal array of Pauli axes over 4 colors.

    Every ordered pair of columns realises each of the nine axis pairs
    exactly once; verified on construction.
    """
    rows = tuple(tuple(r) for r in _FRAME_ROWS)
    for c1 in range(4):
        for c2 in range(4):
            if c1 == c2:
                continue
            pairs = {(r[c1], r[c2]) for r in rows}
            if len(pairs) != 9:
                raise AssertionError("Pauli frame table is not a strength-2 orthogonal array")
    return PauliFrameTable(rows)


def quantum_extensivity_bound(ham: QuantumIsingHamiltonian) -> float:
    """-sum_u ||L_u||/5 - W/(5*3^5): planar ground energies sit below this."""
    return float(-(ham.local_norms.sum()) / 5.0 - ham.interaction_weight / (5.0 * 3**5))


# ---------------------------------------------------------------------------
# Product-state certificates
# ---------------------------------------------------------------------------


def greedy_coloring(n: int, edges: Sequence[tuple[int, int]]) -> tuple[np.ndarray, int]:
    """Proper coloring by smallest-last (degeneracy) order; <= 6 on planar graphs."""
    adj: list[set[int]] = [set() for _ in range(n)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    deg = {v: len(adj[v]) for v in range(n)}
    removed = []
    alive = set(range(n))
    work = {v: set(adj[v]) for v in range(n)}
    while alive:
        v = min(alive, key=lambda x: (deg[x], x))
        removed.append(v)
        alive.discard(v)
        for w in work[v]:
            work[w].discard(v)
            deg[w] -= 1
    colors = np.full(n, -1, dtype=np.int64)
    for v in reversed(removed):
        used = {int(colors[w]) for w in adj[v] if colors[w] >= 0}
        c = 0
        while c in used:
            c += 1
        colors[v] = c
    k = int(colors.max()) + 1 if n else 0
    return colors, k


def product_energy(ham: QuantumIsingHamiltonian, bloch: np.ndarray) -> float:
    """Energy of a pure product state given one unit Bloch vector per qubit."""
    r = np.asarray(bloch, dtype=np.float64).reshape(ham.n, 3)
    e = 0.0
    for u, l in enumerate(ham.locals_):
        e += float(np.dot(l, r[u]))
    for u, v, t in ham.edges:
        e += float(r[u] @ t.h @ r[v])
    return e


def _incidence(ham: QuantumIsingHamiltonian):
    """Per-site list of (other vertex, effective 3x3 acting as h_eff @ r_other)."""
    inc: list[list[tuple[int, np.ndarray]]] = [[] for _ in range(ham.n)]
    for u, v, t in ham.edges:
        inc[u].append((v, t.h))
        inc[v].append((u, t.h.T))
    return inc


def _site_gradient(ham, inc, r, u, assigned) -> np.ndarray:
    g = ham.locals_[u].copy()
    for v, h in inc[u]:
        if assigned is None or assigned[v]:
            g += h @ r[v]
    return g


def _sequential_fill(ham: QuantumIsingHamiltonian, bloch: np.ndarray, frozen: np.ndarray) -> np.ndarray:
    """Assign unfrozen sites one by one to the exact minimiser of their terms
    against already-assigned neighbours. Each step contributes -|g| <= 0, so
    the result is at least as low as leaving those sites maximally mixed.
    """
    r = bloch.copy()
    inc = _incidence(ham)
    assigned = frozen.copy()
    for u in range(ham.n):
        if assigned[u]:
            continue
        g = _site_gradient(ham, inc, r, u, assigned)
        nrm = np.linalg.norm(g)
        r[u] = -g / nrm if nrm > 1e-15 else np.array([0.0, 0.0, 1.0])
        assigned[u] = True
    return r


def _sweep_refine(ham: QuantumIsingHamiltonian, bloch: np.ndarray, sweeps: int = 2) -> np.ndarray:
    """Site-wise exact minimisation sweeps; monotone in the product energy."""
    r = bloch.copy()
    inc = _incidence(ham)
    for _ in range(sweeps):
        for u in range(ham.n):
            g = _site_gradient(ham, inc, r, u, None)
            nrm = np.linalg.norm(g)
            if nrm > 1e-15:
                r[u] = -g / nrm
    return r


CLASSICAL_BRUTE_CAP = 20


def _default_classical_solver(embedding):
    """Exact when small, planar PTAS with a tight epsilon otherwise."""

    def solve(inst):
        from .oracle import brute_force_min

        if inst.n <= CLASSICAL_BRUTE_CAP:
            return brute_force_min(inst)[1]
        if embedding is None:
            raise SizeError(
                f"frame instance has {inst.n} spins; supply an embedding for the planar kernel"
            )
        from .outerplanar import planar_ptas_min

        return planar_ptas_min(inst, embedding, eps=0.125).assignment

    return solve


def product_state_certificate(
    ham: QuantumIsingHamiltonian,
    embedding=None,
    classical_solver=None,
) -> tuple[np.ndarray, float, dict]:
    """Variational upper bound on lambda(H) from pure product states.

    Candidates: (a) for each of the nine Pauli frames over a greedy proper
    coloring, the optimum of the frame-diagonal classical instance lifted to
    axis eigenstates, plus its globally spin-flipped partner (which keeps
    the quadratic part and negates the 1-local part); (b) for each color
    class, local-term ground states on the class completed by sequential
    site minimisation and sweeps. Every candidate is a genuine product
    state, so the best energy upper-bounds lambda(H). With exact frame
    solves and k colors, the minimum provably sits below
    -(sum||L|| + W/3^5)/(k+1).
    """
    n = ham.n
    colors, k = greedy_coloring(n, [(u, v) for u, v, _ in ham.edges])
    frames = pauli_frames()
    axis_index = {a: i for i, a in enumerate(AXES)}
    axis_vec = {a: np.eye(3)[axis_index[a]] for a in AXES}

    if classical_solver is None:
        classical_solver = _default_classical_solver(embedding)

    best_bloch = None
    best_e = np.inf
    from .model import IsingInstance

    for j in range(9):
        frame = frames.frame(j)
        axes = [frame[int(colors[u]) % 4] for u in range(n)]
        cedges = []
        for u, v, t in ham.edges:
            c = float(t.h[axis_index[axes[u]], axis_index[axes[v]]])
            cedges.append((u, v, c))
        cfields = tuple(
            (u, float(ham.locals_[u][axis_index[axes[u]]]))
            for u in range(n)
            if ham.locals_[u][axis_index[axes[u]]] != 0
        )
        inst = IsingInstance(n, tuple(cedges), cfields)
        spins = classical_solver(inst).array
        bloch = np.array([spins[u] * axis_vec[axes[u]] for u in range(n)]) if n else np.zeros((0, 3))
        for cand in (bloch, -bloch):
            e = product_energy(ham, cand)
            if e < best_e:
                best_e, best_bloch = e, cand

    for c in range(k):
        bloch = np.zeros((n, 3))
        frozen = np.zeros(n, dtype=bool)
        for u in range(n):
            if colors[u] == c and np.any(ham.locals_[u]):
                bloch[u] = -ham.locals_[u] / np.linalg.norm(ham.locals_[u])
                frozen[u] = True
        bloch = _sequential_fill(ham, bloch, frozen)
        bloch = _sweep_refine(ham, bloch)
        e = product_energy(ham, bloch)
        if e < best_e:
            best_e, best_bloch = e, bloch

    if best_bloch is None:
        best_bloch, best_e = np.zeros((0, 3)), 0.0
    diag = {
        "colors": k,
        "construction_bound": float(
            -(ham.local_norms.sum() + ham.interaction_weight / 3**5) / (k + 1)
        )
        if n
        else 0.0,
    }
    return best_bloch, float(best_e), diag
