"""Ground-truth engines: exhaustive minimisation and extensivity certificates.

The brute-force scan is the oracle every approximate solver is validated
against, so it stays deliberately simple: a Gray-code walk over all 2^n
assignments with O(degree) incremental energy updates. Optional threading
partitions the search space by fixing the leading spins and folding them
into the fields of the remaining instance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .model import (
    CertificateNotApplicableError,
    IsingInstance,
    PlanarEmbedding,
    SizeError,
    SpinAssignment,
    energy,
    validate,
)
from .parallel import pmap

BRUTE_FORCE_CAP = 28
FLOAT_TOL = 1e-8


def _all_plus_energy(instance: IsingInstance):
    total = sum(c for _, _, c in instance.edges) + sum(d for _, d in instance.fields)
    if instance.is_integral:
        return np.int64(round(total))
    return np.float64(total)


def _scan(instance: IsingInstance, backend: Optional[str]):
    indptr, nbr, wgt = instance.csr
    d = instance.field_vector
    e0 = _all_plus_energy(instance)
    return kernels.brute_force_scan(
        indptr, nbr, wgt, d, e0, instance.n, instance.edge_arrays, backend=backend
    )


def _restrict_prefix(instance: IsingInstance, prefix_spins: list[int]) -> tuple[IsingInstance, float]:
    """Fold fixed leading spins into the instance on the remaining vertices."""
    p = len(prefix_spins)
    shift = {u: u - p for u in range(p, instance.n)}
    edges = []
    extra_fields = {}
    const = 0.0
    for u, v, c in instance.edges:
        fu, fv = u < p, v < p
        if fu and fv:
            const += c * prefix_spins[u] * prefix_spins[v]
        elif fu:
            extra_fields[shift[v]] = extra_fields.get(shift[v], 0.0) + c * prefix_spins[u]
        elif fv:
            extra_fields[shift[u]] = extra_fields.get(shift[u], 0.0) + c * prefix_spins[v]
        else:
            edges.append((shift[u], shift[v], c))
    for u, dval in instance.fields:
        if u < p:
            const += dval * prefix_spins[u]
        else:
            extra_fields[shift[u]] = extra_fields.get(shift[u], 0.0) + dval
    fields = tuple((u, dv) for u, dv in sorted(extra_fields.items()))
    sub = IsingInstance(instance.n - p, tuple(edges), fields, simple=instance.simple)
    return sub, const


def brute_force_min(
    instance: IsingInstance,
    cap: int = BRUTE_FORCE_CAP,
    backend: Optional[str] = None,
    threads: int = 1,
) -> tuple[float, SpinAssignment]:
    """Exact minimum of H over all assignments, with its witness.

    Ties are broken toward the lexicographically smallest spin vector
    (+1 ordered before -1). ``threads`` > 1 splits the space on the leading
    spins; the reduction is deterministic.
    """
    n = instance.n
    if n > cap:
        raise SizeError(f"brute force capped at {cap} spins, instance has {n}")
    if n == 0:
        return 0, SpinAssignment(())

    if threads <= 1 or n < 4:
        e, revkey = _scan(instance, backend)
        val = int(e) if instance.is_integral else float(e)
        return val, SpinAssignment.from_revkey(int(revkey), n)

    p = min(max(1, (threads - 1).bit_length()), n - 1)

    def run(prefix_idx: int):
        spins = [1 - 2 * ((prefix_idx >> (p - 1 - u)) & 1) for u in range(p)]
        sub, const = _restrict_prefix(instance, spins)
        e, revkey = _scan(sub, backend)
        full_key = (prefix_idx << (n - p)) | int(revkey)
        return float(e) + const, full_key

    results = pmap(run, range(1 << p), threads)
    best_e, best_key = min(results, key=lambda t: (t[0], t[1]))
    val = int(round(best_e)) if instance.is_integral else best_e
    return val, SpinAssignment.from_revkey(best_key, n)


def enumerate_energies(instance: IsingInstance, cap: int = 24) -> np.ndarray:
    """Energy of every assignment, indexed by revkey. Test/verification aid."""
    n = instance.n
    if n > cap:
        raise SizeError(f"enumeration capped at {cap} spins")
    keys = np.arange(1 << n, dtype=np.int64)
    shifts = np.array([n - 1 - u for u in range(n)], dtype=np.int64)
    spins = 1 - 2 * ((keys[:, None] >> shifts[None, :]) & 1).astype(np.int8)
    out = np.zeros(1 << n, dtype=instance.dtype)
    cast = int if instance.is_integral else float
    for u, v, c in instance.edges:
        out += cast(c) * (spins[:, u] * spins[:, v]).astype(instance.dtype)
    for u, d in instance.fields:
        out += cast(d) * spins[:, u].astype(instance.dtype)
    return out


# ---------------------------------------------------------------------------
# Extensivity certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundCertificate:
    kind: str  # 'classical_extensivity' | 'quantum_extensivity'
    bound_value: float
    holds: bool

    def as_dict(self) -> dict:
        return {"kind": self.kind, "bound_value": self.bound_value, "holds": self.holds}


def check_classical_extensivity(
    instance: IsingInstance,
    optimum: float,
    embedding: Optional[PlanarEmbedding] = None,
) -> BoundCertificate:
    """Certify optimum <= -W/3 for simple planar instances.

    In exact integer mode the comparison is 3*optimum <= -W with no
    tolerance. Non-simple instances are rejected: the bound genuinely fails
    on multigraphs (a +-1 parallel pair has W=2 but optimum 0).
    """
    report = validate(instance, embedding)
    if not report.simple:
        raise CertificateNotApplicableError("extensivity certificate requires a simple graph")
    if embedding is not None and report.embedding_consistent is False:
        raise CertificateNotApplicableError("embedding failed the Euler consistency check")
    w = instance.coupling_weight
    bound = -w / 3.0
    if instance.is_integral:
        holds = 3 * int(round(optimum)) <= -int(round(w))
    else:
        holds = optimum <= bound + FLOAT_TOL
    return BoundCertificate("classical_extensivity", bound, bool(holds))


def check_quantum_extensivity(hamiltonian, lambda_min: float) -> BoundCertificate:
    """Certify lambda_min <= -sum||L_u||/5 - W/(5*3^5) for planar instances."""
    from .quantum import quantum_extensivity_bound

    bound = quantum_extensivity_bound(hamiltonian)
    holds = lambda_min <= bound + FLOAT_TOL
    return BoundCertificate("quantum_extensivity", bound, bool(holds))
