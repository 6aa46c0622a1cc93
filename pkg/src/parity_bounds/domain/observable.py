"""Observable assembly and parity defect weights.

For a pair of terms (i, j) the mixed product u_i u_j + u_j u_i keeps only the
even-parity part of the tensor expansion into local commutators C and
anticommutators A. The defect weight phi_ij bounds its norm, and
m + sum phi_ij bounds ||B||^2.
"""

from collections.abc import Sequence

import numpy as np
import structlog

from parity_bounds.domain.exceptions import ValidationError
from parity_bounds.domain.linalg import (
    Matrix,
    anticommutator,
    check_capacity,
    commutator,
    kron_all,
    operator_norm,
)
from parity_bounds.domain.models import DefectReport, ObservableFamily

logger = structlog.get_logger(__name__)

MAX_SUBSET_SITES = 30


def term_operator(fam: ObservableFamily, i: int) -> Matrix:
    """u_i = a_i^(1) (x) ... (x) a_i^(n)."""
    _check_term(fam, i)
    return kron_all(fam.ops[i])


def assemble_b(fam: ObservableFamily) -> Matrix:
    """B = sum_i u_i on the full tensor space."""
    check_capacity(fam.product_dim)
    b = np.zeros((fam.product_dim, fam.product_dim), dtype=np.complex128)
    for i in range(fam.m):
        b += kron_all(fam.ops[i])
    return (b + b.conj().T) / 2


def _check_term(fam: ObservableFamily, i: int) -> None:
    if not 0 <= i < fam.m:
        raise ValidationError(f"Term index {i} out of range for m = {fam.m}")


def _check_pair(fam: ObservableFamily, i: int, j: int) -> None:
    _check_term(fam, i)
    _check_term(fam, j)
    if not i < j:
        raise ValidationError(f"Pair indices must satisfy i < j, got ({i}, {j})")


def local_pair_norms(fam: ObservableFamily, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-site ||[a_i, a_j]|| and ||{a_i, a_j}||, computed once per site."""
    comm_norms = np.empty(fam.n)
    anti_norms = np.empty(fam.n)
    for r in range(fam.n):
        a, b = fam.ops[i][r], fam.ops[j][r]
        # i[a, b] is Hermitian for Hermitian a, b
        comm_norms[r] = operator_norm(1j * commutator(a, b))
        anti_norms[r] = operator_norm(anticommutator(a, b))
    return comm_norms, anti_norms


def even_subset_sum(comm_norms: Sequence[float], anti_norms: Sequence[float]) -> float:
    """Sum over even |S| of prod_{r in S} comm_norms[r] * prod_{r not in S} anti_norms[r]."""
    n = len(comm_norms)
    if n != len(anti_norms):
        raise ValidationError("Commutator and anticommutator norm vectors differ in length")
    if n > MAX_SUBSET_SITES:
        raise ValidationError(f"Even-subset enumeration supports at most {MAX_SUBSET_SITES} sites")
    total = 0.0
    for mask in range(1 << n):
        if mask.bit_count() % 2:
            continue
        term = 1.0
        for r in range(n):
            term *= comm_norms[r] if mask >> r & 1 else anti_norms[r]
            if term == 0.0:
                break
        total += term
    return total


def defect_weight(fam: ObservableFamily, i: int, j: int) -> float:
    """phi_ij = 2^(1-n) * even_subset_sum of the local commutator/anticommutator norms."""
    _check_pair(fam, i, j)
    comm_norms, anti_norms = local_pair_norms(fam, i, j)
    return 2.0 ** (1 - fam.n) * even_subset_sum(comm_norms, anti_norms)


def defect_report(fam: ObservableFamily, compute_exact: bool = False) -> DefectReport:
    """Defect table, denominator M = m + sum phi, and optionally the exact ||B||^2."""
    phi = np.zeros((fam.m, fam.m))
    for i in range(fam.m):
        for j in range(i + 1, fam.m):
            phi[i, j] = defect_weight(fam, i, j)

    defect_sum = 0.0
    for i in range(fam.m):
        for j in range(i + 1, fam.m):
            defect_sum += float(phi[i, j])
    denominator = fam.m + defect_sum

    exact_norm_sq = None
    bound_satisfied = None
    if compute_exact:
        exact_norm_sq = operator_norm(assemble_b(fam)) ** 2
        bound_satisfied = bool(exact_norm_sq <= denominator + 1e-9)

    logger.info(
        "Defect report computed",
        m=fam.m,
        n=fam.n,
        denominator=denominator,
        exact_norm_sq=exact_norm_sq,
    )
    phi.setflags(write=False)
    return DefectReport(
        phi=phi,
        defect_sum=defect_sum,
        denominator=denominator,
        exact_norm_sq=exact_norm_sq,
        bound_satisfied=bound_satisfied,
    )


def mixed_term_parity_expansion(fam: ObservableFamily, i: int, j: int) -> Matrix:
    """2^(1-n) * sum over even |S| of T_S, with C on S and A off S.

    Equals u_i u_j + u_j u_i exactly in exact arithmetic.
    """
    _check_pair(fam, i, j)
    check_capacity(fam.product_dim)
    comms = [commutator(fam.ops[i][r], fam.ops[j][r]) for r in range(fam.n)]
    antis = [anticommutator(fam.ops[i][r], fam.ops[j][r]) for r in range(fam.n)]
    result = np.zeros((fam.product_dim, fam.product_dim), dtype=np.complex128)
    for mask in range(1 << fam.n):
        if mask.bit_count() % 2:
            continue
        result += kron_all(comms[r] if mask >> r & 1 else antis[r] for r in range(fam.n))
    return result * 2.0 ** (1 - fam.n)


def extend_observable(fam: ObservableFamily, extra_dims: Sequence[int]) -> ObservableFamily:
    """Append identity factors on new sites: B becomes B (x) I (x) ... (x) I."""
    extra = tuple(int(d) for d in extra_dims)
    if not extra:
        raise ValidationError("extra_dims must be non-empty")
    if any(d < 1 for d in extra):
        raise ValidationError(f"Extra site dimensions must be >= 1, got {extra}")
    identities = tuple(np.eye(d, dtype=np.complex128) for d in extra)
    return ObservableFamily.from_terms(
        fam.dims + extra,
        [row + identities for row in fam.ops],
    )
