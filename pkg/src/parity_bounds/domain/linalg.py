"""Dense complex linear algebra primitives.

Operators and states are ``complex128`` numpy arrays of shape ``(d, d)``.
Every routine is a pure function of its inputs.
"""

import functools
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Any, Optional, Protocol, TypeAlias

import numpy as np
import numpy.typing as npt
import structlog

from parity_bounds.domain.exceptions import (
    CapacityError,
    NumericError,
    SupportViolationError,
    ValidationError,
)
from parity_bounds.domain.policy import get_policy

logger = structlog.get_logger(__name__)

Matrix: TypeAlias = npt.NDArray[np.complex128]
RealVector: TypeAlias = npt.NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class HermitianEigenResult:
    """Eigen-decomposition of a Hermitian matrix.

    ``eigenvalues`` are ascending; column ``k`` of ``eigenvectors`` belongs to
    ``eigenvalues[k]``.
    """

    eigenvalues: RealVector
    eigenvectors: Matrix

    def reconstruct(self) -> Matrix:
        """Return V diag(lambda) V*."""
        v = self.eigenvectors
        return np.asarray((v * self.eigenvalues) @ v.conj().T, dtype=np.complex128)

    @property
    def top_eigenvector(self) -> Matrix:
        """Eigenvector of the largest eigenvalue (last column)."""
        return np.asarray(self.eigenvectors[:, -1], dtype=np.complex128)


def as_matrix(data: Any, name: str = "matrix") -> Matrix:
    """Coerce ``data`` to a finite square complex128 array."""
    a = np.asarray(data, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValidationError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains non-finite entries")
    return a


def check_capacity(dim: int) -> None:
    """Raise CapacityError when ``dim`` exceeds the policy cap."""
    cap = get_policy().max_dim
    if dim > cap:
        raise CapacityError(dim, cap)


def is_hermitian(a: Matrix, tol: Optional[float] = None) -> bool:
    """Entrywise check max |a - a*| <= tol."""
    tol = get_policy().hermitian_tol if tol is None else tol
    return bool(np.max(np.abs(a - a.conj().T)) <= tol)


def _symmetrized(a: Matrix, name: str = "matrix") -> Matrix:
    a = as_matrix(a, name)
    if not is_hermitian(a):
        deviation = float(np.max(np.abs(a - a.conj().T)))
        raise ValidationError(f"{name} is not Hermitian (max |a - a*| = {deviation:.3e})")
    return (a + a.conj().T) / 2


def kron(a: Matrix, b: Matrix) -> Matrix:
    """Kronecker product; block (p, q) equals a[p, q] * b."""
    check_capacity(a.shape[0] * b.shape[0])
    return np.kron(a, b)


def kron_all(ops: Iterable[Matrix]) -> Matrix:
    """Left-fold Kronecker product ((a1 (x) a2) (x) a3) ... with one capacity check."""
    ops = list(ops)
    if not ops:
        raise ValidationError("kron_all needs at least one factor")
    check_capacity(math.prod(op.shape[0] for op in ops))
    return functools.reduce(np.kron, ops)


def hermitian_eig(a: Matrix) -> HermitianEigenResult:
    """Eigen-decomposition of a Hermitian matrix with ascending eigenvalues."""
    h = _symmetrized(a)
    try:
        eigenvalues, eigenvectors = np.linalg.eigh(h)
    except np.linalg.LinAlgError as e:
        logger.error("Eigensolver failed", dim=h.shape[0], error=str(e))
        raise NumericError(f"Hermitian eigensolver did not converge: {e}") from e
    return HermitianEigenResult(
        eigenvalues=np.asarray(eigenvalues, dtype=np.float64),
        eigenvectors=np.asarray(eigenvectors, dtype=np.complex128),
    )


def eigvalsh(a: Matrix) -> RealVector:
    """Ascending eigenvalues of a Hermitian matrix."""
    h = _symmetrized(a)
    try:
        return np.asarray(np.linalg.eigvalsh(h), dtype=np.float64)
    except np.linalg.LinAlgError as e:
        raise NumericError(f"Hermitian eigensolver did not converge: {e}") from e


def singular_values(a: Matrix) -> RealVector:
    """Singular values via the spectrum of a*a, descending."""
    a = as_matrix(a)
    gram = a.conj().T @ a
    values = np.sqrt(np.clip(eigvalsh(gram), 0.0, None))
    return np.asarray(values[::-1], dtype=np.float64)


def operator_norm(a: Matrix) -> float:
    """Largest singular value; Hermitian inputs use max |eigenvalue|."""
    a = as_matrix(a)
    if is_hermitian(a):
        return float(np.max(np.abs(eigvalsh(a))))
    return float(singular_values(a)[0])


def trace_norm(a: Matrix) -> float:
    """Sum of singular values."""
    a = as_matrix(a)
    if is_hermitian(a):
        return float(np.sum(np.abs(eigvalsh(a))))
    return float(np.sum(singular_values(a)))


def commutator(a: Matrix, b: Matrix) -> Matrix:
    """ab - ba."""
    _check_same_shape(a, b)
    return np.asarray(a @ b - b @ a, dtype=np.complex128)


def anticommutator(a: Matrix, b: Matrix) -> Matrix:
    """ab + ba."""
    _check_same_shape(a, b)
    return np.asarray(a @ b + b @ a, dtype=np.complex128)


def _check_same_shape(a: Matrix, b: Matrix) -> None:
    if a.shape != b.shape:
        raise ValidationError(f"Dimension mismatch: {a.shape} vs {b.shape}")


def matrix_log_psd(a: Matrix, clamp: Optional[float] = None) -> Matrix:
    """V diag(log max(lambda, clamp)) V* for a Hermitian PSD matrix."""
    policy = get_policy()
    clamp = policy.log_clamp if clamp is None else clamp
    eig = hermitian_eig(a)
    if eig.eigenvalues[0] < -policy.psd_tol:
        raise ValidationError(
            f"matrix_log_psd needs a PSD input, min eigenvalue {eig.eigenvalues[0]:.3e}"
        )
    logs = np.log(np.maximum(eig.eigenvalues, clamp))
    v = eig.eigenvectors
    return np.asarray((v * logs) @ v.conj().T, dtype=np.complex128)


def _site_axes(dims: Sequence[int]) -> tuple[int, ...]:
    return tuple(int(d) for d in dims) * 2


def partial_trace_keep(matrix: Matrix, dims: Sequence[int], keep: Sequence[int]) -> Matrix:
    """Reduced operator on the sites in ``keep`` (0-based, kept in ascending order)."""
    n = len(dims)
    keep = sorted(set(keep))
    if any(r < 0 or r >= n for r in keep):
        raise ValidationError(f"Site indices {keep} out of range for {n} sites")
    tensor = matrix.reshape(_site_axes(dims))
    row_labels = list(range(n))
    col_labels = [r if r not in keep else n + r for r in range(n)]
    out_labels = keep + [n + r for r in keep]
    reduced = np.einsum(tensor, row_labels + col_labels, out_labels)
    kept_dim = math.prod(int(dims[r]) for r in keep)
    return np.asarray(reduced, dtype=np.complex128).reshape(kept_dim, kept_dim)


def embed_identity(reduced: Matrix, dims: Sequence[int], site: int) -> Matrix:
    """Insert I/d at ``site`` into an operator on the remaining sites."""
    n = len(dims)
    d = int(dims[site])
    others = [r for r in range(n) if r != site]
    reduced_tensor = reduced.reshape(tuple(dims[r] for r in others) * 2)
    full = np.einsum(
        reduced_tensor,
        others + [n + r for r in others],
        np.eye(d, dtype=np.complex128) / d,
        [site, n + site],
        list(range(2 * n)),
    )
    total = math.prod(int(k) for k in dims)
    return np.asarray(full, dtype=np.complex128).reshape(total, total)


def von_neumann_entropy(matrix: Matrix) -> float:
    """-sum lambda log lambda over the clamped spectrum (natural log)."""
    clamp = get_policy().log_clamp
    values = eigvalsh(matrix)
    values = values[values >= clamp]
    return float(-np.sum(values * np.log(values)))


def relative_entropy(rho: Matrix, sigma: Matrix) -> float:
    """D(rho || sigma) = Tr rho log rho - Tr rho log sigma, natural log.

    Eigenvalues of sigma below the clamp are treated as outside its support;
    rho-weight on them beyond ``support_tol`` raises SupportViolationError.
    """
    policy = get_policy()
    sigma_eig = hermitian_eig(sigma)
    weights = np.real(
        np.einsum("ik,ij,jk->k", sigma_eig.eigenvectors.conj(), rho, sigma_eig.eigenvectors)
    )
    outside = sigma_eig.eigenvalues < policy.log_clamp
    leaked = float(np.sum(weights[outside])) if np.any(outside) else 0.0
    if leaked > policy.support_tol:
        raise SupportViolationError(
            f"rho has weight {leaked:.3e} outside the support of sigma (infinite divergence)"
        )
    inside = ~outside
    cross = float(np.sum(weights[inside] * np.log(sigma_eig.eigenvalues[inside])))
    return -von_neumann_entropy(rho) - cross


class SiteState(Protocol):
    """Anything carrying a full-space density matrix and its site dimensions."""

    @property
    def dims(self) -> tuple[int, ...]: ...

    @property
    def matrix(self) -> Matrix: ...


def partial_trace(rho: SiteState, site: int) -> Matrix:
    """Marginal of ``rho`` on the 0-based ``site``."""
    n = len(rho.dims)
    if not 0 <= site < n:
        raise ValidationError(f"Site index {site} out of range for {n} sites")
    marginal = partial_trace_keep(rho.matrix, rho.dims, [site])
    return (marginal + marginal.conj().T) / 2
