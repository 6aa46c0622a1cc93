"""Domain models for the parity bounds toolkit.

These models represent observable families, states and the reports computed
from them. Constructors validate the type invariants.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from parity_bounds.domain.exceptions import ValidationError
from parity_bounds.domain.linalg import (
    Matrix,
    RealVector,
    as_matrix,
    check_capacity,
    eigvalsh,
    is_hermitian,
    kron_all,
    operator_norm,
)
from parity_bounds.domain.policy import get_policy


def _validate_dims(dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims:
        raise ValidationError("At least one site is required")
    if any(d < 1 for d in dims):
        raise ValidationError(f"Site dimensions must be >= 1, got {dims}")
    return dims


def _validate_density(matrix: Matrix, name: str) -> Matrix:
    policy = get_policy()
    if not is_hermitian(matrix):
        raise ValidationError(f"{name} is not Hermitian")
    matrix = (matrix + matrix.conj().T) / 2
    trace = float(np.real(np.trace(matrix)))
    if abs(trace - 1.0) > policy.trace_tol:
        raise ValidationError(f"{name} has trace {trace!r}, expected 1")
    min_eig = float(eigvalsh(matrix)[0])
    if min_eig < -policy.psd_tol:
        raise ValidationError(f"{name} is not PSD (min eigenvalue {min_eig:.3e})")
    return matrix


@dataclass(frozen=True, eq=False)
class ObservableFamily:
    """Table of local self-adjoint contractions ``ops[i][r]``.

    Term ``i`` contributes ``ops[i][0] (x) ... (x) ops[i][n-1]`` to B.
    """

    dims: tuple[int, ...]
    ops: tuple[tuple[Matrix, ...], ...]

    def __post_init__(self) -> None:
        """Validate shapes, hermiticity and the contraction property."""
        dims = _validate_dims(self.dims)
        if not self.ops:
            raise ValidationError("An observable family needs at least one term")
        policy = get_policy()
        ops: list[tuple[Matrix, ...]] = []
        for i, row in enumerate(self.ops):
            if len(row) != len(dims):
                raise ValidationError(f"Term {i} has {len(row)} factors, expected {len(dims)}")
            factors = []
            for r, op in enumerate(row):
                a = as_matrix(op, name=f"operator ({i}, {r})")
                if a.shape[0] != dims[r]:
                    raise ValidationError(
                        f"operator ({i}, {r}) has dim {a.shape[0]}, site {r} has dim {dims[r]}"
                    )
                if not is_hermitian(a):
                    raise ValidationError(f"operator ({i}, {r}) is not Hermitian")
                a = (a + a.conj().T) / 2
                norm = operator_norm(a)
                if norm > 1.0 + policy.contraction_tol:
                    raise ValidationError(
                        f"operator ({i}, {r}) is not a contraction: ||a|| = {norm:.12g}"
                    )
                a.setflags(write=False)
                factors.append(a)
            ops.append(tuple(factors))
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "ops", tuple(ops))

    @classmethod
    def from_terms(cls, dims: Sequence[int], ops: Sequence[Sequence[Matrix]]) -> "ObservableFamily":
        """Build a family from nested sequences of matrices."""
        return cls(dims=tuple(dims), ops=tuple(tuple(row) for row in ops))

    @property
    def n(self) -> int:
        """Number of sites."""
        return len(self.dims)

    @property
    def m(self) -> int:
        """Number of terms."""
        return len(self.ops)

    @property
    def product_dim(self) -> int:
        """Dimension of the full tensor space."""
        return math.prod(self.dims)

    def site_operators(self, r: int) -> tuple[Matrix, ...]:
        """Local family a_1^(r), ..., a_m^(r)."""
        return tuple(row[r] for row in self.ops)


@dataclass(frozen=True, eq=False)
class DefectReport:
    """Parity defect weights and the resulting norm bound."""

    phi: np.ndarray
    defect_sum: float
    denominator: float
    exact_norm_sq: Optional[float] = None
    bound_satisfied: Optional[bool] = None

    @property
    def m(self) -> int:
        """Number of terms the report was computed for."""
        return int(self.phi.shape[0])

    @property
    def slack(self) -> Optional[float]:
        """denominator - ||B||^2 when the exact norm is known."""
        if self.exact_norm_sq is None:
            return None
        return self.denominator - self.exact_norm_sq


@dataclass(frozen=True, eq=False)
class ProductState:
    """Product state sigma^(1) (x) ... (x) sigma^(n)."""

    factors: tuple[Matrix, ...]

    def __post_init__(self) -> None:
        """Validate every factor as a density matrix."""
        if not self.factors:
            raise ValidationError("A product state needs at least one factor")
        factors = tuple(
            _validate_density(as_matrix(f, name=f"factor {r}"), f"factor {r}")
            for r, f in enumerate(self.factors)
        )
        object.__setattr__(self, "factors", factors)

    @classmethod
    def from_vectors(cls, vectors: Sequence[np.ndarray]) -> "ProductState":
        """Pure product state from one (not necessarily normalized) vector per site."""
        factors = []
        for v in vectors:
            v = np.asarray(v, dtype=np.complex128)
            v = v / np.linalg.norm(v)
            factors.append(np.outer(v, v.conj()))
        return cls(factors=tuple(factors))

    @classmethod
    def from_bloch(cls, vectors: Sequence[Sequence[float]]) -> "ProductState":
        """Qubit product state from Bloch vectors (|v| <= 1)."""
        x = np.array([[0, 1], [1, 0]], dtype=np.complex128)
        y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
        z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
        factors = []
        for bx, by, bz in vectors:
            factors.append((np.eye(2) + bx * x + by * y + bz * z) / 2)
        return cls(factors=tuple(factors))

    @property
    def dims(self) -> tuple[int, ...]:
        """Site dimensions."""
        return tuple(f.shape[0] for f in self.factors)

    def to_dense(self) -> Matrix:
        """Full tensor-space density matrix."""
        return kron_all(self.factors)


@dataclass(frozen=True, eq=False)
class ThresholdResult:
    """Best product value found by the see-saw optimizer with its certificate."""

    gamma: float
    certificate: ProductState
    restarts_used: int
    iterations: int
    converged: bool
    history: tuple[float, ...] = ()
    degenerate_updates: int = 0


@dataclass(frozen=True, eq=False)
class DensityState:
    """Density matrix on the tensor space together with its site dimensions."""

    dims: tuple[int, ...]
    matrix: Matrix

    def __post_init__(self) -> None:
        """Validate shape, hermiticity, trace and positivity."""
        dims = _validate_dims(self.dims)
        total = math.prod(dims)
        check_capacity(total)
        matrix = as_matrix(self.matrix, name="state")
        if matrix.shape[0] != total:
            raise ValidationError(f"state has dim {matrix.shape[0]}, sites give {total}")
        matrix = _validate_density(matrix, "state")
        matrix.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_pure(cls, vector: np.ndarray, dims: Sequence[int]) -> "DensityState":
        """Projector onto a (normalized) state vector."""
        v = np.asarray(vector, dtype=np.complex128).ravel()
        v = v / np.linalg.norm(v)
        return cls(dims=tuple(dims), matrix=np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, dims: Sequence[int]) -> "DensityState":
        """I / prod(dims)."""
        total = math.prod(dims)
        return cls(dims=tuple(dims), matrix=np.eye(total, dtype=np.complex128) / total)

    @classmethod
    def product(cls, factors: Sequence[Matrix]) -> "DensityState":
        """Tensor product of local density matrices."""
        factors = [as_matrix(f) for f in factors]
        return cls(dims=tuple(f.shape[0] for f in factors), matrix=kron_all(factors))

    @property
    def n(self) -> int:
        """Number of sites."""
        return len(self.dims)


class GammaProvenance(Enum):
    """Where the threshold used in an excess came from."""

    EXACT = "exact"
    CERTIFIED_UPPER = "certified-upper"
    USER_CONSTANTS = "user-constants"
    HEURISTIC = "heuristic"


@dataclass(frozen=True)
class CorrelationReport:
    """Excess above a threshold and the total-correlation bound chain."""

    expectation: float
    gamma_used: float
    gamma_provenance: GammaProvenance
    excess: float
    denominator: float
    trace_dist_lb: float
    itot_lb: float
    itot_exact: Optional[float] = None

    def __post_init__(self) -> None:
        """Validate the sign of the excess."""
        if self.excess < 0:
            raise ValidationError(f"excess must be >= 0, got {self.excess}")

    @property
    def bound_valid(self) -> bool:
        """True when gamma_used is known to be at least the product threshold."""
        return self.gamma_provenance is not GammaProvenance.HEURISTIC

    @property
    def gap(self) -> Optional[float]:
        """itot_exact - itot_lb when the exact value is known."""
        if self.itot_exact is None:
            return None
        return self.itot_exact - self.itot_lb


@dataclass(frozen=True)
class DecayParams:
    """Inputs of the decay, survival and integrated excess bounds."""

    lam: float
    itot0: float
    denominator: float

    def __post_init__(self) -> None:
        """Validate finiteness and signs."""
        values = (self.lam, self.itot0, self.denominator)
        if not all(math.isfinite(v) for v in values):
            raise ValidationError(f"Decay parameters must be finite, got {values}")
        if self.lam <= 0:
            raise ValidationError(f"lambda must be > 0, got {self.lam}")
        if self.itot0 < 0:
            raise ValidationError(f"itot0 must be >= 0, got {self.itot0}")
        if self.denominator <= 0:
            raise ValidationError(f"denominator must be > 0, got {self.denominator}")


@dataclass(frozen=True, eq=False)
class DecayTrace:
    """Expectation, excess and correlation bound along a uniform time grid."""

    times: RealVector
    expectation: RealVector
    excess: RealVector
    itot_lb: RealVector
    format: str = field(default="csv/t,expectation,excess,itot_lb")

    def __post_init__(self) -> None:
        """Validate column lengths and excess signs."""
        lengths = {len(self.times), len(self.expectation), len(self.excess), len(self.itot_lb)}
        if len(lengths) != 1:
            raise ValidationError(f"Trace columns differ in length: {sorted(lengths)}")
        if np.any(np.asarray(self.excess) < 0):
            raise ValidationError("Trace excess entries must be >= 0")

    @property
    def header(self) -> tuple[str, ...]:
        """CSV column names."""
        return ("t", "expectation", "excess", "itot_lb")

    def to_rows(self) -> list[tuple[float, float, float, float]]:
        """One tuple per grid point, in grid order."""
        return [
            (float(t), float(e), float(x), float(b))
            for t, e, x, b in zip(self.times, self.expectation, self.excess, self.itot_lb)
        ]


class WindowKind(Enum):
    """Shape of the set of times with positive excess."""

    INTERVAL = "interval"
    ALL = "all"
    EMPTY = "empty"


@dataclass(frozen=True)
class PositivityWindow:
    """Times t >= 0 at which the excess stays strictly positive."""

    kind: WindowKind
    upper: Optional[float] = None

    def contains(self, t: float) -> bool:
        """Whether the excess is positive at time ``t``."""
        if t < 0 or self.kind is WindowKind.EMPTY:
            return False
        if self.kind is WindowKind.ALL:
            return True
        assert self.upper is not None
        return t < self.upper


@dataclass(frozen=True)
class DecayScenario:
    """Grid and rate settings for a depolarizing run."""

    lam: float
    t_max: float
    steps: int
    epsilon: Optional[float] = None

    def __post_init__(self) -> None:
        """Validate the grid and the rate."""
        if not self.lam > 0 or not math.isfinite(self.lam):
            raise ValidationError(f"lambda must be finite and > 0, got {self.lam}")
        if not self.t_max > 0 or not math.isfinite(self.t_max):
            raise ValidationError(f"t_max must be finite and > 0, got {self.t_max}")
        if self.steps < 2:
            raise ValidationError(f"steps must be >= 2, got {self.steps}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValidationError(f"epsilon must be > 0, got {self.epsilon}")


@dataclass(frozen=True, eq=False)
class Problem:
    """A family with the optional state, threshold and decay settings to analyse it with."""

    family: ObservableFamily
    state: Optional[DensityState] = None
    gamma: Optional[float] = None
    gamma_provenance: GammaProvenance = GammaProvenance.CERTIFIED_UPPER
    c_constants: Optional[tuple[float, ...]] = None
    decay: Optional[DecayScenario] = None

    def __post_init__(self) -> None:
        """Check that the state and constants fit the family."""
        if self.state is not None and self.state.dims != self.family.dims:
            raise ValidationError(
                f"State dims {self.state.dims} do not match family dims {self.family.dims}"
            )
        if self.c_constants is not None and len(self.c_constants) != self.family.n:
            raise ValidationError(
                f"Expected {self.family.n} site constants, got {len(self.c_constants)}"
            )


class CheckRelation(Enum):
    """How a measured value is compared with its expected value."""

    EQUAL = "eq"
    AT_LEAST = "ge"
    AT_MOST = "le"


@dataclass(frozen=True)
class ExpectedCheck:
    """One expected value of a built-in fixture."""

    check: str
    expected: float
    tolerance: float
    relation: CheckRelation = CheckRelation.EQUAL

    def passes(self, measured: float) -> bool:
        """Compare ``measured`` with the expected value under the tolerance."""
        if not math.isfinite(measured):
            return False
        if self.relation is CheckRelation.AT_LEAST:
            return bool(measured >= self.expected - self.tolerance)
        if self.relation is CheckRelation.AT_MOST:
            return bool(measured <= self.expected + self.tolerance)
        return bool(abs(measured - self.expected) <= self.tolerance)


@dataclass(frozen=True, eq=False)
class Fixture:
    """Named built-in problem with its table of expected values."""

    name: str
    problem: Problem
    checks: tuple[ExpectedCheck, ...]
