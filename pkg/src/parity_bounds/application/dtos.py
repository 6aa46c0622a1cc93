"""Application layer - DTOs (Data Transfer Objects)."""

import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, StrictFloat, model_validator

from parity_bounds.domain.linalg import Matrix
from parity_bounds.domain.models import (
    DecayScenario,
    DecayTrace,
    DensityState,
    GammaProvenance,
    ObservableFamily,
    Problem,
)

REPORT_SCHEMA = 1

ComplexEntry = tuple[StrictFloat, StrictFloat]
ComplexMatrixSpec = list[list[ComplexEntry]]


def encode_matrix(matrix: Matrix) -> ComplexMatrixSpec:
    """Row-major nested [re, im] pairs."""
    return [[(float(z.real), float(z.imag)) for z in row] for row in np.asarray(matrix)]


def decode_matrix(entries: ComplexMatrixSpec) -> Matrix:
    """Inverse of ``encode_matrix``."""
    return np.array([[complex(re, im) for re, im in row] for row in entries], dtype=np.complex128)


def _check_square(entries: ComplexMatrixSpec, dim: int, label: str) -> None:
    if len(entries) != dim:
        raise ValueError(f"{label} must be {dim}x{dim}, got {len(entries)} rows")
    for k, row in enumerate(entries):
        if len(row) != dim:
            raise ValueError(f"{label} row {k} has {len(row)} entries, expected {dim}")


class SiteSpec(BaseModel):
    """One tensor factor."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    dim: int = Field(ge=1)


class DecaySpec(BaseModel):
    """Depolarizing run settings."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True, allow_inf_nan=False)

    lam: float = Field(gt=0, alias="lambda")
    t_max: float = Field(gt=0)
    steps: int = Field(ge=2)
    epsilon: Optional[float] = Field(default=None, gt=0)


class ProblemSpec(BaseModel):
    """JSON problem document: sites, operator table and optional state and settings."""

    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    sites: list[SiteSpec] = Field(min_length=1)
    m: int = Field(ge=1)
    operators: list[list[ComplexMatrixSpec]]
    state: Optional[ComplexMatrixSpec] = None
    gamma: Optional[float] = None
    gamma_provenance: GammaProvenance = GammaProvenance.CERTIFIED_UPPER
    c_constants: Optional[list[float]] = None
    decay: Optional[DecaySpec] = None

    @property
    def dims(self) -> tuple[int, ...]:
        """Site dimensions."""
        return tuple(site.dim for site in self.sites)

    @model_validator(mode="after")
    def check_shapes(self) -> "ProblemSpec":
        dims = self.dims
        if len(self.operators) != self.m:
            raise ValueError(f"operators has {len(self.operators)} rows, m = {self.m}")
        for i, row in enumerate(self.operators):
            if len(row) != len(dims):
                raise ValueError(f"operators[{i}] has {len(row)} factors, expected {len(dims)}")
            for r, entries in enumerate(row):
                _check_square(entries, dims[r], f"operators[{i}][{r}]")
        if self.state is not None:
            _check_square(self.state, math.prod(dims), "state")
        if self.c_constants is not None:
            if len(self.c_constants) != len(dims):
                raise ValueError(
                    f"c_constants has {len(self.c_constants)} entries, expected {len(dims)}"
                )
            if any(c < 0 for c in self.c_constants):
                raise ValueError("c_constants entries must be >= 0")
        return self

    def to_family(self) -> ObservableFamily:
        """Validated observable family."""
        return ObservableFamily.from_terms(
            self.dims, [[decode_matrix(entries) for entries in row] for row in self.operators]
        )

    def to_state(self) -> Optional[DensityState]:
        """Validated density state, when one is given."""
        if self.state is None:
            return None
        return DensityState(dims=self.dims, matrix=decode_matrix(self.state))

    def to_problem(self) -> Problem:
        """Domain problem with every invariant checked."""
        decay = None
        if self.decay is not None:
            decay = DecayScenario(
                lam=self.decay.lam,
                t_max=self.decay.t_max,
                steps=self.decay.steps,
                epsilon=self.decay.epsilon,
            )
        return Problem(
            family=self.to_family(),
            state=self.to_state(),
            gamma=self.gamma,
            gamma_provenance=self.gamma_provenance,
            c_constants=tuple(self.c_constants) if self.c_constants is not None else None,
            decay=decay,
        )

    @classmethod
    def from_problem(cls, problem: Problem) -> "ProblemSpec":
        """Document form of a domain problem."""
        fam = problem.family
        decay = None
        if problem.decay is not None:
            decay = DecaySpec(
                lam=problem.decay.lam,
                t_max=problem.decay.t_max,
                steps=problem.decay.steps,
                epsilon=problem.decay.epsilon,
            )
        return cls(
            sites=[SiteSpec(dim=d) for d in fam.dims],
            m=fam.m,
            operators=[[encode_matrix(a) for a in row] for row in fam.ops],
            state=encode_matrix(problem.state.matrix) if problem.state is not None else None,
            gamma=problem.gamma,
            gamma_provenance=problem.gamma_provenance,
            c_constants=list(problem.c_constants) if problem.c_constants is not None else None,
            decay=decay,
        )


@dataclass
class RunOptions:
    """Flags shared by the subcommands."""

    seed: int = 0
    restarts: int = 32
    max_iters: int = 500
    tol: float = 1e-10
    max_dim: int = 4096
    exact: bool = False
    site_constants: bool = False
    gamma: Optional[float] = None
    t_max: Optional[float] = None
    steps: Optional[int] = None
    lam: Optional[float] = None
    epsilon: Optional[float] = None


@dataclass
class VerifyRowDto:
    """One line of the verify table."""

    fixture: str
    check: str
    measured: float
    expected: float
    tolerance: float
    relation: str
    passed: bool


@dataclass
class CommandReportDto:
    """Result of a subcommand: a JSON document, plus a trace for ``decay``."""

    command: str
    document: dict[str, Any]
    passed: bool = True
    trace: Optional[DecayTrace] = None
    rows: list[VerifyRowDto] = field(default_factory=list)
