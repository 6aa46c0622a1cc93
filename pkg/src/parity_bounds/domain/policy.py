"""Numeric policy shared by every domain module.

The active policy lives in a context variable so concurrent callers can run
with different settings without touching shared state.
"""

from collections.abc import Iterator
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Any

from pydantic import BaseModel, ConfigDict, Field


class NumericPolicy(BaseModel):
    """Tolerances and caps used by the numerical core."""

    model_config = ConfigDict(frozen=True)

    max_dim: int = Field(default=4096, ge=1)
    log_clamp: float = Field(default=1e-14, gt=0.0)
    hermitian_tol: float = Field(default=1e-10, ge=0.0)
    psd_tol: float = Field(default=1e-10, ge=0.0)
    trace_tol: float = Field(default=1e-12, ge=0.0)
    contraction_tol: float = Field(default=1e-9, ge=0.0)
    support_tol: float = Field(default=1e-8, ge=0.0)
    clip_tol: float = Field(default=1e-9, ge=0.0)


_ACTIVE_POLICY: ContextVar[NumericPolicy] = ContextVar(
    "parity_bounds_numeric_policy", default=NumericPolicy()
)


def get_policy() -> NumericPolicy:
    """Return the numeric policy active in the current context."""
    return _ACTIVE_POLICY.get()


@contextmanager
def numeric_policy(**overrides: Any) -> Iterator[NumericPolicy]:
    """Run a block with selected policy fields overridden.

    Example:
        with numeric_policy(max_dim=64):
            assemble_b(family)
    """
    policy = NumericPolicy.model_validate({**get_policy().model_dump(), **overrides})
    token = _ACTIVE_POLICY.set(policy)
    try:
        yield policy
    finally:
        _ACTIVE_POLICY.reset(token)
