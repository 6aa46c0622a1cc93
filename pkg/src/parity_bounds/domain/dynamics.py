"""Product depolarizing evolution and the excess decay bounds.

The local depolarizer at site r is rho -> e^(-t) rho + (1 - e^(-t)) Tr_r(rho) (x) I_r/d_r.
It is self-dual, so the same map drives states and observables, and centered
families decay exactly as e^(-nt) B.
"""

import math
from collections.abc import Sequence
from typing import Optional

import numpy as np
import structlog
from scipy.integrate import trapezoid

from parity_bounds.domain.correlation import total_correlation
from parity_bounds.domain.exceptions import NumericError, ValidationError
from parity_bounds.domain.linalg import Matrix, as_matrix, embed_identity, partial_trace_keep
from parity_bounds.domain.models import (
    DecayParams,
    DecayTrace,
    DensityState,
    ObservableFamily,
    PositivityWindow,
    WindowKind,
)
from parity_bounds.domain.observable import assemble_b, defect_report

logger = structlog.get_logger(__name__)

CENTERED_TOL = 1e-12
DUALITY_TOL = 1e-10
ENTROPY_DECAY_SLACK = 1e-9


def _check_time(t: float) -> None:
    if not t >= 0 or not math.isfinite(t):
        raise ValidationError(f"Time must be finite and >= 0, got {t}")


def _depolarize(matrix: Matrix, dims: Sequence[int], t: float) -> Matrix:
    keep = math.exp(-t)
    out = matrix
    for r in range(len(dims)):
        others = [s for s in range(len(dims)) if s != r]
        reduced = partial_trace_keep(out, dims, others)
        out = keep * out + (1.0 - keep) * embed_identity(reduced, dims, r)
    return out


def depolarize_state(rho: DensityState, t: float) -> DensityState:
    """rho_t under the product depolarizing semigroup, sites applied in ascending order."""
    _check_time(t)
    if t == 0:
        return rho
    return DensityState(dims=rho.dims, matrix=_depolarize(rho.matrix, rho.dims, t))


def depolarize_observable(matrix: Matrix, dims: Sequence[int], t: float) -> Matrix:
    """Heisenberg-picture evolution of an operator on the tensor space."""
    _check_time(t)
    matrix = as_matrix(matrix, name="observable")
    if matrix.shape[0] != math.prod(dims):
        raise ValidationError(f"observable has dim {matrix.shape[0]}, sites give {math.prod(dims)}")
    return _depolarize(matrix, tuple(dims), t)


def is_centered(fam: ObservableFamily) -> bool:
    """True when every local operator has zero normalized trace."""
    return all(
        abs(np.trace(a)) / fam.dims[r] <= CENTERED_TOL
        for row in fam.ops
        for r, a in enumerate(row)
    )


def heisenberg_decay(fam: ObservableFamily, t: float) -> float:
    """e^(-nt), the eigenvalue of the dual semigroup on a centered B."""
    _check_time(t)
    if not is_centered(fam):
        raise ValidationError("heisenberg_decay needs a centered family of traceless operators")
    return math.exp(-fam.n * t)


def excess_positivity_window(tr0: float, gamma: float, n: int) -> PositivityWindow:
    """Times at which e^(-nt) tr0 - gamma stays strictly positive."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if not tr0 > gamma:
        return PositivityWindow(kind=WindowKind.EMPTY)
    if gamma <= 0:
        return PositivityWindow(kind=WindowKind.ALL)
    return PositivityWindow(kind=WindowKind.INTERVAL, upper=math.log(tr0 / gamma) / n)


def _decay_prefactor(p: DecayParams) -> float:
    return math.sqrt(2.0 * p.itot0) * math.sqrt(p.denominator)


def decay_excess_bound(p: DecayParams, t: float) -> float:
    """e^(-lambda t) (2 I_0)^(1/2) M^(1/2)."""
    _check_time(t)
    return math.exp(-p.lam * t) * _decay_prefactor(p)


def survival_time(p: DecayParams, epsilon: float) -> float:
    """Time after which the excess is guaranteed to be at most ``epsilon``."""
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be > 0, got {epsilon}")
    prefactor = _decay_prefactor(p)
    if prefactor <= epsilon:
        return 0.0
    return max(0.0, math.log(prefactor / epsilon) / p.lam)


def integrated_excess_bound(p: DecayParams) -> float:
    """I_0 M / lambda, bounding the time integral of the squared excess."""
    return p.itot0 * p.denominator / p.lam


def decay_trace(
    fam: ObservableFamily,
    rho0: DensityState,
    gamma: float,
    t_max: float,
    steps: int,
    denominator: Optional[float] = None,
) -> DecayTrace:
    """Expectation, excess and itot lower bound on the uniform grid [0, t_max].

    Each grid point is evolved from rho0 directly. Centered families are
    cross-checked against e^(-nt) Tr(rho0 B).
    """
    if steps < 2:
        raise ValidationError(f"steps must be >= 2, got {steps}")
    if not t_max > 0:
        raise ValidationError(f"t_max must be > 0, got {t_max}")
    if fam.dims != rho0.dims:
        raise ValidationError(f"State dims {rho0.dims} do not match family dims {fam.dims}")
    if denominator is None:
        denominator = defect_report(fam).denominator
    if not denominator > 0:
        raise ValidationError(f"denominator must be > 0, got {denominator}")

    b = assemble_b(fam)
    tr0 = float(np.real(np.trace(rho0.matrix @ b)))
    centered = is_centered(fam)
    times = np.linspace(0.0, t_max, steps)
    values = np.empty(steps)
    for k, t in enumerate(times):
        rho_t = depolarize_state(rho0, float(t))
        values[k] = float(np.real(np.trace(rho_t.matrix @ b)))
        if centered:
            predicted = math.exp(-fam.n * t) * tr0
            mismatch = abs(values[k] - predicted)
            if mismatch > DUALITY_TOL:
                raise NumericError(
                    f"Dense evolution deviates from e^(-nt) decay by {mismatch:.3e} at t = {t}"
                )

    excess_column = np.maximum(values - gamma, 0.0)
    itot_column = excess_column**2 / (2.0 * denominator)
    logger.info(
        "Decay trace computed",
        steps=steps,
        t_max=t_max,
        centered=centered,
        final_excess=float(excess_column[-1]),
    )
    return DecayTrace(
        times=times,
        expectation=values,
        excess=excess_column,
        itot_lb=itot_column,
    )


def entropy_decay_violations(
    rho0: DensityState, lam: float, times: Sequence[float]
) -> list[tuple[float, float, float]]:
    """Grid points where I_tot(rho_t) exceeds e^(-2 lambda t) I_tot(rho0).

    Returns (t, I_tot(rho_t), allowed) for each violation.
    """
    if not lam > 0:
        raise ValidationError(f"lambda must be > 0, got {lam}")
    itot0 = total_correlation(rho0)
    violations = []
    for t in times:
        value = total_correlation(depolarize_state(rho0, float(t)))
        allowed = math.exp(-2.0 * lam * t) * itot0
        if value > allowed + ENTROPY_DECAY_SLACK:
            violations.append((float(t), value, allowed))
    if violations:
        logger.warning("Entropy decay hypothesis violated", lam=lam, count=len(violations))
    return violations


def integrate_squared_excess(trace: DecayTrace) -> float:
    """Trapezoid integral of excess^2 over the trace's time grid."""
    return float(trapezoid(np.asarray(trace.excess) ** 2, np.asarray(trace.times)))
