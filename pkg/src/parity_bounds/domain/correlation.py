"""Total correlation, excess above a threshold and the correlation bound chain."""

from collections.abc import Sequence
from typing import Optional

import numpy as np
import structlog

from parity_bounds.domain.exceptions import NumericError, ValidationError
from parity_bounds.domain.linalg import (
    Matrix,
    kron_all,
    partial_trace,
    relative_entropy,
    trace_norm,
)
from parity_bounds.domain.models import (
    CorrelationReport,
    DefectReport,
    DensityState,
    GammaProvenance,
    ObservableFamily,
)
from parity_bounds.domain.observable import assemble_b, defect_report
from parity_bounds.domain.policy import get_policy
from parity_bounds.domain.threshold import explicit_threshold_bound

logger = structlog.get_logger(__name__)


def _check_dims(fam: ObservableFamily, rho: DensityState) -> None:
    if fam.dims != rho.dims:
        raise ValidationError(f"State dims {rho.dims} do not match family dims {fam.dims}")


def expectation(fam: ObservableFamily, rho: DensityState) -> float:
    """Tr(rho B) on the dense tensor space."""
    _check_dims(fam, rho)
    return float(np.real(np.trace(rho.matrix @ assemble_b(fam))))


def marginal_product(rho: DensityState) -> Matrix:
    """rho_1 (x) ... (x) rho_n built from the single-site marginals."""
    return kron_all(partial_trace(rho, r) for r in range(rho.n))


def total_correlation(rho: DensityState) -> float:
    """I_tot(rho) = D(rho || rho_1 (x) ... (x) rho_n), natural log."""
    value = relative_entropy(rho.matrix, marginal_product(rho))
    if value < 0:
        clip_tol = get_policy().clip_tol
        if value < -clip_tol:
            raise NumericError(f"Total correlation {value:.3e} is below -{clip_tol:g}")
        value = 0.0
    return value


def product_trace_distance(rho: DensityState) -> float:
    """||rho - rho_1 (x) ... (x) rho_n||_1."""
    return trace_norm(rho.matrix - marginal_product(rho))


def excess(fam: ObservableFamily, rho: DensityState, gamma: float) -> float:
    """(Tr(rho B) - gamma)_+."""
    return max(expectation(fam, rho) - gamma, 0.0)


def _check_denominator(denominator: float) -> None:
    if not denominator > 0:
        raise ValidationError(f"denominator must be > 0, got {denominator}")


def trace_distance_lower_bound(excess: float, denominator: float) -> float:
    """excess / denominator^(1/2), a lower bound on the distance to the product set."""
    _check_denominator(denominator)
    return excess / float(np.sqrt(denominator))


def itot_lower_bound(excess: float, denominator: float) -> float:
    """excess^2 / (2 denominator), the Pinsker lower bound on I_tot."""
    _check_denominator(denominator)
    return excess**2 / (2.0 * denominator)


def correlation_report(
    fam: ObservableFamily,
    rho: DensityState,
    gamma: float,
    provenance: GammaProvenance,
    report: Optional[DefectReport] = None,
    compute_exact: bool = True,
) -> CorrelationReport:
    """Excess and bound chain for ``rho`` against a threshold of stated provenance."""
    _check_dims(fam, rho)
    if report is None:
        report = defect_report(fam)
    tr = expectation(fam, rho)
    delta = max(tr - gamma, 0.0)
    itot_exact = total_correlation(rho) if compute_exact else None

    if provenance is GammaProvenance.HEURISTIC:
        logger.warning("Heuristic threshold used; the bound chain is not certified", gamma=gamma)
    logger.info(
        "Correlation report computed",
        expectation=tr,
        gamma=gamma,
        provenance=provenance.value,
        excess=delta,
        itot_exact=itot_exact,
    )
    return CorrelationReport(
        expectation=tr,
        gamma_used=gamma,
        gamma_provenance=provenance,
        excess=delta,
        denominator=report.denominator,
        trace_dist_lb=trace_distance_lower_bound(delta, report.denominator),
        itot_lb=itot_lower_bound(delta, report.denominator),
        itot_exact=itot_exact,
    )


def explicit_itot_bound(
    fam: ObservableFamily,
    rho: DensityState,
    c: Sequence[float],
    report: Optional[DefectReport] = None,
    compute_exact: bool = True,
    user_supplied: bool = False,
) -> CorrelationReport:
    """Bound chain with gamma = prod C_r^(1/2).

    Constants from ``l2_site_constant`` give a certified upper threshold;
    ``user_supplied`` marks constants the caller vouches for.
    """
    if len(c) != fam.n:
        raise ValidationError(f"Expected {fam.n} site constants, got {len(c)}")
    provenance = (
        GammaProvenance.USER_CONSTANTS if user_supplied else GammaProvenance.CERTIFIED_UPPER
    )
    return correlation_report(
        fam,
        rho,
        explicit_threshold_bound(c),
        provenance,
        report=report,
        compute_exact=compute_exact,
    )
