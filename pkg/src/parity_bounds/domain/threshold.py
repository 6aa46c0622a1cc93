"""Product threshold estimation and the l2 site constants.

Gamma_prod(B) = sup over product states of Tr(sigma B) is estimated from below
by see-saw coordinate ascent; the site constants C_r give the explicit upper
bound prod C_r^(1/2).
"""

import contextvars
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
import structlog

from parity_bounds.domain.exceptions import ValidationError
from parity_bounds.domain.linalg import Matrix, RealVector, as_matrix, hermitian_eig
from parity_bounds.domain.models import ObservableFamily, ProductState, ThresholdResult

logger = structlog.get_logger(__name__)

DEGENERACY_TOL = 1e-12
TRACELESS_TOL = 1e-12

_PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


def expectation_vector(fam: ObservableFamily, r: int, sigma_r: Matrix) -> RealVector:
    """(Tr(sigma_r a_i^(r)))_i, real because both factors are Hermitian."""
    if not 0 <= r < fam.n:
        raise ValidationError(f"Site index {r} out of range for {fam.n} sites")
    sigma_r = as_matrix(sigma_r, name="sigma_r")
    if sigma_r.shape[0] != fam.dims[r]:
        raise ValidationError(
            f"sigma_r has dim {sigma_r.shape[0]}, site {r} has dim {fam.dims[r]}"
        )
    ops = np.stack(fam.site_operators(r))
    return np.asarray(np.real(np.einsum("ij,kji->k", sigma_r, ops)), dtype=np.float64)


def _expectation_table(fam: ObservableFamily, factors: Sequence[Matrix]) -> np.ndarray:
    return np.stack([expectation_vector(fam, r, factors[r]) for r in range(fam.n)])


def product_value(fam: ObservableFamily, sigma: ProductState) -> float:
    """Tr(sigma B) = sum_i prod_r x_i^(r), without forming the tensor product."""
    if sigma.dims != fam.dims:
        raise ValidationError(f"Product state dims {sigma.dims} do not match {fam.dims}")
    table = _expectation_table(fam, sigma.factors)
    return float(np.sum(np.prod(table, axis=0)))


def _random_pure_factor(rng: np.random.Generator, d: int) -> Matrix:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def _top_projector(k: Matrix) -> tuple[Matrix, bool]:
    eig = hermitian_eig(k)
    v = eig.top_eigenvector
    degenerate = (
        len(eig.eigenvalues) > 1
        and eig.eigenvalues[-1] - eig.eigenvalues[-2] < DEGENERACY_TOL
    )
    return np.outer(v, v.conj()), bool(degenerate)


def effective_operator(fam: ObservableFamily, r: int, table: np.ndarray) -> Matrix:
    """K_r = sum_i (prod_{s != r} x_i^(s)) a_i^(r)."""
    weights = np.prod(np.delete(table, r, axis=0), axis=0)
    k = np.zeros((fam.dims[r], fam.dims[r]), dtype=np.complex128)
    for w, a in zip(weights, fam.site_operators(r)):
        k += w * a
    return k


@dataclass(frozen=True)
class _RestartOutcome:
    value: float
    factors: tuple[Matrix, ...]
    sweeps: int
    converged: bool
    history: tuple[float, ...]
    degenerate_updates: int


class SeesawOptimizer:
    """Multi-restart see-saw ascent over product states.

    Each restart draws random pure factors from its own seeded substream, so the
    result depends only on (family, restarts, seed) and not on scheduling.
    """

    def __init__(
        self,
        restarts: int = 32,
        max_iters: int = 500,
        tol: float = 1e-10,
        seed: int = 0,
        max_workers: Optional[int] = None,
    ):
        if restarts < 1:
            raise ValidationError(f"restarts must be >= 1, got {restarts}")
        if max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {max_iters}")
        self.restarts = restarts
        self.max_iters = max_iters
        self.tol = tol
        self.seed = seed
        self.max_workers = max_workers

    def optimize(self, fam: ObservableFamily) -> ThresholdResult:
        """Return the best certified product value over all restarts."""
        streams = np.random.SeedSequence(self.seed).spawn(self.restarts)
        if self.max_workers and self.max_workers > 1:
            # worker threads run under a copy of the caller's numeric policy
            context = contextvars.copy_context()
            with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
                outcomes = list(
                    pool.map(lambda s: context.copy().run(self._run_restart, fam, s), streams)
                )
        else:
            outcomes = [self._run_restart(fam, s) for s in streams]

        # strict '>' keeps the lowest restart index on ties
        best_index = 0
        for k, outcome in enumerate(outcomes):
            if outcome.value > outcomes[best_index].value:
                best_index = k
        best = outcomes[best_index]
        certificate = ProductState(factors=best.factors)
        gamma = product_value(fam, certificate)

        logger.info(
            "Seesaw threshold estimated",
            gamma=gamma,
            best_restart=best_index,
            sweeps=best.sweeps,
            converged=best.converged,
        )
        return ThresholdResult(
            gamma=gamma,
            certificate=certificate,
            restarts_used=self.restarts,
            iterations=sum(o.sweeps for o in outcomes),
            converged=best.converged,
            history=best.history,
            degenerate_updates=sum(o.degenerate_updates for o in outcomes),
        )

    def _run_restart(
        self, fam: ObservableFamily, stream: np.random.SeedSequence
    ) -> _RestartOutcome:
        rng = np.random.default_rng(stream)
        factors = [_random_pure_factor(rng, d) for d in fam.dims]
        table = _expectation_table(fam, factors)
        value = float(np.sum(np.prod(table, axis=0)))
        history = [value]
        degenerate_updates = 0
        converged = False
        sweeps = 0

        while sweeps < self.max_iters:
            sweeps += 1
            for r in range(fam.n):
                projector, degenerate = _top_projector(effective_operator(fam, r, table))
                degenerate_updates += int(degenerate)
                factors[r] = projector
                table[r] = expectation_vector(fam, r, projector)
            new_value = float(np.sum(np.prod(table, axis=0)))
            history.append(new_value)
            improvement = new_value - value
            value = new_value
            if improvement < self.tol:
                converged = True
                break

        logger.debug("Seesaw restart finished", value=value, sweeps=sweeps, converged=converged)
        return _RestartOutcome(
            value=value,
            factors=tuple(factors),
            sweeps=sweeps,
            converged=converged,
            history=tuple(history),
            degenerate_updates=degenerate_updates,
        )


def seesaw_threshold(
    fam: ObservableFamily,
    restarts: int = 32,
    max_iters: int = 500,
    tol: float = 1e-10,
    seed: int = 0,
) -> ThresholdResult:
    """Certified lower bound on Gamma_prod(B) from a multi-restart see-saw."""
    return SeesawOptimizer(restarts=restarts, max_iters=max_iters, tol=tol, seed=seed).optimize(fam)


def bloch_site_constant(fam: ObservableFamily, r: int) -> Optional[float]:
    """lambda_max(sum_i w_i w_i^T) for a qubit site with traceless operators, else None."""
    if fam.dims[r] != 2:
        return None
    ops = fam.site_operators(r)
    if any(abs(np.trace(a)) / 2 > TRACELESS_TOL for a in ops):
        return None
    w = np.array(
        [[np.real(np.trace(a @ p)) / 2 for p in (_PAULI_X, _PAULI_Y, _PAULI_Z)] for a in ops]
    )
    gram = w.T @ w
    return float(np.linalg.eigvalsh(gram)[-1])


def l2_site_constant(
    fam: ObservableFamily,
    r: int,
    restarts: int = 32,
    seed: int = 0,
    max_iters: int = 500,
    tol: float = 1e-13,
) -> float:
    """Max over states sigma of sum_i Tr(sigma a_i^(r))^2.

    The objective is convex in sigma, so pure states suffice; each restart runs
    conditional-gradient steps sigma <- top projector of sum_i x_i a_i^(r).
    """
    if not 0 <= r < fam.n:
        raise ValidationError(f"Site index {r} out of range for {fam.n} sites")
    ops = fam.site_operators(r)
    best = 0.0
    for stream in np.random.SeedSequence([seed, r]).spawn(restarts):
        rng = np.random.default_rng(stream)
        sigma = _random_pure_factor(rng, fam.dims[r])
        x = expectation_vector(fam, r, sigma)
        value = float(x @ x)
        for _ in range(max_iters):
            gradient = sum((xi * a for xi, a in zip(x, ops)), np.zeros_like(sigma))
            sigma, _ = _top_projector(gradient)
            x = expectation_vector(fam, r, sigma)
            new_value = float(x @ x)
            improvement = new_value - value
            value = new_value
            if improvement < tol:
                break
        best = max(best, value)

    closed_form = bloch_site_constant(fam, r)
    if closed_form is not None:
        best = max(best, closed_form)
    logger.debug("Site constant computed", site=r, value=best, closed_form=closed_form)
    return best


def site_constants(fam: ObservableFamily, restarts: int = 32, seed: int = 0) -> list[float]:
    """C_r for every site."""
    return [l2_site_constant(fam, r, restarts=restarts, seed=seed) for r in range(fam.n)]


def explicit_threshold_bound(c: Sequence[float]) -> float:
    """prod_r C_r^(1/2), an upper bound on Gamma_prod(B) when each C_r bounds site r."""
    c = [float(v) for v in c]
    if any(v < 0 or not math.isfinite(v) for v in c):
        raise ValidationError(f"Site constants must be finite and >= 0, got {c}")
    return math.prod(math.sqrt(v) for v in c)
