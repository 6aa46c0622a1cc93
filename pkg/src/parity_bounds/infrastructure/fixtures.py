"""Built-in problems generated from the Pauli matrices, with their known values."""

import math
import re

import numpy as np
import structlog

from parity_bounds.domain.exceptions import UsageError
from parity_bounds.domain.models import (
    CheckRelation,
    DecayScenario,
    DensityState,
    ExpectedCheck,
    Fixture,
    GammaProvenance,
    ObservableFamily,
    Problem,
)
from parity_bounds.domain.services import IFixtureRepository

logger = structlog.get_logger(__name__)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)

_PAULI_SITE = re.compile(r"^pauli-site-(\d+)$")


def tripartite_pauli_family() -> ObservableFamily:
    """X(x)Y(x)X + X(x)Y(x)Z + Z(x)Z(x)Z."""
    return ObservableFamily.from_terms(
        (2, 2, 2),
        [
            (PAULI_X, PAULI_Y, PAULI_X),
            (PAULI_X, PAULI_Y, PAULI_Z),
            (PAULI_Z, PAULI_Z, PAULI_Z),
        ],
    )


def chsh_family() -> ObservableFamily:
    """A1 B1 + A1 B2 + A2 B1 - A2 B2 with A = (Z, X) and B = ((Z + X)/sqrt2, (Z - X)/sqrt2)."""
    a1, a2 = PAULI_Z, PAULI_X
    b1 = (PAULI_Z + PAULI_X) / math.sqrt(2)
    b2 = (PAULI_Z - PAULI_X) / math.sqrt(2)
    return ObservableFamily.from_terms((2, 2), [(a1, b1), (a1, b2), (a2, b1), (a2, -b2)])


def pauli_site_family(n: int) -> ObservableFamily:
    """X^(x)n + Y^(x)n + Z^(x)n."""
    if n < 2:
        raise UsageError(f"pauli-site fixtures need n >= 2, got {n}")
    return ObservableFamily.from_terms(
        (2,) * n, [(p,) * n for p in (PAULI_X, PAULI_Y, PAULI_Z)]
    )


def bell_state() -> DensityState:
    """Phi+ = (|00> + |11>)/sqrt2."""
    return DensityState.from_pure(np.array([1, 0, 0, 1], dtype=np.complex128), (2, 2))


def _check(
    name: str,
    expected: float,
    tolerance: float,
    relation: CheckRelation = CheckRelation.EQUAL,
) -> ExpectedCheck:
    return ExpectedCheck(check=name, expected=expected, tolerance=tolerance, relation=relation)


class FixtureRepository(IFixtureRepository):
    """Fixtures are generated in code on every call."""

    def names(self) -> list[str]:
        """Fixtures run by ``verify``."""
        return ["tripartite-pauli", "chsh", "pauli-site-3", "pauli-site-4", "depolarizing-demo"]

    def get(self, name: str) -> Fixture:
        """Build the named fixture; ``pauli-site-N`` accepts any N >= 2."""
        logger.debug("Building fixture", fixture=name)
        if name == "tripartite-pauli":
            return self._tripartite_pauli()
        if name == "chsh":
            return self._chsh()
        if name == "depolarizing-demo":
            return self._depolarizing_demo()
        match = _PAULI_SITE.match(name)
        if match:
            return self._pauli_site(int(match.group(1)))
        raise UsageError(
            f"Unknown fixture '{name}'; available: {', '.join(self.names())} (pauli-site-N, N >= 2)"
        )

    def _tripartite_pauli(self) -> Fixture:
        return Fixture(
            name="tripartite-pauli",
            problem=Problem(family=tripartite_pauli_family()),
            checks=(
                _check("phi_12", 0.0, 1e-12),
                _check("phi_13", 0.0, 1e-12),
                _check("phi_23", 2.0, 1e-12),
                _check("denominator", 5.0, 1e-12),
                _check("exact_norm_sq", 5.0, 1e-9),
                _check("norm_slack", 0.0, 1e-9),
            ),
        )

    def _chsh(self) -> Fixture:
        return Fixture(
            name="chsh",
            problem=Problem(
                family=chsh_family(),
                state=bell_state(),
                gamma=math.sqrt(2),
                gamma_provenance=GammaProvenance.EXACT,
            ),
            checks=(
                _check("seesaw_gamma", math.sqrt(2), 1e-6),
                _check("certificate_mismatch", 0.0, 1e-10),
                _check("threshold_sandwich_margin", 0.0, 1e-9, CheckRelation.AT_LEAST),
                _check("denominator", 8.0, 1e-12),
                _check("expectation", 2 * math.sqrt(2), 1e-10),
                _check("excess", math.sqrt(2), 1e-10),
                _check("trace_dist_lb", 0.5, 1e-10),
                _check("trace_distance_margin", 0.0, 1e-9, CheckRelation.AT_LEAST),
                _check("itot_lb", 0.125, 1e-9),
                _check("itot_exact", 2 * math.log(2), 1e-9),
                _check("itot_gap", 0.0, 1e-9, CheckRelation.AT_LEAST),
            ),
        )

    def _pauli_site(self, n: int) -> Fixture:
        denominator = 3.0 if n % 2 else 9.0
        checks = [_check(f"site_constant_{r + 1}", 1.0, 1e-6) for r in range(n)]
        checks += [
            _check("explicit_bound", 1.0, 1e-6),
            _check("seesaw_gamma", 1.0, 1e-6),
            _check("denominator", denominator, 1e-12),
            _check("itot_coefficient", 1.0 / (2.0 * denominator), 1e-12),
        ]
        return Fixture(
            name=f"pauli-site-{n}",
            problem=Problem(family=pauli_site_family(n), c_constants=(1.0,) * n),
            checks=tuple(checks),
        )

    def _depolarizing_demo(self) -> Fixture:
        window_upper = math.log(2) / 2
        decay = DecayScenario(lam=0.5, t_max=1.0, steps=101)
        grid_step = decay.t_max / (decay.steps - 1)
        return Fixture(
            name="depolarizing-demo",
            problem=Problem(
                family=chsh_family(),
                state=bell_state(),
                gamma=math.sqrt(2),
                gamma_provenance=GammaProvenance.EXACT,
                decay=decay,
            ),
            checks=(
                _check("window_upper", window_upper, 1e-12),
                _check("window_crossing", window_upper, grid_step),
                _check("duality_max_error", 0.0, 1e-10),
                _check("entropy_decay_violations", 0.0, 0.0),
                _check("integrated_excess_margin", 0.0, 0.0, CheckRelation.AT_LEAST),
            ),
        )
