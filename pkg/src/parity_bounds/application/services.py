"""Application services - subcommand orchestration and fixture verification."""

import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Optional

import numpy as np
import structlog

from parity_bounds.application.dtos import (
    CommandReportDto,
    RunOptions,
    VerifyRowDto,
    encode_matrix,
)
from parity_bounds.domain.correlation import (
    correlation_report,
    explicit_itot_bound,
    product_trace_distance,
    total_correlation,
)
from parity_bounds.domain.dynamics import (
    decay_excess_bound,
    decay_trace,
    entropy_decay_violations,
    excess_positivity_window,
    integrate_squared_excess,
    integrated_excess_bound,
    survival_time,
)
from parity_bounds.domain.exceptions import ParityBoundsException, UsageError
from parity_bounds.domain.models import (
    CorrelationReport,
    DecayParams,
    DecayScenario,
    DecayTrace,
    DefectReport,
    Fixture,
    GammaProvenance,
    PositivityWindow,
    Problem,
    ThresholdResult,
)
from parity_bounds.domain.observable import defect_report, defect_weight
from parity_bounds.domain.policy import numeric_policy
from parity_bounds.domain.services import IFixtureRepository
from parity_bounds.domain.threshold import (
    SeesawOptimizer,
    explicit_threshold_bound,
    l2_site_constant,
    product_value,
    site_constants,
)

logger = structlog.get_logger(__name__)

COMMANDS = ("defects", "norm", "threshold", "bound", "decay", "verify")
DEFAULT_T_MAX = 1.0
DEFAULT_STEPS = 101

_PHI_CHECK = re.compile(r"^phi_(\d)(\d)$")
_SITE_CHECK = re.compile(r"^site_constant_(\d+)$")


@dataclass(frozen=True)
class _DecaySettings:
    """Decay grid after flag overrides; the rate stays optional."""

    t_max: float
    steps: int
    lam: Optional[float] = None
    epsilon: Optional[float] = None


class AnalysisService:
    """Application service behind every subcommand."""

    def __init__(self, fixture_repository: IFixtureRepository):
        self.fixture_repository = fixture_repository

    def run(
        self, command: str, problem: Optional[Problem], options: RunOptions
    ) -> CommandReportDto:
        """Run ``command`` on ``problem`` (``verify`` ignores the problem)."""
        if command not in COMMANDS:
            raise UsageError(
                f"Unknown subcommand '{command}'; expected one of {', '.join(COMMANDS)}"
            )
        if command != "verify" and problem is None:
            raise UsageError(f"'{command}' needs a problem document or --fixture")

        logger.info("Running subcommand", command=command, seed=options.seed)
        with numeric_policy(max_dim=options.max_dim):
            if command == "verify":
                return self.verify(options)
            assert problem is not None
            handler: Callable[[Problem, RunOptions], CommandReportDto] = getattr(
                self, f"_run_{command}"
            )
            return handler(problem, options)

    def _run_defects(self, problem: Problem, options: RunOptions) -> CommandReportDto:
        report = defect_report(problem.family, compute_exact=options.exact)
        return CommandReportDto(
            command="defects", document={"defects": self._convert_defect_report(report)}
        )

    def _run_norm(self, problem: Problem, options: RunOptions) -> CommandReportDto:
        report = defect_report(problem.family, compute_exact=True)
        return CommandReportDto(
            command="norm", document={"defects": self._convert_defect_report(report)}
        )

    def _run_threshold(self, problem: Problem, options: RunOptions) -> CommandReportDto:
        result = self._optimizer(options).optimize(problem.family)
        document: dict[str, Any] = {"threshold": self._convert_threshold_result(result)}
        if options.site_constants:
            constants = site_constants(problem.family, restarts=options.restarts, seed=options.seed)
            document["site_constants"] = constants
            document["explicit_bound"] = explicit_threshold_bound(constants)
        return CommandReportDto(command="threshold", document=document)

    def _run_bound(self, problem: Problem, options: RunOptions) -> CommandReportDto:
        if problem.state is None:
            raise UsageError("'bound' needs a state in the problem document or a fixture with one")
        report = defect_report(problem.family)
        correlation = self._correlation(problem, options, report)
        return CommandReportDto(
            command="bound", document={"bound": self._convert_correlation_report(correlation)}
        )

    def _run_decay(self, problem: Problem, options: RunOptions) -> CommandReportDto:
        if problem.state is None:
            raise UsageError("'decay' needs an initial state")
        scenario = self._decay_scenario(problem, options)
        report = defect_report(problem.family)
        correlation = self._correlation(problem, options, report)
        gamma = correlation.gamma_used

        trace = decay_trace(
            problem.family,
            problem.state,
            gamma,
            scenario.t_max,
            scenario.steps,
            denominator=report.denominator,
        )
        window = excess_positivity_window(correlation.expectation, gamma, problem.family.n)
        summary: dict[str, Any] = {
            "gamma_used": gamma,
            "gamma_provenance": correlation.gamma_provenance.value,
            "denominator": report.denominator,
            "window": self._convert_window(window),
            "integrated_excess": integrate_squared_excess(trace),
        }
        if scenario.lam is not None:
            itot0 = correlation.itot_exact if correlation.itot_exact is not None else 0.0
            params = DecayParams(lam=scenario.lam, itot0=itot0, denominator=report.denominator)
            summary["lambda"] = scenario.lam
            summary["itot0"] = itot0
            summary["decay_bound_at_t_max"] = decay_excess_bound(params, scenario.t_max)
            summary["integrated_excess_bound"] = integrated_excess_bound(params)
            summary["entropy_decay_violations"] = len(
                entropy_decay_violations(problem.state, scenario.lam, trace.times)
            )
            if scenario.epsilon is not None:
                summary["epsilon"] = scenario.epsilon
                summary["survival_time"] = survival_time(params, scenario.epsilon)

        return CommandReportDto(command="decay", document={"decay": summary}, trace=trace)

    def verify(self, options: RunOptions) -> CommandReportDto:
        """Measure every fixture check and compare it with the expected value."""
        rows: list[VerifyRowDto] = []
        for name in self.fixture_repository.names():
            fixture = self.fixture_repository.get(name)
            measurements = FixtureMeasurements(fixture, options)
            for check in fixture.checks:
                try:
                    measured = measurements.measure(check.check)
                except ParityBoundsException as e:
                    logger.error(
                        "Check could not be measured",
                        fixture=name,
                        check=check.check,
                        error=str(e),
                    )
                    measured = math.nan
                rows.append(
                    VerifyRowDto(
                        fixture=name,
                        check=check.check,
                        measured=measured,
                        expected=check.expected,
                        tolerance=check.tolerance,
                        relation=check.relation.value,
                        passed=check.passes(measured),
                    )
                )

        passed = all(row.passed for row in rows)
        logger.info("Verification finished", checks=len(rows), passed=passed)
        return CommandReportDto(
            command="verify",
            document={
                "passed": passed,
                "checks": [self._convert_verify_row(row) for row in rows],
            },
            passed=passed,
            rows=rows,
        )

    def _optimizer(self, options: RunOptions) -> SeesawOptimizer:
        return SeesawOptimizer(
            restarts=options.restarts,
            max_iters=options.max_iters,
            tol=options.tol,
            seed=options.seed,
        )

    def _correlation(
        self, problem: Problem, options: RunOptions, report: DefectReport
    ) -> CorrelationReport:
        """Threshold preference: --gamma, the document's gamma, its constants, computed C_r."""
        assert problem.state is not None
        if options.gamma is not None:
            return correlation_report(
                problem.family,
                problem.state,
                options.gamma,
                GammaProvenance.CERTIFIED_UPPER,
                report,
            )
        if problem.gamma is not None:
            return correlation_report(
                problem.family, problem.state, problem.gamma, problem.gamma_provenance, report
            )
        if problem.c_constants is not None:
            return explicit_itot_bound(
                problem.family, problem.state, problem.c_constants, report, user_supplied=True
            )
        constants = site_constants(problem.family, restarts=options.restarts, seed=options.seed)
        return explicit_itot_bound(problem.family, problem.state, constants, report)

    def _decay_scenario(self, problem: Problem, options: RunOptions) -> _DecaySettings:
        base = problem.decay
        t_max = options.t_max if options.t_max is not None else DEFAULT_T_MAX
        steps = options.steps if options.steps is not None else DEFAULT_STEPS
        lam = options.lam
        epsilon = options.epsilon
        if base is not None:
            t_max = base.t_max if options.t_max is None else t_max
            steps = base.steps if options.steps is None else steps
            lam = base.lam if lam is None else lam
            epsilon = base.epsilon if epsilon is None else epsilon
        if steps < 2:
            raise UsageError(f"--steps must be >= 2, got {steps}")
        if not t_max > 0:
            raise UsageError(f"--t-max must be > 0, got {t_max}")
        if lam is not None and not lam > 0:
            raise UsageError(f"--lambda must be > 0, got {lam}")
        if epsilon is not None and not epsilon > 0:
            raise UsageError(f"--epsilon must be > 0, got {epsilon}")
        return _DecaySettings(t_max=t_max, steps=steps, lam=lam, epsilon=epsilon)

    def _convert_defect_report(self, report: DefectReport) -> dict[str, Any]:
        """Convert a defect report to its JSON form."""
        return {
            "m": report.m,
            "phi": report.phi.tolist(),
            "defect_sum": report.defect_sum,
            "denominator": report.denominator,
            "exact_norm_sq": report.exact_norm_sq,
            "bound_satisfied": report.bound_satisfied,
            "slack": report.slack,
        }

    def _convert_threshold_result(self, result: ThresholdResult) -> dict[str, Any]:
        """Convert a see-saw result, certificate included, to its JSON form."""
        return {
            "gamma": result.gamma,
            "converged": result.converged,
            "restarts_used": result.restarts_used,
            "iterations": result.iterations,
            "degenerate_updates": result.degenerate_updates,
            "history": list(result.history),
            "certificate": [encode_matrix(f) for f in result.certificate.factors],
        }

    def _convert_correlation_report(self, report: CorrelationReport) -> dict[str, Any]:
        """Convert a correlation report to its JSON form."""
        return {
            "expectation": report.expectation,
            "gamma_used": report.gamma_used,
            "gamma_provenance": report.gamma_provenance.value,
            "bound_valid": report.bound_valid,
            "excess": report.excess,
            "denominator": report.denominator,
            "trace_dist_lb": report.trace_dist_lb,
            "itot_lb": report.itot_lb,
            "itot_exact": report.itot_exact,
            "gap": report.gap,
        }

    def _convert_window(self, window: PositivityWindow) -> dict[str, Any]:
        return {"kind": window.kind.value, "upper": window.upper}

    def _convert_verify_row(self, row: VerifyRowDto) -> dict[str, Any]:
        return {
            "fixture": row.fixture,
            "check": row.check,
            "measured": None if math.isnan(row.measured) else row.measured,
            "expected": row.expected,
            "tolerance": row.tolerance,
            "relation": row.relation,
            "passed": row.passed,
        }


class FixtureMeasurements:
    """Lazily computed quantities of one fixture, looked up by check name."""

    def __init__(self, fixture: Fixture, options: RunOptions):
        self.fixture = fixture
        self.problem = fixture.problem
        self.options = options

    def measure(self, check: str) -> float:
        """Measured value for a check name."""
        phi = _PHI_CHECK.match(check)
        if phi:
            i, j = int(phi.group(1)) - 1, int(phi.group(2)) - 1
            return defect_weight(self.problem.family, i, j)
        site = _SITE_CHECK.match(check)
        if site:
            return self.site_constants[int(site.group(1)) - 1]
        measure = getattr(self, f"_measure_{check}", None)
        if measure is None:
            raise UsageError(f"No measurement named '{check}'")
        return float(measure())

    @cached_property
    def defects(self) -> DefectReport:
        return defect_report(self.problem.family, compute_exact=True)

    @cached_property
    def threshold(self) -> ThresholdResult:
        return SeesawOptimizer(
            restarts=self.options.restarts,
            max_iters=self.options.max_iters,
            tol=self.options.tol,
            seed=self.options.seed,
        ).optimize(self.problem.family)

    @cached_property
    def site_constants(self) -> list[float]:
        return [
            l2_site_constant(
                self.problem.family, r, restarts=self.options.restarts, seed=self.options.seed
            )
            for r in range(self.problem.family.n)
        ]

    @cached_property
    def correlation(self) -> CorrelationReport:
        if self.problem.state is None or self.problem.gamma is None:
            raise UsageError(f"Fixture '{self.fixture.name}' has no state and threshold")
        return correlation_report(
            self.problem.family,
            self.problem.state,
            self.problem.gamma,
            self.problem.gamma_provenance,
            self.defects,
        )

    @cached_property
    def scenario(self) -> DecayScenario:
        if self.problem.decay is None:
            raise UsageError(f"Fixture '{self.fixture.name}' has no decay settings")
        return self.problem.decay

    @cached_property
    def trace(self) -> DecayTrace:
        assert self.problem.state is not None and self.problem.gamma is not None
        return decay_trace(
            self.problem.family,
            self.problem.state,
            self.problem.gamma,
            self.scenario.t_max,
            self.scenario.steps,
            denominator=self.defects.denominator,
        )

    def _measure_denominator(self) -> float:
        return self.defects.denominator

    def _measure_exact_norm_sq(self) -> float:
        assert self.defects.exact_norm_sq is not None
        return self.defects.exact_norm_sq

    def _measure_norm_slack(self) -> float:
        assert self.defects.slack is not None
        return self.defects.slack

    def _measure_itot_coefficient(self) -> float:
        return 1.0 / (2.0 * self.defects.denominator)

    def _measure_seesaw_gamma(self) -> float:
        return self.threshold.gamma

    def _measure_certificate_mismatch(self) -> float:
        certified = product_value(self.problem.family, self.threshold.certificate)
        return abs(self.threshold.gamma - certified)

    def _measure_explicit_bound(self) -> float:
        return explicit_threshold_bound(self.site_constants)

    def _measure_threshold_sandwich_margin(self) -> float:
        return explicit_threshold_bound(self.site_constants) - self.threshold.gamma

    def _measure_expectation(self) -> float:
        return self.correlation.expectation

    def _measure_excess(self) -> float:
        return self.correlation.excess

    def _measure_trace_dist_lb(self) -> float:
        return self.correlation.trace_dist_lb

    def _measure_trace_distance_margin(self) -> float:
        assert self.problem.state is not None
        return product_trace_distance(self.problem.state) - self.correlation.trace_dist_lb

    def _measure_itot_lb(self) -> float:
        return self.correlation.itot_lb

    def _measure_itot_exact(self) -> float:
        assert self.correlation.itot_exact is not None
        return self.correlation.itot_exact

    def _measure_itot_gap(self) -> float:
        assert self.correlation.gap is not None
        return self.correlation.gap

    def _measure_window_upper(self) -> float:
        window = excess_positivity_window(
            self.correlation.expectation, self.correlation.gamma_used, self.problem.family.n
        )
        return window.upper if window.upper is not None else math.inf

    def _measure_window_crossing(self) -> float:
        zero = np.flatnonzero(np.asarray(self.trace.excess) <= 0.0)
        return float(self.trace.times[zero[0]]) if zero.size else math.inf

    def _measure_duality_max_error(self) -> float:
        predicted = np.exp(-self.problem.family.n * self.trace.times) * self.trace.expectation[0]
        return float(np.max(np.abs(self.trace.expectation - predicted)))

    def _measure_entropy_decay_violations(self) -> float:
        assert self.problem.state is not None
        return float(
            len(entropy_decay_violations(self.problem.state, self.scenario.lam, self.trace.times))
        )

    def _measure_integrated_excess_margin(self) -> float:
        assert self.problem.state is not None
        params = DecayParams(
            lam=self.scenario.lam,
            itot0=total_correlation(self.problem.state),
            denominator=self.defects.denominator,
        )
        return integrated_excess_bound(params) - integrate_squared_excess(self.trace)
