"""Unit tests for application services."""

import json
import math

import pytest

from parity_bounds.application.dtos import RunOptions
from parity_bounds.application.services import AnalysisService, FixtureMeasurements
from parity_bounds.domain.exceptions import CapacityError, UsageError
from parity_bounds.domain.models import ExpectedCheck, Fixture, GammaProvenance, Problem
from parity_bounds.infrastructure.spec_codec import render_report

FAST = RunOptions(restarts=4)


@pytest.fixture
def service(fixture_repository):
    """Analysis service over the built-in fixtures."""
    return AnalysisService(fixture_repository)


class TestAnalysisService:
    """Test AnalysisService subcommands."""

    def test_defects(self, service, fixture_repository):
        """Test the defects document for the tripartite fixture."""
        # Arrange
        problem = fixture_repository.get("tripartite-pauli").problem

        # Act
        report = service.run("defects", problem, RunOptions(exact=True))

        # Assert
        defects = report.document["defects"]
        assert report.command == "defects"
        assert defects["m"] == 3
        assert defects["phi"][1][2] == pytest.approx(2.0)
        assert defects["denominator"] == pytest.approx(5.0)
        assert defects["exact_norm_sq"] == pytest.approx(5.0)
        assert defects["bound_satisfied"] is True

    def test_defects_without_exact(self, service, chsh):
        """Test that the exact norm is omitted unless requested."""
        report = service.run("defects", Problem(family=chsh), RunOptions())
        assert report.document["defects"]["exact_norm_sq"] is None

    def test_norm(self, service, chsh):
        """Test that norm always includes ||B||^2."""
        report = service.run("norm", Problem(family=chsh), RunOptions())
        assert report.document["defects"]["exact_norm_sq"] == pytest.approx(8.0)
        rendered = json.loads(render_report(report.document))
        assert rendered["defects"]["bound_satisfied"] is True

    def test_threshold_with_site_constants(self, service, chsh, sqrt2):
        """Test the see-saw report together with C_r and the explicit bound."""
        # Act
        options = RunOptions(restarts=4, site_constants=True)
        report = service.run("threshold", Problem(family=chsh), options)

        # Assert
        document = report.document
        assert document["threshold"]["gamma"] == pytest.approx(sqrt2, abs=1e-6)
        assert len(document["threshold"]["certificate"]) == 2
        assert document["site_constants"] == pytest.approx([2.0, 2.0], abs=1e-9)
        assert document["explicit_bound"] == pytest.approx(2.0, abs=1e-9)

    def test_threshold_without_site_constants(self, service, chsh):
        """Test that site constants are only computed on request."""
        report = service.run("threshold", Problem(family=chsh), FAST)
        assert "site_constants" not in report.document

    def test_bound_uses_document_gamma(self, service, fixture_repository):
        """Test the CHSH chain with the fixture's exact threshold."""
        problem = fixture_repository.get("chsh").problem
        bound = service.run("bound", problem, FAST).document["bound"]
        assert bound["gamma_provenance"] == "exact"
        assert bound["bound_valid"] is True
        assert bound["itot_lb"] == pytest.approx(0.125)
        assert bound["gap"] == pytest.approx(2 * math.log(2) - 0.125)

    def test_bound_flag_overrides_gamma(self, service, fixture_repository):
        """Test that --gamma takes precedence and counts as a certified upper bound."""
        problem = fixture_repository.get("chsh").problem
        bound = service.run("bound", problem, RunOptions(gamma=2.0)).document["bound"]
        assert bound["gamma_used"] == 2.0
        assert bound["gamma_provenance"] == "certified-upper"

    def test_bound_with_user_constants(self, service, chsh, phi_plus, sqrt2):
        """Test that constants in the document are marked as user supplied."""
        problem = Problem(family=chsh, state=phi_plus, c_constants=(1.0, 1.0))
        bound = service.run("bound", problem, FAST).document["bound"]
        assert bound["gamma_provenance"] == GammaProvenance.USER_CONSTANTS.value
        assert bound["itot_lb"] == pytest.approx((2 * sqrt2 - 1) ** 2 / 16)

    def test_bound_with_computed_constants(self, service, chsh, phi_plus):
        """Test the fallback to computed site constants."""
        bound = service.run("bound", Problem(family=chsh, state=phi_plus), FAST).document["bound"]
        assert bound["gamma_used"] == pytest.approx(2.0, abs=1e-9)
        assert bound["gamma_provenance"] == "certified-upper"

    def test_bound_needs_state(self, service, pauli_site_3):
        """Test that bound without a state is a usage error."""
        with pytest.raises(UsageError, match="state"):
            service.run("bound", Problem(family=pauli_site_3), FAST)

    def test_decay(self, service, fixture_repository):
        """Test the depolarizing demo trace and summary."""
        # Arrange
        problem = fixture_repository.get("depolarizing-demo").problem

        # Act
        report = service.run("decay", problem, RunOptions())

        # Assert
        summary = report.document["decay"]
        assert report.trace is not None
        assert len(report.trace.times) == 101
        assert summary["window"]["kind"] == "interval"
        assert summary["window"]["upper"] == pytest.approx(math.log(2) / 2)
        assert summary["lambda"] == 0.5
        assert summary["entropy_decay_violations"] == 0
        assert summary["integrated_excess"] <= summary["integrated_excess_bound"]
        assert "survival_time" not in summary

    def test_decay_flag_overrides(self, service, fixture_repository):
        """Test grid and epsilon overrides from the command line."""
        problem = fixture_repository.get("depolarizing-demo").problem
        options = RunOptions(t_max=2.0, steps=21, epsilon=0.1)
        report = service.run("decay", problem, options)
        assert len(report.trace.times) == 21
        assert report.trace.times[-1] == pytest.approx(2.0)
        assert report.document["decay"]["survival_time"] > 0

    def test_decay_without_rate(self, service, fixture_repository):
        """Test that the rate-dependent bounds need lambda."""
        problem = fixture_repository.get("chsh").problem
        summary = service.run("decay", problem, RunOptions(steps=11)).document["decay"]
        assert "lambda" not in summary
        assert summary["integrated_excess"] > 0

    @pytest.mark.parametrize(
        "options",
        [
            RunOptions(steps=2, t_max=0.0),
            RunOptions(steps=1),
            RunOptions(lam=-1.0),
            RunOptions(epsilon=0.0),
        ],
    )
    def test_decay_invalid_flags(self, service, fixture_repository, options):
        """Test that invalid decay flags are usage errors."""
        problem = fixture_repository.get("depolarizing-demo").problem
        with pytest.raises(UsageError):
            service.run("decay", problem, options)

    def test_decay_needs_state(self, service, chsh):
        """Test that decay without an initial state is a usage error."""
        with pytest.raises(UsageError):
            service.run("decay", Problem(family=chsh), RunOptions())

    def test_unknown_command(self, service, chsh):
        """Test that unknown subcommands are rejected."""
        with pytest.raises(UsageError, match="Unknown subcommand"):
            service.run("plot", Problem(family=chsh), RunOptions())

    def test_missing_problem(self, service):
        """Test that analysis subcommands need a problem."""
        with pytest.raises(UsageError):
            service.run("norm", None, RunOptions())

    def test_capacity_flag(self, service, tripartite_family):
        """Test that --max-dim is applied while the command runs."""
        with pytest.raises(CapacityError):
            service.run("norm", Problem(family=tripartite_family), RunOptions(max_dim=4))


class TestVerify:
    """Test fixture verification."""

    def test_failing_check(self, mock_fixture_repository, fixture_repository, sqrt2):
        """Test that a wrong expected value fails only its own row."""
        # Arrange
        chsh = fixture_repository.get("chsh")
        mock_fixture_repository.names.return_value = ["chsh"]
        mock_fixture_repository.get.return_value = Fixture(
            name="chsh",
            problem=chsh.problem,
            checks=(
                ExpectedCheck(check="denominator", expected=7.0, tolerance=1e-12),
                ExpectedCheck(check="excess", expected=sqrt2, tolerance=1e-10),
            ),
        )
        service = AnalysisService(mock_fixture_repository)

        # Act
        report = service.run("verify", None, FAST)

        # Assert
        assert report.passed is False
        assert [row.passed for row in report.rows] == [False, True]
        assert report.rows[0].measured == pytest.approx(8.0)
        mock_fixture_repository.get.assert_called_once_with("chsh")
        rendered = json.loads(render_report(report.document))
        assert [row["passed"] for row in rendered["checks"]] == [False, True]

    def test_unmeasurable_check(self, mock_fixture_repository, chsh):
        """Test that an unknown check is recorded as a failed NaN row."""
        mock_fixture_repository.names.return_value = ["custom"]
        mock_fixture_repository.get.return_value = Fixture(
            name="custom",
            problem=Problem(family=chsh),
            checks=(ExpectedCheck(check="colour", expected=0.0, tolerance=1.0),),
        )
        report = AnalysisService(mock_fixture_repository).verify(FAST)
        assert report.passed is False
        assert report.document["checks"][0]["measured"] is None

    def test_measurements_by_name(self, fixture_repository):
        """Test the 1-based check names for defect weights and site constants."""
        measurements = FixtureMeasurements(fixture_repository.get("tripartite-pauli"), FAST)
        assert measurements.measure("phi_23") == pytest.approx(2.0)
        assert measurements.measure("phi_12") == pytest.approx(0.0, abs=1e-12)
        assert measurements.measure("denominator") == pytest.approx(5.0)

    @pytest.mark.slow
    def test_all_fixtures_pass(self, service):
        """Test that every built-in fixture meets its expected values."""
        report = service.run("verify", None, RunOptions())
        failed = [(row.fixture, row.check, row.measured) for row in report.rows if not row.passed]
        assert failed == []
        assert report.document["passed"] is True
