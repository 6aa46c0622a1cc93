#!/usr/bin/env python3
"""
Demo script for Parity Bounds

This script walks through the built-in fixtures with the application service.
"""

import json

from parity_bounds.application.dtos import RunOptions
from parity_bounds.application.services import AnalysisService
from parity_bounds.domain.exceptions import ParityBoundsException
from parity_bounds.infrastructure.fixtures import FixtureRepository


def demo_fixtures(service: AnalysisService, repository: FixtureRepository):
    """Run the main subcommands on the fixtures they are interesting for."""
    print("🧮 Parity Bounds Demo")
    print("=" * 50)

    runs = [
        ("norm", "tripartite-pauli"),
        ("threshold", "chsh"),
        ("bound", "chsh"),
        ("threshold", "pauli-site-4"),
    ]
    options = RunOptions(restarts=8, site_constants=True)

    for command, name in runs:
        try:
            print(f"\n▶️  {command} on {name}")
            report = service.run(command, repository.get(name).problem, options)
            print(json.dumps(report.document, indent=2, default=str)[:1200])
        except ParityBoundsException as e:
            print(f"❌ {command} on {name} failed: {e}")


def demo_decay(service: AnalysisService, repository: FixtureRepository):
    """Print the head of the depolarizing trace and its summary."""
    print("\n" + "=" * 50)
    print("📉 Depolarizing decay")
    print("=" * 50)
    report = service.run("decay", repository.get("depolarizing-demo").problem, RunOptions())
    assert report.trace is not None
    for t, expectation, excess, itot_lb in report.trace.to_rows()[:5]:
        print(f"t={t:.2f}  Tr(rho B)={expectation:.6f}  excess={excess:.6f}  itot_lb={itot_lb:.6f}")
    print("...")
    print(json.dumps(report.document, indent=2))


def demo_cli():
    """Demonstrate CLI usage."""
    print("\n" + "=" * 50)
    print("🖥️  CLI Interface Demo")
    print("=" * 50)
    print("parity-bounds defects --fixture tripartite-pauli --exact")
    print("parity-bounds threshold --fixture chsh --site-constants --seed 7")
    print("parity-bounds bound --fixture chsh")
    print("parity-bounds decay --fixture depolarizing-demo --out trace.csv --summary summary.json")
    print("parity-bounds export chsh --out chsh.json && parity-bounds bound chsh.json")
    print("parity-bounds verify")


def main():
    """Run the complete demo."""
    repository = FixtureRepository()
    service = AnalysisService(repository)

    demo_fixtures(service, repository)
    demo_decay(service, repository)
    demo_cli()

    print("\n" + "=" * 50)
    print("🎉 Demo complete!")
    print("=" * 50)


if __name__ == "__main__":
    main()
