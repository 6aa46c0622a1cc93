"""Parity Bounds

Parity-defect norm bounds, product thresholds and total-correlation lower
bounds for multipartite observables built from local self-adjoint contractions.
"""

__version__ = "1.0.0"
__author__ = "DevOps Jester"
__email__ = "devopsjester@example.com"
