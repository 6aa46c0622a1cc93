"""Domain layer of the parity bounds toolkit.

This layer contains the numerical core: models, exceptions, the numeric
policy and the pure computational services.
"""
