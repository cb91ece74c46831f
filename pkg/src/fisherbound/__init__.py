"""Sample-complexity bounds for maximum-likelihood quantum learning.

The package evaluates closed-form upper and lower bounds on the number
of measurements needed to estimate quantum-channel and quantum-state
parameters to a prescribed accuracy with high probability, and verifies
them empirically by simulating the measurement schemes and searching for
the minimal sample size that meets the criterion.
"""

__version__ = "0.1.0"

from . import bounds, fisher, mle_lab, models, pauli, special_functions, verify

__all__ = [
    "__version__",
    "bounds",
    "fisher",
    "mle_lab",
    "models",
    "pauli",
    "special_functions",
    "verify",
]
