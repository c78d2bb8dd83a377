"""moneykin: agent-based simulation and analysis of conserved-money economies.

Core pieces: an exact integer money ledger, pairwise exchange kernels with
declared time-reversal symmetry, a reproducible Monte Carlo engine, a
peer-credit and banking layer, distribution measures and fits, a
drift-diffusion PDE solver, and an exact small-instance reference solver.
"""

__version__ = "0.1.0"

from .engine import (CreditPolicy, SimulationConfig, Trajectory,
                     equilibration_detect, h_theorem_report,
                     relaxation_profile, run)
from .kernels import (ADDITIVE_FIXED, ADDITIVE_UNIFORM, LETS_SERVICE,
                      MULTIPLICATIVE, NON_REVERSIBLE, RANDOM_SPLIT_POOL,
                      TIME_REVERSIBLE, ExchangeKernel, LetsLedger,
                      classify_symmetry, propose_delta)
from .ledger import AuditReport, ConfigError, Ensemble, FluxEntry, UsageError
from .measures import (DistributionEstimate, PriceVector, entropy, gini,
                       gini_weighted, max_entropy_at_mean, temperature, wealth)

__all__ = [
    "ADDITIVE_FIXED", "ADDITIVE_UNIFORM", "LETS_SERVICE", "MULTIPLICATIVE",
    "NON_REVERSIBLE", "RANDOM_SPLIT_POOL", "TIME_REVERSIBLE",
    "AuditReport", "ConfigError", "CreditPolicy", "DistributionEstimate",
    "Ensemble", "ExchangeKernel", "FluxEntry", "LetsLedger", "PriceVector",
    "SimulationConfig", "Trajectory", "UsageError",
    "classify_symmetry", "entropy", "equilibration_detect", "gini",
    "gini_weighted", "h_theorem_report", "max_entropy_at_mean",
    "propose_delta", "relaxation_profile", "run", "temperature", "wealth",
]
