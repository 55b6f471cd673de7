"""Pseudodifferential symbol calculus on the circle: residues, regularized traces and determinants."""

from .anomaly import (
    AnomalyError,
    K_symbol,
    L_symbol,
    detQ_anomaly,
    log_det_weighted,
    log_det_zeta_local,
    trQ_L,
    zeta_anomaly_local,
)
from .holo import AdmissibilityError, SpectralCut, complex_power_symbol, log_symbol, sectorial_projector_symbol
from .operators import Operator, laplacian_power, operator, shifted_derivative
from .spectral import (
    MultiplierOperator,
    anomaly_spectral,
    det_zeta_spectral,
    log_det_spectral,
    zeta,
    zeta_prime_zero,
)
from .symbols import (
    LogPolyhomSymbol,
    PolyhomSymbol,
    SymbolError,
    constant_symbol,
    identity_symbol,
    inverse_symbol,
    polynomial_symbol,
    star_product,
)
from .traces import canonical_trace, residue, weighted_trace, weighted_trace_direct

__version__ = "0.1.0"
