"""Outage and load-equilibrium analysis for magnetic resonant coupling WPT cells."""

__version__ = "0.1.0"

from .circuit import (CoilGeometry, NetworkInstance, ReceiverPlacement, SystemParams,
                      alignment_factor, coil_constant, harvested_power, harvested_power_loose,
                      mutual_inductance, typical_power)
from .game import (EquilibriumError, EquilibriumResult, GameSpec, best_response,
                   interaction_terms, solve_equilibrium, symmetric_limit_power,
                   verify_standard_function)
from .montecarlo import (SimConfig, SimEstimate, sample_ppp, sample_S, simulate_outage_loose,
                         simulate_outage_strong)
from .stochastic import (OutageQuery, OutageResult, QuadratureConfig, QuadratureError,
                         characteristic_fn_S, distance_cdf, expected_abs_alignment,
                         lambda_threshold, min_power_zero_outage, outage_loose, outage_strong)
