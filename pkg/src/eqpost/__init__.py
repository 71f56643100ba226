"""Posterior probabilities of equivalence and q-values for gene screens."""

from .em import FitConfig, FitResult, fit
from .panel import Panel, read_panel_csv, read_params, write_panel_csv, write_params
from .posterior import (
    TABLE3_PRIOR,
    GeneObservation,
    MixturePrior,
    equivalence_probabilities,
    posterior_equivalence_probability,
)
from .qvalue import build_table, q_value_at
from .stats import EquivalenceSpec, EstimateSummary, equivalence_p_value

__version__ = "0.1.0"
