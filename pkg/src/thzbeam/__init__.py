"""Variable-beamwidth THz precoding with uncertainty-aware, event-triggered beam tracking."""

from .beamformer import BeamParams, conjugate_precoder, make_params, sinc_precoder, sinc_taper
from .channel import LinkConfig, LinkState, achievable_rate
from .lut import LookupTable, build_lookup_table, load_lut, lut_query, save_lut
from .objectives import BeamEvaluator, ObjectiveConfig, ObjectiveValue, evaluate
from .optimizer import PsoConfig, gradient_ascent_general, pareto_sweep, pso_optimize
from .tracking import RunSummary, ScenarioConfig, SlotRecord, run_tracking

__version__ = "0.1.0"
