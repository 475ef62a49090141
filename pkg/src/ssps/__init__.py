"""Steady-state policy synthesis for multichain MDPs, with analytic and Monte Carlo checks."""

__version__ = "0.1.0"

from .chain import (
    CanonicalDecomposition, OccupationMeasure, SpecResult, TransientVisits, VerificationReport,
    absorption_probabilities, canonical_form, check_specs, class_stationary_distribution,
    expected_average_reward, expected_visits, occupation_measure, stationary_matrix, verify,
)
from .errors import (
    BudgetExhausted, Infeasible, InvalidMdp, InvalidParameter, InvalidPolicy, InvalidSpec,
    NonTransientBlock, NoReachableTscc, NotUnichain, SolverError, SspsError,
)
from .graph import PolicyClass, StateClassification, classify_chain, classify_mdp, policy_class, tarjan_sccs
from .lp.programs import SynthesisConfig
from .lp.synthesis import SynthesisResult, extract_policy, synthesize, synthesize_cpu
from .mdp import (
    STEADY, TRANSIENT, Label, MarkovChain, Mdp, Spec, StationaryPolicy, induced_chain, validate,
)
from .simulation import EmpiricalReport, SimConfig, ensemble_metrics, sample_trajectory

__all__ = [name for name in dir() if not name.startswith("_")]
