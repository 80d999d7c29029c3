"""Causal-state splitting reconstruction of minimal unifilar predictors."""

from .machine import CausalStateMachine, MachineError, UnsynchronizedError, minimize
from .reconstruct import CssrConfig, CssrResult, run_cssr
from .sequence import Alphabet, ParseTree, build_parse_tree, max_safe_L, read_sequences
from .sources import even_process, iid_process, markov_process, seven_state_process
from .stats import Distribution, chi2_two_sample, ks_two_sample, tv_distance

__version__ = "0.1.0"
