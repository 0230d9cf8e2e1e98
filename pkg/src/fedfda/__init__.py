"""Differentially private mean curve estimation for federated functional data."""

from .datagen import (CurveSpec, Design, FederationConfig, ServerConfig,
                      ServerDataset)
from .harness import ExperimentSpec, RiskRow, run_replication, run_sweep
from .rates import (RateSolution, Regime, homogeneous_rate_common,
                    homogeneous_rate_independent, solve_common,
                    solve_independent)
from .wavelet import WaveletCoeffs, WaveletFamily, WaveletTable, build_table, family

__version__ = "0.1.0"

__all__ = [
    "CurveSpec", "Design", "FederationConfig", "ServerConfig", "ServerDataset",
    "ExperimentSpec", "RiskRow", "run_replication", "run_sweep",
    "RateSolution", "Regime", "homogeneous_rate_common",
    "homogeneous_rate_independent", "solve_common", "solve_independent",
    "WaveletCoeffs", "WaveletFamily", "WaveletTable", "build_table", "family",
]
