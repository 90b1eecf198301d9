"""Waiting-time statistics of a double-quantum-dot / optical-cavity photodetector.

The public surface is split by layer:

- :mod:`dqdwtd.operators`   dense operator kernels (kron, expm, min-norm solves)
- :mod:`dqdwtd.liouvillian` vectorization and Lindblad superoperators
- :mod:`dqdwtd.wtd`         waiting-time engine and jump-number decomposition
- :mod:`dqdwtd.model`       the detector model, scenarios and efficiency
- :mod:`dqdwtd.closedform`  analytic reference values at resonance
- :mod:`dqdwtd.trajectories` quantum-jump Monte Carlo
"""
from .closedform import closed_form_mean_time, closed_form_pe, closed_form_table, closed_form_two_photon
from .errors import (
    DegenerateParametersError,
    DimensionError,
    DQDWTDError,
    InconsistentSystemError,
    NumericalRangeError,
    QuadratureError,
)
from .liouvillian import JumpChannel, Superoperator, build_liouvillian, split_monitored
from .model import ModelParams, build_model, initial_state, photon_scenario
from .wtd import (
    first_jump_probability,
    jump_number_decomposition,
    mean_first_jump_time,
    two_jump_probability,
    wtd_time_density,
)

__version__ = "0.1.0"
