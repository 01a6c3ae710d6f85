"""Sway damping for cable-suspended platforms.

The platform hangs from a crane like a double pendulum: a long cable
to a hook, a short sling to the payload.  This package simulates that
system (planar and full 3-D), implements the IMU-only filtered damping
controller that an on-board thruster pack can realize, and tunes its
gains as a static output-feedback LQR problem solved by a small
bespoke interior-point method.
"""

from .analysis import (
    ComparisonBundle,
    GridSpec,
    SamplingError,
    Spectrum,
    StabilityGridReport,
    compare_controllers,
    input_energy,
    power_spectrum,
    settling_time,
    stability_grid,
    trajectory_cost,
)
from .control import (
    DampingGains,
    FilteredDampingController,
    IdealDampingController,
    ImuSample,
    LowPassFilter,
    PassiveController,
    cutoff_frequency,
)
from .dynamics import (
    DEFAULT_PARAMS,
    LinearModel,
    PendulumParams,
    PlanarState,
    linearize,
    mode_frequencies,
)
from .scenario import ConfigError, Scenario, load_scenario
from .simulate import (
    DisturbanceEvent,
    DisturbanceSchedule,
    GyroNoise,
    Trajectory,
    simulate,
)
from .spatial import SingularConfigurationError, SpatialState
from .synthesis import (
    DEFAULT_SIGMA,
    Certification,
    LqrWeights,
    SynthesisError,
    SynthesisResult,
    certify,
    default_sigma_grid,
    riccati_lqr,
    sigma_sweep,
    solve_output_feedback_lqr,
)

__version__ = "0.1.0"

__all__ = [
    "ComparisonBundle", "GridSpec", "SamplingError", "Spectrum",
    "StabilityGridReport", "compare_controllers", "input_energy",
    "power_spectrum", "settling_time", "stability_grid", "trajectory_cost",
    "DampingGains", "FilteredDampingController", "IdealDampingController",
    "ImuSample", "LowPassFilter", "PassiveController", "cutoff_frequency",
    "DEFAULT_PARAMS", "LinearModel", "PendulumParams", "PlanarState",
    "linearize", "mode_frequencies",
    "ConfigError", "Scenario", "load_scenario",
    "DisturbanceEvent", "DisturbanceSchedule", "GyroNoise", "Trajectory",
    "simulate",
    "SingularConfigurationError", "SpatialState",
    "DEFAULT_SIGMA", "Certification", "LqrWeights", "SynthesisError",
    "SynthesisResult", "certify", "default_sigma_grid", "riccati_lqr",
    "sigma_sweep", "solve_output_feedback_lqr",
    "__version__",
]
