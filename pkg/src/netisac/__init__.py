"""Coordinated transmit beamforming for multi-antenna network ISAC.

Scene construction (:mod:`netisac.model`), closed-form and Monte Carlo
target detection (:mod:`netisac.detection`), SDR beamforming with its own
interior-point conic solver (:mod:`netisac.optimizer`, :mod:`netisac.conic`)
and an experiment harness with a CLI (:mod:`netisac.harness`).
"""

from .conic import ConicProgram, ConicSolution, LinearConstraint, SolveStatus, solve_conic
from .detection import (
    Scenario,
    detection_probability,
    detector_threshold,
    q_function,
    q_inverse,
    reflection_energies,
    reflection_energy,
    reflection_energy_from_covariance,
    simulate_detector,
    sinr_eval,
    stacked_reflection,
)
from .errors import (
    BenchmarkInfeasible,
    ConfigError,
    DegenerateDetectorError,
    DegenerateGeometryError,
    DimensionError,
    RandomizationFailure,
)
from .model import (
    ArrayConfig,
    CommChannelSet,
    SensingParams,
    SystemLayout,
    TargetGrid,
    build_target_grid,
    db_to_linear,
    dbm_to_watts,
    path_gain,
    sample_comm_channels,
    steering_vector,
    target_geometry,
    target_response,
)
from .optimizer import (
    DetectionProblem,
    SolveReport,
    build_detection_sdr,
    comm_benchmark,
    gaussian_randomize,
    solve_detection,
    solve_power_lp,
)

__version__ = "0.1.0"
