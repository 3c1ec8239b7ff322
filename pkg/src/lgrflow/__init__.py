"""Lagrangian gradient regression for sparse tracer trajectories.

Estimates velocity gradients and flow-map Jacobians directly from scattered
particle tracks, then derives vorticity, strain rate, FTLE and LAVD fields.
"""

from .backend import BACKEND, get_backend
from .errors import (
    FormatError,
    InsufficientNeighborsError,
    LGRError,
    NoEligibleTracersError,
    RankDeficiencyError,
    TrajectoryError,
)
from .lgr import (
    FIELD_PRESET,
    LAB_PRESET,
    FlowMapJacobian,
    KernelConfig,
    VelocityGradient,
    compose_jacobians,
    regress_jacobian,
    solve_jacobian,
    velocity_gradient,
)
from .metrics import (
    METRIC_KINDS,
    MetricSample,
    ftle,
    lavd,
    mean_vorticity,
    principal_strain_rate,
    spin_stretch_decompose,
    vorticity_2d,
    vorticity_deviation,
)
from .neighbors import batch_neighbors, build_index, k_nearest_persisting
from .pipeline import Diagnostics, FieldResult, compute_metrics, field_pipeline
from .trajectories import FrameView, TrajectorySet, build_trajectory_set

__version__ = "0.1.0"
