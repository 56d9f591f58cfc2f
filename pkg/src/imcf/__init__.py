"""Inverse mean curvature flow of convex graphs meeting the unit sphere at right angles.

The flow is integrated as a scalar Neumann problem for the graph function
``u`` in Moebius coordinates of the pointed upper half-ball.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0+local"

from .chart import (  # noqa: E402
    ChartJet,
    ChartPoint,
    SliceSphere,
    conformal_factor,
    inverse_map,
    jet,
    map_point,
    sigma_metric,
    slice_sphere,
)
from .diagnostics import CheckResult, all_checks, convergence_metrics  # noqa: E402
from .errors import *  # noqa: E402,F401,F403
from .flow import (  # noqa: E402
    RunResult,
    Snapshot,
    StopReason,
    TimeStepPolicy,
    extrapolate_singular_time,
    limit_area,
    run,
    step,
)
from .geometry import (  # noqa: E402
    GeometryField,
    GraphFunction,
    area,
    axisym_curvatures,
    geometry_field,
    meridian_profile,
)
from .initial_data import AdmissibilityReport, cap, perturbed_cap, validate  # noqa: E402
