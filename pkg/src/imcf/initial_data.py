"""Admissible initial graphs: strictly convex, above the flat disk, perpendicular to the sphere."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InadmissibleData
from .geometry import GraphFunction, enforce_neumann, geometry_field, neumann_residual

NEUMANN_TOL = 1e-8


@dataclass(frozen=True)
class AdmissibilityReport:
    neumann_residual: float
    min_kappa: float
    min_u_minus_1: float
    rim_height: float
    graph_condition_min: float
    max_normal_e0: float
    reasons: tuple[str, ...] = field(default=())

    @property
    def passed(self) -> bool:
        return not self.reasons

    def as_dict(self) -> dict:
        return {
            "neumann_residual": self.neumann_residual,
            "min_kappa": self.min_kappa,
            "min_u_minus_1": self.min_u_minus_1,
            "rim_height": self.rim_height,
            "graph_condition_min": self.graph_condition_min,
            "max_normal_e0": self.max_normal_e0,
            "verdict": "pass" if self.passed else "fail",
            "reasons": list(self.reasons),
        }


def _profile(mode: str, m: int, fn) -> GraphFunction:
    # sampled profiles get the discrete Neumann condition imposed at the rim
    if mode == "interval":
        vals = fn(np.abs(np.linspace(-1.0, 1.0, m)))
    elif mode == "axisymmetric":
        vals = fn(np.linspace(0.0, 1.0, m))
    else:
        raise InadmissibleData(f"no radial generator for mode {mode!r}")
    return GraphFunction(mode, enforce_neumann(np.array(vals, dtype=float), mode))


def cap(lambda0: float, m: int, mode: str = "axisymmetric") -> GraphFunction:
    """The slice ``u = lambda0``: a spherical cap meeting the unit sphere at right angles."""
    return _profile(mode, m, lambda r: np.full_like(r, float(lambda0)))


def perturbed_cap(lambda0: float, amplitude: float, m: int, mode: str = "axisymmetric",
                  *, check: bool = True) -> GraphFunction:
    """``u0 = lambda0 + a cos(pi r)``; both endpoint slopes vanish analytically.

    For ``interval`` mode ``r = |x|``, which keeps the profile smooth at ``x = 0``.
    """
    u0 = _profile(mode, m, lambda r: lambda0 + amplitude * np.cos(np.pi * r))
    if check:
        report = validate(u0)
        if not report.passed:
            raise InadmissibleData("; ".join(report.reasons), report)
    return u0


def validate(u0: GraphFunction, tol: float = NEUMANN_TOL) -> AdmissibilityReport:
    """Check the admissibility gates; failures are reported, never raised."""
    min_u1 = float(np.min(u0.values) - 1.0)
    res = neumann_residual(u0)
    reasons = []
    try:
        geom = geometry_field(u0)
    except Exception as exc:  # noqa: BLE001 - reported as a verdict
        return AdmissibilityReport(res, float("nan"), min_u1, float("nan"), float("nan"),
                                   float("nan"), (f"geometry failed: {exc}",))
    min_kappa = float(np.min(geom.kappa))
    rim = float(np.min(geom.w[u0.boundary_index()]))
    graph_cond = float(np.min(-np.einsum("pc,pc->p", geom.df_dlambda, geom.N)))
    max_ne0 = float(np.max(geom.N[:, 0]))
    if res > tol:
        reasons.append(f"Neumann residual {res:.3g} > {tol:.1g}")
    if not min_kappa > 0.0:
        reasons.append(f"not strictly convex (min kappa = {min_kappa:.3g})")
    if not min_u1 > 0.0:
        reasons.append(f"touches the flat disk (min u - 1 = {min_u1:.3g})")
    if not rim > 0.0:
        reasons.append(f"rim height {rim:.3g} is not positive")
    if not graph_cond > 0.0:
        reasons.append(f"graph condition fails (min -<f_lam, N> = {graph_cond:.3g})")
    return AdmissibilityReport(res, min_kappa, min_u1, rim, graph_cond, max_ne0, tuple(reasons))
