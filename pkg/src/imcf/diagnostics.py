"""Monitors for the identities and estimates the flow must satisfy.

Snapshot checks take a :class:`GraphFunction`; trajectory checks take a list
of :class:`~imcf.flow.Snapshot`.  Every check returns a :class:`CheckResult`
whose verdict is ``max_residual <= threshold``.  Checks of strict sign
conditions count violating nodes, so their threshold is zero.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import ModeUnsupported
from .flow import Snapshot
from .geometry import (
    GeometryField,
    GraphFunction,
    boundary_frame,
    directional_boundary_derivative,
    dual_path_residual,
    geometry_field,
)

T_WARMUP = 0.05
BOUNDARY_HEIGHT_TOL = 1e-4
BOUNDARY_H_TOL = 0.1
MIXED_A_TOL = 1e-8
BOUND_REL_TOL = 0.02
AREA_LAW_TOL = 0.01
RIM_JUMP_TOL = 1e-8
DUAL_PATH_TOL = 1e-6
BALL_SLACK = 1e-10


@dataclass(frozen=True)
class CheckResult:
    name: str
    scope: str
    max_residual: float
    threshold: float
    passed: bool
    details: dict = field(default_factory=dict)

    @classmethod
    def make(cls, name, scope, residual, threshold, **details) -> CheckResult:
        residual = float(residual)
        return cls(name, scope, residual, float(threshold), bool(residual <= threshold), details)

    def as_dict(self) -> dict:
        return _jsonable(asdict(self))

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: residual {self.max_residual:.3e} (threshold {self.threshold:.3e})"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


# ---------------------------------------------------------------------------
# snapshot checks


def check_boundary_height_identity(u: GraphFunction, geom: GeometryField | None = None,
                                   threshold: float = BOUNDARY_HEIGHT_TOL) -> CheckResult:
    """The height ``w = <X, e0>`` satisfies ``w_n = w`` on the rim of any perpendicular graph."""
    geom = geometry_field(u) if geom is None else geom
    frame = boundary_frame(u, geom)
    w = geom.w
    wn = directional_boundary_derivative(w, u, frame)
    res = np.abs(wn - w[frame.index])
    worst = int(np.argmax(res))
    return CheckResult.make("boundary_height_identity", "snapshot", res[worst], threshold,
                            worst_node=int(frame.index[worst]), w=float(w[frame.index[worst]]),
                            w_n=float(wn[worst]))


def boundary_H_residual(u: GraphFunction, geom: GeometryField | None = None) -> np.ndarray:
    geom = geometry_field(u) if geom is None else geom
    frame = boundary_frame(u, geom)
    H = geom.H
    Hn = directional_boundary_derivative(H, u, frame)
    return np.abs(Hn + H[frame.index]) / H[frame.index]


def check_boundary_H_identity(u: GraphFunction, t: float, geom: GeometryField | None = None,
                              t_warmup: float = T_WARMUP,
                              threshold: float = BOUNDARY_H_TOL) -> CheckResult:
    """Relative residual of ``H_n = -H`` on the rim.

    The identity is produced by the flow, so snapshots earlier than ``t_warmup``
    are reported with an infinite threshold and flagged as excluded.
    """
    res = float(np.max(boundary_H_residual(u, geom)))
    if t < t_warmup:
        return CheckResult.make("boundary_H_identity", "snapshot", res, math.inf,
                                t=t, warmup_excluded=True)
    return CheckResult.make("boundary_H_identity", "snapshot", res, threshold, t=t, warmup_excluded=False)


def check_mixed_A(u: GraphFunction, geom: GeometryField | None = None,
                  threshold: float = MIXED_A_TOL) -> CheckResult:
    """``h(n, z) = 0`` between the conormal and the boundary tangent, relative to ``|h|``."""
    if u.mode != "polar2d":
        raise ModeUnsupported(f"{u.mode} data satisfy the mixed identity by symmetry")
    geom = geometry_field(u) if geom is None else geom
    frame = boundary_frame(u, geom)
    idx = frame.index
    g = geom.g[idx]
    h = geom.h[idx]
    z = frame.z_I / np.sqrt(np.einsum("pi,pij,pj->p", frame.z_I, g, frame.z_I))[:, None]
    mixed = np.einsum("pi,pij,pj->p", frame.n_tilde, h, z)
    norm_h = np.linalg.norm(geom.kappa[idx], axis=1)
    res = np.abs(mixed) / norm_h
    worst = int(np.argmax(res))
    return CheckResult.make("mixed_A", "snapshot", res[worst], threshold, worst_node=int(idx[worst]))


def sign_margins(u: GraphFunction, geom: GeometryField | None = None) -> dict:
    """Extreme values of each quantity that must be strictly negative (or positive for ``w``)."""
    geom = geometry_field(u) if geom is None else geom
    X, N = geom.X, geom.N
    e0 = np.zeros(X.shape[1])
    e0[0] = 1.0
    bnd = set(int(i) for i in u.boundary_index())
    return {
        "normal_e0": N[:, 0],
        "starshaped": np.einsum("pc,pc->p", e0 - X, N),
        "inside_ball": np.linalg.norm(X, axis=1) - 1.0 - BALL_SLACK,
        "height": geom.w,
        "graph_condition": np.einsum("pc,pc->p", geom.df_dlambda, N),
        "argmax_on_boundary": int(np.argmax(geom.w)) in bnd,
    }


def check_sign_conditions(u: GraphFunction, geom: GeometryField | None = None) -> CheckResult:
    """Normal direction, star-shapedness, unit ball, positive height, boundary maximum, graph condition.

    The residual counts violations over all nodes and conditions.
    """
    m = sign_margins(u, geom)
    counts = {
        "normal_e0": int(np.sum(m["normal_e0"] >= 0.0)),
        "starshaped": int(np.sum(m["starshaped"] >= 0.0)),
        "inside_ball": int(np.sum(m["inside_ball"] > 0.0)),
        "height": int(np.sum(m["height"] <= 0.0)),
        "graph_condition": int(np.sum(m["graph_condition"] >= 0.0)),
        "argmax_on_boundary": 0 if m["argmax_on_boundary"] else 1,
    }
    return CheckResult.make(
        "sign_conditions", "snapshot", sum(counts.values()), 0.0,
        violations=counts,
        max_normal_e0=float(np.max(m["normal_e0"])),
        max_starshaped=float(np.max(m["starshaped"])),
        max_norm_X=float(np.max(m["inside_ball"]) + 1.0 + BALL_SLACK),
        min_height=float(np.min(m["height"])),
        max_graph_condition=float(np.max(m["graph_condition"])),
    )


def check_dual_path(u: GraphFunction, geom: GeometryField | None = None,
                    threshold: float = DUAL_PATH_TOL) -> CheckResult:
    """Principal curvatures from the chart kernel against the surface-of-revolution formulas."""
    res = dual_path_residual(u, geom)
    worst = int(np.argmax(res))
    return CheckResult.make("dual_path_curvature", "snapshot", res[worst], threshold, worst_node=worst)


# ---------------------------------------------------------------------------
# trajectory checks


def _worst(results: Sequence[CheckResult], name: str, scope: str = "trajectory") -> CheckResult:
    """Fold per-snapshot results into one trajectory result (the worst residual wins)."""
    if not results:
        return CheckResult.make(name, scope, 0.0, 0.0, snapshots=0)
    worst = max(results, key=lambda r: (not r.passed, r.max_residual))
    idx = results.index(worst)
    return CheckResult(name, scope, worst.max_residual, worst.threshold,
                       all(r.passed for r in results),
                       {"snapshots": len(results), "worst_snapshot": idx, **worst.details})


def _graphs(traj: Sequence[Snapshot], mode: str):
    for s in traj:
        u = GraphFunction(mode, s.values)
        yield s, u, geometry_field(u)


def check_kappa_H_bounds(traj: Sequence[Snapshot], threshold: float = BOUND_REL_TOL) -> CheckResult:
    """``kappa_i <= H <= max H(0)`` along the run, as a relative excess over ``max H(0)``."""
    if not traj:
        return CheckResult.make("kappa_H_bounds", "trajectory", 0.0, threshold)
    h0 = traj[0].max_H
    k_excess = max(s.max_kappa for s in traj) / h0 - 1.0
    h_excess = max(s.max_H for s in traj) / h0 - 1.0
    res = max(k_excess, h_excess, 0.0)
    return CheckResult.make("kappa_H_bounds", "trajectory", res, threshold, max_H0=h0,
                            kappa_excess=k_excess, H_excess=h_excess)


def check_area_law(traj: Sequence[Snapshot], threshold: float = AREA_LAW_TOL) -> CheckResult:
    """``A(t) = A(0) e^t``, the first variation of area under normal speed ``1/H``."""
    if len(traj) < 2:
        return CheckResult.make("area_law", "trajectory", 0.0, threshold)
    t = np.array([s.t for s in traj])
    a = np.array([s.area for s in traj])
    ratio = a * np.exp(-(t - t[0])) / a[0] - 1.0
    worst = int(np.argmax(np.abs(ratio)))
    return CheckResult.make("area_law", "trajectory", abs(ratio[worst]), threshold,
                            worst_t=float(t[worst]))


def check_boundary_monotone(traj: Sequence[Snapshot], threshold: float = RIM_JUMP_TOL) -> CheckResult:
    """Rim height never increases (the enclosed boundary bodies grow towards the equator)."""
    rim = np.array([s.rim_height for s in traj])
    jump = float(np.max(np.diff(rim), initial=0.0))
    rho = [rim_radius(s.values[-1]) for s in traj]
    return CheckResult.make("boundary_monotone", "trajectory", max(jump, 0.0), threshold,
                            rim_height_start=float(rim[0]) if rim.size else None,
                            rim_height_end=float(rim[-1]) if rim.size else None,
                            rim_radius_end=float(rho[-1]) if rho else None)


def rim_radius(lam_rim: float) -> float:
    """Euclidean radius of the boundary circle of a graph with rim value ``lam_rim``."""
    return 2.0 * lam_rim / (1.0 + lam_rim * lam_rim)


def check_pointwise_decrease(traj: Sequence[Snapshot]) -> CheckResult:
    """``u`` decreases strictly at every node between consecutive snapshots; counts offending nodes."""
    bad = 0
    worst = -math.inf
    for a, b in zip(traj, traj[1:]):
        diff = b.values - a.values
        bad += int(np.sum(diff >= 0.0))
        worst = max(worst, float(np.max(diff)))
    return CheckResult.make("pointwise_decrease", "trajectory", bad, 0.0,
                            max_increment=worst if len(traj) > 1 else None)


def check_convexity(traj: Sequence[Snapshot]) -> CheckResult:
    """Strict convexity at every recorded snapshot; counts snapshots with ``min kappa <= 0``."""
    bad = sum(1 for s in traj if not s.min_kappa > 0.0)
    return CheckResult.make("convexity", "trajectory", bad, 0.0,
                            min_kappa=min((s.min_kappa for s in traj), default=None))


@dataclass(frozen=True)
class ConvergenceMetrics:
    t: np.ndarray
    sup_u_minus_1: np.ndarray
    sup_Du: np.ndarray

    def tail_increase(self, fraction: float = 0.5) -> tuple[float, float]:
        """Largest increase of each metric between consecutive snapshots in the final ``fraction``."""
        start = int(len(self.t) * (1.0 - fraction))
        du1 = np.diff(self.sup_u_minus_1[start:])
        ddu = np.diff(self.sup_Du[start:])
        return float(np.max(du1, initial=0.0)), float(np.max(ddu, initial=0.0))


def convergence_metrics(traj: Sequence[Snapshot]) -> ConvergenceMetrics:
    return ConvergenceMetrics(
        t=np.array([s.t for s in traj]),
        sup_u_minus_1=np.array([s.sup_u_minus_1 for s in traj]),
        sup_Du=np.array([s.sup_Du for s in traj]),
    )


def check_flattening(traj: Sequence[Snapshot], final_threshold: float = 0.5) -> CheckResult:
    """``sup(u - 1)`` and ``sup |Du|`` do not increase over the second half of the run."""
    if not traj:
        return CheckResult.make("flattening", "trajectory", 0.0, 0.0)
    cm = convergence_metrics(traj)
    inc_u, inc_du = cm.tail_increase()
    final = float(cm.sup_u_minus_1[-1])
    res = max(inc_u, inc_du)
    result = CheckResult.make("flattening", "trajectory", res, 0.0, tail_increase_u=inc_u,
                              tail_increase_Du=inc_du, final_sup_u_minus_1=final,
                              initial_sup_u_minus_1=float(cm.sup_u_minus_1[0]),
                              final_threshold=final_threshold)
    if final > final_threshold:
        return CheckResult(result.name, result.scope, result.max_residual, result.threshold, False,
                           result.details)
    return result


def snapshot_series(traj: Sequence[Snapshot], mode: str,
                    t_warmup: float = T_WARMUP) -> dict[str, list[CheckResult]]:
    """Per-snapshot results of the static and emergent identities, keyed by check name."""
    series: dict[str, list[CheckResult]] = {
        "boundary_height_identity": [], "boundary_H_identity": [], "sign_conditions": [],
    }
    if mode != "polar2d":
        series["dual_path_curvature"] = []
    for s, u, geom in _graphs(traj, mode):
        series["boundary_height_identity"].append(check_boundary_height_identity(u, geom))
        series["boundary_H_identity"].append(check_boundary_H_identity(u, s.t, geom, t_warmup=t_warmup))
        series["sign_conditions"].append(check_sign_conditions(u, geom))
        if mode != "polar2d":
            series["dual_path_curvature"].append(check_dual_path(u, geom))
    return series


def fold_series(series: dict[str, list[CheckResult]]) -> list[CheckResult]:
    """Trajectory verdicts from per-snapshot results; warm-up snapshots are left out."""
    out = []
    for name, results in series.items():
        active = [r for r in results if not r.details.get("warmup_excluded")]
        out.append(_worst(active, name))
    return out


def all_checks(traj: Sequence[Snapshot], mode: str, t_warmup: float = T_WARMUP,
               series: dict[str, list[CheckResult]] | None = None) -> list[CheckResult]:
    """Every monitor over a recorded trajectory, in a fixed order."""
    if series is None:
        series = snapshot_series(traj, mode, t_warmup)
    return fold_series(series) + [
        check_kappa_H_bounds(traj),
        check_area_law(traj),
        check_boundary_monotone(traj),
        check_pointwise_decrease(traj),
        check_convexity(traj),
        check_flattening(traj),
    ]
