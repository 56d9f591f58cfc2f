"""Explicit integration of the scalar graph flow ``u_t = -v / (e^psi H)`` with a Neumann rim."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import AreaLawViolated, ModeUnsupported, NonFiniteGeometry, SpeedBlowup, StepUnderflow
from .geometry import (
    GeometryField,
    GraphFunction,
    area,
    dual_path_residual,
    enforce_neumann,
    geometry_field,
)

log = logging.getLogger(__name__)

MIN_DT = 1e-12
DUAL_PATH_ABORT = 1e-6
SCHEMES = ("heun", "rkc")


class StopReason(str, enum.Enum):
    FLATNESS_REACHED = "FlatnessReached"
    H_FLOOR_REACHED = "HFloorReached"
    CONVEXITY_LOST = "ConvexityLost"
    CHART_BREAKDOWN = "ChartBreakdown"
    STEP_UNDERFLOW = "StepUnderflow"
    MAX_TIME_REACHED = "MaxTimeReached"
    NON_FINITE_GEOMETRY = "NonFiniteGeometry"

    @property
    def is_numerical_failure(self) -> bool:
        return self in (StopReason.CONVEXITY_LOST, StopReason.NON_FINITE_GEOMETRY, StopReason.STEP_UNDERFLOW)


@dataclass(frozen=True)
class TimeStepPolicy:
    cfl: float = 0.2
    dt_max: float = 1e-3
    eps_H: float = 0.05
    eps_flat: float = 1e-4
    t_max: float = 10.0
    record_every: int = 20
    record_times: tuple[float, ...] = ()
    scheme: str = "rkc"
    du_max: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError("cfl must lie in (0, 1]")
        for name in ("dt_max", "eps_H", "eps_flat"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.t_max < 0.0:
            raise ValueError("t_max must be non-negative")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if not self.du_max > 0.0:
            raise ValueError("du_max must be positive")
        object.__setattr__(self, "record_times", tuple(sorted(float(t) for t in self.record_times)))


@dataclass(frozen=True)
class Snapshot:
    """Recorded state plus the geometry scalars the monitors need."""

    step: int
    t: float
    values: np.ndarray
    area: float
    min_H: float
    max_H: float
    min_kappa: float
    max_kappa: float
    rim_height: float
    sup_u_minus_1: float
    sup_Du: float

    def graph(self, mode: str) -> GraphFunction:
        return GraphFunction(mode, self.values)


@dataclass
class FlowState:
    t: float
    u: GraphFunction
    dt_last: float = 0.0
    steps: int = 0
    diagnostics_cache: dict = field(default_factory=dict)


@dataclass
class RunResult:
    mode: str
    snapshots: list[Snapshot]
    stop_reason: StopReason
    state: FlowState
    checks: list = field(default_factory=list)
    message: str = ""


def _lambda_max_sym(a: np.ndarray) -> np.ndarray:
    """Largest eigenvalue of a stack of symmetric 1x1 or 2x2 matrices."""
    if a.shape[1] == 1:
        return a[:, 0, 0]
    tr = a[:, 0, 0] + a[:, 1, 1]
    diff = a[:, 0, 0] - a[:, 1, 1]
    return 0.5 * tr + np.sqrt(0.25 * diff * diff + a[:, 0, 1] * a[:, 1, 0])


def speed_from_geometry(geom: GeometryField) -> np.ndarray:
    return -geom.v / (geom.e_psi * geom.H)


def rhs(u: GraphFunction, eps_H: float = 0.0, geom: GeometryField | None = None) -> np.ndarray:
    """Nodal time derivative of ``u``; always negative on mean-convex data."""
    geom = geometry_field(u) if geom is None else geom
    if np.min(geom.H) <= eps_H:
        raise SpeedBlowup(f"min H = {np.min(geom.H):.4g} <= {eps_H:.4g}")
    return speed_from_geometry(geom)


def stable_dt(u: GraphFunction, geom: GeometryField, policy: TimeStepPolicy) -> float:
    """``cfl h^2 min(H^2 / lambda_max(g^-1))``: the diffusion matrix of the flow is ``g^{ij} / H^2``."""
    ratio = geom.H**2 / _lambda_max_sym(geom.g_inv)
    return min(policy.dt_max, policy.cfl * u.h**2 * float(np.min(ratio)))


def _speed(values: np.ndarray, mode: str) -> np.ndarray:
    return speed_from_geometry(geometry_field(GraphFunction(mode, values)))


def _advance(values: np.ndarray, mode: str, dt: float, k1: np.ndarray) -> np.ndarray:
    # Heun's method; the rim is re-imposed after each stage
    stage = enforce_neumann(values + dt * k1, mode)
    k2 = _speed(stage, mode)
    return enforce_neumann(values + 0.5 * dt * (k1 + k2), mode)


@dataclass(frozen=True)
class _RkcCoefficients:
    mu: np.ndarray
    nu: np.ndarray
    mu_t: np.ndarray
    gamma_t: np.ndarray
    beta: float


def rkc_coefficients(s: int, damping: float = 2.0 / 13.0) -> _RkcCoefficients:
    """Second-order Runge-Kutta-Chebyshev coefficients for ``s >= 2`` stages.

    ``beta`` is the length of the real stability interval ``[-beta, 0]``.
    """
    if s < 2:
        raise ValueError("RKC needs at least two stages")
    w0 = 1.0 + damping / s**2
    T = np.zeros(s + 1)
    dT = np.zeros(s + 1)
    d2T = np.zeros(s + 1)
    T[0], T[1] = 1.0, w0
    dT[1] = 1.0
    for j in range(2, s + 1):
        T[j] = 2.0 * w0 * T[j - 1] - T[j - 2]
        dT[j] = 2.0 * T[j - 1] + 2.0 * w0 * dT[j - 1] - dT[j - 2]
        d2T[j] = 4.0 * dT[j - 1] + 2.0 * w0 * d2T[j - 1] - d2T[j - 2]
    w1 = dT[s] / d2T[s]
    b = np.empty(s + 1)
    b[2:] = d2T[2:] / dT[2:] ** 2
    b[0] = b[1] = b[2]
    mu = np.zeros(s + 1)
    nu = np.zeros(s + 1)
    mu_t = np.zeros(s + 1)
    gamma_t = np.zeros(s + 1)
    mu_t[1] = b[1] * w1
    for j in range(2, s + 1):
        mu[j] = 2.0 * b[j] * w0 / b[j - 1]
        nu[j] = -b[j] / b[j - 2]
        mu_t[j] = 2.0 * b[j] * w1 / b[j - 1]
        gamma_t[j] = -(1.0 - b[j - 1] * T[j - 1]) * mu_t[j]
    return _RkcCoefficients(mu, nu, mu_t, gamma_t, beta=(1.0 + w0) / w1)


_RKC_CACHE: dict[int, _RkcCoefficients] = {}


def rkc_stages(dt: float, dt_stable: float) -> int:
    """Fewest stages whose stability interval covers ``dt`` when ``dt_stable`` is the Heun limit."""
    # the Heun bound corresponds to a stability interval of length 2
    need = 2.0 * dt / dt_stable
    s = 2
    while True:
        coef = _RKC_CACHE.get(s)
        if coef is None:
            coef = _RKC_CACHE[s] = rkc_coefficients(s)
        if coef.beta >= need:
            return s
        s += 1


def _advance_rkc(values: np.ndarray, mode: str, dt: float, k0: np.ndarray, s: int) -> np.ndarray:
    c = _RKC_CACHE.get(s) or _RKC_CACHE.setdefault(s, rkc_coefficients(s))
    y0 = values
    y_prev2 = y0
    y_prev = enforce_neumann(y0 + c.mu_t[1] * dt * k0, mode)
    for j in range(2, s + 1):
        fj = _speed(y_prev, mode)
        yj = (
            (1.0 - c.mu[j] - c.nu[j]) * y0
            + c.mu[j] * y_prev
            + c.nu[j] * y_prev2
            + c.mu_t[j] * dt * fj
            + c.gamma_t[j] * dt * k0
        )
        y_prev2, y_prev = y_prev, enforce_neumann(yj, mode)
    return y_prev


def step(state: FlowState, policy: TimeStepPolicy, dt: float | None = None,
         geom: GeometryField | None = None) -> FlowState:
    """One two-stage step.  ``dt`` defaults to the stability bound."""
    u = state.u
    geom = geometry_field(u) if geom is None else geom
    k1 = rhs(u, 0.0, geom)
    if dt is None:
        dt = stable_dt(u, geom, policy)
    if dt < MIN_DT:
        raise StepUnderflow(f"dt = {dt:.3g} at t = {state.t:.6g}")
    new = _advance(np.array(u.values), u.mode, dt, k1)
    return FlowState(t=state.t + dt, u=GraphFunction(u.mode, new), dt_last=dt, steps=state.steps + 1)


def step_rkc(state: FlowState, policy: TimeStepPolicy, dt: float | None = None,
             geom: GeometryField | None = None) -> FlowState:
    """One Runge-Kutta-Chebyshev step with as many stages as the stability bound demands.

    The default ``dt`` is limited by ``dt_max`` and by ``du_max`` (largest nodal
    change of ``u``), never by the parabolic stability bound.
    """
    u = state.u
    geom = geometry_field(u) if geom is None else geom
    k0 = rhs(u, 0.0, geom)
    dt_heun = stable_dt(u, geom, policy)
    if dt is None:
        dt = accuracy_dt(k0, policy)
    if dt < MIN_DT:
        raise StepUnderflow(f"dt = {dt:.3g} at t = {state.t:.6g}")
    if dt <= dt_heun:
        new = _advance(np.array(u.values), u.mode, dt, k0)
        stages = 2
    else:
        stages = rkc_stages(dt, dt_heun)
        new = _advance_rkc(np.array(u.values), u.mode, dt, k0, stages)
    out = FlowState(t=state.t + dt, u=GraphFunction(u.mode, new), dt_last=dt, steps=state.steps + 1)
    out.diagnostics_cache["stages"] = stages
    return out


def accuracy_dt(speed: np.ndarray, policy: TimeStepPolicy) -> float:
    return min(policy.dt_max, policy.du_max / float(np.max(np.abs(speed))))


def snapshot(state: FlowState, geom: GeometryField | None = None) -> Snapshot:
    u = state.u
    geom = geometry_field(u) if geom is None else geom
    rim = u.boundary_index()
    return Snapshot(
        step=state.steps,
        t=state.t,
        values=np.array(u.values),
        area=area(u, geom),
        min_H=float(np.min(geom.H)),
        max_H=float(np.max(geom.H)),
        min_kappa=float(np.min(geom.kappa)),
        max_kappa=float(np.max(geom.kappa)),
        rim_height=float(np.min(geom.w[rim])),
        sup_u_minus_1=float(np.max(np.abs(u.values - 1.0))),
        sup_Du=float(np.max(np.linalg.norm(geom.Du, axis=1))),
    )


def _classify(u: GraphFunction, geom: GeometryField, policy: TimeStepPolicy) -> StopReason | None:
    if np.min(u.values) < 1.0:
        return StopReason.CHART_BREAKDOWN
    if np.max(u.values) - 1.0 <= policy.eps_flat:
        return StopReason.FLATNESS_REACHED
    if np.min(np.einsum("pc,pc->p", geom.df_dlambda, geom.N)) >= 0.0:
        return StopReason.CHART_BREAKDOWN
    if np.min(geom.kappa) <= 0.0:
        return StopReason.CONVEXITY_LOST
    if np.min(geom.H) <= policy.eps_H:
        return StopReason.H_FLOOR_REACHED
    return None


def run(u0: GraphFunction, policy: TimeStepPolicy,
        monitors: Sequence[Callable] = ()) -> RunResult:
    """Integrate until a stop reason fires, recording snapshots on the policy's cadence."""
    if u0.mode == "polar2d":
        raise ModeUnsupported("time stepping is implemented for interval and axisymmetric modes")
    state = FlowState(t=0.0, u=u0)
    snaps: list[Snapshot] = []
    pending = [t for t in policy.record_times if t > 0.0]
    reason: StopReason | None = None
    message = ""
    last_recorded = -1

    while True:
        try:
            geom = geometry_field(state.u)
        except NonFiniteGeometry as exc:
            reason, message = StopReason.NON_FINITE_GEOMETRY, str(exc)
            break
        if state.steps % policy.record_every == 0 or (pending and state.t >= pending[0] - 1e-15):
            snaps.append(snapshot(state, geom))
            last_recorded = state.steps
            # independent curvature path; a disagreement means the kernel can't be trusted
            disagreement = float(np.max(dual_path_residual(state.u, geom)))
            if disagreement > DUAL_PATH_ABORT:
                reason = StopReason.NON_FINITE_GEOMETRY
                message = f"curvature paths disagree by {disagreement:.3g} at t = {state.t:.6g}"
                break
            while pending and state.t >= pending[0] - 1e-15:
                pending.pop(0)
        reason = _classify(state.u, geom, policy)
        if reason is None and state.t >= policy.t_max:
            reason = StopReason.MAX_TIME_REACHED
        if reason is not None:
            break

        if policy.scheme == "heun":
            dt = stable_dt(state.u, geom, policy)
        else:
            dt = accuracy_dt(speed_from_geometry(geom), policy)
        if dt < MIN_DT:
            reason, message = StopReason.STEP_UNDERFLOW, f"dt = {dt:.3g}"
            break
        dt = min(dt, policy.t_max - state.t)
        if pending:
            dt = min(dt, pending[0] - state.t)
        advance = step if policy.scheme == "heun" else step_rkc
        try:
            state = advance(state, policy, dt=dt, geom=geom)
        except NonFiniteGeometry as exc:
            reason, message = StopReason.NON_FINITE_GEOMETRY, str(exc)
            break
        if state.steps % 20000 == 0:
            log.info("step %d t=%.6f dt=%.3g min H=%.4f", state.steps, state.t, dt, np.min(geom.H))

    if last_recorded != state.steps:
        try:
            snaps.append(snapshot(state))
        except NonFiniteGeometry:
            pass
    final = snaps[-1] if snaps else None
    if final is not None:
        state.diagnostics_cache = {
            "area": final.area, "min_H": final.min_H, "max_H": final.max_H,
            "min_kappa": final.min_kappa, "rim_height": final.rim_height,
        }
    result = RunResult(mode=u0.mode, snapshots=snaps, stop_reason=reason, state=state, message=message)
    result.checks = [mon(result) for mon in monitors]
    return result


# ---------------------------------------------------------------------------
# singular time


def limit_area(n: int) -> float:
    """Measure of the flat unit disk the flow converges to."""
    return 2.0 if n == 1 else math.pi


@dataclass(frozen=True)
class SingularTimeEstimate:
    t_star: float
    t_star_fit: float
    slope: float
    intercept: float
    area_law_residual: float
    samples: int


def extrapolate_singular_time(times, areas, n: int, max_residual: float = 0.02) -> SingularTimeEstimate:
    """Singular time from the exact law ``A(t) = A(0) e^t`` and the flat-disk limit area.

    ``t_star`` uses ``A(0)`` directly; ``t_star_fit`` comes from a least-squares
    fit of ``ln A`` against ``t`` and serves as a consistency check.
    """
    t = np.asarray(times, dtype=float)
    a = np.asarray(areas, dtype=float)
    if t.size < 10:
        raise AreaLawViolated(f"need at least 10 samples, got {t.size}")
    residual = float(np.max(np.abs(a * np.exp(-(t - t[0])) / a[0] - 1.0)))
    slope, intercept = np.polyfit(t, np.log(a), 1)
    if residual > max_residual:
        raise AreaLawViolated(f"area-law residual {residual:.3g} exceeds {max_residual:.3g} (fit slope {slope:.4g})")
    a_lim = limit_area(n)
    return SingularTimeEstimate(
        t_star=float(t[0] + math.log(a_lim / a[0])),
        t_star_fit=float((math.log(a_lim) - intercept) / slope),
        slope=float(slope),
        intercept=float(intercept),
        area_law_residual=residual,
        samples=int(t.size),
    )


def with_policy(policy: TimeStepPolicy, **changes) -> TimeStepPolicy:
    return replace(policy, **changes)
