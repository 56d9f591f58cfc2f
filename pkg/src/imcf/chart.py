"""Moebius coordinates for the pointed half-ball.

The chart ``f(x, lam)`` maps ``D x [1, inf)`` onto ``B+ = {|q| <= 1, q_0 >= 0} \\ {e0}``::

    f(x, lam) = (4 lam x + (1 + |x|^2)(lam^2 - 1) e0) / ((1 + lam)^2 + (1 - lam)^2 |x|^2)

Ambient vectors carry the ``e0`` component first, followed by the ``n``
directions of the disk.  Chart coordinates are ordered ``(lam, x^1, ..., x^n)``
so ``df[..., 0, :]`` is the lambda tangent and ``df[..., i, :]`` the x^i tangent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DegenerateSlice, NoConvergence, PointOutsideChart

__all__ = [
    "ChartPoint",
    "ChartJet",
    "SliceSphere",
    "map_point",
    "jet",
    "conformal_factor",
    "sigma_metric",
    "inverse_map",
    "slice_sphere",
]


@dataclass(frozen=True)
class ChartPoint:
    x: np.ndarray
    lam: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "lam", float(self.lam))
        if np.dot(x, x) > 1.0 + 1e-12:
            raise PointOutsideChart(f"|x| = {np.linalg.norm(x):.6g} > 1")
        if self.lam < 1.0:
            raise PointOutsideChart(f"lambda = {self.lam:.6g} < 1")


@dataclass(frozen=True)
class ChartJet:
    """Value and derivatives of the chart, possibly batched over leading axes.

    ``df[..., a, :]`` is the derivative along chart coordinate ``a``;
    ``d2f[..., a, b, :]`` the mixed second derivative (``None`` for order 1).
    """

    f: np.ndarray
    df: np.ndarray
    d2f: np.ndarray | None = None

    @property
    def df_dlambda(self) -> np.ndarray:
        return self.df[..., 0, :]

    @property
    def df_dx(self) -> np.ndarray:
        return self.df[..., 1:, :]


@dataclass(frozen=True)
class SliceSphere:
    """Sphere through the slice ``f(D, lam)``, centred at ``center_height * e0``."""

    center_height: float
    radius: float


def map_point(x, lam) -> np.ndarray:
    """Evaluate the chart.  ``x`` has shape ``(..., n)``, ``lam`` broadcasts against ``(...)``."""
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    s = np.sum(x * x, axis=-1)
    den = (1.0 + lam) ** 2 + (1.0 - lam) ** 2 * s
    out = np.empty(np.broadcast_shapes(x.shape[:-1], lam.shape) + (x.shape[-1] + 1,))
    out[..., 0] = (1.0 + s) * (lam * lam - 1.0) / den
    out[..., 1:] = 4.0 * (lam / den)[..., None] * x
    return out


@njit(cache=True, inline="always")
def jet_point(x, lam, order, f, df, d2f):
    """Closed-form jet at one chart point, written into preallocated arrays.

    Quotient rule applied to ``f = P / D`` with
    ``P = 4 lam x + (1 + s)(lam^2 - 1) e0`` and ``D = (1 + lam)^2 + (1 - lam)^2 s``.
    """
    n = x.shape[0]
    dim = n + 1
    s = 0.0
    for k in range(n):
        s += x[k] * x[k]
    lp = 1.0 + lam
    lm = lam - 1.0
    l2m = lam * lam - 1.0
    inv = 1.0 / (lp * lp + lm * lm * s)
    dD0 = 2.0 * lp + 2.0 * lm * s
    cx = 2.0 * lm * lm  # dD/dx^i = cx x^i, d2D/dx^i dx^j = cx delta_ij

    f[0] = (1.0 + s) * l2m * inv
    for k in range(n):
        f[k + 1] = 4.0 * lam * x[k] * inv

    # lambda derivative
    df[0, 0] = (2.0 * lam * (1.0 + s) - f[0] * dD0) * inv
    for k in range(n):
        df[0, k + 1] = (4.0 * x[k] - f[k + 1] * dD0) * inv
    # x^i derivatives
    for i in range(n):
        dDi = cx * x[i]
        df[i + 1, 0] = (2.0 * x[i] * l2m - f[0] * dDi) * inv
        for k in range(n):
            df[i + 1, k + 1] = -f[k + 1] * dDi * inv
        df[i + 1, i + 1] += 4.0 * lam * inv

    if order < 2:
        return

    # f_ab = (P_ab - f_a D_b - f_b D_a - f D_ab) / D
    D00 = 2.0 + 2.0 * s
    d2f[0, 0, 0] = (2.0 * (1.0 + s) - 2.0 * df[0, 0] * dD0 - f[0] * D00) * inv
    for k in range(n):
        d2f[0, 0, k + 1] = (-2.0 * df[0, k + 1] * dD0 - f[k + 1] * D00) * inv
    for i in range(n):
        dDi = cx * x[i]
        D0i = 4.0 * lm * x[i]
        for c in range(dim):
            val = (-df[0, c] * dDi - df[i + 1, c] * dD0 - f[c] * D0i) * inv
            if c == 0:
                val += 4.0 * lam * x[i] * inv
            elif c == i + 1:
                val += 4.0 * inv
            d2f[0, i + 1, c] = val
            d2f[i + 1, 0, c] = val
        for j in range(i, n):
            dDj = cx * x[j]
            for c in range(dim):
                val = (-df[i + 1, c] * dDj - df[j + 1, c] * dDi) * inv
                if i == j:
                    val -= f[c] * cx * inv
                    if c == 0:
                        val += 2.0 * l2m * inv
                d2f[i + 1, j + 1, c] = val
                d2f[j + 1, i + 1, c] = val


@njit(cache=True)
def _jet_batch(x, lam, order):
    npts, n = x.shape
    dim = n + 1
    f = np.empty((npts, dim))
    df = np.empty((npts, dim, dim))
    d2f = np.empty((npts, dim, dim, dim))
    for p in range(npts):
        jet_point(x[p], lam[p], order, f[p], df[p], d2f[p])
    return f, df, d2f


def jet(x, lam, order: int = 1) -> ChartJet:
    """Chart value with first (and for ``order=2`` second) derivatives."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    batch = np.broadcast_shapes(x.shape[:-1], lam.shape)
    n = x.shape[-1]
    xb = np.ascontiguousarray(np.broadcast_to(x, batch + (n,)).reshape(-1, n))
    lb = np.ascontiguousarray(np.broadcast_to(lam, batch).reshape(-1))
    f, df, d2f = _jet_batch(xb, lb, order)
    dim = n + 1
    return ChartJet(
        f=f.reshape(batch + (dim,)),
        df=df.reshape(batch + (dim, dim)),
        d2f=d2f.reshape(batch + (dim, dim, dim)) if order == 2 else None,
    )


def conformal_factor(x, lam) -> np.ndarray:
    """``e^psi = |df/dlam| = 2 (1 + |x|^2) / ((1 + lam)^2 + (1 - lam)^2 |x|^2)``."""
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    s = np.sum(x * x, axis=-1)
    return 2.0 * (1.0 + s) / ((1.0 + lam) ** 2 + (1.0 - lam) ** 2 * s)


def sigma_metric(x, lam) -> np.ndarray:
    """Spatial part of the ambient metric in chart coordinates, ``e^{-2 psi} <f_i, f_j>``."""
    j = jet(x, lam, order=1)
    fx = j.df_dx
    gram = np.einsum("...ic,...jc->...ij", fx, fx)
    e2psi = np.einsum("...c,...c->...", j.df_dlambda, j.df_dlambda)
    return gram / e2psi[..., None, None]


def slice_sphere(lam: float) -> SliceSphere:
    lam = float(lam)
    if lam <= 1.0:
        raise DegenerateSlice("the lambda = 1 slice is the flat disk")
    return SliceSphere(
        center_height=(lam * lam + 1.0) / (lam * lam - 1.0),
        radius=2.0 * lam / (lam * lam - 1.0),
    )


def inverse_map(q, *, tol: float = 1e-13, max_iter: int = 100) -> ChartPoint:
    """Chart coordinates of an ambient point in the pointed half-ball.

    The map commutes with rotations fixing ``e0``, so Newton runs on the
    meridian plane for ``(|x|, lam)`` and the direction of ``x`` is restored
    from the horizontal part of ``q``.
    """
    q = np.asarray(q, dtype=float)
    q0 = q[0]
    qh = q[1:]
    rho_t = float(np.linalg.norm(qh))
    if np.dot(q, q) > 1.0 + 1e-12 or q0 < -1e-14:
        raise PointOutsideChart(f"{q} is outside the closed upper half-ball")
    if rho_t < 1e-15 and abs(q0 - 1.0) < 1e-12:
        raise PointOutsideChart("e0 is excluded from the chart")

    target = np.array([q0, rho_t])
    z = np.array([min(rho_t, 1.0), 1.0])  # (rho, lam)
    f = np.empty(2)
    df = np.empty((2, 2))
    d2f = np.empty((2, 2, 2))
    xr = np.empty(1)

    def residual(z):
        xr[0] = z[0]
        jet_point(xr, z[1], 1, f, df, d2f)
        return f - target

    r = residual(z)
    for _ in range(max_iter):
        err = np.linalg.norm(r)
        if err <= tol:
            break
        # columns: d/drho (chart coord 1), d/dlam (chart coord 0)
        jac = np.column_stack([df[1], df[0]])
        step = np.linalg.solve(jac, -r)
        t = 1.0
        while True:
            trial = z + t * step
            trial[0] = min(max(trial[0], 0.0), 1.0)
            trial[1] = max(trial[1], 1.0)
            r_trial = residual(trial)
            if np.linalg.norm(r_trial) < err or t < 1e-8:
                break
            t *= 0.5
        z, r = trial, r_trial
    else:
        if np.linalg.norm(r) > tol:
            raise NoConvergence(f"Newton did not converge for q = {q}")
    if np.linalg.norm(r) > max(tol, 1e-12):
        raise NoConvergence(f"Newton stalled at residual {np.linalg.norm(r):.3g} for q = {q}")

    direction = qh / rho_t if rho_t > 0.0 else np.zeros_like(qh)
    return ChartPoint(x=z[0] * direction, lam=z[1])
