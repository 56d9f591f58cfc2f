"""Extrinsic geometry of graphs ``X = f(x, u(x))`` over the unit disk.

Three discretisations of the disk are supported:

* ``interval``: ``n = 1``, nodes ``x_j`` uniform on ``[-1, 1]``.
* ``axisymmetric``: ``n = 2``, ``u = u(r)`` on uniform ``r_j`` in ``[0, 1]``.
  Each node is evaluated at the Cartesian point ``(r_j, 0)``.
* ``polar2d``: ``n = 2``, ``u = u(r, theta)`` on an ``m x K`` polar grid.
  Used for static evaluation only (no time stepping).

Derivatives are always converted to Cartesian chart coordinates before the
geometry kernel runs, so one kernel serves every mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.integrate import simpson

from .chart import jet, jet_point
from .errors import GridTooCoarse, ModeUnsupported, NonFiniteGeometry

MODES = ("interval", "axisymmetric", "polar2d")


@dataclass(frozen=True)
class GraphFunction:
    """Nodal values of the graph height ``u >= 1``.

    ``values`` has shape ``(m,)`` for the 1-D modes and ``(m, K)`` for
    ``polar2d`` (row 0 is the pole and must be constant).
    """

    mode: str
    values: np.ndarray

    def __post_init__(self):
        if self.mode not in MODES:
            raise ModeUnsupported(f"unknown mode {self.mode!r}")
        vals = np.array(self.values, dtype=float)
        if self.mode == "polar2d":
            if vals.ndim != 2:
                raise ValueError("polar2d values must be an (m, K) array")
            if vals.shape[1] < 8 or vals.shape[1] % 2:
                raise GridTooCoarse("polar2d needs an even number K >= 8 of angles")
        elif vals.ndim != 1:
            raise ValueError(f"{self.mode} values must be one-dimensional")
        if vals.shape[0] < 5:
            raise GridTooCoarse(f"need m >= 5 nodes, got {vals.shape[0]}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return 1 if self.mode == "interval" else 2

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> float:
        return (2.0 if self.mode == "interval" else 1.0) / (self.m - 1)

    @property
    def nodes(self) -> np.ndarray:
        """``x_j`` for interval mode, ``r_j`` otherwise."""
        if self.mode == "interval":
            return np.linspace(-1.0, 1.0, self.m)
        return np.linspace(0.0, 1.0, self.m)

    @property
    def thetas(self) -> np.ndarray:
        if self.mode != "polar2d":
            raise ModeUnsupported("angles exist only in polar2d mode")
        k = self.values.shape[1]
        return 2.0 * np.pi * np.arange(k) / k

    def points(self) -> np.ndarray:
        """Cartesian chart points of all nodes, shape ``(M, n)``."""
        if self.mode == "interval":
            return self.nodes[:, None]
        r = self.nodes
        if self.mode == "axisymmetric":
            return np.column_stack([r, np.zeros_like(r)])
        th = self.thetas
        rr, tt = np.meshgrid(r, th, indexing="ij")
        return np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=-1).reshape(-1, 2)

    def flat_values(self) -> np.ndarray:
        return self.values.reshape(-1)

    def boundary_index(self) -> np.ndarray:
        """Indices into the flattened node arrays of the boundary nodes."""
        m = self.m
        if self.mode == "interval":
            return np.array([0, m - 1])
        if self.mode == "axisymmetric":
            return np.array([m - 1])
        k = self.values.shape[1]
        return (m - 1) * k + np.arange(k)

    def with_values(self, values) -> GraphFunction:
        return GraphFunction(self.mode, values)


# ---------------------------------------------------------------------------
# finite differences


def _d1(v, h):
    """First derivative along axis 0: central inside, one-sided second order at both ends."""
    d = np.empty_like(v)
    d[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    d[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    return d


def _d2(v, h):
    d = np.empty_like(v)
    d[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (h * h)
    d[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h)
    d[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / (h * h)
    return d


def _periodic_derivative(v, order):
    """Spectral derivative along axis 1 of samples on a uniform full-period grid."""
    k = v.shape[1]
    wav = np.fft.rfftfreq(k, d=1.0 / k)
    mult = (1j * wav) ** order
    if order % 2 and k % 2 == 0:
        mult[-1] = 0.0  # Nyquist mode has no odd derivative
    return np.fft.irfft(np.fft.rfft(v, axis=1) * mult[None, :], n=k, axis=1)


def radial_derivatives(values, h):
    """``(u', u'')`` of an even radial profile: mirror ghost at the pole, one-sided at ``r = 1``."""
    u = np.asarray(values, dtype=float)
    d1 = _d1(u, h)
    d2 = _d2(u, h)
    d1[0] = 0.0
    d2[0] = 2.0 * (u[1] - u[0]) / (h * h)
    return d1, d2


def differentiate(u: GraphFunction) -> tuple[np.ndarray, np.ndarray]:
    """Cartesian gradient ``(M, n)`` and Hessian ``(M, n, n)`` of ``u`` at every node."""
    h = u.h
    vals = u.values
    if u.mode == "interval":
        return _d1(vals, h)[:, None], _d2(vals, h)[:, None, None]

    if u.mode == "axisymmetric":
        r = u.nodes
        d1, d2 = radial_derivatives(vals, h)
        m = u.m
        Du = np.zeros((m, 2))
        D2u = np.zeros((m, 2, 2))
        Du[:, 0] = d1
        D2u[:, 0, 0] = d2
        D2u[1:, 1, 1] = d1[1:] / r[1:]
        D2u[0, 1, 1] = d2[0]
        return Du, D2u

    return _polar_derivatives(u)


def _polar_derivatives(u: GraphFunction):
    vals = u.values
    m, k = vals.shape
    h = u.h
    r = u.nodes
    th = u.thetas

    ur = _d1(vals, h)
    urr = _d2(vals, h)
    ut = _periodic_derivative(vals, 1)
    utt = _periodic_derivative(vals, 2)
    urt = _d1(ut, h)

    c = np.cos(th)[None, :]
    s = np.sin(th)[None, :]
    rr = np.where(r > 0.0, r, 1.0)[:, None]
    Du = np.empty((m, k, 2))
    Du[..., 0] = c * ur - s * ut / rr
    Du[..., 1] = s * ur + c * ut / rr
    D2u = np.empty((m, k, 2, 2))
    D2u[..., 0, 0] = (
        c * c * urr + s * s * ur / rr + s * s * utt / rr**2 - 2 * c * s * urt / rr + 2 * c * s * ut / rr**2
    )
    D2u[..., 1, 1] = (
        s * s * urr + c * c * ur / rr + c * c * utt / rr**2 + 2 * c * s * urt / rr - 2 * c * s * ut / rr**2
    )
    D2u[..., 0, 1] = (
        c * s * urr
        - c * s * ur / rr
        - c * s * utt / rr**2
        + (c * c - s * s) * urt / rr
        - (c * c - s * s) * ut / rr**2
    )
    D2u[..., 1, 0] = D2u[..., 0, 1]

    # pole: lines through the origin along theta_k, fitted in least squares
    half = k // 2
    u0 = vals[0, 0]
    fwd = vals[1]
    bwd = np.roll(vals[1], -half)
    dir1 = (fwd - bwd) / (2.0 * h)
    dir2 = (fwd - 2.0 * u0 + bwd) / (h * h)
    ct, st = np.cos(th), np.sin(th)
    grad = np.linalg.lstsq(np.column_stack([ct, st]), dir1, rcond=None)[0]
    hess = np.linalg.lstsq(np.column_stack([ct * ct, 2 * ct * st, st * st]), dir2, rcond=None)[0]
    Du[0] = grad
    D2u[0] = np.array([[hess[0], hess[1]], [hess[1], hess[2]]])
    return Du.reshape(-1, 2), D2u.reshape(-1, 2, 2)


def neumann_residual(u: GraphFunction) -> float:
    """Largest outward normal derivative of ``u`` on the boundary (second-order one-sided)."""
    h = u.h
    vals = u.values
    if u.mode == "interval":
        left = (-3.0 * vals[0] + 4.0 * vals[1] - vals[2]) / (2.0 * h)
        right = (3.0 * vals[-1] - 4.0 * vals[-2] + vals[-3]) / (2.0 * h)
        return float(max(abs(left), abs(right)))
    rim = (3.0 * vals[-1] - 4.0 * vals[-2] + vals[-3]) / (2.0 * h)
    return float(np.max(np.abs(rim)))


def enforce_neumann(values: np.ndarray, mode: str) -> np.ndarray:
    """Reset boundary values so the one-sided normal derivative vanishes (in place)."""
    if mode == "interval":
        values[0] = (4.0 * values[1] - values[2]) / 3.0
    values[-1] = (4.0 * values[-2] - values[-3]) / 3.0
    return values


# ---------------------------------------------------------------------------
# geometry kernel


@njit(cache=True)
def _geometry_kernel(pts, u, Du, D2u):
    M, n = pts.shape
    dim = n + 1
    X = np.empty((M, dim))
    N = np.empty((M, dim))
    dX = np.empty((M, n, dim))
    flam = np.empty((M, dim))
    v = np.empty(M)
    epsi = np.empty(M)
    g = np.empty((M, n, n))
    ginv = np.empty((M, n, n))
    hh = np.empty((M, n, n))
    kappa = np.empty((M, n))
    H = np.empty(M)

    f = np.empty(dim)
    df = np.empty((dim, dim))
    d2f = np.empty((dim, dim, dim))
    sig = np.empty((n, n))
    siginv = np.empty((n, n))
    d2X = np.empty((n, n, dim))
    bad = -1

    for p in range(M):
        jet_point(pts[p], u[p], 2, f, df, d2f)
        du = Du[p]
        for c in range(dim):
            X[p, c] = f[c]
            flam[p, c] = df[0, c]
        e2 = 0.0
        for c in range(dim):
            e2 += df[0, c] * df[0, c]
        ep = np.sqrt(e2)
        epsi[p] = ep

        for i in range(n):
            for c in range(dim):
                dX[p, i, c] = df[i + 1, c] + df[0, c] * du[i]
        for i in range(n):
            for j in range(n):
                for c in range(dim):
                    d2X[i, j, c] = (
                        d2f[i + 1, j + 1, c]
                        + d2f[i + 1, 0, c] * du[j]
                        + d2f[j + 1, 0, c] * du[i]
                        + d2f[0, 0, c] * du[i] * du[j]
                        + df[0, c] * D2u[p, i, j]
                    )

        for i in range(n):
            for j in range(n):
                acc = 0.0
                accs = 0.0
                for c in range(dim):
                    acc += dX[p, i, c] * dX[p, j, c]
                    accs += df[i + 1, c] * df[j + 1, c]
                g[p, i, j] = acc
                sig[i, j] = accs / e2

        if n == 1:
            siginv[0, 0] = 1.0 / sig[0, 0]
            ginv[p, 0, 0] = 1.0 / g[p, 0, 0]
        else:
            ds = sig[0, 0] * sig[1, 1] - sig[0, 1] * sig[1, 0]
            siginv[0, 0] = sig[1, 1] / ds
            siginv[1, 1] = sig[0, 0] / ds
            siginv[0, 1] = -sig[0, 1] / ds
            siginv[1, 0] = -sig[1, 0] / ds
            dg = g[p, 0, 0] * g[p, 1, 1] - g[p, 0, 1] * g[p, 1, 0]
            ginv[p, 0, 0] = g[p, 1, 1] / dg
            ginv[p, 1, 1] = g[p, 0, 0] / dg
            ginv[p, 0, 1] = -g[p, 0, 1] / dg
            ginv[p, 1, 0] = -g[p, 1, 0] / dg

        vv = 1.0
        for i in range(n):
            for j in range(n):
                vv += siginv[i, j] * du[i] * du[j]
        vp = np.sqrt(vv)
        v[p] = vp

        # N = -(v e^psi)^-1 (f_lam - sigma^{ik} u_k f_i), so <f_lam, N> < 0
        for c in range(dim):
            acc = df[0, c]
            for i in range(n):
                w = 0.0
                for k in range(n):
                    w += siginv[i, k] * du[k]
                acc -= w * df[i + 1, c]
            N[p, c] = -acc / (vp * ep)

        for i in range(n):
            for j in range(n):
                acc = 0.0
                for c in range(dim):
                    acc += d2X[i, j, c] * N[p, c]
                hh[p, i, j] = -acc

        if n == 1:
            k0 = hh[p, 0, 0] / g[p, 0, 0]
            kappa[p, 0] = k0
            H[p] = k0
        else:
            dg = g[p, 0, 0] * g[p, 1, 1] - g[p, 0, 1] * g[p, 1, 0]
            dh = hh[p, 0, 0] * hh[p, 1, 1] - hh[p, 0, 1] * hh[p, 1, 0]
            tr = 0.0
            for i in range(2):
                for j in range(2):
                    tr += ginv[p, i, j] * hh[p, j, i]
            H[p] = tr
            disc = tr * tr - 4.0 * dh / dg
            if disc < 0.0:
                disc = 0.0
            sq = np.sqrt(disc)
            kappa[p, 0] = 0.5 * (tr - sq)
            kappa[p, 1] = 0.5 * (tr + sq)

        if bad < 0 and not (np.isfinite(H[p]) and np.isfinite(vp) and np.isfinite(ep)):
            bad = p
    return X, N, dX, flam, v, epsi, g, ginv, hh, kappa, H, bad


@dataclass(frozen=True)
class GeometrySample:
    X: np.ndarray
    N: np.ndarray
    v: float
    e_psi: float
    g: np.ndarray
    g_inv: np.ndarray
    h: np.ndarray
    kappa: np.ndarray
    H: float
    w: float


@dataclass(frozen=True)
class GeometryField:
    """Per-node geometry arrays; the first axis runs over the flattened nodes."""

    u: GraphFunction
    points: np.ndarray
    Du: np.ndarray
    D2u: np.ndarray
    X: np.ndarray
    N: np.ndarray
    dX: np.ndarray
    df_dlambda: np.ndarray
    v: np.ndarray
    e_psi: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    h: np.ndarray
    kappa: np.ndarray
    H: np.ndarray
    w: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "w", self.X[:, 0].copy())

    def __len__(self):
        return self.X.shape[0]

    def sample(self, i: int) -> GeometrySample:
        return GeometrySample(
            X=self.X[i],
            N=self.N[i],
            v=float(self.v[i]),
            e_psi=float(self.e_psi[i]),
            g=self.g[i],
            g_inv=self.g_inv[i],
            h=self.h[i],
            kappa=self.kappa[i],
            H=float(self.H[i]),
            w=float(self.w[i]),
        )


def geometry_from_derivatives(points, values, Du, D2u, u: GraphFunction | None = None) -> GeometryField:
    """Run the kernel on explicit node data (chart points, heights, Cartesian derivatives)."""
    points = np.ascontiguousarray(points, dtype=float)
    values = np.ascontiguousarray(values, dtype=float)
    Du = np.ascontiguousarray(Du, dtype=float)
    D2u = np.ascontiguousarray(D2u, dtype=float)
    X, N, dX, flam, v, epsi, g, ginv, hh, kappa, H, bad = _geometry_kernel(points, values, Du, D2u)
    if bad >= 0:
        raise NonFiniteGeometry(f"non-finite geometry at node {bad}", node=int(bad))
    return GeometryField(
        u=u, points=points, Du=Du, D2u=D2u, X=X, N=N, dX=dX, df_dlambda=flam,
        v=v, e_psi=epsi, g=g, g_inv=ginv, h=hh, kappa=kappa, H=H,
    )


def geometry_field(u: GraphFunction) -> GeometryField:
    """Embedding, normal, metric, second fundamental form and curvatures at every node."""
    Du, D2u = differentiate(u)
    vals = u.flat_values()
    if np.any(vals < 1.0):
        bad = int(np.argmin(vals))
        raise NonFiniteGeometry(f"u = {vals[bad]:.6g} < 1 leaves the chart", node=bad)
    return geometry_from_derivatives(u.points(), vals, Du, D2u, u)


# ---------------------------------------------------------------------------
# surface-of-revolution path


@dataclass(frozen=True)
class MeridianProfile:
    """Meridian curve ``(s, z)`` and its first two derivatives in the grid parameter."""

    s: np.ndarray
    z: np.ndarray
    ds: np.ndarray
    dz: np.ndarray
    d2s: np.ndarray
    d2z: np.ndarray


def meridian_profile(u: GraphFunction) -> MeridianProfile:
    """Meridian of a 1-D mode graph, using the planar chart and the grid derivatives of ``u``."""
    if u.mode not in ("interval", "axisymmetric"):
        raise ModeUnsupported("meridian profiles need interval or axisymmetric data")
    if u.mode == "interval":
        d1, d2 = _d1(u.values, u.h), _d2(u.values, u.h)
    else:
        d1, d2 = radial_derivatives(u.values, u.h)
    j = jet(u.nodes[:, None], u.values, order=2)
    # meridian plane: components (e0, e1) -> (z, s)
    df_dt = j.df[:, 1, :] + j.df[:, 0, :] * d1[:, None]
    d2f = j.d2f
    d2f_dt = (
        d2f[:, 1, 1, :]
        + 2.0 * d2f[:, 1, 0, :] * d1[:, None]
        + d2f[:, 0, 0, :] * (d1 * d1)[:, None]
        + j.df[:, 0, :] * d2[:, None]
    )
    return MeridianProfile(
        s=j.f[:, 1], z=j.f[:, 0],
        ds=df_dt[:, 1], dz=df_dt[:, 0],
        d2s=d2f_dt[:, 1], d2z=d2f_dt[:, 0],
    )


def axisym_curvatures(profile: MeridianProfile) -> tuple[np.ndarray, np.ndarray]:
    """Meridian and parallel curvatures of the surface of revolution about the ``e0`` axis.

    The normal is ``(dz, -ds) / L`` in ``(s, z)`` components, the orientation that
    points down the axis at the pole.  Where ``s = 0`` the parallel curvature is
    replaced by its limit, the meridian curvature.
    """
    L = np.hypot(profile.ds, profile.dz)
    k_mer = (profile.ds * profile.d2z - profile.dz * profile.d2s) / L**3
    on_axis = np.abs(profile.s) < 1e-14
    safe_s = np.where(on_axis, 1.0, profile.s)
    k_par = np.where(on_axis, k_mer, profile.dz / (L * safe_s))
    return k_mer, k_par


def dual_path_residual(u: GraphFunction, geom: GeometryField | None = None) -> np.ndarray:
    """Per-node disagreement between the chart kernel and the revolution formulas.

    Relative to ``max(1, |kappa|)`` so that flat regions are compared absolutely.
    """
    geom = geometry_field(u) if geom is None else geom
    k_mer, k_par = axisym_curvatures(meridian_profile(u))
    if u.n == 1:
        other = k_mer[:, None]
    else:
        other = np.sort(np.column_stack([k_mer, k_par]), axis=1)
    return np.max(np.abs(geom.kappa - other) / np.maximum(1.0, np.abs(other)), axis=1)


# ---------------------------------------------------------------------------
# boundary quantities


@dataclass(frozen=True)
class BoundaryFrame:
    """Conormal data at the boundary nodes (first axis runs over ``u.boundary_index()``).

    ``n_tilde`` holds contravariant chart components, ``z_I`` the boundary tangent
    (``None`` when ``n = 1``), ``nu`` the ambient unit normal of the boundary
    inside the sphere.
    """

    index: np.ndarray
    n_tilde: np.ndarray
    z_I: np.ndarray | None
    nu: np.ndarray


def boundary_frame(u: GraphFunction, geom: GeometryField | None = None) -> BoundaryFrame:
    geom = geometry_field(u) if geom is None else geom
    idx = u.boundary_index()
    pts = geom.points[idx]
    radial = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    ginv = geom.g_inv[idx]
    raised = np.einsum("pij,pj->pi", ginv, radial)
    norm = np.sqrt(np.einsum("pi,pi->p", raised, radial))
    n_tilde = raised / norm[:, None]
    z_I = None
    if u.n == 2:
        z_I = np.column_stack([-radial[:, 1], radial[:, 0]])
    return BoundaryFrame(index=idx, n_tilde=n_tilde, z_I=z_I, nu=geom.N[idx].copy())


def _one_sided(F_edge, h):
    """Third-order one-sided derivative; ``F_edge[0]`` is the boundary value, then inward."""
    return (11.0 * F_edge[0] - 18.0 * F_edge[1] + 9.0 * F_edge[2] - 2.0 * F_edge[3]) / (6.0 * h)


def boundary_gradient(field_values, u: GraphFunction) -> np.ndarray:
    """Cartesian gradient of a nodal scalar at the boundary nodes (one-sided in the normal direction)."""
    h = u.h
    F = np.asarray(field_values, dtype=float)
    if u.mode == "interval":
        left = -_one_sided(F[:4], h)
        right = _one_sided(F[::-1][:4], h)
        return np.array([[left], [right]])
    if u.mode == "axisymmetric":
        return np.array([[_one_sided(F[::-1][:4], h), 0.0]])
    grid = F.reshape(u.values.shape)
    fr = _one_sided(grid[::-1][:4], h)
    ft = _periodic_derivative(grid[-1:], 1)[0]
    th = u.thetas
    c, s = np.cos(th), np.sin(th)
    return np.column_stack([c * fr - s * ft, s * fr + c * ft])


def directional_boundary_derivative(field_values, u: GraphFunction, frame: BoundaryFrame) -> np.ndarray:
    """Derivative of a nodal scalar along the conormal at each boundary node."""
    grad = boundary_gradient(field_values, u)
    return np.einsum("pi,pi->p", frame.n_tilde, grad)


# ---------------------------------------------------------------------------
# integrals


def area_element(geom: GeometryField) -> np.ndarray:
    if geom.g.shape[1] == 1:
        return np.sqrt(geom.g[:, 0, 0])
    return np.sqrt(np.linalg.det(geom.g))


def area(u: GraphFunction, geom: GeometryField | None = None) -> float:
    """Total area (length for ``n = 1``) of the graph by Simpson quadrature in the grid coordinates."""
    geom = geometry_field(u) if geom is None else geom
    dmu = area_element(geom)
    if u.mode == "interval":
        return float(simpson(dmu, x=u.nodes))
    r = u.nodes
    if u.mode == "axisymmetric":
        return float(2.0 * np.pi * simpson(dmu * r, x=r))
    grid = dmu.reshape(u.values.shape)
    ring = grid.mean(axis=1) * 2.0 * np.pi
    return float(simpson(ring * r, x=r))
