"""Null-bicharacteristic flow on the bordified spacetime.

Geometry.  Points z in R^n (last coordinate = time) are compactified by
rho = 1/|z| together with polar data on the sphere of directions: the
latitude v in [-1, 1] with v = (z_n^2 - |z''|^2)/|z|^2, a cap sign
(future/past half), and a stereographic chart point y for the direction of
z'' on the (n-2)-sphere.  Covectors are written in the b-frame

    zeta . dz = sigma d rho / rho + gamma dv + eta . dy,

and the rescaled dual metric function ("symbol") is, exactly and
rho-independently,

    lam = v sigma^2 - 4(1-v^2) sigma gamma - 4v(1-v^2) gamma^2
          - (2/(1-v)) h^{ij} eta_i eta_j,

with h^{ij} = delta^{ij} (1+|y|^2)^2 / 4 the round dual metric in the
stereographic chart.  The radial invariant set sits at rho = v = sigma = 0,
eta = 0, gamma != 0; gamma > 0 there is a sink for the forward flow,
gamma < 0 a source.

Numerics.  The v-chart degenerates where dv vanishes (the zero-time slice
and the time axis), so the integrator works in the smooth latitude
w = z_n/|z| (v = 2w^2 - 1, cap = sign w) with its own fiber frame
gamma_w = gamma dv/dw = 4 w gamma, and in plain interior coordinates
(z, zeta) while rho is large.  The fiber is integrated projectivized
(unit vector u plus log-scale k) in a rescaled parameter d tau = |fiber| dt,
which turns the finite-time fiber blow-up at the radial set into an
exponential approach.  Recorded symbol values are taken at the unit fiber,
hence scale-free and exactly zero on null rays in exact arithmetic.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ChartError, ClassificationError, StiffnessError
from .radial import RadialSet

__all__ = [
    "InteriorCovector",
    "BCotangentPoint",
    "RayTrace",
    "compactify",
    "decompactify",
    "hamiltonian",
    "flow",
    "classify_limit",
    "radial_flow_signature",
    "random_null_rays",
]

_NULL_TOL = 1e-8


# --- chart helpers -------------------------------------------------------

def _sphere_point(chart: int, y: np.ndarray) -> np.ndarray:
    """Direction on S^{m} in R^{m+1} from stereographic chart coordinates."""
    y = np.asarray(y, dtype=float)
    d = 1.0 + float(y @ y)
    sign = 1.0 if chart == 0 else -1.0
    return np.concatenate(([sign * (2.0 - d) / d], 2.0 * y / d))


def _sphere_chart(omega: np.ndarray) -> tuple[int, np.ndarray]:
    """Chart id and coordinates for a unit direction, picked by hemisphere."""
    chart = 0 if omega[0] >= 0.0 else 1
    return chart, omega[1:] / (1.0 + abs(omega[0]))


def _sphere_jacobian(chart: int, y: np.ndarray) -> np.ndarray:
    """Rows d omega / d y_i, shape (m, m+1)."""
    y = np.asarray(y, dtype=float)
    m = y.size
    d = 1.0 + float(y @ y)
    sign = 1.0 if chart == 0 else -1.0
    J = np.zeros((m, m + 1))
    J[:, 0] = sign * (-4.0 * y / (d * d))
    for i in range(m):
        J[i, 1:] = -4.0 * y[i] * y / (d * d)
        J[i, 1 + i] += 2.0 / d
    return J


def _chart_transition(y: np.ndarray, eta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Move (y, eta) to the opposite stereographic chart (y -> y/|y|^2)."""
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    r2 = float(y @ y)
    ynew = y / r2
    # eta transforms by the transpose Jacobian of y(y'): d y_i / d y'_j
    J = np.eye(y.size) / r2 - 2.0 * np.outer(y, y) / (r2 * r2)
    return ynew, J @ eta


# --- public types --------------------------------------------------------

@dataclass(frozen=True)
class InteriorCovector:
    """Phase-space point in plain coordinates; zeta must be nonzero."""

    z: np.ndarray
    zeta: np.ndarray

    def __post_init__(self) -> None:
        z = np.asarray(self.z, dtype=float)
        zeta = np.asarray(self.zeta, dtype=float)
        if z.ndim != 1 or z.shape != zeta.shape or z.size < 2:
            raise ChartError("z and zeta must be matching vectors, dimension >= 2")
        if not np.any(zeta != 0.0):
            raise ChartError("zeta must be nonzero")
        object.__setattr__(self, "z", z.copy())
        object.__setattr__(self, "zeta", zeta.copy())

    @property
    def n(self) -> int:
        return self.z.size

    def symbol(self) -> float:
        """zeta_n^2 - |zeta''|^2."""
        return float(self.zeta[-1] ** 2 - self.zeta[:-1] @ self.zeta[:-1])

    def is_null(self, tol: float = _NULL_TOL) -> bool:
        return abs(self.symbol()) <= tol * float(self.zeta @ self.zeta)


@dataclass(frozen=True)
class BCotangentPoint:
    """Compactified phase-space point in the b-frame.

    cap is +1 on the future half (z_n > 0), -1 on the past half; chart is
    the stereographic chart id for y; chart_ok is cleared where the
    (rho, v, y) frame degenerates (v at +-1 or the direction axis).
    """

    n: int
    rho: float
    v: float
    y: tuple
    sigma: float
    gamma: float
    eta: tuple
    cap: int = 1
    chart: int = 0
    chart_ok: bool = True

    def fiber(self) -> np.ndarray:
        return np.concatenate(([self.sigma, self.gamma], np.asarray(self.eta)))


@dataclass(frozen=True)
class RayTrace:
    """Sampled flow line with scale-free symbol values and solver stats.

    Fiber data per sample is the unit vector (v-frame) plus log-scale; the
    raw fiber is unit * e^{log_scale}.  stats records accepted steps,
    function evaluations and an estimated rejected-step count (the solver
    does not expose rejects; the estimate divides leftover evaluations by
    the stage count).
    """

    times: np.ndarray
    points: tuple
    lam: np.ndarray  # unit-fiber symbol values
    log_scale: np.ndarray
    nonnull: bool
    truncated: str | None
    stats: dict

    def end_point(self) -> BCotangentPoint:
        return self.points[-1]

    def symbol_drift(self) -> float:
        return float(np.max(np.abs(self.lam - self.lam[0])))

    def to_csv(self, path) -> None:
        m = self.points[0].n - 2
        header = (
            ["t", "rho", "v"]
            + [f"y{i}" for i in range(m)]
            + ["sigma", "gamma"]
            + [f"eta{i}" for i in range(m)]
            + ["lambda", "chart", "log_scale"]
        )
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            for t, pt, lam, k in zip(self.times, self.points, self.lam, self.log_scale):
                scale = math.exp(k) if k < 700.0 else math.inf
                chart_col = pt.chart if pt.chart_ok else -1
                wr.writerow(
                    [t, pt.rho, pt.v]
                    + list(pt.y)
                    + [pt.sigma * scale, pt.gamma * scale]
                    + [e * scale for e in pt.eta]
                    + [lam, chart_col, k]
                )


# --- conversions ---------------------------------------------------------

def compactify(c: InteriorCovector) -> BCotangentPoint:
    """Push (z, zeta) to the b-frame; z = 0 is outside every chart.

    The fiber is returned unit-normalized times its scale folded back in,
    i.e. raw; use flow() for long rays where the raw fiber overflows.
    """
    z = c.z
    zeta = c.zeta
    r = float(np.linalg.norm(z))
    if r == 0.0:
        raise ChartError("z = 0 has no compactified chart")
    zpp = z[:-1]
    a = float(np.linalg.norm(zpp))
    w = float(z[-1] / r)
    v = float((z[-1] ** 2 - a * a) / (r * r))
    cap = 1 if w >= 0.0 else -1
    ok = True
    if a <= 1e-14 * r:
        ok = False
        chart, y = 0, np.zeros(c.n - 2)
        omega = _sphere_point(chart, y)
    else:
        chart, y = _sphere_chart(zpp / a)
        omega = _sphere_point(chart, y)
    qp = abs(w)
    qm = a / r
    if min(qp, qm) < 1e-7:
        ok = False
    sigma = -float(zeta @ z)
    gp = max(qp, 1e-300)
    gm = max(qm, 1e-300)
    gamma = float(zeta[-1]) * cap * r / (4.0 * gp) - float(zeta[:-1] @ omega) * r / (4.0 * gm)
    Jw = _sphere_jacobian(chart, y)
    eta = r * qm * (Jw @ zeta[:-1])
    return BCotangentPoint(
        n=c.n, rho=1.0 / r, v=v, y=tuple(y), sigma=sigma, gamma=gamma,
        eta=tuple(eta), cap=cap, chart=chart, chart_ok=ok,
    )


def decompactify(pt: BCotangentPoint) -> InteriorCovector:
    """Invert the chart; needs rho > 0 and a nondegenerate frame."""
    if pt.rho <= 0.0:
        raise ChartError("rho must be positive to return to the interior")
    if not pt.chart_ok or abs(pt.v) >= 1.0:
        raise ChartError("degenerate b-frame; cannot invert")
    n = pt.n
    r = 1.0 / pt.rho
    qp = math.sqrt((1.0 + pt.v) / 2.0)
    qm = math.sqrt((1.0 - pt.v) / 2.0)
    y = np.asarray(pt.y, dtype=float)
    omega = _sphere_point(pt.chart, y)
    z = np.concatenate((r * qm * omega, [pt.cap * r * qp]))
    # rows of J^T: derivatives of z along (log r, v, y_i)
    Jt = np.zeros((n, n))
    Jt[0] = z
    Jt[1, :-1] = -r * omega / (4.0 * qm)
    Jt[1, -1] = pt.cap * r / (4.0 * qp)
    Jw = _sphere_jacobian(pt.chart, y)
    for i in range(n - 2):
        Jt[2 + i, :-1] = r * qm * Jw[i]
    rhs = np.concatenate(([-pt.sigma, pt.gamma], np.asarray(pt.eta, dtype=float)))
    zeta = np.linalg.solve(Jt, rhs)
    return InteriorCovector(z=z, zeta=zeta)


def hamiltonian(pt: BCotangentPoint) -> float:
    """Scale-invariant symbol at a b-point; valid at rho = 0 too."""
    if not pt.chart_ok:
        raise ChartError("chart degenerate at this point")
    v = pt.v
    if abs(v) >= 1.0 - 1e-12:
        raise ChartError("v-frame degenerate at |v| = 1")
    y = np.asarray(pt.y, dtype=float)
    eta = np.asarray(pt.eta, dtype=float)
    d = 1.0 + float(y @ y)
    h_term = (d * d / 4.0) * float(eta @ eta)
    return (
        v * pt.sigma**2
        - 4.0 * (1.0 - v * v) * pt.sigma * pt.gamma
        - 4.0 * v * (1.0 - v * v) * pt.gamma**2
        - 2.0 * h_term / (1.0 - v)
    )


# --- latitude-frame symbol and field ------------------------------------

def _lam_w(w, y, s, cw, eta):
    d = 1.0 + float(y @ y)
    H = (d * d / 4.0) * float(eta @ eta)
    return (
        (2 * w * w - 1) * s * s
        - 4 * w * (1 - w * w) * s * cw
        - (2 * w * w - 1) * (1 - w * w) * cw * cw
        - H / (1 - w * w)
    )


def _bd_rhs(state: np.ndarray, m: int) -> np.ndarray:
    # state = [x, w, y(m), u(m+2), k]
    w = state[1]
    y = state[2 : 2 + m]
    u = state[2 + m : 4 + 2 * m]
    nu = np.linalg.norm(u)
    u = u / nu
    s, cw = u[0], u[1]
    eta = u[2:]
    d = 1.0 + float(y @ y)
    e2 = float(eta @ eta)
    H = (d * d / 4.0) * e2
    one = 1.0 - w * w
    dl_ds = 2 * (2 * w * w - 1) * s - 4 * w * one * cw
    dl_dc = -4 * w * one * s - 2 * (2 * w * w - 1) * one * cw
    dl_de = -(d * d / 2.0) * eta / one
    dl_dw = (
        4 * w * s * s
        - 4 * (1 - 3 * w * w) * s * cw
        - 2 * w * (3 - 4 * w * w) * cw * cw
        - 2 * w * H / (one * one)
    )
    dl_dy = -(d * y * e2) / one
    F = np.concatenate(([0.0], [-dl_dw], -dl_dy))
    kdot = float(u @ F)
    du = F - kdot * u
    out = np.empty(state.size)
    out[0] = dl_ds
    out[1] = dl_dc
    out[2 : 2 + m] = dl_de
    out[2 + m : 4 + 2 * m] = du
    out[-1] = kdot
    return out


def _int_rhs(state: np.ndarray, n: int) -> np.ndarray:
    z = state[:n]
    zeta = state[n:]
    r2 = float(z @ z)
    p = zeta[-1] ** 2 - float(zeta[:-1] @ zeta[:-1])
    dz = np.concatenate((-2.0 * zeta[:-1], [2.0 * zeta[-1]])) * r2
    dzeta = -2.0 * p * z
    return np.concatenate((dz, dzeta))


# --- state packing -------------------------------------------------------

def _interior_to_bd(z: np.ndarray, zeta: np.ndarray):
    n = z.size
    m = n - 2
    r = float(np.linalg.norm(z))
    zpp = z[:-1]
    a = float(np.linalg.norm(zpp))
    w = float(z[-1] / r)
    chart, y = _sphere_chart(zpp / a)
    omega = _sphere_point(chart, y)
    sigma = -float(zeta @ z)
    sq = math.sqrt(max(1.0 - w * w, 1e-300))
    cw = float(zeta[-1]) * r - float(zeta[:-1] @ omega) * r * w / sq
    Jw = _sphere_jacobian(chart, y)
    eta = r * sq * (Jw @ zeta[:-1])
    fib = np.concatenate(([sigma, cw], eta))
    scale = float(np.linalg.norm(fib))
    state = np.empty(2 * m + 5)
    state[0] = math.log(1.0 / r)
    state[1] = w
    state[2 : 2 + m] = y
    state[2 + m : 4 + 2 * m] = fib / scale
    state[-1] = math.log(scale)
    return state, chart


def _bd_to_interior(state: np.ndarray, chart: int, m: int):
    x, w = state[0], state[1]
    y = state[2 : 2 + m]
    u = state[2 + m : 4 + 2 * m]
    u = u / np.linalg.norm(u)
    k = state[-1]
    r = math.exp(-x)
    sq = math.sqrt(1.0 - w * w)
    omega = _sphere_point(chart, y)
    z = np.concatenate((r * sq * omega, [r * w]))
    n = m + 2
    Jt = np.zeros((n, n))
    Jt[0] = z
    Jt[1, :-1] = -r * w * omega / sq
    Jt[1, -1] = r
    Jw = _sphere_jacobian(chart, y)
    for i in range(m):
        Jt[2 + i, :-1] = r * sq * Jw[i]
    rhs = np.concatenate(([-u[0], u[1]], u[2:])) * math.exp(k)
    zeta = np.linalg.solve(Jt, rhs)
    return z, zeta


def _bd_sample_point(state: np.ndarray, chart: int, m: int):
    """Boundary state -> (BCotangentPoint with unit v-frame fiber, lam, k)."""
    x, w = float(state[0]), float(state[1])
    y = state[2 : 2 + m]
    u = state[2 + m : 4 + 2 * m]
    u = u / np.linalg.norm(u)
    k = float(state[-1])
    lam = _lam_w(w, y, u[0], u[1], u[2:])
    v = 2.0 * w * w - 1.0
    cap = 1 if w >= 0.0 else -1
    ok = abs(w) > 1e-7 and abs(w) < 1.0 - 1e-7
    # v-frame fiber: gamma_v = gamma_w / (4 w), then renormalize
    gw = u[1] / (4.0 * w) if abs(w) > 1e-300 else math.copysign(1e300, u[1])
    fib = np.concatenate(([u[0], gw], u[2:]))
    s = float(np.linalg.norm(fib))
    fib = fib / s
    pt = BCotangentPoint(
        n=m + 2, rho=math.exp(x), v=v, y=tuple(y), sigma=float(fib[0]),
        gamma=float(fib[1]), eta=tuple(fib[2:]), cap=cap, chart=chart, chart_ok=ok,
    )
    return pt, lam, k + math.log(s)


def _interior_sample_point(z: np.ndarray, zeta: np.ndarray):
    c = InteriorCovector(z=z, zeta=zeta)
    pt = compactify(c)
    fib = pt.fiber()
    s = float(np.linalg.norm(fib))
    unit = replace(
        pt, sigma=pt.sigma / s, gamma=pt.gamma / s,
        eta=tuple(np.asarray(pt.eta) / s),
    )
    r = float(np.linalg.norm(z))
    if float(np.linalg.norm(z[:-1])) <= 1e-12 * r:
        # on the time axis the latitude frame blows up and the unit-fiber
        # symbol limit is 0
        return unit, 0.0, math.log(s)
    # scale-free symbol: the latitude-frame unit fiber value
    st, chart = _interior_to_bd(z, zeta)
    m = z.size - 2
    u = st[2 + m : 4 + 2 * m]
    lam = _lam_w(st[1], st[2 : 2 + m], u[0], u[1], u[2:])
    return unit, float(lam), math.log(s)


# --- the flow ------------------------------------------------------------

_RHO_SWITCH = 0.05
_RHO_BACK = 0.06
_W_NULLBAND = 0.85
_RHO_FLOOR = 1e-5
_ESCAPE_R = 1.0e4


def flow(pt, T: float, tol: float = 1e-10, samples_per_unit: float = 6.0) -> RayTrace:
    """Integrate the b-Hamilton flow for parameter length T (signed).

    Accepts a BCotangentPoint or an InteriorCovector.  Interior stretches
    run in plain (z, zeta) coordinates; below rho ~ 0.05 the projectivized
    latitude chart takes over.  The trace parameter is the rescaled one
    (d tau = |fiber| dt) on boundary stretches and plain Hamilton time in
    the interior; it is strictly monotone throughout.  Integration stops
    early once rho falls below 1e-5 (radial convergence) or when a chart
    degenerates (truncated flag).
    """
    if isinstance(pt, BCotangentPoint):
        start_bd = pt.rho < _RHO_SWITCH and abs(pt.v) < 2.0 * _W_NULLBAND**2 - 1.0
        if start_bd:
            # build latitude state directly
            m = pt.n - 2
            w = pt.cap * math.sqrt((1.0 + pt.v) / 2.0)
            cw = 4.0 * w * pt.gamma
            fib = np.concatenate(([pt.sigma, cw], np.asarray(pt.eta, dtype=float)))
            s = float(np.linalg.norm(fib))
            state = np.empty(2 * m + 5)
            state[0] = math.log(max(pt.rho, 1e-300))
            state[1] = w
            state[2 : 2 + m] = np.asarray(pt.y, dtype=float)
            state[2 + m : 4 + 2 * m] = fib / s
            state[-1] = math.log(s)
            mode, chart = "bd", pt.chart
            z = zeta = None
        else:
            c = decompactify(pt)
            z, zeta = c.z, c.zeta
            mode, chart, state = "int", pt.chart, None
        n = pt.n
    else:
        c = pt
        z, zeta = c.z.copy(), c.zeta.copy()
        n = c.n
        r0 = float(np.linalg.norm(z))
        if 1.0 / r0 < _RHO_SWITCH and abs(z[-1]) / r0 < _W_NULLBAND:
            state, chart = _interior_to_bd(z, zeta)
            mode = "bd"
        else:
            mode, chart, state = "int", 0, None
    m = n - 2

    # start diagnostics
    if mode == "bd":
        u0 = state[2 + m : 4 + 2 * m]
        lam0 = _lam_w(state[1], state[2 : 2 + m], u0[0], u0[1], u0[2:])
    else:
        _, lam0, _ = _interior_sample_point(z, zeta)
    nonnull = abs(lam0) > _NULL_TOL

    sgn = 1.0 if T >= 0 else -1.0
    tau = 0.0
    rows_t, rows_pt, rows_lam, rows_k = [], [], [], []
    truncated = None
    stats = {"steps": 0, "fevals": 0, "rejected_estimated": 0, "segments": 0}
    # interior starts already beyond the switch radius go through the
    # window-entry events rather than the radius event
    axis_mode = mode == "int" and float(np.linalg.norm(z)) >= 0.99 / _RHO_SWITCH

    def record_bd(ts, ys):
        for tv, sv in zip(ts, ys.T):
            if rows_t and sgn * (tv - rows_t[-1]) <= 0.0:
                continue  # segment joins repeat the boundary sample
            p, lamv, kv = _bd_sample_point(sv, chart, m)
            rows_t.append(tv)
            rows_pt.append(p)
            rows_lam.append(lamv)
            rows_k.append(kv)

    def record_int(ts, ys):
        for tv, sv in zip(ts, ys.T):
            if rows_t and sgn * (tv - rows_t[-1]) <= 0.0:
                continue
            p, lamv, kv = _interior_sample_point(sv[:n], sv[n:])
            rows_t.append(tv)
            rows_pt.append(p)
            rows_lam.append(lamv)
            rows_k.append(kv)

    for _segment in range(200):
        if sgn * (T - tau) <= 1e-12:
            break
        stats["segments"] += 1
        if mode == "int":
            y0 = np.concatenate((z, zeta))

            def ev_switch(t, s_, n=n):
                return float(np.linalg.norm(s_[:n])) - 1.0 / _RHO_SWITCH

            ev_switch.terminal = True

            def ev_escape(t, s_, n=n):
                return float(np.linalg.norm(s_[:n])) - _ESCAPE_R

            ev_escape.terminal = True

            def ev_hi(t, s_, n=n):
                s2 = float(s_[:n] @ s_[:n])
                return s_[n - 1] ** 2 / s2 - 0.6

            ev_hi.terminal = True
            ev_hi.direction = -1.0

            def ev_lo(t, s_, n=n):
                s2 = float(s_[:n] @ s_[:n])
                return s_[n - 1] ** 2 / s2 - 0.4

            ev_lo.terminal = True
            ev_lo.direction = 1.0
            # axis mode: outside the latitude band; wait for w^2 to enter
            # the window around the null asymptote 1/2
            events = [ev_escape, ev_hi, ev_lo] if axis_mode else [ev_switch, ev_escape]
            sol = solve_ivp(
                lambda t, s_: _int_rhs(s_, n), (tau, T), y0, method="DOP853",
                rtol=tol, atol=tol * 1e-2, dense_output=True, events=events,
            )
            if not sol.success:
                raise StiffnessError(f"interior integration failed: {sol.message}")
            t_end = sol.t[-1]
            npts = max(8, int(abs(t_end - tau) * samples_per_unit))
            ts = np.linspace(tau, t_end, npts + 1)
            record_int(ts, sol.sol(ts))
            stats["steps"] += len(sol.t) - 1
            stats["fevals"] += sol.nfev
            stats["rejected_estimated"] += max(0, round(sol.nfev / 15) - (len(sol.t) - 1))
            zf = sol.sol(t_end)
            z, zeta = zf[:n], zf[n:]
            tau = t_end
            if sgn * (T - tau) <= 1e-12:
                break
            rnow = float(np.linalg.norm(z))
            wnow = abs(z[-1]) / rnow
            if rnow >= 0.99 * _ESCAPE_R:
                truncated = "escaped"
                break
            if wnow < _W_NULLBAND and rnow >= 0.99 / _RHO_SWITCH:
                state, chart = _interior_to_bd(z, zeta)
                mode = "bd"
                axis_mode = False
            else:
                axis_mode = rnow >= 0.99 / _RHO_SWITCH
            continue

        # boundary (latitude) segment
        def ev_back(t, s_):
            return s_[0] - math.log(_RHO_BACK)

        ev_back.terminal = True
        ev_back.direction = 1.0

        def ev_wedge(t, s_):
            return s_[1] ** 2 - 0.92

        ev_wedge.terminal = True
        ev_wedge.direction = 1.0

        def ev_ychart(t, s_, m=m):
            y_ = s_[2 : 2 + m]
            return float(y_ @ y_) - 4.0

        ev_ychart.terminal = True
        ev_ychart.direction = 1.0

        def ev_floor(t, s_):
            return s_[0] - math.log(_RHO_FLOOR)

        ev_floor.terminal = True
        ev_floor.direction = -1.0

        sol = solve_ivp(
            lambda t, s_: _bd_rhs(s_, m), (tau, T), state, method="DOP853",
            rtol=tol, atol=tol * 1e-2, dense_output=True,
            events=[ev_back, ev_wedge, ev_ychart, ev_floor],
        )
        if not sol.success:
            raise StiffnessError(f"boundary integration failed: {sol.message}")
        t_end = sol.t[-1]
        npts = max(8, int(abs(t_end - tau) * samples_per_unit))
        ts = np.linspace(tau, t_end, npts + 1)
        record_bd(ts, sol.sol(ts))
        stats["steps"] += len(sol.t) - 1
        stats["fevals"] += sol.nfev
        stats["rejected_estimated"] += max(0, round(sol.nfev / 15) - (len(sol.t) - 1))
        state = sol.sol(t_end)
        u_ = state[2 + m : 4 + 2 * m]
        state[2 + m : 4 + 2 * m] = u_ / np.linalg.norm(u_)
        tau = t_end
        if sgn * (T - tau) <= 1e-12:
            break
        fired = [len(te) > 0 for te in sol.t_events]
        if fired[3]:
            break  # radial convergence floor; trace is long enough
        if fired[1]:
            # near-axis transit: hand back to interior coordinates, which
            # stay smooth there, unless the point is too deep out
            if state[0] < math.log(1e-3):
                truncated = "chart"
                break
            z, zeta = _bd_to_interior(state, chart, m)
            mode = "int"
            axis_mode = True
            continue
        if fired[2]:
            ynew, enew = _chart_transition(
                state[2 : 2 + m], state[2 + m + 2 : 4 + 2 * m]
            )
            # renormalize the full fiber after the eta transition
            fib = np.concatenate((state[2 + m : 2 + m + 2], enew))
            s = float(np.linalg.norm(fib))
            state[2 : 2 + m] = ynew
            state[2 + m : 4 + 2 * m] = fib / s
            state[-1] += math.log(s)
            chart = 1 - chart
            continue
        if fired[0]:
            z, zeta = _bd_to_interior(state, chart, m)
            mode = "int"
            axis_mode = False
            continue
    else:
        truncated = "segment-limit"

    return RayTrace(
        times=np.asarray(rows_t),
        points=tuple(rows_pt),
        lam=np.asarray(rows_lam),
        log_scale=np.asarray(rows_k),
        nonnull=nonnull,
        truncated=truncated,
        stats=stats,
    )


def classify_limit(tr: RayTrace, threshold: float = 1e-3):
    """Radial-set component reached by the trace end, or None.

    The end point must satisfy rho + |v| + |sigma| + |eta| < threshold with
    the fiber unit-normalized (the raw sigma is conserved, so only its
    projective size can decay).  gamma > 0 there is a sink, gamma < 0 a
    source; the cap sign picks the future or past component.  A trace
    flagged non-null that nevertheless meets the threshold is an error.
    """
    end = tr.end_point()
    eta = np.asarray(end.eta, dtype=float)
    miss = end.rho + abs(end.v) + abs(end.sigma) + float(np.linalg.norm(eta))
    if miss >= threshold:
        return None
    if tr.nonnull:
        raise ClassificationError(
            "non-null trace converged to the radial set; inconsistent flags"
        )
    sink = end.gamma > 0.0
    future = end.cap > 0
    if sink:
        return RadialSet.SINK_FUTURE if future else RadialSet.SINK_PAST
    return RadialSet.SOURCE_FUTURE if future else RadialSet.SOURCE_PAST


def radial_flow_signature(
    gamma: float, h: float = 0.02, delta: float = 1e-5, v: float = 0.0, sigma: float = 0.0
) -> np.ndarray:
    """Eigenvalues of the finite-difference flow map near the radial set.

    Works in the reduced (rho, v, gamma) system at eta = 0 (an invariant
    subsystem); sigma enters as a frozen parameter.  Near gamma > 0 the map
    should contract in rho and v and expand in gamma, mirroring the linear
    model -4 gamma (rho d_rho) - (8 v gamma + 4 sigma) d_v
    + 4 gamma^2 d_gamma; only the sign pattern is asserted by callers.
    """

    def rhs(t, s_):
        r_, v_, g_ = s_
        one = 1.0 - v_ * v_
        drdt = r_ * (2.0 * v_ * sigma - 4.0 * one * g_)
        dvdt = -4.0 * one * sigma - 8.0 * v_ * one * g_
        dgdt = -(sigma * sigma + 8.0 * v_ * sigma * g_ - 4.0 * g_ * g_ * (1.0 - 3.0 * v_ * v_))
        return [drdt, dvdt, dgdt]

    def flow_map(s0):
        sol = solve_ivp(rhs, (0.0, h), s0, method="DOP853", rtol=1e-12, atol=1e-14)
        return sol.y[:, -1]

    base = np.array([0.01, v, gamma])
    J = np.zeros((3, 3))
    for i in range(3):
        e = np.zeros(3)
        e[i] = delta
        J[:, i] = (flow_map(base + e) - flow_map(base - e)) / (2.0 * delta)
    return np.linalg.eigvals(J)


def random_null_rays(
    n: int, count: int, seed: int, future: bool = True, mixed_components: bool = True
) -> list:
    """Seeded ensemble of null interior covectors for flow studies.

    Base points are spread over a shell away from the origin and the time
    axis; covectors satisfy zeta_n = +-|zeta''| with the sign alternating
    over the two characteristic halves when mixed_components is set.
    """
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        z = rng.normal(size=n) * 2.0
        r = np.linalg.norm(z)
        if r < 1.0 or r > 8.0:
            continue
        if abs(z[-1]) / r > 0.8 or np.linalg.norm(z[:-1]) / r < 0.2:
            continue
        zpp = rng.normal(size=n - 1)
        while np.linalg.norm(zpp) < 1e-3:
            zpp = rng.normal(size=n - 1)
        sign = 1.0 if (not mixed_components or len(out) % 2 == 0) else -1.0
        if not future:
            sign = -sign
        zeta = np.concatenate((zpp, [sign * np.linalg.norm(zpp)]))
        out.append(InteriorCovector(z=z, zeta=zeta))
    return out
