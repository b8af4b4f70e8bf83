"""Radial fields u = -v(|x|, t) x and their self-similar profiles.

The radial equation

    v_t = v_rr + (n+1)/r v_r + (n+2) v^2 + 3 r v v_r

is solved by the method of lines (second-order centred differences, even
extension at r = 0, RK4 in time).  Self-similar solutions

    v(r, t) = w(y) / s,   s = 2 kappa (T - t),   y = r / sqrt(s)

reduce it to

    w'' + (n+1)/y w' - kappa y w' + (n+2) w^2 + 3 y w w' - m kappa w = 0,
    w(0) = gamma, w'(0) = 0,

where the consistent multiplier is m = 2; m = 1 is kept for comparison.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize
from scipy.integrate import solve_ivp

from .errors import ConfigError

BLOWUP = 1e8


# --- radial PDE -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RadialState:
    n: int
    r: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    t: float = 0.0

    def __post_init__(self):
        if self.n < 3:
            raise ConfigError(f"radial reduction needs n >= 3 (got {self.n})")
        r = np.asarray(self.r, dtype=float)
        if r.ndim != 1 or len(r) < 9:
            raise ConfigError("radial grid too coarse: need M >= 8 intervals")
        if r[0] != 0.0 or not np.allclose(np.diff(r), r[1] - r[0], rtol=1e-10, atol=0):
            raise ConfigError("radial grid must be uniform and start at r = 0")
        v = np.asarray(self.v, dtype=float)
        if v.shape != r.shape:
            raise ConfigError("v and r must have the same length")
        if not np.all(np.isfinite(v)):
            raise ConfigError("radial state has non-finite values")

    @property
    def h(self) -> float:
        return float(self.r[1] - self.r[0])

    @classmethod
    def on_grid(cls, n: int, R: float, M: int, v0: Callable[[np.ndarray], np.ndarray] | float = 0.0, t: float = 0.0):
        r = np.linspace(0.0, R, M + 1)
        v = v0(r) if callable(v0) else np.full_like(r, float(v0))
        return cls(n, r, v, t)


def _radial_rhs(n: int, h: float, r: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    vi, vm, vp, ri = v[1:-1], v[:-2], v[2:], r[1:-1]
    vrr = (vp - 2 * vi + vm) / h**2
    vr = (vp - vm) / (2 * h)
    out[1:-1] = vrr + (n + 1) / ri * vr + (n + 2) * vi**2 + 3 * ri * vi * vr
    # r = 0: even extension v(-h) = v(h); (n+1) v_r / r -> (n+1) v_rr(0)
    out[0] = (n + 2) * 2 * (v[1] - v[0]) / h**2 + (n + 2) * v[0] ** 2
    # r = R: one-sided second order
    vrr_e = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / h**2
    vr_e = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
    R = r[-1]
    out[-1] = vrr_e + (n + 1) / R * vr_e + (n + 2) * v[-1] ** 2 + 3 * R * v[-1] * vr_e
    return out


def radial_rhs(state: RadialState) -> np.ndarray:
    return _radial_rhs(state.n, state.h, state.r, state.v)


def max_stable_dt(n: int, h: float) -> float:
    """h^2/4, tightened for large n where the origin row dominates the spectrum."""
    return h * h * min(0.25, 2.5 / (2 * (n + 2)))


def radial_step(state: RadialState, dt: float, boundary: Optional[Callable[[float], float]] = None) -> RadialState:
    """One RK4 step; the value at r = R is imposed (``boundary(t)`` or 0)."""
    n, h, r = state.n, state.h, state.r
    bc = boundary if boundary is not None else (lambda t: 0.0)
    t = state.t

    def f(v, tt):
        v = v.copy()
        v[-1] = bc(tt)
        k = _radial_rhs(n, h, r, v)
        k[-1] = 0.0
        return k, v

    v0 = state.v
    k1, v0b = f(v0, t)
    k2, _ = f(v0b + 0.5 * dt * k1, t + 0.5 * dt)
    k3, _ = f(v0b + 0.5 * dt * k2, t + 0.5 * dt)
    k4, _ = f(v0b + dt * k3, t + dt)
    v_new = v0b + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    v_new[-1] = bc(t + dt)
    return RadialState(n, r, v_new, t + dt) if np.all(np.isfinite(v_new)) else _nonfinite(state, t + dt)


class RadialBlowUp(Exception):
    def __init__(self, state, t):
        super().__init__(f"radial solution blew up at t={t:.6g}")
        self.last_state, self.t = state, t


def _nonfinite(state, t):
    raise RadialBlowUp(state, t)


@dataclass
class RadialRun:
    times: list[float]
    states: list[RadialState]
    blowup: bool = False
    blowup_time: Optional[float] = None

    @property
    def final(self) -> RadialState:
        return self.states[-1]


def radial_run(
    state: RadialState,
    dt: float,
    T: float,
    boundary: Optional[Callable[[float], float]] = None,
    record_every: int = 1,
) -> RadialRun:
    """Evolve to time T (absolute); stops early and flags blow-up above 1e8."""
    limit = max_stable_dt(state.n, state.h)
    if dt > limit * (1 + 1e-12):
        raise ConfigError(f"dt={dt:.3e} exceeds the stability guard {limit:.3e} for h={state.h:.3e}")
    nsteps = int(round((T - state.t) / dt))
    if nsteps < 0 or abs(state.t + nsteps * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ConfigError("T - t must be a nonnegative integer multiple of dt")
    t0 = state.t
    out = RadialRun([state.t], [state])
    for k in range(1, nsteps + 1):
        try:
            new = radial_step(state, dt, boundary)
        except RadialBlowUp as exc:
            out.blowup, out.blowup_time = True, exc.t
            break
        new = RadialState(new.n, new.r, new.v, t0 + k * dt)
        if np.max(np.abs(new.v)) > BLOWUP:
            out.blowup, out.blowup_time = True, new.t
            break
        state = new
        if k % record_every == 0 or k == nsteps:
            out.times.append(state.t)
            out.states.append(state)
    if out.states[-1] is not state:
        out.times.append(state.t)
        out.states.append(state)
    return out


# --- self-similar ODE ----------------------------------------------------------------


@dataclass(frozen=True)
class SelfSimProblem:
    n: int
    kappa: float
    gamma: float
    multiplier: int = 2
    y_max: float = 4.0

    def __post_init__(self):
        problems = []
        if self.n < 1:
            problems.append("n must be positive")
        if not self.kappa > 0:
            problems.append(f"kappa must be positive (got {self.kappa})")
        if not self.gamma >= 0:
            problems.append(f"gamma must be >= 0 (got {self.gamma})")
        if self.multiplier not in (1, 2):
            problems.append(f"multiplier must be 1 or 2 (got {self.multiplier})")
        if not self.y_max > 0:
            problems.append("y_max must be positive")
        if problems:
            raise ConfigError(problems)

    @property
    def w2_origin(self) -> float:
        """w''(0) from the regular limit (n+2) w''(0) + (n+2) gamma^2 - m kappa gamma = 0."""
        n, k, g = self.n, self.kappa, self.gamma
        return (self.multiplier * k * g - (n + 2) * g * g) / (n + 2)

    @property
    def series_offset(self) -> float:
        scale = min(1.0, 1.0 / math.sqrt(self.kappa), 1.0 / math.sqrt(self.gamma) if self.gamma > 0 else 1.0)
        return 1e-4 * scale


@dataclass
class SelfSimSolution:
    problem: SelfSimProblem
    y: np.ndarray
    w: np.ndarray
    wp: np.ndarray
    blowup: bool
    y_end: float
    _dense: Optional[Callable] = field(default=None, repr=False)

    def __call__(self, y) -> np.ndarray:
        """w at arbitrary y in [0, y_end]."""
        p = self.problem
        y = np.asarray(y, dtype=float)
        if np.any(y > self.y_end * (1 + 1e-12)) or np.any(y < 0):
            raise ConfigError(f"y outside [0, {self.y_end}]")
        if self._dense is None:
            return np.zeros_like(y)
        y0 = p.series_offset
        series = p.gamma + 0.5 * p.w2_origin * y**2
        inner = np.clip(y, y0, self.y_end)
        return np.where(y < y0, series, self._dense(inner.ravel())[0].reshape(y.shape))

    def derivative(self, y) -> np.ndarray:
        p = self.problem
        y = np.asarray(y, dtype=float)
        if self._dense is None:
            return np.zeros_like(y)
        y0 = p.series_offset
        inner = np.clip(y, y0, self.y_end)
        return np.where(y < y0, p.w2_origin * y, self._dense(inner.ravel())[1].reshape(y.shape))


def selfsim_rhs(p: SelfSimProblem):
    n, kap, m = p.n, p.kappa, p.multiplier

    def rhs(y, s):
        w, wp = s
        return [wp, -(n + 1) / y * wp + kap * y * wp - (n + 2) * w * w - 3 * y * w * wp + m * kap * w]

    return rhs


def selfsim_ode_integrate(p: SelfSimProblem, rtol: float = 1e-12, atol: float = 1e-14, npts: int = 401) -> SelfSimSolution:
    """Integrate from the series start y0 to y_max (DOP853, dense output).

    Blow-up (|w| > 1e6) stops the integration and is reported via
    ``blowup``/``y_end``.
    """
    if p.gamma == 0.0:
        y = np.linspace(0.0, p.y_max, npts)
        return SelfSimSolution(p, y, np.zeros_like(y), np.zeros_like(y), False, p.y_max)
    y0 = p.series_offset
    w2 = p.w2_origin
    s0 = [p.gamma + 0.5 * w2 * y0**2, w2 * y0]

    def big(y, s):
        return abs(s[0]) - 1e6

    big.terminal = True
    sol = solve_ivp(selfsim_rhs(p), (y0, p.y_max), s0, method="DOP853", rtol=rtol, atol=atol, dense_output=True, events=big)
    blew = sol.status == 1
    y_end = float(sol.t[-1])
    out = SelfSimSolution(p, np.array([]), np.array([]), np.array([]), blew, y_end, sol.sol)
    y = np.linspace(0.0, y_end, npts)
    out.y, out.w, out.wp = y, out(y), out.derivative(y)
    return out


# --- shooting ------------------------------------------------------------------


def farfield_mismatch(n: int, gamma: float, m: int, kappa: float, y_max: float) -> tuple[float, float, bool, float]:
    """(y^2 w(y_end) - 1, y w'/w at y_end, blew up?, y_end)."""
    sol = selfsim_ode_integrate(SelfSimProblem(n, kappa, gamma, m, y_max), npts=2)
    y = sol.y_end
    w, wp = float(sol.w[-1]), float(sol.wp[-1])
    logd = y * wp / w if w != 0 else math.nan
    return y * y * w - 1.0, logd, sol.blowup, y


def _mismatch_job(args):
    return farfield_mismatch(*args)


@dataclass
class ShootResult:
    n: int
    gamma: float
    multiplier: int
    y_max: float
    found: bool
    kappa: Optional[float] = None
    residual: Optional[float] = None
    log_derivative: Optional[float] = None
    scan: list[tuple[float, float, bool]] = field(default_factory=list)
    message: str = ""


def shoot_farfield(
    n: int,
    gamma: float,
    m: int,
    bracket: tuple[float, float],
    y_max: float = 4.0,
    samples: int = 16,
    workers: int = 1,
    tol: float = 1e-6,
    max_log_slope: float = 10.0,
) -> ShootResult:
    """Find kappa with y_max^2 w(y_max) = 1 by scanning the bracket and refining with Brent.

    Every candidate root is re-integrated and accepted only if the mismatch
    is below ``tol`` and |y w'/w| at y_max is at most ``max_log_slope``.
    The second test rejects sign changes where w plunges towards blow-up
    instead of decaying.  Without an accepted root the scan itself is
    returned as the report.
    """
    lo, hi = bracket
    if not 0 < lo < hi:
        raise ConfigError("kappa bracket must satisfy 0 < lo < hi")
    kappas = np.linspace(lo, hi, samples)
    jobs = [(n, gamma, m, float(k), y_max) for k in kappas]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_mismatch_job, jobs))
    else:
        results = [_mismatch_job(j) for j in jobs]
    scan = [(float(k), r[0], r[2]) for k, r in zip(kappas, results)]
    res = ShootResult(n, gamma, m, y_max, False, scan=scan)
    if all(b for _, _, b in scan):
        res.message = "w blows up before y_max for every kappa in the bracket"
        return res
    f = lambda k: farfield_mismatch(n, gamma, m, k, y_max)[0]  # noqa: E731
    rejected: list[float] = []
    for (k1, f1, _), (k2, f2, _) in zip(scan, scan[1:]):
        if f1 == 0.0:
            k_star = k1
        elif f1 * f2 < 0:
            k_star = optimize.brentq(f, k1, k2, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        else:
            continue
        mis, logd, blew, _ = farfield_mismatch(n, gamma, m, k_star, y_max)
        if abs(logd) > max_log_slope:
            rejected.append(k_star)
            continue
        if abs(mis) < tol and not blew:
            res.found, res.kappa, res.residual, res.log_derivative = True, float(k_star), float(mis), float(logd)
            res.message = f"root kappa*={k_star:.12g}, mismatch {mis:.2e}, y w'/w = {logd:.4g}"
            return res
    if gamma == 0.0:
        res.message = "gamma = 0 gives w = 0, so y^2 w - 1 = -1 for every kappa: no root"
    elif rejected:
        res.message = f"only steep (non-decaying) crossings at kappa = {', '.join(f'{k:.6g}' for k in rejected)}"
    else:
        res.message = "no sign change of the mismatch with an acceptable root in the bracket"
    return res


# --- self-similar consistency --------------------------------------------------------


@dataclass
class ConsistencyResult:
    h: float
    residual: float
    scale: float  # kappa * sup|w| on the sampled y-range


def selfsim_v(sol: SelfSimSolution, T_blow: float):
    """v(r, t) = w(r / sqrt(s)) / s with s = 2 kappa (T_blow - t)."""
    kap = sol.problem.kappa

    def v(r, t):
        s = 2.0 * kap * (T_blow - t)
        return sol(np.asarray(r) / np.sqrt(s)) / s

    return v


def selfsim_consistency_residual(
    p: SelfSimProblem | SelfSimSolution,
    T_blow: float,
    h: float,
    r_box: Optional[tuple[float, float]] = None,
    t_box: tuple[float, float] = (0.0, 0.5),
    nr: int = 24,
    nt: int = 6,
) -> ConsistencyResult:
    """Sup over a (r, t) box of the radial-equation residual of the self-similar v.

    Derivatives are centred differences with step h in both r and t, so the
    residual is O(h^2) exactly when w solves the consistent (m = 2) ODE.
    The box is clipped (with a warning) to stay away from t = T_blow and
    inside the integrated y-range.  Without ``r_box`` the radial range is
    [0.1, 1.0], shortened silently to what the profile covers.
    """
    sol = p if isinstance(p, SelfSimSolution) else selfsim_ode_integrate(p)
    prob = sol.problem
    n, kap = prob.n, prob.kappa
    explicit_r = r_box is not None
    r_lo, r_hi = r_box if explicit_r else (0.1, 1.0)
    t_lo, t_hi = t_box
    if r_lo - h <= 0:
        raise ConfigError("r_box must stay at least h away from the origin")
    margin = 0.05 * T_blow
    if t_hi + h > T_blow - margin:
        warnings.warn("t-range clipped away from the blow-up time", stacklevel=2)
        t_hi = T_blow - margin - h
    s_min = 2 * kap * (T_blow - t_hi - h)
    y_top = (r_hi + h) / math.sqrt(s_min)
    if y_top > sol.y_end:
        if explicit_r:
            warnings.warn("r-range clipped to the integrated y-range", stacklevel=2)
        r_hi = sol.y_end * math.sqrt(s_min) - h
        if r_hi <= r_lo:
            raise ConfigError("sample box is empty after clipping")
    v = selfsim_v(sol, T_blow)
    r = np.linspace(r_lo, r_hi, nr)[:, None]
    t = np.linspace(t_lo, t_hi, nt)[None, :]
    v0 = v(r, t)
    v_t = (v(r, t + h) - v(r, t - h)) / (2 * h)
    vp, vm = v(r + h, t), v(r - h, t)
    v_r = (vp - vm) / (2 * h)
    v_rr = (vp - 2 * v0 + vm) / h**2
    res = v_t - v_rr - (n + 1) / r * v_r - (n + 2) * v0**2 - 3 * r * v0 * v_r
    y_used = np.linspace(0, y_top, 200)
    scale = kap * float(np.max(np.abs(sol(np.minimum(y_used, sol.y_end)))))
    return ConsistencyResult(h, float(np.max(np.abs(res))), scale)


def refinement_table(p: SelfSimProblem, T_blow: float, hs: Sequence[float], **kw) -> list[tuple[float, float, float]]:
    """(h, residual, observed order vs previous h) for a decreasing list of h."""
    sol = selfsim_ode_integrate(p)
    rows = []
    prev = None
    for h in hs:
        c = selfsim_consistency_residual(sol, T_blow, h, **kw)
        order = math.nan if prev is None else math.log(prev[1] / c.residual) / math.log(prev[0] / h)
        rows.append((h, c.residual, order))
        prev = (h, c.residual)
    return rows


# --- radial -> vector field -------------------------------------------------------------


def radial_to_vector_field(source, x: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """u = -scale * v(|x|) x at points x of shape ``(n, ...)``.

    ``source`` is a :class:`RadialState` (linear interpolation, points must
    lie within r <= R) or a callable v(r).
    """
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.sum(x**2, axis=0))
    if isinstance(source, RadialState):
        if x.shape[0] != source.n:
            raise ConfigError(f"points have {x.shape[0]} coordinates, state has n={source.n}")
        R = source.r[-1]
        if np.any(r > R * (1 + 1e-12)):
            raise ConfigError(f"sample points outside the radial grid [0, {R}]")
        source = radial_state_interpolant(source)
    return -scale * source(r) * x


def radial_state_interpolant(state: RadialState) -> Callable[[np.ndarray], np.ndarray]:
    return lambda r: np.interp(r, state.r, state.v)


def vector_residual(
    v: Callable[[np.ndarray, float], np.ndarray],
    n: int,
    b: float,
    points: np.ndarray,
    t: float,
    h: float,
    scale: float = 1.0,
    mu: float = 1.0,
) -> float:
    """Sup over ``points`` of |d_t u - mu Lap u + D u| for u = -scale v(|x|, t) x.

    D is b (u.grad)u + (1-b)/2 grad|u|^2 + (div u) u / 2.  All derivatives are
    Cartesian centred differences with step h, so nothing here knows about
    the radial reduction being checked.
    """
    pts = np.asarray(points, dtype=float)  # (n, P)
    eye = np.eye(n)[:, :, None] * h

    def u(x, tt):
        r = np.sqrt(np.sum(x**2, axis=0))
        return -scale * v(r, tt) * x

    u0 = u(pts, t)
    u_t = (u(pts, t + h) - u(pts, t - h)) / (2 * h)
    lap = np.zeros_like(u0)
    jac = np.empty((n, n) + pts.shape[1:])  # jac[k, l] = d_k u^l
    for k in range(n):
        up, um = u(pts + eye[k], t), u(pts - eye[k], t)
        lap += (up - 2 * u0 + um) / h**2
        jac[k] = (up - um) / (2 * h)
    adv = np.einsum("k...,kl...->l...", u0, jac)
    half_grad_sq = np.einsum("l...,kl...->k...", u0, jac)
    div = np.trace(jac)
    D = b * adv + (1 - b) * half_grad_sq + 0.5 * div * u0
    res = u_t - mu * lap + D
    return float(np.max(np.sqrt(np.sum(res**2, axis=0))))
