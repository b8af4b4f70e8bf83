"""Time stepping for d_t u - mu Lap u + D u + a grad p = f on the torus.

The viscous term is integrated exactly per Fourier mode (integrating factor
``exp(-mu (2 pi/ell)^2 (k,k) dt)``); everything else is collected in

    G(u, t) = P_a (f(t) - D u),      P_0 = identity,  P_1 = Leray projection,

and advanced explicitly.  Two schemes are available:

``imex_euler``
    u_{n+1} = E (u_n + dt G_n)
``etdrk2``
    a       = E u_n + dt phi1 G_n
    u_{n+1} = a + dt phi2 (G(a, t_{n+1}) - G_n)

with ``phi1(z) = (e^z - 1)/z`` and ``phi2(z) = (e^z - 1 - z)/z^2`` evaluated at
``z = L dt``.  For ``a = 1`` the pressure is a diagnostic recovered from
``grad p = (I - P)(f - D u)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import BlowUpError, ConfigError, InvariantViolation
from .nonlinearity import NonlinearitySpec, eval_B, eval_D
from .spectral_core import (
    ABS_FLOOR,
    FourierField,
    TorusGrid,
    _to_physical,
    derivative_norm,
    l2_norm,
    leray_project,
    max_divergence,
    pressure_from_gradient,
)

log = logging.getLogger(__name__)

SCHEMES = ("imex_euler", "etdrk2")


@dataclass(frozen=True)
class SimConfig:
    mu: float
    a: int
    T: float
    dt: float
    scheme: str = "etdrk2"
    dealias: bool = True
    diag_every: int = 1
    tol_div: float = 1e-10
    blowup_threshold: float = 1e8
    check_divergence: bool = True

    def violations(self) -> list[str]:
        out = []
        if not self.mu > 0:
            out.append(f"mu must be positive (got {self.mu})")
        if self.a not in (0, 1):
            out.append(f"a must be 0 or 1 (got {self.a})")
        if not self.T > 0:
            out.append(f"T must be positive (got {self.T})")
        if not self.dt > 0:
            out.append(f"dt must be positive (got {self.dt})")
        elif self.T > 0 and not self.dt <= self.T:
            out.append(f"dt must not exceed T (got dt={self.dt}, T={self.T})")
        elif self.T > 0 and abs(self.T / self.dt - round(self.T / self.dt)) > 1e-9 * (self.T / self.dt):
            out.append(f"T must be an integer multiple of dt (T/dt = {self.T / self.dt})")
        if self.scheme not in SCHEMES:
            out.append(f"scheme must be one of {SCHEMES} (got {self.scheme!r})")
        if not (isinstance(self.diag_every, int) and self.diag_every >= 1):
            out.append(f"diag_every must be an integer >= 1 (got {self.diag_every})")
        if not self.tol_div > 0:
            out.append("tol_div must be positive")
        return out

    def validate(self) -> "SimConfig":
        v = self.violations()
        if v:
            raise ConfigError(v)
        return self

    @property
    def nsteps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass(frozen=True)
class ForcingSpec:
    """Body force f(., t).  ``evaluator`` returns None for a zero force."""

    evaluator: Callable[[float], Optional[FourierField]]
    smoothness: str = "unspecified"

    def __call__(self, t: float) -> Optional[FourierField]:
        return self.evaluator(t)

    @classmethod
    def zero(cls) -> "ForcingSpec":
        return cls(lambda t: None, smoothness="C-infinity")

    @classmethod
    def constant(cls, f: FourierField) -> "ForcingSpec":
        return cls(lambda t: f, smoothness="constant in time")


@dataclass(frozen=True, eq=False)
class SimulationState:
    t: float
    u: FourierField
    p: Optional[FourierField] = None
    step_index: int = 0
    # unprojected f - D u at time t, reused by the next step
    rhs: Optional[FourierField] = field(default=None, repr=False)
    linf: float = float("nan")


@dataclass
class RunSummary:
    final: SimulationState
    steps: int
    peak_l2: float
    peak_linf: float
    blowup: bool = False
    blowup_time: Optional[float] = None
    message: str = ""
    projection_correction: float = 0.0


@lru_cache(maxsize=32)
def _propagators(grid: TorusGrid, mu: float, dt: float):
    z = -mu * grid.kfactor**2 * grid.k2.astype(np.float64) * dt
    E = np.exp(z)
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    phi1 = np.where(small, 1 + z / 2 + z**2 / 6 + z**3 / 24, np.expm1(zs) / zs)
    phi2 = np.where(small, 0.5 + z / 6 + z**2 / 24 + z**3 / 120, (np.expm1(zs) - zs) / zs**2)
    for a in (E, phi1, phi2):
        a.setflags(write=False)
    return E, phi1, phi2


def _project(G: FourierField, a: int) -> FourierField:
    return leray_project(G) if a == 1 else G


def _rhs(u: FourierField, t: float, spec: NonlinearitySpec, f: ForcingSpec, dealias: bool) -> FourierField:
    Du = eval_D(spec, u, dealias)
    ft = f(t)
    return -Du if ft is None else ft - Du


def _advance(u, G_n, G_of, config: SimConfig, t: float) -> FourierField:
    """One step of the chosen scheme given G at t and a callable G(v, t)."""
    E, phi1, phi2 = _propagators(u.grid, config.mu, config.dt)
    dt = config.dt
    if config.scheme == "imex_euler":
        return FourierField(u.grid, E * (u.coeffs + dt * G_n.coeffs))
    a = FourierField(u.grid, E * u.coeffs + dt * phi1 * G_n.coeffs)
    G_a = G_of(a, t + dt)
    return FourierField(u.grid, a.coeffs + dt * phi2 * (G_a.coeffs - G_n.coeffs))


def _check_finite(new: FourierField, state: SimulationState, config: SimConfig, t_new: float) -> float:
    c = new.coeffs
    if not np.all(np.isfinite(c)):
        raise BlowUpError(f"non-finite values at t={t_new:.6g}", last_state=state, t=state.t)
    vals = _to_physical(new.grid, c)
    linf = float(np.sqrt(np.max(np.sum(vals**2, axis=0))))
    if not np.isfinite(linf) or linf > config.blowup_threshold:
        raise BlowUpError(
            f"sup-norm {linf:.3e} exceeds {config.blowup_threshold:.1e} at t={t_new:.6g}",
            last_state=state,
            t=state.t,
        )
    return linf


def recover_pressure(rhs: FourierField) -> FourierField:
    """p with grad p = (I - P)(f - D u)."""
    F = rhs - leray_project(rhs)
    return pressure_from_gradient(F, rtol=1e-6)


def step(state: SimulationState, config: SimConfig, spec: NonlinearitySpec, f: ForcingSpec) -> SimulationState:
    """Advance one time step.  Raises :class:`BlowUpError` carrying ``state`` on blow-up."""
    u = state.u
    dl = config.dealias
    rhs_n = state.rhs if state.rhs is not None else _rhs(u, state.t, spec, f, dl)
    G_n = _project(rhs_n, config.a)

    def G_of(v, t):
        return _project(_rhs(v, t, spec, f, dl), config.a)

    new = _advance(u, G_n, G_of, config, state.t)
    k = state.step_index + 1
    t_new = k * config.dt
    linf = _check_finite(new, state, config, t_new)
    rhs_new = _rhs(new, t_new, spec, f, dl) if config.a == 1 else None
    p = recover_pressure(rhs_new) if config.a == 1 else None
    return SimulationState(t=t_new, u=new, p=p, step_index=k, rhs=rhs_new, linf=linf)


def divergence_tolerance(u: FourierField, tol: float) -> float:
    return tol * max(derivative_norm(u, 1) / np.sqrt(u.grid.volume), 1.0) + ABS_FLOOR


def initial_state(config: SimConfig, spec: NonlinearitySpec, f: ForcingSpec, u0: FourierField) -> tuple[SimulationState, float]:
    """Project initial data when a = 1; returns the state and the L2 size of the correction."""
    g = u0.grid
    if u0.m != g.n:
        raise ConfigError(f"initial velocity must have {g.n} components, got {u0.m}")
    correction = 0.0
    if config.a == 1:
        pu = leray_project(u0)
        correction = l2_norm(u0 - pu)
        if correction > 0:
            log.info("initial data projected onto divergence-free fields; correction L2 = %.3e", correction)
        u0 = pu
        rhs = _rhs(u0, 0.0, spec, f, config.dealias)
        return SimulationState(0.0, u0, recover_pressure(rhs), 0, rhs), correction
    return SimulationState(0.0, u0, None, 0), correction


def run(
    config: SimConfig,
    spec: NonlinearitySpec,
    f: ForcingSpec,
    u0: Optional[FourierField] = None,
    sink: Optional[Callable[[SimulationState], None]] = None,
    start: Optional[SimulationState] = None,
) -> RunSummary:
    """Iterate :func:`step` up to T.

    Either ``u0`` (fresh run) or ``start`` (resume) must be given.  The sink
    is called on the initial state, every ``diag_every`` steps and on the
    final state.  Blow-up ends the run early with ``blowup=True`` and the
    last finite state as ``final``.
    """
    config.validate()
    correction = 0.0
    if start is None:
        if u0 is None:
            raise ConfigError("run needs initial data or a start state")
        state, correction = initial_state(config, spec, f, u0)
    else:
        state = start
    if sink is not None:
        sink(state)
    nsteps = config.nsteps
    peak_l2 = l2_norm(state.u)
    peak_linf = 0.0
    while state.step_index < nsteps:
        try:
            new = step(state, config, spec, f)
        except BlowUpError as exc:
            if sink is not None and state.step_index % config.diag_every:
                sink(state)
            return RunSummary(
                final=exc.last_state,
                steps=state.step_index,
                peak_l2=peak_l2,
                peak_linf=peak_linf,
                blowup=True,
                blowup_time=state.t + config.dt,
                message=str(exc),
                projection_correction=correction,
            )
        if config.a == 1 and config.check_divergence:
            div = max_divergence(new.u)
            lim = divergence_tolerance(new.u, config.tol_div)
            if div > lim:
                raise InvariantViolation(f"divergence {div:.3e} exceeds {lim:.3e} at t={new.t:.6g}")
        state = new
        peak_l2 = max(peak_l2, l2_norm(state.u))
        peak_linf = max(peak_linf, state.linf)
        if sink is not None and (state.step_index % config.diag_every == 0 or state.step_index == nsteps):
            sink(state)
    return RunSummary(final=state, steps=state.step_index, peak_l2=peak_l2, peak_linf=peak_linf, projection_correction=correction)


# --- linearised flow ----------------------------------------------------------


class Trajectory:
    """Fields sampled at discrete times; lookup requires an exact time match."""

    def __init__(self, times=None, fields=None):
        self.times: list[float] = list(times or [])
        self.fields: list[FourierField] = list(fields or [])

    def append(self, t: float, u: FourierField):
        self.times.append(float(t))
        self.fields.append(u)

    def sink(self, state: SimulationState):
        self.append(state.t, state.u)

    def __len__(self):
        return len(self.times)

    def __call__(self, t: float) -> FourierField:
        arr = np.asarray(self.times)
        if arr.size == 0:
            raise ConfigError("empty trajectory")
        i = int(np.argmin(np.abs(arr - t)))
        if abs(arr[i] - t) > 1e-12 * max(1.0, abs(t)):
            raise ConfigError(f"trajectory has no sample at t={t:.12g} (nearest {arr[i]:.12g})")
        return self.fields[i]


def step_linearized(
    state: SimulationState,
    config: SimConfig,
    w_of_t: Callable[[float], FourierField],
    spec: NonlinearitySpec,
    f: ForcingSpec,
) -> SimulationState:
    """Step of d_t u - mu Lap u + B(w, u) + a grad p = f.

    Same scheme as :func:`step` with D u replaced by B(w, u); the etdrk2
    second stage uses w at t + dt.
    """
    dl = config.dealias

    def rhs(v, t):
        Bv = eval_B(spec, w_of_t(t), v, dl)
        ft = f(t)
        return -Bv if ft is None else ft - Bv

    def G_of(v, t):
        return _project(rhs(v, t), config.a)

    G_n = G_of(state.u, state.t)
    new = _advance(state.u, G_n, G_of, config, state.t)
    k = state.step_index + 1
    t_new = k * config.dt
    linf = _check_finite(new, state, config, t_new)
    p = recover_pressure(rhs(new, t_new)) if config.a == 1 else None
    return SimulationState(t=t_new, u=new, p=p, step_index=k, linf=linf)


def run_linearized(
    config: SimConfig,
    w: Callable[[float], FourierField],
    spec: NonlinearitySpec,
    f: ForcingSpec,
    u0: FourierField,
    sink: Optional[Callable[[SimulationState], None]] = None,
) -> SimulationState:
    config.validate()
    if config.a == 1:
        u0 = leray_project(u0)
    state = SimulationState(0.0, u0, None, 0)
    if sink is not None:
        sink(state)
    while state.step_index < config.nsteps:
        state = step_linearized(state, config, w, spec, f)
        if sink is not None:
            sink(state)
    return state
