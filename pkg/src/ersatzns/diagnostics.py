"""Norms, identity residuals and integral-inequality bounds.

Space quadrature is exact Parseval (coefficient space) or the grid sum
(physical space); time quadrature is the trapezoid rule on the sampling
grid and time derivatives are second-order finite differences.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate, optimize
from scipy.special import logsumexp

from .errors import ConfigError
from .nonlinearity import NonlinearitySpec, _velocity_gradient, eval_D, trilinear_pairing
from .spectral_core import (
    FourierField,
    _to_physical,
    derivative_norm,
    inner_product,
    l2_norm,
    leray_project,
    max_divergence,
    sobolev_norm,
)

# max |u|^2 for which e^{1+|u|^2} is evaluated in linear form
EXP_OVERFLOW = 700.0


def _trapz(y, x) -> float:
    y = np.asarray(y, dtype=float)
    return float(integrate.trapezoid(y, np.asarray(x, dtype=float))) if len(y) > 1 else 0.0


def _check_traj(times, fields, minimum: int = 1):
    if len(times) < minimum or len(times) != len(fields):
        raise ConfigError(f"trajectory needs at least {minimum} samples with matching fields")


# --- Bochner-type seminorms -----------------------------------------------------


def bochner_seminorm(times: Sequence[float], fields: Sequence[FourierField], i: int, mu: float, T: Optional[float] = None) -> float:
    """sqrt(max_t ||grad^i u||^2 + mu * int_0^T ||grad^{i+1} u||^2 dt).

    The sup over time is taken on the samples.  ``T`` if given must match the
    last sample time.
    """
    _check_traj(times, fields)
    if T is not None and abs(times[-1] - T) > 1e-9 * max(1.0, T):
        raise ConfigError(f"trajectory ends at {times[-1]}, expected T={T}")
    sup = max(derivative_norm(u, i) ** 2 for u in fields)
    integral = _trapz([derivative_norm(u, i + 1) ** 2 for u in fields], times)
    return math.sqrt(sup + mu * integral)


def dual_h1_norm(f: FourierField) -> float:
    """||f||_{(H^1)'}: weight 1/((k,k)(2 pi/ell)^2) off the mean, mean as in L2."""
    g = f.grid
    k2 = g.k2.astype(float) * g.kfactor**2
    w = np.where(g.k2 == 0, 1.0, 1.0 / np.where(g.k2 == 0, 1.0, k2))
    return float(np.sqrt(g.volume * np.sum(w * np.abs(f.coeffs) ** 2)))


def data_seminorm(
    f_times: Sequence[float],
    f_fields: Optional[Sequence[Optional[FourierField]]],
    u0: FourierField,
    k: int,
    mu: float,
) -> float:
    """Size of the data (f, u0).

    k >= 1:  sqrt(||grad^k u0||^2 + 4/mu int ||grad^{k-1} f||^2)
    k = 0:   sqrt(||u0||^2 + 2/mu int ||f||_{(H^1)'}^2 + (int ||f||_{(H^1)'})^2)
    """
    if k < 0:
        raise ConfigError("k must be >= 0")
    base = derivative_norm(u0, k) ** 2
    if not f_fields:
        return math.sqrt(base)
    fs = [f for f in f_fields]
    if k >= 1:
        sq = [0.0 if f is None else derivative_norm(f, k - 1) ** 2 for f in fs]
        return math.sqrt(base + 4.0 / mu * _trapz(sq, f_times))
    d = [0.0 if f is None else dual_h1_norm(f) for f in fs]
    return math.sqrt(base + 2.0 / mu * _trapz(np.square(d), f_times) + _trapz(d, f_times) ** 2)


# --- energy identities ------------------------------------------------------------


def _forcing_at(f, t):
    return None if f is None else f(t)


def energy_identity_residual(
    times: Sequence[float],
    fields: Sequence[FourierField],
    f: Optional[Callable[[float], Optional[FourierField]]],
    spec: NonlinearitySpec,
    mu: float,
    dealias: bool = True,
) -> np.ndarray:
    """r(t) = 1/2 d/dt ||u||^2 + mu ||grad u||^2 - (f - D u, u) at each sample."""
    _check_traj(times, fields, 3)
    t = np.asarray(times, dtype=float)
    half_e = 0.5 * np.array([l2_norm(u) ** 2 for u in fields])
    ddt = np.gradient(half_e, t, edge_order=2)
    out = np.empty(len(t))
    for j, u in enumerate(fields):
        rhs = -trilinear_pairing(spec, u, dealias)
        ft = _forcing_at(f, t[j])
        if ft is not None:
            rhs += inner_product(ft, u)
        out[j] = ddt[j] + mu * derivative_norm(u, 1) ** 2 - rhs
    return out


class EnergyBalance:
    """Running defect ||u(t)||^2 + 2 mu int ||grad u||^2 - 2 int (f - D u, u) - ||u0||^2.

    Fed one state at a time (trapezoid in time); used for the CSV column and
    the energy-equality check.
    """

    def __init__(self, spec: NonlinearitySpec, mu: float, f=None, dealias: bool = True):
        self.spec, self.mu, self.f, self.dealias = spec, mu, f, dealias
        self.e0: Optional[float] = None
        self.integral = 0.0
        self._last: Optional[tuple[float, float]] = None
        self.defect = 0.0

    def _rate(self, t: float, u: FourierField) -> float:
        power = -trilinear_pairing(self.spec, u, self.dealias)
        ft = _forcing_at(self.f, t)
        if ft is not None:
            power += inner_product(ft, u)
        return 2 * self.mu * derivative_norm(u, 1) ** 2 - 2 * power

    def update(self, t: float, u: FourierField) -> float:
        rate = self._rate(t, u)
        e = l2_norm(u) ** 2
        if self.e0 is None:
            self.e0 = e
        else:
            t_prev, r_prev = self._last
            self.integral += 0.5 * (t - t_prev) * (rate + r_prev)
        self._last = (t, rate)
        self.defect = e + self.integral - self.e0
        return self.defect

    @property
    def relative_defect(self) -> float:
        return abs(self.defect) / self.e0 if self.e0 else 0.0


# --- exponential energy ---------------------------------------------------------


@dataclass
class ExpEnergy:
    """int_Q exp(1 + |u|^2) dx; ``value`` is inf when ``overflow`` is set."""

    value: float
    log_value: float
    overflow: bool


def exp_energy(u: FourierField) -> ExpEnergy:
    g = u.grid
    vals = _to_physical(g, u.coeffs)
    q = 1.0 + np.sum(vals**2, axis=0)
    cell = g.volume / g.N**g.n
    log_value = float(math.log(cell) + logsumexp(q))
    if np.max(q) - 1.0 > EXP_OVERFLOW:
        return ExpEnergy(math.inf, log_value, True)
    return ExpEnergy(float(cell * np.sum(np.exp(q))), log_value, False)


@dataclass
class ExpIdentityTerms:
    times: np.ndarray
    energy: np.ndarray
    ddt: np.ndarray
    grad_term: np.ndarray
    chain_term: np.ndarray
    forcing_term: np.ndarray
    residual: np.ndarray
    overflow: np.ndarray


def exp_energy_identity_residual(
    times: Sequence[float],
    fields: Sequence[FourierField],
    f,
    spec: NonlinearitySpec,
    mu: float,
    a: int,
    dealias: bool = True,
) -> ExpIdentityTerms:
    """Residual of

        d/dt ||e^{1+|u|^2}||_1 + 2 mu || |grad u| e^{(1+|u|^2)/2} ||^2
            + 4 mu || grad e^{(1+|u|^2)/2} ||^2 - 2 (P_a(f - D u), u e^{1+|u|^2})

    with every term by grid quadrature.  Samples that overflow get NaN.
    """
    _check_traj(times, fields, 3)
    t = np.asarray(times, dtype=float)
    m = len(t)
    energy, grad_t, chain_t, force_t = (np.full(m, np.nan) for _ in range(4))
    overflow = np.zeros(m, dtype=bool)
    for j, u in enumerate(fields):
        g = u.grid
        cell = g.volume / g.N**g.n
        up = _to_physical(g, u.coeffs)
        sq = np.sum(up**2, axis=0)
        if np.max(sq) > EXP_OVERFLOW:
            overflow[j] = True
            continue
        e = np.exp(1.0 + sq)
        G = _velocity_gradient(u)  # G[k, l] = d_k u^l
        grad_sq = np.sum(G**2, axis=(0, 1))
        half_grad = np.einsum("l...,kl...->k...", up, G)  # grad |u|^2 / 2
        rhs = -eval_D(spec, u, dealias)
        ft = _forcing_at(f, t[j])
        if ft is not None:
            rhs = ft + rhs
        if a == 1:
            rhs = leray_project(rhs)
        rp = _to_physical(g, rhs.coeffs)
        energy[j] = cell * np.sum(e)
        grad_t[j] = 2 * mu * cell * np.sum(grad_sq * e)
        chain_t[j] = 4 * mu * cell * np.sum(np.sum(half_grad**2, axis=0) * e)
        force_t[j] = 2 * cell * np.sum(np.sum(rp * up, axis=0) * e)
    ddt = np.full(m, np.nan)
    ok = ~overflow
    if ok.all():
        ddt = np.gradient(energy, t, edge_order=2)
    residual = ddt + grad_t + chain_t - force_t
    return ExpIdentityTerms(t, energy, ddt, grad_t, chain_t, force_t, residual, overflow)


# --- Gronwall-Perov -------------------------------------------------------------

Func = Union[float, Callable[[float], float], tuple]


def _as_function(x: Func, name: str) -> Callable[[float], float]:
    if callable(x):
        return x
    if isinstance(x, tuple):
        ts, vs = (np.asarray(a, dtype=float) for a in x)
        if np.any(vs < 0):
            raise ConfigError(f"{name} must be nonnegative")
        return lambda s: float(np.interp(s, ts, vs))
    if x < 0:
        raise ConfigError(f"{name} must be nonnegative")
    c = float(x)
    return lambda s: c


@dataclass
class GronwallInputs:
    """Data of F(t) <= A + int_{a0}^t (B F + C F^gamma0).

    B and C may be constants, callables, or sampled ``(times, values)`` pairs
    (linearly interpolated).
    """

    A: float
    B: Func
    C: Func
    gamma0: float
    a0: float = 0.0
    b0: float = 1.0
    h: Optional[float] = None

    def __post_init__(self):
        problems = []
        if self.A < 0:
            problems.append("A must be nonnegative")
        if not self.gamma0 > 0:
            problems.append("gamma0 must be positive")
        if not self.b0 > self.a0:
            problems.append("need a0 < b0")
        if self.gamma0 > 1 and (self.h is None or not 0 < self.h <= self.b0 - self.a0):
            problems.append("gamma0 > 1 needs a horizon h in (0, b0 - a0]")
        if problems:
            raise ConfigError(problems)
        self._B = _as_function(self.B, "B")
        self._C = _as_function(self.C, "C")


@dataclass
class BoundResult:
    value: float
    feasible: bool = True
    reason: str = ""


_QUAD = dict(epsabs=0.0, epsrel=1e-13, limit=200)


def _int(fn, lo, hi) -> float:
    if hi <= lo:
        return 0.0
    return integrate.quad(fn, lo, hi, **_QUAD)[0]


def gron_add_holds(g: GronwallInputs) -> bool:
    """Feasibility condition of the superlinear branch on [a0, a0 + h]."""
    gm1 = g.gamma0 - 1.0
    end = g.a0 + g.h
    lhs = g.A * (gm1 * _int(g._C, g.a0, end)) ** (1.0 / gm1)
    rhs = math.exp(-gm1 * _int(g._B, g.a0, end)) ** (1.0 / gm1)
    return lhs < rhs


def gron_add_boundary(build: Callable[[float], GronwallInputs], lo: float, hi: float, tol: float = 1e-12) -> float:
    """Bisect a scalar parameter s until ``gron_add_holds(build(s))`` flips.

    The condition must hold at one end of [lo, hi] and fail at the other.
    """
    ok_lo = gron_add_holds(build(lo))
    if ok_lo == gron_add_holds(build(hi)):
        raise ConfigError("feasibility does not change across the bracket")
    while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if gron_add_holds(build(mid)) == ok_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gronwall_perov_bound(g: GronwallInputs, t: float) -> BoundResult:
    """Bound on F(t) from the three branches (gamma0 < 1, = 1, > 1)."""
    gam = g.gamma0
    hi = g.a0 + g.h if gam > 1 else g.b0
    if not g.a0 <= t <= hi:
        raise ConfigError(f"t={t} outside [{g.a0}, {hi}]")
    IB = _int(g._B, g.a0, t)
    if gam == 1.0:
        return BoundResult(g.A * math.exp(IB + _int(g._C, g.a0, t)))

    c = 1.0 - gam

    def kernel(tau):
        return g._C(tau) * math.exp(c * _int(g._B, tau, t))

    J = _int(kernel, g.a0, t)
    if gam < 1.0:
        base = g.A**c * math.exp(c * IB) + c * J
        return BoundResult(base ** (1.0 / c))
    if not gron_add_holds(g):
        return BoundResult(math.nan, False, "feasibility condition fails on [a0, a0 + h]")
    bracket = math.exp(c * IB) - g.A ** (gam - 1.0) * (gam - 1.0) * J
    if bracket <= 0:
        return BoundResult(math.nan, False, "bracket is nonpositive")
    return BoundResult(g.A * bracket ** (1.0 / c))


def gron_add_im_holds(A: float, B: float, delta: float, mu: float, T: float) -> bool:
    """T^{1/d} (A+1) / (mu ln(1/d))^{1/d} < e^{-T B}, compared in logs."""
    L = math.log(1.0 / delta)
    if mu * L <= 0:
        return False
    lhs = math.log(T) / delta + math.log(A + 1.0) - math.log(mu * L) / delta
    return lhs < -T * B


def gron_large_bound(A: float, B: float, delta: float, mu: float, T: float, t: float, n: int = 3) -> BoundResult:
    """(A+1) (e^{-B T d} - (A+1)^d / (mu ln(1/d)) int_0^t e^{(tau - t) B d} dtau)^{-1/d}."""
    if not 0 < delta < 1.0 / n:
        raise ConfigError(f"delta must lie in (0, 1/n) = (0, {1.0 / n:.6g}); got {delta}")
    if A < 0 or B < 0 or mu <= 0 or T <= 0:
        raise ConfigError("need A, B >= 0 and mu, T > 0")
    if not 0 <= t <= T:
        raise ConfigError(f"t={t} outside [0, T]")
    L = math.log(1.0 / delta)
    x = B * t * delta
    integral = -math.expm1(-x) / (B * delta) if x > 0 else t
    bracket = math.exp(-B * T * delta) - (A + 1.0) ** delta / (mu * L) * integral
    if not gron_add_im_holds(A, B, delta, mu, T):
        return BoundResult(math.nan, False, "feasibility condition on delta fails")
    if bracket <= 0:
        return BoundResult(math.nan, False, "bracket is nonpositive")
    return BoundResult((A + 1.0) * bracket ** (-1.0 / delta))


def gron_add_im_boundary(A: float, B: float, mu: float, T: float, lo: float, hi: float) -> float:
    """delta at which the feasibility condition turns into an equality (root in [lo, hi])."""

    def gap(d):
        L = math.log(1.0 / d)
        return math.log(T) / d + math.log(A + 1.0) - math.log(mu * L) / d + T * B

    return optimize.brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


# --- Gagliardo-Nirenberg probe --------------------------------------------------


@dataclass
class GNReport:
    lhs: float
    main_factor: float
    lower_factor: float
    ratio: float
    degenerate: bool


def _lp(vals: np.ndarray, p: float, cell: float) -> float:
    mag = np.sqrt(np.sum(vals**2, axis=0))
    if math.isinf(p):
        return float(np.max(mag))
    return float((cell * np.sum(mag**p)) ** (1.0 / p))


def derivative_lp_norm(u: FourierField, j: int, p: float) -> float:
    """max over multi-indices |alpha| = j of ||d^alpha u||_{L^p}."""
    g = u.grid
    cell = g.volume / g.N**g.n
    ik = 1j * g.kfactor * g.k * g.nyquist_free
    best = 0.0
    for alpha in itertools.combinations_with_replacement(range(g.n), j):
        c = u.coeffs
        for ax in alpha:
            c = ik[ax] * c
        best = max(best, _lp(_to_physical(g, c), p, cell))
    return best


def gagliardo_nirenberg_probe(
    u: FourierField,
    j0: int,
    k0: int,
    p0: float,
    q0: float,
    r0: float,
    s0: float,
    a0: float,
    tol: float = 1e-12,
) -> GNReport:
    """Left side and right-side factors of the torus Gagliardo-Nirenberg inequality.

    The constants are not estimated; ``ratio`` = lhs / main_factor lets one
    track the empirical constant over a corpus of fields.
    """
    n = u.grid.n
    inv = lambda p: 0.0 if math.isinf(p) else 1.0 / p  # noqa: E731
    problems = []
    if not 0 <= a0 <= 1:
        problems.append("a0 must lie in [0, 1]")
    if s0 < 1:
        problems.append("s0 must be >= 1")
    if k0 <= 0 or j0 / k0 > a0 + tol:
        problems.append("need j0/k0 <= a0")
    expected = j0 / n + a0 * (inv(r0) - k0 / n) + (1 - a0) * inv(q0)
    if abs(inv(p0) - expected) > tol:
        problems.append(f"exponent relation fails: 1/p0 = {inv(p0):.6g}, right side {expected:.6g}")
    if problems:
        raise ConfigError(problems)
    cell = u.grid.volume / u.grid.N**n
    up = _to_physical(u.grid, u.coeffs)
    lhs = derivative_lp_norm(u, j0, p0)
    main = derivative_lp_norm(u, k0, r0) ** a0 * _lp(up, q0, cell) ** (1 - a0)
    lower = _lp(up, s0, cell)
    degenerate = main == 0.0
    return GNReport(lhs, main, lower, math.nan if degenerate else lhs / main, degenerate)


# --- per-sample record ------------------------------------------------------------


@dataclass
class DiagnosticRecord:
    t: float
    l2_norm: float
    h1_norm: float
    h_s_norms: list[float]
    grad_norm: float
    divergence_max: float
    energy_residual: float
    exp_energy: float
    exp_overflow: bool
    trilinear_value: float


def make_record(
    t: float,
    u: FourierField,
    spec: NonlinearitySpec,
    s_list: Sequence[float] = (),
    balance: Optional[EnergyBalance] = None,
    dealias: bool = True,
) -> DiagnosticRecord:
    ee = exp_energy(u)
    return DiagnosticRecord(
        t=t,
        l2_norm=l2_norm(u),
        h1_norm=sobolev_norm(u, 1.0),
        h_s_norms=[sobolev_norm(u, s) for s in s_list],
        grad_norm=derivative_norm(u, 1),
        divergence_max=max_divergence(u),
        energy_residual=balance.update(t, u) if balance is not None else math.nan,
        exp_energy=ee.value if not ee.overflow else ee.log_value,
        exp_overflow=ee.overflow,
        trilinear_value=trilinear_pairing(spec, u, dealias),
    )
