"""Built-in identity suites run by ``ersatzns verify``.

Each suite returns a :class:`SuiteResult`; all of them are seeded and take
well under a second apiece on N = 16..32 grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .diagnostics import GronwallInputs, gronwall_perov_bound
from .errors import ConfigError
from .integrator import ForcingSpec, SimConfig, Trajectory, run, run_linearized
from .nonlinearity import NonlinearitySpec, eval_D, polarization_residual, trilinear_pairing
from .spectral_core import (
    TorusGrid,
    derivative_norm,
    divergence,
    gradient,
    l2_norm,
    laplacian,
    leray_project,
    random_field,
    rot,
)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    worst: float
    tolerance: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: worst {self.worst:.3e} (tol {self.tolerance:.1e})"


def _rel(a, b) -> float:
    return l2_norm(a) / max(l2_norm(b), 1e-300)


def de_rham_residuals(u, phi) -> list[float]:
    """Relative residuals of rot grad = 0, div grad = Lap and, for n = 3,
    div rot = 0 and -rot rot + grad div = Lap.

    Identities whose exact value is zero are measured against the size of
    the operand times the largest wavenumber.
    """
    g = u.grid
    kmax = g.kfactor * g.N / 2
    out = [
        l2_norm(rot(gradient(phi))) / max(l2_norm(gradient(phi)) * kmax, 1e-300),
        _rel(divergence(gradient(phi)) - laplacian(phi), laplacian(phi)),
    ]
    if g.n == 3:
        out.append(l2_norm(divergence(rot(u))) / max(l2_norm(rot(u)) * kmax, 1e-300))
        out.append(_rel(gradient(divergence(u)) - rot(rot(u)) - laplacian(u), laplacian(u)))
    return out


def suite_de_rham(seeds=range(5)) -> SuiteResult:
    worst = 0.0
    for n in (2, 3):
        g = TorusGrid(n, 2 * math.pi, 16)
        for s in seeds:
            u = random_field(g, n, seed=s)
            phi = random_field(g, 1, seed=1000 + s)
            worst = max(worst, *de_rham_residuals(u, phi))
    return SuiteResult("de Rham identities", worst < 1e-11, worst, 1e-11)


def suite_projection(seeds=range(5)) -> SuiteResult:
    worst = 0.0
    for n in (2, 3):
        g = TorusGrid(n, 2.0, 16)
        for s in seeds:
            u = random_field(g, n, seed=s)
            pu = leray_project(u)
            worst = max(worst, _rel(leray_project(pu) - pu, pu))
            grad = gradient(random_field(g, 1, seed=50 + s))
            worst = max(worst, _rel(leray_project(grad), grad))
            worst = max(worst, l2_norm(divergence(pu)) / (l2_norm(u) * g.kfactor * g.N))
    return SuiteResult("Leray projection", worst < 1e-11, worst, 1e-11)


def suite_polarization(seeds=range(3)) -> SuiteResult:
    worst = 0.0
    g = TorusGrid(3, 2 * math.pi, 16)
    for spec in (NonlinearitySpec.advection(), NonlinearitySpec.svplechac(0.3)):
        for s in seeds:
            u1 = random_field(g, 3, seed=s)
            u2 = random_field(g, 3, seed=100 + s)
            scale = l2_norm(eval_D(spec, u1)) + l2_norm(eval_D(spec, u2))
            worst = max(worst, polarization_residual(spec, u1, u2) / scale)
    return SuiteResult("polarization identity", worst < 1e-12, worst, 1e-12)


def suite_trilinear(seeds=range(3)) -> SuiteResult:
    worst = 0.0
    for n in (2, 3):
        g = TorusGrid(n, 2 * math.pi, 16)
        for s in seeds:
            u = random_field(g, n, seed=s)
            norm = l2_norm(u) ** 2 * derivative_norm(u, 1)
            for b in (0.1, 0.5, 0.9):
                worst = max(worst, abs(trilinear_pairing(NonlinearitySpec.svplechac(b), u)) / norm)
            pu = leray_project(u)
            norm = l2_norm(pu) ** 2 * derivative_norm(pu, 1)
            worst = max(worst, abs(trilinear_pairing(NonlinearitySpec.advection(), pu)) / norm)
    return SuiteResult("trilinear null", worst < 1e-10, worst, 1e-10)


def frechet_errors(epsilons, seed: int = 0, N: int = 16, T: float = 0.05, dt: float = 5e-3) -> list[float]:
    """|| (S(u0 + eps v0) - S(u0))/eps - L v0 || for the imex_euler flow map S and its tangent L."""
    g = TorusGrid(2, 2 * math.pi, N)
    spec = NonlinearitySpec.svplechac(0.4)
    cfg = SimConfig(mu=0.05, a=0, T=T, dt=dt, scheme="imex_euler")
    f = ForcingSpec.zero()
    u0 = random_field(g, 2, seed=seed)
    v0 = random_field(g, 2, seed=seed + 1)
    traj = Trajectory()
    base = run(cfg, spec, f, u0, sink=traj.sink)
    lin = run_linearized(cfg, traj, spec, f, v0).u
    out = []
    for eps in epsilons:
        pert = run(cfg, spec, f, u0 + v0 * eps).final.u
        out.append(l2_norm((pert - base.final.u) * (1.0 / eps) - lin) / l2_norm(lin))
    return out


def slope(xs, ys) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def suite_frechet() -> SuiteResult:
    eps = [1e-3, 5e-4, 2.5e-4]
    p = slope(eps, frechet_errors(eps))
    return SuiteResult("Frechet derivative slope", abs(p - 1.0) <= 0.1, abs(p - 1.0), 0.1)


def perov_closed_form_errors(ts=np.linspace(0.0, 0.4, 9)) -> list[float]:
    """Relative errors against F' = 2F, F' = F^2 (F0 = 1) and F' = sqrt(F) (F0 = 1)."""
    cases = [
        (GronwallInputs(A=1.0, B=0.0, C=2.0, gamma0=1.0, h=1.0), lambda t: math.exp(2 * t)),
        (GronwallInputs(A=1.0, B=0.0, C=1.0, gamma0=2.0, h=0.5), lambda t: 1.0 / (1.0 - t)),
        (GronwallInputs(A=1.0, B=0.0, C=1.0, gamma0=0.5, h=1.0), lambda t: (1.0 + t / 2) ** 2),
    ]
    out = []
    for g, exact in cases:
        for t in ts:
            r = gronwall_perov_bound(g, float(t))
            out.append(abs(r.value - exact(t)) / exact(t) if r.feasible else math.inf)
    return out


def suite_perov() -> SuiteResult:
    worst = max(perov_closed_form_errors())
    return SuiteResult("Gronwall-Perov closed forms", worst < 1e-9, worst, 1e-9)


SUITES: dict[str, Callable[[], SuiteResult]] = {
    "de_rham": suite_de_rham,
    "projection": suite_projection,
    "polarization": suite_polarization,
    "trilinear": suite_trilinear,
    "frechet": suite_frechet,
    "perov": suite_perov,
}


def run_suites(names=None) -> list[SuiteResult]:
    names = list(names or SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ConfigError([f"unknown suite {n!r} (choose from {', '.join(SUITES)})" for n in unknown])
    return [SUITES[name]() for name in names]
