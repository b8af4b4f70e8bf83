"""Run configuration: YAML in, validated :class:`RunConfig` out, YAML echo-back.

Sections and their keys (defaults in :data:`DEFAULTS`)::

    grid:          n, ell, N
    sim:           mu, a, T, dt, scheme, dealias, diag_every, tol_div,
                   blowup_threshold, check_divergence
    nonlinearity:  kind, b, coeffs
    forcing:       kind (zero | single_mode | snapshot), component, k,
                   amplitude, phase, path
    initial:       kind (zero | modes | snapshot | random | taylor_green),
                   modes, path, seed, amplitude, kmax, project
    diagnostics:   sobolev_s, snapshot_every
    output:        dir

Unknown keys are errors.  :func:`parse_config` reports every violation it
finds, not only the first.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .errors import ConfigError
from .integrator import ForcingSpec, SimConfig
from .nonlinearity import KINDS, BilinearTensor, NonlinearitySpec
from .snapshot import read_snapshot
from .spectral_core import FourierField, TorusGrid, from_function, random_field

FORMAT_VERSION = 1

DEFAULTS: dict[str, dict[str, Any]] = {
    "grid": {"n": 2, "ell": 2 * math.pi, "N": 32},
    "sim": {
        "mu": 0.1,
        "a": 1,
        "T": 1.0,
        "dt": 1e-3,
        "scheme": "etdrk2",
        "dealias": True,
        "diag_every": 10,
        "tol_div": 1e-10,
        "blowup_threshold": 1e8,
        "check_divergence": True,
    },
    "nonlinearity": {"kind": "advection", "b": None, "coeffs": None},
    "forcing": {"kind": "zero", "component": 0, "k": None, "amplitude": 0.0, "phase": 0.0, "path": None},
    "initial": {
        "kind": "random",
        "modes": [],
        "path": None,
        "seed": 0,
        "amplitude": 1.0,
        "kmax": None,
        "project": True,
    },
    "diagnostics": {"sobolev_s": [2.0], "snapshot_every": 0},
    "output": {"dir": None},
}

FORCING_KINDS = ("zero", "single_mode", "snapshot")
INITIAL_KINDS = ("zero", "modes", "snapshot", "random", "taylor_green")
MODE_KEYS = {"component", "k", "amplitude", "phase"}


@dataclass(frozen=True, eq=False)
class RunConfig:
    grid: TorusGrid
    sim: SimConfig
    nonlinearity: NonlinearitySpec
    raw: dict[str, dict[str, Any]]

    @property
    def forcing(self) -> dict[str, Any]:
        return self.raw["forcing"]

    @property
    def initial(self) -> dict[str, Any]:
        return self.raw["initial"]

    @property
    def sobolev_s(self) -> list[float]:
        return list(self.raw["diagnostics"]["sobolev_s"])

    @property
    def snapshot_every(self) -> int:
        return int(self.raw["diagnostics"]["snapshot_every"])

    @property
    def output_dir(self) -> Optional[str]:
        return self.raw["output"]["dir"]

    def with_overrides(self, **sections: dict[str, Any]) -> "RunConfig":
        raw = copy.deepcopy(self.raw)
        for name, values in sections.items():
            raw[name].update(values)
        return from_dict(raw)

    def to_dict(self) -> dict[str, Any]:
        return {"version": FORMAT_VERSION, **copy.deepcopy(self.raw)}

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def build_forcing(self, base: Optional[Path] = None) -> ForcingSpec:
        fc = self.forcing
        if fc["kind"] == "zero":
            return ForcingSpec.zero()
        if fc["kind"] == "snapshot":
            f, _ = read_snapshot(_resolve(fc["path"], base))
            _same_grid(f, self.grid, "forcing snapshot")
            return ForcingSpec.constant(f)
        f = _mode_field(self.grid, [fc])
        return ForcingSpec.constant(f)

    def build_initial(self, base: Optional[Path] = None) -> FourierField:
        ic, g = self.initial, self.grid
        kind = ic["kind"]
        if kind == "zero":
            return _mode_field(g, [])
        if kind == "modes":
            return _mode_field(g, ic["modes"])
        if kind == "snapshot":
            u, _ = read_snapshot(_resolve(ic["path"], base))
            _same_grid(u, g, "initial snapshot")
            return u
        if kind == "taylor_green":
            return taylor_green(g, ic["amplitude"])
        return random_field(g, g.n, seed=int(ic["seed"]), kmax=ic["kmax"], amplitude=ic["amplitude"], project=ic["project"])


def _resolve(path: str, base: Optional[Path]) -> Path:
    p = Path(path)
    return p if p.is_absolute() or base is None else base / p


def _same_grid(f: FourierField, g: TorusGrid, what: str):
    if (f.grid.n, f.grid.N, f.grid.ell) != (g.n, g.N, g.ell) or f.m != g.n:
        raise ConfigError(f"{what} has n={f.grid.n}, N={f.grid.N}, ell={f.grid.ell}, m={f.m}; config grid differs")


def _mode_field(g: TorusGrid, modes: list[dict[str, Any]]) -> FourierField:
    """Sum of amplitude * cos(2 pi/ell k.x + phase) in the given components."""

    def func(*x):
        out = np.zeros((g.n,) + g.shape)
        for md in modes:
            theta = g.kfactor * sum(kj * xj for kj, xj in zip(md["k"], x)) + md.get("phase", 0.0)
            out[md["component"]] += md["amplitude"] * np.cos(theta)
        return out

    return from_function(g, func)


def taylor_green(g: TorusGrid, amplitude: float = 1.0) -> FourierField:
    """(A sin(kx) cos(ky), -A cos(kx) sin(ky)) with k = 2 pi/ell; n = 2 only."""
    if g.n != 2:
        raise ConfigError("taylor_green initial data is defined for n = 2")
    k = g.kfactor
    return from_function(g, lambda x, y: np.stack([amplitude * np.sin(k * x) * np.cos(k * y), -amplitude * np.cos(k * x) * np.sin(k * y)]))


def taylor_green_exact(g: TorusGrid, amplitude: float, mu: float, t: float) -> FourierField:
    return taylor_green(g, amplitude * math.exp(-2.0 * mu * g.kfactor**2 * t))


# --- parsing ------------------------------------------------------------------------


def _merge(data: dict[str, Any], problems: list[str]) -> dict[str, dict[str, Any]]:
    raw = copy.deepcopy(DEFAULTS)
    for section, values in data.items():
        if section == "version":
            if values != FORMAT_VERSION:
                problems.append(f"unsupported config version {values!r}")
            continue
        if section not in DEFAULTS:
            problems.append(f"unknown section {section!r}")
            continue
        if values is None:
            continue
        if not isinstance(values, dict):
            problems.append(f"section {section!r} must be a mapping")
            continue
        for key, value in values.items():
            if key not in DEFAULTS[section]:
                problems.append(f"unknown key {section}.{key}")
            else:
                raw[section][key] = value
    return raw


def _number(problems, where, value, kind=float, positive=False, nonneg=False):
    ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    if not ok or (kind is float and not math.isfinite(value)):
        problems.append(f"{where} must be a finite {'integer' if kind is int else 'number'} (got {value!r})")
        return False
    if positive and not value > 0:
        problems.append(f"{where} must be positive (got {value})")
        return False
    if nonneg and value < 0:
        problems.append(f"{where} must be >= 0 (got {value})")
        return False
    return True


def _check_mode(problems, where, md, n):
    if not isinstance(md, dict):
        problems.append(f"{where} must be a mapping")
        return
    for key in md:
        if key not in MODE_KEYS:
            problems.append(f"unknown key {where}.{key}")
    k = md.get("k")
    if not (isinstance(k, list) and len(k) == n and all(isinstance(x, int) and not isinstance(x, bool) for x in k)):
        problems.append(f"{where}.k must be a list of {n} integers (got {k!r})")
    c = md.get("component", 0)
    if not (isinstance(c, int) and 0 <= c < n):
        problems.append(f"{where}.component must be an integer in [0, {n}) (got {c!r})")
    _number(problems, f"{where}.amplitude", md.get("amplitude", 0.0))
    _number(problems, f"{where}.phase", md.get("phase", 0.0))


def from_dict(data: dict[str, Any]) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of sections")
    problems: list[str] = []
    raw = _merge(data, problems)

    gr = raw["grid"]
    grid = None
    good = _number(problems, "grid.n", gr["n"], int, positive=True)
    good &= _number(problems, "grid.N", gr["N"], int, positive=True)
    good &= _number(problems, "grid.ell", gr["ell"], positive=True)
    if good:
        try:
            grid = TorusGrid(gr["n"], float(gr["ell"]), gr["N"])
        except ConfigError as exc:
            problems.extend(exc.violations)
    n = gr["n"] if isinstance(gr["n"], int) else 0

    s = raw["sim"]
    sim = None
    floats_ok = all(_number(problems, f"sim.{k}", s[k]) for k in ("mu", "T", "dt", "tol_div", "blowup_threshold"))
    for key in ("dealias", "check_divergence"):
        if not isinstance(s[key], bool):
            problems.append(f"sim.{key} must be true or false")
    if floats_ok:
        sim = SimConfig(
            mu=float(s["mu"]),
            a=s["a"],
            T=float(s["T"]),
            dt=float(s["dt"]),
            scheme=s["scheme"],
            dealias=s["dealias"],
            diag_every=s["diag_every"],
            tol_div=float(s["tol_div"]),
            blowup_threshold=float(s["blowup_threshold"]),
            check_divergence=s["check_divergence"],
        )
        problems.extend(sim.violations())

    nl = raw["nonlinearity"]
    spec = None
    if nl["kind"] not in KINDS:
        problems.append(f"nonlinearity.kind must be one of {KINDS} (got {nl['kind']!r})")
    elif nl["kind"] == "svplechac" and not (isinstance(nl["b"], (int, float)) and 0 < nl["b"] < 1):
        problems.append(f"nonlinearity.b must satisfy 0 < b < 1 for svplechac (got {nl['b']!r})")
    elif nl["kind"] == "custom" and nl["coeffs"] is None:
        problems.append("nonlinearity.coeffs is required for kind custom")
    else:
        try:
            if nl["kind"] == "custom":
                spec = NonlinearitySpec.custom(BilinearTensor(n, np.asarray(nl["coeffs"], dtype=float)))
            elif nl["kind"] == "svplechac":
                spec = NonlinearitySpec.svplechac(float(nl["b"]))
            else:
                spec = NonlinearitySpec(nl["kind"])
        except (ConfigError, ValueError, TypeError) as exc:
            problems.append(f"nonlinearity: {exc}")

    fc = raw["forcing"]
    if fc["kind"] not in FORCING_KINDS:
        problems.append(f"forcing.kind must be one of {FORCING_KINDS} (got {fc['kind']!r})")
    elif fc["kind"] == "single_mode":
        _check_mode(problems, "forcing", {k: fc[k] for k in MODE_KEYS}, n)
    elif fc["kind"] == "snapshot" and not isinstance(fc["path"], str):
        problems.append("forcing.path is required for kind snapshot")

    ic = raw["initial"]
    if ic["kind"] not in INITIAL_KINDS:
        problems.append(f"initial.kind must be one of {INITIAL_KINDS} (got {ic['kind']!r})")
    elif ic["kind"] == "modes":
        if not isinstance(ic["modes"], list) or not ic["modes"]:
            problems.append("initial.modes must be a non-empty list for kind modes")
        else:
            for j, md in enumerate(ic["modes"]):
                _check_mode(problems, f"initial.modes[{j}]", md, n)
    elif ic["kind"] == "snapshot" and not isinstance(ic["path"], str):
        problems.append("initial.path is required for kind snapshot")
    elif ic["kind"] == "random":
        _number(problems, "initial.seed", ic["seed"], int, nonneg=True)
        _number(problems, "initial.amplitude", ic["amplitude"], nonneg=True)
        if ic["kmax"] is not None:
            _number(problems, "initial.kmax", ic["kmax"], int, positive=True)
        if not isinstance(ic["project"], bool):
            problems.append("initial.project must be true or false")
    elif ic["kind"] == "taylor_green":
        _number(problems, "initial.amplitude", ic["amplitude"])
        if n != 2:
            problems.append("initial.kind taylor_green requires grid.n = 2")

    dg = raw["diagnostics"]
    ss = dg["sobolev_s"]
    if not (isinstance(ss, list) and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in ss)):
        problems.append("diagnostics.sobolev_s must be a list of numbers")
    if _number(problems, "diagnostics.snapshot_every", dg["snapshot_every"], int, nonneg=True):
        every = s["diag_every"]
        if dg["snapshot_every"] and isinstance(every, int) and every >= 1 and dg["snapshot_every"] % every:
            problems.append("diagnostics.snapshot_every must be a multiple of sim.diag_every")
    if raw["output"]["dir"] is not None and not isinstance(raw["output"]["dir"], str):
        problems.append("output.dir must be a string")

    if problems:
        raise ConfigError(problems)
    return RunConfig(grid, sim, spec, raw)


def parse_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    return from_dict(data or {})


def parse_text(text: str) -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    return from_dict(data or {})
