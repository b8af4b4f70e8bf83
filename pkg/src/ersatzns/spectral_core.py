"""Fourier representation of periodic fields on the n-torus and linear operators.

Conventions
-----------
A field on the cube ``(0, ell)^n`` is sampled at ``N`` points per axis,
``x_j = j * ell / N``.  Coefficients are stored in numpy FFT order with shape
``(m, N, ..., N)`` and normalised so that

    u(x) = sum_k c_k exp(i (2 pi / ell) k . x),      c_0 = mean of u over Q.

With this normalisation Parseval reads ``(1/|Q|) int_Q |u|^2 = sum_k |c_k|^2``,
so every L2(Q) norm in the package is ``sqrt(|Q| * sum |c_k|^2)``.  This is
the one place the factor is defined; see :func:`inner_product`.

Modes with any wavevector component equal to ``-N/2`` (the Nyquist plane)
have no Hermitian partner on the grid.  Every differential or projection
operator below returns zero there so that derived fields stay real.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import ConfigError, InconsistentInput, UnsupportedOperation

# absolute floor used wherever a tolerance is relative to a field magnitude
ABS_FLOOR = 1e-14


@dataclass(frozen=True)
class TorusGrid:
    n: int
    ell: float
    N: int

    def __post_init__(self):
        problems = []
        if self.n not in (2, 3, 4):
            problems.append(f"n must be 2, 3 or 4 (got {self.n})")
        if not self.ell > 0:
            problems.append(f"ell must be positive (got {self.ell})")
        if self.N < 8 or self.N % 2:
            problems.append(f"N must be an even integer >= 8 (got {self.N})")
        if problems:
            raise ConfigError(problems)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def kfactor(self) -> float:
        """Wavenumber factor 2 pi / ell."""
        return 2.0 * np.pi / self.ell

    @property
    def volume(self) -> float:
        return self.ell**self.n

    @property
    def axes(self) -> tuple[int, ...]:
        """Spatial axes of an ``(m, N, ..., N)`` array."""
        return tuple(range(1, self.n + 1))

    @cached_property
    def k(self) -> np.ndarray:
        """Integer wavevectors, shape ``(n, N, ..., N)``, FFT order."""
        k1 = np.fft.fftfreq(self.N, d=1.0 / self.N).round().astype(np.int64)
        return np.array(np.meshgrid(*([k1] * self.n), indexing="ij"))

    @cached_property
    def k2(self) -> np.ndarray:
        """(k, k) on the integer lattice."""
        return np.sum(self.k**2, axis=0)

    @cached_property
    def nyquist_free(self) -> np.ndarray:
        """True where no wavevector component equals -N/2."""
        return np.all(self.k != -self.N // 2, axis=0)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        # keep 3|k_j| < N for every j; products of kept modes never alias back
        return np.all(3 * np.abs(self.k) < self.N, axis=0)

    @cached_property
    def x(self) -> np.ndarray:
        """Physical grid coordinates, shape ``(n, N, ..., N)``."""
        x1 = np.arange(self.N) * (self.ell / self.N)
        return np.array(np.meshgrid(*([x1] * self.n), indexing="ij"))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FourierField:
    grid: TorusGrid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim != self.grid.n + 1 or c.shape[1:] != self.grid.shape:
            raise ConfigError(
                f"coefficient array shape {c.shape} does not match grid "
                f"(m,) + {self.grid.shape}"
            )
        object.__setattr__(self, "coeffs", _readonly(c))

    @property
    def m(self) -> int:
        return self.coeffs.shape[0]

    def _check(self, other: "FourierField"):
        if other.grid != self.grid or other.m != self.m:
            raise ConfigError("fields live on different grids or have different component counts")

    def __add__(self, other: "FourierField") -> "FourierField":
        self._check(other)
        return FourierField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "FourierField") -> "FourierField":
        self._check(other)
        return FourierField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "FourierField":
        return FourierField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "FourierField":
        return FourierField(self.grid, -self.coeffs)

    def component(self, i: int) -> "FourierField":
        return FourierField(self.grid, self.coeffs[i : i + 1])


@dataclass(frozen=True, eq=False)
class PhysicalField:
    grid: TorusGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != self.grid.n + 1 or v.shape[1:] != self.grid.shape:
            raise ConfigError(
                f"value array shape {v.shape} does not match grid (m,) + {self.grid.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ConfigError("physical field contains non-finite values")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def m(self) -> int:
        return self.values.shape[0]


def zeros(grid: TorusGrid, m: int) -> FourierField:
    return FourierField(grid, np.zeros((m,) + grid.shape, dtype=np.complex128))


def stack(fields: list[FourierField]) -> FourierField:
    grid = fields[0].grid
    return FourierField(grid, np.concatenate([f.coeffs for f in fields], axis=0))


def forward_transform(p: PhysicalField) -> FourierField:
    g = p.grid
    return FourierField(g, np.fft.fftn(p.values, axes=g.axes) / g.N**g.n)


def inverse_transform(f: FourierField) -> PhysicalField:
    return PhysicalField(f.grid, _to_physical(f.grid, f.coeffs))


def _to_physical(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(coeffs, axes=grid.axes).real * grid.N**grid.n


def _to_fourier(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    return np.fft.fftn(values, axes=grid.axes) / grid.N**grid.n


def from_function(grid: TorusGrid, func: Callable[..., np.ndarray]) -> FourierField:
    """Sample ``func(x1, ..., xn)`` on the grid; it returns an ``(m, ...)`` array or a scalar array."""
    vals = np.asarray(func(*grid.x), dtype=np.float64)
    if vals.ndim == grid.n:
        vals = vals[None]
    return forward_transform(PhysicalField(grid, vals))


def _require_m(f: FourierField, m: int, what: str):
    if f.m != m:
        raise ConfigError(f"{what} expects {m} component(s), got {f.m}")


# --- differential operators -------------------------------------------------


def gradient(f: FourierField) -> FourierField:
    """Scalar field -> n-vector field."""
    g = f.grid
    _require_m(f, 1, "gradient")
    ik = 1j * g.kfactor * g.k * g.nyquist_free
    return FourierField(g, ik * f.coeffs[0])


def divergence(f: FourierField) -> FourierField:
    g = f.grid
    _require_m(f, g.n, "divergence")
    ik = 1j * g.kfactor * g.k * g.nyquist_free
    return FourierField(g, np.sum(ik * f.coeffs, axis=0)[None])


def laplacian(f: FourierField) -> FourierField:
    g = f.grid
    symbol = -(g.kfactor**2) * g.k2 * g.nyquist_free
    return FourierField(g, symbol * f.coeffs)


def partial(f: FourierField, axis: int) -> FourierField:
    """Componentwise derivative along one coordinate axis."""
    g = f.grid
    ik = 1j * g.kfactor * g.k[axis] * g.nyquist_free
    return FourierField(g, ik * f.coeffs)


def rot(f: FourierField) -> FourierField:
    """Scalar curl for n=2, vector curl for n=3."""
    g = f.grid
    if g.n not in (2, 3):
        raise UnsupportedOperation(f"rot is only defined for n in {{2, 3}}, not n={g.n}")
    _require_m(f, g.n, "rot")
    ik = 1j * g.kfactor * g.k * g.nyquist_free
    c = f.coeffs
    if g.n == 2:
        return FourierField(g, (ik[0] * c[1] - ik[1] * c[0])[None])
    return FourierField(
        g,
        np.array(
            [
                ik[1] * c[2] - ik[2] * c[1],
                ik[2] * c[0] - ik[0] * c[2],
                ik[0] * c[1] - ik[1] * c[0],
            ]
        ),
    )


# --- projections and inverses -------------------------------------------------


def leray_project(u: FourierField) -> FourierField:
    """Helmholtz-Leray projection onto divergence-free fields.

    Removes the component of each coefficient parallel to k.  The mean mode
    is passed through unchanged.
    """
    g = u.grid
    _require_m(u, g.n, "leray_project")
    k = g.k.astype(np.float64)
    k2 = g.k2.astype(np.float64)
    k2[(0,) * g.n] = 1.0
    kdotc = np.sum(k * u.coeffs, axis=0)
    out = u.coeffs - k * (kdotc / k2)
    return FourierField(g, out * g.nyquist_free)


def mean_part(u: FourierField) -> FourierField:
    """Pi u: the constant (k = 0) part of u."""
    out = np.zeros_like(u.coeffs)
    idx = (slice(None),) + (0,) * u.grid.n
    out[idx] = u.coeffs[idx]
    return FourierField(u.grid, out)


def phi_inverse_laplacian(u: FourierField) -> FourierField:
    """Inverse Laplacian on mean-free fields; kills the mean mode.

    Satisfies ``laplacian(phi u) = u - Pi u`` on Nyquist-free fields.
    """
    g = u.grid
    k2 = g.k2.astype(np.float64)
    k2[(0,) * g.n] = np.inf
    return FourierField(g, -u.coeffs / (k2 * g.kfactor**2) * g.nyquist_free)


def pressure_from_gradient(F: FourierField, rtol: float = 1e-8) -> FourierField:
    """Recover the zero-mean scalar p with grad p = F - Pi F.

    Raises :class:`InconsistentInput` when F has a divergence-free part
    (other than its mean) larger than ``rtol * ||F||``.
    """
    g = F.grid
    _require_m(F, g.n, "pressure_from_gradient")
    solenoidal = leray_project(F) - mean_part(F)
    fnorm = np.sqrt(np.sum(np.abs(F.coeffs) ** 2))
    snorm = np.sqrt(np.sum(np.abs(solenoidal.coeffs) ** 2))
    if snorm > rtol * fnorm + ABS_FLOOR:
        raise InconsistentInput(
            f"field is not a gradient: divergence-free part {snorm:.3e} vs norm {fnorm:.3e}"
        )
    return divergence(phi_inverse_laplacian(F))


# --- norms ------------------------------------------------------------------


def sobolev_norm(u: FourierField, s: float) -> float:
    """sqrt(|c_0|^2 + sum_{k != 0} (k,k)^s |c_k|^2), summed over components.

    The weight is (k,k)^s on the integer lattice, not (1 + (k,k))^s.
    """
    g = u.grid
    # (k,k) = 0 only at k = 0, whose weight is 1 by definition
    weight = np.where(g.k2 == 0, 1.0, g.k2).astype(np.float64) ** float(s)
    return float(np.sqrt(np.sum(weight * np.abs(u.coeffs) ** 2)))


def inner_product(u: FourierField, v: FourierField) -> float:
    """L2(Q) inner product via Parseval: |Q| * Re sum c_k(u) conj(c_k(v))."""
    u._check(v)
    return float(u.grid.volume * np.sum((u.coeffs * np.conj(v.coeffs)).real))


def l2_norm(u: FourierField) -> float:
    return float(np.sqrt(u.grid.volume * np.sum(np.abs(u.coeffs) ** 2)))


def derivative_norm(u: FourierField, i: int) -> float:
    """||(-Delta)^{i/2} u||_{L2(Q)}, the L2 size of the i-th derivatives."""
    g = u.grid
    if i == 0:
        return l2_norm(u)
    symbol = (g.kfactor**2 * g.k2) ** i
    return float(np.sqrt(g.volume * np.sum(symbol * np.abs(u.coeffs) ** 2)))


def max_abs(u: FourierField) -> float:
    """Pointwise sup of the Euclidean magnitude on the grid."""
    vals = _to_physical(u.grid, u.coeffs)
    return float(np.sqrt(np.max(np.sum(vals**2, axis=0))))


def max_divergence(u: FourierField) -> float:
    return float(np.max(np.abs(_to_physical(u.grid, divergence(u).coeffs))))


def dealias(u: FourierField) -> FourierField:
    """Two-thirds rule: zero every mode with some 3|k_j| >= N."""
    return FourierField(u.grid, u.coeffs * u.grid.dealias_mask)


def hermitian_defect(u: FourierField) -> float:
    """max |c_{-k} - conj(c_k)| over Nyquist-free modes."""
    g = u.grid
    c = u.coeffs * g.nyquist_free
    flipped = np.roll(np.flip(c, axis=g.axes), shift=1, axis=g.axes)
    return float(np.max(np.abs(flipped - np.conj(c))))


# --- random data ------------------------------------------------------------


def random_field(
    grid: TorusGrid,
    m: int,
    seed: int | np.random.Generator | None = None,
    kmax: int | None = None,
    amplitude: float = 1.0,
    project: bool = False,
) -> FourierField:
    """Seeded random band-limited real field (|k_j| <= kmax, default N/4).

    Built in physical space from a Hermitian-symmetric spectrum, so the
    result is exactly real; rescaled to unit RMS times ``amplitude``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    kmax = grid.N // 4 if kmax is None else kmax
    c = rng.standard_normal((m,) + grid.shape) + 1j * rng.standard_normal((m,) + grid.shape)
    band = np.all(np.abs(grid.k) <= kmax, axis=0) & grid.nyquist_free
    # spectral decay keeps fields smooth
    c = c * band / (1.0 + grid.k2) ** 1.0
    vals = _to_physical(grid, c)  # real part == Hermitian symmetrisation
    f = FourierField(grid, _to_fourier(grid, vals) * band)
    if project:
        f = leray_project(f)
    rms = np.sqrt(np.sum(np.abs(f.coeffs) ** 2))
    return f * (amplitude / rms) if rms > 0 else f
