"""Constant-coefficient bilinear nonlinearities D u = M(u, grad u).

``M(u, G)_i = sum_{j,k,l} M[i, j, k*n + l] u^j G_kl`` with ``G_kl = d_k w^l``.
Products are formed pseudo-spectrally on the grid and the result is
dealiased with the two-thirds rule.

Built-in kinds:

* ``advection``:  (u . grad) u
* ``svplechac``:  b (u . grad) u + (1-b)/2 grad|u|^2 + (div u) u / 2,  0 < b < 1
* ``custom``:     an arbitrary :class:`BilinearTensor`
* ``zero``:       D = 0

The built-ins are evaluated from their closed forms; the tensor encoding is
used for the symmetrised form B and for ``custom``.  The two routes are
compared in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigError
from .spectral_core import (
    FourierField,
    _to_fourier,
    _to_physical,
    gradient,
    inner_product,
    l2_norm,
    zeros,
)

KINDS = ("advection", "svplechac", "custom", "zero")


@dataclass(frozen=True, eq=False)
class BilinearTensor:
    n: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64)
        if c.shape != (self.n, self.n, self.n**2):
            raise ConfigError(f"bilinear tensor must have shape {(self.n, self.n, self.n**2)}, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ConfigError("bilinear tensor has non-finite entries")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def apply(self, u: np.ndarray, G: np.ndarray) -> np.ndarray:
        """Pointwise M(u, G) for physical arrays u ``(n, ...)`` and G ``(n, n, ...)``."""
        n = self.n
        M = self.coeffs.reshape(n, n, n, n)  # i, j, k, l
        return np.einsum("ijkl,j...,kl...->i...", M, u, G, optimize=True)

    @classmethod
    def advection(cls, n: int) -> "BilinearTensor":
        M = np.zeros((n, n, n * n))
        for i in range(n):
            for j in range(n):
                M[i, j, j * n + i] = 1.0
        return cls(n, M)

    @classmethod
    def half_grad_square(cls, n: int) -> "BilinearTensor":
        """grad|u|^2 / 2 = u^l d_i u^l."""
        M = np.zeros((n, n, n * n))
        for i in range(n):
            for l in range(n):
                M[i, l, i * n + l] = 1.0
        return cls(n, M)

    @classmethod
    def half_div_times(cls, n: int) -> "BilinearTensor":
        """(div u) u / 2."""
        M = np.zeros((n, n, n * n))
        for i in range(n):
            for k in range(n):
                M[i, i, k * n + k] = 0.5
        return cls(n, M)

    @classmethod
    def svplechac(cls, n: int, b: float) -> "BilinearTensor":
        M = (
            b * cls.advection(n).coeffs
            + (1.0 - b) * cls.half_grad_square(n).coeffs
            + cls.half_div_times(n).coeffs
        )
        return cls(n, M)


@dataclass(frozen=True, eq=False)
class NonlinearitySpec:
    kind: str
    b: float | None = None
    tensor: BilinearTensor | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown nonlinearity kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "svplechac" and not (self.b is not None and 0.0 < self.b < 1.0):
            raise ConfigError(f"svplechac requires 0 < b < 1 (got {self.b})")
        if self.kind == "custom" and self.tensor is None:
            raise ConfigError("custom nonlinearity requires a tensor")

    @classmethod
    def advection(cls) -> "NonlinearitySpec":
        return cls("advection")

    @classmethod
    def svplechac(cls, b: float) -> "NonlinearitySpec":
        return cls("svplechac", b=b)

    @classmethod
    def custom(cls, tensor: BilinearTensor) -> "NonlinearitySpec":
        return cls("custom", tensor=tensor)

    @classmethod
    def zero(cls) -> "NonlinearitySpec":
        return cls("zero")

    def tensor_for(self, n: int) -> BilinearTensor:
        if self.kind == "custom":
            if self.tensor.n != n:
                raise ConfigError(f"custom tensor is for n={self.tensor.n}, field has n={n}")
            return self.tensor
        if self.kind == "advection":
            return BilinearTensor.advection(n)
        if self.kind == "svplechac":
            return BilinearTensor.svplechac(n, self.b)
        return BilinearTensor(n, np.zeros((n, n, n * n)))

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind}
        if self.kind == "svplechac":
            d["b"] = float(self.b)
        if self.kind == "custom":
            d["coeffs"] = self.tensor.coeffs.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any], n: int) -> "NonlinearitySpec":
        kind = d.get("kind")
        if kind == "svplechac":
            return cls.svplechac(d.get("b"))
        if kind == "custom":
            return cls.custom(BilinearTensor(n, np.asarray(d.get("coeffs"), dtype=float)))
        return cls(kind)


def _velocity_gradient(u: FourierField) -> np.ndarray:
    """Physical G[k, l] = d_k u^l."""
    g = u.grid
    ik = 1j * g.kfactor * g.k * g.nyquist_free
    spec = ik[:, None] * u.coeffs[None, :]
    return _to_physical(g, spec.reshape((g.n * g.n,) + g.shape)).reshape((g.n, g.n) + g.shape)


def _finish(u: FourierField, values: np.ndarray, dealias: bool) -> FourierField:
    c = _to_fourier(u.grid, values)
    if dealias:
        c = c * u.grid.dealias_mask
    return FourierField(u.grid, c)


def _check_vector(u: FourierField):
    if u.m != u.grid.n:
        raise ConfigError(f"nonlinearity acts on {u.grid.n}-component fields, got {u.m}")


def apply_tensor(tensor: BilinearTensor, u: FourierField, w: FourierField, dealias: bool = True) -> FourierField:
    """M(u, grad w)."""
    _check_vector(u)
    _check_vector(w)
    u._check(w)
    up = _to_physical(u.grid, u.coeffs)
    return _finish(u, tensor.apply(up, _velocity_gradient(w)), dealias)


def eval_D(spec: NonlinearitySpec, u: FourierField, dealias: bool = True) -> FourierField:
    _check_vector(u)
    g = u.grid
    if spec.kind == "zero":
        return zeros(g, g.n)
    if spec.kind == "custom":
        return apply_tensor(spec.tensor_for(g.n), u, u, dealias)

    up = _to_physical(g, u.coeffs)
    G = _velocity_gradient(u)
    adv = np.einsum("j...,jl...->l...", up, G)
    if spec.kind == "advection":
        return _finish(u, adv, dealias)

    b = spec.b
    sq = _to_fourier(g, np.sum(up**2, axis=0)[None])
    grad_sq = _to_physical(g, gradient(FourierField(g, sq)).coeffs)
    div = np.trace(G)
    values = b * adv + 0.5 * (1.0 - b) * grad_sq + 0.5 * div * up
    return _finish(u, values, dealias)


def eval_B(spec: NonlinearitySpec, w: FourierField, u: FourierField, dealias: bool = True) -> FourierField:
    """B(w, u) = M(u, grad w) + M(w, grad u); symmetric, B(u, u) = 2 D u."""
    _check_vector(w)
    _check_vector(u)
    w._check(u)
    if spec.kind == "zero":
        return zeros(u.grid, u.grid.n)
    tensor = spec.tensor_for(u.grid.n)
    return apply_tensor(tensor, u, w, dealias) + apply_tensor(tensor, w, u, dealias)


def trilinear_pairing(spec: NonlinearitySpec, u: FourierField, dealias: bool = True) -> float:
    """(D u, u) in L2(Q)."""
    return inner_product(eval_D(spec, u, dealias), u)


def polarization_residual(spec: NonlinearitySpec, u1: FourierField, u2: FourierField, dealias: bool = True) -> float:
    """L2 norm of D(u1) - D(u2) - B(u1, u1 - u2) + B(u1 - u2, u1 - u2) / 2."""
    d = u1 - u2
    r = (
        eval_D(spec, u1, dealias)
        - eval_D(spec, u2, dealias)
        - eval_B(spec, u1, d, dealias)
        + 0.5 * eval_B(spec, d, d, dealias)
    )
    return l2_norm(r)
