"""Periodic truncation of R^n, Fourier transforms, multipliers and norms.

The box is ``[-L/2, L/2)^n`` sampled at ``N`` points per axis.  The forward
transform carries the cell volume ``h^n`` and the phase of the box origin,
so discrete coefficients approximate the continuum transform
``int u(x) exp(-i xi.x) dx`` and symbols can be applied without rescaling.
Every routine that works on arrays treats the trailing ``n`` axes as space
and any leading axes (time samples) as a batch.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import (BadExponent, BadParameter, DataNotLocalized,
                     NonFiniteMultiplier, ShapeMismatch)


@dataclass(frozen=True)
class Grid:
    n: int
    N: int
    L: float

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise BadParameter(f"dimension must be 1, 2 or 3, got {self.n}")
        if self.N < 4 or self.N % 2 or (self.N & (self.N - 1)):
            raise BadParameter(f"N must be a power of two >= 4, got {self.N}")
        if not self.L > 0:
            raise BadParameter(f"L must be positive, got {self.L}")

    @property
    def shape(self):
        return (self.N,) * self.n

    @property
    def axes(self):
        return tuple(range(-self.n, 0))

    @property
    def h(self):
        return self.L / self.N

    @property
    def cell(self):
        return self.h ** self.n

    @property
    def volume(self):
        return self.L ** self.n

    @cached_property
    def x1(self):
        return -0.5 * self.L + self.h * np.arange(self.N)

    @cached_property
    def x(self):
        """Physical coordinates, shape ``(n, N, ..., N)``."""
        return np.array(np.meshgrid(*([self.x1] * self.n), indexing="ij"))

    @cached_property
    def freqs1(self):
        return 2 * np.pi * np.fft.fftfreq(self.N, d=self.h)

    @cached_property
    def xi(self):
        """Lattice frequencies in FFT order, shape ``(n, N, ..., N)``."""
        return np.array(np.meshgrid(*([self.freqs1] * self.n), indexing="ij"))

    @cached_property
    def k2(self):
        return np.sum(self.xi ** 2, axis=0)

    @cached_property
    def _phase(self):
        # exp(-i xi x0) with x0 = -L/2 reduces to (-1)^(sum of indices)
        j = np.indices(self.shape).sum(axis=0)
        return np.where(j % 2 == 0, 1.0, -1.0)

    def xi_at(self, idx):
        return np.array([self.xi[(d,) + tuple(idx)] for d in range(self.n)])

    def zeros(self):
        return np.zeros(self.shape)


def forward(values, grid: Grid):
    values = np.asarray(values)
    if values.shape[values.ndim - grid.n:] != grid.shape:
        raise ShapeMismatch(f"array shape {values.shape} does not end with grid shape {grid.shape}")
    return grid.cell * grid._phase * np.fft.fftn(values, axes=grid.axes)


def backward(coeffs, grid: Grid, real: bool = False):
    coeffs = np.asarray(coeffs)
    if coeffs.shape[coeffs.ndim - grid.n:] != grid.shape:
        raise ShapeMismatch(f"array shape {coeffs.shape} does not end with grid shape {grid.shape}")
    out = np.fft.ifftn(coeffs * grid._phase, axes=grid.axes) / grid.cell
    return out.real if real else out


class Field:
    """A scalar field held in physical and/or spectral form.

    Whichever representation is missing is computed on first access and
    cached; fields are treated as immutable values.
    """

    def __init__(self, grid: Grid, values=None, coeffs=None, real: bool | None = None):
        if values is None and coeffs is None:
            raise BadParameter("Field needs values or coeffs")
        self.grid = grid
        self._values = None if values is None else np.asarray(values)
        self._coeffs = None if coeffs is None else np.asarray(coeffs, dtype=complex)
        for arr in (self._values, self._coeffs):
            if arr is not None and arr.shape != grid.shape:
                raise ShapeMismatch(f"field shape {arr.shape} != grid shape {grid.shape}")
        if real is None:
            real = self._values is not None and not np.iscomplexobj(self._values)
        self.real = real
        if self._values is not None and real:
            self._values = np.real(self._values).astype(float)

    @property
    def values(self):
        if self._values is None:
            self._values = backward(self._coeffs, self.grid, real=self.real)
        return self._values

    @property
    def coeffs(self):
        if self._coeffs is None:
            self._coeffs = forward(self._values, self.grid)
        return self._coeffs

    @classmethod
    def from_function(cls, grid: Grid, fn):
        return cls(grid, values=fn(*grid.x))

    def __add__(self, other):
        return Field(self.grid, values=self.values + other.values, real=self.real and other.real)

    def __sub__(self, other):
        return Field(self.grid, values=self.values - other.values, real=self.real and other.real)

    def __mul__(self, c):
        return Field(self.grid, values=self.values * c, real=self.real and np.isrealobj(c))

    __rmul__ = __mul__


def transform(field: Field):
    return field.coeffs


def inverse_transform(coeffs, grid: Grid, real: bool = False) -> Field:
    return Field(grid, coeffs=coeffs, real=real)


def _symbol_array(m, grid: Grid):
    arr = m(grid.xi) if callable(m) else m
    arr = np.broadcast_to(np.asarray(arr), grid.shape)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteMultiplier("multiplier is not finite on the lattice")
    return arr


def apply_multiplier(field: Field, m) -> Field:
    """``F^-1[m(xi) F u]``.

    ``m`` is either an array on the lattice or a callable receiving the
    frequency array of shape ``(n, N, ..., N)``.
    """
    sym = _symbol_array(m, field.grid)
    real = field.real and np.isrealobj(sym)
    return Field(field.grid, coeffs=sym * field.coeffs, real=real)


def _lp(values, grid: Grid, p: float):
    if p < 1:
        raise BadExponent(f"p must be >= 1, got {p}")
    a = np.abs(values)
    if np.isinf(p):
        return np.max(a, axis=grid.axes)
    if p == 2:
        return np.sqrt(grid.cell * np.sum(a * a, axis=grid.axes))
    return (grid.cell * np.sum(a ** p, axis=grid.axes)) ** (1.0 / p)


def norm_lp(field: Field, p: float) -> float:
    return float(_lp(field.values, field.grid, p))


def bessel_potential(grid: Grid, s: float):
    return (1.0 + grid.k2) ** (0.5 * s)


def norm_hsp(field: Field, s: float, p: float = 2.0) -> float:
    """``||(I - Delta)^(s/2) u||_p``."""
    return norm_lp(apply_multiplier(field, bessel_potential(field.grid, s)), p)


def lp_norms(values, grid: Grid, p: float):
    """Batched L^p norms over the trailing spatial axes."""
    return _lp(values, grid, p)


def hsp_norms(coeffs, grid: Grid, s: float, p: float = 2.0):
    """Batched H^{s,p} norms from spectral coefficients."""
    weighted = coeffs * bessel_potential(grid, s)
    if p == 2:
        # Parseval: ||u||_2^2 = L^-n sum |u_hat|^2
        return np.sqrt(np.sum(np.abs(weighted) ** 2, axis=grid.axes) / grid.volume)
    return _lp(backward(weighted, grid), grid, p)


@dataclass(frozen=True)
class NormRecord:
    hsp: float
    linf: float
    l1: float
    l2: float

    @property
    def y1(self):
        """Norm of H^{s,p} intersected with L^1."""
        return self.hsp + self.l1

    @property
    def yinf(self):
        """Norm of H^{s,p} intersected with L^infinity."""
        return self.hsp + self.linf


def norm_record(field: Field, s: float = 2.0, p: float = 2.0) -> NormRecord:
    return NormRecord(
        hsp=norm_hsp(field, s, p),
        linf=norm_lp(field, np.inf),
        l1=norm_lp(field, 1),
        l2=norm_lp(field, 2),
    )


def norm_Y(pair, s: float = 2.0, p: float = 2.0):
    """Norm records for a ``(u, u_t)`` slice."""
    u, ut = pair
    return norm_record(u, s, p), norm_record(ut, s, p)


def parseval_l2(field: Field) -> float:
    return float(np.sqrt(np.sum(np.abs(field.coeffs) ** 2) / field.grid.volume))


# -- localisation of data --------------------------------------------------------

def boundary_max(field: Field, frac: float = 0.1) -> float:
    """Largest |u| within ``frac * L`` of the box boundary."""
    g = field.grid
    near = np.zeros(g.shape, dtype=bool)
    for d in range(g.n):
        near |= np.abs(g.x[d]) >= (0.5 - frac) * g.L
    return float(np.max(np.abs(field.values[near]))) if near.any() else 0.0


def check_localized(field: Field, tol: float = 1e-10, frac: float = 0.1, action: str = "warn") -> float:
    """Check that the data is negligible near the boundary of the box.

    ``action`` is ``"warn"``, ``"raise"`` or ``"off"``.
    """
    if action == "off":
        return 0.0
    worst = boundary_max(field, frac)
    if worst >= tol:
        msg = f"data not localized: |u| = {worst:.3e} within {frac:.0%} of the boundary"
        if action == "raise":
            raise DataNotLocalized(msg)
        warnings.warn(msg, stacklevel=2)
    return worst


# -- file formats -------------------------------------------------------------------

def write_field_dump(path, field: Field, time: float = 0.0):
    """Header line of JSON metadata, then little-endian float64, row-major.

    Complex fields store interleaved (re, im) pairs and set ``"complex"``.
    """
    g = field.grid
    vals = field.values
    is_complex = np.iscomplexobj(vals)
    header = {"n": g.n, "N": g.N, "L": g.L, "time": float(time)}
    if is_complex:
        header["complex"] = True
        payload = np.stack([vals.real, vals.imag], axis=-1)
    else:
        payload = vals
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        fh.write(np.ascontiguousarray(payload, dtype="<f8").tobytes(order="C"))


def read_field_dump(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        raw = np.frombuffer(fh.read(), dtype="<f8")
    grid = Grid(int(header["n"]), int(header["N"]), float(header["L"]))
    if header.get("complex"):
        raw = raw.reshape(grid.shape + (2,))
        vals = raw[..., 0] + 1j * raw[..., 1]
    else:
        vals = raw.reshape(grid.shape).copy()
    return Field(grid, values=vals), float(header["time"])


def write_slice_csv(path, field: Field):
    """Two-column CSV (x, u) of a one-dimensional field."""
    if field.grid.n != 1:
        raise ShapeMismatch("CSV slices are only defined for one-dimensional fields")
    lines = ["x,u"]
    vals = field.values
    for xv, uv in zip(field.grid.x1, vals):
        lines.append(f"{float(xv)!r},{float(np.real(uv))!r}")
    Path(path).write_text("\n".join(lines) + "\n")
