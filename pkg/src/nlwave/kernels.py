"""Kernel triples (a, b, g) in Fourier space and their admissibility checks.

Kernels are radial and described only through their symbols, so every
symbol here is a function of the squared frequency magnitude ``k2 = |xi|^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BadParameter, NegativeSymbol

Symbol = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class KernelSpec:
    """Elastic coefficient ``a`` plus the symbols ``bhat`` and ``ghat``.

    ``r`` is the decay exponent claimed for ``ghat``:
    ``0 <= ghat <= C (1 + |xi|^2)^(-r/2)``.
    """

    a: float
    bhat: Symbol
    ghat: Symbol
    r: float = 2.0
    label: str = field(default="custom", compare=False)

    def __post_init__(self):
        if not np.isfinite(self.a) or self.a < 0:
            raise BadParameter(f"elastic coefficient a must be >= 0, got {self.a}")

    def eta2(self, k2):
        """Squared dispersion symbol a|xi|^2 + bhat."""
        k2 = np.asarray(k2, dtype=float)
        return self.a * k2 + np.asarray(self.bhat(k2), dtype=float)

    def eta_k2(self, k2):
        e2 = self.eta2(k2)
        if np.any(e2 < 0):
            raise NegativeSymbol(
                f"a|xi|^2 + bhat is negative (min {np.min(e2):.3e}); kernel inadmissible"
            )
        return np.sqrt(e2)


def _k2_of(xi):
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 0:
        return xi * xi
    return np.sum(xi * xi, axis=-1)


def eta(kernel: KernelSpec, xi):
    """Dispersion symbol sqrt(a|xi|^2 + bhat(xi)).

    ``xi`` is a frequency vector (components along the last axis); a bare
    scalar is read as a one-dimensional frequency.
    """
    return kernel.eta_k2(_k2_of(xi))


# -- built-in symbols ---------------------------------------------------------

def bessel(r: float) -> Symbol:
    if not r > 0:
        raise BadParameter(f"bessel kernel needs r > 0, got {r}")
    return lambda k2: (1.0 + np.asarray(k2, dtype=float)) ** (-0.5 * r)


def gaussian(sigma: float) -> Symbol:
    if not sigma > 0:
        raise BadParameter(f"gaussian kernel needs sigma > 0, got {sigma}")
    return lambda k2: np.exp(-sigma * np.asarray(k2, dtype=float))


def constant(c: float) -> Symbol:
    if not c > 0:
        raise BadParameter(f"constant kernel needs c > 0, got {c}")
    return lambda k2: np.full(np.shape(k2), float(c))


def zero() -> Symbol:
    return lambda k2: np.zeros(np.shape(k2))


_BUILTINS = {"bessel": bessel, "gaussian": gaussian, "constant": constant}


def builtin_kernel(name: str, param: float | None = None) -> Symbol:
    """Look up a named symbol: ``bessel(r)``, ``gaussian(sigma)``, ``constant(c)``.

    ``zero`` takes no parameter and gives the vanishing symbol.
    """
    if name == "zero":
        return zero()
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise BadParameter(f"unknown kernel {name!r}; known: {sorted(_BUILTINS) + ['zero']}")
    if param is None:
        raise BadParameter(f"kernel {name!r} needs a parameter")
    return factory(float(param))


# -- admissibility reports ------------------------------------------------------

@dataclass
class DecayReport:
    passed: bool
    worst_ratio: float
    worst_xi: np.ndarray
    negative: bool = False


def check_decay_class(kernel: KernelSpec, grid, r: float | None = None, C: float = 1.0) -> DecayReport:
    """Check 0 <= ghat(xi) <= C (1+|xi|^2)^(-r/2) on every lattice frequency."""
    r = kernel.r if r is None else r
    k2 = grid.k2
    g = np.asarray(kernel.ghat(k2), dtype=float)
    ratio = g * (1.0 + k2) ** (0.5 * r)
    idx = np.unravel_index(np.argmax(ratio), ratio.shape)
    worst = float(ratio[idx])
    negative = bool(np.any(g < 0))
    return DecayReport(
        passed=(not negative) and worst <= C * (1 + 1e-12),
        worst_ratio=worst,
        worst_xi=grid.xi_at(idx),
        negative=negative,
    )


@dataclass
class AdmissibilityReport:
    passed: bool
    min_bhat: float
    min_a_plus_bhat: float
    min_ghat: float
    strict: bool
    problems: list


def check_admissible(kernel: KernelSpec, grid, strict: bool = False) -> AdmissibilityReport:
    """Sign conditions on the lattice: bhat >= 0, a + bhat > 0, ghat >= 0.

    With ``strict`` the positive-ghat class is required (ghat > 0).
    """
    k2 = grid.k2
    b = np.asarray(kernel.bhat(k2), dtype=float)
    g = np.asarray(kernel.ghat(k2), dtype=float)
    problems = []
    if np.min(b) < 0:
        problems.append(f"bhat negative (min {np.min(b):.3e})")
    if np.min(kernel.a + b) <= 0:
        problems.append("a + bhat not positive")
    if np.min(g) < 0:
        problems.append(f"ghat negative (min {np.min(g):.3e})")
    if strict and np.min(g) <= 0:
        problems.append("ghat vanishes at a lattice mode (strict class requires ghat > 0)")
    return AdmissibilityReport(
        passed=not problems,
        min_bhat=float(np.min(b)),
        min_a_plus_bhat=float(np.min(kernel.a + b)),
        min_ghat=float(np.min(g)),
        strict=strict,
        problems=problems,
    )


def from_config(block: dict) -> KernelSpec:
    """Build a kernel from the ``kernel`` config block."""
    b_name = block.get("b", "gaussian")
    g_name = block.get("g", "bessel")
    b_param = block.get(f"b_{_PARAM_NAME.get(b_name, '')}")
    g_param = block.get(f"g_{_PARAM_NAME.get(g_name, '')}")
    r = float(block.get("g_r", 2.0)) if g_name == "bessel" else float(block.get("r", 2.0))
    return KernelSpec(
        a=float(block.get("a", 0.0)),
        bhat=builtin_kernel(b_name, b_param),
        ghat=builtin_kernel(g_name, g_param),
        r=r,
        label=f"b={b_name},g={g_name}",
    )


_PARAM_NAME = {"bessel": "r", "gaussian": "sigma", "constant": "c"}
