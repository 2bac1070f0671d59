"""The operator B, the conserved energy and the integrated-equation check.

``B`` is the inverse square root of ``-Lap g*``, with symbol
``|xi|^-1 ghat^-1/2``.  Pairing the equation with ``B^2 u_t`` gives the
functional

    E_d = |B u_t|^2 + |F^-1[eta |xi|^-1 ghat^-1/2 u_hat]|^2 + 2 int G(u) dx

with ``G' = f``, which is constant along solutions.  The middle term splits
into a dispersive part ``a |F^-1[ghat^-1/2 u_hat]|^2`` and a nonlocal part
``|F^-1[bhat^1/2 |xi|^-1 ghat^-1/2 u_hat]|^2``.  A second functional with
the summands ``a |g*u|^2`` and ``|B(b*u)|^2`` is evaluated alongside for
comparison; it is not conserved in general.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import spectral
from .errors import BadParameter, MeanNotZero, QuadratureFailure, ZeroKernelMode
from .kernels import KernelSpec
from .linear import MultipointSpec, Trajectory
from .nonlinear import NonlinearitySpec
from .spectral import Field, Grid

log = logging.getLogger(__name__)

POLICIES = ("strict", "projected")
MEAN_TOL = 1e-8


# -- the operator B ----------------------------------------------------------------

def _zero_mode(grid: Grid):
    return (0,) * grid.n


def b_symbol(kernel: KernelSpec, grid: Grid, inverse: bool = False):
    """Symbol of B (or of B^-1) on the lattice, with the zero mode set to 0."""
    k2 = grid.k2
    g = np.asarray(kernel.ghat(k2), dtype=float)
    g = np.broadcast_to(g, grid.shape)
    nonzero = k2 > 0
    if np.any(g[nonzero] <= 0):
        i = np.unravel_index(np.argmin(np.where(nonzero, g, np.inf)), g.shape)
        raise ZeroKernelMode(f"ghat = {g[i]:.3e} at xi = {grid.xi_at(i)}; B is undefined there")
    sym = np.zeros(grid.shape)
    if inverse:
        sym[nonzero] = np.sqrt(k2[nonzero] * g[nonzero])
    else:
        sym[nonzero] = 1.0 / np.sqrt(k2[nonzero] * g[nonzero])
    if not np.all(np.isfinite(sym)):
        raise ZeroKernelMode("B symbol overflows on the lattice (ghat underflows)")
    return sym


def _mean_check(coeffs, grid: Grid, policy: str, what: str = "field"):
    """Return the size of the zero mode; raise under the strict policy."""
    if policy not in POLICIES:
        raise BadParameter(f"zero-mode policy must be one of {POLICIES}, got {policy!r}")
    c0 = abs(coeffs[(...,) + _zero_mode(grid)])
    # contribution of the mean to the L2 norm
    mean_l2 = float(np.max(c0)) / np.sqrt(grid.volume)
    if policy == "strict" and mean_l2 > MEAN_TOL:
        raise MeanNotZero(f"{what} has mean component {mean_l2:.3e} (L2) above {MEAN_TOL:g}; "
                          "use the projected zero-mode policy to drop it")
    if mean_l2 > 0:
        log.debug("dropping zero mode of %s (L2 size %.3e)", what, mean_l2)
    return mean_l2


def apply_B(u: Field, kernel: KernelSpec, policy: str = "strict") -> Field:
    _mean_check(u.coeffs, u.grid, policy)
    return spectral.apply_multiplier(u, b_symbol(kernel, u.grid))


def apply_B_inverse(u: Field, kernel: KernelSpec, policy: str = "strict") -> Field:
    _mean_check(u.coeffs, u.grid, policy)
    return spectral.apply_multiplier(u, b_symbol(kernel, u.grid, inverse=True))


# -- the potential term ---------------------------------------------------------------

def _gl_primitive(f, v, order):
    # G(v) = v int_0^1 f(s v) ds
    s, w = np.polynomial.legendre.leggauss(order)
    s = 0.5 * (s + 1.0)
    w = 0.5 * w
    v = np.asarray(v, dtype=float)
    acc = np.zeros_like(v)
    for si, wi in zip(s, w):
        acc = acc + wi * f(si * v)
    return v * acc


def primitive_values(f: NonlinearitySpec, v, rtol: float = 1e-12, max_order: int = 256):
    """G(v) = int_0^v f(s) ds at every entry of ``v``.

    Uses the closed form when the nonlinearity carries one, otherwise
    Gauss-Legendre with doubling order until two orders agree.
    """
    v = np.asarray(v, dtype=float)
    if f.primitive is not None:
        return np.asarray(f.primitive(v), dtype=float)
    order = 16
    prev = _gl_primitive(f.f, v, order)
    while order < max_order:
        order *= 2
        cur = _gl_primitive(f.f, v, order)
        scale = max(1.0, float(np.max(np.abs(cur), initial=0.0)))
        if not np.all(np.isfinite(cur)):
            break
        if np.max(np.abs(cur - prev), initial=0.0) <= rtol * scale:
            return cur
        prev = cur
    raise QuadratureFailure(f"primitive of {f.name!r} did not settle by order {max_order}")


def potential_primitive(f: NonlinearitySpec, u_samples, grid: Grid) -> float:
    """int G(u(x)) dx by the cell rule (spectrally accurate for periodic data)."""
    vals = primitive_values(f, np.real(u_samples))
    return float(grid.cell * np.sum(vals))


def potential_lower_bound(f: NonlinearitySpec, r_max: float, samples: int = 2001) -> float:
    """Smallest k with G(r) >= -k r^2 on [-r_max, r_max] (0 when G >= 0)."""
    r = np.linspace(-r_max, r_max, samples)
    r = r[r != 0]
    G = primitive_values(f, r)
    return float(max(0.0, np.max(-G / r ** 2)))


# -- energy ------------------------------------------------------------------------------

@dataclass
class EnergyRecord:
    t: float
    kinetic: float          # |B u_t|^2
    dispersive: float       # a |ghat^-1/2 u|^2
    nonlocal_: float        # |bhat^1/2 |xi|^-1 ghat^-1/2 u|^2
    potential: float        # 2 int G(u)
    paper_dispersive: float  # a |g*u|^2
    paper_nonlocal: float   # |B(b*u)|^2
    policy: str = "strict"
    dropped_mean: float = 0.0

    @property
    def E_derived(self):
        return self.kinetic + self.dispersive + self.nonlocal_ + self.potential

    @property
    def E_paper(self):
        return self.kinetic + self.paper_dispersive + self.paper_nonlocal + self.potential

    def value(self, variant: str):
        if variant == "derived":
            return self.E_derived
        if variant == "paper":
            return self.E_paper
        raise BadParameter(f"energy variant must be 'paper' or 'derived', got {variant!r}")


def _sq_norm(coeffs, grid: Grid):
    return np.sum(np.abs(coeffs) ** 2, axis=grid.axes) / grid.volume


def _energy_terms(u_hat, ut_hat, u_values, kernel: KernelSpec, f: NonlinearitySpec, grid: Grid, policy: str):
    """Batched energy summands; leading axes of the inputs are time."""
    dropped = max(_mean_check(u_hat, grid, policy, "u"), _mean_check(ut_hat, grid, policy, "u_t"))
    k2 = grid.k2
    B = b_symbol(kernel, grid)
    nonzero = k2 > 0
    g = np.broadcast_to(np.asarray(kernel.ghat(k2), dtype=float), grid.shape)
    b = np.broadcast_to(np.asarray(kernel.bhat(k2), dtype=float), grid.shape)
    ginv = np.zeros(grid.shape)
    ginv[nonzero] = 1.0 / np.sqrt(g[nonzero])
    kinetic = _sq_norm(B * ut_hat, grid)
    dispersive = kernel.a * _sq_norm(ginv * u_hat, grid)
    nonlocal_ = _sq_norm(np.sqrt(np.maximum(b, 0.0)) * B * u_hat, grid)
    mask = nonzero.astype(float)
    paper_disp = kernel.a * _sq_norm(mask * g * u_hat, grid)
    paper_nonlocal = _sq_norm(B * b * u_hat, grid)
    if f.is_zero:
        pot = np.zeros(np.shape(kinetic))
    else:
        G = primitive_values(f, np.real(u_values))
        pot = 2.0 * grid.cell * np.sum(G, axis=grid.axes)
    return kinetic, dispersive, nonlocal_, pot, paper_disp, paper_nonlocal, dropped


def energy(u: Field, ut: Field, kernel: KernelSpec, f: NonlinearitySpec, variant: str = "derived",
           policy: str = "strict", t: float = 0.0) -> EnergyRecord:
    """Energy summands of one snapshot.

    Both variants are always computed; ``variant`` only validates the
    request so callers can select ``record.value(variant)``.
    """
    if variant not in ("paper", "derived"):
        raise BadParameter(f"energy variant must be 'paper' or 'derived', got {variant!r}")
    terms = _energy_terms(u.coeffs, ut.coeffs, u.values, kernel, f, u.grid, policy)
    *vals, dropped = terms
    return EnergyRecord(float(t), *(float(v) for v in vals), policy=policy, dropped_mean=dropped)


@dataclass
class DriftReport:
    times: np.ndarray
    E_paper: np.ndarray
    E_derived: np.ndarray
    kinetic: np.ndarray
    dispersive: np.ndarray
    nonlocal_: np.ndarray
    potential: np.ndarray
    drift_rel: np.ndarray       # derived variant
    paper_drift_rel: np.ndarray
    tol_E: float
    policy: str = "strict"
    dropped_mean: float = 0.0

    @property
    def max_drift(self):
        return float(np.max(self.drift_rel))

    @property
    def max_paper_drift(self):
        return float(np.max(self.paper_drift_rel))

    @property
    def flagged(self):
        return self.max_drift > self.tol_E

    def rows(self):
        cols = (self.times, self.E_paper, self.E_derived, self.kinetic, self.dispersive,
                self.nonlocal_, self.potential, self.drift_rel)
        return list(zip(*(c.tolist() for c in cols)))


CSV_HEADER = ("t", "E_paper", "E_derived", "kinetic", "dispersive", "nonlocal", "potential", "drift_rel")


def _relative(E):
    ref = abs(E[0])
    scale = ref if ref > 0 else max(float(np.max(np.abs(E))), np.finfo(float).tiny)
    return np.abs(E - E[0]) / scale


def energy_drift_monitor(traj: Trajectory, kernel: KernelSpec, f: NonlinearitySpec,
                         tol_E: float = 1e-5, policy: str = "strict") -> DriftReport:
    """Both energy variants at every sample of ``traj`` with relative drift from t=0."""
    kin, disp, nl, pot, pdisp, pnl, dropped = _energy_terms(
        traj.u_hat, traj.ut_hat, traj.u, kernel, f, traj.grid, policy)
    Ed = kin + disp + nl + pot
    Ep = kin + pdisp + pnl + pot
    rep = DriftReport(traj.times.copy(), Ep, Ed, kin, disp, nl, pot, _relative(Ed), _relative(Ep),
                      tol_E, policy, dropped)
    if rep.flagged:
        log.warning("energy drift %.3e exceeds tol_E %.1e", rep.max_drift, tol_E)
    return rep


def write_energy_csv(path, report: DriftReport):
    lines = [",".join(CSV_HEADER)]
    lines += [",".join(repr(float(v)) for v in row) for row in report.rows()]
    Path(path).write_text("\n".join(lines) + "\n")


# -- integrated equation ---------------------------------------------------------------------

@dataclass
class RegularityReport:
    times: np.ndarray
    residual: np.ndarray        # relative L2 residual of the integrated identity
    tol: float
    passed: bool
    bu_t_norm: np.ndarray       # |B u_t| per sample
    bu_t_finite: bool
    data_residual: float        # velocity multipoint condition at t = 0
    notes: list = field(default_factory=list)

    @property
    def max_residual(self):
        return float(np.max(self.residual))


def _cumtrapz(y, dt):
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * dt * (y[1:] + y[:-1]), axis=0)
    return out


def check_lemma42_regularity(traj: Trajectory, kernel: KernelSpec, mp: MultipointSpec,
                             f: NonlinearitySpec, psi: Field | None = None,
                             factor: float = 10.0) -> RegularityReport:
    """Check the once-integrated equation along a trajectory,

        u_t(t) = psi + sum beta_k u_t(lambda_k) + int_0^t (-b*u + a Lap u + Lap g*f(u)) dtau,

    with the time integral done by the trapezoid rule.  The tolerance is
    ``factor * dt^2 * scale`` where ``scale`` bounds the trapezoid error
    constant, ``t * max |d^2/dt^2 integrand| / 12``, relative to ``max |u_t|``.
    """
    g = traj.grid
    dt = traj.dt
    notes = []
    if kernel.a != 0:
        notes.append("a != 0: the elastic term is included in the integrand")
    k2 = g.k2
    integrand = -kernel.eta2(k2) * traj.u_hat
    if not f.is_zero:
        integrand = integrand - k2 * kernel.ghat(k2) * spectral.forward(f.f(traj.u), g)
    idx = traj.meta.get("lambda_index") or [traj.index(lam) for lam in mp.lam]
    start = traj.ut_hat[0]
    data_res = 0.0
    if psi is not None:
        expect = psi.coeffs + sum(b * traj.ut_hat[j] for b, j in zip(mp.beta, idx))
        data_res = float(np.sqrt(_sq_norm(start - expect, g)))
        start = expect
    res = traj.ut_hat - start - _cumtrapz(integrand, dt)
    norms = np.sqrt(_sq_norm(res, g))
    ref = max(float(np.max(np.sqrt(_sq_norm(traj.ut_hat, g)))), np.finfo(float).tiny)
    if len(traj.times) >= 3:
        d2 = (integrand[2:] - 2 * integrand[1:-1] + integrand[:-2]) / dt ** 2
        d2max = float(np.max(np.sqrt(_sq_norm(d2, g))))
    else:
        d2max = 0.0
    scale = traj.T * d2max / 12.0 / ref
    rel = norms / ref
    tol = max(factor * dt ** 2 * scale, 1e-12)
    B = b_symbol(kernel, g)
    bu = np.sqrt(_sq_norm(B * traj.ut_hat, g))
    mean = float(np.max(np.abs(traj.ut_hat[(...,) + _zero_mode(g)]))) / np.sqrt(g.volume)
    if mean > MEAN_TOL:
        notes.append(f"u_t has a mean component ({mean:.3e}); |B u_t| omits the zero mode")
    return RegularityReport(traj.times.copy(), rel, tol, bool(np.max(rel) <= tol), bu,
                            bool(np.all(np.isfinite(bu))), data_res, notes)
