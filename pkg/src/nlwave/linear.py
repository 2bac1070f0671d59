"""Closed-form solution of the linear multipoint problem, mode by mode.

Each Fourier mode obeys ``u'' + eta^2 u = F(t)`` with the coupled data

    u(0)  = phi + sum_k alpha_k u(lambda_k)
    u'(0) = psi + sum_k beta_k  u'(lambda_k)

Writing ``u = c1 cos(eta t) + c2 sin(eta t)/eta + w(t)`` with ``w`` the
Duhamel response from rest, the data conditions become the 2x2 system

    [ 1 - sum a_k C_k        -sum a_k S_k     ] [c1]   [phi + sum a_k w(l_k)  ]
    [ eta^2 sum b_k S_k       1 - sum b_k C_k ] [c2] = [psi + sum b_k w'(l_k) ]

with ``C_k = cos(eta l_k)``, ``S_k = sin(eta l_k)/eta``.  Its determinant is
exactly ``D0``.  This basis stays regular at ``eta = 0``; the classical pair
(g1, g2) multiplying (cos, sin) is recovered by ``g2 = c2 / eta``, whose
determinant is ``D = eta * D0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate

from . import spectral
from .errors import BadParameter, QuadratureFailure, SingularMode
from .kernels import KernelSpec
from .spectral import Field, Grid

# -- multipoint data --------------------------------------------------------------


@dataclass(frozen=True)
class MultipointSpec:
    alpha: tuple = ()
    beta: tuple = ()
    lam: tuple = ()

    def __post_init__(self):
        alpha = tuple(complex(a) if np.iscomplexobj(a) else float(a) for a in self.alpha)
        beta = tuple(complex(b) if np.iscomplexobj(b) else float(b) for b in self.beta)
        lam = tuple(float(v) for v in self.lam)
        if not len(alpha) == len(beta) == len(lam):
            raise BadParameter(
                f"alpha, beta, lambda must have equal length (got {len(alpha)}, {len(beta)}, {len(lam)})"
            )
        if any(not (v > 0 and np.isfinite(v)) for v in lam):
            raise BadParameter(f"multipoint times must be positive, got {lam}")
        if len(set(lam)) != len(lam):
            raise BadParameter(f"multipoint times must be distinct, got {lam}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "lam", lam)

    @classmethod
    def classical(cls):
        return cls((), (), ())

    @property
    def m(self):
        return len(self.lam)

    @property
    def is_real(self):
        return all(np.isrealobj(v) or np.imag(v) == 0 for v in self.alpha + self.beta)

    @property
    def lam_max(self):
        return max(self.lam, default=0.0)

    def _coef(self, values, ndim):
        dtype = complex if any(isinstance(v, complex) for v in values) else float
        return np.asarray(values, dtype=dtype).reshape((-1,) + (1,) * ndim)


@dataclass(frozen=True)
class QuadratureSpec:
    """Time quadrature for Duhamel-type integrals of a callable forcing.

    ``simpson`` uses a composite rule with step close to ``dt``;
    ``adaptive`` defers to scipy's adaptive Gauss-Kronrod.
    """

    method: str = "simpson"
    dt: float = 1e-3

    def __post_init__(self):
        if self.method not in ("simpson", "adaptive"):
            raise BadParameter(f"unknown quadrature {self.method!r}")
        if not self.dt > 0:
            raise BadParameter("quadrature step must be positive")


# -- evolution symbols ----------------------------------------------------------------

def cos_symbol(eta, t):
    return np.cos(np.multiply(eta, t))


def sin_symbol(eta, t):
    """sin(eta t)/eta, equal to t in the limit eta -> 0."""
    return t * np.sinc(np.multiply(eta, t) / np.pi)


def _dsin_symbol(eta, t):
    # d/dt of cos(eta t) divided by -eta^2, i.e. -eta^2 * sin_symbol
    return -np.square(eta) * sin_symbol(eta, t)


@dataclass
class ModeSystem:
    """Per-mode quantities of the multipoint system (vectorised over modes)."""

    eta: np.ndarray
    kappa: np.ndarray       # (m, *modes), lambda_k * eta
    d0: np.ndarray
    A1: np.ndarray          # sum alpha_k sin kappa_k
    A2: np.ndarray          # 1 - sum beta_k cos kappa_k
    B1: np.ndarray          # 1 - sum alpha_k cos kappa_k
    B2: np.ndarray          # sum beta_k cos kappa_k
    beta_sin: np.ndarray    # sum beta_k sin kappa_k
    alpha_S: np.ndarray     # sum alpha_k sin(kappa_k)/eta
    beta_S: np.ndarray      # sum beta_k sin(kappa_k)/eta

    @property
    def d(self):
        return self.eta * self.d0

    @property
    def matrix(self):
        """Velocity-basis matrix entries (m11, m12, m21, m22)."""
        return self.B1, -self.alpha_S, np.square(self.eta) * self.beta_S, self.A2

    @property
    def det(self):
        m11, m12, m21, m22 = self.matrix
        return m11 * m22 - m12 * m21

    def solve(self, rhs1, rhs2):
        m11, m12, m21, m22 = self.matrix
        det = self.det
        return (rhs1 * m22 - m12 * rhs2) / det, (m11 * rhs2 - m21 * rhs1) / det


def mode_system(eta, mp: MultipointSpec, lam=None) -> ModeSystem:
    eta = np.asarray(eta, dtype=float)
    lam = np.asarray(mp.lam if lam is None else lam, dtype=float).reshape((-1,) + (1,) * eta.ndim)
    alpha = mp._coef(mp.alpha, eta.ndim)
    beta = mp._coef(mp.beta, eta.ndim)
    kappa = lam * eta
    cos_k, sin_k = np.cos(kappa), np.sin(kappa)
    S_k = sin_symbol(eta, lam)
    return ModeSystem(
        eta=eta,
        kappa=kappa,
        d0=_d0_from(alpha, beta, kappa, eta.shape),
        A1=np.sum(alpha * sin_k, axis=0),
        A2=1 - np.sum(beta * cos_k, axis=0),
        B1=1 - np.sum(alpha * cos_k, axis=0),
        B2=np.sum(beta * cos_k, axis=0),
        beta_sin=np.sum(beta * sin_k, axis=0),
        alpha_S=np.sum(alpha * S_k, axis=0),
        beta_S=np.sum(beta * S_k, axis=0),
    )


def _d0_from(alpha, beta, kappa, shape):
    out = 1 - np.sum((alpha + beta) * np.cos(kappa), axis=0)
    m = kappa.shape[0]
    for i in range(m):
        for j in range(m):
            out = out + alpha[i] * beta[j] * np.cos(kappa[i] - kappa[j])
    return np.broadcast_to(out, shape) if np.ndim(out) < len(shape) else out


def d0(eta, mp: MultipointSpec, lam=None):
    """Solvability determinant 1 - sum (a+b) cos k + sum a_i b_j cos(k_i - k_j)."""
    eta = np.asarray(eta, dtype=float)
    lam = np.asarray(mp.lam if lam is None else lam, dtype=float).reshape((-1,) + (1,) * eta.ndim)
    return _d0_from(mp._coef(mp.alpha, eta.ndim), mp._coef(mp.beta, eta.ndim), lam * eta, eta.shape)


@dataclass
class WellPosedReport:
    passed: bool
    min_abs_d0: float
    argmin_xi: np.ndarray
    offending: list = field(default_factory=list)
    tol: float = 1e-8


def check_wellposed(kernel: KernelSpec, mp: MultipointSpec, grid: Grid, tol: float = 1e-8) -> WellPosedReport:
    """Scan |D0| over the whole lattice and list the modes below ``tol``.

    The zero frequency is included because the solver needs it too.
    """
    eta = kernel.eta_k2(grid.k2)
    ad0 = np.abs(d0(eta, mp))
    idx = np.unravel_index(np.argmin(ad0), ad0.shape)
    bad = np.argwhere(ad0 < tol)
    return WellPosedReport(
        passed=len(bad) == 0,
        min_abs_d0=float(ad0[idx]),
        argmin_xi=grid.xi_at(idx),
        offending=[grid.xi_at(tuple(b)) for b in bad],
        tol=tol,
    )


# -- single-mode operations -------------------------------------------------------------

def _eval_forcing(forcing, tau):
    vals = np.asarray(forcing(tau))
    if vals.shape != np.shape(tau):
        vals = np.array([forcing(t) for t in np.ravel(tau)]).reshape(np.shape(tau))
    return vals


def duhamel(eta: float, forcing, t: float, quad: QuadratureSpec = QuadratureSpec()):
    """Return (int_0^t S(t-s) F(s) ds, int_0^t C(t-s) F(s) ds) for one mode."""
    if forcing is None or t == 0:
        return 0.0, 0.0
    if quad.method == "adaptive":
        out = []
        for kern in (lambda s: sin_symbol(eta, t - s), lambda s: cos_symbol(eta, t - s)):
            val, err = integrate.quad(lambda s: kern(s) * forcing(s), 0.0, t, complex_func=True,
                                      epsabs=1e-14, epsrel=1e-12, limit=500)
            if not np.isfinite(val):
                raise QuadratureFailure("adaptive quadrature returned a non-finite value")
            out.append(val)
        return out[0], out[1]
    n = max(2, 2 * int(np.ceil(t / (2 * quad.dt))))
    tau = np.linspace(0.0, t, n + 1)
    F = _eval_forcing(forcing, tau)
    return (integrate.simpson(sin_symbol(eta, t - tau) * F, x=tau),
            integrate.simpson(cos_symbol(eta, t - tau) * F, x=tau))


class ModeCoefficients(NamedTuple):
    """(g1, g2) multiplying cos(eta t) and sin(eta t)/eta, plus the
    history integrals gamma_k = w(lambda_k) and mu_k = w'(lambda_k)."""

    g1: complex
    g2: complex
    gamma: np.ndarray
    mu: np.ndarray


def mode_coefficients(eta: float, mp: MultipointSpec, phi_hat, psi_hat, forcing=None,
                      quad: QuadratureSpec = QuadratureSpec(), tol_d0: float = 1e-8) -> ModeCoefficients:
    ms = mode_system(eta, mp)
    if abs(ms.d0) < tol_d0:
        raise SingularMode(f"|D0| = {abs(ms.d0):.3e} below {tol_d0:g} at eta = {eta}", abs(ms.d0))
    hist = [duhamel(eta, forcing, lam, quad) for lam in mp.lam]
    gamma = np.array([h[0] for h in hist], dtype=complex)
    mu = np.array([h[1] for h in hist], dtype=complex)
    rhs1 = phi_hat + np.sum(np.asarray(mp.alpha) * gamma) if mp.m else phi_hat
    rhs2 = psi_hat + np.sum(np.asarray(mp.beta) * mu) if mp.m else psi_hat
    g1, g2 = ms.solve(rhs1, rhs2)
    return ModeCoefficients(complex(g1), complex(g2), gamma, mu)


def paper_coefficients(eta: float, mp: MultipointSpec, phi_hat, psi_hat, gamma, mu):
    """Cramer solution in the (cos, sin) basis: g1 = D1/D, g2 = D2/D.

    Returns ``(g1, g2, D, D1, D2)``.  Only defined for ``eta > 0``.
    """
    ms = mode_system(eta, mp)
    r1 = phi_hat + np.sum(np.asarray(mp.alpha) * gamma) if mp.m else phi_hat
    r2 = psi_hat + np.sum(np.asarray(mp.beta) * mu) if mp.m else psi_hat
    a11, a12 = ms.B1, -ms.A1
    a21, a22 = eta * ms.beta_sin, eta * ms.A2
    D = a11 * a22 - a12 * a21
    D1 = r1 * a22 - a12 * r2
    D2 = a11 * r2 - a21 * r1
    return D1 / D, D2 / D, D, D1, D2


def evolve_mode(eta: float, g1, g2, forcing, t, quad: QuadratureSpec = QuadratureSpec()):
    """(u(t), u'(t)) = g1 C + g2 S + Duhamel, with its exact time derivative."""
    w, wt = duhamel(eta, forcing, t, quad)
    u = g1 * cos_symbol(eta, t) + g2 * sin_symbol(eta, t) + w
    ut = g1 * _dsin_symbol(eta, t) + g2 * cos_symbol(eta, t) + wt
    return u, ut


def evolution_symbols(eta, mp: MultipointSpec, t, lam=None):
    """Symbols of the data-to-solution maps: u_hat = S1 phi_hat + S2 psi_hat
    in the unforced problem."""
    ms = mode_system(eta, mp, lam)
    C, S = cos_symbol(eta, t), sin_symbol(eta, t)
    S1 = (ms.A2 * C - np.square(ms.eta) * ms.beta_S * S) / ms.d0
    S2 = (ms.alpha_S * C + ms.B1 * S) / ms.d0
    return S1, S2


# -- trajectories ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    """Time-sampled pair (u, u_t) held as spectral coefficients."""

    grid: Grid
    times: np.ndarray
    u_hat: np.ndarray
    ut_hat: np.ndarray
    real: bool = True
    forcing_hat: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dt(self):
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def T(self):
        return float(self.times[-1])

    @cached_property
    def u(self):
        return spectral.backward(self.u_hat, self.grid, real=self.real)

    @cached_property
    def ut(self):
        return spectral.backward(self.ut_hat, self.grid, real=self.real)

    def field(self, j) -> Field:
        return Field(self.grid, coeffs=self.u_hat[j], real=self.real)

    def field_t(self, j) -> Field:
        return Field(self.grid, coeffs=self.ut_hat[j], real=self.real)

    def index(self, t) -> int:
        return int(round(t / self.dt))

    def norm_table(self, s: float = 2.0, p: float = 2.0) -> dict:
        g = self.grid
        return {
            "t": self.times,
            "u_l2": spectral.lp_norms(self.u, g, 2),
            "u_linf": spectral.lp_norms(self.u, g, np.inf),
            "u_hs": spectral.hsp_norms(self.u_hat, g, s, p),
            "ut_l2": spectral.lp_norms(self.ut, g, 2),
            "ut_linf": spectral.lp_norms(self.ut, g, np.inf),
            "ut_hs": spectral.hsp_norms(self.ut_hat, g, s, p),
        }

    def y_norm(self, p: float = 2.0) -> float:
        return y_norm(self.u_hat, self.grid, p, real=self.real, values=self.u)

    def window(self, j0: int, j1: int | None = None) -> "Trajectory":
        sl = slice(j0, None if j1 is None else j1 + 1)
        return Trajectory(self.grid, self.times[sl], self.u_hat[sl], self.ut_hat[sl], self.real,
                          None if self.forcing_hat is None else self.forcing_hat[sl], dict(self.meta))


def y_norm(u_hat, grid: Grid, p: float = 2.0, real: bool = True, values=None) -> float:
    """max_t ||u||_{H^{2,p}} + max_t ||u||_inf over a time-sampled array."""
    if values is None:
        values = spectral.backward(u_hat, grid, real=real)
    return float(np.max(spectral.hsp_norms(u_hat, grid, 2.0, p))
                 + np.max(spectral.lp_norms(values, grid, np.inf)))


def concatenate(parts) -> Trajectory:
    """Join consecutive windows, dropping each repeated start sample."""
    first = parts[0]
    times, uh, uth, fh = [first.times], [first.u_hat], [first.ut_hat], [first.forcing_hat]
    offset = first.times[-1]
    for p in parts[1:]:
        times.append(p.times[1:] + offset)
        uh.append(p.u_hat[1:])
        uth.append(p.ut_hat[1:])
        fh.append(None if p.forcing_hat is None else p.forcing_hat[1:])
        offset = offset + p.times[-1]
    forcing = None
    if all(f is not None for f in fh):
        forcing = np.concatenate(fh)
    return Trajectory(first.grid, np.concatenate(times), np.concatenate(uh), np.concatenate(uth),
                      all(p.real for p in parts), forcing, dict(first.meta))


# -- the full linear solve --------------------------------------------------------------------

def _step_weights(eta, h):
    """Exact one-step integrals of the sine/cosine kernels against the linear
    interpolant of the forcing: returns weights (a0, a1, b0, b1) so that

        w(t+h)  = C w + S w' + a0 F(t) + a1 F(t+h)
        w'(t+h) = -eta^2 S w + C w' + b0 F(t) + b1 F(t+h)
    """
    x = eta * h
    half_sinc2 = 0.5 * np.sinc(x / (2 * np.pi)) ** 2        # (1 - cos x)/x^2
    small = x < 0.2
    xs = np.where(small, x, 0.0)
    x2 = xs * xs
    series = 1 / 6 - x2 / 120 + x2 ** 2 / 5040 - x2 ** 3 / 362880 + x2 ** 4 / 39916800
    xl = np.where(small, 1.0, x)
    direct = (xl - np.sin(xl)) / xl ** 3
    cubic = np.where(small, series, direct)                  # (x - sin x)/x^3
    IS0 = h * h * half_sinc2
    IS1 = h * h * cubic
    IC0 = h * np.sinc(x / np.pi)
    IC1 = h * half_sinc2
    return IS0 - IS1, IS1, IC0 - IC1, IC1


def particular_solution(eta, F, dt):
    """Response from rest to forcing samples ``F[j]`` at ``t_j = j dt``,
    linear in time between samples.  Returns (w, w') with F's shape."""
    eta = np.asarray(eta, dtype=float)
    C = np.cos(eta * dt)
    S = sin_symbol(eta, dt)
    mS = -np.square(eta) * S
    a0, a1, b0, b1 = _step_weights(eta, dt)
    w = np.zeros_like(F, dtype=complex)
    wt = np.zeros_like(F, dtype=complex)
    for j in range(F.shape[0] - 1):
        w[j + 1] = C * w[j] + S * wt[j] + a0 * F[j] + a1 * F[j + 1]
        wt[j + 1] = mS * w[j] + C * wt[j] + b0 * F[j] + b1 * F[j + 1]
    return w, wt


def _forcing_samples(forcing, grid, times):
    """Normalise forcing to spectral samples of shape (len(times), *grid.shape)."""
    if forcing is None:
        return None, True
    if callable(forcing):
        samples, real = [], True
        for t in times:
            f = forcing(t)
            if not isinstance(f, Field):
                f = Field(grid, values=np.asarray(f))
            real = real and f.real
            samples.append(f.coeffs)
        return np.array(samples), real
    arr = np.asarray(forcing, dtype=complex)
    if arr.shape[1:] != grid.shape or arr.shape[0] < len(times):
        raise BadParameter(
            f"forcing samples must have shape ({len(times)}, {grid.shape}), got {arr.shape}")
    arr = arr[: len(times)]
    vals = spectral.backward(arr, grid)
    real = bool(np.max(np.abs(vals.imag), initial=0.0) <= 1e-12 * max(1.0, np.max(np.abs(vals), initial=0.0)))
    return arr, real


def time_grid(T: float, dt: float, mp: MultipointSpec):
    """Uniform grid covering [0, max(T, lambda_max)] plus snapped multipoint indices."""
    if not dt > 0 or not T > 0:
        raise BadParameter(f"need T > 0 and dt > 0 (got T={T}, dt={dt})")
    M = max(1, int(round(T / dt)))
    idx = [int(round(lam / dt)) for lam in mp.lam]
    if any(j == 0 for j in idx):
        raise BadParameter(f"multipoint time below half a step (dt={dt}): {mp.lam}")
    M_int = max([M] + idx)
    snap = max((abs(lam - j * dt) for lam, j in zip(mp.lam, idx)), default=0.0)
    return M, M_int, idx, snap


def solve_linear(phi: Field, psi: Field, kernel: KernelSpec, mp: MultipointSpec, T: float, dt: float,
                 forcing=None, tol_d0: float = 1e-8, localize: str = "warn",
                 real: bool | None = None) -> Trajectory:
    """Solve u_tt - a Lap u + b*u = F with multipoint data on a uniform time grid.

    ``forcing`` is ``None``, a callable ``t -> Field`` or an array of
    spectral samples at the grid times.  The returned trajectory covers
    ``[0, max(T, lambda_max)]`` since the data conditions reach that far;
    multipoint times are snapped to the nearest grid time and the snapping
    error is recorded in ``meta``.
    """
    grid = phi.grid
    spectral.check_localized(phi, action=localize)
    spectral.check_localized(psi, action=localize)
    M, M_int, idx, snap = time_grid(T, dt, mp)
    times = dt * np.arange(M_int + 1)
    lam_snapped = tuple(j * dt for j in idx)

    eta = kernel.eta_k2(grid.k2)
    ms = mode_system(eta, mp, lam_snapped)
    # the requested times decide well-posedness; the snapped ones what is solved
    ad0 = np.minimum(np.abs(ms.d0), np.abs(d0(eta, mp)))
    if np.min(ad0) < tol_d0:
        i = np.unravel_index(np.argmin(ad0), ad0.shape)
        raise SingularMode(f"|D0| = {ad0[i]:.3e} below {tol_d0:g} at xi = {grid.xi_at(i)}",
                           float(ad0[i]), grid.xi_at(i))

    F, real_forcing = _forcing_samples(forcing, grid, times)
    if F is None:
        w = wt = None
        rhs1, rhs2 = phi.coeffs, psi.coeffs
    else:
        w, wt = particular_solution(eta, F, dt)
        rhs1 = phi.coeffs + sum(a * w[j] for a, j in zip(mp.alpha, idx))
        rhs2 = psi.coeffs + sum(b * wt[j] for b, j in zip(mp.beta, idx))
    c1, c2 = ms.solve(rhs1, rhs2)

    tt = times.reshape((-1,) + (1,) * grid.n)
    C, S = cos_symbol(eta, tt), sin_symbol(eta, tt)
    u_hat = c1 * C + c2 * S
    ut_hat = -np.square(eta) * S * c1 + C * c2
    if w is not None:
        u_hat = u_hat + w
        ut_hat = ut_hat + wt
    if real is None:
        real = phi.real and psi.real and mp.is_real and real_forcing
    return Trajectory(grid, times, u_hat, ut_hat, bool(real), F,
                      meta={"lambda_snap_error": snap, "lambda_index": idx,
                            "min_abs_d0": float(np.min(ad0)), "T_requested": M * dt})


def multipoint_residuals(traj: Trajectory, phi: Field, psi: Field, mp: MultipointSpec):
    """Relative L2 residuals of both multipoint data conditions."""
    idx = traj.meta.get("lambda_index") or [traj.index(lam) for lam in mp.lam]
    out = []
    for arr, data, coef in ((traj.u_hat, phi.coeffs, mp.alpha), (traj.ut_hat, psi.coeffs, mp.beta)):
        res = arr[0] - data - sum(c * arr[j] for c, j in zip(coef, idx))
        scale = (_l2_hat(arr[0], traj.grid) + _l2_hat(data, traj.grid)
                 + sum(abs(c) * _l2_hat(arr[j], traj.grid) for c, j in zip(coef, idx)))
        out.append(_l2_hat(res, traj.grid) / scale if scale > 0 else 0.0)
    return tuple(out)


def _l2_hat(coeffs, grid):
    return float(np.sqrt(np.sum(np.abs(coeffs) ** 2) / grid.volume))


@dataclass
class Theorem2Report:
    lhs_inf: float
    rhs_inf: float
    ratio_inf: float
    lhs_s: float
    rhs_s: float
    ratio_s: float


def _safe_ratio(num, den):
    num, den = np.asarray(num, float), np.asarray(den, float)
    mask = den > 0
    return float(np.max(num[mask] / den[mask])) if mask.any() else 0.0


def theorem2_diagnostics(traj: Trajectory, phi: Field, psi: Field, s: float = 2.0, p: float = 2.0) -> Theorem2Report:
    """Compare the sup-norm and H^{s,p} sizes of (u, u_t) with the data functionals.

    L^inf side:  sup(|u|_inf + |u_t|_inf)  vs  |phi|_{H^{s,p} n L^1} + |psi|_{...}
                 + int_0^t (|F|_{H^{s,p}} + |F|_{L^1});
    H^{s,p} side: sup(|u|_{H^{s,p}} + |u_t|_{H^{s,p}}) vs |phi| + |psi| + int_0^t |F|.
    The ratios are the largest observed LHS(t)/RHS(t), an empirical
    estimate of the constant in either bound.
    """
    g = traj.grid
    tab = traj.norm_table(s, p)
    lhs_inf_t = tab["u_linf"] + tab["ut_linf"]
    lhs_s_t = tab["u_hs"] + tab["ut_hs"]
    rp, rs = spectral.norm_record(phi, s, p), spectral.norm_record(psi, s, p)
    if traj.forcing_hat is None:
        int_inf = int_s = np.zeros_like(traj.times)
    else:
        fh = traj.forcing_hat
        f_hs = spectral.hsp_norms(fh, g, s, p)
        f_l1 = spectral.lp_norms(spectral.backward(fh, g, real=traj.real), g, 1)
        int_s = integrate.cumulative_trapezoid(f_hs, traj.times, initial=0.0)
        int_inf = int_s + integrate.cumulative_trapezoid(f_l1, traj.times, initial=0.0)
    rhs_inf_t = rp.y1 + rs.y1 + int_inf
    rhs_s_t = rp.hsp + rs.hsp + int_s
    return Theorem2Report(
        lhs_inf=float(np.max(lhs_inf_t)), rhs_inf=float(rhs_inf_t[-1]),
        ratio_inf=_safe_ratio(lhs_inf_t, rhs_inf_t),
        lhs_s=float(np.max(lhs_s_t)), rhs_s=float(rhs_s_t[-1]),
        ratio_s=_safe_ratio(lhs_s_t, rhs_s_t),
    )


ForcingFn = Callable[[float], Field]
