"""Picard iteration for u_tt - a Lap u + b*u = Lap[g*f(u)] with multipoint data.

The forcing of one iterate is built from the previous one,
``F = -|xi|^2 ghat(xi) F[f(u)]``, and fed to the linear multipoint solver.
Local windows are sized by the two step bounds on T, optionally shrunk
until the measured contraction ratio drops to 1/2, and chained by
continuation until the horizon is reached or the norms blow up.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import spectral
from .errors import (BadParameter, DataTooLarge, NoConvergence,
                     NonFiniteDerivative, NonlinearOverflow)
from .kernels import KernelSpec
from .linear import (MultipointSpec, Trajectory, concatenate, solve_linear,
                     y_norm)
from .spectral import Field

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NonlinearitySpec:
    f: Callable
    df: Callable
    d2f: Callable
    alpha: float | None = None
    name: str = "custom"
    primitive: Callable | None = None
    is_zero: bool = False

    def check_derivatives(self, interval=(-1.0, 1.0), rtol: float = 1e-4, n: int = 41):
        """Compare df, d2f against central differences of f on ``interval``."""
        x = np.linspace(*interval, n)
        h = 1e-4 * max(1.0, np.max(np.abs(x)))
        fd1 = (self.f(x + h) - self.f(x - h)) / (2 * h)
        fd2 = (self.f(x + h) - 2 * self.f(x) + self.f(x - h)) / h ** 2
        for name, fd, exact in (("f'", fd1, self.df(x)), ("f''", fd2, self.d2f(x))):
            scale = max(1.0, np.max(np.abs(exact)))
            err = np.max(np.abs(fd - exact)) / scale
            if err > rtol:
                raise BadParameter(f"{name} of {self.name!r} inconsistent with f (rel. err {err:.2e})")


def _scaled(c, fn):
    return lambda u: c * fn(u)


def builtin_nonlinearity(name: str, scale: float = 1.0) -> NonlinearitySpec:
    """Named nonlinearities, each with f(0) = 0:

    ``zero``, ``quadratic`` (u^2), ``cubic`` (u^3), ``focusing-cubic`` (-u^3),
    ``sine`` (sin u - u).  ``scale`` multiplies f.
    """
    table = {
        "zero": (lambda u: 0 * u, lambda u: 0 * u, lambda u: 0 * u, None, lambda u: 0 * u),
        "quadratic": (lambda u: u ** 2, lambda u: 2 * u, lambda u: 2 + 0 * u, 1.0, lambda u: u ** 3 / 3),
        "cubic": (lambda u: u ** 3, lambda u: 3 * u ** 2, lambda u: 6 * u, 2.0, lambda u: u ** 4 / 4),
        "focusing-cubic": (lambda u: -u ** 3, lambda u: -3 * u ** 2, lambda u: -6 * u, 2.0,
                           lambda u: -u ** 4 / 4),
        "sine": (lambda u: np.sin(u) - u, lambda u: np.cos(u) - 1, lambda u: -np.sin(u), 2.0,
                 lambda u: 1 - np.cos(u) - u ** 2 / 2),
    }
    if name not in table:
        raise BadParameter(f"unknown nonlinearity {name!r}; known: {sorted(table)}")
    f, df, d2f, alpha, prim = table[name]
    if scale != 1.0:
        f, df, d2f, prim = (_scaled(scale, fn) for fn in (f, df, d2f, prim))
    return NonlinearitySpec(f, df, d2f, alpha, name, prim, is_zero=(name == "zero" or scale == 0))


def fbar(M_arg: float, f: NonlinearitySpec, samples: int = 1024) -> float:
    """max of |f'| and |f''| over [-M_arg, M_arg] (sampled, endpoints included)."""
    if M_arg < 0:
        raise BadParameter(f"fbar needs a nonnegative argument, got {M_arg}")
    x = np.linspace(-M_arg, M_arg, samples + 1)
    vals = np.maximum(np.abs(f.df(x)), np.abs(f.d2f(x)))
    if not np.all(np.isfinite(vals)):
        raise NonFiniteDerivative(f"derivatives of {f.name!r} are not finite on [-{M_arg}, {M_arg}]")
    return float(np.max(vals))


def t_bounds(M: float, f: NonlinearitySpec, C0: float = 1.0, C1: float = 1.0):
    """The self-map bound and the contraction bound on the local window."""
    m1 = M + 1.0
    fb = fbar(m1, f)
    return 1.0 / (m1 * (1.0 + 2.0 * C0 * m1 * fb)), 0.5 / (1.0 + C1 * m1 ** 2 * fb)


def choose_T(M: float, f: NonlinearitySpec, C0: float = 1.0, C1: float = 1.0) -> float:
    if M < 0 or C0 <= 0 or C1 <= 0:
        raise BadParameter("choose_T needs M >= 0 and positive constants")
    return min(t_bounds(M, f, C0, C1))


def data_norm(phi: Field, psi: Field, p: float = 2.0) -> float:
    """M = |phi|_{H^{2,p}} + |phi|_inf + |psi|_{H^{2,p}} + |psi|_inf."""
    return sum(spectral.norm_hsp(v, 2.0, p) + spectral.norm_lp(v, np.inf) for v in (phi, psi))


@dataclass
class FixedPointConfig:
    dt: float = 1e-3
    C0: float = 1.0
    C1: float = 1.0
    tol_fp: float = 1e-9
    max_iter: int = 30
    p: float = 2.0
    auto_calibrate: bool = True
    n_pairs: int = 3
    seed: int = 0
    overflow: float = 1e8
    blowup_threshold: float = 1e6
    min_steps: int = 2
    restart: str = "cauchy"
    tol_d0: float = 1e-8
    # starting window for calibration instead of the theoretical bound
    T_cap: float | None = None

    def __post_init__(self):
        if self.restart not in ("cauchy", "multipoint"):
            raise BadParameter(f"restart must be 'cauchy' or 'multipoint', got {self.restart!r}")


# -- the map G ----------------------------------------------------------------------

def nonlinear_forcing(u_values, kernel: KernelSpec, grid, f: NonlinearitySpec, overflow: float = 1e8):
    """Spectral samples of Lap[g * f(u)] for a batch of physical fields."""
    peak = float(np.max(np.abs(u_values), initial=0.0))
    if not np.isfinite(peak) or peak > overflow:
        raise NonlinearOverflow(f"|u| reached {peak:.3e} (guard {overflow:.1e})")
    fu = f.f(u_values)
    return -grid.k2 * kernel.ghat(grid.k2) * spectral.forward(fu, grid)


def picard_map_G(u: Trajectory, phi: Field, psi: Field, kernel: KernelSpec, mp: MultipointSpec,
                 f: NonlinearitySpec, overflow: float = 1e8, tol_d0: float = 1e-8) -> Trajectory:
    """Linear multipoint solve forced by Lap[g * f(u)] on u's time grid."""
    if f.is_zero:
        forcing = None
    else:
        forcing = nonlinear_forcing(u.u, kernel, u.grid, f, overflow)
    return solve_linear(phi, psi, kernel, mp, u.T, u.dt, forcing=forcing, tol_d0=tol_d0,
                        localize="off", real=u.real and phi.real and psi.real and mp.is_real)


# -- local solve ----------------------------------------------------------------------------

@dataclass
class IterRecord:
    iteration: int
    diff: float
    ratio: float


@dataclass
class Calibration:
    T: float
    T_start: float
    ratios: list
    calibrated: bool
    attempts: int


@dataclass
class LocalResult:
    traj: Trajectory
    log: list
    T: float
    calibration: Calibration | None = None

    @property
    def iterations(self):
        return len(self.log)

    @property
    def max_ratio(self):
        r = [rec.ratio for rec in self.log if np.isfinite(rec.ratio)]
        return max(r, default=0.0)


def _start_T(M, f, cfg):
    if cfg.T_cap is not None:
        return cfg.T_cap
    return choose_T(M, f, cfg.C0, cfg.C1)


def _snap_steps(T, dt):
    return int(np.floor(T / dt + 1e-9))


def _random_member(base: Trajectory, size: float, rng) -> Trajectory:
    """base + a smooth random space-time perturbation of Y-norm ``size``."""
    g = base.grid
    space = np.zeros(g.shape)
    for _ in range(3):
        c = rng.uniform(-0.25 * g.L, 0.25 * g.L, size=g.n).reshape((g.n,) + (1,) * g.n)
        w = rng.uniform(0.5, 2.0)
        space += rng.normal() * np.exp(-np.sum((g.x - c) ** 2, axis=0) / w ** 2)
    s = base.times / max(base.T, 1e-300)
    q = rng.normal() + rng.normal() * s + rng.normal() * s ** 2
    pert = q.reshape((-1,) + (1,) * g.n) * space
    pert_hat = spectral.forward(pert, g)
    pert_hat *= size / y_norm(pert_hat, g, real=True, values=pert)
    return Trajectory(g, base.times, base.u_hat + pert_hat, base.ut_hat, base.real)


def contraction_ratio(u1: Trajectory, u2: Trajectory, phi, psi, kernel, mp, f, cfg: FixedPointConfig) -> float:
    g = u1.grid
    G1 = picard_map_G(u1, phi, psi, kernel, mp, f, cfg.overflow, cfg.tol_d0)
    G2 = picard_map_G(u2, phi, psi, kernel, mp, f, cfg.overflow, cfg.tol_d0)
    num = y_norm(G1.u_hat - G2.u_hat, g, cfg.p, real=G1.real)
    den = y_norm(u1.u_hat - u2.u_hat, g, cfg.p, real=u1.real)
    return num / den if den > 0 else 0.0


def calibrate_T(phi: Field, psi: Field, kernel: KernelSpec, mp: MultipointSpec, f: NonlinearitySpec,
                cfg: FixedPointConfig, T_start: float, M: float | None = None) -> Calibration:
    """Halve T until G contracts by 1/2 on random pairs from the ball |u|_Y <= M+1.

    Windows never shrink below the last multipoint time; a window that still
    fails there is reported with ``calibrated=False``.
    """
    rng = np.random.default_rng(cfg.seed)
    M = data_norm(phi, psi, cfg.p) if M is None else M
    T = T_start
    history = []
    attempts = 0
    while True:
        attempts += 1
        steps = _snap_steps(max(T, mp.lam_max), cfg.dt)
        if steps < cfg.min_steps:
            return Calibration(T, T_start, history, False, attempts)
        base = solve_linear(phi, psi, kernel, mp, steps * cfg.dt, cfg.dt, localize="off",
                            tol_d0=cfg.tol_d0)
        room = (M + 1) - base.y_norm(cfg.p)
        size = 0.5 * room if room > 0 else 0.1 * (M + 1)
        ratios = []
        for _ in range(cfg.n_pairs):
            u1 = _random_member(base, size, rng)
            u2 = _random_member(base, size, rng)
            ratios.append(contraction_ratio(u1, u2, phi, psi, kernel, mp, f, cfg))
        history.append((T, max(ratios)))
        if max(ratios) <= 0.5:
            return Calibration(T, T_start, history, True, attempts)
        if T <= mp.lam_max:
            log.warning("calibration failure: contraction ratio %.3f > 1/2 at the shortest "
                        "admissible window %.4g", max(ratios), max(T, mp.lam_max))
            return Calibration(T, T_start, history, False, attempts)
        T = T / 2


def solve_local(phi: Field, psi: Field, kernel: KernelSpec, mp: MultipointSpec, f: NonlinearitySpec,
                cfg: FixedPointConfig, T: float | None = None, initial: Trajectory | None = None) -> LocalResult:
    """Picard iteration u <- G(u) on one window, started from the unforced solution.

    ``T`` defaults to the step-size policy (calibrated when
    ``cfg.auto_calibrate``).  The window always reaches the last multipoint
    time.  Raises NoConvergence after ``cfg.max_iter`` iterations.
    """
    calib = None
    if T is None:
        M = data_norm(phi, psi, cfg.p)
        T = _start_T(M, f, cfg)
        if cfg.auto_calibrate and not f.is_zero:
            calib = calibrate_T(phi, psi, kernel, mp, f, cfg, T, M)
            T = calib.T
    steps = _snap_steps(max(T, mp.lam_max), cfg.dt)
    if steps < 1:
        raise BadParameter(f"window {T:.3e} shorter than one step dt={cfg.dt}")
    Tw = steps * cfg.dt
    u = initial if initial is not None else solve_linear(phi, psi, kernel, mp, Tw, cfg.dt,
                                                         localize="off", tol_d0=cfg.tol_d0)
    records = []
    prev = None
    for k in range(1, cfg.max_iter + 1):
        new = picard_map_G(u, phi, psi, kernel, mp, f, cfg.overflow, cfg.tol_d0)
        diff = y_norm(new.u_hat - u.u_hat, new.grid, cfg.p, real=new.real)
        ratio = diff / prev if prev else float("nan")
        records.append(IterRecord(k, diff, ratio))
        u, prev = new, diff
        if diff < cfg.tol_fp:
            u.meta["picard_iterations"] = k
            return LocalResult(u, records, Tw, calib)
    raise NoConvergence(f"Picard did not reach tol {cfg.tol_fp:g} in {cfg.max_iter} iterations "
                        f"(last diff {records[-1].diff:.3e}, ratio {records[-1].ratio:.3f})", records)


def fixed_point_residual(u: Trajectory, phi, psi, kernel, mp, f, cfg: FixedPointConfig) -> float:
    G = picard_map_G(u, phi, psi, kernel, mp, f, cfg.overflow, cfg.tol_d0)
    return y_norm(G.u_hat - u.u_hat, u.grid, cfg.p, real=u.real)


def equation_residual(traj: Trajectory, kernel: KernelSpec, f: NonlinearitySpec) -> float:
    """max over interior times of the L2 norm of
    u_tt (second difference) + eta^2 u + |xi|^2 ghat F[f(u)]."""
    g = traj.grid
    dt = traj.dt
    uh = traj.u_hat
    utt = (uh[2:] - 2 * uh[1:-1] + uh[:-2]) / dt ** 2
    res = utt + kernel.eta2(g.k2) * uh[1:-1]
    if not f.is_zero:
        res = res + g.k2 * kernel.ghat(g.k2) * spectral.forward(f.f(traj.u[1:-1]), g)
    return float(np.max(np.sqrt(np.sum(np.abs(res) ** 2, axis=g.axes) / g.volume)))


# -- continuation ---------------------------------------------------------------------------------

@dataclass
class WindowRecord:
    t0: float
    T: float
    iterations: int
    y_norm: float
    max_ratio: float
    calibrated: bool | None
    T_theory: float | None = None


@dataclass
class ContinuationResult:
    traj: Trajectory | None
    status: str                      # "completed" or "blowup"
    T_reached: float
    T_est: float | None = None
    reason: str = ""
    windows: list = field(default_factory=list)
    iter_log: list = field(default_factory=list)   # (window, IterRecord)

    @property
    def blowup(self):
        return self.status == "blowup"

    @property
    def y_log(self):
        return [w.y_norm for w in self.windows]


def continue_solution(phi: Field, psi: Field, kernel: KernelSpec, mp: MultipointSpec, f: NonlinearitySpec,
                      T_total: float, cfg: FixedPointConfig) -> ContinuationResult:
    """Chain local solves up to ``T_total`` or until the solution blows up.

    The first window carries the multipoint data.  Later windows restart
    from (u(T), u_t(T)) as a plain Cauchy problem (``restart="cauchy"``) or
    reapply the same multipoint spec on the shifted window
    (``restart="multipoint"``).  Blow-up is declared when the window Y-norm
    passes ``cfg.blowup_threshold``, when the admissible window collapses
    below ``cfg.min_steps`` time steps, or when the iteration overflows or
    stops converging.
    """
    parts, windows, iter_log = [], [], []
    t = 0.0
    data = (phi, psi)
    window_mp = mp
    n_total = _snap_steps(T_total, cfg.dt)

    def result(status, reason="", T_est=None):
        traj = concatenate(parts) if parts else None
        if traj is not None and len(traj.times) > n_total + 1:
            traj = traj.window(0, n_total)
        return ContinuationResult(traj, status, t, T_est, reason, windows, iter_log)

    while _snap_steps(T_total - t, cfg.dt) > 0:
        remaining = _snap_steps(T_total - t, cfg.dt)
        M = data_norm(*data, cfg.p)
        if not np.isfinite(M) or M > cfg.blowup_threshold:
            return result("blowup", f"data norm {M:.3e} above threshold", t)
        calib = None
        T_theory = None
        if f.is_zero:
            T_loc = T_total - t
        else:
            T_theory = choose_T(M, f, cfg.C0, cfg.C1)
            T_loc = _start_T(M, f, cfg)
            if cfg.auto_calibrate:
                calib = calibrate_T(*data, kernel, window_mp, f, cfg, T_loc, M)
                T_loc = calib.T
        steps = _snap_steps(max(T_loc, window_mp.lam_max), cfg.dt)
        if steps < min(cfg.min_steps, remaining):
            return result("blowup", f"admissible window {T_loc:.3e} collapsed below "
                                    f"{cfg.min_steps} steps", t)
        if window_mp.lam_max == 0:
            steps = min(steps, remaining)
        try:
            loc = solve_local(*data, kernel, window_mp, f, cfg, T=steps * cfg.dt)
        except (NoConvergence, NonlinearOverflow) as exc:
            return result("blowup", f"{type(exc).__name__}: {exc}", t)
        loc.calibration = calib
        w = len(windows)
        iter_log.extend((w, rec) for rec in loc.log)
        traj = loc.traj
        per_t = (spectral.hsp_norms(traj.u_hat, traj.grid, 2.0, cfg.p)
                 + spectral.lp_norms(traj.u, traj.grid, np.inf))
        yn = traj.y_norm(cfg.p)
        windows.append(WindowRecord(t, loc.T, loc.iterations, yn, loc.max_ratio,
                                    None if calib is None else calib.calibrated, T_theory))
        over = np.nonzero(per_t > cfg.blowup_threshold)[0]
        parts.append(traj)
        if over.size:
            T_est = t + float(traj.times[over[0]])
            t += traj.T
            return result("blowup", f"Y-norm passed threshold {cfg.blowup_threshold:g}", T_est)
        t += traj.T
        data = (traj.field(-1), traj.field_t(-1))
        if cfg.restart == "cauchy":
            window_mp = MultipointSpec.classical()
    return result("completed")


# -- small-data global mode ----------------------------------------------------------------------------

@dataclass
class SmallDataReport:
    result: ContinuationResult
    delta: float
    data_size: float
    horizon: float
    T_local: float
    sup_ratio: float          # sup_t(|u|_{H^s} + |u_t|_{H^s}) / delta
    w_norm: float             # sup_t(|u|_{H^s n L^inf} + |u_t|_{H^s n L^inf})
    w_ball_ok: bool
    slope: float
    slope_stderr: float
    series: np.ndarray


def solve_global_smalldata(phi: Field, psi: Field, kernel: KernelSpec, mp: MultipointSpec, f: NonlinearitySpec,
                           delta: float, cfg: FixedPointConfig, s: float = 2.0,
                           horizon: float | None = None, horizon_windows: int = 50) -> SmallDataReport:
    """Run continuation for small data and measure the global bound.

    Data size is |phi|_{H^s n L^1} + |psi|_{H^s n L^1}, which must not
    exceed ``delta``.  The horizon defaults to ``horizon_windows`` local
    windows.
    """
    n = phi.grid.n
    if not s > n / 2:
        raise BadParameter(f"need s > n/2 (s={s}, n={n})")
    if f.alpha is not None and f.alpha < 1:
        raise BadParameter(f"growth order alpha must be >= 1, got {f.alpha}")
    size = spectral.norm_record(phi, s, 2).y1 + spectral.norm_record(psi, s, 2).y1
    if size > delta:
        raise DataTooLarge(f"data size {size:.3e} exceeds delta {delta:.3e}")
    M = data_norm(phi, psi, cfg.p)
    T_loc = _snap_steps(choose_T(M, f, cfg.C0, cfg.C1), cfg.dt) * cfg.dt
    if horizon is None:
        horizon = horizon_windows * T_loc
    res = continue_solution(phi, psi, kernel, mp, f, horizon, cfg)
    traj = res.traj
    g = traj.grid
    q = spectral.hsp_norms(traj.u_hat, g, s, 2) + spectral.hsp_norms(traj.ut_hat, g, s, 2)
    w = q + spectral.lp_norms(traj.u, g, np.inf) + spectral.lp_norms(traj.ut, g, np.inf)
    slope, stderr = _trend(traj.times, q)
    w_norm = float(np.max(w))
    return SmallDataReport(
        result=res, delta=delta, data_size=float(size), horizon=float(horizon), T_local=T_loc,
        sup_ratio=float(np.max(q) / delta) if delta > 0 else 0.0,
        w_norm=w_norm, w_ball_ok=bool(w_norm <= 3 * cfg.C0 * delta), slope=slope,
        slope_stderr=stderr, series=q,
    )


def _trend(t, y):
    if len(t) < 3 or np.ptp(t) == 0:
        return 0.0, 0.0
    A = np.vstack([t, np.ones_like(t)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(len(t) - 2, 1)
    sxx = np.sum((t - t.mean()) ** 2)
    stderr = float(np.sqrt(np.sum(resid ** 2) / dof / sxx)) if sxx > 0 else 0.0
    return float(coef[0]), stderr


def with_dt(cfg: FixedPointConfig, dt: float) -> FixedPointConfig:
    return replace(cfg, dt=dt)
