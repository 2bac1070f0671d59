import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from conftest import bump, odd_bump, zero_field
from nlwave.errors import BadParameter, SingularMode
from nlwave.kernels import KernelSpec, bessel, constant, gaussian, zero
from nlwave.linear import (MultipointSpec, QuadratureSpec, check_wellposed, concatenate, d0, duhamel,
                           evolution_symbols, evolve_mode, mode_coefficients, mode_system, multipoint_residuals,
                           paper_coefficients, particular_solution, solve_linear, theorem2_diagnostics,
                           time_grid)
from nlwave.spectral import Field, Grid

ADAPTIVE = QuadratureSpec("adaptive")


def ode_oracle(eta, forcing, u0, v0, t_end):
    """Integrate u'' + eta^2 u = forcing with DOP853, real and imaginary parts separately."""
    def rhs(t, y):
        f = forcing(t)
        return [y[1], -eta ** 2 * y[0] + np.real(f), y[3], -eta ** 2 * y[2] + np.imag(f)]
    sol = integrate.solve_ivp(rhs, (0, t_end), [np.real(u0), np.real(v0), np.imag(u0), np.imag(v0)],
                              method="DOP853", rtol=1e-12, atol=1e-14)
    y = sol.y[:, -1]
    return y[0] + 1j * y[2], y[1] + 1j * y[3]


# -- MultipointSpec / D0 ------------------------------------------------------------------

def test_multipoint_spec_validation():
    with pytest.raises(BadParameter):
        MultipointSpec((0.1,), (), (0.5,))
    with pytest.raises(BadParameter):
        MultipointSpec((0.1, 0.2), (0.1, 0.2), (0.5, 0.5))
    with pytest.raises(BadParameter):
        MultipointSpec((0.1,), (0.1,), (-1.0,))
    mp = MultipointSpec.classical()
    assert mp.m == 0 and mp.lam_max == 0.0


def test_d0_empty_sums():
    assert np.all(d0(np.linspace(0, 5, 7), MultipointSpec.classical()) == 1.0)


@given(st.floats(-2, 2), st.floats(0.01, 5), st.floats(0, 10))
def test_d0_alpha_only(alpha, lam, eta):
    mp = MultipointSpec((alpha,), (0.0,), (lam,))
    assert d0(eta, mp) == pytest.approx(1 - alpha * np.cos(lam * eta), abs=1e-14)


@given(st.floats(-2, 2), st.floats(0.01, 5), st.floats(0, 10))
def test_d0_equal_coefficients(g, lam, eta):
    mp = MultipointSpec((g,), (g,), (lam,))
    assert d0(eta, mp) == pytest.approx(1 - 2 * g * np.cos(lam * eta) + g * g, abs=1e-13)


@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.05, 3)), min_size=1, max_size=4,
                unique_by=lambda t: t[2]), st.floats(0, 20))
def test_velocity_matrix_determinant_is_d0(data, eta):
    a, b, lam = zip(*data)
    ms = mode_system(np.array(eta), MultipointSpec(a, b, lam))
    assert ms.det == pytest.approx(ms.d0, abs=1e-12)


@given(st.floats(0.01, 20), st.floats(-1, 1), st.floats(-1, 1), st.floats(0.05, 3))
def test_d_equals_eta_d0(eta, a, b, lam):
    mp = MultipointSpec((a,), (b,), (lam,))
    ms = mode_system(np.array(eta), mp)
    g1, g2, D, D1, D2 = paper_coefficients(eta, mp, 1.0, 1.0, np.zeros(1), np.zeros(1))
    assert ms.d == pytest.approx(eta * ms.d0, rel=1e-14, abs=1e-300)
    assert D == pytest.approx(ms.d, rel=1e-12, abs=1e-12)


def test_wellposed_classical(grid, kernel):
    rep = check_wellposed(kernel, MultipointSpec.classical(), grid)
    assert rep.passed and rep.min_abs_d0 == 1.0


def test_wellposed_constructed_zero():
    g = Grid(1, 256, 40.0)
    k = KernelSpec(1.0, constant(1.0), bessel(2.0))
    xi0 = 2 * np.pi * 4 / g.L
    lam = 2 * np.pi / np.sqrt(xi0 ** 2 + 1)
    rep = check_wellposed(k, MultipointSpec((1.0,), (0.0,), (lam,)), g)
    assert not rep.passed
    assert rep.min_abs_d0 < 1e-8
    assert abs(abs(rep.argmin_xi[0]) - xi0) < 1e-12


@given(st.floats(-0.25, 0.25), st.floats(0.05, 5))
def test_wellposed_small_coefficients_bound(a, lam):
    b = 0.24 - abs(a)
    g = Grid(1, 64, 20.0)
    k = KernelSpec(0.5, gaussian(1.0), bessel(2.0))
    rep = check_wellposed(k, MultipointSpec((a,), (b,), (lam,)), g)
    assert rep.min_abs_d0 >= 1 - 2 * 0.25 - 1 / 16


# -- single mode ------------------------------------------------------------------------

def test_mode_coefficients_classical():
    c = mode_coefficients(2.0, MultipointSpec.classical(), 0.3 + 0.1j, -0.7)
    assert c.g1 == 0.3 + 0.1j and c.g2 == -0.7
    g1, g2, *_ = paper_coefficients(2.0, MultipointSpec.classical(), 0.3 + 0.1j, -0.7, [], [])
    assert g1 == pytest.approx(0.3 + 0.1j) and g2 == pytest.approx(-0.7 / 2.0)


def test_mode_coefficients_zero_data_constant_forcing():
    c = mode_coefficients(1.3, MultipointSpec.classical(), 0.0, 0.0, forcing=lambda t: np.ones_like(t))
    assert c.g1 == 0 and c.g2 == 0


def test_mode_coefficients_back_substitution():
    # oracle: gamma_k, mu_k by scipy quad, then residual of the printed-style 2x2 system
    rng = np.random.default_rng(1)
    for _ in range(10):
        eta = rng.uniform(0.2, 6)
        mp = MultipointSpec(tuple(rng.uniform(-0.4, 0.4, 2)), tuple(rng.uniform(-0.4, 0.4, 2)),
                            tuple(rng.uniform(0.1, 2.0, 2)))
        w, ph = rng.uniform(0.5, 3), rng.uniform(0, 6)
        F = lambda t: np.cos(w * t + ph) + 0.3j * t
        phi_hat, psi_hat = complex(*rng.standard_normal(2)), complex(*rng.standard_normal(2))
        c = mode_coefficients(eta, mp, phi_hat, psi_hat, forcing=F, quad=ADAPTIVE)
        for k, lam in enumerate(mp.lam):
            gam = integrate.quad(lambda s: np.sin(eta * (lam - s)) / eta * F(s), 0, lam, complex_func=True,
                                 epsabs=1e-14)[0]
            mu = integrate.quad(lambda s: np.cos(eta * (lam - s)) * F(s), 0, lam, complex_func=True,
                                epsabs=1e-14)[0]
            assert c.gamma[k] == pytest.approx(gam, abs=1e-12)
            assert c.mu[k] == pytest.approx(mu, abs=1e-12)
        # (cos, sin) basis: u = g1 cos + g2 sin + Duhamel, with g2 = c2/eta
        g1, g2, D, D1, D2 = paper_coefficients(eta, mp, phi_hat, psi_hat, c.gamma, c.mu)
        assert g1 == pytest.approx(c.g1, abs=1e-12) and g2 == pytest.approx(c.g2 / eta, abs=1e-12)
        a, b = np.array(mp.alpha), np.array(mp.beta)
        kap = eta * np.array(mp.lam)
        r1 = g1 * (1 - np.sum(a * np.cos(kap))) - g2 * np.sum(a * np.sin(kap)) - phi_hat - np.sum(a * c.gamma)
        r2 = (g1 * eta * np.sum(b * np.sin(kap)) + g2 * eta * (1 - np.sum(b * np.cos(kap)))
              - psi_hat - np.sum(b * c.mu))
        assert abs(r1) < 1e-10 and abs(r2) < 1e-10


def test_singular_mode_rejected():
    mp = MultipointSpec((1.0,), (0.0,), (2 * np.pi,))
    with pytest.raises(SingularMode):
        mode_coefficients(1.0, mp, 1.0, 0.0)


def test_evolve_mode_cosine():
    t = np.linspace(0, 3, 7)
    u, ut = evolve_mode(1.7, 0.4, 0.0, None, t)
    assert np.allclose(u, 0.4 * np.cos(1.7 * t), atol=1e-15)
    assert np.allclose(ut, -0.4 * 1.7 * np.sin(1.7 * t), atol=1e-15)


def test_evolve_mode_zero_eta():
    t = np.linspace(0, 3, 7)
    u, ut = evolve_mode(0.0, 0.4, -1.5, None, t)
    assert np.allclose(u, 0.4 - 1.5 * t, atol=1e-15)
    assert np.allclose(ut, -1.5, atol=1e-15)


@pytest.mark.parametrize("quad", [QuadratureSpec("simpson", 1e-3), ADAPTIVE])
def test_evolve_mode_vs_ode_oracle(quad):
    rng = np.random.default_rng(7)
    for _ in range(5):
        eta = rng.uniform(0.05, 5)
        w = rng.uniform(0.1, 4)
        F = lambda t: np.sin(w * t) + 0.5j * np.exp(-t)
        g1, g2 = complex(*rng.standard_normal(2)), complex(*rng.standard_normal(2))
        T = rng.uniform(0.5, 3)
        u, ut = evolve_mode(eta, g1, g2, F, T, quad)
        ue, ute = ode_oracle(eta, F, g1, g2, T)
        assert abs(u - ue) <= 1e-8 * max(1, abs(ue))
        assert abs(ut - ute) <= 1e-8 * max(1, abs(ute))


def test_printed_half_eta_duhamel_factor_fails_ode():
    # the factor 1/(2 eta) in place of 1/eta does not solve u'' + eta^2 u = F
    eta, T = 1.5, 2.0
    F = lambda t: np.ones_like(t)
    w, _ = duhamel(eta, F, T, ADAPTIVE)
    exact, _ = ode_oracle(eta, F, 0.0, 0.0, T)
    assert w == pytest.approx(exact, abs=1e-10)
    assert abs(0.5 * w - exact) > 0.1 * abs(exact)


def test_multipoint_problem_per_mode_with_oracle():
    # the solution built from mode_coefficients satisfies both data conditions along the ODE oracle
    eta = 2.3
    mp = MultipointSpec((0.2, -0.3), (0.1, 0.25), (0.5, 1.4))
    F = lambda t: np.cos(3 * t)
    c = mode_coefficients(eta, mp, 1.0, -0.5, forcing=F, quad=ADAPTIVE)
    u0, v0 = evolve_mode(eta, c.g1, c.g2, F, 0.0, ADAPTIVE)
    at = [ode_oracle(eta, F, c.g1, c.g2, lam) for lam in mp.lam]
    assert u0 == pytest.approx(1.0 + sum(a * x[0] for a, x in zip(mp.alpha, at)), abs=1e-9)
    assert v0 == pytest.approx(-0.5 + sum(b * x[1] for b, x in zip(mp.beta, at)), abs=1e-9)


def test_particular_solution_exact_for_linear_forcing():
    eta, dt = np.array([0.0, 0.3, 2.0, 11.0]), 0.01
    t = dt * np.arange(301)
    F = (1.0 + 2.0 * t)[:, None] * np.ones_like(eta)
    w, wt = particular_solution(eta, F, dt)
    for i, e in enumerate(eta):
        ue, ute = ode_oracle(e, lambda s: 1.0 + 2.0 * s, 0.0, 0.0, t[-1])
        assert w[-1, i] == pytest.approx(ue, abs=1e-11)
        assert wt[-1, i] == pytest.approx(ute, abs=1e-11)


def test_particular_solution_second_order():
    eta = np.array([1.7])
    errs = []
    for dt in (0.02, 0.01, 0.005):
        t = dt * np.arange(int(round(2.0 / dt)) + 1)
        w, _ = particular_solution(eta, np.sin(5 * t)[:, None], dt)
        errs.append(abs(w[-1, 0] - ode_oracle(1.7, lambda s: np.sin(5 * s), 0, 0, 2.0)[0]))
    assert 3.5 < errs[0] / errs[1] < 4.5 and 3.5 < errs[1] / errs[2] < 4.5


# -- full solve ---------------------------------------------------------------------------

def test_zero_data_zero_solution(grid, kernel, mp1):
    tr = solve_linear(zero_field(grid), zero_field(grid), kernel, mp1, 1.0, 1e-2)
    assert np.all(tr.u_hat == 0) and np.all(tr.ut_hat == 0)


def test_cauchy_harmonic(grid):
    k = KernelSpec(0.0, gaussian(1.0), bessel(2.0))
    xi0 = 2 * np.pi * 3 / grid.L
    phi = Field.from_function(grid, lambda x: np.cos(xi0 * x))
    tr = solve_linear(phi, zero_field(grid), k, MultipointSpec.classical(), 2.0, 1e-2, localize="off")
    e = np.sqrt(np.exp(-xi0 ** 2))
    expect = np.cos(e * tr.times)[:, None] * phi.values
    assert np.max(np.abs(tr.u - expect)) < 1e-12


def test_multipoint_residuals_linear(grid, kernel, mp1):
    phi, psi = odd_bump(grid), bump(grid, 0.3)
    tr = solve_linear(phi, psi, kernel, mp1, 1.0, 1e-3)
    assert max(multipoint_residuals(tr, phi, psi, mp1)) < 1e-12
    assert tr.meta["lambda_snap_error"] == 0.0


def test_lambda_snapping_reported(grid, kernel):
    mp = MultipointSpec((0.2,), (0.1,), (0.50037,))
    tr = solve_linear(bump(grid), zero_field(grid), kernel, mp, 1.0, 1e-3)
    assert tr.meta["lambda_snap_error"] == pytest.approx(0.00037, abs=1e-12)


def test_window_covers_last_multipoint_time(grid, kernel):
    mp = MultipointSpec((0.2,), (0.1,), (1.5,))
    tr = solve_linear(bump(grid), zero_field(grid), kernel, mp, 0.5, 1e-2)
    assert tr.T == pytest.approx(1.5)
    assert time_grid(0.5, 1e-2, mp)[:2] == (50, 150)


def test_solve_linear_matches_mode_oracle(grid, kernel, mp1):
    phi, psi = odd_bump(grid), bump(grid, 0.3)
    tr = solve_linear(phi, psi, kernel, mp1, 1.0, 1e-3)
    eta = kernel.eta_k2(grid.k2)
    S1, S2 = evolution_symbols(eta, mp1, tr.times[:, None])
    assert np.max(np.abs(S1 * phi.coeffs + S2 * psi.coeffs - tr.u_hat)) < 1e-12
    j = [1, 5, 40]
    for i in j:
        ue, ute = ode_oracle(eta[i], lambda t: 0.0, tr.u_hat[0, i], tr.ut_hat[0, i], tr.times[-1])
        assert tr.u_hat[-1, i] == pytest.approx(ue, abs=1e-10)
        assert tr.ut_hat[-1, i] == pytest.approx(ute, abs=1e-10)


def test_solve_linear_forced_vs_oracle(grid, kernel, mp1):
    # forcing e^{-x^2} cos(t): each mode gets phat(xi) cos t
    src = bump(grid)
    forcing = lambda t: src * np.cos(t)
    tr = solve_linear(zero_field(grid), zero_field(grid), kernel, mp1, 1.0, 1e-3, forcing=forcing)
    assert max(multipoint_residuals(tr, zero_field(grid), zero_field(grid), mp1)) < 1e-12
    eta = kernel.eta_k2(grid.k2)
    for i in (0, 3, 17):
        fh = src.coeffs[i]
        ue, _ = ode_oracle(eta[i], lambda t: fh * np.cos(t), tr.u_hat[0, i], tr.ut_hat[0, i], tr.T)
        assert abs(tr.u_hat[-1, i] - ue) < 1e-6 * max(1, abs(ue))


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_superposition(c1, c2):
    g = Grid(1, 64, 40.0)
    k = KernelSpec(0.0, gaussian(1.0), bessel(2.0))
    mp = MultipointSpec((0.2,), (0.1,), (0.5,))
    p1, p2 = bump(g), odd_bump(g)
    z = zero_field(g)
    F1 = lambda t: bump(g, 0.5) * t
    F2 = lambda t: odd_bump(g) * np.sin(t)
    a = solve_linear(p1, z, k, mp, 0.6, 1e-2, forcing=F1)
    b = solve_linear(z, p2, k, mp, 0.6, 1e-2, forcing=F2)
    ab = solve_linear(c1 * p1, c2 * p2, k, mp, 0.6, 1e-2, forcing=lambda t: c1 * F1(t) + c2 * F2(t))
    scale = 1 + abs(c1) + abs(c2)
    assert np.max(np.abs(ab.u_hat - c1 * a.u_hat - c2 * b.u_hat)) < 1e-10 * scale


def test_real_data_real_solution(grid, kernel, mp1):
    tr = solve_linear(odd_bump(grid), bump(grid), kernel, mp1, 1.0, 1e-2)
    assert tr.real
    assert np.max(np.abs(np.fft.ifft(tr.u_hat[-1] * grid._phase).imag)) < 1e-14


def test_complex_coefficients_allowed(grid, kernel):
    mp = MultipointSpec((0.2 + 0.1j,), (0.1j,), (0.5,))
    phi = odd_bump(grid)
    tr = solve_linear(phi, zero_field(grid), kernel, mp, 1.0, 1e-2)
    assert not tr.real
    assert max(multipoint_residuals(tr, phi, zero_field(grid), mp)) < 1e-12


def test_singular_configuration_refused(grid):
    k = KernelSpec(1.0, constant(1.0), bessel(2.0))
    xi0 = 2 * np.pi * 4 / grid.L
    lam = 2 * np.pi / np.sqrt(xi0 ** 2 + 1)
    with pytest.raises(SingularMode) as err:
        solve_linear(bump(grid), zero_field(grid), k, MultipointSpec((1.0,), (0.0,), (lam,)), 1.0, 1e-3)
    assert err.value.min_abs_d0 < 1e-8


def test_concatenate_drops_repeated_sample(grid, kernel):
    cl = MultipointSpec.classical()
    a = solve_linear(bump(grid), zero_field(grid), kernel, cl, 0.5, 1e-2)
    b = solve_linear(a.field(-1), a.field_t(-1), kernel, cl, 0.5, 1e-2)
    whole = solve_linear(bump(grid), zero_field(grid), kernel, cl, 1.0, 1e-2)
    joined = concatenate([a, b])
    assert len(joined.times) == len(whole.times)
    assert np.allclose(joined.times, whole.times)
    assert np.max(np.abs(joined.u_hat - whole.u_hat)) < 1e-12


def test_ut_consistent_with_centred_difference(grid, kernel, mp1):
    tr = solve_linear(odd_bump(grid), zero_field(grid), kernel, mp1, 1.0, 1e-3)
    fd = (tr.u_hat[2:] - tr.u_hat[:-2]) / (2 * tr.dt)
    assert np.max(np.abs(fd - tr.ut_hat[1:-1])) < 1e-6


def test_stability_bound_zero_data(grid, kernel, mp1):
    z = zero_field(grid)
    rep = theorem2_diagnostics(solve_linear(z, z, kernel, mp1, 1.0, 1e-2), z, z)
    assert rep.ratio_inf == 0.0 and rep.ratio_s == 0.0


def test_stability_bound_ratio_scale_invariant(grid, kernel, mp1):
    phi, psi = odd_bump(grid), bump(grid, 0.2)
    r1 = theorem2_diagnostics(solve_linear(phi, psi, kernel, mp1, 1.0, 1e-2), phi, psi)
    r2 = theorem2_diagnostics(solve_linear(2 * phi, 2 * psi, kernel, mp1, 1.0, 1e-2), 2 * phi, 2 * psi)
    assert r2.lhs_s == pytest.approx(2 * r1.lhs_s) and r2.rhs_s == pytest.approx(2 * r1.rhs_s)
    assert r2.ratio_s == pytest.approx(r1.ratio_s) and r2.ratio_inf == pytest.approx(r1.ratio_inf)


def test_stability_bound_ratio_bounded_over_random_suite():
    g = Grid(1, 128, 40.0)
    k = KernelSpec(0.0, gaussian(1.0), bessel(2.0))
    mp = MultipointSpec((0.2,), (0.1,), (0.5,))
    rng = np.random.default_rng(11)
    ratios = []
    for _ in range(20):
        c, w, a = rng.uniform(-3, 3), rng.uniform(0.5, 2), rng.standard_normal(2)
        phi = bump(g, a[0], c, w)
        psi = odd_bump(g, a[1], w)
        src = bump(g, rng.standard_normal())
        tr = solve_linear(phi, psi, k, mp, 1.0, 1e-2, forcing=lambda t: src * np.cos(t))
        rep = theorem2_diagnostics(tr, phi, psi)
        ratios += [rep.ratio_s, rep.ratio_inf]
    assert np.all(np.isfinite(ratios))
    assert max(ratios) < 10.0
