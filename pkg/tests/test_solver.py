import math

import numpy as np
import pytest

import qcdyn
from qcdyn.errors import (MissingSourceDerivative, NumericalBlowup,
                          ShapeMismatch)
from qcdyn.material import Dims, build_material, scalar_model
from qcdyn.solver import (Grid, Scheme, SolverConfig, SourceSet,
                          Spatial, field_equation_residual,
                          gaussian_state, run, single_mode_state,
                          stability_bound, step_compatible, step_incompatible,
                          zero_state)

from conftest import random_pd_material


def coupled_1d(c_val=1.2, e_val=0.8, d_val=0.3, fr=0.7, rho=1.0):
    shape = (1, 1, 1, 1)
    return build_material(Dims(1, 1), rho, np.full(shape, c_val),
                          np.full(shape, d_val), np.full(shape, e_val),
                          np.full((1, 1), fr))


class TestGrid:
    def test_spacing_and_volume(self):
        g = Grid(10, 1.0)
        assert g.spacing == (0.1,)
        assert g.dim == 1
        g2 = Grid((16, 32), (1.0, 2.0))
        assert g2.spacing == (1.0 / 16, 2.0 / 32)
        assert g2.cell_volume == pytest.approx((1.0 / 16) * (1.0 / 16))

    def test_limits(self):
        with pytest.raises(ShapeMismatch):
            Grid(4, 1.0)
        with pytest.raises(ShapeMismatch):
            Grid((300, 300), (1.0, 1.0))
        with pytest.raises(ShapeMismatch):
            Grid((8, 8, 8), (1.0, 1.0, 1.0))


class TestStabilityBound:
    def test_scalar_fd2_example(self):
        mat = scalar_model(c=1.0, tau_tel=2.0)
        dt = stability_bound(mat, Grid(10, 1.0), Spatial.FD2)
        assert dt == pytest.approx(0.09, abs=1e-15)

    def test_doubling_c_halves_bound(self):
        g = Grid(10, 1.0)
        b1 = stability_bound(scalar_model(1.0, 2.0), g, Spatial.FD2)
        b2 = stability_bound(scalar_model(2.0, 2.0), g, Spatial.FD2)
        assert b2 == pytest.approx(b1 / 2.0, rel=1e-14)

    def test_spectral_pi_adjustment(self):
        mat = scalar_model(c=1.0, tau_tel=2.0)
        g = Grid(10, 1.0)
        b_fd = stability_bound(mat, g, Spatial.FD2)
        b_sp = stability_bound(mat, g, Spatial.SPECTRAL)
        assert b_sp == pytest.approx(b_fd * 2.0 / math.pi, rel=1e-14)

    def test_coupled_bound_matches_branch_speeds(self, rng):
        mat = random_pd_material(rng, 2, 2, coupling=0.8)
        g = Grid((16, 16), (1.0, 1.0))
        bound = stability_bound(mat, g, Spatial.FD2)
        # largest asymptotic branch speed over the sampled directions
        big_q = 200.0
        speed = 0.0
        for ang in np.linspace(0.0, math.pi, 64, endpoint=False):
            q = big_q * np.array([math.cos(ang), math.sin(ang)])
            bs = qcdyn.solve_branches(mat, q)
            speed = max(speed, max(abs(w.real) for w in bs.roots) / big_q)
        want = 0.9 * min(g.spacing) / (speed * math.sqrt(2))
        assert bound == pytest.approx(want, rel=2e-2)


class TestStepping:
    def test_zero_state_stays_zero(self):
        mat = coupled_1d()
        cfg = SolverConfig(grid=Grid(32, 1.0), steps=10, dt=0.01)
        res = run(zero_state(mat, cfg.grid), mat, None, cfg)
        for name in ("u_par", "u_perp", "w_par", "w_perp"):
            assert not getattr(res.final_state, name).any()

    def test_steps_zero_returns_initial(self):
        mat = coupled_1d()
        grid = Grid(32, 2 * math.pi)
        st = single_mode_state(mat, grid, "perp", 0, 1)
        res = run(st, mat, None, SolverConfig(grid=grid, steps=0, dt=0.01))
        assert np.array_equal(res.final_state.u_perp, st.u_perp)
        assert res.final_state.t == 0.0
        assert res.energy_data.shape[0] == 1

    def test_deterministic_rerun_bit_identical(self):
        mat = coupled_1d()
        grid = Grid(32, 2 * math.pi)
        st = single_mode_state(mat, grid, "perp", 0, 2, amplitude=0.7)
        cfg = SolverConfig(grid=grid, steps=200, dt=0.01, probes=((3,), (17,)),
                           snapshot_every=50)
        r1 = run(st, mat, None, cfg)
        r2 = run(st, mat, None, cfg)
        assert np.array_equal(r1.probe_data, r2.probe_data)
        assert np.array_equal(r1.energy_data, r2.energy_data)
        for s1, s2 in zip(r1.snapshots, r2.snapshots):
            for k in s1.fields:
                assert np.array_equal(s1.fields[k], s2.fields[k])

    def test_explicit_dt_above_bound_refused(self):
        mat = scalar_model(1.0, 2.0)
        grid = Grid(32, 1.0)
        bound = stability_bound(mat, grid, Spatial.SPECTRAL)
        cfg = SolverConfig(grid=grid, steps=10, dt=2.0 * bound,
                           scheme=Scheme.EXPLICIT)
        with pytest.raises(ValueError):
            run(zero_state(mat, grid), mat, None, cfg)

    def test_blowup_detected_with_step_index(self):
        mat = scalar_model(1.0, 2.0)
        grid = Grid(32, 1.0)
        bound = stability_bound(mat, grid, Spatial.SPECTRAL)
        st = single_mode_state(mat, grid, "par", 0, 5, amplitude=1.0)
        cfg = SolverConfig(grid=grid, steps=4000, dt=3.0 * bound)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(NumericalBlowup) as exc:
                run(st, mat, None, cfg)
        assert exc.value.step is not None

    def test_probe_and_snapshot_cadence(self):
        mat = scalar_model(1.0, 2.0)
        grid = Grid(32, 2 * math.pi)
        st = single_mode_state(mat, grid, "perp", 0, 1)
        cfg = SolverConfig(grid=grid, steps=20, dt=0.01, probes=((0,),),
                           snapshot_every=7)
        res = run(st, mat, None, cfg)
        assert res.probe_data.shape == (21, 1 + 4)
        assert res.probe_columns[0] == "t"
        assert "p0_u_perp_0" in res.probe_columns
        assert [s.step for s in res.snapshots] == [0, 7, 14, 20]

    def test_gaussian_state_shapes(self):
        mat = coupled_1d()
        grid = Grid(64, 4.0)
        st = gaussian_state(mat, grid, "par", 0, center=2.0, width=0.3,
                            amplitude=0.5)
        assert st.u_par.max() == pytest.approx(0.5, rel=1e-6)
        assert not st.u_perp.any() and not st.w_par.any()


class TestSchemeAccuracy:
    def test_single_mode_decay_matches_telegraph(self):
        # q > q0: envelope decays as exp(-t/tau) while the crest advances
        mat = scalar_model(c=1.0, tau_tel=2.0)
        grid = Grid(128, 2 * math.pi)
        root = qcdyn.telegraph_dispersion(2.0, 1.0, 2.0)[0]
        st = single_mode_state(mat, grid, "perp", 0, 2, omega=root.omega)
        cfg = SolverConfig(grid=grid, steps=800, dt=0.005)
        res = run(st, mat, None, cfg)
        t = res.final_state.t
        coef = np.fft.fft(res.final_state.u_perp[0])[2] / 128
        want = 0.5 / 1j * np.exp(-1j * root.omega * t)
        assert abs(coef - want) / abs(want) < 2e-4

    def test_standing_regime_two_rates(self):
        # q < q0: non-oscillatory decay with the two closed-form rates
        mat = scalar_model(c=1.0, tau_tel=2.0)
        grid = Grid(64, 8 * math.pi)   # k=1 -> q = 0.25 < q0 = 0.5
        st = single_mode_state(mat, grid, "perp", 0, 1)
        sol = qcdyn.modal_solution(0.25, 1.0, 2.0, u0=1.0, v0=0.0)
        cfg = SolverConfig(grid=grid, steps=600, dt=0.02)
        res = run(st, mat, None, cfg)
        coef = np.fft.fft(res.final_state.u_perp[0])[1] / 64
        amplitude = -2.0 * coef.imag  # A sin(qx) carries A/(2i) at +k
        assert amplitude == pytest.approx(sol(res.final_state.t), rel=2e-4)

    def test_richardson_probe_convergence(self):
        mat = coupled_1d()
        grid = Grid(64, 2 * math.pi)
        st = single_mode_state(mat, grid, "par", 0, 1, amplitude=0.4)
        t_end = 2.0

        def probe_series(dt):
            steps = int(round(t_end / dt))
            cfg = SolverConfig(grid=grid, steps=steps, dt=dt, probes=((5,),))
            res = run(st, mat, None, cfg)
            return res.probe_data[:, 1:]

        p1 = probe_series(0.02)
        p2 = probe_series(0.01)
        p3 = probe_series(0.005)
        e1 = np.max(np.abs(p1 - p2[::2]))
        e2 = np.max(np.abs(p2 - p3[::2]))
        order = math.log2(e1 / e2)
        assert order >= 1.9

    def test_single_mode_follows_qep_closed_form(self):
        # coupled sectors: modal trajectory = branch superposition from the
        # plane-wave eigenproblem; time-integrator error is O(dt^2)
        mat = coupled_1d(c_val=1.2, e_val=0.8, d_val=0.3, fr=0.7)
        grid = Grid(64, 2 * math.pi)
        k = 2
        q = np.array([2.0])
        bs = qcdyn.solve_branches(mat, q)
        n = 2
        init = np.zeros(2 * n, dtype=complex)
        init[1] = 64 * 1.0 / 2.0j  # fft coefficient of sin(2x) in u_perp
        a_mat = np.vstack([bs.modes.T, -1j * bs.roots[None, :] * bs.modes.T])
        alpha = np.linalg.solve(a_mat, init)

        def modal_error(dt):
            st = single_mode_state(mat, grid, "perp", 0, k)
            steps = int(round(3.0 / dt))
            res = run(st, mat, None, SolverConfig(grid=grid, steps=steps, dt=dt))
            t = res.final_state.t
            want = (bs.modes.T * np.exp(-1j * bs.roots * t)[None, :]) @ alpha
            got = np.array([np.fft.fft(res.final_state.u_par[0])[k],
                            np.fft.fft(res.final_state.u_perp[0])[k]])
            return np.max(np.abs(got - want)) / np.max(np.abs(want))

        e1, e2 = modal_error(0.02), modal_error(0.01)
        assert e1 / e2 >= 3.0
        assert e2 < 1e-3

    def test_fd2_matches_modified_wavenumber(self):
        # FD2 single mode oscillates at c*q_eff with q_eff = 2 sin(q h/2)/h
        mat = scalar_model(c=1.0, tau_tel=1e12)
        grid = Grid(32, 2 * math.pi)
        k, h = 2, grid.spacing[0]
        q_eff = 2.0 * math.sin(k * h / 2.0) / h
        st = single_mode_state(mat, grid, "par", 0, k)
        cfg = SolverConfig(grid=grid, steps=2000, dt=0.001, spatial=Spatial.FD2)
        res = run(st, mat, None, cfg)
        t = res.final_state.t
        coef = np.fft.fft(res.final_state.u_par[0])[k] / 32
        want = (0.5 / 1j) * math.cos(q_eff * t)
        assert abs(coef - want) <= 2e-4


class TestEnergy:
    def test_undamped_energy_conserved_orders(self):
        mat = scalar_model(c=1.0, tau_tel=math.inf)
        grid = Grid(64, 2 * math.pi)
        st = single_mode_state(mat, grid, "perp", 0, 3, amplitude=0.3)

        def drift(dt):
            steps = int(round(4.0 / dt))
            res = run(st, mat, None, SolverConfig(grid=grid, steps=steps, dt=dt))
            e = res.energy_data[:, 4]
            return np.max(np.abs(e - e[0])) / e[0]

        d1, d2 = drift(0.02), drift(0.01)
        assert d1 < 1e-3
        assert d1 / d2 >= 3.0

    def test_damped_unforced_energy_monotone(self, rng):
        # audit energy never increases for PD/PSD friction (exact property)
        for p, r in ((1, 1), (2, 2)):
            mat = random_pd_material(rng, p, r, coupling=0.4, friction="pd")
            grid = Grid(48, 2 * math.pi)
            st = single_mode_state(mat, grid, "perp", 0, 2, amplitude=0.5)
            dt = 0.5 * stability_bound(mat, grid, Spatial.SPECTRAL)
            res = run(st, mat, None, SolverConfig(grid=grid, steps=400, dt=dt))
            audit = res.energy_data[1:, 5]
            scale = abs(audit[0])
            assert np.all(np.diff(audit) <= 1e-12 * scale)

    def test_forced_damped_balance_residual(self):
        mat = scalar_model(c=1.0, tau_tel=2.0)
        grid = Grid(64, 2 * math.pi)
        st = single_mode_state(mat, grid, "perp", 0, 1, amplitude=0.5)
        src = SourceSet(f_perp=lambda x, t: 0.3 * np.sin(x[0])[None, :]
                        * math.sin(1.3 * t))

        def max_residual(dt):
            steps = int(round(6.0 / dt))
            res = run(st, mat, src, SolverConfig(grid=grid, steps=steps, dt=dt))
            return res.energy_data[1:, 8].max()

        r1, r2 = max_residual(0.02), max_residual(0.01)
        assert r1 < 1e-3
        assert math.log2(r1 / r2) >= 1.9

    def test_energy_report_matches_run_log(self):
        mat = coupled_1d()
        grid = Grid(32, 2 * math.pi)
        st = single_mode_state(mat, grid, "perp", 0, 1, amplitude=0.3)
        res = run(st, mat, None, SolverConfig(grid=grid, steps=50, dt=0.01))
        rep = qcdyn.energy_report(res.final_state, mat, grid)
        assert rep.kinetic == pytest.approx(res.energy_data[-1, 2], rel=1e-12)
        assert rep.elastic == pytest.approx(res.energy_data[-1, 3], rel=1e-12)

    def test_2d_coupled_smoke(self, rng):
        mat = random_pd_material(rng, 2, 2, coupling=0.3, friction="pd")
        grid = Grid((16, 16), (2 * math.pi, 2 * math.pi))
        st = single_mode_state(mat, grid, "perp", 0, (1, 2), amplitude=0.2)
        dt = 0.5 * stability_bound(mat, grid, Spatial.SPECTRAL)
        res = run(st, mat, None, SolverConfig(grid=grid, steps=60, dt=dt))
        audit = res.energy_data[1:, 5]
        assert np.all(np.isfinite(res.final_state.u_perp))
        assert np.all(np.diff(audit) <= 1e-12 * abs(audit[0]))
        # FD2 code path incl. mixed derivatives stays finite
        res_fd = run(st, mat, None, SolverConfig(grid=grid, steps=60, dt=dt,
                                                 spatial=Spatial.FD2))
        assert np.all(np.isfinite(res_fd.final_state.u_perp))


class TestSources:
    def test_incompatible_reduces_to_compatible_bitwise(self):
        mat = coupled_1d()
        grid = Grid(32, 2 * math.pi)
        cfg = SolverConfig(grid=grid, steps=1, dt=0.01)
        s_inc = single_mode_state(mat, grid, "perp", 0, 1, amplitude=0.4)
        s_com = s_inc
        for _ in range(1000):
            s_inc = step_incompatible(s_inc, mat, SourceSet(), cfg)
            s_com = step_compatible(s_com, mat, None, cfg)
        for name in ("u_par", "u_perp", "w_par", "w_perp"):
            assert np.array_equal(getattr(s_inc, name), getattr(s_com, name))

    def test_step_compatible_rejects_plastic(self):
        mat = coupled_1d()
        grid = Grid(32, 1.0)
        cfg = SolverConfig(grid=grid, steps=1, dt=0.001)
        src = SourceSet(beta_p_perp=lambda x, t: np.zeros((1, 1) + grid.shape))
        with pytest.raises(ShapeMismatch):
            step_compatible(zero_state(mat, grid), mat, src, cfg)

    def test_missing_source_derivative(self):
        mat = coupled_1d()
        grid = Grid(32, 1.0)
        cfg = SolverConfig(grid=grid, steps=1, dt=0.001)
        src = SourceSet(v_p_perp=lambda x, t: np.zeros((1,) + grid.shape))
        with pytest.raises(MissingSourceDerivative):
            step_incompatible(zero_state(mat, grid), mat, src, cfg)

    def test_fd_time_derivative_matches_analytic(self):
        mat = coupled_1d()
        grid = Grid(32, 2 * math.pi)
        omega = 1.1

        def v_p(x, t):
            return 0.1 * np.sin(x[0])[None, :] * math.sin(omega * t)

        def v_p_dt(x, t):
            return 0.1 * omega * np.sin(x[0])[None, :] * math.cos(omega * t)

        cfg = SolverConfig(grid=grid, steps=100, dt=0.01)
        st = zero_state(mat, grid)
        r_an = run(st, mat, SourceSet(v_p_perp=v_p, v_p_perp_dt=v_p_dt), cfg)
        r_fd = run(st, mat, SourceSet(v_p_perp=v_p, fd_time_derivative=True), cfg)
        scale = np.max(np.abs(r_an.final_state.u_perp))
        diff = np.max(np.abs(r_an.final_state.u_perp - r_fd.final_state.u_perp))
        assert diff <= 1e-4 * scale  # centered differencing is O(dt^2)

    def test_elastoplastic_matches_independent_reference(self):
        # v_p = 0, static plastic distortions: compare against a from-scratch
        # FD2 integrator written with explicit rolls
        mat = coupled_1d(c_val=1.0, e_val=0.8, d_val=0.25, fr=0.9)
        n, length = 32, 2 * math.pi
        grid = Grid(n, length)
        x = grid.axes()[0]
        h = grid.spacing[0]
        beta_par_profile = 0.08 * np.sin(x)
        beta_perp_profile = 0.05 * np.cos(2 * x)
        src = SourceSet(
            beta_p_par=lambda xx, t: beta_par_profile[None, None, :],
            beta_p_perp=lambda xx, t: beta_perp_profile[None, None, :])
        dt, steps = 0.01, 300
        cfg = SolverConfig(grid=grid, steps=steps, dt=dt, spatial=Spatial.FD2)
        state = zero_state(mat, grid)
        for _ in range(steps):
            state = step_incompatible(state, mat, src, cfg)

        # independent implementation
        c = mat.c_tensor[0, 0, 0, 0]
        e = mat.e_tensor[0, 0, 0, 0]
        d = mat.d_tensor[0, 0, 0, 0]
        fr = mat.friction[0, 0]
        rho = mat.rho

        def d1(f):
            return (np.roll(f, -1) - np.roll(f, 1)) / (2 * h)

        def d2(f):
            return (np.roll(f, -1) - 2 * f + np.roll(f, 1)) / (h * h)

        u1 = np.zeros(n)
        u2 = np.zeros(n)
        w1 = np.zeros(n)
        w2 = np.zeros(n)
        half = dt / (2 * rho)
        minv = 1.0 / (1.0 + half * fr)
        s1 = -(c * d1(beta_par_profile) + d * d1(beta_perp_profile))
        s2 = -(d * d1(beta_par_profile) + e * d1(beta_perp_profile))
        for _ in range(steps):
            r1 = c * d2(u1) + d * d2(u2) + s1
            r2 = d * d2(u1) + e * d2(u2) + s2
            w1h = w1 + half * r1
            w2h = minv * (w2 + half * r2)
            u1 = u1 + dt * w1h
            u2 = u2 + dt * w2h
            r1 = c * d2(u1) + d * d2(u2) + s1
            r2 = d * d2(u1) + e * d2(u2) + s2
            w1 = w1h + half * r1
            w2 = w2h + half * (r2 - fr * w2h)

        for got, want in ((state.u_par[0], u1), (state.u_perp[0], u2),
                          (state.w_par[0], w1), (state.w_perp[0], w2)):
            assert np.max(np.abs(got - want)) <= 1e-12

    def test_static_plastic_relaxes_to_linear_solve_oracle(self):
        # uncoupled phason sector with a static plastic distortion: the run
        # must settle onto the periodic steady state u'' = d/dx beta_p
        mat = scalar_model(c=1.0, tau_tel=2.0)
        grid = Grid(64, 2 * math.pi)
        x = grid.axes()[0]
        profile = 0.2 * np.tanh(3.0 * np.sin(x))  # smooth step-like pattern
        src = SourceSet(beta_p_perp=lambda xx, t: profile[None, None, :])
        dt = stability_bound(mat, grid, Spatial.SPECTRAL)
        steps = int(round(60.0 / dt))
        st = zero_state(mat, grid)
        res = run(st, mat, src, SolverConfig(grid=grid, steps=steps, dt=dt,
                                             energy_every=0))
        k = 2 * math.pi * np.fft.fftfreq(64, d=grid.spacing[0])
        bhat = np.fft.fft(profile)
        uhat = np.zeros_like(bhat)
        uhat[1:] = -1j * bhat[1:] / k[1:]
        want = np.fft.ifft(uhat).real
        assert np.max(np.abs(res.final_state.u_perp[0] - want)) <= 1e-6
        assert np.max(np.abs(res.final_state.w_perp)) <= 1e-6

    def test_field_equation_residual_second_order(self):
        mat = coupled_1d()
        grid = Grid(64, 2 * math.pi)
        st = single_mode_state(mat, grid, "perp", 0, 2, amplitude=0.3)

        def residual(dt):
            cfg = SolverConfig(grid=grid, steps=1, dt=dt)
            nxt = step_compatible(st, mat, None, cfg)
            return max(field_equation_residual(st, nxt, mat, cfg))

        r1, r2 = residual(0.02), residual(0.01)
        assert r1 / r2 >= 3.0
        assert r2 < 1e-4
