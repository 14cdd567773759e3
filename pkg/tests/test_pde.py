"""Density-solver checks against closed forms and independent integrators."""
import io
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from planarcoag.model import (
    MassFunctions,
    SmoothBump,
    beta,
    beta_table,
    log_scale,
    monodisperse,
    sample_initial_configuration,
)
from planarcoag.pde import (
    MassDensityField,
    PdeConfig,
    gain_term,
    homogeneous_field,
    load_field,
    loss_term,
    planar_field,
    save_field,
    solve,
    step_diffusion,
    step_reaction,
    weak_error,
)
from planarcoag.simulation import empirical_measure


def constant_beta_functions(b):
    """Mass functions whose macroscopic rate table is exactly constant b."""
    # invert beta = 2 pi D a / (2 pi D + a) with D = 1 (d = 1/2)
    a = 2 * math.pi * b / (2 * math.pi - b)
    return MassFunctions.homogeneous(alpha_value=a, d_value=0.5)


def smoluchowski_analytic(b, c, t, n):
    """Monodisperse constant-kernel solution f_n(t) = c (bct)^(n-1)/(1+bct)^(n+1)."""
    x = b * c * t
    return c * x ** (n - 1) / (1 + x) ** (n + 1)


class TestReactionTerms:
    def setup_method(self):
        self.mf = constant_beta_functions(1.0)
        self.tab = beta_table(self.mf, 8)

    def test_gain_empty_for_monomers(self):
        f = homogeneous_field([2.0], 8)
        assert gain_term(f, 1, self.tab) == pytest.approx(0.0)

    def test_gain_pair_term(self):
        f = homogeneous_field([3.0], 8)
        b11 = beta(1, 1, self.mf)
        assert gain_term(f, 2, self.tab) == pytest.approx(b11 * 9.0, rel=1e-13)

    def test_gain_symmetric_pairing(self):
        f = homogeneous_field([1.0, 2.0, 3.0, 4.0], 8)
        got = gain_term(f, 5, self.tab)
        b = beta(1, 1, self.mf)
        # (1,4), (2,3), (3,2), (4,1) with constant beta
        assert got == pytest.approx(b * (1 * 4 + 2 * 3 + 3 * 2 + 4 * 1), rel=1e-13)

    def test_loss_zero_and_single_species(self):
        empty = homogeneous_field([0.0], 8)
        assert loss_term(empty, 1, self.tab) == pytest.approx(0.0)
        f = homogeneous_field([2.5], 8)
        b = beta(1, 1, self.mf)
        assert loss_term(f, 1, self.tab) == pytest.approx(2 * b * 2.5**2, rel=1e-13)

    def test_reaction_mass_ledger_exact(self):
        # gain - loss conserves total mass once the overflow sink is included
        rng = np.random.default_rng(3)
        vals = rng.uniform(0.0, 1.0, size=12)
        f = homogeneous_field(vals, 12)
        mf = MassFunctions(
            alpha=lambda n, m: 0.2 + 0.01 * n * m,
            d=lambda n: 0.5 / math.sqrt(n),
            gamma=lambda n, m: 0.2 + 0.01 * n * m,
        )
        tab = beta_table(mf, 12)
        before = f.mass_density() + f.overflow_mass
        out = step_reaction(f, 1e-3, tab)
        after = out.mass_density() + out.overflow_mass
        assert after == pytest.approx(before, rel=1e-12)
        assert out.overflow_mass > 0.0

    def test_reaction_identity_for_zero_kernel(self):
        f = homogeneous_field([1.0, 0.5], 4)
        out = step_reaction(f, 0.3, np.zeros((4, 4)))
        assert np.array_equal(out.values, f.values)

    def test_riccati_single_step(self):
        # number density follows dM/dt = -b M^2 for a constant kernel
        b, c = 1.0, 2.0
        tab = np.full((32, 32), b)
        for dt in (1e-2, 5e-3, 2.5e-3):
            out = step_reaction(homogeneous_field([c], 32), dt, tab)
            exact = c / (1 + b * c * dt)
            assert abs(out.values.sum() - exact) < 2.0 * b**2 * c**3 * dt**2

    def test_richardson_consistency(self):
        tab = beta_table(constant_beta_functions(1.0), 16)
        f = homogeneous_field([1.0, 0.3, 0.1], 16)
        dt = 2e-2
        one = step_reaction(f, dt, tab)
        two = step_reaction(step_reaction(f, dt / 2, tab), dt / 2, tab)
        four = step_reaction(
            step_reaction(
                step_reaction(step_reaction(f, dt / 4, tab), dt / 4, tab), dt / 4, tab
            ),
            dt / 4,
            tab,
        )
        d1 = np.abs(one.values - four.values).max()
        d2 = np.abs(two.values - four.values).max()
        assert d2 < 0.62 * d1  # first-order stepping: halving dt roughly halves error

    def test_positivity_under_stiff_rates(self):
        tab = np.full((4, 4), 50.0)
        f = homogeneous_field([5.0, 1.0], 4)
        out = step_reaction(f, 1.0, tab)  # far beyond the naive positivity limit
        assert np.all(out.values >= 0.0)


class TestDiffusion:
    def make_gaussian(self, L=6.0, hx=0.05, sigma=0.8):
        cfg = PdeConfig(L=L, hx=hx, dt=1e-3, m_max=1)
        xs = cfg.cell_centers()
        xx, yy = np.meshgrid(xs, xs)
        vals = np.exp(-(xx**2 + yy**2) / (2 * sigma**2)) / (2 * math.pi * sigma**2)
        return MassDensityField(vals[None], L=L, hx=hx), cfg

    def test_constant_field_is_fixed_point(self):
        for boundary in ("neumann", "periodic"):
            f = MassDensityField(np.full((1, 16, 16), 3.7), L=1.0, hx=0.125)
            out = step_diffusion(f, 1e-3, MassFunctions.homogeneous(1.0), boundary)
            assert np.allclose(out.values, 3.7, rtol=0, atol=1e-14)

    def test_gaussian_variance_growth(self):
        # heat kernel: second moment grows by 2 d dt per coordinate
        field, cfg = self.make_gaussian()
        mf = MassFunctions.homogeneous(alpha_value=0.0, d_value=0.5)
        dt = 1e-3
        out = field.copy()
        steps = 40
        for _ in range(steps):
            out = step_diffusion(out, dt, mf)
        xs = field.cell_centers()
        xx, _ = np.meshgrid(xs, xs)

        def second_moment(f):
            total = f.values[0].sum()
            return float((xx**2 * f.values[0]).sum() / total)

        growth = second_moment(out) - second_moment(field)
        assert growth == pytest.approx(2 * 0.5 * dt * steps, rel=5e-3)

    def test_mass_conserved_each_step(self):
        field, _ = self.make_gaussian(L=3.0, hx=0.1)
        mf = MassFunctions.homogeneous(alpha_value=0.0, d_value=0.5)
        for boundary in ("neumann", "periodic"):
            out = step_diffusion(field, 2e-3, mf, boundary)
            assert out.values.sum() == pytest.approx(field.values.sum(), rel=1e-13)

    def test_cfl_violation_raises(self):
        field, _ = self.make_gaussian(L=1.0, hx=0.1)
        with pytest.raises(ValueError):
            step_diffusion(field, 1.0, MassFunctions.homogeneous(1.0, d_value=0.5))


class TestSolve:
    def test_constant_kernel_family_oracle_first(self):
        # independent high-order ODE integration confirms the closed form,
        # then the production solver is held to it
        b, c, m_max = 1.0, 1.0, 32
        tab = np.full((m_max, m_max), b)

        def rhs(t, f):
            gain = np.zeros_like(f)
            for n in range(2, m_max + 1):
                gain[n - 1] = b * np.sum(f[: n - 1] * f[n - 2 :: -1])
            loss = 2 * b * f * f.sum()
            return gain - loss

        f0 = np.zeros(m_max)
        f0[0] = c
        ref = solve_ivp(rhs, (0.0, 1.0), f0, method="DOP853", rtol=1e-11, atol=1e-13)
        for n in range(1, 9):
            assert ref.y[n - 1, -1] == pytest.approx(
                smoluchowski_analytic(b, c, 1.0, n), rel=1e-8
            )

        cfg = PdeConfig(L=0.0, hx=0.0, dt=2e-5, m_max=m_max, mode="homogeneous")
        mf = constant_beta_functions(b)
        snaps = solve(
            homogeneous_field([c], m_max), cfg, mf, T=2.0, snapshot_times=[1.0, 2.0], beta_tab=tab
        )
        for snap, t in zip(snaps, (1.0, 2.0)):
            for n in range(1, 9):
                got = snap.values[n - 1]
                want = smoluchowski_analytic(b, c, t, n)
                assert abs(got - want) < 1e-4 * want

    def test_zero_diffusivity_planar_matches_homogeneous(self):
        m_max = 8
        mf = MassFunctions(
            alpha=lambda n, m: 2.0,
            d=lambda n: 0.0,
            gamma=lambda n, m: 2.0,
        )
        tab = beta_table(mf, m_max)
        cfg = PdeConfig(L=1.0, hx=0.25, dt=1e-3, m_max=m_max)
        field = MassDensityField(np.full((m_max, 8, 8), 0.0), L=1.0, hx=0.25)
        field.values[0] = 0.7
        planar = solve(field, cfg, mf, T=0.5, snapshot_times=[0.5], beta_tab=tab)[0]
        hcfg = PdeConfig(L=0.0, hx=0.0, dt=1e-3, m_max=m_max, mode="homogeneous")
        homog = solve(homogeneous_field([0.7], m_max), hcfg, mf, T=0.5, snapshot_times=[0.5], beta_tab=tab)[0]
        for n in range(m_max):
            assert np.allclose(planar.values[n], homog.values[n], rtol=1e-12, atol=1e-15)

    def test_zero_kernel_is_pure_heat(self):
        m_max = 2
        mf = MassFunctions.homogeneous(alpha_value=0.0, d_value=0.5)
        cfg = PdeConfig(L=3.0, hx=0.1, dt=2e-3, m_max=m_max)
        xs = cfg.cell_centers()
        xx, yy = np.meshgrid(xs, xs)
        start = MassDensityField(np.zeros((m_max, xs.size, xs.size)), L=3.0, hx=0.1)
        start.values[0] = np.exp(-(xx**2 + yy**2))
        got = solve(start, cfg, mf, T=0.1, snapshot_times=[0.1])[0]
        # the split scheme applies the discrete heat operator in dt/2 slices
        heat = start.copy()
        for _ in range(100):
            heat = step_diffusion(heat, 1e-3, mf)
        assert np.allclose(got.values, heat.values, rtol=1e-12, atol=1e-15)

    def test_grid_refinement_second_order(self):
        # smooth initial data, pure diffusion: halving hx shrinks the error ~4x
        mf = MassFunctions.homogeneous(alpha_value=0.0, d_value=0.5)
        T = 0.05
        sigma = 0.8

        def exact(x, y, t):
            s2 = sigma**2 + 2 * 0.5 * t
            return np.exp(-(x**2 + y**2) / (2 * s2)) / (2 * math.pi * s2)

        errs = []
        for hx in (0.2, 0.1, 0.05):
            cfg = PdeConfig(L=4.0, hx=hx, dt=2.5e-4, m_max=1)
            xs = cfg.cell_centers()
            xx, yy = np.meshgrid(xs, xs)
            f0 = MassDensityField(exact(xx, yy, 0.0)[None], L=4.0, hx=hx)
            got = solve(f0, cfg, mf, T=T, snapshot_times=[T])[0]
            errs.append(np.abs(got.values[0] - exact(xx, yy, T)).max())
        assert errs[0] / errs[1] > 3.0
        assert errs[1] / errs[2] > 3.0

    def test_strang_splitting_second_order(self):
        # isolate the splitting error: sub-flows advance with a fixed micro
        # step for every split period, so only the period length varies
        m_max = 8
        mf = constant_beta_functions(2.0)
        tab = beta_table(mf, m_max)
        L, hx = 2.0, 0.125
        micro = 1.25e-4
        cfg = PdeConfig(L=L, hx=hx, dt=micro, m_max=m_max)
        xs = cfg.cell_centers()
        xx, yy = np.meshgrid(xs, xs)
        f0 = MassDensityField(np.zeros((m_max, xs.size, xs.size)), L=L, hx=hx)
        f0.values[0] = 4.0 * np.exp(-4 * (xx**2 + yy**2))
        T = 0.02

        def strang(period):
            f = f0.copy()
            for _ in range(int(round(T / period))):
                for _ in range(int(round(period / 2 / micro))):
                    f = step_diffusion(f, micro, mf)
                for _ in range(int(round(period / micro))):
                    f = step_reaction(f, micro, tab)
                for _ in range(int(round(period / 2 / micro))):
                    f = step_diffusion(f, micro, mf)
            return f.values

        ref = strang(2.5e-4)
        errs = [np.abs(strang(p) - ref).max() for p in (4e-3, 2e-3, 1e-3)]
        assert errs[0] / errs[1] > 3.0
        assert errs[1] / errs[2] > 3.0


class TestWeakError:
    def test_zero_test_function(self):
        field = MassDensityField(np.ones((1, 8, 8)), L=1.0, hx=0.25)
        cfg = sample_initial_configuration(monodisperse(10.0), 0.05, rng=0)
        em = empirical_measure(cfg, 0.05)
        assert weak_error(em, field, lambda x: np.zeros(len(x)), 1) == 0.0

    def test_single_particle_against_empty_field(self):
        field = MassDensityField(np.zeros((1, 8, 8)), L=1.0, hx=0.25)
        from planarcoag.model import Configuration

        cfg = Configuration(np.array([[0.0, 0.0]]), np.array([1]))
        em = empirical_measure(cfg, 0.01)
        got = weak_error(em, field, lambda x: np.ones(len(x)), 1)
        assert got == pytest.approx(1.0 / log_scale(0.01), rel=1e-13)

    def test_monte_carlo_rate_in_sample_size(self):
        # i.i.d. sampling from h against the same density on the grid: the
        # weak error scales like (Z |log eps|)^(-1/2)
        eps = 1e-3
        density = SmoothBump(radius=1.0)
        cfg_pde = PdeConfig(L=1.5, hx=0.05, dt=1e-3, m_max=1)
        xs = cfg_pde.cell_centers()

        def J(x):
            return np.cos(x[:, 0]) * np.exp(-x[:, 1] ** 2)

        errs = []
        for block, Z in enumerate((1e2, 1e3, 1e4)):
            field = planar_field(monodisperse(Z, density), cfg_pde)
            trials = []
            for seed in range(16):
                sample = sample_initial_configuration(
                    monodisperse(Z, density), eps, rng=1000 * block + seed
                )
                em = empirical_measure(sample, eps)
                trials.append(weak_error(em, field, J, 1))
            errs.append(np.mean(trials) / Z)  # error per unit initial mass
        slope = np.polyfit(np.log([1e2, 1e3, 1e4]), np.log(errs), 1)[0]
        assert -0.65 < slope < -0.35


class TestFieldSerialisation:
    def test_binary_round_trip_planar(self):
        rng = np.random.default_rng(0)
        field = MassDensityField(
            rng.uniform(size=(3, 5, 5)), L=2.0, hx=0.8, time=0.37, overflow_mass=1e-5
        )
        buf = io.BytesIO()
        save_field(field, buf)
        buf.seek(0)
        back = load_field(buf)
        assert np.array_equal(back.values, field.values)
        assert (back.L, back.hx, back.time, back.overflow_mass) == (2.0, 0.8, 0.37, 1e-5)

    def test_binary_round_trip_homogeneous(self):
        field = homogeneous_field([0.1, 0.2, 0.3], 5)
        field.time = 1.25
        buf = io.BytesIO()
        save_field(field, buf)
        buf.seek(0)
        back = load_field(buf)
        assert np.array_equal(back.values, field.values)
        assert not back.planar

    def test_rejects_foreign_bytes(self):
        with pytest.raises(ValueError):
            load_field(io.BytesIO(b"nope" + b"\x00" * 60))
