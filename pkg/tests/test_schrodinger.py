"""Propagator, current, continuity, and semiclassical-split checks."""

import numpy as np
import pytest

from raywave.errors import LinearSolveError
from raywave.fields import (
    ComplexField,
    Grid,
    PhysicalConstants,
    RealField,
    density,
    gaussian_packet,
    norm_squared_integral,
)
from raywave.schrodinger import (
    AbsorbingLayer,
    NormRecorder,
    PropagatorConfig,
    Propagator,
    SnapshotRecorder,
    _AxisSweep,
    continuity_residual,
    norm_history_check,
    probability_current,
    propagate,
    semiclassical_residuals,
    step,
)


def free_gaussian(x, t, sigma0, k0, hbar=1.0, mass=1.0):
    """Closed-form free spreading Gaussian with carrier k0."""
    a = hbar * t / (2.0 * mass * sigma0**2)
    xc = x - hbar * k0 * t / mass
    norm = (2.0 * np.pi * sigma0**2) ** (-0.25) / np.sqrt(1.0 + 1j * a)
    phase = k0 * x - hbar * k0**2 * t / (2.0 * mass)
    return norm * np.exp(-(xc**2) / (4.0 * sigma0**2 * (1.0 + 1j * a)) + 1j * phase)


def packet_width(psi):
    w = psi.grid.quadrature_weights()
    dens = (psi.values.real**2 + psi.values.imag**2) * w
    dens /= dens.sum()
    x = psi.grid.axis()
    mean = float((dens * x).sum())
    return np.sqrt(float((dens * (x - mean) ** 2).sum()))


class TestCrankNicolson1D:
    def test_harmonic_ground_state_is_stationary(self):
        g = Grid.line(20.0, 256, origin=-10.0)
        x = g.axis()
        psi = ComplexField(g, np.pi**-0.25 * np.exp(-0.5 * x * x) + 0.0j)
        cfg = PropagatorConfig(dt=1e-3)
        after = step(psi, lambda xx: 0.5 * xx**2, cfg)
        assert np.max(np.abs(np.abs(after.values) - np.abs(psi.values))) < 1e-8

    def test_box_mode_phase_advance_matches_cayley_form(self):
        # sin(n pi x / L) is an exact eigenvector of the hard-wall stencil
        # with E = hbar^2 k_eff^2 / 2m, k_eff^2 = 2(1 - cos k h)/h^2, so one
        # step multiplies it by exactly (1 - i a E)/(1 + i a E)
        n_mode, length, pts = 3, 10.0, 256
        g = Grid.line(length, pts)
        x = g.axis()
        k = n_mode * np.pi / length
        psi = ComplexField(g, np.sin(k * x) + 0.0j)
        dt = 1e-3
        after = step(psi, None, PropagatorConfig(dt=dt))
        h = g.spacing[0]
        e_disc = (2.0 - 2.0 * np.cos(k * h)) / (2.0 * h * h)
        expected = (1.0 - 0.5j * dt * e_disc) / (1.0 + 0.5j * dt * e_disc)
        assert np.max(np.abs(after.values - expected * psi.values)) < 1e-12
        # and the Cayley phase agrees with -E dt/hbar to O((E dt)^3)
        assert abs(np.angle(expected) + e_disc * dt) < (e_disc * dt) ** 3

    def test_zero_field_stays_zero(self):
        g = Grid.line(10.0, 64)
        psi = ComplexField(g, np.zeros(64, dtype=complex))
        after = step(psi, None, PropagatorConfig(dt=1e-3))
        assert np.all(after.values == 0.0)

    def test_norm_conserved_over_thousand_steps(self):
        g = Grid.line(24.0, 256, origin=-12.0)
        psi = gaussian_packet(g, -2.0, 1.0, 1.5)
        rec = NormRecorder(g)
        propagate(psi, lambda x: 0.5 * x**2, PropagatorConfig(dt=1e-3), 1000, [rec])
        report = norm_history_check(rec.norms)
        assert report.passed
        assert report.max_drift < 1e-10

    def test_time_reversal_round_trip(self):
        g = Grid.line(24.0, 256, origin=-12.0)
        psi = gaussian_packet(g, -2.0, 1.0, 2.0)
        u = lambda x: 0.25 * x**2
        fwd = propagate(psi, u, PropagatorConfig(dt=1e-3), 200)
        back = propagate(fwd, u, PropagatorConfig(dt=-1e-3), 200)
        assert np.max(np.abs(back.values - psi.values)) < 1e-8

    def test_free_gaussian_spreading_width(self):
        sigma0 = 1.0
        g = Grid.line(48.0, 768, origin=-24.0)
        psi = gaussian_packet(g, 0.0, sigma0, 0.0)
        total_t = 2.0 * np.sqrt(3.0)  # sigma doubles
        n_steps = 1732
        final = propagate(psi, None, PropagatorConfig(dt=total_t / n_steps), n_steps)
        expected = sigma0 * np.sqrt(1.0 + (total_t / (2.0 * sigma0**2)) ** 2)
        assert abs(packet_width(final) - expected) / expected < 5e-3
        edge = max(abs(final.values[0]), abs(final.values[-1]))
        assert edge < 1e-6 * np.max(np.abs(final.values))

    def test_absorbing_layer_eats_outgoing_packet(self):
        g = Grid.line(40.0, 512)
        psi = gaussian_packet(g, 14.0, 1.5, 5.0)
        cfg = PropagatorConfig(dt=2e-3, boundary=AbsorbingLayer(width=128, strength=6.0))
        rec = NormRecorder(g, stride=10)
        propagate(psi, None, cfg, 5000, [rec])
        report = norm_history_check(rec.norms, boundary="absorbing")
        assert report.non_increasing
        assert rec.norms[-1] < 0.01

    def test_zero_step_history(self):
        report = norm_history_check([1.0])
        assert report.passed and report.max_drift == 0.0 and report.steps == 0


class TestADI2D:
    def setup_method(self):
        self.g = Grid.rect((24.0, 24.0), (96, 96), origin=(-12.0, -12.0))
        self.psi = gaussian_packet(self.g, (0.0, 0.0), 1.2, (1.0, 0.0))
        self.fine = Grid.rect((24.0, 24.0), (192, 192), origin=(-12.0, -12.0))

    def test_norm_conservation(self):
        rec = NormRecorder(self.g)
        propagate(self.psi, None, PropagatorConfig(dt=2e-3), 300, [rec])
        assert np.max(np.abs(rec.norms - rec.norms[0])) < 1e-9

    def test_time_reversal(self):
        fwd = propagate(self.psi, None, PropagatorConfig(dt=2e-3), 150)
        back = propagate(fwd, None, PropagatorConfig(dt=-2e-3), 150)
        assert np.max(np.abs(back.values - self.psi.values)) < 1e-8

    def test_isotropic_spreading(self):
        sigma0 = 1.2
        total_t = 2.0
        psi = gaussian_packet(self.fine, (0.0, 0.0), sigma0, (0.0, 0.0))
        final = propagate(psi, None, PropagatorConfig(dt=2e-3), 1000)
        expected = sigma0 * np.sqrt(1.0 + (total_t / (2.0 * sigma0**2)) ** 2)
        w = self.fine.quadrature_weights()
        dens = (final.values.real**2 + final.values.imag**2) * w
        dens /= dens.sum()
        xs, ys = self.fine.meshes()
        for mesh in (xs, ys):
            mean = float((dens * mesh).sum())
            sig = np.sqrt(float((dens * (mesh - mean) ** 2).sum()))
            assert abs(sig - expected) / expected < 5e-3

    def test_adi_with_harmonic_potential_bounded_norm(self):
        # the axis-split potential makes the plain norm oscillate at the
        # (dt/2)^2 <Hy^2> scale instead of holding to roundoff; the
        # oscillation is bounded (a modified norm is conserved exactly)
        rec = NormRecorder(self.g)
        propagate(self.psi, lambda x, y: 0.5 * (x**2 + y**2),
                  PropagatorConfig(dt=2e-3), 200, [rec])
        assert np.max(np.abs(rec.norms - rec.norms[0])) < 1e-6


class TestCurrentAndContinuity:
    def test_real_field_carries_no_current(self):
        g = Grid.line(20.0, 128, origin=-10.0)
        psi = gaussian_packet(g, 0.0, 1.0, 0.0)
        (j,) = probability_current(psi)
        assert np.max(np.abs(j.values)) < 1e-12

    def test_plane_wave_current(self):
        k = 2.0
        g = Grid.line(10.0, 512)
        x = g.axis()
        psi = ComplexField(g, np.exp(1j * k * x))
        (j,) = probability_current(psi)
        dens = density(psi).values
        h = g.spacing[0]
        tol = k**3 * h**2 / 6.0 + 1e-12
        assert np.max(np.abs(j.values[1:-1] - k * dens[1:-1])) < tol

    def test_current_scales_with_hbar_over_mass(self):
        k = 2.0
        g = Grid.line(10.0, 128)
        psi = ComplexField(g, np.exp(1j * k * g.axis()))
        consts = PhysicalConstants(hbar=2.0, mass=4.0)
        (j,) = probability_current(psi, consts)
        (j_unit,) = probability_current(psi)
        assert np.allclose(j.values, 0.5 * j_unit.values)

    def test_stationary_state_continuity(self):
        g = Grid.line(20.0, 512, origin=-10.0)
        x = g.axis()
        vals = np.pi**-0.25 * np.exp(-0.5 * x * x) + 0.0j
        psi = ComplexField(g, vals)
        res = continuity_residual(psi, psi, psi, 1e-3)
        assert np.max(np.abs(res.values)) < 1e-12

    def test_zero_field_continuity(self):
        g = Grid.line(10.0, 64)
        z = ComplexField(g, np.zeros(64, dtype=complex))
        res = continuity_residual(z, z, z, 1e-3)
        assert np.all(res.values == 0.0)

    def test_moving_gaussian_second_order(self):
        t0 = 0.3
        errs = {}
        for n, dt in ((256, 2e-3), (512, 1e-3)):
            g = Grid.line(24.0, n, origin=-12.0)
            x = g.axis()
            snaps = [ComplexField(g, free_gaussian(x, t0 + s * dt, 1.0, 1.5))
                     for s in (-1, 0, 1)]
            res = continuity_residual(*snaps, dt)
            errs[n] = np.max(np.abs(res.values[1:-1]))
        assert 3.2 < errs[256] / errs[512] < 4.8


class TestSemiclassicalSplit:
    def test_exact_free_solution_zeroes_everything(self):
        g = Grid.line(10.0, 256)
        p = 1.7
        amp = RealField(g, np.ones(256))
        phase = RealField(g, p * g.axis())
        rate = RealField(g, np.full(256, -p * p / 2.0))
        out = semiclassical_residuals(amp, phase, None, phase_rate=rate)
        totals = out.max_abs()
        assert totals["hj"] < 1e-10
        assert totals["quantum"] < 1e-10
        assert totals["transport"] < 1e-10

    def test_quantum_term_scales_as_hbar_squared(self):
        g = Grid.line(4.0, 256)
        x = g.axis()
        amp = RealField(g, 1.0 + 0.2 * np.exp(-((x - 2.0) ** 2)))
        phase = RealField(g, 50.0 * np.sin(0.7 * x))
        out_1 = semiclassical_residuals(amp, phase, None,
                                        PhysicalConstants(hbar=1.0))
        out_h = semiclassical_residuals(amp, phase, None,
                                        PhysicalConstants(hbar=0.5))
        ratio = out_1.max_abs()["quantum"] / out_h.max_abs()["quantum"]
        assert abs(ratio - 4.0) < 0.05 * 4.0
        assert np.allclose(out_1.hj.values, out_h.hj.values)

    def test_quantum_term_matches_curvature_formula(self):
        # A = exp(-x^2/2): lap A / A = x^2 - 1 analytically
        g = Grid.line(6.0, 512, origin=-3.0)
        x = g.axis()
        amp = RealField(g, np.exp(-0.5 * x * x))
        phase = RealField(g, np.zeros_like(x))
        out = semiclassical_residuals(amp, phase, None)
        exact = -0.5 * (x * x - 1.0)
        h = g.spacing[0]
        assert np.max(np.abs(out.quantum.values[1:-1] - exact[1:-1])) < 20.0 * h * h

    def test_large_action_dominance(self):
        # S/hbar ~ 1e3 with O(1) amplitude: the dropped term is < 1e-4
        # of the classical scale
        g = Grid.line(4.0, 512)
        x = g.axis()
        amp = RealField(g, 1.0 + 0.2 * np.sin(1.3 * x))
        phase = RealField(g, 1e3 * (x + 0.1 * np.sin(x)))
        out = semiclassical_residuals(amp, phase, None)
        hj_scale = np.max(np.abs(0.5 * (1e3 * (1 + 0.1 * np.cos(x))) ** 2))
        assert out.max_abs()["quantum"] / hj_scale < 1e-4

    def test_transport_term_for_uniform_flow(self):
        # constant A and linear S advect nothing: transport residual 0
        g = Grid.line(4.0, 128)
        amp = RealField(g, np.full(128, 2.0))
        phase = RealField(g, 3.0 * g.axis())
        out = semiclassical_residuals(amp, phase, None)
        assert out.max_abs()["transport"] < 1e-10


class TestSolverGuards:
    def test_singular_pivot_raises(self):
        # an effective potential of i/alpha - 2 kappa makes the implicit
        # diagonal 1 + i alpha (2 kappa + u) vanish identically
        alpha, spacing = 0.5, 0.1
        kappa = 1.0 / (2.0 * spacing**2)
        u = np.full(8, 1j / alpha - 2.0 * kappa)
        with pytest.raises(LinearSolveError):
            _AxisSweep(0, spacing, u, alpha, PhysicalConstants())

    def test_observer_strides(self):
        g = Grid.line(32.0, 128, origin=-16.0)
        psi = gaussian_packet(g, 0.0, 1.5, 0.0)
        snaps = SnapshotRecorder(stride=5)
        propagate(psi, None, PropagatorConfig(dt=1e-3), 10, [snaps])
        assert [s[0] for s in snaps.snapshots] == [0, 5, 10]

    def test_step_requires_matching_grid(self):
        g1 = Grid.line(10.0, 64)
        g2 = Grid.line(12.0, 64)
        prop = Propagator(g1, None, PropagatorConfig(dt=1e-3))
        psi = ComplexField(g2, np.zeros(64, dtype=complex))
        from raywave.errors import FieldShapeError
        with pytest.raises(FieldShapeError):
            prop.step(psi)
