"""Trajectories, action surfaces, and Hamilton-Jacobi residual oracles."""

import numpy as np
import pytest

from raywave.errors import DomainError
from raywave.fields import Grid, RealField
from raywave.mechanics import (
    ActionSurface,
    Trajectory,
    action_along,
    action_surface_fixed_energy,
    action_surface_fixed_time,
    energy_from_action,
    hj_residual_stationary,
    hj_residual_time_dependent,
    integrate_trajectory,
    momentum_from_action,
)


def harmonic(x):
    return 0.5 * x**2


class TestIntegrator:
    def test_free_motion_is_exact(self):
        traj = integrate_trajectory(None, 1.0, 2.0, 1e-2, 500)
        exact = 1.0 + 2.0 * traj.times
        assert np.max(np.abs(traj.positions - exact)) < 1e-12

    def test_harmonic_energy_drift_bounded(self):
        # leapfrog keeps |E - E0|/E0 within (w dt)^2/4; at dt = 1e-3 that is
        # 2.5e-7, and the tighter 1e-8 level needs dt = 1e-4
        traj = integrate_trajectory(harmonic, 1.0, 0.0, 1e-3, 10_000)
        energy = traj.energy(harmonic)
        assert np.max(np.abs(energy - energy[0])) / energy[0] < 1e-6
        traj = integrate_trajectory(harmonic, 1.0, 0.0, 1e-4, 10_000)
        energy = traj.energy(harmonic)
        assert np.max(np.abs(energy - energy[0])) / energy[0] < 1e-8

    def test_linear_potential_parabola(self):
        force = 0.7
        traj = integrate_trajectory(lambda x: -force * x, 0.2, 0.3, 1e-3, 5000)
        exact = 0.2 + 0.3 * traj.times + 0.5 * force * traj.times**2
        assert np.max(np.abs(traj.positions - exact)) < 1e-8

    def test_sampled_potential_force(self):
        g = Grid.line(8.0, 4001, origin=-4.0)
        u = RealField(g, harmonic(g.axis()))
        traj = integrate_trajectory(u, 1.0, 0.0, 1e-3, 2000)
        ref = integrate_trajectory(harmonic, 1.0, 0.0, 1e-3, 2000)
        assert np.max(np.abs(traj.positions - ref.positions)) < 1e-5

    def test_times_must_increase(self):
        with pytest.raises(ValueError):
            Trajectory(np.array([0.0, 0.0]), np.zeros(2), np.zeros(2), 1.0)


class TestActionAlong:
    def test_free_particle_closed_form(self):
        x1, x2, total_t = 0.0, 2.0, 1.5
        traj = integrate_trajectory(None, x1, (x2 - x1) / total_t, 1e-3, 1500)
        assert abs(action_along(traj, None) - (x2 - x1) ** 2 / (2 * total_t)) < 1e-6

    def test_rest_in_zero_potential(self):
        traj = integrate_trajectory(None, 0.5, 0.0, 1e-2, 100)
        assert action_along(traj, None) == 0.0

    def test_rest_in_constant_potential(self):
        u0, total_t = 1.3, 2.0
        traj = integrate_trajectory(lambda x: np.full_like(x, u0), 0.0, 0.0, 1e-2, 200)
        assert abs(action_along(traj, lambda x: np.full_like(x, u0)) + u0 * total_t) < 1e-12


class TestFixedEnergySurface:
    def test_free_beam_linear_action(self):
        g = Grid.line(10.0, 256)
        energy = 2.0
        surf = action_surface_fixed_energy(None, g, 0.0, energy)
        x = g.axis()
        expected = np.sqrt(2.0 * energy) * x
        m = surf.mask
        offs = surf.values[m] - expected[m]
        assert m.sum() > 200
        assert np.max(offs) - np.min(offs) < 1e-8

    def test_free_beam_zero_residual(self):
        g = Grid.line(10.0, 256)
        surf = action_surface_fixed_energy(None, g, 0.0, 2.0)
        res = hj_residual_stationary(surf, None, 2.0)
        assert res.max_abs() < 1e-7

    def test_forbidden_region_masked(self):
        # rising ramp: E = 1 forbids x > 2
        g = Grid.line(4.0, 128)
        surf = action_surface_fixed_energy(lambda x: 0.5 * x, g, 0.0, 1.0)
        x = g.axis()
        assert not surf.mask[x > 2.05].any()
        assert surf.mask[(x > 0.1) & (x < 1.9)].all()

    def test_residual_second_order_in_spacing(self):
        # quadratic-in-x index of the action integrand makes W non-polynomial
        pot = lambda x: 0.4 * np.sin(x)
        errs = {}
        for n in (128, 256):
            g = Grid.line(3.0, n)
            surf = action_surface_fixed_energy(pot, g, 0.0, 2.0, dt=1e-4)
            res = hj_residual_stationary(surf, pot, 2.0)
            errs[n] = res.max_abs()
        assert 3.0 < errs[128] / errs[256] < 5.0

    def test_unreachable_energy_raises(self):
        g = Grid.line(4.0, 64)
        with pytest.raises(DomainError):
            action_surface_fixed_energy(lambda x: np.full_like(x, 5.0), g, 0.0, 1.0)


class TestStationaryResidual:
    def test_scaled_action_plug_in(self):
        # S = 1.1 sqrt(2mE) x gives residual 0.21 * 2mE for U = 0
        g = Grid.line(5.0, 128)
        energy = 1.7
        vals = 1.1 * np.sqrt(2.0 * energy) * g.axis()
        surf = ActionSurface(RealField(g, vals), launch=(0.0,), energy=energy)
        res = hj_residual_stationary(surf, None, energy)
        assert np.allclose(res.values[res.mask], 0.21 * 2.0 * energy, atol=1e-9)

    def test_zero_action_residual(self):
        g = Grid.line(5.0, 64)
        surf = ActionSurface(RealField(g, np.zeros(64)), launch=(0.0,), energy=1.0)
        res = hj_residual_stationary(surf, None, 1.0)
        assert np.allclose(res.values, -2.0, atol=1e-12)


class TestTimeDependentResidual:
    @staticmethod
    def free_phase(g, p, t, mass=1.0):
        return RealField(g, p * g.axis() - p * p * t / (2.0 * mass))

    def test_free_solution_is_exact(self):
        g = Grid.line(6.0, 128)
        p, dt = 1.4, 1e-4
        res = hj_residual_time_dependent(
            self.free_phase(g, p, -dt), self.free_phase(g, p, 0.0),
            self.free_phase(g, p, dt), dt, None)
        assert res.max_abs() < 1e-10

    def test_constant_potential_offsets_residual(self):
        g = Grid.line(6.0, 128)
        p, dt, u0 = 1.4, 1e-4, 0.8
        res = hj_residual_time_dependent(
            self.free_phase(g, p, -dt), self.free_phase(g, p, 0.0),
            self.free_phase(g, p, dt), dt, lambda x: np.full_like(x, u0))
        assert np.allclose(res.values[res.mask], u0, atol=1e-10)

    def test_linear_potential_solution(self):
        # U = -F x; S = (p0 + F t) x - int (p0 + F tau)^2 / 2m dtau solves it
        g = Grid.line(6.0, 128)
        p0, force, mass, dt = 0.6, 0.9, 1.0, 1e-4

        def phase(t):
            kinetic = (p0**2 * t + p0 * force * t**2 + force**2 * t**3 / 3.0) / (2 * mass)
            return RealField(g, (p0 + force * t) * g.axis() - kinetic)

        res = hj_residual_time_dependent(phase(-dt), phase(0.0), phase(dt), dt,
                                         lambda x: -force * x, mass)
        assert res.max_abs() < 1e-8


class TestFanSurfaces:
    def test_free_fan_momentum_recovery(self):
        g = Grid.line(4.0, 256, origin=1.0)
        t_arr = 1.0
        surf = action_surface_fixed_time(None, g, 0.0, np.linspace(0.8, 5.5, 60),
                                         t_arr, 1e-3)
        p_field = momentum_from_action(surf)
        x = g.axis()
        m = p_field.valid
        rel = np.abs(p_field.values[m] - x[m] / t_arr) / (x[m] / t_arr)
        assert np.max(rel) < 1e-3

    def test_free_fan_action_profile(self):
        # arrivals from one point at time t carry S = m (x - x0)^2 / 2t
        g = Grid.line(4.0, 256, origin=1.0)
        surf = action_surface_fixed_time(None, g, 0.0, np.linspace(0.8, 5.5, 60),
                                         1.0, 1e-3)
        x = g.axis()
        m = surf.mask
        assert np.max(np.abs(surf.values[m] - x[m] ** 2 / 2.0)) < 1e-5

    def test_harmonic_fan_momentum_profile(self):
        # launches from the origin at t = T/8 arrive with p(x) = m w x
        omega, mass = 1.0, 1.0
        t_arr = np.pi / (4.0 * omega)
        g = Grid.line(2.0, 256, origin=0.3)
        surf = action_surface_fixed_time(harmonic, g, 0.0,
                                         np.linspace(0.3, 4.2, 80), t_arr, 2e-4, mass)
        p_field = momentum_from_action(surf)
        x = g.axis()
        m = p_field.valid & (x > 0.4)
        rel = np.abs(p_field.values[m] - mass * omega * x[m]) / (mass * omega * x[m])
        assert np.max(rel) < 1e-2

    def test_energy_from_action_static_surface(self):
        g = Grid.line(2.0, 64)
        s = RealField(g, 3.0 * g.axis())
        e = energy_from_action(s, s, s, 1e-3)
        assert np.allclose(e.values, 0.0)

    def test_energy_from_action_free_fan(self):
        g = Grid.line(4.0, 128, origin=1.0)
        vs = np.linspace(0.8, 5.5, 60)
        dt_s = 1e-3
        surfs = [action_surface_fixed_time(None, g, 0.0, vs, t, 1e-4)
                 for t in (1.0 - dt_s, 1.0, 1.0 + dt_s)]
        e = energy_from_action(*surfs, dt_s)
        x = g.axis()
        m = e.valid
        expected = 0.5 * (x[m] / 1.0) ** 2  # E = p^2/2m with p = m x / t
        assert np.max(np.abs(e.values[m] - expected) / expected) < 2e-2

    def test_fan_residual_second_order(self):
        # free fan S(x, t) = m (x - x0)^2 / 2t: halving the grid spacing and
        # the snapshot spacing together must cut the residual about 4x
        vs = np.linspace(0.8, 5.5, 200)
        errs = {}
        for n, dt_s in ((128, 4e-3), (256, 2e-3)):
            g = Grid.line(4.0, n, origin=1.0)
            surfs = [action_surface_fixed_time(None, g, 0.0, vs, t, 1e-4)
                     for t in (1.0 - dt_s, 1.0, 1.0 + dt_s)]
            res = hj_residual_time_dependent(surfs[0].field, surfs[1].field,
                                             surfs[2].field, dt_s, None)
            errs[n] = res.max_abs()
        assert 3.2 < errs[128] / errs[256] < 4.8
