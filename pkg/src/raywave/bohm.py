"""Trajectories guided by the phase of an evolving complex field.

The velocity law is v = J / |Psi|^2 = (hbar/m) Im(grad Psi / Psi), evaluated
by bilinear interpolation of Re Psi, Im Psi and of their discrete gradients
(interpolating the real and imaginary parts avoids the phase-unwrap
artifacts that plague amplitude/phase interpolation near zeros). Between
consecutive field snapshots the velocity field is interpolated linearly in
time and each particle takes an RK4 step; stages that land in a
near-zero-density region trigger substep halving down to dt/16, after which
the particle is flagged and frozen. An ensemble distributed as |Psi|^2 once
stays so distributed, which the equivariance driver checks against a
same-size resampling baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CFLError, DomainError, NodeRegionError, NormalizationError
from .fields import (
    ComplexField,
    Grid,
    PhysicalConstants,
    RealField,
    density,
    derivative_values,
    interpolate_values,
)
from .measure import bin_density, histogram_weights, tv_distance
from .schrodinger import Propagator, PropagatorConfig

DENSITY_FLOOR_REL = 1e-14


@dataclass
class ParticleEnsemble:
    """Particle positions plus the RNG lineage that created them.

    ``positions`` is (N,) in 1D or (N, 2) in 2D; ``active`` marks particles
    still participating in statistics (False = flagged: left the domain or
    stuck in a node region).
    """

    positions: np.ndarray
    seed: int
    birth_time: float = 0.0
    active: np.ndarray = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.active is None:
            self.active = np.ones(self.positions.shape[0], dtype=bool)

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def active_count(self) -> int:
        return int(np.count_nonzero(self.active))

    def active_positions(self) -> np.ndarray:
        return self.positions[self.active]


def sample_from_density(rho: RealField, count: int, seed: int) -> ParticleEnsemble:
    """Draw ``count`` positions from a sampled density, deterministic per seed.

    1D uses inverse-CDF over the node cells (trapezoidal masses, uniform
    jitter within each cell); 2D picks the row from the x-marginal and the
    column from that row's conditional, which is the same decomposition.
    """
    if count < 1:
        raise ValueError("need at least one sample")
    vals = rho.values
    if np.any(vals < 0.0):
        raise NormalizationError("density has negative values")
    grid = rho.grid
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    if grid.dims == 1:
        xs = _sample_axis_cells(grid, 0, vals * grid.quadrature_weights(), rng,
                                count)
        return ParticleEnsemble(xs, seed)
    mass = vals * grid.quadrature_weights()
    row_mass = mass.sum(axis=1)
    ix = _pick_cells(row_mass, rng, count)
    xs = _jitter_within_cells(grid, 0, ix, rng)
    # conditional column draw within each particle's row
    row_cdf = np.cumsum(mass, axis=1)
    totals = row_cdf[:, -1]
    if np.any(totals[np.unique(ix)] <= 0.0):
        raise NormalizationError("selected row has zero conditional mass")
    u = rng.random(count) * totals[ix]
    iy = np.empty(count, dtype=np.int64)
    for row in np.unique(ix):
        sel = ix == row
        iy[sel] = np.searchsorted(row_cdf[row], u[sel], side="right")
    np.clip(iy, 0, grid.points[1] - 1, out=iy)
    ys = _jitter_within_cells(grid, 1, iy, rng)
    return ParticleEnsemble(np.stack([xs, ys], axis=1), seed)


def _pick_cells(mass: np.ndarray, rng, count: int) -> np.ndarray:
    total = mass.sum()
    if total <= 0.0:
        raise NormalizationError("density integrates to zero")
    cdf = np.cumsum(mass)
    u = rng.random(count) * total
    idx = np.searchsorted(cdf, u, side="right")
    return np.clip(idx, 0, mass.size - 1)


def _jitter_within_cells(grid: Grid, axis: int, idx: np.ndarray, rng) -> np.ndarray:
    """Uniform position within each node's cell (half cells at the edges)."""
    h = grid.spacing[axis]
    lo = grid.origin[axis]
    hi = grid.upper[axis]
    x_node = lo + idx * h
    left = np.maximum(x_node - 0.5 * h, lo)
    right = np.minimum(x_node + 0.5 * h, hi)
    return left + rng.random(idx.size) * (right - left)


def _sample_axis_cells(grid: Grid, axis: int, mass: np.ndarray, rng,
                       count: int) -> np.ndarray:
    idx = _pick_cells(mass, rng, count)
    return _jitter_within_cells(grid, axis, idx, rng)


# ---------------------------------------------------------------------------
# guidance field
# ---------------------------------------------------------------------------

class GuidanceField:
    """Prepared velocity evaluator for one field snapshot."""

    def __init__(self, psi: ComplexField,
                 constants: PhysicalConstants = PhysicalConstants(),
                 floor_rel: float = DENSITY_FLOOR_REL):
        self.grid = psi.grid
        self.constants = constants
        vals = psi.values
        self._re = vals.real
        self._im = vals.imag
        self._grads = [(derivative_values(self._re, self.grid.spacing[k], k),
                        derivative_values(self._im, self.grid.spacing[k], k))
                       for k in range(self.grid.dims)]
        dens = self._re**2 + self._im**2
        self.floor = floor_rel * float(dens.max())

    def velocity(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Velocities and an ok-mask at points (N,) or (N, dims).

        Points outside the domain or below the density floor are not
        evaluated (velocity 0, ok False).
        """
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, self.grid.dims)
        inside = self.grid.contains(flat)
        safe = np.where(inside[:, None], flat,
                        np.asarray(self.grid.origin)[None, :])
        if self.grid.dims == 1:
            safe_pts = safe[:, 0]
        else:
            safe_pts = safe
        re = interpolate_values(self.grid, self._re, safe_pts)
        im = interpolate_values(self.grid, self._im, safe_pts)
        dens = re * re + im * im
        ok = inside & (dens > self.floor)
        scale = self.constants.hbar / self.constants.mass
        vel = np.zeros((flat.shape[0], self.grid.dims))
        good = np.where(ok)[0]
        if good.size:
            sub = safe_pts[good] if self.grid.dims == 1 else safe_pts[good, :]
            for k, (gre, gim) in enumerate(self._grads):
                dre = interpolate_values(self.grid, gre, sub)
                dim = interpolate_values(self.grid, gim, sub)
                # Im(conj(psi) dpsi) = re * d(im) - im * d(re)
                vel[good, k] = scale * (re[good] * dim - im[good] * dre) / dens[good]
        if self.grid.dims == 1:
            return vel[:, 0], ok
        return vel, ok


def guidance_velocity(psi: ComplexField, point,
                      constants: PhysicalConstants = PhysicalConstants(),
                      floor_rel: float = DENSITY_FLOOR_REL) -> np.ndarray:
    """Velocity J/|Psi|^2 at one point; NodeRegionError below the density floor."""
    gf = GuidanceField(psi, constants, floor_rel)
    pts = np.asarray(point, dtype=float).reshape(1, -1) if psi.grid.dims == 2 \
        else np.asarray([point], dtype=float)
    vel, ok = gf.velocity(pts)
    if not ok[0]:
        raise NodeRegionError("guidance undefined: near-zero density at the point")
    return np.atleast_1d(vel[0]) if psi.grid.dims == 2 else np.asarray([float(vel[0])])


class _PairVelocity:
    """Velocity field linearly interpolated in time between two snapshots."""

    def __init__(self, before: GuidanceField, after: GuidanceField):
        self.before = before
        self.after = after

    def __call__(self, points, theta: float):
        v0, ok0 = self.before.velocity(points)
        v1, ok1 = self.after.velocity(points)
        return (1.0 - theta) * v0 + theta * v1, ok0 & ok1


def _rk4_positions(x, dt, vel_fn, t0_theta, dtheta):
    k1, ok1 = vel_fn(x, t0_theta)
    k2, ok2 = vel_fn(x + 0.5 * dt * k1, t0_theta + 0.5 * dtheta)
    k3, ok3 = vel_fn(x + 0.5 * dt * k2, t0_theta + 0.5 * dtheta)
    k4, ok4 = vel_fn(x + dt * k3, t0_theta + dtheta)
    return (x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4),
            ok1 & ok2 & ok3 & ok4, ok1)


def advance_pair(positions: np.ndarray, active: np.ndarray, dt: float,
                 pair: _PairVelocity, max_halvings: int = 4):
    """One guidance step for every active particle between two snapshots.

    Particles whose RK4 stages hit the density floor retry with 2, 4, 8, 16
    substeps; survivors that still fail are deactivated in place. A particle
    whose own position is already below the floor (it sits where the wave
    has been removed or absorbed) is flagged immediately: no substep can
    recover it.
    """
    if not active.any():
        return positions, active
    idx = np.where(active)[0]
    x = positions[idx]
    new_x, ok, ok_here = _rk4_positions(x, dt, pair, 0.0, 1.0)
    retry = np.where(~ok & ok_here)[0]
    dead = ~ok & ~ok_here
    for level in range(1, max_halvings + 1):
        if retry.size == 0:
            break
        n_sub = 2**level
        sub_dt = dt / n_sub
        xs = x[retry]
        good = np.ones(retry.size, dtype=bool)
        for j in range(n_sub):
            theta0 = j / n_sub
            xs_next, ok_sub, _ = _rk4_positions(xs, sub_dt, pair,
                                                theta0, 1.0 / n_sub)
            good &= ok_sub
            xs = np.where(good if xs.ndim == 1 else good[:, None], xs_next, xs)
        resolved = np.where(good)[0]
        new_x[retry[resolved]] = xs[resolved]
        ok[retry[resolved]] = True
        retry = retry[~good]
    positions = positions.copy()
    moved = np.where(ok)[0]
    positions[idx[moved]] = new_x[moved]
    active = active.copy()
    active[idx[retry]] = False  # unresolved node region: freeze and flag
    active[idx[dead]] = False   # wave removed underneath: flag
    return positions, active


@dataclass
class EnsembleHistory:
    """Trajectory record from ``advance_ensemble``."""

    times: np.ndarray
    positions: np.ndarray      # (n_records, N[, 2]) at the recorded strides
    final: ParticleEnsemble
    lost: int = 0              # deactivated during the run


def advance_ensemble(ensemble: ParticleEnsemble, snapshots, dt: float,
                     constants: PhysicalConstants = PhysicalConstants(),
                     record_stride: int = 1) -> EnsembleHistory:
    """March an ensemble through a time-ordered iterable of field snapshots.

    ``snapshots`` yields ComplexField states separated by ``dt`` (the first
    is the state at the ensemble's birth time). Recording happens every
    ``record_stride`` intervals. An empty ensemble passes through untouched.
    """
    it = iter(snapshots)
    try:
        current = next(it)
    except StopIteration:
        raise ValueError("snapshot stream is empty") from None
    positions = np.array(ensemble.positions)
    active = np.array(ensemble.active)
    if ensemble.count == 0:
        return EnsembleHistory(np.zeros(1), positions[None], ensemble, 0)
    gf_now = GuidanceField(current, constants)
    times = [ensemble.birth_time]
    records = [positions.copy()]
    start_active = int(active.sum())
    k = 0
    for nxt in it:
        gf_next = GuidanceField(nxt, constants)
        pair = _PairVelocity(gf_now, gf_next)
        positions, active = advance_pair(positions, active, dt, pair)
        gf_now = gf_next
        k += 1
        if k % record_stride == 0:
            times.append(ensemble.birth_time + k * dt)
            records.append(positions.copy())
    final = ParticleEnsemble(positions, ensemble.seed,
                             ensemble.birth_time + k * dt, active=active)
    return EnsembleHistory(np.asarray(times), np.asarray(records), final,
                           lost=start_active - int(active.sum()))


# ---------------------------------------------------------------------------
# equivariance and the flux-form density oracle
# ---------------------------------------------------------------------------

@dataclass
class EquivarianceReport:
    times: np.ndarray
    tv: np.ndarray
    baseline: np.ndarray
    lost: int

    def passes(self, factor: float = 2.0) -> bool:
        return bool(np.all(self.tv <= factor * self.baseline))


def equivariance_test(psi0: ComplexField, potential, cfg: PropagatorConfig,
                      count: int, bins: int, total_time: float, seed: int,
                      checkpoints: int = 5,
                      baseline_resamples: int = 16) -> EquivarianceReport:
    """Co-evolve wave and ensemble; compare binned positions to binned |Psi|^2.

    At each checkpoint the total-variation distance between the particle
    histogram and the binned density is measured, next to a baseline built
    by drawing ``baseline_resamples`` fresh same-size samples straight from
    |Psi(t)|^2 and averaging their distances (a single draw would make the
    pass/fail criterion itself noisy).
    """
    grid = psi0.grid
    if grid.dims != 1:
        raise DomainError("equivariance driver is 1D")
    n_steps = int(round(total_time / cfg.dt))
    marks = sorted({int(round(i * n_steps / checkpoints))
                    for i in range(1, checkpoints + 1)} | {0})
    edges = np.linspace(grid.origin[0], grid.upper[0], bins + 1)
    ensemble = sample_from_density(density(psi0), count, seed)
    base_seeds = np.random.SeedSequence(seed).spawn(1)[0].spawn(len(marks) * baseline_resamples)

    prop = Propagator(grid, potential, cfg)
    values = np.array(psi0.values)
    gf_now = GuidanceField(psi0, cfg.constants)
    positions = np.array(ensemble.positions)
    active = np.array(ensemble.active)

    times, tvs, bases = [], [], []
    mark_idx = 0

    def measure(step_k):
        dens_vals = values.real**2 + values.imag**2
        q = bin_density(grid, dens_vals, edges)
        p = histogram_weights(positions[active], edges)
        tv = tv_distance(p, q)
        base = 0.0
        for r in range(baseline_resamples):
            ss = base_seeds[len(times) * baseline_resamples + r]
            rng = np.random.default_rng(ss)
            fresh = _sample_axis_cells(grid, 0,
                                       dens_vals * grid.quadrature_weights(),
                                       rng, int(active.sum()))
            base += tv_distance(histogram_weights(fresh, edges), q)
        times.append(step_k * cfg.dt)
        tvs.append(tv)
        bases.append(base / baseline_resamples)

    if marks[mark_idx] == 0:
        measure(0)
        mark_idx += 1
    start_active = int(active.sum())
    for k in range(1, n_steps + 1):
        new_values = prop.step_values(values)
        gf_next = GuidanceField(ComplexField(grid, new_values), cfg.constants)
        positions, active = advance_pair(positions, active, cfg.dt,
                                         _PairVelocity(gf_now, gf_next))
        values = new_values
        gf_now = gf_next
        if mark_idx < len(marks) and k == marks[mark_idx]:
            measure(k)
            mark_idx += 1
    return EquivarianceReport(np.asarray(times), np.asarray(tvs),
                              np.asarray(bases),
                              lost=start_active - int(active.sum()))


def continuity_oracle(rho0: RealField, velocity, dt: float, n_steps: int,
                      boundary: str = "outflow") -> RealField:
    """Donor-cell (first-order upwind) update of a 1D density under a
    prescribed velocity field.

    ``velocity`` is a callable t -> node velocities (array or RealField).
    Monotone and positivity-preserving; raises CFLError when
    max|v| dt / h > 0.9. Serves as the flux-form cross-check for the
    guidance dynamics.
    """
    grid = rho0.grid
    if grid.dims != 1:
        raise DomainError("continuity oracle is 1D")
    if boundary not in ("outflow", "periodic"):
        raise ValueError("boundary must be outflow or periodic")
    h = grid.spacing[0]
    rho = np.array(rho0.values)
    for k in range(n_steps):
        v = velocity(k * dt)
        v = v.values if isinstance(v, RealField) else np.asarray(v, dtype=float)
        if np.max(np.abs(v)) * dt / h > 0.9:
            raise CFLError(f"max|v| dt/h = {np.max(np.abs(v)) * dt / h:.3f} > 0.9")
        if boundary == "periodic":
            v_face = 0.5 * (v + np.roll(v, -1))
            rho_right = np.roll(rho, -1)
            flux = np.where(v_face >= 0.0, v_face * rho, v_face * rho_right)
            rho = rho - (dt / h) * (flux - np.roll(flux, 1))
        else:
            v_face = 0.5 * (v[:-1] + v[1:])
            flux = np.where(v_face >= 0.0, v_face * rho[:-1], v_face * rho[1:])
            # outflow: upwind edge fluxes leave the domain freely
            left_edge = min(v[0], 0.0) * rho[0]
            right_edge = max(v[-1], 0.0) * rho[-1]
            full = np.concatenate([[left_edge], flux, [right_edge]])
            rho = rho - (dt / h) * (full[1:] - full[:-1])
    return RealField(grid, rho)
