"""Virtual beam-and-screen experiments on a 2D grid.

Three canonical runs: a free beam spot, single-slit diffraction, and the
double slit, each detectable in two modes:

* flash sampling: positions drawn from the normalized time-integrated
  forward flux through the screen line (the statistical detection rule);
* guided trajectories: an ensemble distributed as the initial density rides
  the wave, and its first crossings of the screen line are recorded.

The barrier is realized as a projection applied on the barrier cells every
step ("wall" mode): the wave is removed on the blocked cells and passes the
slit openings untouched, so each slice of the incident train diffracts as
it arrives and the downstream pattern is stationary. Applying a single
transmission mask to the whole field at peak arrival ("pulse" mode, also
provided) stamps one diffraction birth time on the entire train; the
pattern then keeps expanding while the train crosses the screen, which
blurs the outer minima by about (packet length / flight distance) of a
fringe. The wall mode is the default for exactly that reason.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .errors import ConfigError, NoTransmissionError
from .fields import (
    ComplexField,
    Grid,
    PhysicalConstants,
    RealField,
    density,
    gaussian_packet,
    norm_squared_integral,
)
from .bohm import (
    GuidanceField,
    _PairVelocity,
    advance_pair,
    sample_from_density,
)
from .measure import histogram_weights, tv_distance
from .schrodinger import AbsorbingLayer, Propagator, PropagatorConfig


@dataclass(frozen=True)
class Slit:
    center: float
    width: float


@dataclass(frozen=True)
class ApparatusSpec:
    """Complete description of one beam-and-screen run.

    The domain is [0, extents_x] by [-extents_y/2, +extents_y/2]; the beam
    travels along +x with carrier ``k0`` from a Gaussian packet of per-axis
    widths ``sigma``. ``barrier_x`` of None means no barrier (free beam).
    """

    extents: tuple[float, float]
    points: tuple[int, int]
    packet_center_x: float
    sigma: tuple[float, float]
    k0: float
    screen_x: float
    run_time: float
    dt: float
    barrier_x: float | None = None     # exit face of the barrier
    slits: tuple[Slit, ...] = ()
    barrier_cells: int = 4             # thin wall; hard-mask decoupling stops hops
    mask_mode: str = "wall"            # "wall" (per-step) or "pulse" (one shot)
    mode: str = "copenhagen"           # "copenhagen" | "bohm" | "both"
    shots: int = 10_000
    bins: int = 50
    absorber_width: tuple[int, int] = (128, 32)
    absorber_strength: float = 6.0
    snapshot_stride: int = 200
    particle_stride: int = 2           # wave steps per trajectory step
    constants: PhysicalConstants = PhysicalConstants()

    def __post_init__(self):
        if self.mode not in ("copenhagen", "bohm", "both"):
            raise ConfigError(f"unknown detection mode {self.mode!r}")
        if self.mask_mode not in ("wall", "pulse"):
            raise ConfigError(f"unknown mask mode {self.mask_mode!r}")
        if self.shots < 1:
            raise ConfigError("need at least one shot")
        dx = self.extents[0] / (self.points[0] - 1)
        dy = self.extents[1] / (self.points[1] - 1)
        if self.screen_x >= self.extents[0] - self.absorber_width[0] * dx:
            raise ConfigError("screen sits inside the outflow absorber")
        if self.barrier_x is not None:
            entrance = self.barrier_x - self.barrier_cells * dx
            if not (0.0 < entrance and self.barrier_x < self.screen_x):
                raise ConfigError("need 0 < barrier < screen inside the domain")
            for slit in self.slits:
                if slit.width < 4.0 * dy:
                    raise ConfigError(f"slit width {slit.width} below 4 dy = {4 * dy}")
        elif not 0.0 < self.screen_x:
            raise ConfigError("screen must be interior")
        if self.k0 * self.sigma[0] < 5.0:
            warnings.warn("beam is poorly collimated: k0 sigma_x below 5",
                          stacklevel=2)

    def grid(self) -> Grid:
        return Grid.rect(self.extents, self.points,
                         origin=(0.0, -0.5 * self.extents[1]))

    def y_grid(self) -> Grid:
        return Grid.line(self.extents[1], self.points[1],
                         origin=-0.5 * self.extents[1])

    @property
    def wavelength(self) -> float:
        return 2.0 * np.pi / self.k0

    @property
    def flight_distance(self) -> float:
        if self.barrier_x is None:
            return self.screen_x - self.packet_center_x
        return self.screen_x - self.barrier_x

    def resolved(self) -> dict:
        """Flat key/value view of every geometry and numerics parameter."""
        out = {
            "extent_x": self.extents[0], "extent_y": self.extents[1],
            "points_x": self.points[0], "points_y": self.points[1],
            "packet_center_x": self.packet_center_x,
            "sigma_x": self.sigma[0], "sigma_y": self.sigma[1],
            "k0": self.k0, "wavelength": self.wavelength,
            "barrier_x": self.barrier_x if self.barrier_x is not None else "none",
            "slits": ";".join(f"{s.center}:{s.width}" for s in self.slits) or "none",
            "barrier_cells": self.barrier_cells, "mask_mode": self.mask_mode,
            "screen_x": self.screen_x, "run_time": self.run_time, "dt": self.dt,
            "mode": self.mode, "shots": self.shots, "bins": self.bins,
            "absorber_width_x": self.absorber_width[0],
            "absorber_width_y": self.absorber_width[1],
            "absorber_strength": self.absorber_strength,
            "snapshot_stride": self.snapshot_stride,
            "hbar": self.constants.hbar, "mass": self.constants.mass,
        }
        return out


def experiment_spec(kind: int, **overrides) -> ApparatusSpec:
    """Tuned default geometry for experiment 1 (free beam), 2 (single slit),
    or 3 (double slit). Keyword overrides replace any field.

    Shared scale: wavelength 1, carrier 2 pi, collimation k0 sigma_x = 20,
    flight distance 40 wavelengths from the barrier exit to the screen.
    The double slit runs at 20 points per wavelength so that lattice
    group-velocity deficits keep the fringe geometry within a few percent.
    """
    wavelength = 1.0
    k0 = 2.0 * np.pi / wavelength
    if kind == 1:
        spec = ApparatusSpec(extents=(90.0, 87.0), points=(1201, 581),
                             packet_center_x=27.5, sigma=(20.0 / k0, 5.0),
                             k0=k0, screen_x=81.5, run_time=12.5, dt=0.01,
                             absorber_width=(96, 32))
    elif kind == 2:
        spec = ApparatusSpec(extents=(90.0, 87.0), points=(1201, 581),
                             packet_center_x=27.5, sigma=(20.0 / k0, 5.0),
                             k0=k0, screen_x=81.5, run_time=12.5, dt=0.01,
                             absorber_width=(96, 32),
                             barrier_x=41.5, slits=(Slit(0.0, 2.0),))
    elif kind == 3:
        # slit centers and widths sit exactly on grid cells (dy = 0.15), so
        # the effective separation equals the nominal one; k0 sigma_x = 24
        # keeps the wavelength spread from filling the outer dark fringes
        spec = ApparatusSpec(extents=(93.6, 87.0), points=(1873, 581),
                             packet_center_x=33.0, sigma=(24.0 / k0, 5.0),
                             k0=k0, screen_x=86.5, run_time=12.6, dt=0.0075,
                             absorber_width=(128, 32),
                             barrier_x=46.5,
                             slits=(Slit(-3.0, 0.6), Slit(3.0, 0.6)))
    else:
        raise ConfigError(f"experiment kind must be 1, 2, or 3, got {kind}")
    return replace(spec, **overrides) if overrides else spec


@dataclass(frozen=True)
class ScreenHistogram:
    """Binned detection record along the screen line."""

    edges: np.ndarray
    counts: np.ndarray
    total: int
    mode: str

    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


@dataclass
class ExperimentResult:
    spec: ApparatusSpec
    flux_profile: RealField            # normalized P(y) on the y grid
    back_flow_fraction: float
    discarded_fraction: float          # removed by the barrier
    flash_histogram: ScreenHistogram | None = None
    flash_positions: np.ndarray | None = None
    crossing_histogram: ScreenHistogram | None = None
    crossing_positions: np.ndarray | None = None
    lost_particles: int = 0
    blocked_particles: int = 0
    norm_rows: list = dc_field(default_factory=list)
    snapshots: list = dc_field(default_factory=list)

    @property
    def histogram(self) -> ScreenHistogram:
        if self.spec.mode == "bohm":
            return self.crossing_histogram
        return self.flash_histogram


def slit_transmission(y_axis: np.ndarray, slits) -> np.ndarray:
    """Boolean transmission profile along y (True inside an opening)."""
    open_mask = np.zeros(y_axis.size, dtype=bool)
    for slit in slits:
        open_mask |= np.abs(y_axis - slit.center) <= 0.5 * slit.width + 1e-12
    return open_mask


def apply_mask(psi: ComplexField, slits) -> tuple[ComplexField, float]:
    """One-shot transmission mask over the whole field, then renormalize.

    The mask is a function of y only (1 inside slit openings, 0 elsewhere).
    Returns the renormalized field and the discarded probability fraction;
    raises NoTransmissionError when the openings transmit less than 1e-6.
    """
    grid = psi.grid
    y_axis = grid.axis(1) if grid.dims == 2 else grid.axis(0)
    open_mask = slit_transmission(y_axis, slits)
    masked = psi.values * (open_mask[None, :] if grid.dims == 2 else open_mask)
    before = norm_squared_integral(psi)
    after = norm_squared_integral(ComplexField(grid, masked))
    if after < 1e-6 * before:
        raise NoTransmissionError(
            f"transmitted fraction {after / before:.2e} below 1e-6")
    out = ComplexField(grid, masked / np.sqrt(after))
    return out, float(1.0 - after / before)


def _flux_row(values: np.ndarray, ix: int, dx: float, constants) -> np.ndarray:
    """Forward probability flux through grid column ix."""
    dpsi = (values[ix + 1, :] - values[ix - 1, :]) / (2.0 * dx)
    return (constants.hbar / constants.mass) * np.imag(
        np.conj(values[ix, :]) * dpsi)


def screen_flux_profile(snapshots, dt: float, screen_x: float,
                        constants: PhysicalConstants = PhysicalConstants(),
                        back_flow_warn: float = 0.05):
    """Time-integrated forward flux through the screen line.

    ``snapshots`` is an iterable of 2D ComplexField states separated by dt.
    Returns (profile RealField on the y grid, back_flow_fraction); the
    profile is the positive part of the accumulated flux normalized to unit
    integral. A back-flow fraction above ``back_flow_warn`` triggers a
    geometry warning.
    """
    acc = None
    neg = 0.0
    pos = 0.0
    grid = None
    for psi in snapshots:
        if grid is None:
            grid = psi.grid
            ix = int(round((screen_x - grid.origin[0]) / grid.spacing[0]))
            ix = min(max(ix, 1), grid.points[0] - 2)
            acc = np.zeros(grid.points[1])
        row = _flux_row(psi.values, ix, grid.spacing[0], constants) * dt
        acc += row
        pos += float(row[row > 0.0].sum())
        neg += float(-row[row < 0.0].sum())
    if acc is None:
        raise ValueError("empty snapshot stream")
    back_flow = neg / (pos + neg) if pos + neg > 0.0 else 0.0
    if back_flow > back_flow_warn:
        warnings.warn(f"back-flow fraction {back_flow:.3f} at the screen",
                      stacklevel=2)
    y_grid = Grid.line(grid.extents[1], grid.points[1], origin=grid.origin[1])
    clipped = np.clip(acc, 0.0, None)
    w = y_grid.quadrature_weights()
    total = float((clipped * w).sum())
    if total <= 0.0:
        raise NoTransmissionError("no forward flux reached the screen")
    return RealField(y_grid, clipped / total), back_flow


def run_experiment(spec: ApparatusSpec, seed: int) -> ExperimentResult:
    """Propagate the apparatus once and detect per ``spec.mode``.

    Deterministic for a fixed (spec, seed): flash sampling and the initial
    ensemble draw use independent streams spawned from the seed.
    """
    grid = spec.grid()
    consts = spec.constants
    psi = gaussian_packet(grid, (spec.packet_center_x, 0.0), spec.sigma,
                          (spec.k0, 0.0))
    cfg = PropagatorConfig(dt=spec.dt, constants=consts,
                           boundary=AbsorbingLayer(spec.absorber_width,
                                                   spec.absorber_strength))

    dx, dy = grid.spacing
    ix_screen = int(round((spec.screen_x - grid.origin[0]) / dx))
    weights = grid.quadrature_weights()

    barrier_cols = None
    blocked_rows = None
    hard_mask = None
    if spec.barrier_x is not None:
        # barrier body sits upstream of its exit face at barrier_x, so the
        # slit-to-screen flight distance is exactly screen_x - barrier_x
        bx = int(round((spec.barrier_x - grid.origin[0]) / dx))
        barrier_cols = slice(max(bx - spec.barrier_cells, 1), bx)
        open_mask = slit_transmission(grid.axis(1), spec.slits)
        if spec.slits and not open_mask.any():
            raise ConfigError("slit set opens no grid cell")
        blocked_rows = ~open_mask
        if spec.mask_mode == "wall":
            hard_mask = np.zeros(grid.shape, dtype=bool)
            hard_mask[barrier_cols, :] = blocked_rows[None, :]
    prop = Propagator(grid, None, cfg, hard_mask=hard_mask)

    do_bohm = spec.mode in ("bohm", "both")
    seq = np.random.SeedSequence(seed)
    flash_seed, ensemble_seed = seq.spawn(2)

    positions = active = None
    gf_now = None
    crossings: list[np.ndarray] = []
    blocked_particles = 0
    if do_bohm:
        ens = sample_from_density(density(psi), spec.shots,
                                  seed=int(ensemble_seed.generate_state(1)[0]))
        positions = np.array(ens.positions)
        active = np.array(ens.active)
        gf_now = GuidanceField(psi, consts)

    values = np.array(psi.values)
    n_steps = int(round(spec.run_time / spec.dt))
    acc = np.zeros(grid.points[1])
    pos_flux = neg_flux = 0.0
    discarded = 0.0
    pulse_applied = False
    norm_rows = []
    snapshots = []
    x_marginal_axis = grid.axis(0)

    def mask_now(vals):
        # drop the blocked barrier cells in place, tracking removed mass
        nonlocal discarded
        block = np.ix_(range(*barrier_cols.indices(grid.points[0])),
                       np.where(blocked_rows)[0])
        removed = float(((vals[block].real**2 + vals[block].imag**2)
                         * weights[block]).sum())
        vals[block] = 0.0
        discarded += removed
        return vals

    if spec.barrier_x is not None and spec.mask_mode == "wall":
        values = mask_now(values)

    for k in range(1, n_steps + 1):
        values = prop.step_values(values)
        if spec.barrier_x is not None:
            if spec.mask_mode == "wall":
                values = mask_now(values)
            elif not pulse_applied:
                marg = (np.abs(values) ** 2).sum(axis=1)
                if x_marginal_axis[int(np.argmax(marg))] >= spec.barrier_x:
                    field, frac = apply_mask(ComplexField(grid, values), spec.slits)
                    values = np.array(field.values)
                    discarded = frac
                    pulse_applied = True
        row = _flux_row(values, ix_screen, dx, consts) * spec.dt
        acc += row
        pos_flux += float(row[row > 0.0].sum())
        neg_flux += float(-row[row < 0.0].sum())
        if do_bohm and k % spec.particle_stride == 0 and active.any():
            gf_next = GuidanceField(ComplexField(grid, values), consts)
            old = positions.copy()
            was_active = active.copy()
            positions, active = advance_pair(
                positions, active, spec.dt * spec.particle_stride,
                _PairVelocity(gf_now, gf_next))
            blocked_particles += int(np.count_nonzero(was_active & ~active))
            gf_now = gf_next
            crossed = was_active & active \
                & (old[:, 0] < spec.screen_x) & (positions[:, 0] >= spec.screen_x)
            if crossed.any():
                x0 = old[crossed, 0]
                x1 = positions[crossed, 0]
                frac = (spec.screen_x - x0) / np.where(x1 > x0, x1 - x0, 1.0)
                y_cross = old[crossed, 1] + frac * (positions[crossed, 1]
                                                    - old[crossed, 1])
                crossings.append(y_cross)
                active = active & ~crossed  # detected: out of the statistics
        if k % spec.snapshot_stride == 0 or k == n_steps:
            norm = float(((values.real**2 + values.imag**2) * weights).sum())
            norm_rows.append((k, k * spec.dt, norm))
            snapshots.append((k, k * spec.dt, values.real**2 + values.imag**2))

    back_flow = neg_flux / (pos_flux + neg_flux) if pos_flux + neg_flux > 0 else 0.0
    if back_flow > 0.05:
        warnings.warn(f"back-flow fraction {back_flow:.3f} at the screen",
                      stacklevel=2)
    y_grid = spec.y_grid()
    clipped = np.clip(acc, 0.0, None)
    total = float((clipped * y_grid.quadrature_weights()).sum())
    if total <= 0.0:
        raise NoTransmissionError("no forward flux reached the screen")
    profile = RealField(y_grid, clipped / total)

    usable = spec.absorber_width[1] * dy
    edges = np.linspace(grid.origin[1] + usable, grid.upper[1] - usable,
                        spec.bins + 1)
    result = ExperimentResult(spec=spec, flux_profile=profile,
                              back_flow_fraction=back_flow,
                              discarded_fraction=discarded,
                              norm_rows=norm_rows, snapshots=snapshots)
    if spec.mode in ("copenhagen", "both"):
        flash_ens = sample_from_density(profile, spec.shots,
                                        seed=int(flash_seed.generate_state(1)[0]))
        flashes = flash_ens.positions
        result.flash_positions = flashes
        result.flash_histogram = ScreenHistogram(
            edges, histogram_weights(flashes, edges), spec.shots, "copenhagen")
    if do_bohm:
        ys = np.concatenate(crossings) if crossings else np.zeros(0)
        result.crossing_positions = ys
        result.crossing_histogram = ScreenHistogram(
            edges, histogram_weights(ys, edges), ys.size, "bohm")
        result.lost_particles = int(spec.shots - ys.size)
        result.blocked_particles = blocked_particles
    return result


@dataclass(frozen=True)
class ModeComparison:
    tv: float
    baseline: float
    flash_histogram: ScreenHistogram
    crossing_histogram: ScreenHistogram
    result: ExperimentResult

    def passes(self, factor: float = 2.0) -> bool:
        return self.tv <= factor * self.baseline


def compare_modes(spec: ApparatusSpec, seed: int,
                  baseline_resamples: int = 16,
                  result: ExperimentResult | None = None) -> ModeComparison:
    """Flash statistics versus trajectory crossings for one apparatus.

    A single propagation feeds both detections (pass a precomputed
    both-mode ``result`` to reuse one). The baseline is the mean
    total-variation distance between pairs of independent same-size flash
    samples, i.e. the distance two ideal runs of the same apparatus would
    show from counting noise alone.
    """
    if result is None:
        result = run_experiment(replace(spec, mode="both"), seed)
    flash = result.flash_histogram
    cross = result.crossing_histogram
    if cross.total == 0:
        raise NoTransmissionError("no trajectory reached the screen")
    tv = tv_distance(flash.counts, cross.counts)
    rng_seeds = np.random.SeedSequence(seed).spawn(3)[2].spawn(2 * baseline_resamples)
    base = 0.0
    n_pair = min(flash.total, cross.total)
    for r in range(baseline_resamples):
        a = sample_from_density(result.flux_profile, n_pair,
                                seed=int(rng_seeds[2 * r].generate_state(1)[0]))
        b = sample_from_density(result.flux_profile, n_pair,
                                seed=int(rng_seeds[2 * r + 1].generate_state(1)[0]))
        base += tv_distance(histogram_weights(a.positions, flash.edges),
                            histogram_weights(b.positions, flash.edges))
    return ModeComparison(tv, base / baseline_resamples, flash, cross, result)
