"""Command-line entry point.

Subcommands: snell, ray-trace, action-surface, propagate, bohm, experiment,
check (norm | continuity | semiclassical | eikonal | hj | equivariance),
and compare-modes. Every run resolves a full configuration (schema defaults,
then --config file, then flags), writes data files plus a manifest into the
output directory, prints a short human-readable summary, and exits 0 on
success, 2 on a validation problem, 1 on a numerical failure. Re-running
with ``--config <manifest>`` reproduces the CSV/PGM/binary outputs byte for
byte. Figures (PNG) accompany the delimited output unless --no-plots.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import __version__
from .bohm import advance_ensemble, equivariance_test, sample_from_density
from .config import RunConfig
from .electron_gun import ApparatusSpec, Slit, compare_modes, experiment_spec, \
    run_experiment
from .errors import ConfigError, NoTransmissionError, RayWaveError, \
    TotalInternalReflectionError
from .fields import ComplexField, Grid, PhysicalConstants, RealField, density, \
    gaussian_packet
from .io import ensure_dir, format_float, write_csv, write_field, write_pgm
from .mechanics import action_surface_fixed_energy, action_surface_fixed_time, \
    hj_residual_stationary, hj_residual_time_dependent, momentum_from_action
from .optics import ConstantIndex, IndexField, LinearGradientIndex, Ray, \
    TwoMediaIndex, eikonal_residual, large_phase_scaling, snell_corpuscular, \
    snell_wave, trace_ray
from .schrodinger import AbsorbingLayer, NormRecorder, Propagator, \
    PropagatorConfig, SnapshotRecorder, norm_history_check, propagate, \
    semiclassical_residuals


def _constants(cfg: RunConfig) -> PhysicalConstants:
    return PhysicalConstants(hbar=cfg["constants.hbar"],
                             mass=cfg["constants.mass"],
                             c=cfg["constants.c"],
                             omega=cfg["constants.omega"])


def _grid(cfg: RunConfig) -> Grid:
    if cfg["grid.points_y"] > 1:
        return Grid.rect((cfg["grid.extent_x"], cfg["grid.extent_y"]),
                         (cfg["grid.points_x"], cfg["grid.points_y"]),
                         origin=(cfg["grid.origin_x"], cfg["grid.origin_y"]))
    return Grid.line(cfg["grid.extent_x"], cfg["grid.points_x"],
                     origin=cfg["grid.origin_x"])


def _packet(cfg: RunConfig, grid: Grid) -> ComplexField:
    if grid.dims == 1:
        return gaussian_packet(grid, cfg["packet.center_x"],
                               cfg["packet.sigma_x"], cfg["packet.k0"])
    return gaussian_packet(grid,
                           (cfg["packet.center_x"], cfg["packet.center_y"]),
                           (cfg["packet.sigma_x"], cfg["packet.sigma_y"]),
                           (cfg["packet.k0"], 0.0))


def _potential(cfg: RunConfig):
    kind = cfg["potential.kind"]
    coeff = cfg["potential.coefficient"]
    if kind == "free":
        return None
    if kind == "harmonic":
        return lambda *axes: coeff * sum(a * a for a in axes)
    if kind == "linear":
        return lambda *axes: -coeff * axes[0]
    raise ConfigError(f"unknown potential kind {kind!r}")


def _prop_config(cfg: RunConfig) -> PropagatorConfig:
    boundary = cfg["propagator.boundary"]
    if boundary == "absorbing":
        boundary = AbsorbingLayer((cfg["propagator.absorber_width_x"],
                                   cfg["propagator.absorber_width_y"]),
                                  cfg["propagator.absorber_strength"])
    elif boundary != "reflecting":
        raise ConfigError(f"unknown boundary {boundary!r}")
    return PropagatorConfig(dt=cfg["propagator.dt"], constants=_constants(cfg),
                            boundary=boundary)


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if getattr(args, "config", None) \
        else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.set("seed", args.seed)
    if getattr(args, "out", None):
        cfg.set("output.dir", args.out)
    if getattr(args, "threads", None) is not None:
        cfg.set("threads", args.threads)
    if getattr(args, "no_plots", False):
        cfg.set("output.plots", False)
    return cfg


def _outdir(cfg: RunConfig) -> str:
    return ensure_dir(cfg["output.dir"])


def _report(name: str, passed: bool, detail: str) -> int:
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_snell(args) -> int:
    theta1 = math.radians(args.theta1)
    try:
        if args.law == "wave":
            theta2 = snell_wave(theta1, args.n1, args.n2)
        else:
            v1 = args.v1 if args.v1 is not None else 1.0 / args.n1
            v2 = args.v2 if args.v2 is not None else 1.0 / args.n2
            theta2 = snell_corpuscular(theta1, v1, v2)
    except TotalInternalReflectionError:
        print("total internal reflection: no transmitted ray")
        return 1
    except NoTransmissionError:
        print("no transmission: refracted angle has no real solution")
        return 1
    print(f"theta2 = {math.degrees(theta2):.4f} deg")
    return 0


def _ray_medium(cfg: RunConfig, grid: Grid) -> IndexField:
    kind = cfg["ray.medium"]
    if kind == "constant":
        return IndexField.from_descriptor(grid, ConstantIndex(cfg["ray.n0"]))
    if kind == "linear":
        return IndexField.from_descriptor(
            grid, LinearGradientIndex(cfg["ray.axis"], cfg["ray.n0"],
                                      cfg["ray.slope"]))
    if kind == "two-media":
        return IndexField.from_descriptor(
            grid, TwoMediaIndex(cfg["ray.axis"], cfg["ray.interface"],
                                cfg["ray.n1"], cfg["ray.n2"]))
    raise ConfigError(f"unknown ray medium {kind!r}")


def cmd_ray_trace(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    grid = Grid.rect((cfg["grid.extent_x"], cfg["grid.extent_y"] or
                      cfg["grid.extent_x"]),
                     (cfg["grid.points_x"], max(cfg["grid.points_y"], 8)),
                     origin=(cfg["grid.origin_x"], cfg["grid.origin_y"]))
    medium = _ray_medium(cfg, grid)
    start = Ray(np.array([cfg["ray.start_x"], cfg["ray.start_y"]]),
                np.array([cfg["ray.dir_x"], cfg["ray.dir_y"]]))
    path = trace_ray(medium, start, cfg["ray.ds"], cfg["ray.steps"])
    rows = path.as_array()
    write_csv(os.path.join(out, "ray_path.csv"),
              ["s", "x", "y", "dir_x", "dir_y", "optical_path"], rows)
    cfg.write_manifest(os.path.join(out, "manifest.txt"))
    if cfg["output.plots"]:
        from .plotting import render_ray_paths
        render_ray_paths(os.path.join(out, "ray_path.png"), [path], medium)
    state = "left the domain early" if path.left_domain else "completed"
    print(f"ray {state}: {len(path.states)} states, "
          f"{path.refractions} refraction(s), endpoint "
          f"({format_float(path.endpoint[0])}, {format_float(path.endpoint[1])})")
    return 0


def cmd_action_surface(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    grid = Grid.line(cfg["grid.extent_x"], cfg["grid.points_x"],
                     origin=cfg["grid.origin_x"])
    pot = _potential(cfg)
    mass = cfg["constants.mass"]
    if cfg["surface.kind"] == "fixed-energy":
        surf = action_surface_fixed_energy(pot, grid, cfg["surface.launch"],
                                           cfg["surface.energy"], mass)
        res = hj_residual_stationary(surf, pot, cfg["surface.energy"], mass)
    else:
        vels = np.linspace(cfg["surface.v_min"], cfg["surface.v_max"],
                           cfg["surface.v_count"])
        surf = action_surface_fixed_time(pot, grid, cfg["surface.launch"],
                                         vels, cfg["surface.t_arrive"],
                                         cfg["surface.dt"], mass)
        dt_s = cfg["surface.dt"]
        around = [action_surface_fixed_time(pot, grid, cfg["surface.launch"],
                                            vels, cfg["surface.t_arrive"] + s * dt_s,
                                            cfg["surface.dt"], mass)
                  for s in (-1, 1)]
        res = hj_residual_time_dependent(around[0].field, surf.field,
                                         around[1].field, dt_s, pot, mass)
    p_field = momentum_from_action(surf)
    x = grid.axis()
    write_csv(os.path.join(out, "action_surface.csv"),
              ["x", "S", "p", "valid"],
              [(x[i], surf.values[i], p_field.values[i], int(surf.mask[i]))
               for i in range(x.size)])
    cfg.write_manifest(os.path.join(out, "manifest.txt"))
    if cfg["output.plots"]:
        from .plotting import render_surface
        render_surface(os.path.join(out, "action_surface.png"), x,
                       surf.values, surf.mask)
    print(f"surface over {int(surf.mask.sum())}/{x.size} nodes, "
          f"residual max {format_float(res.max_abs())}, "
          f"rms {format_float(res.rms())}, masked fraction "
          f"{format_float(res.mask_fraction())}, "
          f"multivalued nodes {surf.multivalued_nodes}")
    return 0


def cmd_propagate(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    grid = _grid(cfg)
    psi = _packet(cfg, grid)
    pcfg = _prop_config(cfg)
    steps = cfg["propagator.steps"]
    norm_rec = NormRecorder(grid)
    snap_rec = SnapshotRecorder(cfg["output.snapshot_stride"])
    final = propagate(psi, _potential(cfg), pcfg, steps, [norm_rec, snap_rec])
    write_csv(os.path.join(out, "norm_history.csv"),
              ["step", "time", "norm"], norm_rec.rows)
    for k, _, vals in snap_rec.snapshots:
        write_pgm(os.path.join(out, f"psi2_{k:06d}.pgm"),
                  vals.real**2 + vals.imag**2)
    write_field(os.path.join(out, "psi_final.f64"), final, role="wavefunction")
    cfg.write_manifest(os.path.join(out, "manifest.txt"))
    if cfg["output.plots"]:
        from .plotting import render_density, render_norm_history
        render_density(os.path.join(out, "psi2_final.png"), grid,
                       np.abs(final.values) ** 2)
        render_norm_history(os.path.join(out, "norm_history.png"),
                            [r[0] for r in norm_rec.rows], norm_rec.norms)
    drift = float(np.max(np.abs(norm_rec.norms - norm_rec.norms[0])))
    print(f"propagated {steps} steps of dt = {format_float(pcfg.dt)}; "
          f"norm drift {format_float(drift)}")
    return 0


def _snapshot_stream(psi0: ComplexField, prop: Propagator, n_steps: int):
    values = np.array(psi0.values)
    yield psi0
    for _ in range(n_steps):
        values = prop.step_values(values)
        yield ComplexField(psi0.grid, values)


def cmd_bohm(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    grid = _grid(cfg)
    psi = _packet(cfg, grid)
    pcfg = _prop_config(cfg)
    steps = cfg["propagator.steps"]
    prop = Propagator(grid, _potential(cfg), pcfg)
    ens = sample_from_density(density(psi), cfg["ensemble.count"], cfg["seed"])
    hist = advance_ensemble(ens, _snapshot_stream(psi, prop, steps), pcfg.dt,
                            pcfg.constants,
                            record_stride=cfg["ensemble.record_stride"])
    rows = []
    for ti, t in enumerate(hist.times):
        frame = hist.positions[ti]
        for pid in range(frame.shape[0]):
            if grid.dims == 1:
                rows.append((pid, float(t), float(frame[pid])))
            else:
                rows.append((pid, float(t), float(frame[pid, 0]),
                             float(frame[pid, 1])))
    header = ["particle_id", "t", "x"] + (["y"] if grid.dims == 2 else [])
    write_csv(os.path.join(out, "trajectories.csv"), header, rows)
    cfg.write_manifest(os.path.join(out, "manifest.txt"))
    if cfg["output.plots"]:
        from .plotting import render_trajectories
        render_trajectories(os.path.join(out, "trajectories.png"),
                            hist.times, hist.positions)
    print(f"advanced {ens.count} trajectories over {steps} steps; "
          f"flagged {hist.lost}")
    return 0


def _apparatus(cfg: RunConfig, kind: int | None = None) -> ApparatusSpec:
    kind = kind if kind is not None else cfg["apparatus.experiment"]
    spec = experiment_spec(kind)
    barrier_text = str(cfg["apparatus.barrier_x"])
    barrier = None if barrier_text == "none" else float(barrier_text)
    slits = tuple(Slit(c, w) for c, w in cfg["apparatus.slits"])
    overrides = dict(
        extents=(cfg["apparatus.extent_x"], cfg["apparatus.extent_y"]),
        points=(cfg["apparatus.points_x"], cfg["apparatus.points_y"]),
        packet_center_x=cfg["apparatus.packet_center_x"],
        sigma=(cfg["apparatus.sigma_x"], cfg["apparatus.sigma_y"]),
        k0=cfg["apparatus.k0"],
        barrier_x=barrier,
        barrier_cells=cfg["apparatus.barrier_cells"],
        slits=slits,
        mask_mode=cfg["apparatus.mask_mode"],
        screen_x=cfg["apparatus.screen_x"],
        run_time=cfg["apparatus.run_time"],
        dt=cfg["apparatus.dt"],
        mode=cfg["apparatus.mode"],
        shots=cfg["apparatus.shots"],
        bins=cfg["apparatus.bins"],
        absorber_width=(cfg["propagator.absorber_width_x"],
                        cfg["propagator.absorber_width_y"]),
        absorber_strength=cfg["propagator.absorber_strength"],
        snapshot_stride=cfg["output.snapshot_stride"],
        constants=_constants(cfg),
    )
    if kind == 1:
        overrides["barrier_x"] = None
        overrides["slits"] = ()
    from dataclasses import replace
    return replace(spec, **overrides)


def _sync_apparatus_config(cfg: RunConfig, kind: int) -> None:
    """Push experiment-kind defaults into the config so the manifest is
    complete even when the user only picked a kind."""
    spec = experiment_spec(kind)
    cfg.set("apparatus.experiment", kind)
    cfg.set("apparatus.extent_x", spec.extents[0])
    cfg.set("apparatus.extent_y", spec.extents[1])
    cfg.set("apparatus.points_x", spec.points[0])
    cfg.set("apparatus.points_y", spec.points[1])
    cfg.set("apparatus.packet_center_x", spec.packet_center_x)
    cfg.set("apparatus.sigma_x", spec.sigma[0])
    cfg.set("apparatus.sigma_y", spec.sigma[1])
    cfg.set("apparatus.k0", spec.k0)
    cfg.set("apparatus.barrier_x",
            "none" if spec.barrier_x is None else format_float(spec.barrier_x))
    cfg.set("apparatus.barrier_cells", spec.barrier_cells)
    cfg.set("apparatus.slits", tuple((s.center, s.width) for s in spec.slits))
    cfg.set("apparatus.screen_x", spec.screen_x)
    cfg.set("apparatus.run_time", spec.run_time)
    cfg.set("apparatus.dt", spec.dt)
    cfg.set("propagator.absorber_width_x", spec.absorber_width[0])
    cfg.set("propagator.absorber_width_y", spec.absorber_width[1])
    cfg.set("propagator.absorber_strength", spec.absorber_strength)


def _emit_experiment(cfg: RunConfig, result, out: str) -> None:
    y = result.flux_profile.grid.axis()
    write_csv(os.path.join(out, "flux_profile.csv"), ["y", "p"],
              zip(y, result.flux_profile.values))
    hist = result.histogram
    write_csv(os.path.join(out, "histogram.csv"), ["bin_center", "count"],
              zip(hist.centers(), hist.counts))
    for k, _, dens in result.snapshots:
        write_pgm(os.path.join(out, f"psi2_{k:06d}.pgm"), dens)
    write_csv(os.path.join(out, "norm_history.csv"), ["step", "time", "norm"],
              result.norm_rows)
    cfg.write_manifest(os.path.join(out, "manifest.txt"))
    if cfg["output.plots"]:
        from .plotting import render_profile
        render_profile(os.path.join(out, "screen.png"), y,
                       result.flux_profile.values,
                       histogram=(hist.centers(), hist.counts,
                                  max(hist.total, 1)))


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    if getattr(args, "config", None) is None or args.kind is not None:
        _sync_apparatus_config(cfg, args.kind if args.kind is not None
                               else cfg["apparatus.experiment"])
    if args.mode:
        cfg.set("apparatus.mode", args.mode)
    if args.shots is not None:
        cfg.set("apparatus.shots", args.shots)
    out = _outdir(cfg)
    spec = _apparatus(cfg)
    result = run_experiment(spec, cfg["seed"])
    _emit_experiment(cfg, result, out)
    hist = result.histogram
    mean = float(np.sum(hist.centers() * hist.counts) / max(hist.counts.sum(), 1.0))
    print(f"experiment {cfg['apparatus.experiment']} ({spec.mode}): "
          f"{hist.total} detections, histogram mean {format_float(mean)}, "
          f"barrier discarded fraction {format_float(result.discarded_fraction)}, "
          f"back-flow {format_float(result.back_flow_fraction)}")
    return 0


def cmd_compare_modes(args) -> int:
    cfg = _load_config(args)
    if getattr(args, "config", None) is None or args.kind is not None:
        _sync_apparatus_config(cfg, args.kind if args.kind is not None
                               else cfg["apparatus.experiment"])
    if args.shots is not None:
        cfg.set("apparatus.shots", args.shots)
    out = _outdir(cfg)
    spec = _apparatus(cfg)
    comparison = compare_modes(spec, cfg["seed"])
    write_csv(os.path.join(out, "mode_comparison.csv"),
              ["bin_center", "flash_count", "crossing_count"],
              zip(comparison.flash_histogram.centers(),
                  comparison.flash_histogram.counts,
                  comparison.crossing_histogram.counts))
    _emit_experiment(cfg, comparison.result, out)
    ok = comparison.passes(2.0)
    return _report("compare-modes", ok,
                   f"tv = {format_float(comparison.tv)}, baseline = "
                   f"{format_float(comparison.baseline)}, criterion tv <= 2 x baseline")


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def check_norm(cfg: RunConfig, out: str) -> int:
    grid = _grid(cfg)
    psi = _packet(cfg, grid)
    pcfg = _prop_config(cfg)
    steps = cfg["check.norm.steps"]
    rec = NormRecorder(grid)
    propagate(psi, _potential(cfg), pcfg, steps, [rec])
    report = norm_history_check(rec.norms, boundary=pcfg.boundary,
                                drift_tol_per_1k=cfg["check.norm.tolerance"])
    write_csv(os.path.join(out, "norm_history.csv"), ["step", "time", "norm"],
              rec.rows)
    if cfg["output.plots"]:
        from .plotting import render_norm_history
        render_norm_history(os.path.join(out, "norm_history.png"),
                            [r[0] for r in rec.rows], rec.norms)
    return _report("norm", report.passed,
                   f"drift = {format_float(report.max_drift)} over {steps} steps "
                   f"(tolerance {format_float(cfg['check.norm.tolerance'])} per 1000)")


def _free_gaussian_values(x, t, sigma0, k0, hbar=1.0, mass=1.0):
    a = hbar * t / (2.0 * mass * sigma0**2)
    xc = x - hbar * k0 * t / mass
    norm = (2.0 * np.pi * sigma0**2) ** (-0.25) / np.sqrt(1.0 + 1j * a)
    phase = k0 * x - hbar * k0**2 * t / (2.0 * mass)
    return norm * np.exp(-(xc**2) / (4.0 * sigma0**2 * (1.0 + 1j * a)) + 1j * phase)


def check_continuity(cfg: RunConfig, out: str) -> int:
    from .schrodinger import continuity_residual
    sigma0 = cfg["packet.sigma_x"]
    k0 = cfg["packet.k0"]
    t0 = 0.3
    errs = []
    for n, dt in ((cfg["grid.points_x"], 2e-3), (2 * cfg["grid.points_x"], 1e-3)):
        grid = Grid.line(cfg["grid.extent_x"], n, origin=cfg["grid.origin_x"])
        x = grid.axis()
        snaps = [ComplexField(grid, _free_gaussian_values(x, t0 + s * dt, sigma0, k0))
                 for s in (-1, 0, 1)]
        res = continuity_residual(*snaps, dt)
        errs.append(float(np.max(np.abs(res.values[1:-1]))))
    ratio = errs[0] / errs[1]
    ok = ratio >= cfg["check.continuity.tolerance_ratio"]
    write_csv(os.path.join(out, "continuity_convergence.csv"),
              ["points", "max_residual"],
              [(cfg["grid.points_x"], errs[0]), (2 * cfg["grid.points_x"], errs[1])])
    return _report("continuity", ok,
                   f"residual ratio under refinement = {format_float(ratio)} "
                   f"(needs >= {format_float(cfg['check.continuity.tolerance_ratio'])})")


def check_semiclassical(cfg: RunConfig, out: str) -> int:
    grid = Grid.line(cfg["grid.extent_x"], cfg["grid.points_x"],
                     origin=cfg["grid.origin_x"])
    x = grid.axis()
    mid = cfg["grid.origin_x"] + 0.5 * cfg["grid.extent_x"]
    amp = RealField(grid, 1.0 + 0.2 * np.exp(-((x - mid) ** 2)))
    phase = RealField(grid, 50.0 * np.sin(0.7 * x))
    consts = _constants(cfg)
    half = PhysicalConstants(hbar=0.5 * consts.hbar, mass=consts.mass,
                             c=consts.c, omega=consts.omega)
    full_out = semiclassical_residuals(amp, phase, None, consts)
    half_out = semiclassical_residuals(amp, phase, None, half)
    ratio = full_out.max_abs()["quantum"] / half_out.max_abs()["quantum"]
    tol = cfg["check.semiclassical.hbar_ratio_tolerance"]
    ok = abs(ratio - 4.0) <= 4.0 * tol and np.allclose(
        full_out.hj.values, half_out.hj.values)
    write_csv(os.path.join(out, "semiclassical_terms.csv"),
              ["hbar", "hj_max", "quantum_max", "transport_max"],
              [(consts.hbar, *full_out.max_abs().values()),
               (half.hbar, *half_out.max_abs().values())])
    return _report("semiclassical", ok,
                   f"dropped-term ratio under hbar halving = {format_float(ratio)} "
                   f"(4 within {format_float(100 * tol)}%)")


def check_eikonal(cfg: RunConfig, out: str) -> int:
    consts = _constants(cfg)
    grid = Grid.line(cfg["grid.extent_x"], cfg["grid.points_x"],
                     origin=cfg["grid.origin_x"])
    x = grid.axis()
    n_index = 1.4
    phase = RealField(grid, (n_index * consts.omega / consts.c) * x)
    res = eikonal_residual(phase, n_index, consts.omega, consts.c)
    plane_ok = res.max_abs() <= cfg["check.eikonal.tolerance"]
    amp = RealField(grid, 1.0 + 0.3 * np.sin(2.0 * np.pi * (x - x[0])
                                             / (x[-1] - x[0])))
    s_tilde = RealField(grid, np.cos(np.pi * (x - x[0]) / (x[-1] - x[0])))
    rows = large_phase_scaling(amp, s_tilde, [0.1, 0.05])
    ratio = rows[1].eikonal / rows[0].eikonal
    scaling_ok = abs(ratio - 4.0) <= 0.2 and rows[1].dominant_is_eikonal()
    write_csv(os.path.join(out, "eikonal_scaling.csv"),
              ["eps", "lap_amplitude", "cross", "eikonal", "lap_phase"],
              [(r.eps, r.lap_amplitude, r.cross, r.eikonal, r.lap_phase)
               for r in rows])
    return _report("eikonal", plane_ok and scaling_ok,
                   f"plane-phase residual max = {format_float(res.max_abs())}, "
                   f"short-wave dominant-term ratio = {format_float(ratio)}")


def check_hj(cfg: RunConfig, out: str) -> int:
    grid = Grid.line(cfg["grid.extent_x"], cfg["grid.points_x"],
                     origin=cfg["grid.origin_x"])
    mass = cfg["constants.mass"]
    p0, force, dt = 0.6, 0.9, 1e-4

    def phase(t):
        kinetic = (p0**2 * t + p0 * force * t**2 + force**2 * t**3 / 3.0) \
            / (2.0 * mass)
        return RealField(grid, (p0 + force * t) * grid.axis() - kinetic)

    res = hj_residual_time_dependent(phase(-dt), phase(0.0), phase(dt), dt,
                                     lambda x: -force * x, mass)
    ok = res.max_abs() <= cfg["check.hj.tolerance"]
    write_csv(os.path.join(out, "hj_residual.csv"), ["x", "residual"],
              zip(grid.axis(), res.values))
    return _report("hj", ok,
                   f"linear-potential family residual max = "
                   f"{format_float(res.max_abs())} (tolerance "
                   f"{format_float(cfg['check.hj.tolerance'])})")


def check_equivariance(cfg: RunConfig, out: str) -> int:
    grid = _grid(cfg)
    psi = _packet(cfg, grid)
    pcfg = PropagatorConfig(dt=cfg["check.equivariance.dt"],
                            constants=_constants(cfg))
    report = equivariance_test(psi, _potential(cfg), pcfg,
                               count=cfg["check.equivariance.count"],
                               bins=cfg["check.equivariance.bins"],
                               total_time=cfg["check.equivariance.time"],
                               seed=cfg["seed"])
    factor = cfg["check.equivariance.factor"]
    write_csv(os.path.join(out, "equivariance.csv"), ["t", "tv", "baseline"],
              zip(report.times, report.tv, report.baseline))
    if cfg["output.plots"]:
        from .plotting import render_equivariance
        render_equivariance(os.path.join(out, "equivariance.png"),
                            report.times, report.tv, report.baseline, factor)
    return _report("equivariance", report.passes(factor),
                   f"max tv/baseline = {format_float(float(np.max(report.tv / report.baseline)))} "
                   f"(limit {format_float(factor)}), flagged {report.lost}")


CHECKS = {
    "norm": check_norm,
    "continuity": check_continuity,
    "semiclassical": check_semiclassical,
    "eikonal": check_eikonal,
    "hj": check_hj,
    "equivariance": check_equivariance,
}


def cmd_check(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    code = CHECKS[args.what](cfg, out)
    cfg.write_manifest(os.path.join(out, "manifest.txt"))
    return code


# ---------------------------------------------------------------------------
# parser and dispatch
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="raywave",
        description="rays, actions, wave packets, and guided trajectories "
                    "at desk scale")
    parser.add_argument("--version", action="version",
                        version=f"raywave {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--seed", type=int, help="override the RNG seed")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--threads", type=int,
                       help="worker parallelism cap (evaluation is serial; "
                            "results never depend on this)")
        p.add_argument("--no-plots", action="store_true",
                       help="skip PNG figure rendering")

    p = sub.add_parser("snell", help="refraction angle under either law")
    p.add_argument("--theta1", type=float, required=True,
                   help="incidence angle in degrees")
    p.add_argument("--law", choices=("wave", "corpuscular"), default="wave")
    p.add_argument("--n1", type=float, default=1.0)
    p.add_argument("--n2", type=float, default=1.5)
    p.add_argument("--v1", type=float, help="medium-1 speed (corpuscular law)")
    p.add_argument("--v2", type=float, help="medium-2 speed (corpuscular law)")
    p.set_defaults(fn=cmd_snell)

    p = sub.add_parser("ray-trace", help="trace one ray through an index map")
    common(p)
    p.set_defaults(fn=cmd_ray_trace)

    p = sub.add_parser("action-surface",
                       help="build an action surface by shooting")
    common(p)
    p.set_defaults(fn=cmd_action_surface)

    p = sub.add_parser("propagate", help="evolve a packet, emit norms/snapshots")
    common(p)
    p.set_defaults(fn=cmd_propagate)

    p = sub.add_parser("bohm", help="guided-trajectory dump for a packet run")
    common(p)
    p.set_defaults(fn=cmd_bohm)

    p = sub.add_parser("experiment", help="beam/slit/screen run")
    p.add_argument("kind", type=int, nargs="?", choices=(1, 2, 3),
                   help="1 free beam, 2 single slit, 3 double slit")
    p.add_argument("--mode", choices=("copenhagen", "bohm", "both"))
    p.add_argument("--shots", type=int)
    common(p)
    p.set_defaults(fn=cmd_experiment)

    p = sub.add_parser("compare-modes",
                       help="flash vs trajectory statistics for one apparatus")
    p.add_argument("kind", type=int, nargs="?", choices=(1, 2, 3))
    p.add_argument("--shots", type=int)
    common(p)
    p.set_defaults(fn=cmd_compare_modes)

    p = sub.add_parser("check", help="run one verification scenario")
    p.add_argument("what", choices=sorted(CHECKS))
    common(p)
    p.set_defaults(fn=cmd_check)
    return parser


def dispatch(argv) -> int:
    """Parse and run; 0 = success, 1 = numerical failure, 2 = usage/config."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except RayWaveError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return 2


def main(argv=None) -> int:
    return dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
