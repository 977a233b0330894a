"""Flat key/value run configuration and the resolved-run manifest.

The configuration is plain text, one ``key = value`` per line, ``#`` for
comments. Keys are dotted paths from the schema below; unknown keys are
rejected so that a manifest always round-trips. Every run writes a manifest
holding the fully resolved parameter set, the seed, and the package
version; feeding that manifest back as the configuration reproduces the
run byte for byte (CSV, PGM, and binary outputs).
"""

from __future__ import annotations

from dataclasses import dataclass

from . import __version__
from .errors import ConfigError
from .io import format_float


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_slits(text: str):
    """Format: 'center:width;center:width' or 'none'."""
    t = text.strip()
    if t in ("", "none"):
        return ()
    out = []
    for part in t.split(";"):
        c, w = part.split(":")
        out.append((float(c), float(w)))
    return tuple(out)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, tuple):
        return ";".join(f"{format_float(c)}:{format_float(w)}" for c, w in value)
    return str(value)


@dataclass(frozen=True)
class _Key:
    default: object
    parse: object
    help: str


def _float(default, help_text):
    return _Key(default, float, help_text)


def _int(default, help_text):
    return _Key(default, int, help_text)


def _str(default, help_text):
    return _Key(default, str, help_text)


SCHEMA: dict[str, _Key] = {
    # physical constants (natural units by default)
    "constants.hbar": _float(1.0, "action scale"),
    "constants.mass": _float(1.0, "particle mass"),
    "constants.c": _float(1.0, "vacuum wave speed (ray checks)"),
    "constants.omega": _float(1.0, "stationary wave frequency (ray checks)"),
    # grid
    "grid.points_x": _int(512, "nodes along x"),
    "grid.points_y": _int(1, "nodes along y (1 = one-dimensional)"),
    "grid.extent_x": _float(40.0, "domain length along x"),
    "grid.extent_y": _float(0.0, "domain length along y"),
    "grid.origin_x": _float(0.0, "left edge x"),
    "grid.origin_y": _float(0.0, "lower edge y"),
    # propagator
    "propagator.dt": _float(1e-3, "time step"),
    "propagator.steps": _int(1000, "number of steps"),
    "propagator.boundary": _str("reflecting", "reflecting | absorbing"),
    "propagator.absorber_width_x": _int(96, "absorber cells along x"),
    "propagator.absorber_width_y": _int(32, "absorber cells along y"),
    "propagator.absorber_strength": _float(6.0, "absorber peak damping"),
    # initial packet
    "packet.center_x": _float(20.0, "packet center x"),
    "packet.center_y": _float(0.0, "packet center y"),
    "packet.sigma_x": _float(1.0, "packet width x"),
    "packet.sigma_y": _float(1.0, "packet width y"),
    "packet.k0": _float(0.0, "carrier wavenumber along x"),
    # potential for propagate/check runs
    "potential.kind": _str("free", "free | harmonic | linear"),
    "potential.coefficient": _float(0.5, "harmonic: U = c x^2; linear: U = -c x"),
    # apparatus (experiment subcommand)
    "apparatus.experiment": _int(3, "experiment kind: 1, 2, or 3"),
    "apparatus.extent_x": _float(93.6, "domain length"),
    "apparatus.extent_y": _float(87.0, "domain height"),
    "apparatus.points_x": _int(1873, "nodes along x"),
    "apparatus.points_y": _int(581, "nodes along y"),
    "apparatus.packet_center_x": _float(33.0, "beam start"),
    "apparatus.sigma_x": _float(3.8197186342054885, "beam length scale"),
    "apparatus.sigma_y": _float(5.0, "beam transverse scale"),
    "apparatus.k0": _float(6.283185307179586, "beam carrier"),
    "apparatus.barrier_x": _str("46.5", "barrier exit plane x, or 'none'"),
    "apparatus.barrier_cells": _int(4, "barrier thickness in cells"),
    "apparatus.slits": _Key(((-3.0, 0.6), (3.0, 0.6)), _parse_slits,
                            "center:width;... or 'none'"),
    "apparatus.mask_mode": _str("wall", "wall | pulse"),
    "apparatus.screen_x": _float(86.5, "screen plane x"),
    "apparatus.run_time": _float(12.6, "total propagation time"),
    "apparatus.dt": _float(0.0075, "time step"),
    "apparatus.mode": _str("copenhagen", "copenhagen | bohm | both"),
    "apparatus.shots": _int(10000, "flash count / ensemble size"),
    "apparatus.bins": _int(50, "screen histogram bins"),
    # ray tracing (ray-trace subcommand)
    "ray.medium": _str("linear", "constant | linear | two-media"),
    "ray.axis": _int(1, "gradient/interface axis (0 = x, 1 = y)"),
    "ray.n0": _float(1.0, "base index (constant/linear)"),
    "ray.slope": _float(0.1, "index gradient (linear)"),
    "ray.n1": _float(1.0, "first-medium index (two-media)"),
    "ray.n2": _float(1.5, "second-medium index (two-media)"),
    "ray.interface": _float(5.0, "interface coordinate (two-media)"),
    "ray.start_x": _float(1.0, "launch x"),
    "ray.start_y": _float(2.0, "launch y"),
    "ray.dir_x": _float(1.0, "launch direction x"),
    "ray.dir_y": _float(0.0, "launch direction y"),
    "ray.ds": _float(0.01, "arc-length step"),
    "ray.steps": _int(800, "number of steps"),
    # action surfaces (action-surface subcommand)
    "surface.kind": _str("fixed-energy", "fixed-energy | fixed-time"),
    "surface.energy": _float(2.0, "beam energy (fixed-energy)"),
    "surface.launch": _float(0.0, "launch point"),
    "surface.v_min": _float(0.8, "fan lowest velocity (fixed-time)"),
    "surface.v_max": _float(5.5, "fan highest velocity (fixed-time)"),
    "surface.v_count": _int(60, "fan size (fixed-time)"),
    "surface.t_arrive": _float(1.0, "arrival time (fixed-time)"),
    "surface.dt": _float(1e-3, "integrator step (fixed-time)"),
    # trajectory ensembles (bohm subcommand)
    "ensemble.count": _int(200, "trajectory count"),
    "ensemble.record_stride": _int(10, "steps between trajectory records"),
    # check tolerances (every check reads its own subtree)
    "check.norm.steps": _int(1000, "steps for the norm-drift check"),
    "check.norm.tolerance": _float(1e-10, "allowed drift per 1000 steps"),
    "check.continuity.tolerance_ratio": _float(3.2, "min residual ratio under refinement"),
    "check.semiclassical.hbar_ratio_tolerance": _float(0.05,
                                                       "allowed deviation of the factor-4 scaling"),
    "check.eikonal.tolerance": _float(1e-9, "plane-phase residual bound"),
    "check.hj.tolerance": _float(1e-8, "time-dependent residual bound"),
    "check.equivariance.count": _int(100000, "ensemble size"),
    "check.equivariance.dt": _float(4e-3, "wave/particle step for this check"),
    "check.equivariance.bins": _int(50, "histogram bins"),
    "check.equivariance.time": _float(3.4641016151377544, "run time (sigma doubles)"),
    "check.equivariance.factor": _float(2.0, "allowed tv / baseline"),
    # run control
    "seed": _int(1234, "root RNG seed"),
    "threads": _int(1, "worker parallelism cap (evaluation is serial)"),
    "output.dir": _str("out", "output directory"),
    "output.snapshot_stride": _int(200, "steps between snapshots"),
    "output.plots": _Key(True, _parse_bool, "render PNG figures next to CSV"),
}

_RESERVED = ("version",)


class RunConfig:
    """Resolved configuration: schema defaults, overridden by file and CLI."""

    def __init__(self, values: dict | None = None):
        self._values = {k: spec.default for k, spec in SCHEMA.items()}
        if values:
            for k, v in values.items():
                self._values[k] = v

    def __getitem__(self, key: str):
        return self._values[key]

    def set(self, key: str, raw):
        if key not in SCHEMA:
            raise ConfigError(f"unknown configuration key {key!r}")
        if isinstance(raw, str):
            try:
                self._values[key] = SCHEMA[key].parse(raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc
        else:
            self._values[key] = raw

    def items(self):
        return sorted(self._values.items())

    @staticmethod
    def from_file(path) -> "RunConfig":
        cfg = RunConfig()
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                if "=" not in text:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, raw = (s.strip() for s in text.split("=", 1))
                if key in _RESERVED:
                    continue
                cfg.set(key, raw)
        return cfg

    def manifest_text(self) -> str:
        """Stable-ordered resolved dump, loadable as a configuration."""
        lines = [f"version = raywave {__version__}"]
        for key, value in self.items():
            lines.append(f"{key} = {_fmt(value)}")
        return "\n".join(lines) + "\n"

    def write_manifest(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.manifest_text())


def emit_manifest(cfg: RunConfig, path) -> None:
    cfg.write_manifest(path)
