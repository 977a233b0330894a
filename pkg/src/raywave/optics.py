"""Geometrical optics: the two Snell laws, eikonal residuals, local
wavelength, phase velocity, and ray tracing through a refractive-index map.

The two refraction laws bend obliquely incident light in opposite directions
for the same media pair, which is the classic discriminator between the
corpuscular and wave pictures:

    corpuscular:  sin t2 = sin t1 * v1 / v2
    wave:         sin t2 = sin t1 * v2 / v1 = sin t1 * n1 / n2
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (
    DomainError,
    NoTransmissionError,
    SingularPhaseError,
    TotalInternalReflectionError,
)
from .fields import (
    ComplexField,
    Grid,
    RealField,
    gradient_values,
    interpolate_values,
    laplacian_values,
)

_HALF_PI = 0.5 * math.pi


def _check_angle(theta: float) -> float:
    if not (0.0 <= theta < _HALF_PI):
        raise ValueError(f"incidence angle {theta} outside [0, pi/2)")
    return float(theta)


def reflect(theta1: float) -> float:
    """Specular reflection: the outgoing angle equals the incident angle."""
    return _check_angle(theta1)


def snell_corpuscular(theta1: float, v1: float, v2: float) -> float:
    """Refraction for a particle beam: sin t2 = sin t1 * v1 / v2.

    Faster medium-2 particles bend toward the interface normal. Raises
    NoTransmissionError when no transmitted branch exists.
    """
    theta1 = _check_angle(theta1)
    if v1 <= 0.0 or v2 <= 0.0:
        raise ValueError("speeds must be positive")
    s2 = math.sin(theta1) * v1 / v2
    if s2 > 1.0:
        raise NoTransmissionError(f"sin(theta2) = {s2:.6g} > 1")
    return math.asin(s2)


def snell_wave(theta1: float, n1: float, n2: float) -> float:
    """Refraction for a wave front: sin t2 = sin t1 * n1 / n2 (= sin t1 * v2/v1).

    Raises TotalInternalReflectionError when sin of the refracted angle
    exceeds one.
    """
    theta1 = _check_angle(theta1)
    if n1 <= 0.0 or n2 <= 0.0:
        raise ValueError("indices must be positive")
    s2 = math.sin(theta1) * n1 / n2
    if s2 > 1.0:
        raise TotalInternalReflectionError(f"sin(theta2) = {s2:.6g} > 1")
    return math.asin(s2)


# ---------------------------------------------------------------------------
# phase diagnostics
# ---------------------------------------------------------------------------

def _gradient_magnitude(phase: RealField) -> np.ndarray:
    comps = gradient_values(phase.values, phase.grid)
    return np.sqrt(sum(c * c for c in comps))


def phase_velocity(phase: RealField, omega: float, floor: float = 1e-12) -> RealField:
    """Front speed omega / |grad S| for a stationary-frequency phase field.

    Nodes where |grad S| <= floor are masked, not fatal; use mask_fraction()
    on the result to see how much was excluded.
    """
    mag = _gradient_magnitude(phase)
    ok = (mag > floor) & phase.valid
    if not ok.any():
        raise SingularPhaseError("phase gradient vanishes on every requested node")
    out = np.zeros_like(mag)
    out[ok] = omega / mag[ok]
    return RealField(phase.grid, out, mask=ok)


def phase_velocity_td(phase_rate: RealField, phase: RealField,
                      floor: float = 1e-12) -> RealField:
    """Front speed -dS/dt / |grad S| for a phase with arbitrary time dependence.

    The sign puts forward-running fronts (phase k x - w t) at positive speed
    along +grad S.
    """
    mag = _gradient_magnitude(phase)
    ok = (mag > floor) & phase.valid & phase_rate.valid
    if not ok.any():
        raise SingularPhaseError("phase gradient vanishes on every requested node")
    out = np.zeros_like(mag)
    out[ok] = -phase_rate.values[ok] / mag[ok]
    return RealField(phase.grid, out, mask=ok)


def local_wavelength(phase: RealField, floor: float = 1e-12) -> RealField:
    """Position-dependent wavelength 2 pi / |grad S|; masked where singular."""
    mag = _gradient_magnitude(phase)
    ok = (mag > floor) & phase.valid
    if not ok.any():
        raise SingularPhaseError("phase gradient vanishes on every requested node")
    out = np.zeros_like(mag)
    out[ok] = 2.0 * np.pi / mag[ok]
    return RealField(phase.grid, out, mask=ok)


def _index_values(grid: Grid, index) -> np.ndarray:
    if isinstance(index, IndexField):
        if index.field.grid != grid:
            raise DomainError("index map lives on a different grid")
        return index.field.values
    if isinstance(index, RealField):
        return index.values
    return np.full(grid.shape, float(index))


def eikonal_residual(phase: RealField, index, omega: float, c: float) -> RealField:
    """Pointwise (grad S)^2 - n^2 w^2 / c^2; zero in the ray-optics regime."""
    comps = gradient_values(phase.values, phase.grid)
    n = _index_values(phase.grid, index)
    res = sum(g * g for g in comps) - (n * omega / c) ** 2
    return RealField(phase.grid, res, mask=None if phase.mask is None else phase.mask)


def eikonal_residual_time_dependent(phases: tuple[RealField, RealField, RealField],
                                    dt: float, index, c: float) -> RealField:
    """(grad S)^2 - (n/c)^2 (dS/dt)^2 with dS/dt central-differenced over
    three snapshots at t-dt, t, t+dt."""
    prev, now, nxt = phases
    s_dot = (nxt.values - prev.values) / (2.0 * dt)
    comps = gradient_values(now.values, now.grid)
    n = _index_values(now.grid, index)
    res = sum(g * g for g in comps) - (n / c) ** 2 * s_dot**2
    return RealField(now.grid, res)


def wave_equation_residual(waves: tuple[ComplexField, ComplexField, ComplexField],
                           dt: float, index, c: float) -> RealField:
    """|lap F - (n/c)^2 d2F/dt2| with the second time derivative taken from
    three snapshots; vanishes to stencil order for a true wave."""
    prev, now, nxt = waves
    f_tt = (nxt.values - 2.0 * now.values + prev.values) / (dt * dt)
    lap = laplacian_values(now.values, now.grid)
    n = _index_values(now.grid, index)
    return RealField(now.grid, np.abs(lap - (n / c) ** 2 * f_tt))


@dataclass(frozen=True)
class PhaseScalingRow:
    """Interior max magnitudes of the four Laplacian terms of A e^{iS} with
    S = S_tilde / eps."""

    eps: float
    lap_amplitude: float      # |lap A|
    cross: float              # |2 grad A . grad S|
    eikonal: float            # |A (grad S)^2|, the eps^-2 term
    lap_phase: float          # |A lap S|

    def dominant_is_eikonal(self) -> bool:
        return self.eikonal >= max(self.lap_amplitude, self.cross, self.lap_phase)


def large_phase_scaling(amplitude: RealField, phase_tilde: RealField,
                        epsilons) -> list[PhaseScalingRow]:
    """Tabulate how each term of lap(A e^{iS}) scales when S = S_tilde / eps.

    The (grad S)^2 term carries eps^-2 and must dominate as eps -> 0, which
    is the quantitative content of the short-wavelength limit.
    """
    grid = amplitude.grid
    if phase_tilde.grid != grid:
        raise DomainError("amplitude and phase live on different grids")
    interior = tuple(slice(1, -1) for _ in range(grid.dims))
    ga = gradient_values(amplitude.values, grid)
    gs = gradient_values(phase_tilde.values, grid)
    lap_a = np.abs(laplacian_values(amplitude.values, grid))[interior]
    cross = np.abs(2.0 * sum(a * s for a, s in zip(ga, gs)))[interior]
    eik = np.abs(amplitude.values * sum(s * s for s in gs))[interior]
    lap_s = np.abs(amplitude.values * laplacian_values(phase_tilde.values, grid))[interior]
    rows = []
    for eps in epsilons:
        eps = float(eps)
        rows.append(PhaseScalingRow(
            eps=eps,
            lap_amplitude=float(lap_a.max()),
            cross=float(cross.max()) / eps,
            eikonal=float(eik.max()) / eps**2,
            lap_phase=float(lap_s.max()) / eps,
        ))
    return rows


# ---------------------------------------------------------------------------
# refractive-index maps and ray tracing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantIndex:
    n0: float

    def n(self, pts: np.ndarray) -> np.ndarray:
        return np.full(pts.shape[:-1], self.n0)

    def grad(self, pts: np.ndarray) -> np.ndarray:
        return np.zeros_like(pts)


@dataclass(frozen=True)
class LinearGradientIndex:
    """n = n0 + slope * coordinate along one axis."""

    axis: int
    n0: float
    slope: float

    def n(self, pts: np.ndarray) -> np.ndarray:
        return self.n0 + self.slope * pts[..., self.axis]

    def grad(self, pts: np.ndarray) -> np.ndarray:
        g = np.zeros_like(pts)
        g[..., self.axis] = self.slope
        return g


@dataclass(frozen=True)
class TwoMediaIndex:
    """Sharp planar interface normal to ``axis`` at ``position``."""

    axis: int
    position: float
    n1: float
    n2: float

    def n(self, pts: np.ndarray) -> np.ndarray:
        side = pts[..., self.axis] >= self.position
        return np.where(side, self.n2, self.n1)

    def grad(self, pts: np.ndarray) -> np.ndarray:
        return np.zeros_like(pts)


@dataclass(frozen=True)
class IndexField:
    """Sampled refractive index n(x, y), optionally carrying the analytic
    profile it was sampled from (used for exact ray-tracing evaluations)."""

    field: RealField
    descriptor: object | None = None

    def __post_init__(self):
        if np.any(self.field.values < 1e-6):
            raise ValueError("refractive index must stay >= 1e-6")

    @staticmethod
    def from_descriptor(grid: Grid, descriptor) -> "IndexField":
        pts = np.stack(grid.meshes(), axis=-1)
        return IndexField(RealField(grid, np.asarray(descriptor.n(pts), dtype=float)),
                          descriptor)

    @property
    def grid(self) -> Grid:
        return self.field.grid

    def n_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.descriptor is not None:
            return np.asarray(self.descriptor.n(pts))
        return interpolate_values(self.grid, self.field.values, pts)

    def grad_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.descriptor is not None:
            return np.asarray(self.descriptor.grad(pts))
        comps = gradient_values(self.field.values, self.grid)
        flat = pts.reshape(-1, self.grid.dims)
        out = np.stack([interpolate_values(self.grid, c, flat) for c in comps], axis=-1)
        return out.reshape(pts.shape)


@dataclass(frozen=True)
class Ray:
    """Ray state: position, unit direction, accumulated n ds, and arc length."""

    position: np.ndarray
    direction: np.ndarray
    optical_path: float = 0.0
    arc_length: float = 0.0

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).copy()
        d = np.asarray(self.direction, dtype=float).copy()
        norm = float(np.linalg.norm(d))
        if norm < 1e-12:
            raise ValueError("ray direction must be nonzero")
        if abs(norm - 1.0) > 1e-12:
            d = d / norm
        pos.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "direction", d)


@dataclass
class RayPath:
    """Trace result: the visited ray states plus exit/refraction bookkeeping."""

    states: list[Ray] = dc_field(default_factory=list)
    left_domain: bool = False
    refractions: int = 0

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1].position

    def as_array(self) -> np.ndarray:
        """Columns: s, x, y, dir_x, dir_y, optical_path."""
        rows = [(r.arc_length, *r.position, *r.direction, r.optical_path)
                for r in self.states]
        return np.asarray(rows)


def _refract_direction(direction: np.ndarray, normal: np.ndarray,
                       n_in: float, n_out: float) -> tuple[np.ndarray, bool]:
    """Snell refraction of a unit direction across a unit interface normal.

    Returns (new_direction, transmitted). Total internal reflection flips the
    normal component instead.
    """
    cos_in = float(np.dot(direction, normal))
    sign = 1.0 if cos_in >= 0.0 else -1.0
    normal = normal * sign
    cos_in = abs(cos_in)
    tangent = direction - cos_in * normal
    sin_in = float(np.linalg.norm(tangent))
    sin_out = sin_in * n_in / n_out
    if sin_out > 1.0:
        return direction - 2.0 * cos_in * normal, False
    cos_out = math.sqrt(max(0.0, 1.0 - sin_out * sin_out))
    if sin_in < 1e-15:
        return normal.copy(), True
    new_dir = (tangent / sin_in) * sin_out + normal * cos_out
    return new_dir / np.linalg.norm(new_dir), True


def _inside_margin(grid: Grid, pos: np.ndarray) -> bool:
    for k in range(grid.dims):
        margin = 2.0 * grid.spacing[k]
        if not (grid.origin[k] + margin <= pos[k] <= grid.upper[k] - margin):
            return False
    return True


def trace_ray(index: IndexField, start: Ray, ds: float, n_steps: int,
              jump_threshold: float = 0.10) -> RayPath:
    """Integrate d/ds (n dr/ds) = grad n with RK4 steps of length ds.

    State is (r, w) with w = n dr/ds, so dr/ds = w/|w| and dw/ds = grad n;
    the optical path accumulates n ds alongside. A sharp interface (analytic
    two-media profile, or a sampled jump of more than ``jump_threshold``
    relative) is handled by advancing to the interface and refracting the
    direction analytically across the face normal. The analytic descriptor
    route is exact; a sampled step is smeared over one cell by interpolation
    and recovers the refracted angle only to about a degree. A ray that
    comes within two cells of the boundary stops early with ``left_domain``
    set.
    """
    grid = index.grid
    pos = np.asarray(start.position, dtype=float)
    if not _inside_margin(grid, pos):
        raise DomainError("ray starts outside the usable domain")

    def eval_n(p):
        return float(np.asarray(index.n_at(p[None, :])).reshape(-1)[0])

    def eval_grad(p):
        return np.asarray(index.grad_at(p[None, :]), dtype=float).reshape(-1)

    w = start.direction * eval_n(pos)
    path = RayPath(states=[Ray(pos.copy(), start.direction.copy(),
                               start.optical_path, start.arc_length)])
    opl = float(start.optical_path)
    s = float(start.arc_length)
    two_media = index.descriptor if isinstance(index.descriptor, TwoMediaIndex) else None

    for _ in range(n_steps):
        remaining = ds
        # exact treatment of a planar analytic interface: straight segments
        if two_media is not None:
            direction = w / np.linalg.norm(w)
            coord = pos[two_media.axis]
            d_axis = direction[two_media.axis]
            if abs(d_axis) > 1e-15:
                t_hit = (two_media.position - coord) / d_axis
                if 1e-12 < t_hit < remaining:
                    n_in = eval_n(pos)
                    pos = pos + direction * t_hit
                    opl += n_in * t_hit
                    s += t_hit
                    n_out = two_media.n2 if n_in == two_media.n1 else two_media.n1
                    normal = np.zeros(grid.dims)
                    normal[two_media.axis] = 1.0
                    direction, transmitted = _refract_direction(direction, normal,
                                                                n_in, n_out)
                    path.refractions += 1
                    n_here = n_out if transmitted else n_in
                    # nudge off the interface so the side query is unambiguous
                    pos = pos + direction * 1e-12
                    w = direction * n_here
                    remaining -= t_hit

        n_before = eval_n(pos)
        new_pos, new_w = _rk4_ray(pos, w, remaining, eval_n, eval_grad)
        if not _inside_margin(grid, new_pos):
            path.left_domain = True
            break
        n_after = eval_n(new_pos)
        if (two_media is None and index.descriptor is None
                and abs(n_after - n_before) > jump_threshold * min(n_after, n_before)):
            # sampled jump: the ODE is useless across a one-cell transition.
            # Bisect the segment for the transition midpoint, then refract
            # across the dominant-gradient face normal using clean far-side
            # index samples.
            direction = w / np.linalg.norm(w)
            target = 0.5 * (n_before + n_after)
            a, b = 0.0, remaining
            rising = n_after > n_before
            for _ in range(50):
                m = 0.5 * (a + b)
                if (eval_n(pos + direction * m) >= target) == rising:
                    b = m
                else:
                    a = m
            t_cross = 0.5 * (a + b)
            cross = pos + direction * t_cross
            g = eval_grad(cross)
            axis = int(np.argmax(np.abs(g))) if np.any(g) else 0
            normal = np.zeros(grid.dims)
            normal[axis] = 1.0
            h_axis = grid.spacing[axis]
            sgn = 1.0 if direction[axis] >= 0.0 else -1.0
            lo = np.asarray(grid.origin)
            hi = np.asarray(grid.upper)
            probe_in = np.clip(cross - normal * (sgn * 1.5 * h_axis), lo, hi)
            probe_out = np.clip(cross + normal * (sgn * 1.5 * h_axis), lo, hi)
            n_in, n_out = eval_n(probe_in), eval_n(probe_out)
            pos = cross
            opl += n_in * t_cross
            s += t_cross
            direction, _ = _refract_direction(direction, normal, n_in, n_out)
            path.refractions += 1
            rest = remaining - t_cross
            pos = pos + direction * rest
            opl += n_out * rest
            s += rest
            if not _inside_margin(grid, pos):
                path.left_domain = True
                break
            w = direction * n_out
        else:
            mid_n = eval_n(0.5 * (pos + new_pos))
            opl += remaining * (n_before + 4.0 * mid_n + n_after) / 6.0
            s += remaining
            pos, w = new_pos, new_w
        direction = w / np.linalg.norm(w)
        path.states.append(Ray(pos.copy(), direction, opl, s))
    return path


def _rk4_ray(pos, w, h, eval_n, eval_grad):
    def deriv(p, ww):
        return ww / np.linalg.norm(ww), eval_grad(p)

    k1p, k1w = deriv(pos, w)
    k2p, k2w = deriv(pos + 0.5 * h * k1p, w + 0.5 * h * k1w)
    k3p, k3w = deriv(pos + 0.5 * h * k2p, w + 0.5 * h * k2w)
    k4p, k4w = deriv(pos + h * k3p, w + h * k3w)
    new_pos = pos + (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
    new_w = w + (h / 6.0) * (k1w + 2 * k2w + 2 * k3w + k4w)
    return new_pos, new_w
