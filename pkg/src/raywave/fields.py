"""Uniform grids, sampled fields, and second-order discrete calculus.

Conventions used everywhere in the package:

* arrays are indexed ``[ix]`` in 1D and ``[ix, iy]`` in 2D (x is axis 0),
* spacing ``h = extent / (points - 1)`` per axis,
* interior stencils are central, boundary stencils one-sided, both O(h^2),
* integrals use trapezoidal weights so the quadrature order matches the
  stencil order,
* fields are immutable once constructed (their arrays are write-protected),
  which keeps every operation a pure function of its inputs.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DomainError,
    FieldShapeError,
    NormalizationError,
    UnwrapError,
)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PhysicalConstants:
    """Scale constants; natural units (all ones) by default."""

    hbar: float = 1.0
    mass: float = 1.0
    c: float = 1.0
    omega: float = 1.0

    def __post_init__(self):
        for name in ("hbar", "mass", "c", "omega"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid in 1 or 2 dimensions.

    Node ``i`` of an axis sits at ``origin + i * extent / (points - 1)``;
    the spacing is derived, never stored independently.
    """

    points: tuple[int, ...]
    extents: tuple[float, ...]
    origin: tuple[float, ...] = ()

    def __post_init__(self):
        points = tuple(int(n) for n in self.points)
        extents = tuple(float(e) for e in self.extents)
        origin = tuple(float(o) for o in self.origin) if self.origin else (0.0,) * len(points)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "origin", origin)
        if len(points) not in (1, 2):
            raise ValueError("only 1D and 2D grids are supported")
        if len(extents) != len(points) or len(origin) != len(points):
            raise ValueError("points/extents/origin rank mismatch")
        if any(n < 8 for n in points):
            raise ValueError("need at least 8 points per axis")
        if any(not e > 0.0 for e in extents):
            raise ValueError("extents must be strictly positive")

    @staticmethod
    def line(extent: float, points: int, origin: float = 0.0) -> "Grid":
        return Grid((points,), (extent,), (origin,))

    @staticmethod
    def rect(extents: tuple[float, float], points: tuple[int, int],
             origin: tuple[float, float] = (0.0, 0.0)) -> "Grid":
        return Grid(tuple(points), tuple(extents), tuple(origin))

    @property
    def dims(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / (n - 1) for e, n in zip(self.extents, self.points))

    @property
    def upper(self) -> tuple[float, ...]:
        return tuple(o + e for o, e in zip(self.origin, self.extents))

    def axis(self, k: int = 0) -> np.ndarray:
        return np.linspace(self.origin[k], self.origin[k] + self.extents[k], self.points[k])

    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(self.axis(k) for k in range(self.dims))

    def meshes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def quadrature_weights(self) -> np.ndarray:
        """Trapezoidal weights: h per node, h/2 at each axis end (outer product in 2D)."""
        per_axis = []
        for h, n in zip(self.spacing, self.points):
            w = np.full(n, h)
            w[0] = w[-1] = 0.5 * h
            per_axis.append(w)
        if self.dims == 1:
            return per_axis[0]
        return np.multiply.outer(per_axis[0], per_axis[1])

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Boolean mask for points (N,) or (N, dims) lying inside the domain."""
        p = np.atleast_2d(np.asarray(pts, dtype=float).reshape(-1, self.dims))
        lo = np.asarray(self.origin)
        hi = np.asarray(self.upper)
        return np.all((p >= lo) & (p <= hi), axis=1)


def _check_values(grid: Grid, values: np.ndarray, dtype) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    if arr.shape != grid.shape:
        raise FieldShapeError(f"values shape {arr.shape} != grid shape {grid.shape}")
    return arr


@dataclass(frozen=True)
class RealField:
    """Real-valued samples on a grid, optionally with a validity mask.

    ``mask`` is True where the value is meaningful; masked-out nodes hold 0.
    Finiteness is only required on valid nodes.
    """

    grid: Grid
    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        arr = _check_values(self.grid, self.values, float)
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=bool)
            if m.shape != self.grid.shape:
                raise FieldShapeError("mask shape does not match grid")
            arr = np.where(m, arr, 0.0)
            object.__setattr__(self, "mask", _frozen(m))
        if not np.all(np.isfinite(arr)):
            raise FieldShapeError("field contains non-finite values")
        object.__setattr__(self, "values", _frozen(arr))

    @property
    def valid(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(self.grid.shape, dtype=bool)
        return self.mask

    def mask_fraction(self) -> float:
        return 1.0 - float(np.count_nonzero(self.valid)) / self.values.size

    def max_abs(self) -> float:
        v = np.abs(self.values[self.valid])
        return float(v.max()) if v.size else 0.0

    def rms(self) -> float:
        v = self.values[self.valid]
        return float(np.sqrt(np.mean(v * v))) if v.size else 0.0


@dataclass(frozen=True)
class ComplexField:
    """Complex-valued samples on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        arr = _check_values(self.grid, self.values, complex)
        if not np.all(np.isfinite(arr)):
            raise FieldShapeError("field contains non-finite values")
        object.__setattr__(self, "values", _frozen(arr))


def same_grid(a, b) -> Grid:
    if a.grid != b.grid:
        raise FieldShapeError("fields live on different grids")
    return a.grid


# ---------------------------------------------------------------------------
# discrete derivatives
# ---------------------------------------------------------------------------

def _sl(ndim: int, axis: int, s: slice) -> tuple:
    return tuple(s if k == axis else slice(None) for k in range(ndim))


def derivative_values(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """First derivative along ``axis``: central interior, one-sided O(h^2) ends."""
    v = values
    if v.shape[axis] < 3:
        raise FieldShapeError("derivative needs at least 3 points along the axis")
    g = np.empty_like(v)
    nd = v.ndim
    g[_sl(nd, axis, slice(1, -1))] = (
        v[_sl(nd, axis, slice(2, None))] - v[_sl(nd, axis, slice(None, -2))]
    ) / (2.0 * h)
    g[_sl(nd, axis, slice(0, 1))] = (
        -3.0 * v[_sl(nd, axis, slice(0, 1))]
        + 4.0 * v[_sl(nd, axis, slice(1, 2))]
        - v[_sl(nd, axis, slice(2, 3))]
    ) / (2.0 * h)
    g[_sl(nd, axis, slice(-1, None))] = (
        3.0 * v[_sl(nd, axis, slice(-1, None))]
        - 4.0 * v[_sl(nd, axis, slice(-2, -1))]
        + v[_sl(nd, axis, slice(-3, -2))]
    ) / (2.0 * h)
    return g


def second_derivative_values(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Second derivative along ``axis``: 3-point interior, one-sided O(h^2) ends."""
    v = values
    if v.shape[axis] < 4:
        raise FieldShapeError("second derivative needs at least 4 points along the axis")
    g = np.empty_like(v)
    nd = v.ndim
    inv_h2 = 1.0 / (h * h)
    g[_sl(nd, axis, slice(1, -1))] = (
        v[_sl(nd, axis, slice(2, None))]
        - 2.0 * v[_sl(nd, axis, slice(1, -1))]
        + v[_sl(nd, axis, slice(None, -2))]
    ) * inv_h2
    g[_sl(nd, axis, slice(0, 1))] = (
        2.0 * v[_sl(nd, axis, slice(0, 1))]
        - 5.0 * v[_sl(nd, axis, slice(1, 2))]
        + 4.0 * v[_sl(nd, axis, slice(2, 3))]
        - v[_sl(nd, axis, slice(3, 4))]
    ) * inv_h2
    g[_sl(nd, axis, slice(-1, None))] = (
        2.0 * v[_sl(nd, axis, slice(-1, None))]
        - 5.0 * v[_sl(nd, axis, slice(-2, -1))]
        + 4.0 * v[_sl(nd, axis, slice(-3, -2))]
        - v[_sl(nd, axis, slice(-4, -3))]
    ) * inv_h2
    return g


def gradient_values(values: np.ndarray, grid: Grid) -> list[np.ndarray]:
    return [derivative_values(values, grid.spacing[k], k) for k in range(grid.dims)]


def laplacian_values(values: np.ndarray, grid: Grid) -> np.ndarray:
    out = second_derivative_values(values, grid.spacing[0], 0)
    for k in range(1, grid.dims):
        out = out + second_derivative_values(values, grid.spacing[k], k)
    return out


def gradient(field: RealField) -> list[RealField]:
    """Discrete gradient, one component field per axis (shares the grid)."""
    return [RealField(field.grid, g) for g in gradient_values(field.values, field.grid)]


def laplacian(field):
    """Discrete Laplacian of a RealField or ComplexField (same kind out)."""
    vals = laplacian_values(field.values, field.grid)
    if isinstance(field, ComplexField):
        return ComplexField(field.grid, vals)
    return RealField(field.grid, vals)


def divergence(components: Sequence[RealField]) -> RealField:
    grid = components[0].grid
    out = np.zeros(grid.shape)
    for k, comp in enumerate(components):
        if comp.grid != grid:
            raise FieldShapeError("divergence components live on different grids")
        out = out + derivative_values(comp.values, grid.spacing[k], k)
    return RealField(grid, out)


# ---------------------------------------------------------------------------
# quadrature and normalization
# ---------------------------------------------------------------------------

def integrate(field: RealField) -> float:
    """Trapezoidal integral of a real field over its domain."""
    return float(np.sum(field.values * field.grid.quadrature_weights()))


def norm_squared_integral(psi: ComplexField) -> float:
    """Trapezoidal quadrature of |psi|^2 over the grid; always >= 0."""
    dens = psi.values.real ** 2 + psi.values.imag ** 2
    return float(np.sum(dens * psi.grid.quadrature_weights()))


def normalize(psi: ComplexField) -> ComplexField:
    n2 = norm_squared_integral(psi)
    if not (np.isfinite(n2) and n2 > 0.0):
        raise NormalizationError(f"cannot normalize field with |psi|^2 integral {n2}")
    return ComplexField(psi.grid, psi.values / np.sqrt(n2))


def density(psi: ComplexField) -> RealField:
    return RealField(psi.grid, psi.values.real ** 2 + psi.values.imag ** 2)


def expectation_position(psi: ComplexField) -> np.ndarray:
    """<r> per axis under |psi|^2 (quadrature weights included)."""
    w = psi.grid.quadrature_weights()
    dens = (psi.values.real ** 2 + psi.values.imag ** 2) * w
    total = float(np.sum(dens))
    if total <= 0.0:
        raise NormalizationError("expectation of a zero field")
    return np.array([float(np.sum(dens * x)) for x in psi.grid.meshes()]) / total


# ---------------------------------------------------------------------------
# wave packets and amplitude/phase form
# ---------------------------------------------------------------------------

def gaussian_packet(grid: Grid, center, sigma, k0,
                    boundary_floor: float = 1e-8) -> ComplexField:
    """Normalized Gaussian packet exp(-|r-c|^2 / 4 sigma^2) * exp(i k0.r).

    ``sigma`` and ``k0`` may be scalars (shared by all axes) or per-axis
    sequences. The packet must be supported well inside the domain: its
    amplitude on the boundary has to stay below ``boundary_floor`` times the
    peak, and each sigma must span at least 3 grid cells.
    """
    center = np.broadcast_to(np.asarray(center, dtype=float), (grid.dims,))
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (grid.dims,))
    k0 = np.broadcast_to(np.asarray(k0, dtype=float), (grid.dims,))
    for k in range(grid.dims):
        if sigma[k] < 3.0 * grid.spacing[k]:
            raise DomainError(f"sigma on axis {k} is below 3 grid spacings")
    quad = np.zeros(grid.shape)
    phase = np.zeros(grid.shape)
    for k, x in enumerate(grid.meshes()):
        quad = quad + (x - center[k]) ** 2 / (4.0 * sigma[k] ** 2)
        phase = phase + k0[k] * x
    values = np.exp(-quad) * np.exp(1j * phase)
    amp = np.abs(values)
    peak = amp.max()
    edge = 0.0
    for k in range(grid.dims):
        edge = max(edge, amp[_sl(grid.dims, k, slice(0, 1))].max(),
                   amp[_sl(grid.dims, k, slice(-1, None))].max())
    if edge > boundary_floor * peak:
        raise DomainError(
            f"packet touches the boundary: edge/peak amplitude {edge / peak:.2e} "
            f"exceeds {boundary_floor:.1e}")
    return normalize(ComplexField(grid, values))


def amplitude_phase_compose(amplitude: RealField, phase: RealField, hbar: float) -> ComplexField:
    """Pointwise A * exp(i S / hbar) on a shared grid."""
    grid = same_grid(amplitude, phase)
    return ComplexField(grid, amplitude.values * np.exp(1j * phase.values / hbar))


def amplitude_phase_decompose(psi: ComplexField, hbar: float,
                              floor: float = 1e-12) -> tuple[RealField, RealField]:
    """Split psi into (A, S) with psi = A exp(i S / hbar), S unwrapped.

    S is made continuous by flooding outward from the maximum-amplitude node
    (breadth-first, axis-ordered neighbors, so the result is deterministic).
    Nodes with |psi| <= floor, or unreachable from the peak through
    above-floor nodes, are masked out of S.
    """
    amp = np.abs(psi.values)
    valid = amp > floor
    if not valid.any():
        raise UnwrapError(f"amplitude is below {floor:.1e} everywhere")
    raw = np.angle(psi.values)
    shape = psi.grid.shape
    flat_amp = amp.reshape(-1)
    flat_raw = raw.reshape(-1)
    flat_valid = valid.reshape(-1)
    unwrapped = np.zeros(flat_raw.shape)
    visited = np.zeros(flat_raw.shape, dtype=bool)

    start = int(np.argmax(flat_amp))
    unwrapped[start] = flat_raw[start]
    visited[start] = True
    two_pi = 2.0 * np.pi
    if psi.grid.dims == 1:
        steps = (-1, 1)
    else:
        ny = shape[1]
        steps = (-ny, ny, -1, 1)
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for step in steps:
            nb = cur + step
            if nb < 0 or nb >= flat_raw.size:
                continue
            # row-major neighbors: +-1 must stay within the same row in 2D
            if psi.grid.dims == 2 and abs(step) == 1 and nb // ny != cur // ny:
                continue
            if visited[nb] or not flat_valid[nb]:
                continue
            k = np.rint((unwrapped[cur] - flat_raw[nb]) / two_pi)
            unwrapped[nb] = flat_raw[nb] + two_pi * k
            visited[nb] = True
            queue.append(nb)

    reach = visited.reshape(shape)
    amplitude = RealField(psi.grid, amp)
    phase = RealField(psi.grid, hbar * unwrapped.reshape(shape), mask=reach)
    return amplitude, phase


# ---------------------------------------------------------------------------
# interpolation
# ---------------------------------------------------------------------------

def _locate(axis_lo: float, h: float, n: int, coords: np.ndarray):
    t = (coords - axis_lo) / h
    idx = np.floor(t).astype(np.int64)
    np.clip(idx, 0, n - 2, out=idx)
    frac = t - idx
    return idx, frac


def interpolate_values(grid: Grid, values: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Multilinear interpolation at points (N,) / (N, dims); exact at nodes.

    Points must lie inside the domain (DomainError otherwise); use
    ``grid.contains`` first when out-of-domain points are expected.
    """
    pts = np.asarray(pts, dtype=float)
    p = pts.reshape(-1, grid.dims)
    inside = grid.contains(p)
    if not inside.all():
        raise DomainError("interpolation point outside the grid domain")
    if grid.dims == 1:
        i, f = _locate(grid.origin[0], grid.spacing[0], grid.points[0], p[:, 0])
        return values[i] * (1.0 - f) + values[i + 1] * f
    ix, fx = _locate(grid.origin[0], grid.spacing[0], grid.points[0], p[:, 0])
    iy, fy = _locate(grid.origin[1], grid.spacing[1], grid.points[1], p[:, 1])
    v00 = values[ix, iy]
    v10 = values[ix + 1, iy]
    v01 = values[ix, iy + 1]
    v11 = values[ix + 1, iy + 1]
    return ((1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10
            + (1 - fx) * fy * v01 + fx * fy * v11)


def coerce_potential(grid: Grid, potential) -> np.ndarray:
    """Accept None, a scalar, a callable of the mesh axes, or a RealField."""
    if potential is None:
        return np.zeros(grid.shape)
    if isinstance(potential, RealField):
        if potential.grid != grid:
            raise FieldShapeError("potential lives on a different grid")
        return potential.values
    if callable(potential):
        out = np.asarray(potential(*grid.meshes()), dtype=float)
        return np.broadcast_to(out, grid.shape).copy()
    return np.full(grid.shape, float(potential))
