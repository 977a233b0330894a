"""Classical mechanics in one spatial dimension: trajectory integration,
action accumulation along real trajectories, action surfaces built by
shooting, and Hamilton-Jacobi residual checks.

Two surface constructions are provided:

* fixed total energy E: a trajectory launched with p = sqrt(2m(E-U)) sweeps
  the domain and accumulates the reduced action W = int p dx, which satisfies
  (dW/dx)^2 = 2m(E - U);
* fixed arrival time: a fan of launch velocities from one point produces
  S(x, t_arrive) with dS = p dx - E dt, so dS/dx recovers the terminal
  momentum of whichever family member lands at x.

Nodes no real trajectory reaches are masked, and when two family members
arrive at the same node the smaller action wins (the surface turns
multivalued past a caustic; the count of such collisions is reported).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FieldShapeError
from .fields import (
    Grid,
    RealField,
    derivative_values,
    gradient_values,
    interpolate_values,
)


@dataclass(frozen=True)
class Trajectory:
    """Sampled law of motion x(t) with velocities, for a particle of ``mass``."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    mass: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.positions, dtype=float)
        v = np.asarray(self.velocities, dtype=float)
        if not (t.shape == x.shape == v.shape):
            raise FieldShapeError("times/positions/velocities length mismatch")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)

    def energy(self, potential) -> np.ndarray:
        u = _potential_on(potential, self.positions)
        return 0.5 * self.mass * self.velocities**2 + u


@dataclass(frozen=True)
class ActionSurface:
    """Action samples over x at a fixed arrival time or fixed energy.

    ``field`` carries the values and the reachability mask; the remaining
    attributes record how the family was generated.
    """

    field: RealField
    launch: tuple
    energy: float | None = None
    arrival_time: float | None = None
    multivalued_nodes: int = 0

    @property
    def grid(self) -> Grid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @property
    def mask(self) -> np.ndarray:
        return self.field.valid


def _potential_on(potential, x):
    """Evaluate a callable or 1D RealField potential at positions x."""
    if potential is None:
        return np.zeros_like(np.asarray(x, dtype=float))
    if isinstance(potential, RealField):
        return interpolate_values(potential.grid, potential.values,
                                  np.asarray(x, dtype=float).reshape(-1, 1)
                                  ).reshape(np.shape(x))
    return np.asarray(potential(np.asarray(x, dtype=float)))


def _force_function(potential, force):
    if force is not None:
        return force
    if isinstance(potential, RealField):
        grad = derivative_values(potential.values, potential.grid.spacing[0], 0)
        g = potential.grid

        def field_force(x):
            return -interpolate_values(g, grad, np.asarray(x, dtype=float).reshape(-1, 1)
                                       ).reshape(np.shape(x))

        return field_force
    if potential is None:
        return lambda x: np.zeros_like(np.asarray(x, dtype=float))

    def numeric_force(x, h=1e-5):
        x = np.asarray(x, dtype=float)
        return -(potential(x + h) - potential(x - h)) / (2.0 * h)

    return numeric_force


def integrate_trajectory(potential, x0: float, v0: float, dt: float, n_steps: int,
                         mass: float = 1.0, force=None) -> Trajectory:
    """Velocity-Verlet integration of m x'' = -dU/dx.

    ``potential`` may be a callable U(x), a 1D RealField (force comes from
    its interpolated discrete gradient), or None for free motion; an explicit
    ``force`` callable overrides it. Symplectic and second order, so the
    energy error stays bounded at roughly (w dt)^2 / 4 relative for a mode
    of frequency w.
    """
    f = _force_function(potential, force)
    times = np.empty(n_steps + 1)
    xs = np.empty(n_steps + 1)
    vs = np.empty(n_steps + 1)
    x, v = float(x0), float(v0)
    a = float(f(x)) / mass
    times[0], xs[0], vs[0] = 0.0, x, v
    for i in range(1, n_steps + 1):
        x = x + v * dt + 0.5 * a * dt * dt
        a_new = float(f(x)) / mass
        v = v + 0.5 * (a + a_new) * dt
        a = a_new
        times[i], xs[i], vs[i] = i * dt, x, v
    return Trajectory(times, xs, vs, mass)


def action_along(traj: Trajectory, potential) -> float:
    """Trapezoidal integral of the Lagrangian (kinetic minus potential)."""
    lagr = 0.5 * traj.mass * traj.velocities**2 - _potential_on(potential, traj.positions)
    return float(np.trapezoid(lagr, traj.times))


# ---------------------------------------------------------------------------
# action surfaces by shooting
# ---------------------------------------------------------------------------

def _node_crossings(grid: Grid, x_old, x_new):
    """Indices of grid nodes strictly crossed while moving x_old -> x_new."""
    h = grid.spacing[0]
    lo = grid.origin[0]
    if x_new >= x_old:
        first = int(np.ceil((x_old - lo) / h - 1e-12))
        last = int(np.floor((x_new - lo) / h + 1e-12))
        return range(max(first, 0), min(last, grid.points[0] - 1) + 1)
    first = int(np.floor((x_old - lo) / h + 1e-12))
    last = int(np.ceil((x_new - lo) / h - 1e-12))
    return range(min(first, grid.points[0] - 1), max(last, 0) - 1, -1)


def action_surface_fixed_energy(potential, grid: Grid, launches, energy: float,
                                mass: float = 1.0, dt: float | None = None,
                                max_steps: int = 2_000_000) -> ActionSurface:
    """Reduced action W(x) accumulated by constant-energy trajectories.

    Each launch point shoots a trajectory to the right with
    p = sqrt(2m(E - U)); along it dW/dt = m v^2, and W is deposited on every
    node the trajectory crosses (quadratic-in-time interpolation within a
    step). Unreachable nodes stay masked; where several launches deposit on
    one node the least action wins and the collision is counted.
    """
    if np.isscalar(launches):
        launches = [float(launches)]
    x_axis = grid.axis()
    h = grid.spacing[0]
    if dt is None:
        dt = 0.25 * h / np.sqrt(2.0 * energy / mass)
    force = _force_function(potential, None)
    best = np.full(grid.points[0], np.inf)
    collisions = 0
    any_launch = False
    for x_launch in launches:
        u0 = float(_potential_on(potential, np.array([x_launch]))[0])
        if energy <= u0:
            continue
        any_launch = True
        x = float(x_launch)
        v = np.sqrt(2.0 * (energy - u0) / mass)
        a = float(force(x)) / mass
        w_acc = 0.0
        filled = np.zeros(grid.points[0], dtype=bool)
        for _ in range(max_steps):
            x_new = x + v * dt + 0.5 * a * dt * dt
            a_new = float(force(x_new)) / mass
            v_new = v + 0.5 * (a + a_new) * dt
            if not (grid.origin[0] <= x_new <= grid.upper[0]):
                break
            for idx in _node_crossings(grid, x, x_new):
                xn = x_axis[idx]
                # solve x + v tau + a tau^2/2 = xn for the in-step time
                tau = _crossing_time(x, v, a, xn, dt)
                if tau is None:
                    continue
                w_node = w_acc + mass * (v * v * tau + v * a * tau**2
                                         + a * a * tau**3 / 3.0)
                if filled[idx]:
                    collisions += 1
                    best[idx] = min(best[idx], w_node)
                elif np.isfinite(best[idx]):
                    collisions += 1
                    best[idx] = min(best[idx], w_node)
                else:
                    best[idx] = w_node
                filled[idx] = True
            w_acc += mass * (v * v * dt + v * a * dt**2 + a * a * dt**3 / 3.0)
            x, v, a = x_new, v_new, a_new
            if v <= 0.0:
                break  # turning point: the forward sweep is over
    if not any_launch:
        raise DomainError("no launch point admits the requested energy")
    mask = np.isfinite(best)
    if not mask.any():
        raise DomainError("no grid node is reachable at this energy")
    field = RealField(grid, np.where(mask, best, 0.0), mask=mask)
    return ActionSurface(field, launch=tuple(launches), energy=float(energy),
                         multivalued_nodes=collisions)


def _crossing_time(x, v, a, target, dt):
    """Smallest tau in [0, dt] with x + v tau + a tau^2 / 2 = target."""
    c = x - target
    if abs(a) < 1e-300:
        if abs(v) < 1e-300:
            return None
        tau = -c / v
    else:
        disc = v * v - 2.0 * a * c
        if disc < 0.0:
            return None
        root = np.sqrt(disc)
        candidates = [(-v + root) / a, (-v - root) / a]
        inside = [t for t in candidates if -1e-12 <= t <= dt * (1 + 1e-12)]
        if not inside:
            return None
        tau = min(inside)
    if not (-1e-12 <= tau <= dt * (1 + 1e-12)):
        return None
    return min(max(tau, 0.0), dt)


def action_surface_fixed_time(potential, grid: Grid, x_launch: float,
                              velocities, t_arrive: float, dt: float,
                              mass: float = 1.0) -> ActionSurface:
    """S(x) at a fixed arrival time from a fan of launch velocities.

    Every fan member is integrated to t_arrive collecting its action; the
    surface between adjacent arrivals is filled by cubic Hermite pieces whose
    end slopes are the terminal momenta (dS = p dx at fixed time). Monotone
    arrival segments are treated independently, so a folded (post-caustic)
    fan still yields a single-valued least-action surface with the overlap
    count reported.
    """
    velocities = np.asarray(velocities, dtype=float)
    if velocities.size < 2:
        raise ValueError("need at least two fan velocities")
    n_steps = int(round(t_arrive / dt))
    if n_steps < 1:
        raise ValueError("arrival time shorter than one step")
    arrivals = np.empty(velocities.size)
    momenta = np.empty(velocities.size)
    actions = np.empty(velocities.size)
    for i, v0 in enumerate(velocities):
        traj = integrate_trajectory(potential, x_launch, v0, dt, n_steps, mass)
        arrivals[i] = traj.positions[-1]
        momenta[i] = mass * traj.velocities[-1]
        actions[i] = action_along(traj, potential)

    x_axis = grid.axis()
    best = np.full(grid.points[0], np.inf)
    filled = np.zeros(grid.points[0], dtype=bool)
    collisions = 0
    # split the fan into monotone-arrival branches and fill each by Hermite
    seg_start = 0
    for seg_end_excl in _monotone_breaks(arrivals):
        xs = arrivals[seg_start:seg_end_excl]
        ps = momenta[seg_start:seg_end_excl]
        ss = actions[seg_start:seg_end_excl]
        seg_start = seg_end_excl
        if xs.size < 2:
            continue
        if xs[0] > xs[-1]:
            xs, ps, ss = xs[::-1], ps[::-1], ss[::-1]
        lo_i = int(np.ceil((xs[0] - grid.origin[0]) / grid.spacing[0] - 1e-12))
        hi_i = int(np.floor((xs[-1] - grid.origin[0]) / grid.spacing[0] + 1e-12))
        for idx in range(max(lo_i, 0), min(hi_i, grid.points[0] - 1) + 1):
            xn = x_axis[idx]
            j = int(np.searchsorted(xs, xn, side="right") - 1)
            j = min(max(j, 0), xs.size - 2)
            s_val = _hermite(xs[j], xs[j + 1], ss[j], ss[j + 1],
                             ps[j], ps[j + 1], xn)
            if filled[idx]:
                collisions += 1
                best[idx] = min(best[idx], s_val)
            else:
                best[idx] = s_val
                filled[idx] = True
    if not filled.any():
        raise DomainError("no grid node lies inside the arrival fan")
    field = RealField(grid, np.where(filled, best, 0.0), mask=filled)
    return ActionSurface(field, launch=(float(x_launch),),
                         arrival_time=float(t_arrive),
                         multivalued_nodes=collisions)


def _monotone_breaks(arrivals: np.ndarray):
    """End indices (exclusive) of maximal monotone runs of the arrival list."""
    breaks = []
    sign = 0.0
    start = 0
    for i in range(1, arrivals.size):
        d = arrivals[i] - arrivals[i - 1]
        if sign == 0.0:
            sign = np.sign(d)
        elif d * sign < 0.0:
            breaks.append(i)
            start = i
            sign = 0.0
    breaks.append(arrivals.size)
    return breaks


def _hermite(xa, xb, sa, sb, pa, pb, x):
    """Cubic Hermite value at x for S on [xa, xb] with slopes pa, pb."""
    w = xb - xa
    if w <= 0.0:
        return sa
    t = (x - xa) / w
    h00 = (1 + 2 * t) * (1 - t) ** 2
    h10 = t * (1 - t) ** 2
    h01 = t * t * (3 - 2 * t)
    h11 = t * t * (t - 1)
    return h00 * sa + h10 * w * pa + h01 * sb + h11 * w * pb


# ---------------------------------------------------------------------------
# residuals and derived fields
# ---------------------------------------------------------------------------

def _eroded(mask: np.ndarray) -> np.ndarray:
    """Shrink a validity mask so stencils never touch masked-out neighbors."""
    out = mask.copy()
    out[1:-1] &= mask[2:] & mask[:-2]
    out[0] &= mask[1] & mask[2] if mask.size > 2 else False
    out[-1] &= mask[-2] & mask[-3] if mask.size > 2 else False
    return out


def momentum_from_action(surface: ActionSurface) -> RealField:
    """p(x) = dS/dx by the discrete gradient, valid where the stencil fits."""
    grad = gradient_values(surface.values, surface.grid)[0]
    return RealField(surface.grid, grad, mask=_eroded(surface.mask))


def energy_from_action(s_prev: ActionSurface | RealField,
                       s_now: ActionSurface | RealField,
                       s_next: ActionSurface | RealField, dt: float) -> RealField:
    """E(x) = -dS/dt by central difference over three arrival-time snapshots."""
    fields = [s.field if isinstance(s, ActionSurface) else s
              for s in (s_prev, s_now, s_next)]
    grid = fields[1].grid
    vals = -(fields[2].values - fields[0].values) / (2.0 * dt)
    mask = fields[0].valid & fields[1].valid & fields[2].valid
    return RealField(grid, np.where(mask, vals, 0.0), mask=mask)


def hj_residual_stationary(surface: ActionSurface, potential, energy: float,
                           mass: float = 1.0) -> RealField:
    """(dS/dx)^2 - 2m(E - U), pointwise on the reachable (eroded) nodes."""
    grad = gradient_values(surface.values, surface.grid)[0]
    u = _potential_on(potential, surface.grid.axis())
    res = grad * grad - 2.0 * mass * (energy - u)
    mask = _eroded(surface.mask)
    return RealField(surface.grid, np.where(mask, res, 0.0), mask=mask)


def hj_residual_time_dependent(s_prev: RealField, s_now: RealField,
                               s_next: RealField, dt: float, potential,
                               mass: float = 1.0) -> RealField:
    """dS/dt + (dS/dx)^2 / 2m + U from three phase snapshots."""
    grid = s_now.grid
    s_dot = (s_next.values - s_prev.values) / (2.0 * dt)
    grad = gradient_values(s_now.values, grid)[0]
    u = _potential_on(potential, grid.axis())
    res = s_dot + grad * grad / (2.0 * mass) + u
    mask = _eroded(s_prev.valid & s_now.valid & s_next.valid)
    return RealField(grid, np.where(mask, res, 0.0), mask=mask)
