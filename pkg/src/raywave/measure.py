"""Histogram, distance, and fringe-measurement utilities shared by the
trajectory and experiment layers, plus the far-field slit oracles."""

from __future__ import annotations

import numpy as np

from .fields import Grid


def tv_distance(p, q) -> float:
    """Total-variation distance between two weight vectors (normalized first)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    ps = p.sum()
    qs = q.sum()
    if ps <= 0.0 or qs <= 0.0:
        raise ValueError("cannot normalize an empty distribution")
    return 0.5 * float(np.abs(p / ps - q / qs).sum())


def histogram_weights(samples: np.ndarray, edges: np.ndarray) -> np.ndarray:
    counts, _ = np.histogram(samples, bins=edges)
    return counts.astype(float)


def bin_density(grid: Grid, values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Deposit node masses (value times trapezoidal weight) into bins.

    1D only; consistent with the cell decomposition the samplers use.
    """
    if grid.dims != 1:
        raise ValueError("bin_density works on 1D grids")
    mass = values * grid.quadrature_weights()
    idx = np.clip(np.searchsorted(edges, grid.axis(), side="right") - 1,
                  0, len(edges) - 2)
    out = np.zeros(len(edges) - 1)
    np.add.at(out, idx, mass)
    return out


def distribution_moments(x: np.ndarray, weights: np.ndarray) -> tuple[float, float]:
    """Weighted mean and standard deviation."""
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if total <= 0.0:
        raise ValueError("empty distribution")
    mean = float((w * x).sum() / total)
    var = float((w * (x - mean) ** 2).sum() / total)
    return mean, np.sqrt(max(var, 0.0))


def fwhm(x: np.ndarray, profile: np.ndarray) -> float:
    """Full width at half maximum with linear interpolation of the crossings."""
    profile = np.asarray(profile, dtype=float)
    peak_idx = int(np.argmax(profile))
    half = 0.5 * profile[peak_idx]
    left = None
    for i in range(peak_idx, 0, -1):
        if profile[i - 1] < half <= profile[i]:
            frac = (half - profile[i - 1]) / (profile[i] - profile[i - 1])
            left = x[i - 1] + frac * (x[i] - x[i - 1])
            break
    right = None
    for i in range(peak_idx, len(profile) - 1):
        if profile[i + 1] < half <= profile[i]:
            frac = (profile[i] - half) / (profile[i] - profile[i + 1])
            right = x[i] + frac * (x[i + 1] - x[i])
            break
    if left is None or right is None:
        raise ValueError("profile does not fall below half maximum on both sides")
    return float(right - left)


def _parabolic_refine(x: np.ndarray, y: np.ndarray, i: int) -> float:
    """Vertex of the parabola through three points centered at index i."""
    denom = y[i - 1] - 2.0 * y[i] + y[i + 1]
    if abs(denom) < 1e-300:
        return float(x[i])
    delta = 0.5 * (y[i - 1] - y[i + 1]) / denom
    return float(x[i] + delta * (x[i + 1] - x[i]))


def local_minima_positions(x: np.ndarray, profile: np.ndarray,
                           depth_frac: float = 0.5) -> np.ndarray:
    """Positions of interior local minima lying below depth_frac * max."""
    profile = np.asarray(profile, dtype=float)
    ceiling = depth_frac * profile.max()
    out = []
    for i in range(1, len(profile) - 1):
        if profile[i] <= profile[i - 1] and profile[i] < profile[i + 1] \
                and profile[i] < ceiling:
            out.append(_parabolic_refine(x, profile, i))
    return np.asarray(out)


def fringe_spacing(x: np.ndarray, profile: np.ndarray) -> float:
    """Distance between the two minima bracketing the central maximum."""
    peak_x = x[int(np.argmax(profile))]
    minima = local_minima_positions(x, profile)
    left = minima[minima < peak_x]
    right = minima[minima > peak_x]
    if left.size == 0 or right.size == 0:
        raise ValueError("no minima bracket the central fringe")
    return float(right.min() - left.max())


def fringe_visibility(x: np.ndarray, profile: np.ndarray, spacing: float) -> float:
    """(max - min)/(max + min) over the central three fringes."""
    peak_x = x[int(np.argmax(profile))]
    window = np.abs(x - peak_x) <= 1.6 * spacing
    seg = profile[window]
    minima = local_minima_positions(x, profile)
    minima = minima[np.abs(minima - peak_x) <= 1.6 * spacing]
    if minima.size == 0:
        raise ValueError("no minima inside the central window")
    min_vals = np.interp(minima, x, profile)
    hi = float(seg.max())
    lo = float(min_vals.min())
    return (hi - lo) / (hi + lo)


# ---------------------------------------------------------------------------
# far-field slit oracles
# ---------------------------------------------------------------------------

def sinc_squared(u: np.ndarray) -> np.ndarray:
    return np.sinc(u / np.pi) ** 2


def single_slit_intensity(y, wavelength: float, distance: float, width: float):
    """Far-field single-slit envelope sinc^2(pi w y / (lambda L)), unnormalized."""
    y = np.asarray(y, dtype=float)
    return sinc_squared(np.pi * width * y / (wavelength * distance))


def double_slit_intensity(y, wavelength: float, distance: float,
                          separation: float, width: float):
    """cos^2 fringes of spacing lambda L / d under the single-slit envelope."""
    y = np.asarray(y, dtype=float)
    fringes = np.cos(np.pi * separation * y / (wavelength * distance)) ** 2
    return fringes * single_slit_intensity(y, wavelength, distance, width)


def double_slit_minima(wavelength: float, distance: float, separation: float,
                       count: int, exact_angles: bool = True) -> np.ndarray:
    """Positions of the first ``count`` dark fringes on each side of the axis.

    With ``exact_angles`` the interference-order condition
    sin(theta) = (j + 1/2) lambda / d is mapped through y = L tan(theta);
    otherwise the linearized (j + 1/2) lambda L / d positions are returned.
    The exact mapping matters beyond the first pair at desk-scale distances.
    """
    orders = np.arange(count) + 0.5
    sines = orders * wavelength / separation
    if np.any(sines >= 1.0):
        raise ValueError("requested minima do not propagate")
    if exact_angles:
        ys = distance * np.tan(np.arcsin(sines))
    else:
        ys = distance * sines
    return np.concatenate([-ys[::-1], ys])


def single_slit_fwhm(wavelength: float, distance: float, width: float) -> float:
    """FWHM of the sinc^2 envelope: 0.8859 lambda L / w."""
    return 2.0 * 0.4429687 * wavelength * distance / width
