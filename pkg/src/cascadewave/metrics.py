"""Wave velocity and shape metrics measured from sampled trajectories.

Both metrics minimise a least-squares mismatch between a profile and a
translated, linearly interpolated copy of another profile. The translation is
found by a coarse grid scan followed by golden-section refinement inside the
bracket around the best grid point.
"""
from __future__ import annotations

import enum
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .integrate import IntegratorConfig, Trajectory, integrate
from .model import PathwaySpec, Region, classify

VELOCITY_GRID = 128
RESIDUAL_GRID = 257  # odd so that zero shift is a grid node
SEARCH_RTOL = 1e-6
FLAT_TOL = 1e-14
INVGOLD = (math.sqrt(5.0) - 1.0) / 2.0


class Frame(enum.Enum):
    Original = "original"
    Rescaled = "rescaled"


class NoPropagation(RuntimeError):
    """The front never reached the terminal node."""


class NoCrossing(ValueError):
    pass


def original_positions(n: int) -> np.ndarray:
    return np.arange(1, n + 1, dtype=float)


def interp_profile(x, positions, q):
    """Piecewise-linear profile value at ``q``, clamped to the end nodes."""
    return np.interp(q, positions, x)


def golden_section(f, lo, hi, rtol=SEARCH_RTOL, atol=0.0, max_iter=200):
    """Minimise a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    a, b = lo, hi
    c = b - INVGOLD * (b - a)
    d = a + INVGOLD * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= rtol * abs(0.5 * (a + b)) + atol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INVGOLD * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVGOLD * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _shift_objective(target, source, positions, weights):
    def F(shift):
        r = target - np.interp(positions - shift, positions, source)
        return float(np.dot(weights, r * r))
    return F


def _grid_values(target, source, positions, weights, shifts):
    q = positions[None, :] - shifts[:, None]
    r = target[None, :] - np.interp(q.ravel(), positions, source).reshape(q.shape)
    return (r * r) @ weights


def best_shift(target, source, positions, weights, lo, hi, n_grid, rtol=SEARCH_RTOL):
    """Shift ``delta`` in ``[lo, hi]`` minimising
    ``sum_i w_i (target_i - source(positions_i - delta))^2``.

    Returns ``(delta, value, flat)``; ``flat`` marks an objective that is
    constant over the grid, in which case ``delta`` is the grid point closest
    to zero.
    """
    shifts = np.linspace(lo, hi, n_grid)
    vals = _grid_values(target, source, positions, weights, shifts)
    k = int(np.argmin(vals))
    if vals.max() - vals.min() <= FLAT_TOL:
        k0 = int(np.argmin(np.abs(shifts)))
        return float(shifts[k0]), float(vals[k0]), True
    if vals[k] == 0.0:
        return float(shifts[k]), 0.0, False
    F = _shift_objective(target, source, positions, weights)
    a = shifts[max(k - 1, 0)]
    b = shifts[min(k + 1, n_grid - 1)]
    x, fx = golden_section(F, a, b, rtol=rtol, atol=1e-12 * (hi - lo))
    if vals[k] <= fx:
        return float(shifts[k]), float(vals[k]), False
    return x, fx, False


def instantaneous_velocity(prev, nxt, positions, dt, length=None, rtol=SEARCH_RTOL):
    """Speed ``c >= 0`` that best maps the profile ``prev`` onto ``nxt`` after ``dt``.

    ``prev``/``nxt`` are state vectors (or objects with an ``x`` attribute).
    Returns ``(c, degenerate)``; ``degenerate`` is set for a flat objective or a
    zero optimal shift.
    """
    prev = np.asarray(getattr(prev, "x", prev), dtype=float)
    nxt = np.asarray(getattr(nxt, "x", nxt), dtype=float)
    positions = np.asarray(positions, dtype=float)
    if length is None:
        length = positions[-1]
    c_max = length / dt
    w = np.ones_like(positions)
    shift, _, flat = best_shift(nxt, prev, positions, w, 0.0, c_max * dt,
                                VELOCITY_GRID, rtol)
    if flat or shift <= 0.0:
        return 0.0, True
    return shift / dt, False


@dataclass
class VelocitySeries:
    times: np.ndarray
    values: np.ndarray
    frame: Frame
    valid_from: int = 0
    degenerate: np.ndarray = field(default=None, repr=False)

    def window(self, t_start, t_end) -> "VelocitySeries":
        m = (self.times >= t_start) & (self.times <= t_end)
        return VelocitySeries(self.times[m], self.values[m], self.frame, 0,
                              None if self.degenerate is None else self.degenerate[m])

    def to_csv(self, digits: int = 10) -> str:
        return _series_csv("c", self.times, self.values, digits)


@dataclass
class ShapeResidualSeries:
    times: np.ndarray
    values: np.ndarray
    reference_time: float
    frame: Frame
    reference_index: int = 0

    def window(self, t_start, t_end) -> "ShapeResidualSeries":
        m = (self.times >= t_start) & (self.times <= t_end)
        return ShapeResidualSeries(self.times[m], self.values[m], self.reference_time,
                                   self.frame, self.reference_index)

    def to_csv(self, digits: int = 10) -> str:
        return _series_csv("R", self.times, self.values, digits)


def _series_csv(name, times, values, digits):
    buf = io.StringIO()
    buf.write(f"t,{name}\n")
    for t, v in zip(times, values):
        buf.write(f"{t:.{digits}g},{v:.{digits}g}\n")
    return buf.getvalue()


def metrics_json(frame: Frame, t_J: float | None, velocity: VelocitySeries,
                 residual: ShapeResidualSeries | None) -> str:
    series = [{"t": float(t), "c": float(c)} for t, c in zip(velocity.times, velocity.values)]
    if residual is not None:
        rmap = dict(zip(residual.times.tolist(), residual.values.tolist()))
        for row in series:
            if row["t"] in rmap:
                row["R"] = rmap[row["t"]]
    return json.dumps({"frame": frame.value, "t_J": t_J, "series": series}, indent=2)


def velocity_series(traj: Trajectory, positions, frame: Frame = Frame.Original,
                    length=None, start: int = 0, stop: int | None = None,
                    scale: float = 1.0) -> VelocitySeries:
    """Velocities ``c_j`` for consecutive sample pairs ``(j, j+1)``, time-stamped ``t_j``.

    ``scale`` divides the result (use ``N`` to report original-frame speeds as
    fractions of the domain per unit time).
    """
    m = len(traj.t)
    stop = m - 1 if stop is None else min(stop, m - 1)
    idx = range(start, stop)
    vals = np.empty(len(idx))
    deg = np.zeros(len(idx), dtype=bool)
    for k, j in enumerate(idx):
        dt = traj.t[j + 1] - traj.t[j]
        vals[k], deg[k] = instantaneous_velocity(traj.x[j], traj.x[j + 1], positions, dt, length)
    return VelocitySeries(traj.t[start:stop].copy(), vals / scale, frame, 0, deg)


def asymptotic_speed(spec: PathwaySpec, config: IntegratorConfig | None = None,
                     return_trajectory: bool = False):
    """Front speed (nodes per unit time) at half the propagation time."""
    config = config or IntegratorConfig(t_end=1e5)
    if not config.stop_on_arrival:
        config = IntegratorConfig(**{**config.to_dict(), "stop_on_arrival": True})
    traj = integrate(spec, config)
    if traj.arrival_time is None:
        raise NoPropagation(
            f"no sustained propagation: terminal node unchanged by t={traj.t[-1]:g}")
    j = int(np.argmin(np.abs(traj.t - traj.arrival_time / 2.0)))
    j = min(j, len(traj.t) - 2)
    c, _ = instantaneous_velocity(traj.x[j], traj.x[j + 1], original_positions(spec.n),
                                  traj.t[j + 1] - traj.t[j])
    return (c, traj) if return_trajectory else c


def profile_at(traj: Trajectory, positions, q) -> np.ndarray:
    """Interpolated value at position ``q`` for every sample."""
    positions = np.asarray(positions, dtype=float)
    if q <= positions[0]:
        return traj.x[:, 0].copy()
    if q >= positions[-1]:
        return traj.x[:, -1].copy()
    k = int(np.searchsorted(positions, q, side="right")) - 1
    w = (q - positions[k]) / (positions[k + 1] - positions[k])
    return traj.x[:, k] * (1.0 - w) + traj.x[:, k + 1] * w


def crossing_time(traj: Trajectory, positions, q) -> float:
    """First time the interpolated profile at ``q`` crosses zero."""
    v = profile_at(traj, positions, q)
    if v[0] == 0.0:
        return float(traj.t[0])
    s0 = np.sign(v[0])
    hit = np.flatnonzero(np.sign(v) != s0)
    if hit.size == 0:
        raise NoCrossing(f"profile at position {q:g} never crosses 0")
    j = hit[0]
    t0, t1 = traj.t[j - 1], traj.t[j]
    return float(t0 + v[j - 1] / (v[j - 1] - v[j]) * (t1 - t0))


def reference_time(traj: Trajectory, positions, frame: Frame = Frame.Rescaled) -> float:
    """Time at which the front passes mid-domain (s = 0.5, or node N/2)."""
    positions = np.asarray(positions, dtype=float)
    mid = 0.5 if frame is Frame.Rescaled else len(positions) / 2.0
    return crossing_time(traj, positions, mid)


def shape_residual(traj: Trajectory, positions, weights, t_J: float,
                   frame: Frame = Frame.Original, length=None, start: int = 0,
                   stop: int | None = None) -> ShapeResidualSeries:
    """Global shape residual of every sample against the sample nearest ``t_J``."""
    positions = np.asarray(positions, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if length is None:
        length = positions[-1]
    J = int(np.argmin(np.abs(traj.t - t_J)))
    ref = traj.x[J]
    stop = len(traj.t) if stop is None else min(stop, len(traj.t))
    vals = np.empty(stop - start)
    for k, j in enumerate(range(start, stop)):
        if j == J:
            vals[k] = 0.0
            continue
        _, vals[k], _ = best_shift(ref, traj.x[j], positions, weights, -length, length,
                                   RESIDUAL_GRID)
    return ShapeResidualSeries(traj.t[start:stop].copy(), vals, float(t_J), frame, J)


def bistable_window(B: float, count: int = 25, margin: float = 0.01) -> np.ndarray:
    """Evenly spaced bias values strictly inside the bistable window."""
    phi_c = 1.0 / B
    return np.linspace(-phi_c + margin, phi_c - margin, count + 2)[1:-1]


def require_region2(spec: PathwaySpec):
    for i, e in enumerate(spec.edges, start=1):
        if classify(e).region is not Region.Region2:
            raise NoPropagation(
                f"no sustained propagation: edge {i} is outside the bistable region")
