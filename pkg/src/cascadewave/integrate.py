"""Adaptive Dormand-Prince 5(4) integration of cascade dynamics.

Steps are controlled by a PI controller on the embedded error estimate and the
5th-order solution is propagated (local extrapolation). Steps are shortened to
land on every multiple of ``sample_dt``, so each sample is a full-accuracy step
endpoint rather than an interpolated value.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np

from .model import DOMAIN_TOL, CascadeState, DomainError, PathwayRHS, PathwaySpec

# Dormand & Prince (1980) tableau
C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
# PI gains (Hairer, Norsett & Wanner, DOPRI5 defaults)
PI_BETA = 0.04
PI_ALPHA = 0.2 - 0.75 * PI_BETA


class IntegrationError(RuntimeError):
    """Integration could not continue; ``t`` is the last successfully reached time."""

    def __init__(self, msg, t):
        super().__init__(f"{msg} (last good t={t:.6g})")
        self.t = t


class StepSizeUnderflow(IntegrationError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    t_end: float = 1000.0
    sample_dt: float = 1.0
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    terminal_threshold: float = 1e-4
    stop_on_arrival: bool = False
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not (self.t_end > 0 and self.sample_dt > 0):
            raise ValueError("t_end and sample_dt must be positive")
        if self.sample_dt > self.t_end:
            raise ValueError("sample_dt exceeds t_end")
        for tol in (self.rel_tol, self.abs_tol):
            if not 0 < tol <= 1e-2:
                raise ValueError(f"tolerance {tol} outside (0, 1e-2]")
        if not self.terminal_threshold > 0:
            raise ValueError("terminal_threshold must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "IntegratorConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise KeyError(f"unknown integrator keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Trajectory:
    spec: PathwaySpec
    config: IntegratorConfig
    t: np.ndarray
    x: np.ndarray = field(repr=False)  # shape (samples, N)
    arrival_time: float | None = None

    @property
    def samples(self) -> list[CascadeState]:
        return [CascadeState(float(t), row) for t, row in zip(self.t, self.x)]

    def __len__(self):
        return len(self.t)

    def to_csv(self, digits: int = 10) -> str:
        n = self.x.shape[1]
        buf = io.StringIO()
        buf.write("t," + ",".join(f"x{i}" for i in range(1, n + 1)) + "\n")
        fmt = f"{{:.{digits}g}}"
        for t, row in zip(self.t, self.x):
            buf.write(fmt.format(t) + "," + ",".join(fmt.format(v) for v in row) + "\n")
        return buf.getvalue()


def _stages(f, t, y, h, k0):
    K = np.empty((7, y.size))
    K[0] = k0
    for s in range(1, 6):
        dy = A[s][0] * K[0]
        for j in range(1, s):
            dy = dy + A[s][j] * K[j]
        K[s] = f(t + C[s] * h, y + h * dy)
    y_new = y + h * (B5 @ K[:6])
    K[6] = f(t + h, y_new)
    return K, y_new


def _initial_step(f, t0, y0, f0, rtol, atol):
    # Hairer's starting-step heuristic for a 5th-order method
    scale = atol + np.abs(y0) * rtol
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = f(t0 + h0, y0 + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def solve(f: Callable, y0, t_end: float, sample_dt: float, rtol=1e-8, atol=1e-10,
          stop: Callable | None = None, post_step: Callable | None = None,
          max_steps: int = 10_000_000):
    """Integrate ``y' = f(t, y)`` from 0 and return ``(times, states)`` on the grid
    ``j * sample_dt``.

    ``stop(t_j, y_j)`` is evaluated at every sample; a true result ends the run
    after that sample. ``post_step(t, y)`` receives every accepted step and
    returns the state to continue from (e.g. projected back onto a domain).
    """
    y = np.array(y0, dtype=float)
    t = 0.0
    n_samples = int(math.floor(t_end / sample_dt + 1e-9)) + 1
    times = [0.0]
    states = [y.copy()]
    if stop is not None and stop(0.0, y):
        return np.array(times), np.array(states)
    k = f(t, y)
    h = _initial_step(f, t, y, k, rtol, atol)
    err_prev = 1.0
    next_j = 1
    steps = 0
    while next_j < n_samples:
        steps += 1
        if steps > max_steps:
            raise IntegrationError("maximum number of steps exceeded", t)
        h_min = 16 * np.spacing(max(abs(t), 1.0))
        if h < h_min:
            raise StepSizeUnderflow("step size underflow", t)
        t_next = next_j * sample_dt
        landing = t + h >= t_next - 1e-12 * sample_dt
        h_step = t_next - t if landing else h
        K, y_new = _stages(f, t, y, h_step, k)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = np.max(np.abs(h_step * (E @ K)) / scale)
        if not np.isfinite(err):
            h = h_step * MIN_FACTOR
            continue
        if err > 1.0:
            h = h_step * max(MIN_FACTOR, SAFETY * err ** -PI_ALPHA)
            continue
        if post_step is not None:
            y_new = post_step(t + h_step, y_new)
        fac = SAFETY * max(err, 1e-10) ** -PI_ALPHA * err_prev ** PI_BETA
        fac = min(MAX_FACTOR, max(MIN_FACTOR, fac))
        # a step shortened to land on a sample does not shrink the next proposal
        h = max(h, h_step * fac) if landing else h_step * fac
        err_prev = max(err, 1e-4)
        k = K[6]
        y = y_new
        if landing:
            t = t_next
            times.append(t)
            states.append(y.copy())
            next_j += 1
            if stop is not None and stop(t, y):
                break
        else:
            t += h_step
    return np.array(times), np.array(states)


def integrate(spec: PathwaySpec, config: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    rhs = PathwayRHS(spec)
    y0 = spec.initial_state()
    start = y0[-1]
    thr = config.terminal_threshold

    # [-1, 1]^N is invariant for the exact flow, so overshoot is pure step
    # error: project it away unless it exceeds what the tolerances allow
    overshoot_tol = max(DOMAIN_TOL, 10.0 * (config.rel_tol + config.abs_tol))

    def project(t, y):
        peak = np.max(np.abs(y))
        if peak > 1.0:
            if peak > 1.0 + overshoot_tol:
                raise IntegrationError(f"state left [-1, 1] (max |x| = {peak:.12g})", t)
            y = np.clip(y, -1.0, 1.0)
        return y

    stop = None
    if config.stop_on_arrival:
        def stop(t, y):
            return abs(y[-1] - start) >= thr

    times, states = solve(rhs, y0, config.t_end, config.sample_dt, config.rel_tol,
                          config.abs_tol, stop=stop, post_step=project,
                          max_steps=config.max_steps)
    if np.max(np.abs(states)) > 1.0 + DOMAIN_TOL:
        raise IntegrationError("sampled state left [-1, 1]", float(times[-1]))
    return Trajectory(spec, config, times, states, _arrival(times, states[:, -1], start, thr))


def _arrival(times, xN, start, thr):
    dev = np.abs(xN - start)
    hit = np.flatnonzero(dev >= thr)
    if hit.size == 0:
        return None
    j = hit[0]
    if j == 0:
        return 0.0
    d0, d1 = dev[j - 1], dev[j]
    return float(times[j - 1] + (thr - d0) / (d1 - d0) * (times[j] - times[j - 1]))


def rk_fixed(f: Callable, y0, t_end: float, h: float) -> np.ndarray:
    """Fixed-step Dormand-Prince (5th-order propagation) used for order checks."""
    steps = int(round(t_end / h))
    if not math.isclose(steps * h, t_end, rel_tol=1e-12):
        raise ValueError("t_end must be an integer multiple of h")
    y = np.atleast_1d(np.array(y0, dtype=float))
    t = 0.0
    for _ in range(steps):
        _, y = _stages(f, t, y, h, f(t, y))
        t += h
    return y


def observed_order(f: Callable, y0, t_end: float, h: float) -> float:
    """Richardson estimate of the global order from runs at h, h/2, h/4."""
    y1, y2, y4 = (rk_fixed(f, y0, t_end, h / m) for m in (1, 2, 4))
    num = np.max(np.abs(y1 - y2))
    den = np.max(np.abs(y2 - y4))
    if num == 0 and den == 0:
        return math.inf
    return math.log2(num / den)


def order_check(spec: PathwaySpec, t_end: float = 1.0, h: float = 0.25) -> float:
    return observed_order(PathwayRHS(spec), spec.initial_state(), t_end, h)
