"""Stationary spatial profiles of a uniform cascade under constant input.

Setting every rate to zero turns the chain into a one-dimensional map
``x_i = g(x_{i-1})``. With ``w = (phi + x) / (1 + phi x)`` the admissible root of
the stationary quadratic is

    g = 2 B w / ((B - 1) + sqrt((B - 1)^2 + 4 B w^2)),

which is the conjugate of the textbook root formula. It has no removable
singularity at ``x = -phi`` and no cancellation on either branch.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .model import DOMAIN_TOL, DomainError, EdgeParams

TAIL_HI = 1e-3
TAIL_LO = 1e-10
TAIL_MIN_POINTS = 5
# inputs this close to the unstable state count as sitting on it
SEPARATRIX_TOL = 1e-12


class SeparatrixError(ValueError):
    pass


class TailNotConverged(ValueError):
    pass


def _map(x, phi, B):
    w = (phi + x) / (1.0 + phi * x)
    return 2.0 * B * w / ((B - 1.0) + np.sqrt((B - 1.0) ** 2 + 4.0 * B * w * w))


def stationary_map(x_prev: float, p: EdgeParams) -> float:
    """Steady state of a node whose upstream neighbour sits at ``x_prev``."""
    if abs(x_prev) > 1.0 + DOMAIN_TOL:
        raise DomainError(f"x_prev outside [-1, 1]: {x_prev}")
    if abs(x_prev) >= 1.0:
        return float(np.sign(x_prev))
    if p.phi in (-1.0, 1.0):
        # fully biased edge: one Michaelis term vanishes
        return float(p.phi)
    return float(_map(x_prev, p.phi, p.B))


def balance_residual(x_prev: float, x: float, p: EdgeParams) -> float:
    """Relative residual of ``x^2 + (B-1) chi x - B = 0`` written without division."""
    B, phi = p.B, p.phi
    Xp = 2.0 * (1.0 + phi * x_prev)
    Xm = 2.0 * (phi + x_prev)
    # multiply through by X^- to stay finite at the singular point
    terms = (Xm * x * x, (B - 1.0) * Xp * x, Xm * B)
    return abs(terms[0] + terms[1] - terms[2]) / max(sum(abs(t) for t in terms), 1e-300)


def decay_rate(p: EdgeParams, limit: int) -> float:
    """Geometric rate at which the profile tail approaches ``limit`` (+1 or -1)."""
    if limit not in (1, -1):
        raise ValueError("limit must be +1 or -1")
    if abs(p.phi) >= 1.0:
        raise DomainError("decay rate is singular for |phi| = 1")
    B = p.B
    return ((1.0 - p.phi) / (1.0 + p.phi)) ** limit * (B - 1.0) / (B + 1.0)


def penetration_depth_approx(x0: float, p: EdgeParams) -> float:
    """Closed-form penetration depth of an unbiased profile (continuum estimate)."""
    if p.phi != 0.0:
        raise ValueError("the closed-form penetration depth only holds for phi = 0")
    if x0 == 0.0:
        raise SeparatrixError("penetration depth diverges at the separatrix x0 = 0")
    if not abs(x0) <= 1.0:
        raise DomainError(f"x0 outside [-1, 1]: {x0}")
    lam = decay_rate(p, 1)
    return math.log(2.0 * x0 * x0 / (1.0 + abs(x0))) / math.log(lam)


@dataclass
class StationaryProfile:
    x0: float
    params: EdgeParams
    values: np.ndarray = field(repr=False)
    limit: int
    lam: float
    delta_i_approx: float | None
    delta_i_fit: float | None = None

    @property
    def eps(self) -> np.ndarray:
        return np.abs(self.limit - self.values)

    def to_csv(self, digits: int = 17) -> str:
        buf = io.StringIO()
        buf.write("i,x_i,eps_i\n")
        for i, (v, e) in enumerate(zip(self.values, self.eps), start=1):
            buf.write(f"{i},{v:.{digits}g},{e:.{digits}g}\n")
        return buf.getvalue()

    def report(self) -> dict:
        return {"lambda": self.lam, "delta_i_approx": self.delta_i_approx,
                "delta_i_fit": self.delta_i_fit, "x0": self.x0, "B": self.params.B,
                "phi": self.params.phi}

    def report_json(self) -> str:
        return json.dumps(self.report(), indent=2)


def stationary_profile(x0: float, p: EdgeParams, n: int, fit: bool = False) -> StationaryProfile:
    """Iterate the stationary map ``n`` times from the boundary input ``x0``.

    ``x0 = +-1`` gives the constant boundary profile. ``x0`` within
    ``SEPARATRIX_TOL`` of the separatrix is rejected because every node would
    sit on the unstable state.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if abs(x0) > 1.0:
        raise DomainError(f"x0 outside [-1, 1]: {x0}")
    xi = -p.phi * p.B
    if abs(x0 - xi) <= SEPARATRIX_TOL:
        raise SeparatrixError("separatrix: constant profile")
    values = np.empty(n)
    x = x0
    for i in range(n):
        x = stationary_map(x, p)
        values[i] = x
    limit = 1 if x0 > xi else -1
    lam = decay_rate(p, limit) if abs(p.phi) < 1 else 0.0
    approx = None
    if p.phi == 0.0 and x0 != 0.0:
        approx = penetration_depth_approx(x0, p)
    prof = StationaryProfile(x0, p, values, limit, lam, approx)
    if fit:
        prof.delta_i_fit = penetration_depth_fit(prof)
    return prof


def penetration_depth_fit(profile: StationaryProfile) -> float:
    """Fit the tail shift with the decay rate held at its exact value.

    Model: ``ln eps_i = ln(1 - |x0|) + (i - shift) ln(lambda)``. With the slope
    fixed the least-squares shift is the mean of the per-node estimates.
    """
    eps = profile.eps
    i = np.arange(1, eps.size + 1, dtype=float)
    window = (eps <= TAIL_HI) & (eps >= TAIL_LO)
    if np.count_nonzero(window) < TAIL_MIN_POINTS:
        raise TailNotConverged(
            f"fewer than {TAIL_MIN_POINTS} tail points with eps in "
            f"[{TAIL_LO:g}, {TAIL_HI:g}] after {eps.size} nodes; use a larger n")
    return fit_tail_shift(i[window], eps[window], abs(profile.x0), profile.lam)


def fit_tail_shift(i, eps, amp, lam) -> float:
    log_lam = math.log(lam)
    return float(np.mean(i - (np.log(eps) - math.log(1.0 - amp)) / log_lam))
