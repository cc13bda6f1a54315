"""Reciprocal-velocity rescaling of node coordinates.

Every edge gets a span inversely proportional to the speed a front would have
in a homogeneous pathway built from that edge alone; spans are normalised so
that the whole pathway has unit length.
"""
from __future__ import annotations

import enum
import io
import json
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .integrate import IntegratorConfig
from .metrics import NoPropagation, asymptotic_speed
from .model import EdgeParams, PathwaySpec, Region, classify

ORACLE_N = 200


class Mode(enum.Enum):
    Exact = "exact"
    Table = "table"


class NoHomogeneousWave(ValueError):
    pass


def _key(B: float, phi: float) -> tuple[float, float]:
    return float(f"{B:.12g}"), float(f"{phi:.12g}")


def homogeneous_speed(B: float, phi: float, n: int = ORACLE_N,
                      config: IntegratorConfig | None = None) -> float:
    """Asymptotic speed of a unit-alpha homogeneous pathway (activation wave)."""
    p = EdgeParams.from_B(1.0, B, phi)
    spec = PathwaySpec.uniform(n, p, 1.0, -1.0)
    return asymptotic_speed(spec, config)


@dataclass
class SpeedTable:
    """Speeds on a grid over ``ln(B - 1)`` and ``u = phi / phi_c``.

    Interpolation is bilinear in ``ln(speed)``; a single-point ``u`` grid
    (unbiased sweeps) reduces to linear interpolation along ``ln(B - 1)``.
    """

    logB_grid: np.ndarray
    phi_grid: np.ndarray
    speeds: np.ndarray  # shape (len(logB_grid), len(phi_grid))

    @classmethod
    def build(cls, B_lo: float = 1.01, B_hi: float = 1001.0, n_B: int = 32,
              phi_grid=None, n: int = ORACLE_N, config=None) -> "SpeedTable":
        if phi_grid is None:
            phi_grid = np.linspace(-0.9, 0.9, 21)
        logB = np.linspace(math.log(B_lo - 1.0), math.log(B_hi - 1.0), n_B)
        phi_grid = np.asarray(phi_grid, dtype=float)
        speeds = np.empty((logB.size, phi_grid.size))
        for a, lb in enumerate(logB):
            B = 1.0 + math.exp(lb)
            for b, u in enumerate(phi_grid):
                speeds[a, b] = homogeneous_speed(B, u / B, n, config)
        return cls(logB, phi_grid, speeds)

    def covers(self, B_lo: float, B_hi: float) -> bool:
        return (math.log(B_lo - 1.0) >= self.logB_grid[0] - 1e-12
                and math.log(B_hi - 1.0) <= self.logB_grid[-1] + 1e-12)

    def __call__(self, B: float, phi: float) -> float:
        lb = math.log(B - 1.0)
        u = phi * B
        g, h = self.logB_grid, self.phi_grid
        if not g[0] - 1e-12 <= lb <= g[-1] + 1e-12:
            raise ValueError(f"B={B:g} outside the speed table range")
        if not h[0] - 1e-12 <= u <= h[-1] + 1e-12:
            raise ValueError(f"phi={phi:g} outside the speed table range")
        logc = np.log(self.speeds)
        i = min(max(int(np.searchsorted(g, lb, side="right")) - 1, 0), max(g.size - 2, 0))
        ta = 0.0 if g.size == 1 else (lb - g[i]) / (g[i + 1] - g[i])
        if h.size == 1:
            row = logc[:, 0]
            v = row[i] if g.size == 1 else row[i] * (1 - ta) + row[i + 1] * ta
            return float(math.exp(v))
        j = min(max(int(np.searchsorted(h, u, side="right")) - 1, 0), h.size - 2)
        tb = (u - h[j]) / (h[j + 1] - h[j])
        v = ((1 - ta) * (1 - tb) * logc[i, j] + ta * (1 - tb) * logc[i + 1, j]
             + (1 - ta) * tb * logc[i, j + 1] + ta * tb * logc[i + 1, j + 1])
        return float(math.exp(v))

    def to_json(self) -> str:
        return json.dumps({"logB_grid": self.logB_grid.tolist(),
                           "phi_grid": self.phi_grid.tolist(),
                           "phi_units": "phi_over_phi_c",
                           "speeds": self.speeds.tolist()}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SpeedTable":
        d = json.loads(text)
        return cls(np.array(d["logB_grid"]), np.array(d["phi_grid"]),
                   np.array(d["speeds"]))


def table_for_pathway(spec: PathwaySpec, n_B: int = 32, n_u: int = 9,
                      margin: float = 0.1) -> SpeedTable:
    """Speed table spanning the pathway's ``(B, phi / phi_c)`` values.

    The ``ln(B - 1)`` range is widened by ``margin`` of its length on each side;
    a pathway with a single ``B`` or a single bias gets a one-point axis.
    """
    _, beta, phi = spec.arrays()
    B = 2.0 * beta - 1.0
    u = phi * B
    lo, hi = math.log(B.min() - 1.0), math.log(B.max() - 1.0)
    u_lo, u_hi = float(u.min()), float(u.max())
    u_grid = [u_lo] if u_hi - u_lo < 1e-12 else list(np.linspace(u_lo, u_hi, n_u))
    if hi - lo < 1e-12:
        return SpeedTable.build(float(B.min()), float(B.min()), 1, u_grid)
    pad = margin * (hi - lo)
    return SpeedTable.build(1.0 + math.exp(lo - pad), 1.0 + math.exp(hi + pad), n_B, u_grid)


@dataclass
class SpeedOracle:
    """Homogeneous-pathway wave speed at unit ``alpha``, memoised per ``(B, phi)``."""

    mode: Mode = Mode.Exact
    table: SpeedTable | None = None
    n: int = ORACLE_N
    config: IntegratorConfig | None = None
    cache: dict = field(default_factory=dict)
    simulations: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    reference_alpha = 1.0

    def base_speed(self, B: float, phi: float) -> float:
        key = _key(B, phi)
        with self._lock:
            if key in self.cache:
                return self.cache[key]
        if self.mode is Mode.Table:
            if self.table is None:
                raise ValueError("table mode needs a SpeedTable")
            c = self.table(*key)
        else:
            c = homogeneous_speed(*key, n=self.n, config=self.config)
            with self._lock:
                self.simulations += 1
        if not c > 0:
            raise NoHomogeneousWave(f"non-positive speed {c} at B={B:g}, phi={phi:g}")
        with self._lock:
            self.cache[key] = c
        return c


def edge_speed(p: EdgeParams, oracle: SpeedOracle) -> float:
    """Wave speed of a homogeneous pathway made of copies of ``p``.

    Speed scales linearly with ``alpha``, so only ``(B, phi)`` is measured.
    """
    if classify(p).region is not Region.Region2 or abs(p.phi) >= p.phi_c:
        raise NoHomogeneousWave("no homogeneous traveling wave exists for this edge")
    try:
        return p.alpha * oracle.base_speed(p.B, p.phi)
    except NoPropagation as exc:
        raise NoHomogeneousWave(str(exc)) from exc


@dataclass
class RescaledCoordinates:
    s: np.ndarray  # s_0 .. s_N
    ds: np.ndarray  # span of edge i between s_{i-1} and s_i
    c_bar: float
    speeds: np.ndarray = field(repr=False, default=None)

    @property
    def positions(self) -> np.ndarray:
        """Node positions s_1 .. s_N."""
        return self.s[1:]

    def to_csv(self, digits: int = 17) -> str:
        buf = io.StringIO()
        buf.write("i,s_i,ds_i,c_i\n")
        buf.write(f"0,{0.0:.{digits}g},,\n")
        for i in range(1, self.s.size):
            buf.write(f"{i},{self.s[i]:.{digits}g},{self.ds[i - 1]:.{digits}g},"
                      f"{self.speeds[i - 1]:.{digits}g}\n")
        return buf.getvalue()


def coordinates_from_speeds(speeds) -> RescaledCoordinates:
    c = np.asarray(speeds, dtype=float)
    inv = 1.0 / c
    c_bar = 1.0 / math.fsum(inv)
    ds = c_bar * inv
    s = np.concatenate(([0.0], np.cumsum(ds)))
    # absorb harmonic-sum rounding in the last span
    ds[-1] += 1.0 - s[-1]
    s[-1] = 1.0
    return RescaledCoordinates(s, ds, c_bar, c)


def rescale(spec: PathwaySpec, oracle: SpeedOracle) -> RescaledCoordinates:
    speeds = np.empty(spec.n)
    for i, e in enumerate(spec.edges, start=1):
        try:
            speeds[i - 1] = edge_speed(e, oracle)
        except NoHomogeneousWave as exc:
            raise NoHomogeneousWave(f"edge {i}: {exc}") from exc
    return coordinates_from_speeds(speeds)
