"""Feed-forward enzymatic cascade: edge kinetics, uniform equilibria and regions.

Node states live in [-1, 1]. Edge ``i`` couples node ``i-1`` (upstream) to node
``i`` and carries ``(alpha, beta, phi)``; node 0 is the constant boundary input.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DOMAIN_TOL = 1e-9


class DomainError(ValueError):
    """A state or parameter lies outside the admissible domain."""


def _check_state(x, name="x"):
    if np.any(np.abs(x) > 1.0 + DOMAIN_TOL):
        raise DomainError(f"{name} outside [-1, 1]: {x!r}")


@dataclass(frozen=True)
class EdgeParams:
    alpha: float
    beta: float
    phi: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not self.beta > 1:
            raise DomainError(f"beta must exceed 1, got {self.beta}")
        if not -1.0 <= self.phi <= 1.0:
            raise DomainError(f"phi must lie in [-1, 1], got {self.phi}")

    @property
    def B(self) -> float:
        return 2.0 * self.beta - 1.0

    @property
    def phi_c(self) -> float:
        return 1.0 / self.B

    @classmethod
    def from_B(cls, alpha: float, B: float, phi: float = 0.0) -> "EdgeParams":
        return cls(alpha, (B + 1.0) / 2.0, phi)


@dataclass(frozen=True)
class PathwaySpec:
    """A linear chain of ``n`` nodes driven by a constant input ``x0``.

    ``initial`` is either a scalar (uniform start, normally -1 or +1) or a
    length-``n`` vector.
    """

    edges: tuple[EdgeParams, ...]
    x0: float
    initial: float | tuple[float, ...] = -1.0

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        if len(self.edges) < 2:
            raise DomainError("a pathway needs at least 2 nodes")
        if abs(self.x0) > 1.0:
            raise DomainError(f"boundary input outside [-1, 1]: {self.x0}")
        if np.ndim(self.initial) == 0:
            if abs(self.initial) > 1.0:
                raise DomainError(f"initial state outside [-1, 1]: {self.initial}")
            object.__setattr__(self, "initial", float(self.initial))
        else:
            init = tuple(float(v) for v in self.initial)
            if len(init) != len(self.edges):
                raise DomainError(
                    f"initial vector has length {len(init)}, expected {len(self.edges)}")
            if any(abs(v) > 1.0 for v in init):
                raise DomainError("initial vector has entries outside [-1, 1]")
            object.__setattr__(self, "initial", init)

    @property
    def n(self) -> int:
        return len(self.edges)

    @classmethod
    def uniform(cls, n: int, p: EdgeParams, x0: float, initial=-1.0) -> "PathwaySpec":
        return cls((p,) * n, x0, initial)

    @property
    def is_uniform(self) -> bool:
        return all(e == self.edges[0] for e in self.edges)

    def initial_state(self) -> np.ndarray:
        if isinstance(self.initial, float):
            return np.full(self.n, self.initial)
        return np.array(self.initial, dtype=float)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-edge ``(alpha, beta, phi)`` as float arrays."""
        a = np.array([e.alpha for e in self.edges], dtype=float)
        b = np.array([e.beta for e in self.edges], dtype=float)
        f = np.array([e.phi for e in self.edges], dtype=float)
        return a, b, f

    def to_dict(self) -> dict:
        d: dict = {"n": self.n, "x0": self.x0}
        d["initial"] = self.initial if isinstance(self.initial, float) else list(self.initial)
        if self.is_uniform:
            e = self.edges[0]
            d["uniform"] = {"alpha": e.alpha, "beta": e.beta, "phi": e.phi}
        else:
            d["edges"] = [{"alpha": e.alpha, "beta": e.beta, "phi": e.phi} for e in self.edges]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PathwaySpec":
        allowed = {"n", "x0", "initial", "edges", "uniform"}
        unknown = set(d) - allowed
        if unknown:
            raise KeyError(f"unknown pathway keys: {sorted(unknown)}")
        if "x0" not in d:
            raise KeyError("pathway needs 'x0'")
        if ("edges" in d) == ("uniform" in d):
            raise KeyError("pathway needs exactly one of 'edges' or 'uniform'")
        if "uniform" in d:
            if "n" not in d:
                raise KeyError("uniform pathway needs 'n'")
            edges = [_edge_from_dict(d["uniform"])] * int(d["n"])
        else:
            edges = [_edge_from_dict(e) for e in d["edges"]]
            if "n" in d and int(d["n"]) != len(edges):
                raise ValueError(f"'n'={d['n']} but {len(edges)} edges given")
        initial = d.get("initial", -1.0)
        if not np.isscalar(initial):
            initial = tuple(initial)
        return cls(tuple(edges), float(d["x0"]), initial)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PathwaySpec":
        return cls.from_dict(json.loads(text))


def _edge_from_dict(d: dict) -> EdgeParams:
    unknown = set(d) - {"alpha", "beta", "phi"}
    if unknown:
        raise KeyError(f"unknown edge keys: {sorted(unknown)}")
    return EdgeParams(float(d["alpha"]), float(d["beta"]), float(d.get("phi", 0.0)))


@dataclass(frozen=True)
class CascadeState:
    t: float
    x: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.t < 0:
            raise DomainError(f"negative time {self.t}")
        _check_state(self.x)


class Region(enum.Enum):
    Region1 = 1
    Region2 = 2
    Region3 = 3


@dataclass(frozen=True)
class EquilibriumSet:
    region: Region
    stable: tuple[float, ...]
    unstable: tuple[float, ...]
    xi: float | None
    phi_c: float
    degenerate: bool = False


def _rates(u, x, alpha, beta, phi):
    # vectorised form shared by edge_rhs and pathway_rhs
    k = alpha * beta / 4.0
    up = (1.0 + phi) * (1.0 + u) * (1.0 - x) / (2.0 * beta - (1.0 + x))
    down = (1.0 - phi) * (1.0 - u) * (1.0 + x) / (2.0 * beta - (1.0 - x))
    return k * (up - down)


def edge_rhs(upstream: float, local: float, p: EdgeParams) -> float:
    _check_state(np.array([upstream, local]))
    return float(_rates(upstream, local, p.alpha, p.beta, p.phi))


class PathwayRHS:
    """Callable right-hand side ``f(t, x)`` for a pathway, with edge arrays cached."""

    def __init__(self, spec: PathwaySpec):
        self.spec = spec
        self.alpha, self.beta, self.phi = spec.arrays()
        self.k = self.alpha * self.beta / 4.0
        self.two_beta = 2.0 * self.beta
        self.up_w = 1.0 + self.phi
        self.down_w = 1.0 - self.phi
        self.x0 = spec.x0
        self._u = np.empty(spec.n)

    def __call__(self, t, x):
        u = self._u
        u[0] = self.x0
        u[1:] = x[:-1]
        up = self.up_w * (1.0 + u) * (1.0 - x) / (self.two_beta - 1.0 - x)
        down = self.down_w * (1.0 - u) * (1.0 + x) / (self.two_beta - 1.0 + x)
        return self.k * (up - down)


def pathway_rhs(state: CascadeState | np.ndarray, spec: PathwaySpec) -> np.ndarray:
    """Rates for every node; node 1 sees the boundary input as its upstream."""
    x = np.asarray(state.x if isinstance(state, CascadeState) else state, dtype=float)
    if x.shape != (spec.n,):
        raise ValueError(f"state has shape {x.shape}, pathway has {spec.n} nodes")
    _check_state(x)
    return PathwayRHS(spec)(0.0, x)


def uniform_rhs(x: float, p: EdgeParams) -> float:
    _check_state(np.array([x]))
    B = p.B
    return p.alpha * p.beta * (1 - x * x) * (x + p.phi * B) / (2 * (B * B - x * x))


def classify(p: EdgeParams) -> EquilibriumSet:
    phi_c = p.phi_c
    if p.phi < -phi_c:
        return EquilibriumSet(Region.Region1, (-1.0,), (1.0,), None, phi_c)
    if p.phi > phi_c:
        return EquilibriumSet(Region.Region3, (1.0,), (-1.0,), None, phi_c)
    xi = -p.phi * p.B
    degenerate = abs(p.phi) == phi_c
    if degenerate:
        # xi collides with a boundary state; keep it in range
        xi = float(np.clip(xi, -1.0, 1.0))
    return EquilibriumSet(Region.Region2, (-1.0, 1.0), (xi,), xi, phi_c, degenerate)
