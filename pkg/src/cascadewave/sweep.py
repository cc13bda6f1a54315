"""Heterogeneous pathways: parameter gradients, lognormal ensembles and the
original-versus-rescaled comparison pipeline."""
from __future__ import annotations

import enum
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .integrate import IntegrationError, IntegratorConfig, Trajectory, integrate
from .metrics import (Frame, NoCrossing, NoPropagation, ShapeResidualSeries,
                      VelocitySeries, crossing_time, original_positions,
                      shape_residual, velocity_series)
from .model import EdgeParams, PathwaySpec
from .rescaling import (Mode, NoHomogeneousWave, RescaledCoordinates, SpeedOracle,
                        SpeedTable, rescale)

WINDOW_START_S = 0.15
REFERENCE_S = 0.5
MAX_EXCLUDED_FRACTION = 0.5


class GradientKind(enum.Enum):
    AlphaLinear = "alpha_linear"
    BLog = "B_log"
    PhiLinear = "phi_linear"


@dataclass(frozen=True)
class GradientSpec:
    """A pathway whose edges vary monotonically in one parameter.

    ``lo``/``hi`` are the values on the first and last edge: alpha for
    ``AlphaLinear``, ``B = 2 beta - 1`` for ``BLog`` (spaced linearly in
    ``ln(B - 1)``) and phi for ``PhiLinear``.
    """

    kind: GradientKind
    lo: float
    hi: float
    base: EdgeParams
    n: int = 200
    x0: float = 1.0
    initial: float = -1.0


def build_gradient(g: GradientSpec) -> PathwaySpec:
    u = np.linspace(0.0, 1.0, g.n)
    b = g.base
    if g.kind is GradientKind.AlphaLinear:
        if not (g.lo > 0 and g.hi > 0):
            raise ValueError("alpha endpoints must be positive")
        alpha = g.lo + (g.hi - g.lo) * u
        edges = [EdgeParams(float(a), b.beta, b.phi) for a in alpha]
    elif g.kind is GradientKind.BLog:
        if not (g.lo > 1 and g.hi > 1):
            raise ValueError("B endpoints must exceed 1")
        logs = np.log(g.lo - 1.0) + (np.log(g.hi - 1.0) - np.log(g.lo - 1.0)) * u
        B = 1.0 + np.exp(logs)
        edges = [EdgeParams(b.alpha, float((Bi + 1.0) / 2.0), b.phi) for Bi in B]
    else:
        phi = g.lo + (g.hi - g.lo) * u
        phi_c = b.phi_c
        if np.any(np.abs(phi) >= phi_c):
            raise ValueError(f"phi gradient leaves the bistable window |phi| < {phi_c:g}")
        edges = [EdgeParams(b.alpha, b.beta, float(f)) for f in phi]
    return PathwaySpec(tuple(edges), g.x0, g.initial)


FIGURE_GRADIENTS = {
    "alpha": GradientSpec(GradientKind.AlphaLinear, 1.0, 5.0, EdgeParams.from_B(1.0, 100.0, 0.0)),
    "B": GradientSpec(GradientKind.BLog, 1.02, 201.0, EdgeParams(1.0, 1.5, 0.0)),
    # phi range chosen to stay inside |phi| < 1/B = 0.2
    "phi": GradientSpec(GradientKind.PhiLinear, 0.15, -0.15, EdgeParams.from_B(1.0, 5.0, 0.0)),
}


@dataclass(frozen=True)
class StochasticEnsembleSpec:
    sigma: float = 0.4
    alpha0: float = 1.0
    beta0: float = 5.0
    phi: float = 0.0
    n: int = 200
    realizations: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0 or self.alpha0 <= 0 or self.beta0 <= 1:
            raise ValueError("need sigma >= 0, alpha0 > 0, beta0 > 1")


def realization_normals(seed: int, k: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Standard normals for realization ``k``; independent of sigma so that
    every noise level reuses the same draws."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(k,))
    z = np.random.Generator(np.random.PCG64(ss)).standard_normal(2 * n)
    return z[:n], z[n:]


def sample_realization(s: StochasticEnsembleSpec, k: int, x0: float = 1.0,
                       initial: float = -1.0) -> PathwaySpec:
    za, zb = realization_normals(s.seed, k, s.n)
    alpha = s.alpha0 * np.exp(s.sigma * za)
    beta = 1.0 + (s.beta0 - 1.0) * np.exp(s.sigma * zb)
    edges = tuple(EdgeParams(float(a), float(b), s.phi) for a, b in zip(alpha, beta))
    return PathwaySpec(edges, x0, initial)


class WindowTooShort(ValueError):
    pass


class EnsembleFailure(RuntimeError):
    """Too many realizations of one noise level failed to yield metrics."""


def _check_window(times):
    if len(times) < 3:
        raise WindowTooShort("integration window holds fewer than 3 samples")


def vise(series: VelocitySeries) -> float:
    """Integrated squared deviation of the velocity from its time average."""
    t, c = np.asarray(series.times), np.asarray(series.values)
    _check_window(t)
    mean = np.trapezoid(c, t) / (t[-1] - t[0])
    return float(np.trapezoid((c - mean) ** 2, t))


def rise(series: ShapeResidualSeries) -> float:
    """Integrated squared shape residual."""
    t, r = np.asarray(series.times), np.asarray(series.values)
    _check_window(t)
    return float(np.trapezoid(r * r, t))


@dataclass
class FrameMetrics:
    velocity: VelocitySeries
    residual: ShapeResidualSeries
    vise: float
    rise: float


@dataclass
class Comparison:
    original: FrameMetrics
    rescaled: FrameMetrics
    coords: RescaledCoordinates
    trajectory: Trajectory = field(repr=False)
    t_start: float
    t_end: float
    t_J: float


def _stalled_message(traj: Trajectory, thr: float) -> str:
    moved = np.abs(traj.x[-1] - traj.x[0]) >= thr
    first = int(np.argmin(moved)) + 1 if not moved.all() else traj.x.shape[1]
    return (f"propagation failure: nodes {first}..{traj.x.shape[1]} unchanged "
            f"at t={traj.t[-1]:g}")


def run_comparison(spec: PathwaySpec, oracle: SpeedOracle,
                   config: IntegratorConfig | None = None,
                   coords: RescaledCoordinates | None = None,
                   full_series: bool = False) -> Comparison:
    """Integrate once and measure velocity and shape in both frames.

    VISE and RISE cover the window between the front passing ``s = 0.15`` and
    its arrival at the terminal node. With ``full_series`` the reported series
    start at ``t = 0``; otherwise they cover the window only. Original-frame
    speeds are divided by ``N``.
    """
    config = config or IntegratorConfig(t_end=5000.0)
    if not config.stop_on_arrival:
        config = IntegratorConfig(**{**config.to_dict(), "stop_on_arrival": True})
    if coords is None:
        coords = rescale(spec, oracle)
    traj = integrate(spec, config)
    if traj.arrival_time is None:
        raise NoPropagation(_stalled_message(traj, config.terminal_threshold))
    n = spec.n
    s_pos = coords.positions
    t_start = crossing_time(traj, s_pos, WINDOW_START_S)
    t_end = traj.arrival_time
    t_J = crossing_time(traj, s_pos, REFERENCE_S)
    j0 = int(np.searchsorted(traj.t, t_start, side="left"))
    j1 = int(np.searchsorted(traj.t, t_end, side="right"))  # samples with t_j <= t_end
    j1 = min(j1, len(traj.t) - 1)
    if j1 - j0 < 3:
        raise WindowTooShort("integration window holds fewer than 3 samples")
    first = 0 if full_series else j0

    o_pos = original_positions(n)
    v_o = velocity_series(traj, o_pos, Frame.Original, float(n), first, j1, scale=float(n))
    v_r = velocity_series(traj, s_pos, Frame.Rescaled, 1.0, first, j1)
    r_o = shape_residual(traj, o_pos, np.full(n, 1.0 / n), t_J, Frame.Original,
                         float(n), first, j1)
    r_r = shape_residual(traj, s_pos, coords.ds, t_J, Frame.Rescaled, 1.0, first, j1)
    for series in (v_o, v_r):
        series.valid_from = j0 - first

    def frame(v, r):
        return FrameMetrics(v, r, vise(v.window(traj.t[j0], math.inf)),
                            rise(r.window(traj.t[j0], math.inf)))

    return Comparison(frame(v_o, r_o), frame(v_r, r_r), coords, traj, t_start, t_end, t_J)


def default_sigma_grid() -> list[float]:
    return [round(0.1 * k, 10) for k in range(11)]


@dataclass
class Quartiles:
    median: float
    q1: float
    q3: float

    @classmethod
    def of(cls, values) -> "Quartiles":
        if len(values) == 0:
            return cls(math.nan, math.nan, math.nan)
        q1, med, q3 = np.percentile(np.asarray(values), [25, 50, 75], method="linear")
        return cls(float(med), float(q1), float(q3))


@dataclass
class SweepRow:
    sigma: float
    vise_original: Quartiles
    vise_rescaled: Quartiles
    rise_original: Quartiles
    rise_rescaled: Quartiles
    alpha_extrema: tuple[float, float]
    beta_extrema: tuple[float, float]
    included: int
    excluded: int


@dataclass
class SweepSummary:
    rows: list[SweepRow]
    details: list[dict] = field(default_factory=list, repr=False)

    @property
    def sigma_grid(self) -> list[float]:
        return [r.sigma for r in self.rows]

    def metric(self, name: str, stat: str = "median") -> np.ndarray:
        return np.array([getattr(getattr(r, name), stat) for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("sigma,metric,frame,median,q1,q3,excluded\n")
        for r in self.rows:
            for metric in ("vise", "rise"):
                for frame in ("original", "rescaled"):
                    q = getattr(r, f"{metric}_{frame}")
                    buf.write(f"{r.sigma:.10g},{metric.upper()},{frame},{q.median:.17g},"
                              f"{q.q1:.17g},{q.q3:.17g},{r.excluded}\n")
        return buf.getvalue()

    def extrema_csv(self) -> str:
        buf = io.StringIO()
        buf.write("sigma,param,mean_min,mean_max\n")
        for r in self.rows:
            for name, (lo, hi) in (("alpha", r.alpha_extrema), ("beta", r.beta_extrema)):
                buf.write(f"{r.sigma:.10g},{name},{lo:.17g},{hi:.17g}\n")
        return buf.getvalue()

    def details_jsonl(self) -> str:
        return "".join(json.dumps(d, sort_keys=True) + "\n" for d in self.details)

    def to_dict(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows]}


EXCLUDABLE = (NoPropagation, NoCrossing, NoHomogeneousWave, IntegrationError, WindowTooShort)


def _realization_job(args):
    s, k, table, config = args
    spec = sample_realization(s, k)
    a, b, _ = spec.arrays()
    rec = {"sigma": s.sigma, "realization": k,
           "alpha_min": float(a.min()), "alpha_max": float(a.max()),
           "beta_min": float(b.min()), "beta_max": float(b.max())}
    oracle = SpeedOracle(Mode.Table, table)
    try:
        cmp = run_comparison(spec, oracle, config)
    except EXCLUDABLE as exc:
        rec.update(excluded=True, reason=f"{type(exc).__name__}: {exc}")
        return rec
    rec.update(excluded=False,
               vise_original=cmp.original.vise, vise_rescaled=cmp.rescaled.vise,
               rise_original=cmp.original.rise, rise_rescaled=cmp.rescaled.rise,
               t_start=cmp.t_start, t_end=cmp.t_end, t_J=cmp.t_J)
    return rec


def sweep_B_range(s: StochasticEnsembleSpec, sigma_grid) -> tuple[float, float]:
    lo, hi = math.inf, -math.inf
    for sigma in sigma_grid:
        sub = StochasticEnsembleSpec(**{**asdict(s), "sigma": sigma})
        for k in range(s.realizations):
            _, b, _ = sample_realization(sub, k).arrays()
            lo, hi = min(lo, b.min()), max(hi, b.max())
    return 2 * lo - 1, 2 * hi - 1


def sweep_table(s: StochasticEnsembleSpec, sigma_grid, n_B: int = 32,
                margin: float = 0.1, config=None) -> SpeedTable:
    """Unbiased speed table spanning every sampled ``B`` with a margin."""
    B_lo, B_hi = sweep_B_range(s, sigma_grid)
    return SpeedTable.build(1.0 + (B_lo - 1.0) / (1.0 + margin),
                            1.0 + (B_hi - 1.0) * (1.0 + margin), n_B, [s.phi * 0.0],
                            config=config)


def sweep(s: StochasticEnsembleSpec, sigma_grid=None, oracle: SpeedOracle | None = None,
          config: IntegratorConfig | None = None, threads: int = 1,
          progress=None, n_B: int = 32, margin: float = 0.1) -> SweepSummary:
    """Run ``s.realizations`` comparisons at each noise level and aggregate them."""
    if s.phi != 0.0:
        raise ValueError("ensemble sweeps use unbiased edges (phi = 0)")
    sigma_grid = default_sigma_grid() if sigma_grid is None else list(sigma_grid)
    if any(not 0.0 <= g <= 1.0 for g in sigma_grid):
        raise ValueError("sigma grid must lie in [0, 1]")
    config = config or IntegratorConfig(t_end=5000.0, stop_on_arrival=True)
    B_lo, B_hi = sweep_B_range(s, sigma_grid)
    table = oracle.table if oracle is not None and oracle.mode is Mode.Table else None
    if table is None or not table.covers(B_lo, B_hi):
        table = sweep_table(s, sigma_grid, n_B, margin)

    rows, details = [], []
    pool = ProcessPoolExecutor(threads) if threads > 1 else None
    try:
        for sigma in sigma_grid:
            sub = StochasticEnsembleSpec(**{**asdict(s), "sigma": sigma})
            jobs = [(sub, k, table, config) for k in range(s.realizations)]
            recs = list(pool.map(_realization_job, jobs)) if pool else [
                _realization_job(j) for j in jobs]
            recs.sort(key=lambda r: r["realization"])
            if progress:
                progress(sigma, recs)
            details.extend(recs)
            rows.append(_aggregate(sigma, recs))
    finally:
        if pool:
            pool.shutdown()
    return SweepSummary(rows, details)


def _aggregate(sigma, recs) -> SweepRow:
    ok = [r for r in recs if not r["excluded"]]
    excluded = len(recs) - len(ok)
    if excluded > MAX_EXCLUDED_FRACTION * len(recs):
        raise EnsembleFailure(
            f"sigma={sigma:g}: {excluded}/{len(recs)} realizations failed to propagate")

    def q(key):
        return Quartiles.of([r[key] for r in ok])

    def mean(key):
        return float(np.mean([r[key] for r in recs]))

    return SweepRow(sigma, q("vise_original"), q("vise_rescaled"), q("rise_original"),
                    q("rise_rescaled"), (mean("alpha_min"), mean("alpha_max")),
                    (mean("beta_min"), mean("beta_max")), len(ok), excluded)
