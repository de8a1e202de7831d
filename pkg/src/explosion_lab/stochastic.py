"""Monte Carlo and deterministic integrators.

Noise comes from Philox generators keyed by (master_seed, stream_id), so every path
owns an independent, reproducible stream no matter how paths are batched or
distributed over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numba
import numpy as np

from . import model
from .model import PowerLawPotential, RawState, drift, x_rhs

CHUNK = 4096
OVERFLOW_BOUND = 1e6
X_SINGULAR_BAND = 1e-9


class InvalidPathError(ArithmeticError):
    """A simulated path left the float range or produced NaN."""


@dataclass(frozen=True)
class NoiseProcess:
    master_seed: int
    dtau: float
    stream_id: int = 0

    def __post_init__(self):
        if not self.dtau > 0:
            raise ValueError(f"dtau must be > 0, got {self.dtau}")
        if self.master_seed < 0 or self.stream_id < 0:
            raise ValueError("seed and stream id must be non-negative")

    def generator(self, *sub: int) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id, *sub))
        return np.random.Generator(np.random.Philox(seq))

    def with_stream(self, stream_id: int) -> "NoiseProcess":
        return replace(self, stream_id=stream_id)


def wiener_increments(process: NoiseProcess, n: int) -> np.ndarray:
    """n independent Normal(0, dtau) increments."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.sqrt(process.dtau) * process.generator().standard_normal(n)


def quadratic_variation(process: NoiseProcess, t: float) -> float:
    n = int(round(t / process.dtau))
    dw = wiener_increments(process, n)
    return float(np.dot(dw, dw))


@dataclass(frozen=True)
class DiffQuotientReport:
    n_values: tuple
    stds: tuple
    slope: float
    intercept: float
    std_over_sqrt_n: tuple
    samples: int


def diff_quotient_stat(process: NoiseProcess, n_values, samples: int = 100_000) -> DiffQuotientReport:
    """Spread of X_n = n [W(t + 1/n) - W(t)] over non-overlapping windows.

    std(X_n) grows like sqrt(n), so the fitted log-log slope is 1/2 and the
    difference quotient has no limit as n -> infinity.
    """
    n_values = tuple(float(n) for n in n_values)
    if len(set(n_values)) < 2:
        raise ValueError("need at least two distinct n values")
    if any(n <= 0 for n in n_values):
        raise ValueError("n values must be positive")
    stds = []
    for i, n in enumerate(n_values):
        gen = process.generator(1, i)
        dw = math.sqrt(1.0 / n) * gen.standard_normal(samples)
        stds.append(float(np.std(n * dw, ddof=1)))
    slope, intercept = np.polyfit(np.log(n_values), np.log(stds), 1)
    return DiffQuotientReport(
        n_values=n_values,
        stds=tuple(stds),
        slope=float(slope),
        intercept=float(intercept),
        std_over_sqrt_n=tuple(s / math.sqrt(n) for s, n in zip(stds, n_values)),
        samples=samples,
    )


def euler_maruyama_step(Y, lam, dW, dtau, drift_enabled: bool = True):
    if drift_enabled:
        return Y + drift(Y, lam) * dtau + dW
    return Y + dW


@dataclass(frozen=True)
class PathConfig:
    y0: float = 0.0
    lam: float = 0.0
    dtau: float = 1e-4
    tau_max: float = 50.0
    exit_band: float = 1e-6
    drift_enabled: bool = True
    record_trajectory: bool = False

    def __post_init__(self):
        if not 0 < self.exit_band < 1:
            raise ValueError("exit_band must lie in (0, 1)")
        if not self.dtau > 0:
            raise ValueError("dtau must be > 0")
        if not self.tau_max > 0:
            raise ValueError("tau_max must be > 0")
        if not abs(self.y0) < 1 - self.exit_band:
            raise ValueError(f"|y0| must be < 1 - exit_band, got y0={self.y0}")

    @property
    def effective_dtau(self) -> float:
        """Step actually used; stiff drifts (|lam| >= 100) get dtau <= 1e-4/|lam|."""
        if self.drift_enabled and abs(self.lam) >= 100:
            return min(self.dtau, 1e-4 / abs(self.lam))
        return self.dtau

    @property
    def max_steps(self) -> int:
        return int(math.ceil(self.tau_max / self.effective_dtau - 1e-9))


EXITED, CENSORED, INVALID = 0, 1, 2
_OUTCOME_NAMES = {EXITED: "exited", CENSORED: "censored", INVALID: "invalid"}


@dataclass(frozen=True)
class PathResult:
    outcome: str
    side: int  # -1 or +1 when exited, else 0
    exit_time: Optional[float]
    steps: int
    tau_max: float
    trajectory: Optional[np.ndarray] = None


@numba.njit(cache=True)
def _advance(y, lam, dtau, dw, edge, drift_on, traj):
    """Euler-Maruyama over one chunk of increments.

    Returns (y, steps_taken, status) with status 0 = exited, 1 = still running,
    2 = invalid.  traj (length 0 to disable) receives the state after each step.
    """
    record = traj.shape[0] > 0
    for k in range(dw.shape[0]):
        if drift_on:
            y = y + (y * y - 1.0) * (3.0 * y + lam) * dtau + dw[k]
        else:
            y = y + dw[k]
        if record:
            traj[k] = y
        if not np.isfinite(y) or abs(y) > OVERFLOW_BOUND:
            return y, k + 1, INVALID
        if abs(y) >= edge:
            return y, k + 1, EXITED
    return y, dw.shape[0], CENSORED


def _simulate_block(cfg: PathConfig, master_seed: int, stream_ids, record: bool = False):
    """Simulate each path on its own stream; increments are drawn in fixed CHUNK blocks."""
    stream_ids = list(stream_ids)
    n = len(stream_ids)
    dtau = cfg.effective_dtau
    sq = math.sqrt(dtau)
    edge = 1.0 - cfg.exit_band
    max_steps = cfg.max_steps
    outcome = np.full(n, CENSORED, dtype=np.int8)
    side = np.zeros(n, dtype=np.int8)
    steps = np.full(n, max_steps, dtype=np.int64)
    pieces = [np.array([cfg.y0])] if record else None
    empty = np.zeros(0)
    for j, sid in enumerate(stream_ids):
        gen = NoiseProcess(master_seed, dtau, sid).generator()
        y, done = float(cfg.y0), 0
        while done < max_steps:
            m = min(CHUNK, max_steps - done)
            dw = sq * gen.standard_normal(CHUNK)
            traj = np.empty(m) if record else empty
            y, k, status = _advance(y, float(cfg.lam), dtau, dw[:m], edge, cfg.drift_enabled, traj)
            done += k
            if record:
                pieces.append(traj[:k])
            if status != CENSORED:
                outcome[j] = status
                side[j] = 0 if status == INVALID else (1 if y > 0 else -1)
                steps[j] = done
                break
    return outcome, side, steps, (np.concatenate(pieces) if record else None)


def simulate_path(cfg: PathConfig, process: NoiseProcess) -> PathResult:
    """Run one path on stream process.stream_id until it leaves (-1+eps, 1-eps) or is censored."""
    outcome, side, steps, traj = _simulate_block(
        cfg, process.master_seed, [process.stream_id], record=cfg.record_trajectory)
    if outcome[0] == INVALID:
        raise InvalidPathError(f"path overflowed after {int(steps[0])} steps")
    dtau = cfg.effective_dtau
    exited = outcome[0] == EXITED
    return PathResult(
        outcome=_OUTCOME_NAMES[int(outcome[0])],
        side=int(side[0]),
        exit_time=float(steps[0] * dtau) if exited else None,
        steps=int(steps[0]),
        tau_max=cfg.tau_max,
        trajectory=traj,
    )


@dataclass(frozen=True)
class PathEnsembleStats:
    n_paths: int
    n_exited: int
    n_censored: int
    n_invalid: int
    exit_left: int
    exit_right: int
    exit_fraction: float
    mean_exit_time: Optional[float]
    mean_exit_time_stderr: Optional[float]
    median_exit_time: Optional[float]
    hist_edges: tuple
    hist_counts: tuple
    dtau: float
    degenerate: bool

    def as_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def summarize(outcome, side, steps, dtau: float, bins: int = 50) -> PathEnsembleStats:
    n = len(outcome)
    exited = outcome == EXITED
    times = steps[exited] * dtau
    n_ex = int(exited.sum())
    n_valid = n - int((outcome == INVALID).sum())
    if n_ex:
        mean = float(times.mean())
        median = float(np.median(times))
        stderr = float(times.std(ddof=1) / math.sqrt(n_ex)) if n_ex > 1 else None
        counts, edges = np.histogram(times, bins=bins, range=(0.0, float(times.max())))
    else:
        mean = median = stderr = None
        counts, edges = np.zeros(0, dtype=int), np.zeros(0)
    return PathEnsembleStats(
        n_paths=n,
        n_exited=n_ex,
        n_censored=int((outcome == CENSORED).sum()),
        n_invalid=int((outcome == INVALID).sum()),
        exit_left=int((exited & (side < 0)).sum()),
        exit_right=int((exited & (side > 0)).sum()),
        exit_fraction=n_ex / n_valid if n_valid else 0.0,
        mean_exit_time=mean,
        mean_exit_time_stderr=stderr,
        median_exit_time=median,
        hist_edges=tuple(float(e) for e in edges),
        hist_counts=tuple(int(c) for c in counts),
        dtau=dtau,
        degenerate=n_ex < 2,
    )


def _block_job(args):
    cfg, seed, ids = args
    outcome, side, steps, _ = _simulate_block(cfg, seed, ids)
    return outcome, side, steps


def simulate_ensemble(cfg: PathConfig, n_paths: int, process: NoiseProcess,
                      workers: int = 1, block_size: int = 10_000, bins: int = 50) -> PathEnsembleStats:
    """Simulate paths 0..n_paths-1 (stream_id = path index) and aggregate in index order."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    n_blocks = max(workers, math.ceil(n_paths / block_size))
    bounds = np.linspace(0, n_paths, min(n_blocks, n_paths) + 1).astype(int)
    jobs = [(cfg, process.master_seed, range(a, b)) for a, b in zip(bounds[:-1], bounds[1:])]
    if workers <= 1:
        parts = [_block_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_block_job, jobs))
    outcome = np.concatenate([p[0] for p in parts])
    side = np.concatenate([p[1] for p in parts])
    steps = np.concatenate([p[2] for p in parts])
    return summarize(outcome, side, steps, cfg.effective_dtau, bins=bins)


@dataclass(frozen=True)
class XOdeResult:
    tau: np.ndarray
    X: np.ndarray
    flag: str  # "boundary_singularity" | "horizon_reached"
    rejected_steps: int


def _rk4(fun, y, h):
    k1 = fun(y)
    k2 = fun(y + 0.5 * h * k1)
    k3 = fun(y + 0.5 * h * k2)
    k4 = fun(y + h * k3)
    return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_x_ode(x0: float, lam: float, dtau: float = 1e-3, tau_max: float = 50.0,
                    max_halvings: int = 200) -> XOdeResult:
    """Classical RK4 for X' = f(X), stopping once |X| reaches 1 - 1e-9.

    A step that leaves [-1, 1] (or evaluates f outside it) is rejected and the
    step size halved; the step is never enlarged again.
    """
    if not abs(x0) < 1:
        raise ValueError(f"|x0| must be < 1, got {x0}")
    if not (dtau > 0 and tau_max > 0):
        raise ValueError("dtau and tau_max must be > 0")
    fun = lambda X: x_rhs(X, lam)  # noqa: E731
    taus, xs = [0.0], [float(x0)]
    tau, X, h = 0.0, float(x0), dtau
    halvings = rejected = 0
    edge = 1.0 - X_SINGULAR_BAND
    while tau < tau_max:
        h_step = min(h, tau_max - tau)
        try:
            X_new = _rk4(fun, X, h_step)
        except model.DomainError:
            X_new = math.inf
        if not abs(X_new) <= 1.0:
            rejected += 1
            halvings += 1
            if halvings > max_halvings:
                return XOdeResult(np.array(taus), np.array(xs), "boundary_singularity", rejected)
            h *= 0.5
            continue
        tau += h_step
        X = float(X_new)
        taus.append(tau)
        xs.append(X)
        if abs(X) >= edge:
            return XOdeResult(np.array(taus), np.array(xs), "boundary_singularity", rejected)
    return XOdeResult(np.array(taus), np.array(xs), "horizon_reached", rejected)


@dataclass(frozen=True)
class RawTrajectory:
    t: np.ndarray
    tau: np.ndarray
    phi: np.ndarray
    H: np.ndarray
    f: np.ndarray
    residual: np.ndarray
    flag: str  # "completed" | "model_breakdown"

    def normalized(self, pot: PowerLawPotential):
        """(X, Y) along the trajectory."""
        V = pot.value(self.phi)
        return np.sqrt(V / 3.0) / self.H, self.f / (model.SQRT6 * self.H)


def integrate_raw_system(raw0: RawState, pot: PowerLawPotential, noise: Optional[NoiseProcess] = None,
                         dt: float = 1e-3, t_max: float = 10.0,
                         tau_max: Optional[float] = None) -> RawTrajectory:
    """Integrate (phi, H, f) in cosmic time t, also tracking tau = int H dt.

    Without noise this is RK4 on the deterministic system.  With noise it is
    Euler-Maruyama with H^(5/2) dW forcing only the f equation; the increments
    come from ``noise`` (whose dtau must equal dt).  Stops at t_max, or earlier
    once tau reaches tau_max, or with flag ``model_breakdown`` if H <= 0.
    """
    raw0.check(pot)
    if noise is not None and not math.isclose(noise.dtau, dt, rel_tol=1e-12):
        raise ValueError("noise.dtau must equal dt")
    n_steps = int(math.ceil(t_max / dt - 1e-9))

    def rhs(s):
        phi, H, f, _ = s
        dphi, dH, df = model.raw_rhs_arrays(phi, H, f, pot)
        return np.array([dphi, dH, df, H])

    state = np.array([raw0.phi, raw0.H, raw0.f, 0.0])
    rows, times = [state.copy()], [0.0]
    flag = "completed"
    dws = wiener_increments(noise, n_steps) if noise is not None else None
    for i in range(n_steps):
        h = min(dt, t_max - i * dt)
        if h <= 0:
            break
        if dws is None:
            state = _rk4(rhs, state, h)
        else:
            kick = state[1] ** 2.5 * dws[i]
            state = state + h * rhs(state)
            state[2] += kick
        if not state[1] > 0 or not np.all(np.isfinite(state)):
            flag = "model_breakdown"
            break
        rows.append(state.copy())
        times.append(i * dt + h)
        if tau_max is not None and state[3] >= tau_max:
            break
    arr = np.array(rows)
    t = np.array(times)
    resid = model.friedmann_residual(arr[:, 0], arr[:, 1], arr[:, 2], pot)
    return RawTrajectory(t=t, tau=arr[:, 3], phi=arr[:, 0], H=arr[:, 1], f=arr[:, 2],
                         residual=resid, flag=flag)
