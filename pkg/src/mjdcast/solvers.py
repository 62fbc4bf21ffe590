"""Trajectory simulation over a parameter schedule.

Two solvers share one core.  Both integrate the log-state on a uniform grid
t_i = i / M with M steps per unit interval; the increment over a step is

    alpha + beta + zeta
    alpha = (mu - lam*k - sigma^2/2) / M            (drift)
    beta  = sigma * z1 / sqrt(M),  z1 ~ N(0, 1)     (diffusion)
    zeta  = kap*nu + sqrt(kap)*gamma*z2,            (jumps)
            kap ~ Pois(lam / M), z2 ~ N(0, 1)

with parameters taken from the interval containing the step's start time.
The restart solver additionally replaces the running log-state with the log
of the closed-form conditional mean at the start of every unit interval
(the first fine step of interval tau is anchored at ln E[S_{tau-1}]; for
tau = 1 this is ln s0, a no-op).  Resetting to a deterministic anchor stops
variance from accumulating across intervals, which is what makes ensemble
mean estimates usable over long horizons.

Reproducibility contract: every path owns an independent counter-based
stream derived from (seed, path_index).  Each step consumes exactly three
uniforms from that stream, in the fixed order (z1, jump count, z2); normals
are obtained by inverse-CDF so the mapping from stream position to role
never changes.  Identical (schedule, s0, config, path_index) gives a
bitwise-identical path regardless of how many paths run concurrently.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np
from scipy.special import ndtri

from .errors import DataError
from .sde import MjdParams, ParamSchedule, conditional_mean, log_return_moments

__all__ = [
    "SolverConfig",
    "SimPath",
    "WeakErrorRow",
    "sample_jump_increment",
    "simulate_vanilla",
    "simulate_restart",
    "simulate_ensemble",
    "empirical_weak_error",
    "path_to_csv",
    "paths_to_csv",
]

_MODES = ("vanilla", "restart")


@dataclass(frozen=True)
class SolverConfig:
    """Grid resolution, solver mode, and base seed.

    anchor_mean_log switches the restart anchor from ln E[S] (the default,
    which keeps integer-time ensemble means aligned with the closed-form
    conditional mean) to the exact E[ln S]; it is off by default and exists
    for diagnostics only.
    """

    steps_per_unit: int
    mode: str = "restart"
    seed: int = 0
    anchor_mean_log: bool = False

    def __post_init__(self) -> None:
        if not isinstance(self.steps_per_unit, int) or self.steps_per_unit < 1:
            raise DataError(f"steps_per_unit must be an integer >= 1, got {self.steps_per_unit!r}")
        if self.mode not in _MODES:
            raise DataError(f"mode must be one of {_MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class SimPath:
    """One simulated trajectory on the fine grid i / M, i = 0..M*T_f."""

    times: np.ndarray
    log_values: np.ndarray
    jump_counts: np.ndarray
    seed: tuple[int, int]  # (master seed, path index)

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.log_values)


def _path_uniforms(seed: int, path_index: int, n: int) -> np.ndarray:
    """n uniforms from the path's own counter-based (Philox) stream."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(path_index,))
    u = np.random.Generator(np.random.Philox(seed=ss)).random(n)
    # random() can return exactly 0.0; keep ndtri finite
    return np.clip(u, 1e-300, None)


def _poisson_inverse(means: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Poisson counts by CDF inversion (sequential search), elementwise.

    Exact and deterministic for the moderate means that occur at sane step
    sizes (lam / M well below ~20).
    """
    k = np.zeros(u.shape, dtype=np.int64)
    p = np.exp(-means)
    cdf = p.copy()
    active = u > cdf
    j = 0
    while active.any():
        j += 1
        if j > 1000:  # only reachable with u within float eps of 1
            break
        p[active] *= means[active] / j
        cdf[active] += p[active]
        k[active] = j
        active &= u > cdf
    return k


def sample_jump_increment(params: MjdParams, dt: float, rng: np.random.Generator) -> float:
    """One compound-jump increment kap*nu + sqrt(kap)*gamma*z, kap ~ Pois(lam*dt).

    Mean lam*dt*nu, variance lam*dt*(gamma^2 + nu^2).  Consumes two draws
    from rng in the order (jump count uniform, size normal).
    """
    if dt <= 0:
        raise DataError(f"dt must be > 0, got {dt}")
    u = float(np.clip(rng.random(), 1e-300, None))
    kap = int(_poisson_inverse(np.array([params.lam * dt]), np.array([u]))[0])
    z = float(ndtri(np.clip(rng.random(), 1e-300, None)))
    return kap * params.nu + math.sqrt(kap) * params.gamma * z


def _per_step_params(schedule: ParamSchedule, m: int):
    """Per-fine-step coefficient arrays, indexed by the step's start time."""
    idx = np.repeat(np.arange(schedule.horizon), m)
    mu = np.array([s.mu for s in schedule.steps])[idx]
    sig = np.array([s.sigma for s in schedule.steps])[idx]
    lam = np.array([s.lam for s in schedule.steps])[idx]
    nu = np.array([s.nu for s in schedule.steps])[idx]
    gam = np.array([s.gamma for s in schedule.steps])[idx]
    k = np.expm1(nu + 0.5 * gam**2)
    return mu, sig, lam, nu, gam, k


def _restart_anchors(schedule: ParamSchedule, s0: float, anchor_mean_log: bool) -> np.ndarray:
    """Log anchor for each unit interval tau = 1..T_f, at time tau - 1."""
    mu = np.array([s.mu for s in schedule.steps])
    ln_mean = math.log(s0) + np.concatenate(([0.0], np.cumsum(mu)[:-1]))
    if anchor_mean_log:
        means = [log_return_moments(schedule, float(tau)).mean for tau in range(schedule.horizon)]
        return math.log(s0) + np.asarray(means)
    return ln_mean


def _simulate_core(
    schedule: ParamSchedule,
    s0: float,
    config: SolverConfig,
    path_index: int,
    mode: str,
) -> tuple[np.ndarray, np.ndarray]:
    m = config.steps_per_unit
    n_steps = m * schedule.horizon
    mu, sig, lam, nu, gam, k = _per_step_params(schedule, m)

    u = _path_uniforms(config.seed, path_index, 3 * n_steps)
    z1 = ndtri(u[0::3])
    kap = _poisson_inverse(lam / m, u[1::3])
    z2 = ndtri(u[2::3])

    inc = (mu - lam * k - 0.5 * sig**2) / m + sig * z1 / math.sqrt(m) \
        + kap * nu + np.sqrt(kap) * gam * z2

    log_values = np.empty(n_steps + 1)
    log_values[0] = math.log(s0)
    if mode == "vanilla":
        log_values[1:] = log_values[0] + np.cumsum(inc)
    else:
        anchors = _restart_anchors(schedule, s0, config.anchor_mean_log)
        for tau in range(schedule.horizon):
            seg = slice(tau * m, (tau + 1) * m)
            log_values[1 + tau * m : 1 + (tau + 1) * m] = anchors[tau] + np.cumsum(inc[seg])
    return log_values, kap


def _simulate(schedule: ParamSchedule, s0: float, config: SolverConfig,
              path_index: int, mode: str) -> SimPath:
    if not s0 > 0:
        raise DataError(f"s0 must be > 0, got {s0}")
    log_values, kap = _simulate_core(schedule, s0, config, path_index, mode)
    n_steps = config.steps_per_unit * schedule.horizon
    times = np.arange(n_steps + 1) / config.steps_per_unit
    return SimPath(times=times, log_values=log_values, jump_counts=kap,
                   seed=(config.seed, path_index))


def simulate_vanilla(schedule: ParamSchedule, s0: float, config: SolverConfig,
                     path_index: int = 0) -> SimPath:
    """Plain Euler-Maruyama path of the log-state over the schedule."""
    return _simulate(schedule, s0, config, path_index, "vanilla")


def simulate_restart(schedule: ParamSchedule, s0: float, config: SolverConfig,
                     path_index: int = 0) -> SimPath:
    """Euler-Maruyama path with the state re-anchored at each unit interval."""
    return _simulate(schedule, s0, config, path_index, "restart")


def simulate_ensemble(
    schedule: ParamSchedule,
    s0: float,
    config: SolverConfig,
    n_paths: int,
    at: str = "integers",
    path_offset: int = 0,
) -> np.ndarray:
    """Log-values of n_paths independent paths, without storing full paths.

    at="integers" returns shape (n_paths, T_f) sampled at tau = 1..T_f;
    at="full" returns shape (n_paths, M*T_f + 1) including t = 0.
    Path i uses the stream for path_offset + i.
    """
    if at not in ("integers", "full"):
        raise DataError(f"unknown sampling request {at!r}")
    if not s0 > 0:
        raise DataError(f"s0 must be > 0, got {s0}")
    m = config.steps_per_unit
    tf = schedule.horizon
    cols = tf if at == "integers" else m * tf + 1
    out = np.empty((n_paths, cols))
    pick = m * np.arange(1, tf + 1) if at == "integers" else slice(None)
    for i in range(n_paths):
        log_values, _ = _simulate_core(schedule, s0, config, path_offset + i, config.mode)
        out[i] = log_values[pick]
    return out


@dataclass(frozen=True)
class WeakErrorRow:
    """|MC estimate - closed form| of E[g(S_tau)] at one integer time."""

    tau: int
    mc_estimate: float
    exact: float
    abs_error: float
    std_error: float


def empirical_weak_error(
    schedule: ParamSchedule,
    s0: float,
    mode: str,
    m: int,
    n_paths: int,
    g: str = "identity",
    seed: int = 0,
) -> list[WeakErrorRow]:
    """Monte-Carlo weak error table at integer times for g in {identity, log}.

    The ground truth E[g(S_tau)] comes from the closed forms: the
    conditional mean for g = identity, and the log-return mean for g = log.
    """
    if g not in ("identity", "log"):
        raise DataError(f"unsupported g {g!r}")
    config = SolverConfig(steps_per_unit=m, mode=mode, seed=seed)
    logv = simulate_ensemble(schedule, s0, config, n_paths, at="integers")
    samples = logv if g == "log" else np.exp(logv)
    rows = []
    for tau in range(1, schedule.horizon + 1):
        col = samples[:, tau - 1]
        if g == "identity":
            exact = conditional_mean(schedule, s0, float(tau))
        else:
            exact = math.log(s0) + log_return_moments(schedule, float(tau)).mean
        est = float(col.mean())
        se = float(col.std(ddof=1) / math.sqrt(n_paths))
        rows.append(WeakErrorRow(tau=tau, mc_estimate=est, exact=exact,
                                 abs_error=abs(est - exact), std_error=se))
    return rows


def path_to_csv(path: SimPath, fh: IO[str]) -> None:
    """Write one path as columns time,value,jump_count.

    jump_count on row i is the sampled count of the step ending at that
    time; the t = 0 row carries 0.
    """
    w = csv.writer(fh)
    w.writerow(["time", "value", "jump_count"])
    counts = np.concatenate(([0], path.jump_counts))
    for t, v, c in zip(path.times, path.values, counts):
        w.writerow([repr(float(t)), repr(float(v)), int(c)])


def paths_to_csv(paths: Sequence[SimPath] | Iterable[SimPath], fh: IO[str]) -> None:
    """Long-format export of several paths with a path_id column."""
    w = csv.writer(fh)
    w.writerow(["path_id", "time", "value", "jump_count"])
    for pid, path in enumerate(paths):
        counts = np.concatenate(([0], path.jump_counts))
        for t, v, c in zip(path.times, path.values, counts):
            w.writerow([pid, repr(float(t)), repr(float(v)), int(c)])
