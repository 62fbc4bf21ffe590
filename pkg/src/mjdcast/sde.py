"""Parameter types and closed-form quantities of the Merton jump diffusion.

The process modelled throughout the package is the positive-valued SDE

    dS_t = S_t ((mu_t - lam_t * k_t) dt + sigma_t dW_t + dQ_t),

where Q_t is a compound Poisson process with intensity lam_t whose
multiplicative jump sizes Y satisfy ln Y ~ N(nu_t, gamma_t^2), and
k_t = E[Y - 1] = exp(nu_t + gamma_t^2 / 2) - 1 compensates the drift.

Coefficients are piecewise constant on unit intervals: a ``ParamSchedule``
holds one ``MjdParams`` per future step tau = 1..T_f, and any continuous
time t in [0, T_f) resolves to step index floor(t) + 1.  Integer times
belong to the *following* interval; this boundary convention is the single
source of truth for every module in the package.

All functions here are pure and operate on immutable inputs, so they are
safe to call concurrently.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable

from .errors import DataError

__all__ = [
    "MjdParams",
    "ParamSchedule",
    "MomentPair",
    "expected_jump_ratio",
    "step_index",
    "conditional_mean",
    "log_return_moments",
    "stationary_cumulants",
]

# JSON field names for one step of a schedule ("lambda" is a keyword, the
# attribute is called ``lam``).
_JSON_FIELDS = ("mu", "sigma", "lambda", "nu", "gamma")


def expected_jump_ratio(nu: float, gamma: float) -> float:
    """Expected relative jump size k = E[Y - 1] = exp(nu + gamma^2/2) - 1.

    For log-normal jumps with ln Y ~ N(nu, gamma^2).  Always > -1.
    """
    if not (math.isfinite(nu) and math.isfinite(gamma)):
        raise DataError(f"non-finite jump parameters: nu={nu}, gamma={gamma}")
    if gamma < 0:
        raise DataError(f"gamma must be >= 0, got {gamma}")
    return math.expm1(nu + 0.5 * gamma * gamma)


@dataclass(frozen=True)
class MjdParams:
    """SDE coefficients for one unit-time step.

    mu:    drift rate per unit time (expected return)
    sigma: diffusion volatility per sqrt(unit time), > 0
    lam:   jump intensity, expected jumps per unit time, >= 0
    nu:    mean of the log jump ratio ln Y
    gamma: std-dev of the log jump ratio, > 0
    """

    mu: float
    sigma: float
    lam: float
    nu: float
    gamma: float

    def __post_init__(self) -> None:
        for name in ("mu", "sigma", "lam", "nu", "gamma"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise DataError(f"MjdParams.{name} must be finite, got {v!r}")
        if self.sigma <= 0:
            raise DataError(f"sigma must be > 0, got {self.sigma}")
        if self.gamma <= 0:
            raise DataError(f"gamma must be > 0, got {self.gamma}")
        if self.lam < 0:
            raise DataError(f"lambda must be >= 0, got {self.lam}")

    @property
    def k(self) -> float:
        """Jump compensation term E[Y - 1]."""
        return expected_jump_ratio(self.nu, self.gamma)

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "sigma": self.sigma,
            "lambda": self.lam,
            "nu": self.nu,
            "gamma": self.gamma,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MjdParams":
        missing = [f for f in _JSON_FIELDS if f not in d]
        if missing:
            raise DataError(f"parameter record missing fields: {missing}")
        return cls(
            mu=float(d["mu"]),
            sigma=float(d["sigma"]),
            lam=float(d["lambda"]),
            nu=float(d["nu"]),
            gamma=float(d["gamma"]),
        )


@dataclass(frozen=True)
class ParamSchedule:
    """Piecewise-constant coefficients over a future horizon of T_f unit steps.

    ``steps[tau - 1]`` governs the interval (tau - 1, tau].
    """

    steps: tuple[MjdParams, ...]

    def __init__(self, steps: Iterable[MjdParams]):
        steps = tuple(steps)
        if len(steps) < 1:
            raise DataError("schedule must have at least one step")
        if not all(isinstance(s, MjdParams) for s in steps):
            raise DataError("schedule steps must be MjdParams")
        object.__setattr__(self, "steps", steps)

    @property
    def horizon(self) -> int:
        return len(self.steps)

    @classmethod
    def constant(cls, params: MjdParams, horizon: int) -> "ParamSchedule":
        if horizon < 1:
            raise DataError(f"horizon must be >= 1, got {horizon}")
        return cls((params,) * horizon)

    def at(self, t: float) -> MjdParams:
        """Parameters governing time t in [0, horizon)."""
        return self.steps[step_index(t, self.horizon) - 1]

    def to_json(self) -> str:
        return json.dumps([s.to_dict() for s in self.steps])

    @classmethod
    def from_json(cls, text: str) -> "ParamSchedule":
        records = json.loads(text)
        if not isinstance(records, list):
            raise DataError("schedule JSON must be an array of records")
        return cls(MjdParams.from_dict(r) for r in records)


def step_index(t: float, horizon: int) -> int:
    """Map t in [0, horizon) to the 1-based step index floor(t) + 1.

    Integer times are assigned to the following interval, e.g. t = 2.0 -> 3.
    """
    if not 0 <= t < horizon:
        raise DataError(f"time {t} outside [0, {horizon})")
    return int(math.floor(t)) + 1


def _interval_coverage(horizon: int, t: float) -> list[tuple[int, float]]:
    """(step, duration) pairs covering [0, t] for t in [0, horizon]."""
    if not 0 <= t <= horizon:
        raise DataError(f"time {t} outside [0, {horizon}]")
    out = []
    for tau in range(1, horizon + 1):
        d = min(t, tau) - (tau - 1)
        if d <= 0:
            break
        out.append((tau, d))
    return out


def conditional_mean(schedule: ParamSchedule, s0: float, t: float) -> float:
    """Closed-form E[S_t | history] = s0 * exp(integrated drift up to t).

    For the piecewise-constant schedule the integral is
    sum_{j < rho_t} mu_j + (t - rho_t + 1) mu_{rho_t}; at integer t = tau
    this reduces to s0 * exp(sum_{j <= tau} mu_j).
    """
    if not s0 > 0:
        raise DataError(f"s0 must be > 0, got {s0}")
    total = 0.0
    for tau, d in _interval_coverage(schedule.horizon, t):
        total += schedule.steps[tau - 1].mu * d
    return s0 * math.exp(total)


@dataclass(frozen=True)
class MomentPair:
    """Mean and variance of the log-return ln(S_t / S_0)."""

    mean: float
    variance: float

    def __post_init__(self) -> None:
        if self.variance < 0:
            raise DataError(f"variance must be >= 0, got {self.variance}")


def log_return_moments(schedule: ParamSchedule, t: float) -> MomentPair:
    """Exact moments of ln(S_t / S_0) under the piecewise-constant schedule.

    Per covered interval of length d the contributions are
      mean:     (mu - lam*k - sigma^2/2 + lam*nu) * d
      variance: (sigma^2 + lam*(gamma^2 + nu^2)) * d
    and both are additive over disjoint intervals.
    """
    mean = 0.0
    var = 0.0
    for tau, d in _interval_coverage(schedule.horizon, t):
        p = schedule.steps[tau - 1]
        mean += (p.mu - p.lam * p.k - 0.5 * p.sigma**2 + p.lam * p.nu) * d
        var += (p.sigma**2 + p.lam * (p.gamma**2 + p.nu**2)) * d
    return MomentPair(mean=mean, variance=var)


def stationary_cumulants(params: MjdParams, t: float) -> tuple[float, float, float, float]:
    """First four cumulants of ln(S_t / S_0) under constant parameters.

    k1 = (mu - lam*k - sigma^2/2 + lam*nu) t
    k2 = (sigma^2 + lam*(gamma^2 + nu^2)) t
    k3 = lam * (3 gamma^2 nu + nu^3) t
    k4 = lam * (3 gamma^4 + 6 nu^2 gamma^2 + nu^4) t

    All cumulants grow linearly in t.
    """
    if t < 0:
        raise DataError(f"t must be >= 0, got {t}")
    mu, sig, lam, nu, gam = params.mu, params.sigma, params.lam, params.nu, params.gamma
    k = params.k
    k1 = (mu - lam * k - 0.5 * sig**2 + lam * nu) * t
    k2 = (sig**2 + lam * (gam**2 + nu**2)) * t
    k3 = lam * (3 * gam**2 * nu + nu**3) * t
    k4 = lam * (3 * gam**4 + 6 * nu**2 * gam**2 + nu**4) * t
    return (k1, k2, k3, k4)
