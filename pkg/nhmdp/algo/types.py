from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np


class ScheduleSection(str, Enum):
    PREFIX = "prefix"
    PERIOD = "period"
    MODEL = "model"


def _frozen(array) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class ActionInterval:
    grid_points: int
    endpoint_labels: Tuple[str, str]

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_points)


@dataclass(frozen=True, eq=False)
class Stage:
    """
    One stage of the schedule. kernels[a, x, y] = P_n^a(x, {y}) and rewards[a, x] = c_n(x, a), indexed by
    action position. In the interval flavor kernels/rewards hold the action grid and the two endpoint records
    (a=0, a=1) are kept separately; every P_n^a is (1-a)·P^(0) + a·P^(1).
    """
    kernels: np.ndarray
    rewards: np.ndarray
    endpoint_kernels: Optional[np.ndarray] = None
    endpoint_rewards: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "kernels", _frozen(self.kernels))
        object.__setattr__(self, "rewards", _frozen(self.rewards))
        if self.endpoint_kernels is not None:
            object.__setattr__(self, "endpoint_kernels", _frozen(self.endpoint_kernels))
            object.__setattr__(self, "endpoint_rewards", _frozen(self.endpoint_rewards))

    @classmethod
    def from_endpoints(cls, endpoint_kernels, endpoint_rewards, grid: np.ndarray) -> "Stage":
        k0, k1 = np.asarray(endpoint_kernels, dtype=float)
        r0, r1 = np.asarray(endpoint_rewards, dtype=float)
        weights = grid[:, None, None]
        kernels = (1.0 - weights) * k0[None] + weights * k1[None]
        rewards = (1.0 - grid[:, None]) * r0[None] + grid[:, None] * r1[None]
        return cls(kernels, rewards, np.stack([k0, k1]), np.stack([r0, r1]))

    @property
    def is_interval(self) -> bool:
        return self.endpoint_kernels is not None

    @property
    def num_states(self) -> int:
        return self.kernels.shape[1]

    @property
    def extreme_kernels(self) -> np.ndarray:
        # suprema over the action set are attained on these rows
        return self.endpoint_kernels if self.is_interval else self.kernels

    @property
    def extreme_rewards(self) -> np.ndarray:
        return self.endpoint_rewards if self.is_interval else self.rewards

    @property
    def reward_span(self) -> float:
        rewards = self.extreme_rewards
        return float(rewards.max() - rewards.min())

    def selected(self, selector: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Kernel rows P_n^{u(x)}(x, ·) and rewards c_n(x, u(x)) of a selector."""
        states = np.arange(self.num_states)
        if self.is_interval:
            a = np.asarray(selector, dtype=float)
            rows = (1.0 - a)[:, None] * self.endpoint_kernels[0] + a[:, None] * self.endpoint_kernels[1]
            rewards = (1.0 - a) * self.endpoint_rewards[0] + a * self.endpoint_rewards[1]
            return rows, rewards
        idx = np.asarray(selector, dtype=int)
        return self.kernels[idx, states], self.rewards[idx, states]


@dataclass(frozen=True, eq=False)
class Model:
    states: Tuple[str, ...]
    actions: Tuple[str, ...]
    anchor: str
    prefix: Tuple[Stage, ...]
    period: Tuple[Stage, ...]
    action_interval: Optional[ActionInterval] = None

    @property
    def num_states(self) -> int:
        return len(self.states)

    @property
    def num_actions(self) -> int:
        return len(self.actions)

    @property
    def q(self) -> int:
        return len(self.prefix)

    @property
    def p(self) -> int:
        return len(self.period)

    @property
    def num_stages(self) -> int:
        """Stages 0..q+p-1 carry all distinct data; later stages repeat the periodic block."""
        return self.q + self.p

    @property
    def is_interval(self) -> bool:
        return self.action_interval is not None

    @property
    def anchor_index(self) -> int:
        return self.states.index(self.anchor)

    def stage_index(self, n: int) -> int:
        if n < 0:
            raise ValueError(f"stage index must be non-negative, got {n}")
        if n < self.q:
            return n
        return self.q + (n - self.q) % self.p

    def stage_at(self, n: int) -> Stage:
        idx = self.stage_index(n)
        return self.prefix[idx] if idx < self.q else self.period[idx - self.q]

    @property
    def stages(self) -> Tuple[Stage, ...]:
        return self.prefix + self.period


@dataclass(frozen=True)
class Violation:
    section: ScheduleSection
    message: str
    stage: Optional[int] = None
    action: Optional[str] = None
    state: Optional[str] = None

    def __str__(self) -> str:
        where = [self.section.value]
        if self.stage is not None:
            where.append(f"stage {self.stage}")
        if self.action is not None:
            where.append(f"action '{self.action}'")
        if self.state is not None:
            where.append(f"row '{self.state}'")
        return f"{self.message} ({', '.join(where)})"


@dataclass(frozen=True, eq=False)
class SpanVector:
    values: np.ndarray
    anchored: bool = False
    anchor_index: int = 0

    @classmethod
    def anchored_at(cls, values: np.ndarray, anchor_index: int) -> "SpanVector":
        values = np.asarray(values, dtype=float)
        values = values - values[anchor_index]
        values[anchor_index] = 0.0
        return cls(values, True, anchor_index)

    @property
    def span(self) -> float:
        return float(np.max(self.values) - np.min(self.values))

    def as_dict(self, states) -> Dict[str, float]:
        return {label: float(value) for label, value in zip(states, self.values)}


@dataclass(frozen=True, eq=False)
class PolicySchedule:
    """Markov selectors u_n: int action positions, or action parameters in the interval flavor."""
    prefix: Tuple[np.ndarray, ...]
    period: Tuple[np.ndarray, ...]
    interval: bool = False

    def selector_at(self, n: int) -> np.ndarray:
        q, p = len(self.prefix), len(self.period)
        if n < q:
            return self.prefix[n]
        return self.period[(n - q) % p]

    @property
    def selectors(self) -> Tuple[np.ndarray, ...]:
        return self.prefix + self.period


@dataclass(frozen=True, eq=False)
class Coefficients:
    delta: np.ndarray
    ratio_K: np.ndarray
    reward_span: np.ndarray
    remainder_R: np.ndarray
    risk_delta: Dict[float, np.ndarray] = field(default_factory=dict)


class IterationRecord(NamedTuple):
    stage: int
    k: int
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class Solution:
    w: List[SpanVector]
    lambdas: np.ndarray
    policy: PolicySchedule
    long_run_gain: float
    iterations_used: int
    increment: float
    apriori_bound: float
    residuals: np.ndarray
    bias_span_bounds: np.ndarray
    history: List[IterationRecord] = field(default_factory=list)
    gamma: Optional[float] = None

    @property
    def max_bias_span(self) -> float:
        return max(w.span for w in self.w)


@dataclass(frozen=True, eq=False)
class RiskSolution(Solution):
    certificate: str = "bound"


@dataclass(frozen=True)
class GainCurvePoint:
    gamma: float
    gain: float
    max_span_gap: float
    stage_gains: Tuple[float, ...]


@dataclass(frozen=True)
class GainCurve:
    points: Tuple[GainCurvePoint, ...]
    smallest_gamma_span_gap: float

    @property
    def gammas(self) -> np.ndarray:
        return np.array([point.gamma for point in self.points])

    @property
    def gains(self) -> np.ndarray:
        return np.array([point.gain for point in self.points])


@dataclass(frozen=True, eq=False)
class StabilityTrace:
    indices: Tuple[int, ...]
    gains: np.ndarray  # (len(indices), q+p)
    limit_gains: np.ndarray
    deviations: np.ndarray  # max_n |λ_n(u^m) - λ_n(u)|
    gain_deviations: np.ndarray  # |λ(u^m) - λ(u)|
    bias_deviations: np.ndarray  # max_n ||w_n^{u^m} - w_n^u||_sp
    gamma: Optional[float] = None

    def converged(self, tol: float) -> bool:
        return bool(self.deviations[-1] < tol)


class HoeffdingCheck(NamedTuple):
    gap: float
    bound: float
    slack: float = 0.0

    def holds(self) -> bool:
        return -self.slack <= self.gap <= self.bound + self.slack


@dataclass(frozen=True)
class SimulationResult:
    average: float
    standard_error: float
    risk_value: Optional[float]
    horizon: int
    paths: int
    seed: int


@dataclass
class RunReport:
    command: str
    model_digest: str
    version: str
    outputs: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    wall_time: float = 0.0
    table: Optional[List[Dict[str, Any]]] = None
    passed: bool = True

    def payload(self) -> Dict[str, Any]:
        """Everything but the wall time: identical for identical commands and inputs."""
        return {
            "command": self.command,
            "model_digest": self.model_digest,
            "version": self.version,
            "outputs": self.outputs,
            "warnings": self.warnings,
            **({"table": self.table} if self.table is not None else {}),
        }

    def to_dict(self) -> Dict[str, Any]:
        return {**self.payload(), "wall_time": self.wall_time}
