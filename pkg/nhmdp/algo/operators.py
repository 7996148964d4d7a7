"""
One-stage Bellman operators on raw value vectors (anchoring is left to the solver):

    T_n v(x)        = max_a [c_n(x,a) + Σ_y P_n^a(x,y) v(y)]
    T̃_n v(x)        = max_a [c_n(x,a) + (1/γ) ln Σ_y P_n^a(x,y) e^{γ v(y)}]
    T_n^u, T̃_n^u    = the same with the action fixed by a selector u
"""
import math
from typing import Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from nhmdp.algo import GOLDEN_ITERATIONS, TIE_TOL
from nhmdp.algo.policy import check_selector
from nhmdp.algo.types import Model, Stage

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def span(v: np.ndarray) -> float:
    return float(np.max(v) - np.min(v))


def _check_gamma(gamma: float) -> None:
    if gamma == 0:
        raise ValueError("risk operators need a non-zero risk factor gamma")


def log_expectation(rows: np.ndarray, g: np.ndarray) -> np.ndarray:
    """ln Σ_y rows[..., y]·e^{g(y)}, max-shifted over the support of each row."""
    masked = np.where(rows > 0, g, -np.inf)
    return logsumexp(masked, b=rows, axis=-1)


def _continuation(rows: np.ndarray, v: np.ndarray, gamma: Optional[float]) -> np.ndarray:
    if gamma is None:
        return rows @ v
    return log_expectation(rows, gamma * v) / gamma


def _policy_step(stage: Stage, selector: np.ndarray, v: np.ndarray, gamma: Optional[float]) -> np.ndarray:
    rows, rewards = stage.selected(selector)
    return rewards + _continuation(rows, v, gamma)


def _golden_section(objective, lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-state maximization of a unimodal objective on [lo, hi], vectorized over states."""
    a, b = lo.copy(), hi.copy()
    for _ in range(GOLDEN_ITERATIONS):
        c = b - INV_PHI * (b - a)
        d = a + INV_PHI * (b - a)
        left = objective(c) >= objective(d)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    best = 0.5 * (a + b)
    return best, objective(best)


def _maximize(model: Model, n: int, v: np.ndarray, gamma: Optional[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Values of the (risk) Bellman operator and the greedy selector attaining them."""
    stage = model.stage_at(n)
    v = np.asarray(v, dtype=float)
    q_values = stage.rewards + _continuation(stage.kernels, v, gamma)
    best = q_values.max(axis=0)
    # lowest action index within the tie tolerance
    choice = np.argmax(q_values >= best[None, :] - TIE_TOL, axis=0)
    if not stage.is_interval:
        return best, choice

    grid = model.action_interval.grid
    last = len(grid) - 1
    lo = grid[np.maximum(choice - 1, 0)]
    hi = grid[np.minimum(choice + 1, last)]
    refined, refined_values = _golden_section(lambda a: _policy_step(stage, a, v, gamma), lo, hi)
    improved = refined_values > best + TIE_TOL
    return np.where(improved, refined_values, best), np.where(improved, refined, grid[choice])


def apply_T(model: Model, n: int, v: np.ndarray) -> np.ndarray:
    return _maximize(model, n, v, None)[0]


def apply_T_risk(model: Model, n: int, v: np.ndarray, gamma: float) -> np.ndarray:
    _check_gamma(gamma)
    return _maximize(model, n, v, gamma)[0]


def apply_T_policy(model: Model, n: int, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    check_selector(model, u, n)
    return _policy_step(model.stage_at(n), u, np.asarray(v, dtype=float), None)


def apply_T_risk_policy(model: Model, n: int, u: np.ndarray, v: np.ndarray, gamma: float) -> np.ndarray:
    _check_gamma(gamma)
    check_selector(model, u, n)
    return _policy_step(model.stage_at(n), u, np.asarray(v, dtype=float), gamma)


def greedy_selector(model: Model, n: int, v: np.ndarray, gamma: Optional[float] = None) -> np.ndarray:
    """
    Per state an action attaining the max of the plain (gamma None) or risk one-stage value.
    Ties within TIE_TOL go to the lowest action index; the interval flavor returns action parameters.
    """
    if gamma is not None:
        _check_gamma(gamma)
    return _maximize(model, n, v, gamma)[1]
