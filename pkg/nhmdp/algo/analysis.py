"""
Exact oracles (no sampling) and the studies built on the solvers: finite-horizon expected and
exponential-moment rewards, Hoeffding gaps, the gain-vs-risk-factor curve and policy stability traces.
"""
from typing import List, Optional, Sequence, Union

import numpy as np

from nhmdp.algo.errors import NhmdpError
from nhmdp.algo.operators import _check_gamma, _maximize, _policy_step, span
from nhmdp.algo.policy import check_selector
from nhmdp.algo.solver import solve_average, solve_policy_average, solve_policy_risk, solve_risk
from nhmdp.algo.types import GainCurve, GainCurvePoint, HoeffdingCheck, Model, PolicySchedule, StabilityTrace
from nhmdp.algo.utils import resolve_state
from nhmdp.config_loader import get_settings
from nhmdp.log import get_logger

HOEFFDING_RELATIVE_SLACK = 1e-10


def _check_horizon(N: int) -> None:
    if N < 1:
        raise ValueError(f"horizon must be at least 1, got {N}")


def _expected_total(model: Model, policy: PolicySchedule, N: int, start: int) -> np.ndarray:
    """E_x[Σ_{i=start}^{start+N-1} c_i(X_i, u_i(X_i))] for every start state x, by backward induction."""
    values = np.zeros(model.num_states)
    for n in reversed(range(start, start + N)):
        values = _policy_step(model.stage_at(n), policy.selector_at(n), values, None)
    return values


def _log_moment(model: Model, policy: PolicySchedule, N: int, start: int, x: int, gamma: float) -> float:
    """
    ln E_x[exp(γ Σ c_i)] by the forward recursion on the unnormalized law of X_i weighted by the running
    exponential moment; the weights are max-shifted and renormalized every stage.
    """
    weights = np.zeros(model.num_states)
    weights[x] = 1.0
    log_scale = 0.0
    for n in range(start, start + N):
        rows, rewards = model.stage_at(n).selected(policy.selector_at(n))
        exponent = gamma * rewards
        shift = float(exponent[weights > 0].max())
        weights = (weights * np.exp(exponent - shift)) @ rows
        total = float(weights.sum())
        weights /= total
        log_scale += shift + np.log(total)
    return float(log_scale)


def _checked(model: Model, policy: PolicySchedule) -> None:
    for n, selector in enumerate(policy.selectors):
        check_selector(model, selector, n)


def finite_horizon_average(model: Model, policy: PolicySchedule, N: int, x: Union[int, str] = 0,
                           start: int = 0) -> float:
    """Exact (1/N)·E_x of the N-stage reward sum from stage `start` under a Markov policy."""
    _check_horizon(N)
    _checked(model, policy)
    return float(_expected_total(model, policy, N, start)[resolve_state(model, x)] / N)


def finite_horizon_risk(model: Model, policy: PolicySchedule, N: int, x: Union[int, str], gamma: float,
                        start: int = 0) -> float:
    """Exact (1/(Nγ))·ln E_x[exp(γ·N-stage reward sum)]."""
    _check_horizon(N)
    _check_gamma(gamma)
    _checked(model, policy)
    return _log_moment(model, policy, N, start, resolve_state(model, x), gamma) / (N * gamma)


def finite_horizon_optimal(model: Model, N: int, x: Union[int, str] = 0, start: int = 0) -> float:
    """Best N-stage average over all Markov policies, by backward induction with the Bellman operators."""
    _check_horizon(N)
    values = np.zeros(model.num_states)
    for n in reversed(range(start, start + N)):
        values = _maximize(model, n, values, None)[0]
    return float(values[resolve_state(model, x)] / N)


def composed_policy_iterate(model: Model, policy: PolicySchedule, n: int, k: int,
                            gamma: Optional[float] = None) -> np.ndarray:
    """T_n^{u_n}…T_{n+k-1}^{u_{n+k-1}} 0 (risk operators when gamma is given), not anchored."""
    if gamma is not None:
        _check_gamma(gamma)
    _checked(model, policy)
    values = np.zeros(model.num_states)
    for m in reversed(range(n, n + k)):
        values = _policy_step(model.stage_at(m), policy.selector_at(m), values, gamma)
    return values


def hoeffding_gap(model: Model, policy: PolicySchedule, n: int, k: int, gamma: float,
                  x: Union[int, str] = 0) -> HoeffdingCheck:
    """
    gap = ln E[e^{γS}] - γ·E[S] for the k-stage reward sum S from stage n, and the Hoeffding bound
    (Σ_{i=n}^{n+k-1} ||c_i||_sp)²·γ²/8. A gap outside [0, bound] is logged as a warning.
    """
    _check_horizon(k)
    _check_gamma(gamma)
    _checked(model, policy)
    state = resolve_state(model, x)
    log_moment = _log_moment(model, policy, k, n, state, gamma)
    mean = float(_expected_total(model, policy, k, n)[state])
    gap = log_moment - gamma * mean
    spans = sum(model.stage_at(i).reward_span for i in range(n, n + k))
    bound = spans ** 2 * gamma ** 2 / 8.0
    # both terms carry rounding of their own magnitude
    check = HoeffdingCheck(gap, bound, HOEFFDING_RELATIVE_SLACK * max(1.0, abs(log_moment), abs(gamma * mean)))
    if not check.holds():
        get_logger().warning(f"Hoeffding check violated: gap={gap:.6e}, bound={bound:.6e} "
                             f"(stage {n}, length {k}, gamma={gamma})")
    return check


def _max_span_gap(risk_w, average_w) -> float:
    return max(span(a.values - b.values) for a, b in zip(risk_w, average_w))


def gain_curve(model: Model, gammas: Sequence[float], tol: Optional[float] = None,
               kmax: Optional[int] = None) -> GainCurve:
    """
    Long-run risk-sensitive gain λ^r(γ) over a grid, with the average-reward gain at γ = 0.
    Each point carries its per-stage gains and max_n ||w̃_n(·,γ) - w_n||_sp.

    Raises:
        NhmdpError: the first solver failure, its message prefixed with the offending gamma.
    """
    grid = sorted({float(gamma) for gamma in gammas})
    if not grid:
        raise ValueError("gamma grid is empty")
    average = solve_average(model, tol=tol, kmax=kmax)
    points = []
    for gamma in grid:
        if gamma == 0.0:
            points.append(GainCurvePoint(0.0, average.long_run_gain, 0.0, tuple(average.lambdas.tolist())))
            continue
        try:
            solution = solve_risk(model, gamma, tol=tol, kmax=kmax)
        except NhmdpError as e:
            e.args = (f"gamma={gamma}: {e}",)
            raise
        points.append(GainCurvePoint(gamma, solution.long_run_gain, _max_span_gap(solution.w, average.w),
                                     tuple(solution.lambdas.tolist())))

    nonzero = [point for point in points if point.gamma != 0.0]
    smallest = min(nonzero, key=lambda point: abs(point.gamma)).max_span_gap if nonzero else 0.0
    return GainCurve(tuple(points), smallest)


def stability_trace(model: Model, policy_sequence: List[PolicySchedule], limit_policy: PolicySchedule,
                    gamma: Optional[float] = None, tol: Optional[float] = None, kmax: Optional[int] = None,
                    indices: Optional[Sequence[int]] = None) -> StabilityTrace:
    """
    Gains of the policies u^m and their deviations from the limit policy u:
    max_n |λ_n(u^m) - λ_n(u)|, |λ(u^m) - λ(u)| and max_n ||w_n^{u^m} - w_n^u||_sp.
    `indices` labels the sequence (default 1..len).
    """
    if indices is None:
        indices = range(1, len(policy_sequence) + 1)
    indices = tuple(int(m) for m in indices)
    if len(indices) != len(policy_sequence):
        raise ValueError("one index per policy of the sequence is required")

    def solve(policy):
        if gamma is None:
            return solve_policy_average(model, policy, tol=tol, kmax=kmax)
        return solve_policy_risk(model, policy, gamma, tol=tol, kmax=kmax)

    limit = solve(limit_policy)
    gains, deviations, gain_deviations, bias_deviations = [], [], [], []
    for m, policy in zip(indices, policy_sequence):
        solution = solve(policy)
        gains.append(solution.lambdas)
        deviations.append(float(np.max(np.abs(solution.lambdas - limit.lambdas))))
        gain_deviations.append(abs(solution.long_run_gain - limit.long_run_gain))
        bias_deviations.append(_max_span_gap(solution.w, limit.w))
        get_logger().debug(f"stability m={m}: deviation={deviations[-1]:.3e}")
    threshold = float(get_settings().solver.tol) if tol is None else tol
    if deviations and deviations[-1] >= threshold:
        get_logger().warning(f"Stability trace has not converged: deviation {deviations[-1]:.3e} at m={indices[-1]} "
                             f"is not below tol={threshold:.1e}")
    return StabilityTrace(
        indices=indices,
        gains=np.array(gains).reshape(len(indices), model.num_stages),
        limit_gains=limit.lambdas,
        deviations=np.array(deviations),
        gain_deviations=np.array(gain_deviations),
        bias_deviations=np.array(bias_deviations),
        gamma=gamma,
    )
