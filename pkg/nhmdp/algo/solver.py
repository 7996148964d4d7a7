"""
Anchored backward span-contraction iteration for the average-reward and risk-sensitive Bellman equations
and the fixed-policy Poisson equations:

    w_n(x) + λ_n = T_n w_{n+1}(x),   w_n(x̄) = 0

One working vector is swept backward through the periodic stage indices (…, q+1, q, q+p-1, …), which is
the composition T_n T_{n+1}…T_{n+k-1} 0 for every stage n of the period. The prefix stages are then
recovered by backward recursion from the periodic solution.
"""
from typing import Callable, List, Optional

import numpy as np

from nhmdp.algo import ERGODIC_WINDOW, RISK_ERGODIC_WINDOW
from nhmdp.algo.coefficients import (ratio_bound, remainder_series, risk_contraction_bound, stage_profile,
                                     sup_remainder, tilted_delta)
from nhmdp.algo.errors import AssumptionError, ConvergenceError
from nhmdp.algo.operators import _check_gamma, _maximize, _policy_step, span
from nhmdp.algo.policy import check_selector, make_policy
from nhmdp.algo.types import IterationRecord, Model, PolicySchedule, RiskSolution, Solution, SpanVector
from nhmdp.config_loader import get_settings
from nhmdp.log import get_logger

StageOperator = Callable[[int, np.ndarray], np.ndarray]


class _Iterate:
    """Result of the raw periodic iteration: anchored periodic snapshots plus bookkeeping."""

    def __init__(self, snapshots, iterations, increment, history):
        self.snapshots = snapshots
        self.iterations = iterations
        self.increment = increment
        self.history = history


def _anchored(values: np.ndarray, anchor: int) -> np.ndarray:
    values = values - values[anchor]
    values[anchor] = 0.0
    return values


def _solver_defaults(tol: Optional[float], kmax: Optional[int]):
    settings = get_settings()
    if tol is None:
        tol = float(settings.solver.tol)
    if kmax is None:
        kmax = int(settings.solver.kmax)
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    return tol, kmax


def _iterate(model: Model, step: StageOperator, tol: float, kmax: int, initial: Optional[np.ndarray] = None,
             keep_history: bool = False) -> _Iterate:
    q, p, anchor = model.q, model.p, model.anchor_index
    v = np.zeros(model.num_states) if initial is None else _anchored(np.asarray(initial, dtype=float), anchor)
    snapshots: List[Optional[np.ndarray]] = [None] * p
    history = []
    k = 0
    increment = np.inf
    while True:
        sweep_increment = 0.0
        for j in reversed(range(p)):
            if k >= kmax:
                raise ConvergenceError(increment, k)
            v = _anchored(step(q + j, v), anchor)
            k += 1
            if keep_history:
                history.append(IterationRecord(q + j, k, v.copy()))
            change = np.inf if snapshots[j] is None else span(v - snapshots[j])
            sweep_increment = max(sweep_increment, change)
            snapshots[j] = v
        increment = sweep_increment
        get_logger().debug(f"sweep done: k={k}, increment={increment:.3e}")
        if increment < tol:
            break
    if k > 0.9 * kmax:
        get_logger().warning(f"Converged after {k} of kmax={kmax} stage applications")
    return _Iterate(snapshots, k, increment, history)


def _window_product(q: int, p: int, deltas: np.ndarray, n: int, k: int) -> float:
    """Δ_n·…·Δ_{n+k-1} over the schedule, using whole periods as powers of the period product."""
    product = 1.0
    m = n
    while m < q and k > 0:
        product *= deltas[m]
        m += 1
        k -= 1
    if k == 0:
        return float(product)
    periodic = deltas[q:q + p]
    start = (m - q) % p
    rotated = np.roll(periodic, -start)
    full, rest = divmod(k, p)
    product *= float(np.prod(periodic)) ** full
    product *= float(np.prod(rotated[:rest]))
    return float(product)


def _check_average_window(model: Model, deltas: np.ndarray) -> None:
    periodic = deltas[model.q:]
    if float(np.prod(periodic)) >= 1.0:
        stage = model.q + int(np.argmax(periodic))
        raise AssumptionError(ERGODIC_WINDOW, "Dobrushin product over the period is 1", stage=stage)


def _risk_bound_deltas(model: Model, gamma: float) -> np.ndarray:
    # raises on the first stage with an infinite K_n
    return np.array([risk_contraction_bound(model, n, gamma) for n in range(model.num_stages)])


def _assemble(model: Model, step: StageOperator, result: _Iterate):
    """Prefix stages by backward recursion, then per-stage gains and Poisson residuals."""
    q, p, anchor = model.q, model.p, model.anchor_index
    w: List[np.ndarray] = [np.zeros(model.num_states)] * q + list(result.snapshots)
    for n in reversed(range(q)):
        w[n] = _anchored(step(n, w[n + 1]), anchor)

    lambdas = np.zeros(model.num_stages)
    residuals = np.zeros(model.num_stages)
    for n in range(model.num_stages):
        successor = w[model.stage_index(n + 1)]
        image = step(n, successor)
        lambdas[n] = image[anchor]
        residuals[n] = float(np.max(np.abs(w[n] + lambdas[n] - image)))
    return w, lambdas, residuals


def long_run_gain(lambdas, q: int, p: int) -> float:
    """Cesàro limit of the per-stage gains: the mean over the periodic block; prefix gains drop out."""
    lambdas = np.asarray(lambdas, dtype=float)
    return float(np.mean(lambdas[q:q + p]))


def apriori_error(model: Model, n: int, k: int, gamma: Optional[float] = None) -> float:
    """
    Bound on ||T_n…T_{n+k-1}0 - w_n||_sp: Δ_n·…·Δ_{n+k-1}·sup_i R_i, with the risk contraction bounds
    Δ_i^γ in place of Δ_i when gamma is given.
    """
    deltas, _ = stage_profile(model)
    if gamma is not None:
        deltas = _risk_bound_deltas(model, gamma)
    product = _window_product(model.q, model.p, deltas, n, k)
    if product == 0.0:
        return 0.0
    return float(product * sup_remainder(model, gamma))


def _apriori_bound(model: Model, deltas: np.ndarray, sup_r: float, iterations: int) -> float:
    # the snapshot of stage q+j was taken j applications before the end of the last sweep
    bounds = []
    for j in range(model.p):
        product = _window_product(model.q, model.p, deltas, model.q + j, max(iterations - j, 0))
        bounds.append(0.0 if product == 0.0 else product * sup_r)
    return float(max(bounds))


def _average_bias_bounds(model: Model, deltas: np.ndarray, spans: np.ndarray) -> np.ndarray:
    tail_tol = get_settings().coefficients.tail_tol
    return np.array([remainder_series(model.q, model.p, deltas, spans, n, tail_tol)
                     for n in range(model.num_stages)])


def _risk_bias_bounds(model: Model, gamma: float, deltas: np.ndarray, spans: np.ndarray) -> np.ndarray:
    tail_tol = get_settings().coefficients.tail_tol
    caps = np.array([spans[n] + np.log(ratio_bound(model, n)) / abs(gamma) for n in range(model.num_stages)])
    cap = float(caps.max())
    try:
        series = np.array([remainder_series(model.q, model.p, deltas, spans, n, tail_tol)
                           for n in range(model.num_stages)])
    except AssumptionError:
        series = np.full(model.num_stages, np.inf)
    return np.minimum(series, cap)


def _solve_average(model: Model, step: StageOperator, policy: Optional[PolicySchedule], tol, kmax,
                   initial, keep_history) -> Solution:
    tol, kmax = _solver_defaults(tol, kmax)
    deltas, spans = stage_profile(model, policy)
    _check_average_window(model, deltas)

    result = _iterate(model, step, tol, kmax, initial, keep_history)
    w, lambdas, residuals = _assemble(model, step, result)
    if policy is None:
        policy = make_policy(model, [_maximize(model, n, w[model.stage_index(n + 1)], None)[1]
                                     for n in range(model.num_stages)])
    bias_bounds = _average_bias_bounds(model, deltas, spans)
    gain = long_run_gain(lambdas, model.q, model.p)
    get_logger().info(f"Average-reward solve: gain={gain:.12g} after {result.iterations} stage applications")
    return Solution(
        w=[SpanVector(values, True, model.anchor_index) for values in w],
        lambdas=lambdas,
        policy=policy,
        long_run_gain=gain,
        iterations_used=result.iterations,
        increment=float(result.increment),
        apriori_bound=_apriori_bound(model, deltas, float(bias_bounds.max()), result.iterations),
        residuals=residuals,
        bias_span_bounds=bias_bounds,
        history=result.history,
    )


def _solve_risk(model: Model, gamma: float, step: StageOperator, policy: Optional[PolicySchedule], tol, kmax,
                initial, keep_history) -> RiskSolution:
    _check_gamma(gamma)
    tol, kmax = _solver_defaults(tol, kmax)
    deltas = _risk_bound_deltas(model, gamma)
    _, spans = stage_profile(model)
    certificate = "bound"
    if float(np.prod(deltas[model.q:])) >= 1.0:
        certificate = "measured"
        get_logger().debug(f"Risk contraction bound is vacuous for gamma={gamma}, measuring tilted coefficients")

    result = _iterate(model, step, tol, kmax, initial, keep_history)
    w, lambdas, residuals = _assemble(model, step, result)
    if certificate == "measured":
        deltas = np.array([tilted_delta(model, n, gamma * w[model.stage_index(n + 1)],
                                        None if policy is None else policy.selector_at(n))
                           for n in range(model.num_stages)])
        if float(np.prod(deltas[model.q:])) >= 1.0:
            raise AssumptionError(RISK_ERGODIC_WINDOW, f"no risk contraction for gamma={gamma}",
                                  stage=model.q + int(np.argmax(deltas[model.q:])))
    if policy is None:
        policy = make_policy(model, [_maximize(model, n, w[model.stage_index(n + 1)], gamma)[1]
                                     for n in range(model.num_stages)])
    bias_bounds = _risk_bias_bounds(model, gamma, deltas, spans)
    if certificate == "bound":
        apriori_bound = _apriori_bound(model, deltas, float(bias_bounds.max()), result.iterations)
    else:
        # coefficients measured at the solution do not bound the earlier iterates
        apriori_bound = float("inf")
    gain = long_run_gain(lambdas, model.q, model.p)
    get_logger().info(f"Risk-sensitive solve: gamma={gamma}, gain={gain:.12g}, certificate={certificate}, "
                      f"{result.iterations} stage applications")
    return RiskSolution(
        w=[SpanVector(values, True, model.anchor_index) for values in w],
        lambdas=lambdas,
        policy=policy,
        long_run_gain=gain,
        iterations_used=result.iterations,
        increment=float(result.increment),
        apriori_bound=apriori_bound,
        residuals=residuals,
        bias_span_bounds=bias_bounds,
        history=result.history,
        gamma=float(gamma),
        certificate=certificate,
    )


def _checked_policy(model: Model, policy: PolicySchedule) -> PolicySchedule:
    for n, selector in enumerate(policy.selectors):
        check_selector(model, selector, n)
    return policy


def solve_average(model: Model, tol: Optional[float] = None, kmax: Optional[int] = None,
                  initial: Optional[np.ndarray] = None, keep_history: bool = False) -> Solution:
    """
    Gains λ_n, anchored biases w_n and a greedy optimal policy of the average-reward problem.

    Raises:
        AssumptionError: the Dobrushin product over the period is 1, so no window contracts.
        ConvergenceError: kmax stage applications did not bring the increment below tol.
    """
    def step(n, v):
        return _maximize(model, n, v, None)[0]

    return _solve_average(model, step, None, tol, kmax, initial, keep_history)


def solve_risk(model: Model, gamma: float, tol: Optional[float] = None, kmax: Optional[int] = None,
               initial: Optional[np.ndarray] = None, keep_history: bool = False) -> RiskSolution:
    """
    Risk-sensitive counterpart of solve_average for risk factor gamma != 0. The certificate is "bound" when
    the coupling bounds Δ_n^γ contract over a period, else "measured" from tilted coefficients of the
    solution.
    """
    def step(n, v):
        return _maximize(model, n, v, gamma)[0]

    return _solve_risk(model, gamma, step, None, tol, kmax, initial, keep_history)


def solve_policy_average(model: Model, policy: PolicySchedule, tol: Optional[float] = None,
                         kmax: Optional[int] = None, initial: Optional[np.ndarray] = None,
                         keep_history: bool = False) -> Solution:
    """Poisson equations of a fixed Markov policy. Δ_n is taken over the rows the policy selects."""
    _checked_policy(model, policy)

    def step(n, v):
        return _policy_step(model.stage_at(n), policy.selector_at(n), v, None)

    return _solve_average(model, step, policy, tol, kmax, initial, keep_history)


def solve_policy_risk(model: Model, policy: PolicySchedule, gamma: float, tol: Optional[float] = None,
                      kmax: Optional[int] = None, initial: Optional[np.ndarray] = None,
                      keep_history: bool = False) -> RiskSolution:
    _checked_policy(model, policy)

    def step(n, v):
        return _policy_step(model.stage_at(n), policy.selector_at(n), v, gamma)

    return _solve_risk(model, gamma, step, policy, tol, kmax, initial, keep_history)
