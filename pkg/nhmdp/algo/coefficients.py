"""
Ergodicity and ratio coefficients of a stage: the contraction constants of the Bellman operators,
the remainder series bounding bias spans, and the risk-sensitive contraction bound.

In the interval-action flavor every supremum over actions is taken on the two endpoint records
(see Stage.extreme_kernels); all quantities below are exact for that family.
"""
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from nhmdp.algo import BOUNDED_RATIO, CONTRACTION_WINDOW_PERIODS, ERGODIC_WINDOW
from nhmdp.algo.errors import AssumptionError
from nhmdp.algo.types import Coefficients, Model, PolicySchedule
from nhmdp.config_loader import get_settings
from nhmdp.log import get_logger


def _dobrushin(rows: np.ndarray) -> float:
    """max over ordered row pairs of Σ_y (P(r, y) - P(r', y))^+."""
    if rows.shape[0] < 2:
        return 0.0
    distance = np.clip(rows[:, None, :] - rows[None, :, :], 0.0, None).sum(axis=-1)
    return float(np.clip(distance.max(), 0.0, 1.0))


def _tilted_rows(rows: np.ndarray, g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if np.ptp(g) == 0.0:
        return np.array(rows, dtype=float)
    masked = np.where(rows > 0, g[None, :], -np.inf)
    log_norm = logsumexp(masked, b=rows, axis=-1, keepdims=True)
    return rows * np.exp(masked - log_norm)


def _stage_rows(model: Model, n: int, selector: Optional[np.ndarray] = None) -> np.ndarray:
    stage = model.stage_at(n)
    if selector is not None:
        return stage.selected(selector)[0]
    return stage.extreme_kernels.reshape(-1, model.num_states)


def dobrushin_delta(model: Model, n: int, selector: Optional[np.ndarray] = None) -> float:
    """Δ_n over the rows of every action, or over the rows a selector picks (fixed-policy operators)."""
    return _dobrushin(_stage_rows(model, n, selector))


def ratio_bound(model: Model, n: int) -> float:
    """
    K_n = max over actions and state pairs of P(x, y) / P(x', y) on singletons y (by the mediant
    inequality the supremum over sets is attained on singletons). Infinite when a row charges a
    point another row of the same action misses.
    """
    kernels = model.stage_at(n).extreme_kernels
    numerator = kernels[:, :, None, :]
    denominator = kernels[:, None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(denominator > 0, numerator / denominator, np.where(numerator > 0, np.inf, 0.0))
    return float(max(1.0, ratio.max()))


def reward_span(model: Model, n: int) -> float:
    return model.stage_at(n).reward_span


def tilted_kernel(model: Model, n: int, x: int, a, g: np.ndarray) -> np.ndarray:
    """Row P_n^a(x, ·) reweighted by e^{g} and renormalized (max-shifted)."""
    stage = model.stage_at(n)
    if stage.is_interval:
        row = (1.0 - a) * stage.endpoint_kernels[0, x] + a * stage.endpoint_kernels[1, x]
    else:
        row = stage.kernels[int(a), x]
    return _tilted_rows(row[None, :], g)[0]


def tilted_delta(model: Model, n: int, g: np.ndarray, selector: Optional[np.ndarray] = None) -> float:
    return _dobrushin(_tilted_rows(_stage_rows(model, n, selector), g))


def risk_contraction_bound(model: Model, n: int, gamma: float) -> float:
    """
    Coupling bound 1 - e^{-s}(1 - Δ_n), s = |γ|·||c_n||_sp + ln K_n. It dominates tilted_delta for
    every tilt of span at most s: tilted rows are bounded below by e^{-s} times the original rows.
    """
    ratio = ratio_bound(model, n)
    if not np.isfinite(ratio):
        raise AssumptionError(BOUNDED_RATIO, "K_n infinite", stage=n)
    s = abs(gamma) * reward_span(model, n) + np.log(ratio)
    return float(np.clip(1.0 - np.exp(-s) * (1.0 - dobrushin_delta(model, n)), 0.0, 1.0))


def contraction_window(q: int, p: int, deltas: np.ndarray) -> Optional[int]:
    """
    Shortest L <= CONTRACTION_WINDOW_PERIODS·p such that every L consecutive periodic factors
    multiply to < 1, or None.
    """
    periodic = np.asarray(deltas[q:q + p], dtype=float)
    for length in range(1, CONTRACTION_WINDOW_PERIODS * p + 1):
        products = [np.prod([periodic[(j + i) % p] for i in range(length)]) for j in range(p)]
        if max(products) < 1.0:
            return length
    return None


def remainder_series(q: int, p: int, deltas: np.ndarray, spans: np.ndarray, n: int,
                     tail_tol: float) -> float:
    """
    R_n = span_n + Σ_{i>=0} Δ_n…Δ_{n+i}·span_{n+i+1} for per-stage arrays of length q+p.
    Truncated once the geometric tail bound drops below tail_tol; the bound is added to the result.
    """
    def idx(m):
        return m if m < q else q + (m - q) % p

    if contraction_window(q, p, deltas) is None:
        raise AssumptionError(ERGODIC_WINDOW, "remainder series diverges", stage=n)
    rho = float(np.prod(deltas[q:q + p]))
    if np.all(deltas == deltas[0]) and np.all(spans == spans[0]):
        return float(spans[0] / (1.0 - deltas[0]))

    tail_factor = spans[q:q + p].max() * p / (1.0 - rho)
    total = float(spans[idx(n)])
    product = 1.0
    m = n
    while True:
        product *= deltas[idx(m)]
        m += 1
        total += product * spans[idx(m)]
        if m >= q:
            tail = product * tail_factor
            if tail < tail_tol:
                return total + tail


def stage_profile(model: Model, policy: Optional[PolicySchedule] = None):
    """(Δ_n, ||c_n||_sp) for n = 0..q+p-1; Δ_n of the policy's rows when a policy is given."""
    deltas = np.array([dobrushin_delta(model, n, None if policy is None else policy.selector_at(n))
                       for n in range(model.num_stages)])
    spans = np.array([reward_span(model, n) for n in range(model.num_stages)])
    return deltas, spans


def remainder_R(model: Model, n: int, tail_tol: Optional[float] = None) -> float:
    if tail_tol is None:
        tail_tol = get_settings().coefficients.tail_tol
    deltas, spans = stage_profile(model)
    return remainder_series(model.q, model.p, deltas, spans, n, tail_tol)


def sup_remainder(model: Model, gamma: Optional[float] = None, tail_tol: Optional[float] = None) -> float:
    """
    sup_n R_n. For the risk operators the series runs on Δ_n^γ and is capped by the span estimate
    max_n(||c_n||_sp + ln K_n / |γ|) that holds for every image of the risk operator.
    """
    if tail_tol is None:
        tail_tol = get_settings().coefficients.tail_tol
    deltas, spans = stage_profile(model)
    if gamma is None:
        return max(remainder_series(model.q, model.p, deltas, spans, n, tail_tol) for n in range(model.num_stages))

    risk_deltas = np.array([risk_contraction_bound(model, n, gamma) for n in range(model.num_stages)])
    cap = max(spans[n] + np.log(ratio_bound(model, n)) / abs(gamma) for n in range(model.num_stages))
    try:
        series = max(remainder_series(model.q, model.p, risk_deltas, spans, n, tail_tol)
                     for n in range(model.num_stages))
    except AssumptionError:
        series = np.inf
    return float(min(series, cap))


def compute_coefficients(model: Model, gamma: Optional[float] = None,
                         tail_tol: Optional[float] = None) -> Coefficients:
    """Per-stage table for stages 0..q+p-1; divergent R_n and undefined Δ_n^γ are reported as inf / nan."""
    if tail_tol is None:
        tail_tol = get_settings().coefficients.tail_tol
    deltas, spans = stage_profile(model)
    ratios = np.array([ratio_bound(model, n) for n in range(model.num_stages)])
    remainders = np.full(model.num_stages, np.inf)
    try:
        for n in range(model.num_stages):
            remainders[n] = remainder_series(model.q, model.p, deltas, spans, n, tail_tol)
    except AssumptionError as e:
        get_logger().warning(f"Remainder series diverges: {e}")

    risk_delta = {}
    if gamma is not None:
        risk = np.full(model.num_stages, np.nan)
        for n in range(model.num_stages):
            if np.isfinite(ratios[n]):
                risk[n] = risk_contraction_bound(model, n, gamma)
        risk_delta[float(gamma)] = risk
    return Coefficients(deltas, ratios, spans, remainders, risk_delta)
