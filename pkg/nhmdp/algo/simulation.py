"""
Monte Carlo cross-check of the finite-horizon functionals.

Paths are split into shards of a fixed size; shard i draws from Philox seeded by the i-th child of
SeedSequence(seed). Shards are reduced in shard order, so the result depends on (seed, model, policy,
N, paths, shard size) and not on the number of worker threads.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Union

import numpy as np
from scipy.special import logsumexp

from nhmdp.algo.operators import _check_gamma
from nhmdp.algo.policy import check_selector
from nhmdp.algo.types import Model, PolicySchedule, SimulationResult
from nhmdp.algo.utils import get_thread_count, resolve_state
from nhmdp.config_loader import get_settings
from nhmdp.log import get_logger


def _stage_tables(model: Model, policy: PolicySchedule):
    """Per distinct stage: cumulative kernel rows and rewards of the selected actions."""
    tables = []
    for n in range(model.num_stages):
        rows, rewards = model.stage_at(n).selected(policy.selector_at(n))
        tables.append((np.cumsum(rows, axis=1), rewards))
    return tables


def _run_shard(model: Model, tables, N: int, size: int, x: int, seed: np.random.SeedSequence) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(seed))
    states = np.full(size, x, dtype=np.int64)
    sums = np.zeros(size)
    last = model.num_states - 1
    for n in range(N):
        cumulative, rewards = tables[model.stage_index(n)]
        sums += rewards[states]
        draws = rng.random(size)
        states = np.minimum((cumulative[states] <= draws[:, None]).sum(axis=1), last)
    return sums


def simulate(model: Model, policy: PolicySchedule, N: int, paths: int, seed: int, x: Union[int, str] = 0,
             gamma: Optional[float] = None, threads: Optional[int] = None,
             shard_size: Optional[int] = None) -> SimulationResult:
    """
    Sample mean of path averages (with its standard error) and, when gamma is given, the empirical
    (1/(Nγ))·ln(mean of e^{γ·path sum}).
    """
    if N < 1 or paths < 1:
        raise ValueError(f"horizon and path count must be at least 1, got N={N}, paths={paths}")
    if gamma is not None:
        _check_gamma(gamma)
    for n, selector in enumerate(policy.selectors):
        check_selector(model, selector, n)
    if shard_size is None:
        shard_size = int(get_settings().analysis.shard_size)
    threads = get_thread_count(threads)
    start = resolve_state(model, x)

    tables = _stage_tables(model, policy)
    num_shards = -(-paths // shard_size)
    seeds = np.random.SeedSequence(seed).spawn(num_shards)
    sizes = [min(shard_size, paths - i * shard_size) for i in range(num_shards)]
    get_logger().debug(f"Simulating {paths} paths of length {N} in {num_shards} shards on {threads} threads")

    with ThreadPoolExecutor(max_workers=threads) as executor:
        shards = list(executor.map(lambda i: _run_shard(model, tables, N, sizes[i], start, seeds[i]),
                                   range(num_shards)))
    sums = np.concatenate(shards)

    averages = sums / N
    standard_error = float(np.std(averages, ddof=1) / np.sqrt(paths)) if paths > 1 else 0.0
    risk_value = None
    if gamma is not None:
        risk_value = float((logsumexp(gamma * sums) - np.log(paths)) / (N * gamma))
    return SimulationResult(float(np.mean(averages)), standard_error, risk_value, N, paths, seed)
