"""Monte Carlo harnesses: strong-error tables, moment bounds, decay rates.

Replica r of a run draws its Brownian path from the (seed, r) counter
stream, so the loops are embarrassingly parallel and the reported numbers
do not depend on execution order or thread count: replicas are processed
in fixed-size chunks and chunk results are reduced in index order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .brownian import _block_sums, ratio_as_int, sample_increments
from .errors import ConfigurationError, DegenerateFitError, NumericalError
from .model import SfdeModel
from .scheme import CLASSIC_EM, TRUNCATED_EM, SchemeConfig, _run_batch, resolve_grid
from .segment import Segment, constant_weight

DEFAULT_CHUNK = 256
MOMENT_FLOOR = 1e-300
MIN_SAMPLES = 100


@dataclass
class ErrorTable:
    """Per-step-size RMS terminal errors and the fitted log-log slope."""

    steps: np.ndarray
    rms_errors: np.ndarray
    std_errors: np.ndarray
    fitted_slope: Optional[float]
    samples: int
    degenerate: bool = False


@dataclass
class MomentCurve:
    """E|Y(t)|^p estimates on the reporting grid plus the running maximum over all steps."""

    times: np.ndarray
    moments: np.ndarray
    running_max: float
    diverged: int
    samples: int


@dataclass
class StabilityReport:
    """Decay diagnostics: log-moment curve, fitted tail rate, pathwise rates, sample mean."""

    times: np.ndarray
    log_moment: np.ndarray
    moment_rate: float
    pathwise_rates: np.ndarray
    sample_mean: np.ndarray
    clamped: bool
    p_exponent: float
    samples: int


def _resolve_threads(threads: Optional[int]) -> int:
    if threads is None or threads == 0:
        return max(1, min(4, os.cpu_count() or 1))
    return max(1, int(threads))


def _chunk_plan(samples: int, chunk_size: int) -> List[Tuple[int, int]]:
    plan = []
    start = 0
    while start < samples:
        count = min(chunk_size, samples - start)
        plan.append((start, count))
        start += count
    return plan


def _map_chunks(worker, samples: int, chunk_size: int, threads: Optional[int]) -> list:
    """Run worker(start, count) over fixed chunks; results in chunk order."""
    plan = _chunk_plan(samples, chunk_size)
    n_workers = _resolve_threads(threads)
    if n_workers <= 1 or len(plan) <= 1:
        return [worker(s, c) for s, c in plan]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        futures = [pool.submit(worker, s, c) for s, c in plan]
        return [f.result() for f in futures]


def _chunk_increments(seed: int, start: int, count: int, n_steps: int, dim: int, step: float) -> np.ndarray:
    return np.stack([sample_increments(seed, start + i, dim, step, n_steps) for i in range(count)])


def strong_error(
    model: SfdeModel,
    step_list: Sequence[float],
    step_ref: float,
    horizon: float,
    samples: int,
    seed: int,
    *,
    exact_terminal: Optional[Callable] = None,
    threads: Optional[int] = None,
    chunk_size: int = DEFAULT_CHUNK,
) -> ErrorTable:
    """RMS terminal error per coarse step against a coupled reference path.

    Every replica draws one fine Brownian grid at ``step_ref``; the
    reference is the truncated scheme on that grid (or ``exact_terminal``,
    a callable (fine increments, horizon) -> terminal states, when a closed
    form is available) and each coarse run consumes block-summed increments
    of the same path.
    """
    if samples < MIN_SAMPLES:
        raise ConfigurationError(f"strong_error needs at least {MIN_SAMPLES} samples, got {samples}")
    steps = sorted({float(s) for s in step_list}, reverse=True)
    if len(steps) != len(step_list):
        raise ConfigurationError("step_list contains duplicates")
    factors = []
    for s in steps:
        f = ratio_as_int(s, step_ref, "step/step_ref")
        if f < 2 or f & (f - 1) != 0:
            raise ConfigurationError(f"step {s} is not step_ref * 2^j for j >= 1 (factor {f})")
        factors.append(f)
    ref_config = SchemeConfig(step=step_ref, horizon=horizon, variant=TRUNCATED_EM)
    _, _, n_ref = resolve_grid(model, ref_config)
    coarse_configs = [SchemeConfig(step=s, horizon=horizon, variant=TRUNCATED_EM) for s in steps]
    for cfg in coarse_configs:
        resolve_grid(model, cfg)

    def worker(start: int, count: int) -> np.ndarray:
        inc = _chunk_increments(seed, start, count, n_ref, model.dim_noise, step_ref)
        if exact_terminal is not None:
            ref_term = np.asarray(exact_terminal(inc, horizon))
        else:
            ref_term = _run_batch(model, ref_config, inc, replica_offset=start).terminal
        err_sq = np.empty((len(steps), count))
        for i, (cfg, factor) in enumerate(zip(coarse_configs, factors)):
            coarse = _block_sums(inc, factor, axis=1)
            term = _run_batch(model, cfg, coarse, replica_offset=start).terminal
            err_sq[i] = np.sum((term - ref_term) ** 2, axis=-1)
        return err_sq

    err_sq = np.concatenate(_map_chunks(worker, samples, chunk_size, threads), axis=1)
    mean_sq = err_sq.mean(axis=1)
    rms = np.sqrt(mean_sq)
    se_mean = err_sq.std(axis=1, ddof=1) / math.sqrt(samples)
    std_errors = np.where(rms > 0, se_mean / np.where(rms > 0, 2.0 * rms, 1.0), 0.0)
    table = ErrorTable(
        steps=np.array(steps),
        rms_errors=rms,
        std_errors=std_errors,
        fitted_slope=None,
        samples=samples,
        degenerate=bool(np.any(rms <= 0.0)),
    )
    if not table.degenerate:
        table.fitted_slope = fit_rate(table)
    return table


def fit_rate(table: ErrorTable) -> float:
    """Ordinary least-squares slope of log(rms) against log(step)."""
    steps = np.asarray(table.steps, dtype=float)
    errors = np.asarray(table.rms_errors, dtype=float)
    if steps.size < 2:
        raise DegenerateFitError(f"need at least 2 error levels, got {steps.size}")
    if np.any(errors <= 0.0) or not np.all(np.isfinite(errors)):
        raise DegenerateFitError("rate fit requires strictly positive finite errors")
    slope, _ = np.polyfit(np.log(steps), np.log(errors), 1)
    return float(slope)


def moment_estimate(
    model: SfdeModel,
    config: SchemeConfig,
    p_exponent: float,
    samples: int,
    seed: int,
    report_every: int = 1,
    *,
    threads: Optional[int] = None,
    chunk_size: int = DEFAULT_CHUNK,
) -> MomentCurve:
    """Monte Carlo estimate of E|Y(t_k)|^p on the grid, with its running maximum.

    Classic-scheme replicas that diverge are dropped from the estimate from
    their divergence step onward and counted separately.
    """
    if p_exponent < 2:
        raise ConfigurationError(f"moment exponent must be >= 2, got {p_exponent}")
    if samples < MIN_SAMPLES:
        raise ConfigurationError(f"moment_estimate needs at least {MIN_SAMPLES} samples, got {samples}")
    delta, _, n_steps = resolve_grid(model, config)
    classic = config.variant == CLASSIC_EM

    def worker(start: int, count: int):
        inc = _chunk_increments(seed, start, count, n_steps, model.dim_noise, config.step)
        sums = np.zeros(n_steps + 1)
        counts = np.zeros(n_steps + 1, dtype=np.int64)

        def observe(k, states, alive):
            pow_p = np.sum(states * states, axis=-1) ** (0.5 * p_exponent)
            if classic:
                pow_p = np.where(alive, pow_p, 0.0)
                counts[k] += int(alive.sum())
            else:
                counts[k] += states.shape[0]
            sums[k] += float(pow_p.sum())

        res = _run_batch(model, config, inc, per_step=observe, replica_offset=start)
        return sums, counts, int(res.diverged.sum())

    sums = np.zeros(n_steps + 1)
    counts = np.zeros(n_steps + 1, dtype=np.int64)
    diverged = 0
    for chunk_sums, chunk_counts, chunk_div in _map_chunks(worker, samples, chunk_size, threads):
        sums += chunk_sums
        counts += chunk_counts
        diverged += chunk_div
    with np.errstate(invalid="ignore", divide="ignore"):
        estimates = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    times = np.arange(n_steps + 1) * delta
    idx = np.arange(0, n_steps + 1, max(1, int(report_every)))
    if idx[-1] != n_steps:
        idx = np.append(idx, n_steps)
    finite = estimates[np.isfinite(estimates)]
    running_max = float(finite.max()) if finite.size else float("nan")
    return MomentCurve(
        times=times[idx],
        moments=estimates[idx],
        running_max=running_max,
        diverged=diverged,
        samples=samples,
    )


def stability_decay(
    model: SfdeModel,
    config: SchemeConfig,
    p_exponent: float,
    samples: int,
    seed: int,
    tail_fraction: float = 0.6,
    report_every: int = 1,
    *,
    threads: Optional[int] = None,
    chunk_size: int = DEFAULT_CHUNK,
) -> StabilityReport:
    """Decay diagnostics for the p-th moment and per-replica pathwise rates.

    The moment rate is the least-squares slope of log E|Y(t)|^p over the
    final ``tail_fraction`` of [0, T]; moment estimates below 1e-300 are
    clamped, flagged, and excluded from the fit.
    """
    if p_exponent <= 0:
        raise ConfigurationError(f"moment exponent must be positive, got {p_exponent}")
    if samples < MIN_SAMPLES:
        raise ConfigurationError(f"stability_decay needs at least {MIN_SAMPLES} samples, got {samples}")
    if not 0.0 < tail_fraction <= 1.0:
        raise ConfigurationError(f"tail_fraction must lie in (0, 1], got {tail_fraction}")
    delta, _, n_steps = resolve_grid(model, config)
    dim = model.dim_state

    def worker(start: int, count: int):
        inc = _chunk_increments(seed, start, count, n_steps, model.dim_noise, config.step)
        sums_p = np.zeros(n_steps + 1)
        sums_state = np.zeros((n_steps + 1, dim))

        def observe(k, states, alive):
            sums_p[k] += float(np.sum(np.sum(states * states, axis=-1) ** (0.5 * p_exponent)))
            sums_state[k] += states.sum(axis=0)

        res = _run_batch(model, config, inc, per_step=observe, replica_offset=start)
        terminal_norm = np.sqrt(np.sum(res.terminal**2, axis=-1))
        return sums_p, sums_state, terminal_norm

    sums_p = np.zeros(n_steps + 1)
    sums_state = np.zeros((n_steps + 1, dim))
    terminal_norms = []
    for chunk_p, chunk_state, chunk_term in _map_chunks(worker, samples, chunk_size, threads):
        sums_p += chunk_p
        sums_state += chunk_state
        terminal_norms.append(chunk_term)
    terminal_norms = np.concatenate(terminal_norms)

    moments = sums_p / samples
    clamped = moments < MOMENT_FLOOR
    log_moment = np.log(np.maximum(moments, MOMENT_FLOOR))
    times = np.arange(n_steps + 1) * delta
    horizon = config.horizon
    tail = (times >= horizon * (1.0 - tail_fraction)) & ~clamped
    if tail.sum() < 2:
        raise NumericalError("tail window has fewer than 2 usable points for the rate fit")
    moment_rate, _ = np.polyfit(times[tail], log_moment[tail], 1)

    pathwise_rates = np.log(np.maximum(terminal_norms, MOMENT_FLOOR)) / horizon
    sample_mean = sums_state / samples
    idx = np.arange(0, n_steps + 1, max(1, int(report_every)))
    if idx[-1] != n_steps:
        idx = np.append(idx, n_steps)
    return StabilityReport(
        times=times[idx],
        log_moment=log_moment[idx],
        moment_rate=float(moment_rate),
        pathwise_rates=pathwise_rates,
        sample_mean=sample_mean[idx],
        clamped=bool(clamped.any()),
        p_exponent=p_exponent,
        samples=samples,
    )


def admissible_nu(b1: float, b2: float, b3: float, b4: float, p_exponent: float, tau: float) -> float:
    """Largest decay constant nu > 0 satisfying the two delay-margin inequalities

        (p/2) (b1 - b2 e^{nu tau}) - nu >= 0   and   b3 - b4 e^{nu tau} >= 0,

    located by bracket doubling and bisection to 1e-9.
    """
    if not (b1 > b2 >= 0.0):
        raise ValueError(f"need b1 > b2 >= 0, got b1={b1}, b2={b2}")
    if not (b3 > b4 >= 0.0):
        raise ValueError(f"need b3 > b4 >= 0, got b3={b3}, b4={b4}")
    if p_exponent < 2:
        raise ValueError(f"moment exponent must be >= 2, got {p_exponent}")
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")

    def margin_one(nu: float) -> float:
        return 0.5 * p_exponent * (b1 - b2 * math.exp(min(nu * tau, 700.0))) - nu

    def margin_two(nu: float) -> float:
        return b3 - b4 * math.exp(min(nu * tau, 700.0))

    roots = [_decreasing_root(margin_one)]
    if b4 > 0.0:
        roots.append(_decreasing_root(margin_two))
    return min(roots)


def _decreasing_root(f, tol: float = 1e-9) -> float:
    """Root of a strictly decreasing function with f(0) > 0."""
    lo, hi = 0.0, 1.0
    while f(hi) > 0.0:
        lo, hi = hi, hi * 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return lo


def phi_diagnostic(seg: Segment, epsilon0: float) -> float:
    """Lyapunov-type functional 1 + (1 - e0)|phi(0)|^2 + (e0/tau) int |phi|^2; always >= 1."""
    if not 0.0 < epsilon0 < 1.0:
        raise ValueError(f"epsilon0 must lie in (0, 1), got {epsilon0}")
    head_sq = float(np.sum(seg.head * seg.head))
    mean_sq = seg.weighted_integral(constant_weight(1.0 / seg.tau), lambda v: np.sum(v * v, axis=-1))
    return 1.0 + (1.0 - epsilon0) * head_sq + epsilon0 * float(mean_sq)
