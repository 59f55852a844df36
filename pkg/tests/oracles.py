"""Independent Monte-Carlo and simulation oracles used to pin expected values.

Each oracle recomputes a quantity from raw samples or first principles,
without calling the implementation path it is meant to check.
"""

from __future__ import annotations

import numpy as np


def pareto_raw(rng: np.random.Generator, scale: float, shape: float, n: int):
    """Raw inverse-CDF Pareto draws, independent of the package sampler."""
    return scale * rng.random(n) ** (-1.0 / shape)


def mc_mean_min(rng, scale, shape, k, n):
    """Mean of the minimum of k iid Pareto draws, by simulation."""
    draws = pareto_raw(rng, scale, shape, (n, k)) if k > 1 else pareto_raw(rng, scale, shape, (n, 1))
    return float(draws.min(axis=1).mean())

def mc_mean_max(rng, scale, shape, m, n):
    """Mean of the maximum of m iid Pareto draws, by simulation."""
    draws = pareto_raw(rng, scale, shape, (n, m))
    return float(draws.max(axis=1).mean())


def mc_conditional_excess_mean(rng, scale, shape, elapsed, n_raw, chunks=8):
    """E[x - elapsed | x > elapsed] by rejection from the base law."""
    total = 0.0
    count = 0
    for _ in range(chunks):
        x = pareto_raw(rng, scale, shape, n_raw // chunks)
        kept = x[x > elapsed]
        total += float((kept - elapsed).sum())
        count += kept.size
    if count == 0:
        raise RuntimeError("no samples survived the conditioning")
    return total / count


def mg1_mean_delay(rng, lam, service, n):
    """Mean time-in-system of an M/G/1 FIFO queue via the Lindley recursion.

    ``service`` draws n service times given (rng, n). Waiting times follow
    W_{j+1} = max(0, W_j + S_j - A_{j+1}), vectorized as a reflected walk.
    """
    s = service(rng, n)
    gaps = rng.exponential(1.0 / lam, n)
    u = s[:-1] - gaps[1:]
    c = np.concatenate(([0.0], np.cumsum(u)))
    w = c - np.minimum.accumulate(c)
    return float((w + s).mean())


def mc_job_duration(rng, scale, shape, m, c, n):
    """Mean duration of a job of m tasks, each the min of c iid copies."""
    mins = pareto_raw(rng, scale, shape, (n, m, c)).min(axis=2) if c > 1 else \
        pareto_raw(rng, scale, shape, (n, m))
    return float(mins.max(axis=1).mean())


def mc_straggler_cost(rng, scale, shape, sigma, s, c, n_cond, n_raw_chunk=4_000_000):
    """E[c * d | straggler] by rejection sampling.

    A first copy with full duration t1 is a straggler when the remaining
    work at the detection point, (1 - s) * t1, is at least sigma times the
    mean duration. Given a straggler, c - 1 fresh copies race the original:
    d = min((1 - s) * t1, fresh copies).
    """
    ex = scale * shape / (shape - 1.0)
    bar = sigma * ex
    acc = 0.0
    count = 0
    while count < n_cond:
        t1 = pareto_raw(rng, scale, shape, n_raw_chunk)
        rem = (1.0 - s) * t1
        kept = rem[rem >= bar]
        if kept.size == 0:
            continue
        if c > 1:
            fresh = pareto_raw(rng, scale, shape, (kept.size, c - 1)).min(axis=1)
            d = np.minimum(kept, fresh)
        else:
            d = kept
        acc += float(d.sum()) * c
        count += kept.size
    return acc / count


def mc_detect_total_cost(rng, scale, shape, sigma, s, c_straggler, n):
    """Unconditional E[c*d + s*t1] when stragglers get c_straggler copies."""
    ex = scale * shape / (shape - 1.0)
    bar = sigma * ex
    t1 = pareto_raw(rng, scale, shape, n)
    rem = (1.0 - s) * t1
    is_str = rem >= bar
    cost = np.empty(n)
    cost[~is_str] = t1[~is_str]
    k = int(is_str.sum())
    if k:
        if c_straggler > 1:
            fresh = pareto_raw(rng, scale, shape, (k, c_straggler - 1)).min(axis=1)
            d = np.minimum(rem[is_str], fresh)
        else:
            d = rem[is_str]
        cost[is_str] = c_straggler * d + s * t1[is_str]
    return float(cost.mean())


def mc_asktime_resource(rng, scale, shape, sigma, n):
    """Mean resource of the ask-time duplication model, by simulation.

    A task of true duration t is probed at a uniform time x in [0, t]. If
    the true remaining work t - x exceeds sigma times the mean duration, one
    fresh copy is launched; both copies then run until the earlier finish,
    so the resource is x + 2 * min(t - x, t_new). Otherwise the task runs
    alone and consumes t.
    """
    ex = scale * shape / (shape - 1.0)
    bar = sigma * ex
    t = pareto_raw(rng, scale, shape, n)
    x = rng.random(n) * t
    dup = (t - x) > bar
    res = t.copy()
    k = int(dup.sum())
    if k:
        t_new = pareto_raw(rng, scale, shape, k)
        res[dup] = x[dup] + 2.0 * np.minimum(t[dup] - x[dup], t_new)
    return float(res.mean())


def mc_duplicate_beats_double(rng, scale, shape, elapsed, n_raw, chunks=8):
    """P(remaining > 2 * fresh) given elapsed running time, by rejection."""
    hits = 0
    count = 0
    for _ in range(chunks):
        x = pareto_raw(rng, scale, shape, n_raw // chunks)
        kept = x[x > elapsed] - elapsed
        fresh = pareto_raw(rng, scale, shape, kept.size)
        hits += int((kept > 2.0 * fresh).sum())
        count += kept.size
    return hits / count


def grid_min_scalar(f, lo, hi, step):
    """Smallest grid argmin of f over [lo, hi] with the given step."""
    xs = np.arange(lo, hi + step / 2, step)
    vals = [f(float(x)) for x in xs]
    i = int(np.argmin(vals))
    return float(xs[i]), float(vals[i])
