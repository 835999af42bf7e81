"""Fixed-sample stepdown/stepup procedures and sample-size matching.

The Monte Carlo searches reuse the same underlying normal variates for every
candidate ``N`` (common random numbers), which makes the estimated error
rates smooth in ``N``.

For known-variance Gaussian streams the sum at a fixed ``N`` is drawn exactly
in one step:
``S_j(N) = N theta_j + sigma sqrt(N) (sqrt(c) Z0 + sqrt(1 - c) Z_j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import special

from .simulation import ScenarioConfig

__all__ = [
    "fixed_stepdown",
    "fixed_stepup",
    "FixedCalibration",
    "fixed_rates",
    "calibrate_fixed_N",
    "match_both_rates",
]


def _check(p, alphas):
    p = np.asarray(p, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    if p.shape != alphas.shape or p.ndim != 1:
        raise ValueError("p and alphas must be 1-d arrays of equal length")
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("p-values must lie in [0, 1]")
    return p, alphas


def fixed_stepdown(p, alphas) -> np.ndarray:
    """Indices rejected by the stepdown procedure (the ``d`` smallest p-values).

    ``d`` is the length of the initial run of ordered p-values satisfying
    ``p_(j) <= alpha_j``. Ties in ``p`` keep index order.
    """
    p, alphas = _check(p, alphas)
    order = np.argsort(p, kind="stable")
    ok = p[order] <= alphas
    d = len(ok) if ok.all() else int(np.argmin(ok))
    return np.sort(order[:d])


def fixed_stepup(p, alphas) -> np.ndarray:
    """Indices rejected by the stepup procedure (the ``u`` smallest p-values),
    ``u = max{j : p_(j) <= alpha_j}``."""
    p, alphas = _check(p, alphas)
    order = np.argsort(p, kind="stable")
    hits = np.flatnonzero(p[order] <= alphas)
    u = int(hits[-1]) + 1 if len(hits) else 0
    return np.sort(order[:u])


@dataclass(frozen=True)
class FixedCalibration:
    """A fixed streamwise sample size and the error rates it achieves."""

    N: int
    nominal_alpha: float
    typeI: float
    typeII: float
    procedure: str = ""

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")

    def row(self, scenario: str = "") -> dict:
        return dict(scenario=scenario, procedure=self.procedure, E_N=float(self.N), SE=None,
                    typeI=self.typeI, typeII=self.typeII, savings=None)


def _counts(p, alphas, truth, kind):
    """Per-replicate (#true nulls rejected, #false nulls accepted, #rejected)."""
    order = np.argsort(p, axis=1, kind="stable")
    ok = np.take_along_axis(p, order, axis=1) <= alphas
    J = p.shape[1]
    if kind == "stepdown":
        k = np.where(ok.all(axis=1), J, np.argmin(ok, axis=1))
    else:
        k = np.where(ok.any(axis=1), J - np.argmax(ok[:, ::-1], axis=1), 0)
    cum = np.concatenate([np.zeros((len(p), 1), dtype=np.int64), np.cumsum(truth[order], axis=1)], axis=1)
    true_rej = np.take_along_axis(cum, k[:, None], axis=1)[:, 0]
    n_false = J - truth.sum()
    false_acc = n_false - (k - true_rej)
    return true_rej, false_acc, k


def _rates(error, counts, truth):
    true_rej, false_acc, k = counts
    J = len(truth)
    if error.metric == "fdp":
        with np.errstate(invalid="ignore", divide="ignore"):
            fdp = np.where(k > 0, true_rej / np.maximum(k, 1), 0.0)
            fnp = np.where(J - k > 0, false_acc / np.maximum(J - k, 1), 0.0)
        return float(np.mean(fdp > error.gamma1)), float(np.mean(fnp > error.gamma2))
    return float(np.mean(true_rej >= error.k1)), float(np.mean(false_acc >= error.k2))


def _pvalues(scenario: ScenarioConfig, Ns: Sequence[int], reps: int, seed, chunk: int = 64):
    """Yield ``(N, p)`` blocks, ``p`` of shape ``(rows, J)``, covering ``reps`` rows per ``N``."""
    J, sigma, c = scenario.J, scenario.sigma, scenario.correlation
    theta = scenario.theta
    if scenario.statistic == "gaussian":
        rng = np.random.default_rng(seed)
        noise = math.sqrt(c) * rng.standard_normal((reps, 1)) + math.sqrt(1 - c) * rng.standard_normal((reps, J))
        for N in Ns:
            yield N, special.ndtr(-(math.sqrt(N) * theta / sigma + noise))
        return
    if min(Ns) < 2:
        raise ValueError("t-test p-values need N >= 2")
    # time-major draws from per-chunk streams: data for a smaller Nmax is a prefix
    Nmax = max(Ns)
    idx = np.asarray(Ns) - 1
    seqs = np.random.SeedSequence(seed).spawn(math.ceil(reps / chunk))
    for start, seq in zip(range(0, reps, chunk), seqs):
        k = min(chunk, reps - start)
        g0, g1 = (np.random.default_rng(s) for s in seq.spawn(2))
        x = theta + sigma * (
            math.sqrt(c) * g0.standard_normal((Nmax, k, 1)) + math.sqrt(1 - c) * g1.standard_normal((Nmax, k, J))
        )
        s1 = np.cumsum(x, axis=0)[idx]
        s2 = np.cumsum(x * x, axis=0)[idx]
        for i, N in enumerate(Ns):
            mean = s1[i] / N
            sighat = np.sqrt(np.maximum(s2[i] / N - mean * mean, 0.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                t = mean * math.sqrt(N - 1) / sighat
            yield N, special.stdtr(N - 1, -t)


def fixed_rates(scenario: ScenarioConfig, kind: str, alphas, Ns: Sequence[int], reps: int, seed=None) -> dict:
    """Monte Carlo ``{N: (typeI, typeII)}`` for a fixed-sample procedure.

    Args:
        scenario: Stream model and error metric.
        kind: ``"stepdown"`` or ``"stepup"``.
        alphas: Step values.
        Ns: Candidate sample sizes.
        reps: Number of simulated ensembles per ``N``.
        seed: Seed shared by all ``N`` (common random numbers).
    """
    if kind not in ("stepdown", "stepup"):
        raise ValueError(f"kind must be 'stepdown' or 'stepup', got {kind!r}")
    alphas = np.asarray(alphas, dtype=float)
    truth = scenario.truth
    parts = {}
    for N, p in _pvalues(scenario, sorted(set(int(n) for n in Ns)), reps, seed):
        parts.setdefault(N, []).append(_counts(p, alphas, truth, kind))
    out = {}
    for N, blocks in parts.items():
        counts = tuple(np.concatenate(col) for col in zip(*blocks))
        out[N] = _rates(scenario.error, counts, truth)
    return out


def calibrate_fixed_N(
    scenario: ScenarioConfig,
    kind: str,
    alphas,
    target: float,
    reps: int = 2000,
    seed=None,
    N_range: tuple = (1, 500),
    name: str = "",
) -> FixedCalibration:
    """Fixed ``N`` whose type II rate is closest to ``target``.

    Assumes the type II rate is nonincreasing in ``N`` and bisects for the
    smallest ``N`` at or below ``target``; that ``N`` and its predecessor are
    compared, ties going to the smaller ``N``.

    Raises:
        ValueError: if ``reps < 1000`` or the target is out of reach within
            ``N_range``.
    """
    if reps < 1000:
        raise ValueError("calibrate_fixed_N needs reps >= 1000")
    lo, hi = N_range
    if scenario.statistic == "tglr":
        lo = max(lo, 2)
    if not 1 <= lo <= hi:
        raise ValueError("invalid N_range")
    cache = {}

    def rate(N):
        if N not in cache:
            cache.update(fixed_rates(scenario, kind, alphas, [N], reps, seed))
        return cache[N][1]

    if rate(hi) > target:
        raise ValueError(
            f"type II target {target} unreachable: rate at N={hi} is {rate(hi):.4f} "
            f"(rate at N={lo} is {rate(lo):.4f})"
        )
    a, b = lo, hi
    if rate(a) <= target:
        b = a
    while b - a > 1:
        mid = (a + b) // 2
        if rate(mid) <= target:
            b = mid
        else:
            a = mid
    best = b
    if b - 1 >= lo and abs(rate(b - 1) - target) <= abs(rate(b) - target):
        best = b - 1
    t1, t2 = cache[best]
    return FixedCalibration(best, scenario.error.alpha, t1, t2, name or _name(kind))


def _name(kind, prime=False):
    return ("Fix_D" if kind == "stepdown" else "Fix_U") + ("'" if prime else "")


def match_both_rates(
    scenario: ScenarioConfig,
    kind: str,
    targets: tuple,
    alpha_grid: Sequence[float],
    N_range: tuple,
    reps: int = 2000,
    seed=None,
) -> FixedCalibration:
    """Grid search over nominal ``alpha`` and ``N`` matching both error rates.

    The chosen point minimizes ``max(|typeI - t1|, |typeII - t2|)``; ties go to
    the earlier grid point (smaller ``alpha``, then smaller ``N``).
    """
    alpha_grid = list(alpha_grid)
    Ns = list(range(N_range[0], N_range[1] + 1))
    if not alpha_grid or not Ns:
        raise ValueError("empty search grid")
    t1, t2 = targets
    best = None
    for a in sorted(alpha_grid):
        err = replace(scenario.error, alpha=a)
        sc = replace(scenario, error=err)
        alphas = err.step_values(scenario.J, kind).alphas
        for N, (r1, r2) in sorted(fixed_rates(sc, kind, alphas, Ns, reps, seed).items()):
            dev = max(abs(r1 - t1), abs(r2 - t2))
            if best is None or dev < best[0]:
                best = (dev, N, a, r1, r2)
    _, N, a, r1, r2 = best
    return FixedCalibration(N, a, r1, r2, _name(kind, prime=True))
