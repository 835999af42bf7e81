"""Sequential test statistics.

Scalar, immutable updates (:func:`llr_update`, :func:`gaussian_llr_update`,
:func:`t_glr`) describe one stream; the ``*Statistic`` classes compute whole
statistic paths for many streams at once and are what the procedures consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Union

import numpy as np
from scipy import special

__all__ = [
    "StatisticState",
    "SimpleLLR",
    "GaussianMean",
    "TGlr",
    "llr_update",
    "gaussian_llr_update",
    "t_glr",
    "t_glr_value",
    "t_glr_paths",
    "t_pvalue",
    "gaussian_pvalue",
    "StreamStatistic",
    "GaussianLLRStatistic",
    "SimpleLLRStatistic",
    "TGlrStatistic",
    "PrecomputedStatistic",
]


@dataclass(frozen=True)
class StatisticState:
    """Running value of one stream's statistic after ``n`` observations.

    ``sums`` holds ``(sum x, sum x**2)``; only the entries a statistic needs are
    kept current.
    """

    n: int = 0
    value: float = 0.0
    sums: tuple = (0.0, 0.0)


# Hypothesis descriptions -------------------------------------------------

Density = Union[Callable[[float], float], Mapping]


@dataclass(frozen=True)
class SimpleLLR:
    """Simple null ``h`` vs simple alternative ``g``; densities are callables or
    mappings over a finite alphabet."""

    h: Density
    g: Density

    def increment(self, x) -> float:
        hx, gx = _density(self.h, x), _density(self.g, x)
        if hx <= 0:
            raise ValueError(f"null density is zero at x={x!r}; likelihood ratio undefined")
        if gx <= 0:
            return -math.inf
        return math.log(gx / hx)


def _density(f, x) -> float:
    if isinstance(f, Mapping):
        return float(f.get(x, 0.0))
    return float(f(x))


@dataclass(frozen=True)
class GaussianMean:
    """Known-variance normal mean, null ``theta0`` vs alternative ``theta1``."""

    sigma: float
    theta0: float = 0.0
    theta1: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.theta0 == self.theta1:
            raise ValueError("null and alternative means must differ")


@dataclass(frozen=True)
class TGlr:
    """Unknown-variance normal mean, ``mu <= 0`` vs ``mu >= delta``."""

    delta: float

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")


# Scalar updates -----------------------------------------------------------


def llr_update(state: StatisticState, x, spec: SimpleLLR) -> StatisticState:
    """Add ``log(g(x) / h(x))`` to the running log-likelihood ratio."""
    inc = spec.increment(x)
    s1, s2 = state.sums
    return StatisticState(state.n + 1, state.value + inc, (s1 + x, s2 + x * x))


def gaussian_llr_update(state: StatisticState, x: float, sigma: float, theta0=0.0, theta1=1.0) -> StatisticState:
    """Known-variance normal log-likelihood ratio.

    With the defaults ``theta0=0``, ``theta1=1`` the value after ``n``
    observations is ``(sum x - n / 2) / sigma**2``.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    s1, s2 = state.sums
    s1 += x
    n = state.n + 1
    value = (theta1 - theta0) / sigma**2 * (s1 - n * (theta0 + theta1) / 2)
    return StatisticState(n, value, (s1, s2 + x * x))


def t_glr_value(n: int, total: float, total_sq: float, delta: float) -> float:
    """Signed-root t-GLR statistic from ``n`` and the first two power sums.

    Positive branch ``+sqrt(2 n Lambda_H)`` when the mean is at least
    ``delta / 2``, else ``-sqrt(2 n Lambda_G)``, with
    ``Lambda_H = n/2 log(1 + (mean / sd)**2)``,
    ``Lambda_G = n/2 log(1 + ((mean - delta) / sd)**2)`` and ``sd`` the MLE.
    """
    if n < 2:
        raise ValueError("t-GLR statistic needs n >= 2")
    mean = total / n
    var = total_sq / n - mean * mean
    if var <= 0:
        raise ValueError("t-GLR statistic undefined for zero sample variance")
    if mean >= delta / 2:
        lam = n / 2 * math.log1p(mean * mean / var)
        return math.sqrt(2 * n * lam)
    lam = n / 2 * math.log1p((mean - delta) ** 2 / var)
    return -math.sqrt(2 * n * lam)


def t_glr(state: StatisticState, delta: float) -> float:
    """t-GLR statistic of a state whose ``sums`` carry ``(sum x, sum x**2)``."""
    return t_glr_value(state.n, state.sums[0], state.sums[1], delta)


def t_pvalue(n: int, mean: float, sighat: float) -> float:
    """One-sided t-test p-value ``1 - T_{n-1}(mean sqrt(n - 1) / sighat)``.

    ``sighat`` is the MLE standard deviation, so the argument equals the usual
    ``mean sqrt(n) / s`` with the unbiased ``s``.
    """
    if n < 2:
        raise ValueError("t p-value needs n >= 2")
    if sighat <= 0:
        raise ValueError("sighat must be positive")
    # stdtr(df, -t) = 1 - T(t), accurate in the upper tail
    return float(special.stdtr(n - 1, -mean * math.sqrt(n - 1) / sighat))


def gaussian_pvalue(n: int, total, sigma: float):
    """Known-variance z-test p-value ``1 - Phi(total / (sigma sqrt(n)))``; vectorized in ``total``."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    z = np.asarray(total, dtype=float) / (sigma * math.sqrt(n))
    out = special.ndtr(-z)
    return float(out) if out.ndim == 0 else out


# Vectorized path statistics ------------------------------------------------


def t_glr_paths(x: np.ndarray, delta: float, branch: str = "signed", axis: int = 0, sigma=None) -> np.ndarray:
    """t-GLR statistic at every prefix length along ``axis``.

    Entries at ``n = 1`` and wherever the MLE variance is zero are NaN.
    ``branch="positive"`` (``"negative"``) evaluates that branch regardless of
    the sample mean.
    Passing ``sigma`` replaces the MLE by that known value (the statistic's
    large-sample normal limit), which is defined from ``n = 1``.
    """
    x = np.moveaxis(np.asarray(x, dtype=float), axis, 0)
    n = np.arange(1, x.shape[0] + 1).reshape((-1,) + (1,) * (x.ndim - 1))
    s1 = np.cumsum(x, axis=0)
    s2 = None if sigma is not None else np.cumsum(x * x, axis=0)
    out = _t_glr_from_sums(n, s1, s2, delta, branch, sigma)
    return np.moveaxis(out, 0, axis)


def _t_glr_from_sums(n, s1, s2, delta, branch="signed", sigma=None):
    mean = s1 / n
    with np.errstate(divide="ignore", invalid="ignore"):
        if sigma is not None:
            var = np.full(np.shape(mean), float(sigma) ** 2)
        else:
            var = s2 / n - mean * mean
            var = np.where((n >= 2) & (var > 0), var, np.nan)
        pos = n * np.sqrt(np.log1p(mean * mean / var))
        if branch == "positive":
            return pos
        neg = -n * np.sqrt(np.log1p((mean - delta) ** 2 / var))
        if branch == "negative":
            return neg
    # sqrt(2 n * n/2 log(..)) = n sqrt(log(..))
    return np.where(mean >= delta / 2, pos, neg)


class StreamStatistic:
    """Computes statistic paths for ``J`` streams observed in lockstep.

    Subclasses define ``width`` (number of running sums), :meth:`features`
    (per-observation contributions to the sums) and :meth:`evaluate`
    (statistic from ``n`` and the sums).
    """

    width = 1

    def initial_state(self, J: int) -> np.ndarray:
        return np.zeros((self.width, J))

    def features(self, block: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, n: np.ndarray, sums: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def advance(self, state: np.ndarray, n0: int, block: np.ndarray):
        """Statistic values for rows ``n0+1 .. n0+k`` of ``block`` (shape (k, J)).

        Returns ``(values, new_state)`` where ``values`` has the shape of
        ``block`` and ``new_state`` is the state after the last row.
        """
        feats = self.features(block)  # (width, k, J)
        sums = np.cumsum(feats, axis=1) + state[:, None, :]
        n = np.arange(n0 + 1, n0 + block.shape[0] + 1)[:, None]
        return self.evaluate(n, sums), sums[:, -1, :].copy()


class GaussianLLRStatistic(StreamStatistic):
    """Vectorized :func:`gaussian_llr_update`."""

    def __init__(self, sigma: float, theta0: float = 0.0, theta1: float = 1.0):
        GaussianMean(sigma, theta0, theta1)
        self.sigma, self.theta0, self.theta1 = sigma, theta0, theta1

    def features(self, block):
        return block[None, :, :]

    def evaluate(self, n, sums):
        scale = (self.theta1 - self.theta0) / self.sigma**2
        return scale * (sums[0] - n * (self.theta0 + self.theta1) / 2)


class SimpleLLRStatistic(StreamStatistic):
    """Vectorized :func:`llr_update` for one hypothesis pair shared by all streams."""

    def __init__(self, spec: SimpleLLR):
        self.spec = spec
        self._inc = np.vectorize(spec.increment, otypes=[float])

    def features(self, block):
        out = np.full(block.shape, np.nan)
        ok = ~np.isnan(block)
        out[ok] = self._inc(block[ok])
        return out[None, :, :]

    def evaluate(self, n, sums):
        return sums[0]


class TGlrStatistic(StreamStatistic):
    """Vectorized t-GLR statistic; NaN at ``n = 1`` (no boundary can be crossed)."""

    width = 2

    def __init__(self, delta: float):
        TGlr(delta)
        self.delta = delta

    def features(self, block):
        return np.stack([block, block * block])

    def evaluate(self, n, sums):
        return _t_glr_from_sums(n, sums[0], sums[1], self.delta)


class PrecomputedStatistic(StreamStatistic):
    """Treats each observation as the statistic value itself (replay of recorded paths)."""

    def features(self, block):
        return block[None, :, :]

    def advance(self, state, n0, block):
        return block.astype(float, copy=True), block[-1:].astype(float).copy()
