"""Critical-value ladders and standardizing functions.

A :class:`CriticalLadder` holds one stream's boundaries
``A_1 <= ... <= A_J <= B_J <= ... <= B_1``. Streams whose ladders differ are
mapped onto common values ``a_w``, ``b_w`` by increasing piecewise-linear
standardizers (:func:`standardize`).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .statistics import t_glr_paths
from .step_values import StepValueLadder

__all__ = [
    "DEFAULT_RHO",
    "CriticalLadder",
    "Standardizer",
    "StandardizedLadder",
    "RejectiveLadder",
    "wald_boundaries",
    "sprt_ladder",
    "standardize",
    "rejective_ladder",
    "glr_t_calibrate",
    "format_ladder_table",
]

#: Overshoot correction for continuous data (Brownian-motion approximation).
DEFAULT_RHO = 0.583


@dataclass(frozen=True)
class CriticalLadder:
    """Per-stream lower (``A``) and upper (``B``) boundaries indexed by step level."""

    A: np.ndarray
    B: np.ndarray
    rho: float = 0.0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if A.shape != B.shape or A.ndim != 1 or len(A) == 0:
            raise ValueError("A and B must be nonempty 1-d arrays of equal length")
        if np.any(np.diff(A) < 0) or np.any(np.diff(B) > 0) or A[-1] > B[-1]:
            raise ValueError("ladder violates A_1 <= ... <= A_J <= B_J <= ... <= B_1")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def J(self) -> int:
        return len(self.A)


@dataclass(frozen=True)
class RejectiveLadder:
    """Upper boundaries only, for procedures that stop early solely to reject."""

    B: np.ndarray
    horizon: Optional[int] = None

    def __post_init__(self):
        B = np.asarray(self.B, dtype=float)
        if B.ndim != 1 or len(B) == 0 or np.any(np.diff(B) > 0):
            raise ValueError("B must be a nonempty nonincreasing 1-d array")
        object.__setattr__(self, "B", B)

    @property
    def J(self) -> int:
        return len(self.B)


def wald_boundaries(a: float, b: float, rho: float = 0.0) -> tuple[float, float]:
    """Wald's approximate SPRT boundaries for type I/II error probabilities ``a``, ``b``.

    Returns ``(log(b / (1 - a)) + rho, log((1 - b) / a) - rho)``.
    """
    if not (0 < a < 1 and 0 < b < 1):
        raise ValueError("a and b must lie in (0, 1)")
    if a + b > 1:
        raise ValueError("wald_boundaries requires a + b <= 1")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    return math.log(b / (1 - a)) + rho, math.log((1 - b) / a) - rho


def sprt_ladder(ladder: StepValueLadder, rho: float = 0.0) -> CriticalLadder:
    """Closed-form ladder for simple-vs-simple log-likelihood ratios.

    Up to Wald's approximation the SPRT with boundaries ``(A_1, B_w)`` has type
    I error ``alpha_w`` and the SPRT with ``(A_w, B_1)`` has type II error
    ``beta_w``.
    """
    if ladder.betas is None:
        raise ValueError("sprt_ladder needs type II step values")
    al, be = ladder.alphas, ladder.betas
    a1, b1 = al[0], be[0]
    if a1 + b1 > 1:
        raise ValueError("sprt_ladder requires alpha_1 + beta_1 <= 1")
    if np.any(al <= 0) or np.any(be <= 0):
        raise ValueError("step values must be positive")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    A = np.log(be * (1 - b1) / (1 - b1 - a1 * (1 - be))) + rho
    B = np.log((1 - a1 - b1 * (1 - al)) / (al * (1 - a1))) - rho
    return CriticalLadder(A, B, rho)


class Standardizer:
    """Increasing piecewise-linear map through ``(x_i, y_i)``, slope 1 outside the knots."""

    def __init__(self, x: Sequence[float], y: Sequence[float]):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
            raise ValueError("standardizer knots must be strictly increasing")
        self.x, self.y = x, y

    @classmethod
    def identity(cls) -> "Standardizer":
        return cls([0.0, 1.0], [0.0, 1.0])

    @property
    def is_identity(self) -> bool:
        return np.array_equal(self.x, self.y)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if self.is_identity:
            return v
        x, y = self.x, self.y
        out = np.interp(v, x, y)
        out = np.where(v < x[0], y[0] + (v - x[0]), out)
        out = np.where(v > x[-1], y[-1] + (v - x[-1]), out)
        return out


@dataclass(frozen=True)
class StandardizedLadder:
    """Common standardized boundaries ``a`` (nondecreasing) and ``b`` (nonincreasing).

    ``maps[j]`` sends stream ``j``'s raw statistic onto the common scale. ``a`` is
    ``None`` for rejective procedures.
    """

    a: Optional[np.ndarray]
    b: np.ndarray
    maps: tuple = ()

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        if np.any(np.diff(b) > 0):
            raise ValueError("b must be nonincreasing")
        object.__setattr__(self, "b", b)
        if self.a is not None:
            a = np.asarray(self.a, dtype=float)
            if a.shape != b.shape:
                raise ValueError("a and b must have equal length")
            if np.any(np.diff(a) < 0) or a[-1] > b[-1]:
                raise ValueError("a must be nondecreasing with a_J <= b_J")
            object.__setattr__(self, "a", a)
        object.__setattr__(self, "maps", tuple(self.maps))

    @property
    def J(self) -> int:
        return len(self.b)

    @property
    def is_identity(self) -> bool:
        return all(m.is_identity for m in self.maps)

    @classmethod
    def common(cls, ladder) -> "StandardizedLadder":
        """Identity standardization for a ladder shared by every stream."""
        a = getattr(ladder, "A", None)
        return cls(a, ladder.B, ())

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Standardize raw statistics; the last axis indexes streams."""
        if not self.maps or self.is_identity:
            return values
        out = np.empty_like(values, dtype=float)
        for j, m in enumerate(self.maps):
            out[..., j] = m(values[..., j])
        return out


def _default_anchors(ladder) -> tuple[Optional[np.ndarray], np.ndarray]:
    J = ladder.J
    # a_1 = -J and b_1 = J; step by one at every strict increase, so ties collapse
    b = J - np.concatenate([[0], np.cumsum(np.diff(ladder.B) != 0)])
    a = None
    if getattr(ladder, "A", None) is not None:
        a = -J + np.concatenate([[0], np.cumsum(np.diff(ladder.A) != 0)])
    return (None if a is None else a.astype(float)), b.astype(float)


def _tie_pattern(x):
    return np.diff(np.asarray(x, dtype=float)) == 0


def _knots(ladder, a, b):
    xs = list(ladder.B[::-1])
    ys = list(b[::-1])
    if a is not None:
        xs = list(ladder.A) + xs
        ys = list(a) + ys
    xs, ys = np.asarray(xs), np.asarray(ys)
    keep = np.concatenate([[True], np.diff(xs) != 0])
    return xs[keep], ys[keep]


def standardize(ladders: Sequence, anchors: Optional[tuple] = None) -> StandardizedLadder:
    """Map per-stream ladders onto common standardized boundaries.

    Args:
        ladders: One :class:`CriticalLadder` (or :class:`RejectiveLadder`) per stream.
        anchors: Optional ``(a, b)`` target values; ``a`` is ignored for
            rejective ladders. Defaults to the integers ``-J..-1`` and ``J..1``
            with ties collapsed.

    Returns:
        A :class:`StandardizedLadder`. If all streams share one ladder the
        identity map is used and the anchors are the ladder itself.
    """
    ladders = list(ladders)
    if not ladders:
        raise ValueError("need at least one ladder")
    first = ladders[0]
    rejective = getattr(first, "A", None) is None
    same = all(
        np.array_equal(l.B, first.B) and (rejective or np.array_equal(l.A, first.A))
        for l in ladders
    )
    if same and anchors is None:
        ident = Standardizer.identity()
        return StandardizedLadder(None if rejective else first.A, first.B, (ident,) * len(ladders))

    for l in ladders:
        if l.J != first.J:
            raise ValueError("all ladders must have the same number of levels")
        # equal B's mark equal alphas; every stream must share the pattern
        if not np.array_equal(_tie_pattern(l.B), _tie_pattern(first.B)):
            raise ValueError("ladders disagree on the tie pattern of B")
        if not rejective and not np.array_equal(_tie_pattern(l.A), _tie_pattern(first.A)):
            raise ValueError("ladders disagree on the tie pattern of A")
        if not rejective and l.A[-1] >= l.B[-1]:
            raise ValueError("standardization needs A_J < B_J")

    if anchors is None:
        a, b = _default_anchors(first)
    else:
        a = None if rejective else np.asarray(anchors[0], dtype=float)
        b = np.asarray(anchors[1], dtype=float)
        if not np.array_equal(_tie_pattern(b), _tie_pattern(first.B)):
            raise ValueError("anchor b must tie exactly where B ties")
        if np.any(np.diff(b) > 0):
            raise ValueError("anchor b must be nonincreasing")
        if a is not None:
            if not np.array_equal(_tie_pattern(a), _tie_pattern(first.A)):
                raise ValueError("anchor a must tie exactly where A ties")
            if np.any(np.diff(a) < 0) or a[-1] >= b[-1]:
                raise ValueError("anchor a must be nondecreasing with a_J < b_J")
    maps = tuple(Standardizer(*_knots(l, a, b)) for l in ladders)
    return StandardizedLadder(a, b, maps)


def rejective_ladder(alphas: Sequence[float], horizon: Optional[int] = None) -> RejectiveLadder:
    """Upper boundaries ``B_w = -log(alpha_w)`` for a log-likelihood-ratio statistic.

    ``exp(Lambda(n))`` is a nonnegative martingale with mean 1 under the null,
    so by Ville's inequality ``P(sup_n Lambda(n) >= -log a) <= a`` for any
    horizon.
    """
    al = np.asarray(alphas, dtype=float)
    if np.any(al <= 0) or np.any(al > 1):
        raise ValueError("alphas must lie in (0, 1]")
    if np.any(np.diff(al) < 0):
        raise ValueError("alphas must be nondecreasing")
    return RejectiveLadder(-np.log(al), horizon)


def _stopped_extremes(paths: np.ndarray, lower: float, upper: float, chunk: int = 10_000):
    """Running max before first ``<= lower`` and running min before first ``>= upper``.

    ``paths`` has shape (reps, horizon); NaN entries never stop a path.
    """
    if len(paths) > chunk:
        parts = [_stopped_extremes(paths[i : i + chunk], lower, upper) for i in range(0, len(paths), chunk)]
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])
    below = paths <= lower
    above = paths >= upper
    n = paths.shape[1]
    first_below = np.where(below.any(axis=1), below.argmax(axis=1), n)
    first_above = np.where(above.any(axis=1), above.argmax(axis=1), n)
    idx = np.arange(n)
    filled = np.nan_to_num(paths, nan=-np.inf)
    smax = np.where(idx[None, :] < first_below[:, None], filled, -np.inf).max(axis=1)
    filled = np.nan_to_num(paths, nan=np.inf)
    smin = np.where(idx[None, :] < first_above[:, None], filled, np.inf).min(axis=1)
    return smax, smin


def _quantile_upper(sample: np.ndarray, p: float) -> float:
    # smallest B with empirical P(sample >= B) <= p
    s = np.sort(sample)[::-1]
    m = int(math.floor(p * len(s)))
    if m >= len(s):
        return -np.inf
    return float(np.nextafter(s[m], np.inf))


def glr_t_calibrate(
    delta: float,
    ladder: StepValueLadder,
    horizon: int,
    reps: int,
    seed=None,
    sigma: float = 1.0,
    mode: str = "design",
    max_iter: int = 20,
    chunk: int = 10_000,
) -> CriticalLadder:
    """Monte Carlo critical values for the sequential t-GLR statistic.

    Null paths (mean 0) and alternative paths (mean ``delta``) of length
    ``horizon`` are simulated with standard deviation ``sigma``; the statistic
    is invariant under joint rescaling of data and ``delta``, so only the ratio
    ``delta / sigma`` matters.

    ``mode="design"`` finds the ladder whose simulated probabilities match the
    definitions directly: ``B_w`` is the level the null path crosses before
    ``A_1`` with probability ``alpha_w``; ``A_w`` is the level the alternative
    path crosses before ``B_1`` with probability ``beta_w``. ``A_1``/``B_1`` are
    solved by fixed-point iteration.

    ``mode="normal"`` runs the same search with ``sigma`` treated as known,
    so only standard normal variates enter; it ignores the heavy small-``n``
    tails of the estimated variance and is not guaranteed to be valid.

    ``mode="conservative"`` drops the sign condition and the competing
    boundary: ``B_w`` is the ``(1 - alpha_w)``-quantile of the running maximum
    of ``sqrt(2 n Lambda_H)`` under the null (pivotal in sigma), and ``A_w`` is
    the ``beta_w``-quantile of the running minimum of ``-sqrt(2 n Lambda_G)``
    under the alternative.

    Raises:
        ValueError: if ``reps`` is too small to resolve the smallest step value
            (fewer than 10 expected exceedances).
    """
    if ladder.betas is None:
        raise ValueError("t-GLR calibration needs type II step values")
    if delta <= 0 or sigma <= 0:
        raise ValueError("delta and sigma must be positive")
    if horizon < 2:
        raise ValueError("horizon must be at least 2")
    if mode not in ("design", "normal", "conservative"):
        raise ValueError(f"unknown mode {mode!r}")
    al, be = ladder.alphas, ladder.betas
    if reps <= 0 or min(al[0], be[0]) * reps < 10:
        raise ValueError(
            f"reps={reps} too small: need alpha_1*reps and beta_1*reps >= 10 "
            f"(alpha_1={al[0]:.3g}, beta_1={be[0]:.3g})"
        )
    rng = np.random.default_rng(seed)
    cons = mode == "conservative"
    known = sigma if mode == "normal" else None
    null = _t_glr_sample(rng, 0.0, sigma, delta, horizon, reps, chunk, "positive" if cons else "signed", known)
    alt = _t_glr_sample(rng, delta, sigma, delta, horizon, reps, chunk, "negative" if cons else "signed", known)

    if mode == "conservative":
        run_max = np.nanmax(null, axis=1)
        run_min = np.nanmin(alt, axis=1)
        B = np.array([_quantile_upper(run_max, a) for a in al])
        A = np.array([-_quantile_upper(-run_min, b) for b in be])
        return _rearranged(A, B)

    A1, B1 = -np.inf, np.inf
    for _ in range(max_iter):
        null_max, _ = _stopped_extremes(null, A1, np.inf)
        _, alt_min = _stopped_extremes(alt, -np.inf, B1)
        B = np.array([_quantile_upper(null_max, a) for a in al])
        A = np.array([-_quantile_upper(-alt_min, b) for b in be])
        if A[0] == A1 and B[0] == B1:
            break
        A1, B1 = A[0], B[0]
    return _rearranged(A, B)


def _rearranged(A, B) -> CriticalLadder:
    A = np.maximum.accumulate(A)
    B = np.minimum.accumulate(B)
    if A[-1] > B[-1]:
        raise ValueError("calibrated ladder crosses (A_J > B_J); increase horizon or reps")
    return CriticalLadder(A, B, 0.0)


def _t_glr_sample(rng, mu, sigma, delta, horizon, reps, chunk, branch="signed", known=None):
    out = np.empty((reps, horizon))
    for start in range(0, reps, chunk):
        stop = min(reps, start + chunk)
        x = mu + sigma * rng.standard_normal((stop - start, horizon))
        out[start:stop] = t_glr_paths(x, delta, branch=branch, axis=1, sigma=known)
    return out


def format_ladder_table(ladder, standardized: Optional[StandardizedLadder] = None) -> str:
    """Tab-separated audit table with one row per level: ``w, A, B, a, b``."""
    std = standardized if standardized is not None else StandardizedLadder.common(ladder)
    A = getattr(ladder, "A", None)
    buf = io.StringIO()
    buf.write("w\tA\tB\ta\tb\n")
    for w in range(ladder.J):
        Aw = "" if A is None else f"{A[w]:.6f}"
        aw = "" if std.a is None else f"{std.a[w]:.6f}"
        buf.write(f"{w + 1}\t{Aw}\t{ladder.B[w]:.6f}\t{aw}\t{std.b[w]:.6f}\n")
    return buf.getvalue()
