"""Step values for sequential stepdown and stepup procedures.

Step values are the nondecreasing sequences ``alpha_1 <= ... <= alpha_J``
(type I) and ``beta_1 <= ... <= beta_J`` (type II) that drive the rejection
and acceptance thresholds of the procedures in :mod:`seqmt.procedures`.

Four families are provided:

* stepdown, gamma-FDP / gamma-FNP control (normalized by :func:`d1`)
* stepdown, k-FWER control (closed form)
* stepup, gamma-FDP / gamma-FNP control (normalized by :func:`d2`)
* stepup, k-FWER control (normalized by :func:`d3`)

All normalizers are computed by exhaustive scan over ``v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "LadderKind",
    "StepValueLadder",
    "safe_floor",
    "safe_ceil",
    "validate_delta",
    "delta_holm_fdp",
    "delta_kfwe",
    "delta_linear",
    "jbar",
    "tbar",
    "s1",
    "s2",
    "s3",
    "d1",
    "d2",
    "d3",
    "stepdown_fdp_values",
    "stepdown_kfwe_values",
    "stepup_fdp_values",
    "stepup_kfwe_values",
]

_REL_TOL = 1e-9


def safe_floor(x: float) -> int:
    """Floor that treats values within 1e-9 (relative) of an integer as that integer.

    ``0.29 * 100`` evaluates to ``28.999999999999996`` in binary floating point;
    the intended value is 29 and so is the returned floor.
    """
    k = round(x)
    if abs(x - k) <= _REL_TOL * max(1.0, abs(x)):
        return int(k)
    return math.floor(x)


def safe_ceil(x: float) -> int:
    """Ceiling counterpart of :func:`safe_floor`."""
    k = round(x)
    if abs(x - k) <= _REL_TOL * max(1.0, abs(x)):
        return int(k)
    return math.ceil(x)


class LadderKind(str, Enum):
    STEPDOWN_FDP = "StepdownFDP"
    STEPDOWN_KFWE = "StepdownKFWE"
    STEPUP_FDP = "StepupFDP"
    STEPUP_KFWE = "StepupKFWE"

    @property
    def is_stepup(self) -> bool:
        return self in (LadderKind.STEPUP_FDP, LadderKind.STEPUP_KFWE)

    @property
    def is_fdp(self) -> bool:
        return self in (LadderKind.STEPDOWN_FDP, LadderKind.STEPUP_FDP)


@dataclass(frozen=True)
class StepValueLadder:
    """Type I (and optionally type II) step values for ``J`` hypotheses.

    Attributes:
        alphas: Nondecreasing type I step values in [0, 1].
        betas: Nondecreasing type II step values in [0, 1], or ``None`` for
            procedures that only control the type I rate.
        kind: Which family produced the values.
        params: The generating parameters (alpha, beta, gamma1, ... as applicable).
    """

    alphas: np.ndarray
    betas: Optional[np.ndarray]
    kind: LadderKind
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        alphas = np.asarray(self.alphas, dtype=float)
        _check_monotone_unit(alphas, "alphas")
        object.__setattr__(self, "alphas", alphas)
        if self.betas is not None:
            betas = np.asarray(self.betas, dtype=float)
            _check_monotone_unit(betas, "betas")
            if betas.shape != alphas.shape:
                raise ValueError("alphas and betas must have the same length")
            object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "kind", LadderKind(self.kind))

    @property
    def J(self) -> int:
        return len(self.alphas)


def _check_monotone_unit(x: np.ndarray, name: str) -> None:
    if x.ndim != 1 or len(x) == 0:
        raise ValueError(f"{name} must be a nonempty 1-d sequence")
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError(f"{name} must lie in [0, 1]")
    if np.any(np.diff(x) < 0):
        raise ValueError(f"{name} must be nondecreasing")


def validate_delta(delta: Sequence[float]) -> np.ndarray:
    """Return ``delta`` as a float array after checking it is a valid sequence.

    A valid sequence is nonempty, nondecreasing, inside [0, 1] and not
    identically zero (an all-zero sequence cannot be normalized).
    """
    d = np.asarray(delta, dtype=float)
    _check_monotone_unit(d, "delta")
    if d[-1] <= 0:
        raise ValueError("delta must not be identically zero")
    return d


def _check_gamma(gamma: float) -> None:
    if not 0 <= gamma < 1:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")


def _check_J(J: int) -> None:
    if int(J) != J or J < 1:
        raise ValueError(f"J must be a positive integer, got {J}")


def delta_holm_fdp(J: int, gamma: float) -> np.ndarray:
    """``delta_j = (floor(gamma j) + 1) / (J + floor(gamma j) + 1 - j)``."""
    _check_J(J)
    _check_gamma(gamma)
    out = np.empty(J)
    for j in range(1, J + 1):
        f = safe_floor(gamma * j)
        out[j - 1] = (f + 1) / (J + f + 1 - j)
    return out


def delta_kfwe(J: int, k: int) -> np.ndarray:
    """``delta_j = k / (J - (j - k)^+)``."""
    _check_J(J)
    if int(k) != k or not 1 <= k <= J:
        raise ValueError(f"k must be an integer in [1, J], got {k}")
    j = np.arange(1, J + 1)
    return k / (J - np.maximum(j - k, 0))


def delta_linear(J: int) -> np.ndarray:
    """``delta_j = j / J``."""
    _check_J(J)
    return np.arange(1, J + 1) / J


def _n_levels(gamma: float, J: int) -> int:
    return safe_floor(gamma * J) + 1


def jbar(t: int, v: int, gamma: float, J: int) -> int:
    """``min{J, J + t - v, ceil(t / gamma) - 1}``; the last term is dropped when gamma is 0."""
    if not 1 <= t <= _n_levels(gamma, J):
        raise ValueError(f"t={t} outside [1, floor(gamma J) + 1]")
    if not 0 <= v <= J:
        raise ValueError(f"v={v} outside [0, J]")
    out = min(J, J + t - v)
    if gamma > 0:
        out = min(out, safe_ceil(t / gamma) - 1)
    return out


def tbar(v: int, gamma: float, J: int) -> int:
    """``min{floor(gamma J) + 1, v, floor(gamma (J - v) / (1 - gamma)) + 1}``."""
    _check_gamma(gamma)
    return min(_n_levels(gamma, J), v, safe_floor(gamma * (J - v) / (1 - gamma)) + 1)


def s1(v: int, gamma: float, delta: np.ndarray) -> float:
    J = len(delta)
    total = 0.0
    prev = 0.0
    for t in range(1, tbar(v, gamma, J) + 1):
        eps = delta[jbar(t, v, gamma, J) - 1]
        total += (eps - prev) / t
        prev = eps
    return v * total


def d1(gamma: float, delta: Sequence[float]) -> float:
    """Normalizer for stepdown gamma-FDP step values: ``max_{0<=v<=J} S1(v)``."""
    _check_gamma(gamma)
    d = validate_delta(delta)
    return max(s1(v, gamma, d) for v in range(0, len(d) + 1))


def s2(v: int, gamma: float, delta: np.ndarray) -> float:
    J = len(delta)
    # j = J - v + s runs over 2..J; the extra condition keeps only v >= floor(gamma j) + 1
    j = np.arange(2, J + 1)
    s = j - J + v
    lev = np.array([safe_floor(gamma * jj) for jj in j], dtype=float) + 1
    keep = v >= lev
    terms = (delta[j - 1] - delta[j - 2]) / np.maximum(s, lev)
    return v * delta[0] + v * float(np.sum(terms[keep]))


def d2(gamma: float, delta: Sequence[float]) -> float:
    """Normalizer for stepup gamma-FDP step values: ``max_{1<=v<=J} S2(v)``."""
    _check_gamma(gamma)
    d = validate_delta(delta)
    J = len(d)
    # S2(v) = v * (delta_1 + sum over j of diff_j / max(j - J + v, lev_j) * [v >= lev_j])
    j = np.arange(2, J + 1)
    lev = np.array([safe_floor(gamma * jj) for jj in j], dtype=float) + 1
    diff = d[j - 1] - d[j - 2]
    best = -np.inf
    for v in range(1, J + 1):
        keep = v >= lev
        inner = np.sum(diff[keep] / np.maximum(j[keep] - J + v, lev[keep]))
        best = max(best, v * (d[0] + inner))
    return float(best)


def s3(v: int, k: int, delta: np.ndarray) -> float:
    J = len(delta)
    s = np.arange(k + 1, v + 1)
    terms = (delta[J - v + s - 1] - delta[J - v + s - 2]) / s
    return v * delta[J - v + k - 1] / k + v * float(np.sum(terms))


def d3(k: int, delta: Sequence[float]) -> float:
    """Normalizer for stepup k-FWER step values: ``max_{k<=v<=J} S3(v, k)``."""
    d = validate_delta(delta)
    J = len(d)
    if int(k) != k or not 1 <= k <= J:
        raise ValueError(f"k must be an integer in [1, J], got {k}")
    return max(s3(v, k, d) for v in range(k, J + 1))


def _check_prob(p: float, name: str) -> None:
    if not 0 < p < 1:
        raise ValueError(f"{name} must lie in (0, 1), got {p}")


def stepdown_fdp_values(alpha, beta, gamma1, gamma2, delta=None, eta=None, J=None) -> StepValueLadder:
    """Stepdown step values controlling gamma1-FDP <= alpha and gamma2-FNP <= beta.

    ``alpha_j = alpha delta_j / D1(gamma1, delta)`` and likewise for the betas
    with ``eta``. ``delta`` / ``eta`` may be ``None`` to use
    :func:`delta_holm_fdp` (then ``J`` is required); the type II side is
    skipped when ``beta`` is ``None``.
    """
    return _fdp_values(alpha, beta, gamma1, gamma2, delta, eta, d1, LadderKind.STEPDOWN_FDP, J)


def stepup_fdp_values(alpha, beta, gamma1, gamma2, delta=None, eta=None, J=None) -> StepValueLadder:
    """Stepup step values controlling gamma1-FDP and gamma2-FNP; normalized by :func:`d2`."""
    return _fdp_values(alpha, beta, gamma1, gamma2, delta, eta, d2, LadderKind.STEPUP_FDP, J)


def _resolve_J(J, *seqs):
    for s in seqs:
        if s is not None:
            return len(s)
    if J is None:
        raise ValueError("J is required when no delta/eta sequence is given")
    return J


def _fdp_values(alpha, beta, gamma1, gamma2, delta, eta, norm, kind, J=None):
    _check_prob(alpha, "alpha")
    _check_gamma(gamma1)
    J = _resolve_J(J, delta, eta)
    delta = validate_delta(delta if delta is not None else delta_holm_fdp(J, gamma1))
    alphas = alpha * delta / norm(gamma1, delta)
    betas = None
    if beta is not None:
        _check_prob(beta, "beta")
        _check_gamma(gamma2)
        eta = validate_delta(eta if eta is not None else delta_holm_fdp(len(delta), gamma2))
        if len(eta) != len(delta):
            raise ValueError("delta and eta must have the same length")
        betas = beta * eta / norm(gamma2, eta)
    params = dict(alpha=alpha, beta=beta, gamma1=gamma1, gamma2=gamma2, J=len(delta))
    return StepValueLadder(np.minimum(alphas, 1.0), _clip(betas), kind, params)


def _clip(x):
    return None if x is None else np.minimum(x, 1.0)


def stepdown_kfwe_values(alpha, beta, k1, k2, J) -> StepValueLadder:
    """``alpha_j = k1 alpha / (J - (j - k1)^+)``; betas analogous with ``k2`` and ``beta``."""
    _check_prob(alpha, "alpha")
    alphas = alpha * delta_kfwe(J, k1)
    betas = None
    if beta is not None:
        _check_prob(beta, "beta")
        betas = beta * delta_kfwe(J, k2)
    params = dict(alpha=alpha, beta=beta, k1=k1, k2=k2, J=J)
    return StepValueLadder(alphas, betas, LadderKind.STEPDOWN_KFWE, params)


def stepup_kfwe_values(alpha, beta, k1, k2, delta=None, eta=None, J=None) -> StepValueLadder:
    """``alpha_j = alpha delta_j / D3(k1, delta)``; ``delta`` defaults to :func:`delta_kfwe`."""
    _check_prob(alpha, "alpha")
    J = _resolve_J(J, delta, eta)
    delta = validate_delta(delta if delta is not None else delta_kfwe(J, k1))
    alphas = alpha * delta / d3(k1, delta)
    betas = None
    if beta is not None:
        _check_prob(beta, "beta")
        eta = validate_delta(eta if eta is not None else delta_kfwe(len(delta), k2))
        if len(eta) != len(delta):
            raise ValueError("delta and eta must have the same length")
        betas = beta * eta / d3(k2, eta)
    params = dict(alpha=alpha, beta=beta, k1=k1, k2=k2, J=len(delta))
    return StepValueLadder(np.minimum(alphas, 1.0), _clip(betas), LadderKind.STEPUP_KFWE, params)
