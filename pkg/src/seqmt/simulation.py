"""Correlated Gaussian streams, error accounting and the Monte Carlo driver.

Streams follow the equicorrelated model
``X_n = theta + sigma * (sqrt(c) Z0 + sqrt(1 - c) Z)`` with a shared factor
``Z0`` per time step and independent rows over time.

Example:

    >>> from seqmt.simulation import ErrorSpec, ScenarioConfig, build_procedure, monte_carlo
    >>> sc = ScenarioConfig(J=10, true_null_count=5, reps=50, seed=1,
    ...                     error=ErrorSpec("kfwe", k1=1, k2=1))
    >>> cfg, stat = build_procedure(sc, "stepdown")
    >>> rep = monte_carlo(sc, cfg, stat)
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .critical_values import (
    DEFAULT_RHO,
    StandardizedLadder,
    glr_t_calibrate,
    rejective_ladder,
    sprt_ladder,
)
from .procedures import Mode, ProcedureConfig, ProcedureState, run_procedure
from .statistics import GaussianLLRStatistic, TGlrStatistic
from .step_values import (
    StepValueLadder,
    stepdown_fdp_values,
    stepdown_kfwe_values,
    stepup_fdp_values,
    stepup_kfwe_values,
)

__all__ = [
    "gen_correlated_row",
    "EquicorrelatedSource",
    "fdp_fnp",
    "kfwe_indicators",
    "ErrorSpec",
    "ScenarioConfig",
    "build_procedure",
    "ReplicateResult",
    "SimulationReport",
    "monte_carlo",
    "savings",
    "report_rows_csv",
    "format_report",
]


def _check_corr(c: float) -> None:
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"correlation must lie in [0, 1], got {c}")


def gen_correlated_row(J: int, theta, sigma: float, c: float, rng: np.random.Generator) -> np.ndarray:
    """One draw from ``N(theta, sigma**2 ((1 - c) I + c 11'))`` via a shared factor."""
    _check_corr(c)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (J,))
    z0 = rng.standard_normal()
    z = rng.standard_normal(J)
    return theta + sigma * (math.sqrt(c) * z0 + math.sqrt(1 - c) * z)


class EquicorrelatedSource:
    """Unlimited supply of independent equicorrelated rows (one rng per source)."""

    def __init__(self, theta, sigma: float, c: float, rng: np.random.Generator):
        _check_corr(c)
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.theta = np.asarray(theta, dtype=float)
        self.sigma = sigma
        self.sc = math.sqrt(c)
        self.si = math.sqrt(1 - c)
        self.rng = rng

    @property
    def J(self) -> int:
        return len(self.theta)

    def draw(self, k: int) -> np.ndarray:
        z0 = self.rng.standard_normal((k, 1))
        z = self.rng.standard_normal((k, self.J))
        return self.theta + self.sigma * (self.sc * z0 + self.si * z)


def _rejected_mask(decisions) -> np.ndarray:
    if isinstance(decisions, ProcedureState):
        return decisions.verdicts > 0
    return np.asarray(decisions, dtype=bool)


def fdp_fnp(decisions, truth) -> tuple[float, float]:
    """False discovery and false nondiscovery proportions.

    Args:
        decisions: A finished :class:`ProcedureState` or a boolean rejected mask.
        truth: Boolean mask of true nulls.

    Returns:
        ``(fdp, fnp)``, each 0 when its denominator is 0.
    """
    rej = _rejected_mask(decisions)
    truth = np.asarray(truth, dtype=bool)
    nr = int(rej.sum())
    na = len(rej) - nr
    fdp = (rej & truth).sum() / nr if nr else 0.0
    fnp = (~rej & ~truth).sum() / na if na else 0.0
    return float(fdp), float(fnp)


def kfwe_indicators(decisions, truth, k1: int, k2: int) -> tuple[bool, bool]:
    """``(#true nulls rejected >= k1, #false nulls accepted >= k2)``."""
    rej = _rejected_mask(decisions)
    truth = np.asarray(truth, dtype=bool)
    return bool((rej & truth).sum() >= k1), bool((~rej & ~truth).sum() >= k2)


@dataclass(frozen=True)
class ErrorSpec:
    """Which generalized error rates are controlled, and at what levels."""

    metric: str = "fdp"
    alpha: float = 0.05
    beta: float = 0.2
    gamma1: float = 0.1
    gamma2: float = 0.1
    k1: int = 1
    k2: int = 1

    def __post_init__(self):
        if self.metric not in ("fdp", "kfwe"):
            raise ValueError(f"metric must be 'fdp' or 'kfwe', got {self.metric!r}")
        if not (0 < self.alpha < 1 and 0 < self.beta < 1):
            raise ValueError("alpha and beta must lie in (0, 1)")

    def step_values(self, J: int, mode) -> StepValueLadder:
        up = Mode(mode) is Mode.STEPUP
        if self.metric == "fdp":
            fn = stepup_fdp_values if up else stepdown_fdp_values
            return fn(self.alpha, self.beta, self.gamma1, self.gamma2, J=J)
        if up:
            return stepup_kfwe_values(self.alpha, self.beta, self.k1, self.k2, J=J)
        return stepdown_kfwe_values(self.alpha, self.beta, self.k1, self.k2, J)

    def errors(self, rejected, truth) -> tuple[bool, bool, float, float]:
        """Type I and II indicators plus ``(fdp, fnp)`` for one ensemble."""
        fdp, fnp = fdp_fnp(rejected, truth)
        if self.metric == "fdp":
            return fdp > self.gamma1, fnp > self.gamma2, fdp, fnp
        t1, t2 = kfwe_indicators(rejected, truth, self.k1, self.k2)
        return t1, t2, fdp, fnp


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulated setting.

    The first ``true_null_count`` streams have mean ``theta0`` (true nulls),
    the rest ``theta1``. ``statistic`` is ``"gaussian"`` (known-sigma
    log-likelihood ratio) or ``"tglr"`` (unknown-variance GLR with alternative
    ``mu >= delta``). ``calibration`` holds options for the t-GLR Monte Carlo
    critical values: ``reps``, ``horizon``, ``mode``, ``seed``.
    """

    J: int = 500
    true_null_count: int = 100
    sigma: float = 2.0
    correlation: float = 0.95
    statistic: str = "gaussian"
    delta: float = 1.0
    theta0: float = 0.0
    theta1: float = 1.0
    rho: float = DEFAULT_RHO
    reps: int = 2000
    seed: int = 0
    error: ErrorSpec = field(default_factory=ErrorSpec)
    calibration: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if self.J < 1:
            raise ValueError("J must be positive")
        if not 0 <= self.true_null_count <= self.J:
            raise ValueError("true_null_count must lie in [0, J]")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        _check_corr(self.correlation)
        if self.statistic not in ("gaussian", "tglr"):
            raise ValueError(f"statistic must be 'gaussian' or 'tglr', got {self.statistic!r}")
        if self.reps < 1:
            raise ValueError("reps must be positive")
        if isinstance(self.error, dict):
            object.__setattr__(self, "error", ErrorSpec(**self.error))

    @property
    def truth(self) -> np.ndarray:
        t = np.zeros(self.J, dtype=bool)
        t[: self.true_null_count] = True
        return t

    @property
    def theta(self) -> np.ndarray:
        return np.where(self.truth, self.theta0, self.theta1)

    def to_dict(self) -> dict:
        return asdict(self)


_CAL_DEFAULTS = dict(reps=20000, horizon=400, mode="design", seed=12345)


def build_procedure(
    scenario: ScenarioConfig,
    mode,
    rejective: bool = False,
    horizon: Optional[int] = None,
    max_stage_guard: int = 100_000,
):
    """Step values, critical values and statistic for a scenario.

    Returns:
        ``(ProcedureConfig, StreamStatistic)``. Every stream shares one
        ladder, so the standardization is the identity.
    """
    mode = Mode(mode)
    J = scenario.J
    steps = scenario.error.step_values(J, mode)
    if scenario.statistic == "gaussian":
        stat = GaussianLLRStatistic(scenario.sigma, scenario.theta0, scenario.theta1)
        if rejective:
            ladder = StandardizedLadder(None, rejective_ladder(steps.alphas, horizon).B)
        else:
            ladder = StandardizedLadder.common(sprt_ladder(steps, scenario.rho))
    else:
        if rejective:
            raise ValueError("rejective t-GLR procedures are not supported")
        stat = TGlrStatistic(scenario.delta)
        cal = {**_CAL_DEFAULTS, **scenario.calibration}
        crit = glr_t_calibrate(
            scenario.delta, steps, cal["horizon"], cal["reps"], seed=cal["seed"],
            sigma=scenario.sigma, mode=cal["mode"],
        )
        ladder = StandardizedLadder.common(crit)
    cfg = ProcedureConfig(
        mode, ladder, rejective=rejective, horizon=horizon if rejective else None,
        max_stage_guard=max_stage_guard,
    )
    return cfg, stat


@dataclass(frozen=True)
class ReplicateResult:
    avg_n: float
    type1: bool
    type2: bool
    fdp: float
    fnp: float
    guard: bool


@dataclass
class SimulationReport:
    """Monte Carlo operating characteristics of one procedure in one scenario."""

    scenario: str
    procedure: str
    E_N: float
    SE: float
    typeI: float
    typeII: float
    reps: int
    guard_trips: int = 0
    savings: Optional[float] = None
    mean_fdp: float = float("nan")
    mean_fnp: float = float("nan")
    replicates: Optional[list] = None

    def row(self) -> dict:
        return dict(
            scenario=self.scenario, procedure=self.procedure, E_N=self.E_N, SE=self.SE,
            typeI=self.typeI, typeII=self.typeII, savings=self.savings,
        )


def _replicate(scenario: ScenarioConfig, cfg: ProcedureConfig, stat, seed_seq: np.random.SeedSequence) -> ReplicateResult:
    data_seq, tie_seq = seed_seq.spawn(2)
    src = EquicorrelatedSource(scenario.theta, scenario.sigma, scenario.correlation, np.random.default_rng(data_seq))
    tie = int(tie_seq.generate_state(1)[0])
    st = run_procedure(src, stat, replace(cfg, tie_seed=tie, trace=False), scenario.J)
    guard = st.status == "guard"
    if guard:
        st.sample_sizes[st.verdicts == 0] = st.n
    t1, t2, fdp, fnp = scenario.error.errors(st.verdicts > 0, scenario.truth)
    return ReplicateResult(st.average_sample_size, t1, t2, fdp, fnp, guard)


def _run_chunk(args):
    scenario, cfg, stat, seqs = args
    return [_replicate(scenario, cfg, stat, s) for s in seqs]


def monte_carlo(
    scenario: ScenarioConfig,
    config: ProcedureConfig,
    statistic,
    name: str = "",
    workers: int = 1,
    keep_replicates: bool = False,
) -> SimulationReport:
    """Estimate ``E N``, its SE and the achieved error rates.

    Replicate ``i`` draws from the ``i``-th child of ``SeedSequence(seed)``, so
    results do not depend on ``workers``. Replicates that trip the stage guard
    are kept (undecided streams count as accepted, with the guard sample size)
    and reported in ``guard_trips``.
    """
    reps = scenario.reps
    if reps < 2:
        raise ValueError("monte_carlo needs reps >= 2")
    seqs = np.random.SeedSequence(scenario.seed).spawn(reps)
    if workers <= 1:
        results = [_replicate(scenario, config, statistic, s) for s in seqs]
    else:
        size = max(1, math.ceil(reps / (4 * workers)))
        chunks = [(scenario, config, statistic, seqs[i : i + size]) for i in range(0, reps, size)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = [r for part in ex.map(_run_chunk, chunks) for r in part]
    n = np.array([r.avg_n for r in results])
    return SimulationReport(
        scenario=scenario.name,
        procedure=name or _proc_name(config),
        E_N=float(np.mean(n)),
        SE=float(np.std(n, ddof=1) / math.sqrt(reps)),
        typeI=float(np.mean([r.type1 for r in results])),
        typeII=float(np.mean([r.type2 for r in results])),
        reps=reps,
        guard_trips=sum(r.guard for r in results),
        mean_fdp=float(np.mean([r.fdp for r in results])),
        mean_fnp=float(np.mean([r.fnp for r in results])),
        replicates=results if keep_replicates else None,
    )


def _proc_name(cfg: ProcedureConfig) -> str:
    base = "Seq_D" if cfg.mode is Mode.STEPDOWN else "Seq_U"
    return base + ("_rej" if cfg.rejective else "")


def savings(seq_EN: float, fixed_N: float) -> float:
    """Percent reduction of the sequential ``E N`` relative to a fixed sample size."""
    if fixed_N <= 0:
        raise ValueError("fixed_N must be positive")
    return 100.0 * (1.0 - seq_EN / fixed_N)


REPORT_FIELDS = ["scenario", "procedure", "E_N", "SE", "typeI", "typeII", "savings"]


def _fmt(key, v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if key == "E_N":
        return f"{v:.0f}" if float(v).is_integer() else f"{v:.2f}"
    if key == "SE":
        return f"{v:.2f}"
    if key in ("typeI", "typeII"):
        return f"{v:.3f}"
    if key == "savings":
        return f"{v:.0f}%"
    return str(v)


def report_rows_csv(rows: Sequence[dict]) -> str:
    """CSV with columns ``scenario, procedure, E_N, SE, typeI, typeII, savings``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_FIELDS)
    for r in rows:
        w.writerow([_fmt(k, r.get(k)) for k in REPORT_FIELDS])
    return buf.getvalue()


def format_report(rows: Sequence[dict]) -> str:
    """Aligned plain-text table of report rows."""
    cells = [REPORT_FIELDS] + [[_fmt(k, r.get(k)) for k in REPORT_FIELDS] for r in rows]
    widths = [max(len(c[i]) for c in cells) for i in range(len(REPORT_FIELDS))]
    lines = ["  ".join(c.rjust(w) if i > 1 else c.ljust(w) for i, (c, w) in enumerate(zip(row, widths))) for row in cells]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(line.rstrip() for line in lines) + "\n"
