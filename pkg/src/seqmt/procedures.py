"""Sequential stepdown and stepup multiple-testing procedures.

All four procedures share one staged loop. Active streams are sampled in
lockstep until a standardized statistic leaves its continuation region; the
stage's rejections and acceptances are then read off the ordered active
statistics (:func:`stage_decide`), and sampling resumes on the streams still
active.

=====================  ===========================================  =====================
procedure              continuation region at stage ``i``           decisions
=====================  ===========================================  =====================
stepdown               ``(a[c+1], b[r+1])`` for every stream        stepdown chains
stepup                 ``(a[c+l], b[r+K-l+1])`` for rank ``l``       largest passing rank
rejective stepdown     ``(-inf, b[r+1])``, truncated at ``N``        stepdown rejections
rejective stepup       ``(-inf, b[r+K-l+1])``, truncated at ``N``    stepup rejections
=====================  ===========================================  =====================

Indices are 1-based above; ``K`` is the number of active streams.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional

import numpy as np

from .critical_values import StandardizedLadder
from .statistics import StreamStatistic

__all__ = [
    "Mode",
    "Verdict",
    "ProcedureConfig",
    "DecisionRecord",
    "StageOutcome",
    "ProcedureState",
    "SourceExhausted",
    "ArraySource",
    "stage_decide",
    "run_procedure",
    "run_stepdown",
    "run_stepup",
    "run_rejective_stepdown",
    "run_rejective_stepup",
    "decisions_to_csv",
]

DEFAULT_GUARD = 1_000_000


class Mode(str, Enum):
    STEPDOWN = "stepdown"
    STEPUP = "stepup"


class Verdict(str, Enum):
    REJECTED = "Rejected"
    ACCEPTED = "Accepted"


class SourceExhausted(RuntimeError):
    """The observation source ran out while hypotheses were still active."""


@dataclass(frozen=True)
class ProcedureConfig:
    """How a sequential procedure stops and decides.

    Attributes:
        mode: Stepdown or stepup.
        ladder: Standardized boundaries; ``ladder.a`` may be ``None`` only for
            rejective procedures.
        rejective: Stop early only to reject; accept whatever is left at ``horizon``.
        horizon: Truncation point for rejective procedures.
        max_stage_guard: Largest sample size a non-truncated run may reach
            before it is abandoned with status ``"guard"``.
        tie_seed: Seed for the random tie-breaking of equal statistics.
        trace: Keep a per-stage trace in the returned state.
    """

    mode: Mode
    ladder: StandardizedLadder
    rejective: bool = False
    horizon: Optional[int] = None
    max_stage_guard: int = DEFAULT_GUARD
    tie_seed: Optional[int] = None
    trace: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.rejective:
            if self.horizon is None or self.horizon < 1:
                raise ValueError("rejective procedures need a finite horizon >= 1")
        else:
            if self.ladder.a is None:
                raise ValueError("non-rejective procedures need lower boundaries a")
            if self.horizon is not None:
                raise ValueError("horizon applies only to rejective procedures")
        if self.max_stage_guard < 1:
            raise ValueError("max_stage_guard must be positive")


@dataclass(frozen=True)
class DecisionRecord:
    stream: int
    verdict: Verdict
    stage: int
    sample_size: int
    statistic_value: float
    standardized_value: float


@dataclass(frozen=True)
class StageOutcome:
    """Result of one decision step.

    ``order`` lists the active stream ids from smallest to largest
    standardized statistic; ``rejected`` are the last ``m`` of them and
    ``accepted`` the first ``m_prime``.
    """

    m: int
    m_prime: int
    order: np.ndarray

    @property
    def rejected(self) -> np.ndarray:
        return self.order[len(self.order) - self.m :] if self.m else self.order[:0]

    @property
    def accepted(self) -> np.ndarray:
        return self.order[: self.m_prime]


@dataclass
class ProcedureState:
    """Everything a finished (or abandoned) run leaves behind.

    ``verdicts`` holds +1 for rejected, -1 for accepted and 0 for undecided
    streams; ``sample_sizes`` the sample size at which each stream stopped.
    """

    J: int
    stage: int = 0
    n: int = 0
    rejected_count: int = 0
    accepted_count: int = 0
    status: str = "running"
    tie_seed: Optional[int] = None
    verdicts: np.ndarray = None
    stages: np.ndarray = None
    sample_sizes: np.ndarray = None
    values: np.ndarray = None
    std_values: np.ndarray = None
    trace: Optional[list] = None

    def __post_init__(self):
        J = self.J
        self.verdicts = np.zeros(J, dtype=np.int8)
        self.stages = np.zeros(J, dtype=np.int64)
        self.sample_sizes = np.zeros(J, dtype=np.int64)
        self.values = np.full(J, np.nan)
        self.std_values = np.full(J, np.nan)

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.verdicts == 0)

    @property
    def rejected(self) -> np.ndarray:
        return np.flatnonzero(self.verdicts > 0)

    @property
    def accepted(self) -> np.ndarray:
        return np.flatnonzero(self.verdicts < 0)

    @property
    def decisions(self) -> List[DecisionRecord]:
        """Decision log ordered by stage, then stream."""
        done = np.flatnonzero(self.verdicts != 0)
        done = done[np.lexsort((done, self.stages[done]))]
        return [
            DecisionRecord(
                int(j),
                Verdict.REJECTED if self.verdicts[j] > 0 else Verdict.ACCEPTED,
                int(self.stages[j]),
                int(self.sample_sizes[j]),
                float(self.values[j]),
                float(self.std_values[j]),
            )
            for j in done
        ]

    @property
    def average_sample_size(self) -> float:
        return float(self.sample_sizes.mean())


class ArraySource:
    """Observation source backed by recorded data.

    ``data`` is either a 2-d array (rows are times, columns streams) or a list
    of per-stream sequences of possibly different lengths; missing entries are
    NaN and must never be needed by an active stream.
    """

    padded = True

    def __init__(self, data):
        if isinstance(data, np.ndarray) and data.ndim == 2:
            rows = data.astype(float)
        else:
            streams = [np.asarray(s, dtype=float) for s in data]
            if not streams:
                raise ValueError("no streams given")
            T = max(len(s) for s in streams)
            rows = np.full((T, len(streams)), np.nan)
            for j, s in enumerate(streams):
                rows[: len(s), j] = s
        if rows.shape[1] == 0:
            raise ValueError("no streams given")
        self.rows = rows
        self.pos = 0

    @property
    def J(self) -> int:
        return self.rows.shape[1]

    def draw(self, k: int) -> np.ndarray:
        out = self.rows[self.pos : self.pos + k]
        self.pos += len(out)
        return out


class _Paths:
    """Lazily extended statistic paths for all streams (rows are n = 1, 2, ...)."""

    def __init__(self, source, statistic: StreamStatistic, ladder: StandardizedLadder, J: int):
        self.source = source
        self.statistic = statistic
        self.ladder = ladder
        self.state = statistic.initial_state(J)
        cap = 64
        self.obs = np.empty((cap, J))
        self.raw = np.empty((cap, J))
        self.std = np.empty((cap, J))
        self.ready = 0
        self.check_gaps = getattr(source, "padded", False)

    def ensure(self, n: int) -> int:
        """Make rows up to sample size ``n`` available; returns how many are."""
        while self.ready < n:
            block = np.asarray(self.source.draw(max(n - self.ready, 16)), dtype=float)
            if block.ndim != 2 or len(block) == 0:
                break
            values, self.state = self.statistic.advance(self.state, self.ready, block)
            k = len(block)
            if self.ready + k > len(self.raw):
                cap = max(2 * len(self.raw), self.ready + k)
                for name in ("obs", "raw", "std"):
                    arr = getattr(self, name)
                    new = np.empty((cap, arr.shape[1]))
                    new[: self.ready] = arr[: self.ready]
                    setattr(self, name, new)
            sl = slice(self.ready, self.ready + k)
            self.obs[sl] = block
            self.raw[sl] = values
            self.std[sl] = self.ladder.apply(values)
            self.ready += k
        return min(self.ready, n)

    def check(self, start: int, stop: int, active: np.ndarray) -> None:
        if self.check_gaps and not np.isfinite(self.obs[start:stop, active]).all():
            raise ValueError("missing observation for an active stream")


def _order(values: np.ndarray, ids: np.ndarray, rng) -> np.ndarray:
    if rng is None:
        idx = np.argsort(values, kind="stable")
    else:
        idx = np.lexsort((rng.random(len(values)), values))
    return ids[idx]


def _leading_true(mask: np.ndarray) -> int:
    if mask.all():
        return len(mask)
    return int(np.argmin(mask))


def _last_true(mask: np.ndarray) -> int:
    hits = np.flatnonzero(mask)
    return int(hits[-1]) + 1 if len(hits) else 0


def stage_decide(values, ids, r: int, c: int, a, b, mode, rng=None, rejective: bool = False) -> StageOutcome:
    """Rejections and acceptances at the end of a stage.

    Args:
        values: Standardized statistics of the active streams.
        ids: Their stream ids.
        r, c: Numbers rejected / accepted in earlier stages.
        a, b: Full standardized ladders (length ``J``); ``a`` unused if rejective.
        mode: ``"stepdown"`` or ``"stepup"``.
        rng: Generator for random tie-breaking; ``None`` keeps input order on ties.
        rejective: Skip the acceptance step.

    Raises:
        ValueError: if no statistic is outside its continuation region.
        RuntimeError: if a stream would be both rejected and accepted.
    """
    values = np.asarray(values, dtype=float)
    ids = np.asarray(ids)
    K = len(values)
    mode = Mode(mode)
    order = _order(values, ids, rng)
    s = np.sort(values)
    desc = s[::-1]
    b_seg = np.asarray(b, dtype=float)[r : r + K]
    if mode is Mode.STEPDOWN:
        m = _leading_true(desc >= b_seg) if desc[0] >= b_seg[0] else 0
    else:
        m = _last_true(desc >= b_seg)
    mp = 0
    if not rejective:
        a_seg = np.asarray(a, dtype=float)[c : c + K]
        if mode is Mode.STEPDOWN:
            mp = _leading_true(s <= a_seg) if s[0] <= a_seg[0] else 0
        else:
            mp = _last_true(s <= a_seg)
    if m == 0 and mp == 0:
        raise ValueError("no statistic is outside its continuation region")
    if m + mp > K:
        raise RuntimeError("rejection and acceptance sets overlap")
    return StageOutcome(m, mp, order)


def _crossed(block, mode, rejective, lo, hi, lo_vec, hi_vec):
    """Row mask: some active statistic leaves the continuation region."""
    if mode is Mode.STEPDOWN:
        hit = block >= hi
        if not rejective:
            hit |= block <= lo
    else:
        srt = np.sort(block, axis=1)
        hit = srt >= hi_vec
        if not rejective:
            hit |= srt <= lo_vec
    return hit.any(axis=1)


def run_procedure(source, statistic: StreamStatistic, config: ProcedureConfig, J: Optional[int] = None) -> ProcedureState:
    """Run one sequential procedure to completion.

    Args:
        source: Object with ``draw(k)`` returning up to ``k`` rows of
            observations (shape ``(rows, J)``); an empty result means exhausted.
        statistic: Turns observation rows into statistic paths.
        config: Procedure definition.
        J: Number of streams; read from ``source.J`` when omitted.

    Returns:
        The final :class:`ProcedureState`; ``status`` is ``"complete"`` or
        ``"guard"`` (guard tripped before every hypothesis was decided).

    Raises:
        SourceExhausted: if observations run out while streams are active.
    """
    J = J if J is not None else source.J
    ladder = config.ladder
    if ladder.J != J:
        raise ValueError(f"ladder has {ladder.J} levels but there are {J} streams")
    mode = config.mode
    rej = config.rejective
    a, b = ladder.a, ladder.b
    rng = np.random.default_rng(config.tie_seed) if config.tie_seed is not None else None
    paths = _Paths(source, statistic, ladder, J)
    state = ProcedureState(J, tie_seed=config.tie_seed)
    if config.trace:
        state.trace = []
    limit = config.horizon if rej else config.max_stage_guard
    active = np.arange(J)
    n, r, c, stage = 0, 0, 0, 0

    while len(active):
        stage += 1
        K = len(active)
        if r + c + K != J:
            raise AssertionError("conservation r + c + |active| = J violated")
        # boundaries are fixed before the stage begins
        lo = None if rej else a[c]
        hi = b[r]
        lo_vec = None if rej else a[c : c + K]
        hi_vec = b[r : r + K][::-1]
        start = n
        step = 8
        n_stop = None
        while n < limit:
            want = min(n + step, limit)
            got = paths.ensure(want)
            if got <= n:
                raise SourceExhausted(f"observations ran out at n={n} with {K} active streams")
            block = paths.std[n:got, active]
            hit = _crossed(block, mode, rej, lo, hi, lo_vec, hi_vec)
            if hit.any():
                n_stop = n + int(np.argmax(hit)) + 1
                break
            n = got
            step = min(2 * step, 256)
        if n_stop is None:
            n = limit
            paths.check(start, n, active)
            if rej:
                _record(state, paths, active, -1, stage, n)
                if state.trace is not None:
                    state.trace.append(dict(stage=stage, n=n, r=r, c=c, b=float(hi), m=0, m_prime=len(active)))
                break
            state.status = "guard"
            state.stage, state.n = stage, n
            state.rejected_count, state.accepted_count = r, c
            return state
        n = n_stop
        paths.check(start, n, active)
        vals = paths.std[n - 1, active]
        out = stage_decide(vals, active, r, c, a, b, mode, rng, rejective=rej)
        if state.trace is not None:
            state.trace.append(
                dict(
                    stage=stage, n=n, r=r, c=c,
                    a=None if rej else float(lo), b=float(hi),
                    order=[int(j) for j in out.order],
                    values=[float(v) for v in np.sort(vals)],
                    m=out.m, m_prime=out.m_prime,
                )
            )
        _record(state, paths, out.rejected, +1, stage, n)
        _record(state, paths, out.accepted, -1, stage, n)
        r += out.m
        c += out.m_prime
        active = state.active
        if rej and n >= limit and len(active):
            # truncation reached on a stage that also rejected
            _record(state, paths, active, -1, stage, n)
            c += len(active)
            break

    state.stage, state.n = stage, n
    state.rejected_count = int((state.verdicts > 0).sum())
    state.accepted_count = int((state.verdicts < 0).sum())
    state.status = "complete"
    return state


def _record(state, paths, streams, verdict, stage, n):
    if len(streams) == 0:
        return
    state.verdicts[streams] = verdict
    state.stages[streams] = stage
    state.sample_sizes[streams] = n
    state.values[streams] = paths.raw[n - 1, streams]
    state.std_values[streams] = paths.std[n - 1, streams]


def _run(mode, rejective, source, config, statistic, J=None):
    if config.mode is not Mode(mode) or config.rejective != rejective:
        kind = ("rejective " if rejective else "") + Mode(mode).value
        raise ValueError(f"config does not describe a {kind} procedure")
    return run_procedure(source, statistic, config, J)


def run_stepdown(source, config: ProcedureConfig, statistic: StreamStatistic, J=None) -> ProcedureState:
    """Generic sequential stepdown procedure (type I and II control)."""
    return _run(Mode.STEPDOWN, False, source, config, statistic, J)


def run_stepup(source, config: ProcedureConfig, statistic: StreamStatistic, J=None) -> ProcedureState:
    """Generic sequential stepup procedure (type I and II control)."""
    return _run(Mode.STEPUP, False, source, config, statistic, J)


def run_rejective_stepdown(source, config: ProcedureConfig, statistic: StreamStatistic, J=None) -> ProcedureState:
    """Rejective stepdown: stops early only to reject; accepts the rest at the horizon."""
    return _run(Mode.STEPDOWN, True, source, config, statistic, J)


def run_rejective_stepup(source, config: ProcedureConfig, statistic: StreamStatistic, J=None) -> ProcedureState:
    """Rejective stepup counterpart of :func:`run_rejective_stepdown`."""
    return _run(Mode.STEPUP, True, source, config, statistic, J)


DECISION_FIELDS = ["replicate_id", "stream", "verdict", "stage", "sample_size", "statistic_value"]


def decisions_to_csv(states: Iterable[tuple], out=None) -> str:
    """Write decision logs as CSV.

    ``states`` yields ``(replicate_id, ProcedureState)`` pairs. Streams are
    numbered from 1 in the output.
    """
    buf = out if out is not None else io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DECISION_FIELDS)
    for rep, st in states:
        for d in st.decisions:
            w.writerow([rep, d.stream + 1, d.verdict.value, d.stage, d.sample_size, repr(d.statistic_value)])
    return buf.getvalue() if out is None else ""
