"""Adaptive forced-choice staircase for latency detection thresholds.

One session is a sequence of binary trials at a simulated latency: a correct
answer lowers the latency by the current step, a wrong one raises it by three
steps. Whenever correctness flips between consecutive trials (a reversal) the
step halves, down to a floor; ten reversals end the session and the threshold
estimate is the mean of the reversal latencies.

Synthetic observers answer through a logistic psychometric function, standing
in for human subjects so the protocol itself can be validated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RUNNING = "running"
DONE = "done"
MAX_TRIALS = "max_trials"

REVERSAL_TARGET = 10


@dataclass
class StaircaseState:
    latency_ms: float
    step_ms: float
    min_step_ms: float
    max_trials: int = 500
    trial: int = 0
    reversals: int = 0
    last_correct: bool | None = None
    reversal_latencies: list = field(default_factory=list)
    status: str = RUNNING

    def __post_init__(self):
        if self.min_step_ms <= 0 or self.step_ms < self.min_step_ms:
            raise ValueError("need base step >= min step > 0")
        if self.latency_ms < 0:
            raise ValueError("latency must be >= 0")


def staircase_step(state: StaircaseState, correct: bool) -> StaircaseState:
    """Advance one trial (in place): move latency, then handle a reversal.

    The latency recorded for a reversal is the one presented on that trial.
    """
    if state.status != RUNNING:
        raise RuntimeError(f"staircase already finished ({state.status})")
    presented = state.latency_ms
    if correct:
        state.latency_ms = max(0.0, state.latency_ms - state.step_ms)
    else:
        state.latency_ms = state.latency_ms + 3.0 * state.step_ms
    if state.last_correct is not None and correct != state.last_correct:
        state.reversals += 1
        state.reversal_latencies.append(presented)
        state.step_ms = max(state.step_ms / 2.0, state.min_step_ms)
    state.last_correct = correct
    state.trial += 1
    if state.reversals >= REVERSAL_TARGET:
        state.status = DONE
    elif state.trial >= state.max_trials:
        state.status = MAX_TRIALS
    return state


@dataclass(frozen=True)
class ObserverModel:
    """P(correct | latency) = 0.5 + (0.5 - lapse) * logistic((latency - threshold)/slope)."""

    threshold_ms: float
    slope_ms: float = 1.0
    lapse: float = 0.02
    seed: int = 0

    def p_correct(self, latency_ms: float) -> float:
        z = (latency_ms - self.threshold_ms) / self.slope_ms
        return 0.5 + (0.5 - self.lapse) / (1.0 + np.exp(-z))


@dataclass
class TrialRecord:
    trial: int
    latency_ms: float
    correct: bool
    step_ms: float     # step in effect after the trial
    reversal: bool


@dataclass
class SessionResult:
    jnd_ms: float
    status: str
    trials: list
    final_latency_ms: float
    reversal_latencies: list

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("trial,latency_ms,correct,step_ms,reversal\n")
            for tr in self.trials:
                fh.write(
                    "%d,%.17g,%d,%.17g,%d\n"
                    % (tr.trial, tr.latency_ms, int(tr.correct), tr.step_ms, int(tr.reversal))
                )

    def summary_text(self) -> str:
        return (
            "{\n"
            f'  "jnd_ms": {self.jnd_ms:.6g},\n'
            f'  "status": "{self.status}",\n'
            f'  "trials": {len(self.trials)},\n'
            f'  "reversals": {len(self.reversal_latencies)},\n'
            f'  "final_latency_ms": {self.final_latency_ms:.6g}\n'
            "}"
        )


def run_session(
    observer: ObserverModel,
    start_latency_ms: float = 20.0,
    base_step_ms: float = 2.0,
    min_step_ms: float = 0.25,
    max_trials: int = 500,
    rng: np.random.Generator | None = None,
) -> SessionResult:
    """One full staircase session against a synthetic observer.

    Deterministic given the observer seed (or an explicit rng). The threshold
    estimate is the mean of the ten reversal latencies; if the trial budget
    runs out first, whatever reversals exist are averaged and the status says
    so.
    """
    if start_latency_ms < 0 or base_step_ms <= 0 or min_step_ms <= 0 or max_trials <= 0:
        raise ValueError("staircase parameters must be positive")
    if min_step_ms > base_step_ms:
        raise ValueError("min step cannot exceed the base step")
    rng = rng or np.random.default_rng(observer.seed)
    state = StaircaseState(start_latency_ms, base_step_ms, min_step_ms, max_trials)
    records: list[TrialRecord] = []
    while state.status == RUNNING:
        presented = state.latency_ms
        before = state.reversals
        correct = bool(rng.random() < observer.p_correct(presented))
        staircase_step(state, correct)
        records.append(
            TrialRecord(state.trial, presented, correct, state.step_ms, state.reversals > before)
        )
    revs = list(state.reversal_latencies)
    jnd = float(np.mean(revs)) if revs else float(state.latency_ms)
    return SessionResult(jnd, state.status, records, float(state.latency_ms), revs)
