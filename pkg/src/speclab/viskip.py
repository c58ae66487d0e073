"""Vision-relevance gating of speculative decoding.

Each outer step estimates how strongly the current state attends to the
vision tokens. Steps above the threshold skip drafting and take one plain
target step; the rest run the wrapped drafter and verifier.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    CostModel,
    DomainError,
    SequenceState,
    StepMode,
    StepRecord,
    TokenSeq,
)
from .drafters.base import Drafter
from .model import TableTargetModel, attention_row
from .verify import GREEDY, VerifyMode, ar_step, verify


class RelevanceSource(str, enum.Enum):
    MODEL_ATTENTION = "model_attention"
    TRACE_PLAYBACK = "trace_playback"


@dataclass(frozen=True)
class GateConfig:
    """``K`` caps the draft length of gated runs; ``None`` keeps the drafter's own."""

    tau: float = 0.35
    K: Optional[int] = None
    relevance_source: RelevanceSource = RelevanceSource.MODEL_ATTENTION

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau <= 1.0:
            raise DomainError("tau must lie in [0, 1]")
        if self.K is not None and self.K < 1:
            raise DomainError("K must be positive")
        object.__setattr__(self, "relevance_source", RelevanceSource(self.relevance_source))


def relevance_score(att: np.ndarray, vision_span: tuple[int, int]) -> float:
    """Largest attention weight on any vision token, 0 without vision tokens."""
    start, end = vision_span
    if end <= start:
        return 0.0
    return float(np.max(att[start:end]))


def vision_indicator(score: float, tau: float) -> bool:
    return score > tau


class DecodeSession:
    """Step-at-a-time decoder for one sequence.

    With ``drafter=None`` it is the plain autoregressive reference decoder.
    ``gate=None`` runs the drafter ungated; relevance is still logged when
    ``log_relevance`` is set so acceptance can be analysed afterwards.
    Trace playback reads the relevance of step ``t`` from the trace, holding
    the last value once the trace runs out, and falls back to the model's
    attention when no trace is given.
    """

    def __init__(
        self,
        target: TableTargetModel,
        drafter: Optional[Drafter],
        state: SequenceState,
        mode: VerifyMode = GREEDY,
        rng: Optional[np.random.Generator] = None,
        max_new_tokens: int = 1024,
        gate: Optional[GateConfig] = None,
        relevance_trace: Optional[Sequence[float]] = None,
        cost: CostModel = CostModel(),
        eos_token: Optional[int] = None,
        log_relevance: bool = True,
        draft_limit: Optional[int] = None,
        relevance_source: RelevanceSource = RelevanceSource.MODEL_ATTENTION,
    ) -> None:
        if max_new_tokens < 1:
            raise DomainError("max_new_tokens must be at least 1")
        self.target = target
        self.drafter = drafter
        self.start = state
        self.state = state
        self.mode = mode
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.max_new_tokens = max_new_tokens
        self.gate = gate
        self.trace = list(relevance_trace) if relevance_trace else None
        self.cost = cost
        self.eos_token = eos_token
        self.log_relevance = log_relevance
        self.relevance_source = gate.relevance_source if gate is not None else RelevanceSource(relevance_source)
        self.draft_limit = draft_limit if draft_limit is not None else (gate.K if gate else None)
        self.records: list[StepRecord] = []
        self.draft_invocations = 0
        self.finished = False
        if drafter is not None:
            drafter.reset(state)

    @property
    def generated(self) -> TokenSeq:
        return self.state.generated[len(self.start.generated):]

    @property
    def remaining(self) -> int:
        return self.max_new_tokens - len(self.generated)

    @property
    def done(self) -> bool:
        return self.finished or self.remaining <= 0

    def relevance(self) -> Optional[float]:
        if self.trace is not None and self.relevance_source is RelevanceSource.TRACE_PLAYBACK:
            t = len(self.records)
            return float(self.trace[min(t, len(self.trace) - 1)])
        if not self.state.prompt:
            return 0.0
        return relevance_score(attention_row(self.target, self.state), self.state.vision_span)

    def step(self) -> StepRecord:
        if self.done:
            raise DomainError("session already finished")
        t0 = time.perf_counter_ns()
        state = self.state
        score = self.relevance() if (self.gate is not None or self.log_relevance) else None
        proposal = outcome = None
        draft_calls = 0
        nodes = 1
        if self.drafter is None:
            mode = StepMode.AUTOREGRESSIVE
            committed: TokenSeq = (ar_step(self.target, state, self.mode, self.rng),)
            accepted = 0
        elif self.gate is not None and vision_indicator(score, self.gate.tau):
            mode = StepMode.GREEDY_GATE
            committed = (ar_step(self.target, state, self.mode, self.rng),)
            accepted = 0
        else:
            mode = StepMode.SPECULATIVE
            limit = self.remaining if self.draft_limit is None else min(self.draft_limit, self.remaining)
            proposal = self.drafter.propose(state, limit, self.mode, self.rng)
            self.draft_invocations += 1
            draft_calls = proposal.draft_calls
            # an empty proposal verifies as a single target step, which still
            # reports the discarded candidates a recycling drafter feeds on
            outcome = verify(self.target, state, proposal, self.mode, self.rng,
                             harvest_top_k=self.drafter.harvest_top_k)
            nodes = outcome.target_nodes_evaluated
            committed = outcome.committed[: self.remaining]
            accepted = min(outcome.accepted_count, len(committed))
        if self.eos_token is not None and self.eos_token in committed:
            cut = committed.index(self.eos_token) + 1
            committed = committed[:cut]
            accepted = min(accepted, cut)
            self.finished = True
        if self.drafter is not None:
            self.drafter.observe(state, committed, proposal, outcome)
        self.state = state.advance(committed)
        record = StepRecord(
            step_index=state.step_index,
            mode=mode,
            accepted_count=accepted,
            relevance_score=score,
            gate_fired=mode is StepMode.GREEDY_GATE,
            draft_cost_units=self.cost.draft(draft_calls),
            target_cost_units=self.cost.target(1, nodes),
            wall_nanos=time.perf_counter_ns() - t0,
            committed=len(committed),
            draft_calls=draft_calls,
            target_nodes=nodes,
        )
        self.records.append(record)
        return record

    def run(self) -> tuple[TokenSeq, list[StepRecord]]:
        while not self.done:
            self.step()
        return self.generated, self.records


def viskip_decode(
    target: TableTargetModel,
    drafter: Drafter,
    state: SequenceState,
    cfg: Optional[GateConfig],
    mode: VerifyMode = GREEDY,
    rng: Optional[np.random.Generator] = None,
    max_new_tokens: int = 1024,
    **kwargs,
) -> tuple[TokenSeq, list[StepRecord]]:
    """Gated draft-then-verify loop; ``cfg=None`` disables the gate."""
    return DecodeSession(target, drafter, state, mode, rng, max_new_tokens, gate=cfg, **kwargs).run()


def speculative_decode(target, drafter, state, mode=GREEDY, rng=None, max_new_tokens=1024, **kwargs):
    return viskip_decode(target, drafter, state, None, mode, rng, max_new_tokens, **kwargs)


def autoregressive_decode(target, state, mode=GREEDY, rng=None, max_new_tokens=1024, **kwargs):
    return DecodeSession(target, None, state, mode, rng, max_new_tokens, **kwargs).run()
