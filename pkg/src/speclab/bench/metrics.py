"""Step-level metrics. Undefined metrics come back as ``None`` rather than raising."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

from ..core import StepMode, StepRecord

PROBE_THRESHOLD = 0.35


class MatPolicy(str, enum.Enum):
    SPEC_STEPS_ONLY = "spec_steps_only"
    ALL_STEPS = "all_steps"


def compute_mat(records: Iterable[StepRecord], policy: MatPolicy = MatPolicy.SPEC_STEPS_ONLY) -> Optional[float]:
    """Mean accepted draft tokens per counted step.

    Correction and bonus tokens are not counted. Gated steps count (as zero)
    only under ``ALL_STEPS``; plain autoregressive steps never count.
    """
    policy = MatPolicy(policy)
    counted = [
        r for r in records
        if r.mode is StepMode.SPECULATIVE
        or (policy is MatPolicy.ALL_STEPS and r.mode is StepMode.GREEDY_GATE)
    ]
    if not counted:
        return None
    return sum(r.accepted_count for r in counted) / len(counted)


def latency_cdf(per_sample: Sequence[float]) -> Optional[list[tuple[float, float]]]:
    """Empirical CDF as ``(latency, fraction <= latency)`` at each distinct value."""
    if not per_sample:
        return None
    xs = sorted(per_sample)
    n = len(xs)
    points: list[tuple[float, float]] = []
    for i, x in enumerate(xs):
        if i + 1 < n and xs[i + 1] == x:
            continue
        points.append((x, (i + 1) / n))
    return points


@dataclass(frozen=True)
class ProbeTable:
    measured_steps: int
    high_visual_steps: int
    high_visual_share: float
    avg_accept_high: Optional[float]
    avg_accept_low: Optional[float]
    threshold: float = PROBE_THRESHOLD

    def to_dict(self) -> dict:
        return asdict(self)


def relevance_probe(records: Iterable[StepRecord], threshold: float = PROBE_THRESHOLD) -> Optional[ProbeTable]:
    """Split speculative steps by relevance score (high means ``>= threshold``)
    and average the accepted draft tokens in each bucket."""
    scored = [r for r in records if r.relevance_score is not None and r.mode is StepMode.SPECULATIVE]
    if not scored:
        return None
    high = [r.accepted_count for r in scored if r.relevance_score >= threshold]
    low = [r.accepted_count for r in scored if r.relevance_score < threshold]
    return ProbeTable(
        measured_steps=len(scored),
        high_visual_steps=len(high),
        high_visual_share=len(high) / len(scored),
        avg_accept_high=sum(high) / len(high) if high else None,
        avg_accept_low=sum(low) / len(low) if low else None,
        threshold=threshold,
    )
