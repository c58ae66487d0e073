"""Experiment runner: per-sample decoding, the AR reference pass and aggregation."""

from __future__ import annotations

import logging
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from ..core import SequenceState, StepRecord, TokenSeq
from ..model import TableTargetModel
from ..viskip import DecodeSession, GateConfig, RelevanceSource
from .config import BenchConfig
from .dataset import CATEGORIES, BenchSample
from .metrics import MatPolicy, compute_mat, latency_cdf, relevance_probe

log = logging.getLogger(__name__)


@dataclass
class SampleResult:
    id: str
    category: str
    output: TokenSeq = ()
    wall_nanos: int = 0
    records: list[StepRecord] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def modeled_cost(self) -> float:
        return sum(r.cost_units for r in self.records)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "category": self.category,
            "output": list(self.output),
            "wall_nanos": self.wall_nanos,
            "modeled_cost": self.modeled_cost,
            "error": self.error,
            "steps": [r.to_dict() for r in self.records],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SampleResult":
        return cls(d["id"], d["category"], tuple(d["output"]), d["wall_nanos"],
                   [StepRecord.from_dict(r) for r in d["steps"]], d.get("error"))


@dataclass
class RunReport:
    method: str
    gate: Optional[dict]
    temperature: float
    mat_policy: str
    samples: list[SampleResult]
    mat: Optional[float] = None
    mat_by_category: dict = field(default_factory=dict)
    modeled_speedup: Optional[float] = None
    modeled_speedup_by_category: dict = field(default_factory=dict)
    walltime_speedup: Optional[float] = None
    walltime_speedup_by_category: dict = field(default_factory=dict)
    modeled_latency_cdf: Optional[list] = None
    wall_latency_cdf: Optional[list] = None
    probe: Optional[dict] = None
    batch: Optional[dict] = None
    invariant_violations: list[str] = field(default_factory=list)

    @property
    def categories(self) -> list[str]:
        present = {s.category for s in self.samples}
        return [c for c in CATEGORIES if c in present]

    @property
    def total_modeled_cost(self) -> float:
        return sum(s.modeled_cost for s in self.samples if s.ok)

    @property
    def errors(self) -> dict[str, str]:
        return {s.id: s.error for s in self.samples if not s.ok}

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "gate": self.gate,
            "temperature": self.temperature,
            "mat_policy": self.mat_policy,
            "mat": self.mat,
            "mat_by_category": self.mat_by_category,
            "modeled_speedup": self.modeled_speedup,
            "modeled_speedup_by_category": self.modeled_speedup_by_category,
            "walltime_speedup": self.walltime_speedup,
            "walltime_speedup_by_category": self.walltime_speedup_by_category,
            "modeled_latency_cdf": self.modeled_latency_cdf,
            "wall_latency_cdf": self.wall_latency_cdf,
            "probe": self.probe,
            "batch": self.batch,
            "invariant_violations": self.invariant_violations,
            "samples": [s.to_dict() for s in self.samples],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunReport":
        def cdf(points):
            return None if points is None else [tuple(p) for p in points]

        return cls(
            method=d["method"],
            gate=d["gate"],
            temperature=d["temperature"],
            mat_policy=d["mat_policy"],
            samples=[SampleResult.from_dict(s) for s in d["samples"]],
            mat=d["mat"],
            mat_by_category=d["mat_by_category"],
            modeled_speedup=d["modeled_speedup"],
            modeled_speedup_by_category=d["modeled_speedup_by_category"],
            walltime_speedup=d["walltime_speedup"],
            walltime_speedup_by_category=d["walltime_speedup_by_category"],
            modeled_latency_cdf=cdf(d["modeled_latency_cdf"]),
            wall_latency_cdf=cdf(d["wall_latency_cdf"]),
            probe=d["probe"],
            batch=d["batch"],
            invariant_violations=list(d["invariant_violations"]),
        )


def sample_rng(seed: int, sample_id: str) -> np.random.Generator:
    """Per-sequence generator, so outputs never depend on scheduling or batching."""
    return np.random.default_rng([seed, zlib.crc32(sample_id.encode("utf-8"))])


def make_session(cfg: BenchConfig, target: TableTargetModel, method: str, sample: BenchSample,
                 gate: Optional[GateConfig]) -> DecodeSession:
    max_new = sample.max_new_tokens
    if cfg.run.max_new_tokens is not None:
        max_new = min(max_new, cfg.run.max_new_tokens)
    source = (gate or cfg.gate or GateConfig()).relevance_source
    return DecodeSession(
        target,
        cfg.make_drafter(method, target),
        SequenceState(sample.prompt_tokens, (), sample.vision_span),
        cfg.mode,
        sample_rng(cfg.run.seed, sample.id),
        max_new,
        gate=gate,
        relevance_trace=sample.relevance_trace,
        cost=cfg.cost,
        eos_token=cfg.run.eos_token,
        relevance_source=source,
    )


def _decode(cfg, target, method, sample, gate) -> SampleResult:
    try:
        session = make_session(cfg, target, method, sample, gate)
        output, records = session.run()
    except Exception as exc:  # one failing sample must not abort the run
        log.warning("sample %s failed: %s", sample.id, exc)
        return SampleResult(sample.id, sample.category, error=f"{type(exc).__name__}: {exc}")
    return SampleResult(sample.id, sample.category, output, sum(r.wall_nanos for r in records), records)


def decode_all(cfg: BenchConfig, dataset: Sequence[BenchSample], method: str,
               gate: Optional[GateConfig] = None, target: Optional[TableTargetModel] = None) -> list[SampleResult]:
    target = target or cfg.build_target()
    cfg.make_drafter(method, target)  # fail fast on unknown methods
    if cfg.run.workers <= 1:
        return [_decode(cfg, target, method, s, gate) for s in dataset]
    with ThreadPoolExecutor(max_workers=cfg.run.workers) as pool:
        return list(pool.map(lambda s: _decode(cfg, target, method, s, gate), dataset))


def _ratio(ref_cost: float, ref_tokens: int, cost: float, tokens: int) -> Optional[float]:
    if ref_tokens == 0 or tokens == 0 or cost <= 0 or ref_cost <= 0:
        return None
    return (ref_cost / ref_tokens) / (cost / tokens)


def _speedups(results, baseline, key) -> tuple[Optional[float], dict]:
    ref = {s.id: s for s in baseline if s.ok}
    pairs = [(s, ref[s.id]) for s in results if s.ok and s.id in ref]

    def agg(ps):
        return _ratio(sum(key(b) for _, b in ps), sum(len(b.output) for _, b in ps),
                      sum(key(s) for s, _ in ps), sum(len(s.output) for s, _ in ps))

    by_cat = {}
    for cat in CATEGORIES:
        ps = [(s, b) for s, b in pairs if s.category == cat]
        if ps:
            by_cat[cat] = agg(ps)
    return agg(pairs), by_cat


def build_report(cfg: BenchConfig, method: str, gate: Optional[GateConfig],
                 results: list[SampleResult], baseline: list[SampleResult]) -> RunReport:
    policy = MatPolicy(cfg.run.mat_policy)
    ok = [s for s in results if s.ok]
    report = RunReport(
        method=method,
        gate=None if gate is None else {"tau": gate.tau, "K": gate.K,
                                        "relevance_source": RelevanceSource(gate.relevance_source).value},
        temperature=cfg.run.temperature,
        mat_policy=policy.value,
        samples=results,
    )
    if method != "ar":
        report.mat = compute_mat([r for s in ok for r in s.records], policy)
        for cat in CATEGORIES:
            recs = [r for s in ok if s.category == cat for r in s.records]
            if any(s.category == cat for s in ok):
                report.mat_by_category[cat] = compute_mat(recs, policy)
    report.modeled_speedup, report.modeled_speedup_by_category = _speedups(results, baseline, lambda s: s.modeled_cost)
    report.walltime_speedup, report.walltime_speedup_by_category = _speedups(results, baseline, lambda s: s.wall_nanos)
    if ok:
        report.modeled_latency_cdf = latency_cdf([s.modeled_cost for s in ok])
        report.wall_latency_cdf = latency_cdf([s.wall_nanos for s in ok])
    probe = relevance_probe([r for s in ok for r in s.records], cfg.run.probe_threshold)
    report.probe = None if probe is None else probe.to_dict()
    if cfg.mode.greedy and method != "ar":
        ref = {s.id: s.output for s in baseline if s.ok}
        for s in ok:
            if s.id in ref and s.output != ref[s.id]:
                report.invariant_violations.append(f"{s.id}: output differs from the autoregressive reference")
    return report


def run_experiment(cfg: BenchConfig, dataset: Sequence[BenchSample], method: str,
                   gate: Optional[GateConfig] = None) -> RunReport:
    """Decode every sample with ``method`` (gated when ``gate`` is given) plus an
    autoregressive pass with the same seeds for the speedup denominators."""
    target = cfg.build_target()
    results = decode_all(cfg, dataset, method, gate, target)
    baseline = results if method == "ar" else decode_all(cfg, dataset, "ar", None, target)
    return build_report(cfg, method, gate, results, baseline)


def _lockstep(cfg: BenchConfig, target, method, batch: Sequence[BenchSample], gate, stats: dict) -> list[SampleResult]:
    sessions: list[Optional[DecodeSession]] = []
    results: list[SampleResult] = []
    for sample in batch:
        try:
            sessions.append(make_session(cfg, target, method, sample, gate))
            results.append(SampleResult(sample.id, sample.category))
        except Exception as exc:
            sessions.append(None)
            results.append(SampleResult(sample.id, sample.category, error=f"{type(exc).__name__}: {exc}"))
    c = cfg.cost
    while True:
        active = [i for i, s in enumerate(sessions) if s is not None and not s.done]
        if not active:
            break
        nodes, calls = [], []
        for i in active:
            try:
                rec = sessions[i].step()
            except Exception as exc:
                results[i].error = f"{type(exc).__name__}: {exc}"
                sessions[i] = None
                continue
            nodes.append(rec.target_nodes)
            calls.append(rec.draft_calls)
        if not nodes:
            continue
        stats["lockstep_steps"] += 1
        stats["modeled_cost"] += c.target_call_cost + c.per_node_cost * sum(nodes) + c.draft_call_cost * max(calls)
        stats["padding_nodes"] += max(nodes) * len(nodes) - sum(nodes)
        stats["stall_slots"] += len(batch) - len(nodes)
    for i, s in enumerate(sessions):
        if s is not None and results[i].ok:
            results[i].output = s.generated
            results[i].records = s.records
            results[i].wall_nanos = sum(r.wall_nanos for r in s.records)
    return results


def _batched(cfg, dataset, method, batch_size, gate, target):
    stats = {"lockstep_steps": 0, "modeled_cost": 0.0, "padding_nodes": 0, "stall_slots": 0}
    results: list[SampleResult] = []
    for start in range(0, len(dataset), batch_size):
        results.extend(_lockstep(cfg, target, method, dataset[start:start + batch_size], gate, stats))
    return results, stats


def batched_run(cfg: BenchConfig, dataset: Sequence[BenchSample], method: str, batch_size: int,
                gate: Optional[GateConfig] = None) -> RunReport:
    """Decode ``batch_size`` sequences in lockstep.

    Each lockstep step is one batched target call: the call cost once, plus
    the per-node cost for every node in the batch, plus one batched draft pass
    as long as the longest drafter in the batch. Outputs are those of the
    per-sequence sessions, so they do not depend on ``batch_size``.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    target = cfg.build_target()
    results, stats = _batched(cfg, dataset, method, batch_size, gate, target)
    if method == "ar":
        baseline, base_stats = results, stats
    else:
        baseline, base_stats = _batched(cfg, dataset, "ar", batch_size, None, target)
    report = build_report(cfg, method, gate, results, baseline)
    tokens = sum(len(s.output) for s in results if s.ok)
    base_tokens = sum(len(s.output) for s in baseline if s.ok)
    report.batch = {
        "batch_size": batch_size,
        **stats,
        "ar_modeled_cost": base_stats["modeled_cost"],
        "modeled_speedup": _ratio(base_stats["modeled_cost"], base_tokens, stats["modeled_cost"], tokens),
    }
    return report
