"""Experiment configuration, loadable from a JSON file.

Drafter defaults follow the method settings of the original benchmark runs.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Any, Optional

from ..core import CostModel
from ..drafters import (
    Drafter,
    LookaheadDrafter,
    ModelLinearDrafter,
    ModelTreeDrafter,
    PldDrafter,
    RecyclingDrafter,
    SamDrafter,
)
from ..model import SyntheticDraftModel, TableTargetModel
from ..verify import VerifyMode
from ..viskip import GateConfig, RelevanceSource


class ConfigError(ValueError):
    pass


METHODS = ("ar", "pld", "sam", "lookahead", "recycling", "draft-linear", "draft-tree")


@dataclass
class ModelConfig:
    seed: int = 0
    vocab_size: int = 64
    context_order: int = 3
    vision_influence: float = 0.5
    logit_scale: float = 3.0
    attention_sharpness: float = 8.0
    vision_attention_bias: float = 1.0


@dataclass
class DraftConfig:
    epsilon: float = 0.2
    noise_seed: int = 0
    relevance_epsilon: Optional[float] = None
    relevance_cutoff: float = 0.35
    K: int = 5
    pld: dict = field(default_factory=lambda: {"ngram": 4, "n_pred": 10})
    sam: dict = field(default_factory=lambda: {"max_len": 10, "threshold": 1.0, "include_prompt": True})
    lookahead: dict = field(default_factory=lambda: {"decoding_length": 64, "branch_length": 12, "match_length": 4})
    recycling: dict = field(default_factory=lambda: {"matrix_top_k": 8, "draft_len": 10, "max_nodes": 30})
    draft_tree: dict = field(default_factory=lambda: {"depth": 3, "top_k": 8, "total_token": 30, "threshold": 0.3})


@dataclass
class RunConfig:
    temperature: float = 0.0
    batch_size: int = 1
    workers: int = 1
    seed: int = 0
    eos_token: Optional[int] = None
    max_new_tokens: Optional[int] = None
    mat_policy: str = "spec_steps_only"
    probe_threshold: float = 0.35


@dataclass
class BenchConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    draft: DraftConfig = field(default_factory=DraftConfig)
    gate: Optional[GateConfig] = None
    run: RunConfig = field(default_factory=RunConfig)
    cost: CostModel = field(default_factory=CostModel)

    @property
    def mode(self) -> VerifyMode:
        return VerifyMode(self.run.temperature)

    def build_target(self) -> TableTargetModel:
        return TableTargetModel(**dataclasses.asdict(self.model))

    def build_draft_model(self, target: TableTargetModel) -> SyntheticDraftModel:
        d = self.draft
        return SyntheticDraftModel(target, d.epsilon, d.noise_seed, d.relevance_epsilon, d.relevance_cutoff)

    def make_drafter(self, method: str, target: TableTargetModel) -> Optional[Drafter]:
        d = self.draft
        if method == "ar":
            return None
        if method == "pld":
            return PldDrafter(**d.pld)
        if method == "sam":
            return SamDrafter(**d.sam)
        if method == "lookahead":
            return LookaheadDrafter(**d.lookahead)
        if method == "recycling":
            return RecyclingDrafter(**d.recycling)
        if method == "draft-linear":
            return ModelLinearDrafter(self.build_draft_model(target), d.K)
        if method == "draft-tree":
            return ModelTreeDrafter(self.build_draft_model(target), **d.draft_tree)
        raise ConfigError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")

    def to_dict(self) -> dict[str, Any]:
        gate = None
        if self.gate is not None:
            gate = {"tau": self.gate.tau, "K": self.gate.K,
                    "relevance_source": self.gate.relevance_source.value}
        return {
            "model": dataclasses.asdict(self.model),
            "draft": dataclasses.asdict(self.draft),
            "gate": gate,
            "run": dataclasses.asdict(self.run),
            "cost": dataclasses.asdict(self.cost),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "BenchConfig":
        unknown = set(d) - {"model", "draft", "gate", "run", "cost"}
        if unknown:
            raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
        try:
            draft_d = dict(d.get("draft") or {})
            defaults = DraftConfig()
            for name in ("pld", "sam", "lookahead", "recycling", "draft_tree"):
                if name in draft_d:
                    merged = dict(getattr(defaults, name))
                    extra = set(draft_d[name]) - set(merged)
                    if extra:
                        raise ConfigError(f"unknown {name} parameter(s): {sorted(extra)}")
                    merged.update(draft_d[name])
                    draft_d[name] = merged
            gate_d = d.get("gate")
            gate = None
            if gate_d is not None and gate_d.get("enabled", True):
                gate_d = {k: v for k, v in gate_d.items() if k != "enabled"}
                if "relevance_source" in gate_d:
                    gate_d["relevance_source"] = RelevanceSource(gate_d["relevance_source"])
                gate = GateConfig(**gate_d)
            cfg = cls(
                model=ModelConfig(**(d.get("model") or {})),
                draft=DraftConfig(**draft_d),
                gate=gate,
                run=RunConfig(**(d.get("run") or {})),
                cost=CostModel(**(d.get("cost") or {})),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if cfg.run.mat_policy not in ("spec_steps_only", "all_steps"):
            raise ConfigError(f"unknown mat_policy {cfg.run.mat_policy!r}")
        if cfg.run.batch_size < 1 or cfg.run.workers < 1:
            raise ConfigError("batch_size and workers must be at least 1")
        return cfg


def load_config(path) -> BenchConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return BenchConfig.from_dict(data)
