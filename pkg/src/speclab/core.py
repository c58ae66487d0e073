"""Value types shared by every part of the decoding lab."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

TokenSeq = tuple[int, ...]

ROOT = -1
DIST_ATOL = 1e-9


class DomainError(ValueError):
    """Raised when an operation receives inputs outside its domain."""


class Structure(str, enum.Enum):
    LINEAR = "linear"
    TREE = "tree"


class StepMode(str, enum.Enum):
    SPECULATIVE = "speculative"
    GREEDY_GATE = "greedy_gate"
    AUTOREGRESSIVE = "autoregressive"


def check_token(token: int, vocab_size: int) -> int:
    if not 0 <= token < vocab_size:
        raise DomainError(f"token {token} outside vocabulary of size {vocab_size}")
    return int(token)


def is_distribution(p: np.ndarray, atol: float = DIST_ATOL) -> bool:
    p = np.asarray(p, dtype=float)
    return p.ndim == 1 and p.size > 0 and bool(np.all(p >= 0)) and abs(p.sum() - 1.0) <= atol


def check_distribution(p: np.ndarray, atol: float = DIST_ATOL) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if not is_distribution(p, atol):
        raise DomainError("not a probability vector (negative entries or sum != 1)")
    return p


@dataclass(frozen=True)
class SequenceState:
    """Prompt, committed tokens and the vision-token span of one decoding session.

    ``vision_span`` is a half-open ``(start, end)`` range into the prompt.
    ``step_index`` counts outer decoding steps taken so far.
    """

    prompt: TokenSeq
    generated: TokenSeq = ()
    vision_span: tuple[int, int] = (0, 0)
    step_index: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "prompt", tuple(int(t) for t in self.prompt))
        object.__setattr__(self, "generated", tuple(int(t) for t in self.generated))
        start, end = (int(v) for v in self.vision_span)
        object.__setattr__(self, "vision_span", (start, end))
        if not 0 <= start <= end <= len(self.prompt):
            raise DomainError(
                f"vision span {self.vision_span} outside prompt of length {len(self.prompt)}"
            )
        if self.step_index < 0:
            raise DomainError("step_index must be non-negative")

    @property
    def context(self) -> TokenSeq:
        return self.prompt + self.generated

    @property
    def vision_tokens(self) -> TokenSeq:
        start, end = self.vision_span
        return self.prompt[start:end]

    @property
    def num_vision(self) -> int:
        return self.vision_span[1] - self.vision_span[0]

    def extend(self, tokens: Sequence[int]) -> "SequenceState":
        """State after speculatively appending ``tokens`` (same step)."""
        return SequenceState(self.prompt, self.generated + tuple(tokens), self.vision_span, self.step_index)

    def advance(self, tokens: Sequence[int]) -> "SequenceState":
        """State after committing ``tokens`` as one outer decoding step."""
        return SequenceState(
            self.prompt, self.generated + tuple(tokens), self.vision_span, self.step_index + 1
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "prompt": list(self.prompt),
            "generated": list(self.generated),
            "vision_span": list(self.vision_span),
            "step_index": self.step_index,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SequenceState":
        return cls(
            prompt=tuple(d["prompt"]),
            generated=tuple(d.get("generated", ())),
            vision_span=tuple(d.get("vision_span", (0, 0))),
            step_index=int(d.get("step_index", 0)),
        )


@dataclass(frozen=True)
class DraftNode:
    """One drafted token.

    ``q`` is the distribution the token was *sampled* from, when it was
    sampled. Deterministically chosen tokens (retrieval, top-k trees, greedy
    drafts) leave it ``None`` and are verified as point proposals.
    """

    token: int
    parent: int = ROOT
    draft_prob: float = 1.0
    q: Optional[np.ndarray] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class DraftProposal:
    structure: Structure = Structure.LINEAR
    nodes: tuple[DraftNode, ...] = ()
    draft_calls: int = 0

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def is_empty(self) -> bool:
        return not self.nodes

    @property
    def tokens(self) -> TokenSeq:
        return tuple(n.token for n in self.nodes)

    def children(self) -> dict[int, list[int]]:
        """Map from parent index (``ROOT`` included) to child indices, in node order."""
        out: dict[int, list[int]] = {ROOT: []}
        for i, node in enumerate(self.nodes):
            out.setdefault(node.parent, []).append(i)
        return out

    def depths(self) -> list[int]:
        order = topological_order(self)
        if order is None:
            raise DomainError("proposal is not a rooted tree")
        depth = [0] * len(self.nodes)
        for i in order:
            parent = self.nodes[i].parent
            depth[i] = 1 if parent == ROOT else depth[parent] + 1
        return depth

    @property
    def max_depth(self) -> int:
        if not self.nodes:
            return 0
        return max(self.depths())

    def path(self, index: int) -> TokenSeq:
        """Tokens on the path from the root to node ``index`` inclusive."""
        out = []
        while index != ROOT:
            out.append(self.nodes[index].token)
            index = self.nodes[index].parent
        return tuple(reversed(out))

    @classmethod
    def linear(cls, tokens: Sequence[int], probs: Optional[Sequence[float]] = None,
               qs: Optional[Sequence[Optional[np.ndarray]]] = None, draft_calls: int = 0) -> "DraftProposal":
        nodes = []
        for i, tok in enumerate(tokens):
            nodes.append(DraftNode(
                token=int(tok),
                parent=i - 1 if i > 0 else ROOT,
                draft_prob=1.0 if probs is None else float(probs[i]),
                q=None if qs is None else qs[i],
            ))
        return cls(Structure.LINEAR, tuple(nodes), draft_calls)

    @classmethod
    def empty(cls, structure: Structure = Structure.LINEAR) -> "DraftProposal":
        return cls(structure, ())


def topological_order(proposal: DraftProposal) -> Optional[list[int]]:
    """Root-first order of node indices, or ``None`` if the parent links contain a cycle
    or point outside the node list."""
    n = len(proposal.nodes)
    kids: dict[int, list[int]] = {}
    for i, node in enumerate(proposal.nodes):
        if node.parent != ROOT and not 0 <= node.parent < n:
            return None
        if node.parent == i:
            return None
        kids.setdefault(node.parent, []).append(i)
    order: list[int] = []
    frontier = list(kids.get(ROOT, []))
    while frontier:
        i = frontier.pop(0)
        order.append(i)
        frontier.extend(kids.get(i, []))
    return order if len(order) == n else None


def validate_proposal(p: DraftProposal, vocab_size: int, budget: Optional[int] = None) -> bool:
    """True iff ``p`` is a well-formed chain or tree over the vocabulary.

    The root is the committed context itself, so a tree may hang several
    candidates off it. A linear proposal may not.
    """
    if budget is not None and len(p.nodes) > budget:
        return False
    for node in p.nodes:
        if not 0 <= node.token < vocab_size:
            return False
        if not 0.0 <= node.draft_prob <= 1.0:
            return False
    order = topological_order(p)
    if order is None:
        return False
    kids = p.children()
    for parent, idx in kids.items():
        if p.structure is Structure.LINEAR and len(idx) > 1:
            return False
        tokens = [p.nodes[i].token for i in idx]
        if len(set(tokens)) != len(tokens):
            return False
    return True


@dataclass(frozen=True)
class VerificationOutcome:
    accepted_tokens: TokenSeq
    correction_token: int
    target_calls: int = 1
    target_nodes_evaluated: int = 1
    accepted_nodes: tuple[int, ...] = ()
    # (parent token, candidate tokens) pairs the target ranked but did not commit
    discarded: tuple[tuple[int, TokenSeq], ...] = ()

    @property
    def accepted_count(self) -> int:
        return len(self.accepted_tokens)

    @property
    def committed(self) -> TokenSeq:
        return self.accepted_tokens + (self.correction_token,)


@dataclass(frozen=True)
class CostModel:
    """Abstract cost units standing in for accelerator time."""

    target_call_cost: float = 1.0
    per_node_cost: float = 0.02
    draft_call_cost: float = 0.1

    def __post_init__(self) -> None:
        if min(self.target_call_cost, self.per_node_cost, self.draft_call_cost) < 0:
            raise DomainError("costs must be non-negative")

    def target(self, calls: int, nodes: int) -> float:
        return calls * self.target_call_cost + nodes * self.per_node_cost

    def draft(self, calls: int) -> float:
        return calls * self.draft_call_cost


@dataclass(frozen=True)
class StepRecord:
    step_index: int
    mode: StepMode
    accepted_count: int = 0
    relevance_score: Optional[float] = None
    gate_fired: bool = False
    draft_cost_units: float = 0.0
    target_cost_units: float = 0.0
    wall_nanos: int = 0
    committed: int = 1
    draft_calls: int = 0
    target_nodes: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", StepMode(self.mode))
        if self.mode is StepMode.GREEDY_GATE and (self.accepted_count != 0 or not self.gate_fired):
            raise DomainError("a gated step accepts no draft tokens and must mark the gate as fired")

    @property
    def cost_units(self) -> float:
        return self.draft_cost_units + self.target_cost_units

    def to_dict(self) -> dict[str, Any]:
        return {
            "step_index": self.step_index,
            "mode": self.mode.value,
            "accepted_count": self.accepted_count,
            "relevance_score": self.relevance_score,
            "gate_fired": self.gate_fired,
            "draft_cost_units": self.draft_cost_units,
            "target_cost_units": self.target_cost_units,
            "wall_nanos": self.wall_nanos,
            "committed": self.committed,
            "draft_calls": self.draft_calls,
            "target_nodes": self.target_nodes,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "StepRecord":
        return cls(**d)
