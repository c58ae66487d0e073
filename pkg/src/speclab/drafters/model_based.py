"""Drafting from the synthetic draft model: chains and dynamic trees."""

from __future__ import annotations

import heapq
from typing import Optional

import numpy as np

from ..core import ROOT, DomainError, DraftNode, DraftProposal, SequenceState, Structure
from ..model import SyntheticDraftModel, apply_temperature, argmax_token, draft_next, sample_token
from ..verify import GREEDY, VerifyMode
from .base import Drafter, cap


def model_draft_linear(
    d: SyntheticDraftModel,
    state: SequenceState,
    K: int,
    mode: VerifyMode = GREEDY,
    rng: Optional[np.random.Generator] = None,
) -> DraftProposal:
    """K tokens drafted autoregressively; sampled tokens keep their draft distribution."""
    if K < 1:
        raise DomainError("draft length must be at least 1")
    tokens, probs, qs = [], [], []
    s = state
    for _ in range(K):
        q = draft_next(d, s)
        if mode.greedy:
            tok = argmax_token(q)
            probs.append(float(q[tok]))
            qs.append(None)
        else:
            if rng is None:
                raise DomainError("sampled drafting needs an rng")
            q = apply_temperature(q, mode.temperature)
            tok = sample_token(q, rng)
            probs.append(float(q[tok]))
            qs.append(q)
        tokens.append(tok)
        s = s.extend((tok,))
    return DraftProposal.linear(tokens, probs, qs, draft_calls=K)


def _top_k(q: np.ndarray, k: int) -> list[int]:
    order = np.argsort(-q, kind="stable")[:k]
    return [int(t) for t in order if q[t] > 0]


def model_draft_tree(
    d: SyntheticDraftModel,
    state: SequenceState,
    depth: int = 3,
    top_k: int = 8,
    total_token: int = 30,
    expand_threshold: float = 0.3,
    mode: VerifyMode = GREEDY,
) -> DraftProposal:
    """Dynamic draft tree grown best-first on cumulative draft probability.

    Each drafted node offers its ``top_k`` children as candidates. The best
    candidate overall joins the tree next, as long as its cumulative
    probability reaches ``expand_threshold``, until ``total_token`` nodes are
    placed. Ties go to the lower token, then to the earlier candidate.
    """
    if depth < 1 or top_k < 1 or total_token < 1:
        raise DomainError("depth, top_k and total_token must be positive")
    calls = 0

    def dist(s: SequenceState) -> np.ndarray:
        nonlocal calls
        calls += 1
        q = draft_next(d, s)
        return q if mode.greedy else apply_temperature(q, mode.temperature)

    nodes: list[DraftNode] = []
    heap: list = []
    seq = 0

    def offer(s: SequenceState, parent_idx: int, parent_score: float, child_depth: int) -> None:
        nonlocal seq
        q = dist(s)
        for tok in _top_k(q, top_k):
            heapq.heappush(heap, (-parent_score * q[tok], tok, seq, parent_idx, child_depth, float(q[tok]), s))
            seq += 1

    offer(state, ROOT, 1.0, 1)
    while heap and len(nodes) < total_token:
        neg, tok, _, parent_idx, node_depth, prob, parent_state = heapq.heappop(heap)
        if -neg < expand_threshold:
            break
        nodes.append(DraftNode(tok, parent_idx, prob))
        if node_depth < depth and len(nodes) < total_token:
            offer(parent_state.extend((tok,)), len(nodes) - 1, -neg, node_depth + 1)
    return DraftProposal(Structure.TREE, tuple(nodes), draft_calls=calls)


class ModelLinearDrafter(Drafter):
    name = "draft-linear"
    reuses_context = False

    def __init__(self, draft_model: SyntheticDraftModel, K: int = 5) -> None:
        self.draft_model = draft_model
        self.K = K

    def propose(self, state, limit=None, mode: VerifyMode = GREEDY, rng=None) -> DraftProposal:
        k = cap(self.K, limit)
        if k == 0:
            return DraftProposal.empty()
        return model_draft_linear(self.draft_model, state, k, mode, rng)


class ModelTreeDrafter(Drafter):
    name = "draft-tree"
    structure = Structure.TREE
    reuses_context = False

    def __init__(self, draft_model: SyntheticDraftModel, depth: int = 3, top_k: int = 8,
                 total_token: int = 30, threshold: float = 0.3) -> None:
        self.draft_model = draft_model
        self.depth = depth
        self.top_k = top_k
        self.total_token = total_token
        self.threshold = threshold

    def propose(self, state, limit=None, mode: VerifyMode = GREEDY, rng=None) -> DraftProposal:
        depth = cap(self.depth, limit)
        if depth == 0:
            return DraftProposal.empty(Structure.TREE)
        return model_draft_tree(self.draft_model, state, depth, self.top_k, self.total_token,
                                self.threshold, mode)
