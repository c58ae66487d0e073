"""Recycling of discarded candidates into new draft trees."""

from __future__ import annotations

import heapq
from typing import Optional

from ..core import ROOT, DraftNode, DraftProposal, SequenceState, Structure
from .base import Drafter, cap


class RecyclePool:
    """Successor lists keyed by the token that preceded a discarded candidate.

    Lists hold at most ``matrix_top_k`` tokens, most recently discarded first.
    Branches stay for the lifetime of the sequence.
    """

    def __init__(self, matrix_top_k: int = 8, draft_len: int = 10, max_nodes: int = 30) -> None:
        self.matrix_top_k = matrix_top_k
        self.draft_len = draft_len
        self.max_nodes = max_nodes
        self.successors: dict[int, list[int]] = {}

    def add(self, parent_token: int, token: int) -> None:
        row = self.successors.setdefault(int(parent_token), [])
        if token in row:
            row.remove(token)
        row.insert(0, int(token))
        del row[self.matrix_top_k:]

    def add_branch(self, parent_token: int, branch) -> None:
        prev = parent_token
        for tok in branch:
            self.add(prev, tok)
            prev = tok

    def __contains__(self, edge) -> bool:
        parent, token = edge
        return token in self.successors.get(parent, ())


def recycle_draft(p: RecyclePool, state: SequenceState, limit: Optional[int] = None) -> DraftProposal:
    """Grow a tree from the last committed token by following pooled successors.

    Nodes are taken best-first by the product of ``1 / (rank + 1)`` over the
    path, so the chain of most recent successors is explored first.
    """
    ctx = state.context
    depth_cap = cap(p.draft_len, limit)
    if not ctx or depth_cap == 0 or int(ctx[-1]) not in p.successors:
        return DraftProposal.empty(Structure.TREE)
    nodes: list[DraftNode] = []
    heap: list = []
    seq = 0

    def push(token: int, parent_idx: int, depth: int, score: float) -> None:
        nonlocal seq
        for rank, child in enumerate(p.successors.get(token, ())[: p.matrix_top_k]):
            s = score / (rank + 1)
            heapq.heappush(heap, (-s, depth, child, seq, parent_idx, 1.0 / (rank + 1)))
            seq += 1

    push(int(ctx[-1]), ROOT, 1, 1.0)
    while heap and len(nodes) < p.max_nodes:
        neg, depth, tok, _, parent_idx, prob = heapq.heappop(heap)
        nodes.append(DraftNode(tok, parent_idx, prob))
        if depth < depth_cap:
            push(tok, len(nodes) - 1, depth + 1, -neg)
    return DraftProposal(Structure.TREE, tuple(nodes))


class RecyclingDrafter(Drafter):
    name = "recycling"
    structure = Structure.TREE

    def __init__(self, matrix_top_k: int = 8, draft_len: int = 10, max_nodes: int = 30) -> None:
        self.params = dict(matrix_top_k=matrix_top_k, draft_len=draft_len, max_nodes=max_nodes)
        self.harvest_top_k = matrix_top_k
        self.pool = RecyclePool(**self.params)

    def reset(self, state: SequenceState) -> None:
        self.pool = RecyclePool(**self.params)

    def propose(self, state, limit=None, mode=None, rng=None) -> DraftProposal:
        return recycle_draft(self.pool, state, limit)

    def observe(self, state, committed, proposal=None, outcome=None) -> None:
        if proposal is None or outcome is None:
            return
        ctx = state.context
        accepted = set(outcome.accepted_nodes)
        for i, node in enumerate(proposal.nodes):
            if i in accepted:
                continue
            if node.parent == ROOT:
                if not ctx:
                    continue
                parent_token = ctx[-1]
            else:
                parent_token = proposal.nodes[node.parent].token
            self.pool.add(parent_token, node.token)
        for parent_token, cands in outcome.discarded:
            for tok in reversed(cands):
                self.pool.add(parent_token, tok)
