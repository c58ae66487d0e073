"""Lookahead-style retrieval of frequent continuations from a token trie."""

from __future__ import annotations

import heapq
from typing import Iterable, Optional

from ..core import ROOT, DraftNode, DraftProposal, SequenceState, Structure
from .base import Drafter, cap


class TrieNode:
    __slots__ = ("children", "count", "depth")

    def __init__(self, depth: int = 0) -> None:
        self.children: dict[int, TrieNode] = {}
        self.count = 0
        self.depth = depth


class ContinuationTrie:
    """Every window of ``match_length + branch_length`` tokens of the context,
    merged into one trie. A node's count is the number of occurrences of its path."""

    def __init__(self, branch_length: int = 12, decoding_length: int = 64, match_length: int = 4,
                 tokens: Iterable[int] = ()) -> None:
        self.branch_length = branch_length
        self.decoding_length = decoding_length
        self.match_length = match_length
        self.window = match_length + branch_length
        self.root = TrieNode()
        self.text: list[int] = []
        self._open: list[TrieNode] = []
        for t in tokens:
            self.add(t)

    def add(self, token: int) -> None:
        token = int(token)
        self.text.append(token)
        self.root.count += 1
        opened = []
        for node in self._open + [self.root]:
            child = node.children.get(token)
            if child is None:
                child = node.children[token] = TrieNode(node.depth + 1)
            child.count += 1
            if child.depth < self.window:
                opened.append(child)
        self._open = opened

    def find(self, path) -> Optional[TrieNode]:
        node = self.root
        for t in path:
            node = node.children.get(int(t))
            if node is None:
                return None
        return node

    def matched_node(self) -> Optional[TrieNode]:
        """Node of the longest context tail (up to ``match_length``) that has a continuation."""
        n = len(self.text)
        for m in range(min(self.match_length, n), 0, -1):
            node = self.find(self.text[n - m:])
            if node is not None and node.children:
                return node
        return None


def select_tree(start, branch_length: int, budget: int) -> DraftProposal:
    """Best-first pick of the most frequent continuations below ``start``.

    ``start`` is a trie node (or anything with ``children``/``count``).
    Order: count desc, token asc, then insertion order.
    """
    nodes: list[DraftNode] = []
    heap: list = []
    seq = 0

    def push(parent_node, parent_idx: int, depth: int) -> None:
        nonlocal seq
        for tok, child in parent_node.children.items():
            heapq.heappush(heap, (-child.count, tok, seq, child, parent_idx, depth, parent_node.count))
            seq += 1

    if branch_length > 0:
        push(start, ROOT, 1)
    while heap and len(nodes) < budget:
        neg_count, tok, _, child, parent_idx, depth, parent_count = heapq.heappop(heap)
        nodes.append(DraftNode(tok, parent_idx, -neg_count / parent_count))
        if depth < branch_length:
            push(child, len(nodes) - 1, depth + 1)
    return DraftProposal(Structure.TREE, tuple(nodes))


def trie_draft(t: ContinuationTrie, state: Optional[SequenceState], limit: Optional[int] = None) -> DraftProposal:
    node = t.matched_node()
    if node is None:
        return DraftProposal.empty(Structure.TREE)
    return select_tree(node, cap(t.branch_length, limit), t.decoding_length)


class LookaheadDrafter(Drafter):
    name = "lookahead"
    structure = Structure.TREE

    def __init__(self, branch_length: int = 12, decoding_length: int = 64, match_length: int = 4) -> None:
        self.params = dict(branch_length=branch_length, decoding_length=decoding_length, match_length=match_length)
        self.trie = ContinuationTrie(**self.params)

    def reset(self, state: SequenceState) -> None:
        self.trie = ContinuationTrie(**self.params, tokens=state.context)

    def propose(self, state, limit=None, mode=None, rng=None) -> DraftProposal:
        return trie_draft(self.trie, state, limit)

    def observe(self, state, committed, proposal=None, outcome=None) -> None:
        for t in committed:
            self.trie.add(t)
