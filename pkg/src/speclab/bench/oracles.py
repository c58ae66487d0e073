"""Brute-force reference drafters.

These scan the raw context directly and share no code with the incremental
indexes, so the two can be checked against each other.
"""

from __future__ import annotations

import heapq
import itertools
from collections import Counter
from typing import Sequence

import numpy as np


def substrings(text: Sequence[int]) -> set[tuple[int, ...]]:
    text = tuple(text)
    return {text[i:j] for i in range(len(text)) for j in range(i + 1, len(text) + 1)}


def brute_sam_draft(context: Sequence[int], max_len: int, min_match: int = 1) -> list[int]:
    c = list(context)
    n = len(c)
    for length in range(n - 1, 0, -1):
        suffix = c[n - length:]
        for end in range(n - 1, length - 1, -1):
            if c[end - length:end] == suffix:
                if length < min_match:
                    return []
                ext = c[:]
                while len(ext) < end + max_len:
                    ext.append(ext[len(ext) - (n - end)])
                return ext[end:end + max_len]
    return []


def brute_pld_draft(context: Sequence[int], ngram: int, n_pred: int) -> list[int]:
    c = list(context)
    n = len(c)
    for k in range(ngram, 0, -1):
        if k >= n:
            continue
        tail = c[n - k:]
        for end in range(n - 1, k - 1, -1):
            if c[end - k:end] == tail:
                return c[end:end + n_pred]
    return []


class _CountNode:
    def __init__(self, count: int, children: dict) -> None:
        self.count = count
        self.children = children


def brute_trie_draft(context: Sequence[int], match_length: int, branch_length: int,
                     decoding_length: int) -> list[tuple[tuple[int, ...], float]]:
    """Selected continuation paths as ``(path, count / parent count)`` in pick order."""
    c = tuple(context)
    n = len(c)
    for m in range(min(match_length, n), 0, -1):
        tail = c[n - m:]
        starts = [i for i in range(n - m) if c[i:i + m] == tail]
        if not starts:
            continue
        counts: Counter = Counter()
        for i in starts:
            follow = c[i + m:i + m + branch_length]
            for d in range(1, len(follow) + 1):
                counts[follow[:d]] += 1
        tail_count = sum(1 for i in range(n - m + 1) if c[i:i + m] == tail)
        picked = []
        heap = []
        seq = 0
        for path in sorted(p for p in counts if len(p) == 1):
            heap.append((-counts[path], path[-1], seq, path, tail_count))
            seq += 1
        heapq.heapify(heap)
        while heap and len(picked) < decoding_length:
            neg, _, _, path, parent_count = heapq.heappop(heap)
            picked.append((path, -neg / parent_count))
            kids = sorted((p for p in counts if len(p) == len(path) + 1 and p[:-1] == path), key=lambda p: p[-1])
            for kid in kids:
                heapq.heappush(heap, (-counts[kid], kid[-1], seq, kid, -neg))
                seq += 1
        return picked
    return []


def brute_model_tree(dist, depth: int, top_k: int, total_token: int, threshold: float) -> list[tuple[int, ...]]:
    """Paths of the best ``total_token`` nodes of the full top-k tree, by cumulative probability.

    ``dist(path)`` returns the draft distribution after ``path``.
    """
    scored = []

    def walk(path, score):
        if len(path) == depth:
            return
        q = np.asarray(dist(path))
        for tok in sorted(range(len(q)), key=lambda t: (-q[t], t))[:top_k]:
            if q[tok] <= 0:
                continue
            s = score * q[tok]
            scored.append((s, path + (tok,)))
            walk(path + (tok,), s)

    walk((), 1.0)
    keep = sorted((p for p in scored if p[0] >= threshold), key=lambda p: (-p[0], p[1]))
    return [p for _, p in keep[:total_token]]


def random_context(rng: np.random.Generator, max_vocab: int = 16, max_len: int = 200) -> list[int]:
    vocab = int(rng.integers(1, max_vocab + 1))
    n = int(rng.integers(0, max_len + 1))
    if rng.random() < 0.5 and n > 4:
        # periodic contexts exercise long matches
        period = int(rng.integers(1, 8))
        base = rng.integers(0, vocab, period)
        noise = rng.random(n) < 0.1
        return [int(rng.integers(0, vocab)) if noise[i] else int(base[i % period]) for i in range(n)]
    return [int(t) for t in rng.integers(0, vocab, n)]


def run_oracle_suite(cases: int = 1000, seed: int = 0, max_vocab: int = 16, max_len: int = 200,
                     automaton_strings: int = 100) -> dict[str, list[str]]:
    """Compare each context drafter with its brute-force scan; returns mismatch descriptions."""
    from ..drafters import ContinuationTrie, NgramIndex, SuffixAutomaton, pld_draft, sam_draft, trie_draft

    rng = np.random.default_rng(seed)
    failures: dict[str, list[str]] = {"sam": [], "pld": [], "trie": [], "automaton": []}
    for case in range(cases):
        ctx = random_context(rng, max_vocab, max_len)
        max_len_draft = int(rng.integers(1, 12))
        got = list(sam_draft(SuffixAutomaton(ctx), None, max_len_draft).tokens)
        if got != brute_sam_draft(ctx, max_len_draft):
            failures["sam"].append(f"case {case}: {ctx} -> {got}")
        ngram, n_pred = int(rng.integers(1, 6)), int(rng.integers(1, 12))
        got = list(pld_draft(NgramIndex(ngram, ctx), None, n_pred).tokens)
        if got != brute_pld_draft(ctx, ngram, n_pred):
            failures["pld"].append(f"case {case}: {ctx} -> {got}")
        m, b, budget = int(rng.integers(1, 5)), int(rng.integers(1, 8)), int(rng.integers(1, 40))
        prop = trie_draft(ContinuationTrie(b, budget, m, ctx), None)
        got_paths = [(prop.path(i), prop.nodes[i].draft_prob) for i in range(len(prop.nodes))]
        if got_paths != brute_trie_draft(ctx, m, b, budget):
            failures["trie"].append(f"case {case}: {ctx}")
    for case in range(automaton_strings):
        text = [int(t) for t in rng.integers(0, int(rng.integers(1, 5)), int(rng.integers(1, 40)))]
        sam = SuffixAutomaton(text)
        subs = substrings(text)
        for s in subs:
            if not sam.contains(s):
                failures["automaton"].append(f"string {case}: missing {s}")
        alphabet = sorted(set(text)) + [max(text) + 1]
        for length in range(1, 4):
            for probe in itertools.product(alphabet, repeat=length):
                if sam.contains(probe) != (probe in subs):
                    failures["automaton"].append(f"string {case}: wrong answer for {probe}")
        if len(text) >= 2 and len(sam) > 2 * len(text) - 1:
            failures["automaton"].append(f"string {case}: {len(sam)} states")
    return failures
