"""Suffix-automaton drafting.

The automaton is built online. Besides the usual length/link/transitions,
each state remembers the latest end position of its strings and the latest
one before that, so the most recent *earlier* occurrence of the longest
repeated suffix is available in O(1) after every extension.
"""

from __future__ import annotations

import math
from typing import Iterable, Optional, Sequence

import numpy as np

from ..core import DraftProposal, SequenceState
from ..verify import GREEDY, VerifyMode
from .base import Drafter, cap


class SuffixAutomaton:
    def __init__(self, tokens: Iterable[int] = ()) -> None:
        self.length: list[int] = [0]
        self.link: list[int] = [-1]
        self.next: list[dict[int, int]] = [{}]
        self.end: list[int] = [0]
        self.prev_end: list[int] = [-1]
        self.last = 0
        self.text: list[int] = []
        for t in tokens:
            self.extend(t)

    def __len__(self) -> int:
        return len(self.length)

    def _new_state(self, length: int, link: int, trans: dict[int, int], end: int, prev: int) -> int:
        self.length.append(length)
        self.link.append(link)
        self.next.append(trans)
        self.end.append(end)
        self.prev_end.append(prev)
        return len(self.length) - 1

    def extend(self, token: int) -> "SuffixAutomaton":
        token = int(token)
        self.text.append(token)
        n = len(self.text)
        cur = self._new_state(self.length[self.last] + 1, 0, {}, n, -1)
        p = self.last
        while p != -1 and token not in self.next[p]:
            self.next[p][token] = cur
            p = self.link[p]
        if p != -1:
            q = self.next[p][token]
            if self.length[p] + 1 == self.length[q]:
                self.link[cur] = q
            else:
                clone = self._new_state(
                    self.length[p] + 1, self.link[q], dict(self.next[q]), self.end[q], self.prev_end[q]
                )
                while p != -1 and self.next[p].get(token) == q:
                    self.next[p][token] = clone
                    p = self.link[p]
                self.link[q] = clone
                self.link[cur] = clone
        self.last = cur
        # every suffix of the text now also ends at n
        v = self.link[cur]
        while v > 0:
            self.prev_end[v] = self.end[v]
            self.end[v] = n
            v = self.link[v]
        return self

    def contains(self, seq: Sequence[int]) -> bool:
        v = 0
        for t in seq:
            v = self.next[v].get(int(t), -1)
            if v == -1:
                return False
        return True

    def longest_repeated_suffix(self) -> tuple[int, int]:
        """(length, end) of the longest suffix that also ends earlier in the text,
        with ``end`` the most recent such earlier end position; (0, -1) if none."""
        v = self.link[self.last] if self.text else -1
        if v <= 0:
            return 0, -1
        return self.length[v], self.prev_end[v]


def sam_extend(a: SuffixAutomaton, token: int) -> SuffixAutomaton:
    return a.extend(token)


def copy_continuation(text: Sequence[int], start: int, max_len: int) -> list[int]:
    """Tokens that followed position ``start``; a copy running into the current
    end keeps reading from its own output (period ``len(text) - start``)."""
    n = len(text)
    out: list[int] = []
    for j in range(max_len):
        pos = start + j
        out.append(text[pos] if pos < n else out[pos - n])
    return out


def sam_draft(a: SuffixAutomaton, state: Optional[SequenceState], max_len: int,
              min_match: int = 1) -> DraftProposal:
    """Continuation of the most recent earlier occurrence of the longest repeated suffix."""
    length, end = a.longest_repeated_suffix()
    if length == 0 or length < min_match or max_len <= 0:
        return DraftProposal.empty()
    return DraftProposal.linear(copy_continuation(a.text, end, max_len))


class SamDrafter(Drafter):
    name = "sam"

    def __init__(self, max_len: int = 10, threshold: float = 1.0, include_prompt: bool = True) -> None:
        self.max_len = max_len
        self.min_match = max(1, math.ceil(threshold))
        self.include_prompt = include_prompt
        self.automaton = SuffixAutomaton()

    def reset(self, state: SequenceState) -> None:
        source = state.context if self.include_prompt else state.generated
        self.automaton = SuffixAutomaton(source)

    def propose(self, state, limit=None, mode: VerifyMode = GREEDY, rng: Optional[np.random.Generator] = None):
        return sam_draft(self.automaton, state, cap(self.max_len, limit), self.min_match)

    def observe(self, state, committed, proposal=None, outcome=None) -> None:
        for t in committed:
            self.automaton.extend(t)
