"""Prompt lookup drafting over an incremental n-gram index."""

from __future__ import annotations

from typing import Iterable, Optional

from ..core import DraftProposal, SequenceState
from .base import Drafter, cap


class NgramIndex:
    """For every n-gram of order 1..``order``: its latest end position and the one before."""

    def __init__(self, order: int = 4, tokens: Iterable[int] = ()) -> None:
        if order < 1:
            raise ValueError("n-gram order must be at least 1")
        self.order = order
        self.text: list[int] = []
        self.ends: list[dict[tuple[int, ...], tuple[int, int]]] = [{} for _ in range(order + 1)]
        for t in tokens:
            self.add(t)

    def add(self, token: int) -> None:
        self.text.append(int(token))
        n = len(self.text)
        for k in range(1, min(self.order, n) + 1):
            key = tuple(self.text[n - k:])
            table = self.ends[k]
            last = table.get(key, (-1, -1))[0]
            table[key] = (n, last)

    def earlier_end(self, key: tuple[int, ...]) -> int:
        """Most recent end position of ``key`` excluding the current text end; -1 if none."""
        entry = self.ends[len(key)].get(key)
        if entry is None:
            return -1
        last, prev = entry
        return prev if last == len(self.text) else last


def pld_draft(idx: NgramIndex, state: Optional[SequenceState], n_pred: int = 10) -> DraftProposal:
    text = idx.text
    n = len(text)
    if n_pred <= 0:
        return DraftProposal.empty()
    for k in range(min(idx.order, n - 1), 0, -1):
        end = idx.earlier_end(tuple(text[n - k:]))
        if end != -1:
            follow = text[end:min(end + n_pred, n)]
            return DraftProposal.linear(follow) if follow else DraftProposal.empty()
    return DraftProposal.empty()


class PldDrafter(Drafter):
    name = "pld"

    def __init__(self, ngram: int = 4, n_pred: int = 10) -> None:
        self.ngram = ngram
        self.n_pred = n_pred
        self.index = NgramIndex(ngram)

    def reset(self, state: SequenceState) -> None:
        self.index = NgramIndex(self.ngram, state.context)

    def propose(self, state, limit=None, mode=None, rng=None) -> DraftProposal:
        return pld_draft(self.index, state, cap(self.n_pred, limit))

    def observe(self, state, committed, proposal=None, outcome=None) -> None:
        for t in committed:
            self.index.add(t)
