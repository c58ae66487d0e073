from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..core import DraftProposal, SequenceState, Structure, VerificationOutcome
from ..verify import GREEDY, VerifyMode


class Drafter:
    """A draft-proposal generator bound to one decoding session.

    ``reset`` indexes the starting state, ``propose`` returns a proposal of at
    most ``limit`` tokens deep, and ``observe`` is told about every committed
    step so incremental indexes stay in sync with the context.
    """

    name = "drafter"
    structure = Structure.LINEAR
    # proposals are built only from tokens already seen in context or pooled
    reuses_context = True
    harvest_top_k = 0

    def reset(self, state: SequenceState) -> None:
        pass

    def propose(
        self,
        state: SequenceState,
        limit: Optional[int] = None,
        mode: VerifyMode = GREEDY,
        rng: Optional[np.random.Generator] = None,
    ) -> DraftProposal:
        raise NotImplementedError

    def observe(
        self,
        state: SequenceState,
        committed: Sequence[int],
        proposal: Optional[DraftProposal] = None,
        outcome: Optional[VerificationOutcome] = None,
    ) -> None:
        """``state`` is the state *before* ``committed`` was appended."""


def cap(length: int, limit: Optional[int]) -> int:
    return length if limit is None else max(0, min(length, limit))
