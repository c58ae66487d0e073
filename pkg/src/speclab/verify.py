"""Lossless verification of draft chains and trees against the target model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    ROOT,
    DomainError,
    DraftNode,
    DraftProposal,
    SequenceState,
    Structure,
    VerificationOutcome,
)
from .model import TableTargetModel, apply_temperature, argmax_token, sample_token, target_next


@dataclass(frozen=True)
class VerifyMode:
    """Greedy decoding is sampling at temperature zero."""

    temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise DomainError("temperature must be non-negative")

    @property
    def greedy(self) -> bool:
        return self.temperature == 0

    @classmethod
    def sampling(cls, temperature: float) -> "VerifyMode":
        return cls(float(temperature))


GREEDY = VerifyMode(0.0)


def _proposal_q(node: DraftNode, vocab_size: int) -> np.ndarray:
    if node.q is not None:
        return node.q
    q = np.zeros(vocab_size)
    q[node.token] = 1.0
    return q


def _check_sampling_node(node: DraftNode) -> float:
    qx = node.draft_prob if node.q is None else float(node.q[node.token])
    if node.draft_prob <= 0 or qx <= 0:
        raise DomainError(f"draft token {node.token} has zero draft probability")
    return 1.0 if node.q is None else qx


def _accepts(u: float, p: np.ndarray, node: DraftNode) -> bool:
    # accept with probability min(1, p(x) / q(x))
    qx = _check_sampling_node(node)
    return u * qx < p[node.token]


def _residual(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    r = np.maximum(p - q, 0.0)
    total = r.sum()
    if total <= 0:
        return p
    return r / total


def _discarded(p: np.ndarray, parent_token: Optional[int], committed: int, k: int):
    if k <= 0 or parent_token is None:
        return None
    order = np.argsort(-p, kind="stable")[: k + 1]
    cands = tuple(int(t) for t in order if t != committed and p[t] > 0)[:k]
    return (parent_token, cands) if cands else None


def _last(state: SequenceState) -> Optional[int]:
    ctx_len = len(state.prompt) + len(state.generated)
    if ctx_len == 0:
        return None
    return state.generated[-1] if state.generated else state.prompt[-1]


def verify_linear(
    target: TableTargetModel,
    state: SequenceState,
    proposal: DraftProposal,
    mode: VerifyMode = GREEDY,
    rng: Optional[np.random.Generator] = None,
    harvest_top_k: int = 0,
) -> VerificationOutcome:
    """Verify a draft chain position by position.

    Greedy mode keeps the longest prefix agreeing with the target argmax.
    Sampling mode applies the rejection rule at each position and resamples
    from the residual on the first rejection; a fully accepted chain earns a
    bonus token from the target.
    """
    if proposal.structure is not Structure.LINEAR and len(proposal.children().get(ROOT, ())) > 1:
        raise DomainError("verify_linear needs a chain")
    if not mode.greedy and rng is None:
        raise DomainError("sampling verification needs an rng")
    accepted: list[int] = []
    discarded = []
    s = state
    correction: Optional[int] = None
    for node in proposal.nodes:
        p = target_next(target, s)
        if mode.greedy:
            best = argmax_token(p)
            ok = node.token == best
            if not ok:
                correction = best
        else:
            p = apply_temperature(p, mode.temperature)
            ok = _accepts(rng.random(), p, node)
            if not ok:
                correction = sample_token(_residual(p, _proposal_q(node, target.vocab_size)), rng)
        committed = node.token if ok else correction
        entry = _discarded(p, _last(s), committed, harvest_top_k)
        if entry:
            discarded.append(entry)
        if not ok:
            break
        accepted.append(node.token)
        s = s.extend((node.token,))
    if correction is None:
        p = target_next(target, s)
        if mode.greedy:
            correction = argmax_token(p)
        else:
            p = apply_temperature(p, mode.temperature)
            correction = sample_token(p, rng)
        entry = _discarded(p, _last(s), correction, harvest_top_k)
        if entry:
            discarded.append(entry)
    return VerificationOutcome(
        accepted_tokens=tuple(accepted),
        correction_token=int(correction),
        target_calls=1,
        target_nodes_evaluated=len(proposal.nodes) + 1,
        accepted_nodes=tuple(range(len(accepted))),
        discarded=tuple(discarded),
    )


def verify_tree(
    target: TableTargetModel,
    state: SequenceState,
    proposal: DraftProposal,
    mode: VerifyMode = GREEDY,
    rng: Optional[np.random.Generator] = None,
    harvest_top_k: int = 0,
) -> VerificationOutcome:
    """Walk a draft tree from the root, accepting at most one child per level.

    Sampling mode tries siblings in node order: each rejection removes the
    sibling's proposal mass from the target distribution, and the correction
    is drawn from whatever residual remains once every sibling is rejected.
    """
    if not mode.greedy and rng is None:
        raise DomainError("sampling verification needs an rng")
    kids = proposal.children()
    accepted: list[int] = []
    accepted_nodes: list[int] = []
    discarded = []
    s = state
    cur = ROOT
    while True:
        p = target_next(target, s)
        nxt: Optional[int] = None
        if mode.greedy:
            best = argmax_token(p)
            for i in kids.get(cur, ()):
                if proposal.nodes[i].token == best:
                    nxt = i
                    break
            committed = best
        else:
            p = apply_temperature(p, mode.temperature)
            residual = p
            for i in kids.get(cur, ()):
                node = proposal.nodes[i]
                if _accepts(rng.random(), residual, node):
                    nxt = i
                    break
                residual = _residual(residual, _proposal_q(node, target.vocab_size))
            committed = proposal.nodes[nxt].token if nxt is not None else sample_token(residual, rng)
        entry = _discarded(p, _last(s), committed, harvest_top_k)
        if entry:
            discarded.append(entry)
        if nxt is None:
            correction = committed
            break
        accepted.append(committed)
        accepted_nodes.append(nxt)
        s = s.extend((committed,))
        cur = nxt
    return VerificationOutcome(
        accepted_tokens=tuple(accepted),
        correction_token=int(correction),
        target_calls=1,
        target_nodes_evaluated=len(proposal.nodes) + 1,
        accepted_nodes=tuple(accepted_nodes),
        discarded=tuple(discarded),
    )


def verify(target, state, proposal, mode=GREEDY, rng=None, harvest_top_k=0) -> VerificationOutcome:
    fn = verify_linear if proposal.structure is Structure.LINEAR else verify_tree
    return fn(target, state, proposal, mode, rng, harvest_top_k)


def ar_step(
    target: TableTargetModel,
    state: SequenceState,
    mode: VerifyMode = GREEDY,
    rng: Optional[np.random.Generator] = None,
) -> int:
    """One plain decoding step of the target."""
    p = target_next(target, state)
    if mode.greedy:
        return argmax_token(p)
    if rng is None:
        raise DomainError("sampling needs an rng")
    return sample_token(apply_temperature(p, mode.temperature), rng)
