"""Deterministic table-driven target and draft models.

Every quantity is a pure function of the model seed and the queried state, so
any decoding run can be replayed exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import DomainError, SequenceState, check_token

_MASK64 = (1 << 64) - 1


def _mix64(x: int) -> int:
    # splitmix64 finalizer
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def hash_tokens(tokens, salt: int = 0) -> int:
    h = _mix64(salt)
    for t in tokens:
        h = _mix64(h ^ (int(t) + 1))
    return _mix64(h ^ len(tokens))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits)
    e = np.exp(z)
    return e / e.sum()


def argmax_token(d: np.ndarray) -> int:
    """Most probable token; ties go to the lowest id."""
    return int(np.argmax(d))


def apply_temperature(d: np.ndarray, temperature: float) -> np.ndarray:
    """Rescale a distribution's logits by ``1/temperature``; zero means argmax."""
    if temperature < 0:
        raise DomainError("temperature must be non-negative")
    if temperature == 0:
        out = np.zeros_like(d, dtype=float)
        out[argmax_token(d)] = 1.0
        return out
    if temperature == 1:
        return d
    with np.errstate(divide="ignore"):
        logits = np.log(d) / temperature
    return softmax(logits)


def sample_token(d: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw using one uniform from ``rng``."""
    cdf = np.cumsum(d)
    u = rng.random() * cdf[-1]
    idx = int(np.searchsorted(cdf, u, side="right"))
    if idx >= len(d) or d[idx] <= 0:
        # u landed on the rounding tail; take the last token with mass
        idx = int(np.flatnonzero(d > 0)[-1])
    return idx


@dataclass(eq=False)
class TableTargetModel:
    """Order-``k`` table model whose logits are also perturbed by the vision tokens.

    The mock cross-attention row is a softmax over prompt positions of seeded
    scores keyed on the recent context; ``vision_attention_bias`` shifts the
    scores of vision positions to make vision-heavy steps more or less common.
    """

    vocab_size: int = 64
    context_order: int = 3
    seed: int = 0
    vision_influence: float = 0.0
    logit_scale: float = 3.0
    attention_sharpness: float = 8.0
    vision_attention_bias: float = 1.0
    _dist_cache: dict = field(default_factory=dict, init=False, repr=False)
    _attn_cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.vocab_size < 2:
            raise DomainError("vocab_size must be at least 2")
        if self.context_order < 1:
            raise DomainError("context_order must be at least 1")
        if not 0.0 <= self.vision_influence <= 1.0:
            raise DomainError("vision_influence must lie in [0, 1]")

    def context_key(self, state: SequenceState) -> tuple[int, ...]:
        ctx = state.context
        return ctx[-self.context_order:] if ctx else ()

    def _rows(self, *key: int) -> np.ndarray:
        return np.random.default_rng([self.seed & _MASK64, *key]).standard_normal(self.vocab_size)

    def next_distribution(self, recent: tuple[int, ...], vision: tuple[int, ...]) -> np.ndarray:
        if self.vision_influence == 0:
            vision = ()
        key = (recent, vision)
        d = self._dist_cache.get(key)
        if d is None:
            for t in recent:
                check_token(t, self.vocab_size)
            for t in vision:
                check_token(t, self.vocab_size)
            ctx_h = hash_tokens(recent, salt=1)
            logits = self._rows(1, ctx_h)
            if vision:
                vis_h = hash_tokens(vision, salt=2)
                logits = logits + self.vision_influence * 2.0 * self._rows(2, vis_h, ctx_h)
            d = softmax(self.logit_scale * logits)
            d.setflags(write=False)
            self._dist_cache[key] = d
        return d

    def attention(self, recent: tuple[int, ...], prompt_len: int, vision_span: tuple[int, int]) -> np.ndarray:
        if prompt_len <= 0:
            raise DomainError("attention needs a non-empty prompt")
        key = (recent, prompt_len, vision_span)
        row = self._attn_cache.get(key)
        if row is None:
            ctx_h = hash_tokens(recent, salt=3)
            scores = self.attention_sharpness * np.random.default_rng(
                [self.seed & _MASK64, 3, ctx_h, prompt_len]).random(prompt_len)
            start, end = vision_span
            scores[start:end] += self.vision_attention_bias
            row = softmax(scores)
            row.setflags(write=False)
            self._attn_cache[key] = row
        return row


def target_next(model: TableTargetModel, state: SequenceState) -> np.ndarray:
    """Next-token distribution of the target at ``state``."""
    return model.next_distribution(model.context_key(state), state.vision_tokens)


def attention_row(model: TableTargetModel, state: SequenceState) -> np.ndarray:
    """Mock cross-attention of the current step over prompt positions."""
    return model.attention(model.context_key(state), len(state.prompt), state.vision_span)


@dataclass(eq=False)
class SyntheticDraftModel:
    """Target distribution mixed with a seeded random distribution.

    ``draft = (1 - eps) * target + eps * noise``, so the total-variation
    distance to the target never exceeds ``eps``. If ``relevance_epsilon`` is
    set, states whose vision relevance reaches ``relevance_cutoff`` use it
    instead of ``noise_epsilon``.
    """

    base: TableTargetModel
    noise_epsilon: float = 0.0
    noise_seed: int = 0
    relevance_epsilon: Optional[float] = None
    relevance_cutoff: float = 0.35
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self) -> None:
        for eps in (self.noise_epsilon, self.relevance_epsilon):
            if eps is not None and not 0.0 <= eps <= 1.0:
                raise DomainError("draft noise must lie in [0, 1]")

    @property
    def vocab_size(self) -> int:
        return self.base.vocab_size

    def epsilon_at(self, state: SequenceState) -> float:
        if self.relevance_epsilon is None or state.num_vision == 0:
            return self.noise_epsilon
        start, end = state.vision_span
        relevance = float(np.max(attention_row(self.base, state)[start:end]))
        return self.relevance_epsilon if relevance >= self.relevance_cutoff else self.noise_epsilon

    def perturbation(self, state: SequenceState) -> np.ndarray:
        recent = self.base.context_key(state)
        key = (recent, state.vision_tokens)
        noise = self._cache.get(key)
        if noise is None:
            h = hash_tokens(recent + (-1,) + state.vision_tokens, salt=4)
            noise = np.random.default_rng([self.noise_seed & _MASK64, 4, h]).dirichlet(
                np.ones(self.vocab_size))
            noise.setflags(write=False)
            self._cache[key] = noise
        return noise


def draft_next(model: SyntheticDraftModel, state: SequenceState) -> np.ndarray:
    """Draft distribution at ``state``."""
    target = target_next(model.base, state)
    eps = model.epsilon_at(state)
    if eps == 0:
        return target
    if eps == 1:
        return model.perturbation(state)
    return (1.0 - eps) * target + eps * model.perturbation(state)
