import numpy as np
import pytest

from speclab.core import SequenceState
from speclab.drafters import (
    LookaheadDrafter,
    ModelLinearDrafter,
    ModelTreeDrafter,
    PldDrafter,
    RecyclingDrafter,
    SamDrafter,
)
from speclab.model import SyntheticDraftModel, TableTargetModel


def repetitive_prompt(rng, vocab, length):
    """Random prompt in which a few short phrases recur, so retrieval drafters get hits."""
    phrases = [list(rng.integers(0, vocab, int(rng.integers(2, 7)))) for _ in range(3)]
    out = []
    while len(out) < length:
        if rng.random() < 0.6:
            out.extend(phrases[int(rng.integers(0, 3))])
        else:
            out.append(int(rng.integers(0, vocab)))
    return [int(t) for t in out[:length]]


def random_case(rng, vocab=64):
    """A (target, state) pair with a random model seed, context order and vision span."""
    target = TableTargetModel(
        vocab_size=vocab,
        context_order=int(rng.integers(1, 4)),
        seed=int(rng.integers(0, 2**31)),
        vision_influence=float(rng.choice([0.0, 0.5, 1.0])),
    )
    prompt = repetitive_prompt(rng, vocab, int(rng.integers(8, 40)))
    start = int(rng.integers(0, len(prompt) // 2))
    end = int(rng.integers(start, len(prompt)))
    return target, SequenceState(tuple(prompt), (), (start, end))


def all_drafters(target, epsilon=0.2, noise_seed=0):
    draft = SyntheticDraftModel(target, epsilon, noise_seed)
    return [
        PldDrafter(),
        SamDrafter(),
        LookaheadDrafter(),
        RecyclingDrafter(),
        ModelLinearDrafter(draft, K=5),
        ModelTreeDrafter(draft),
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_target():
    return TableTargetModel(vocab_size=8, context_order=2, seed=3, vision_influence=0.5, logit_scale=1.0)


@pytest.fixture
def small_state():
    return SequenceState((1, 2, 3, 4, 5, 6), (), (1, 4))
