"""Synthetic benchmark fixtures shipped with the package."""

from __future__ import annotations

from importlib import resources
from typing import Optional

import numpy as np

from .dataset import CATEGORIES, BenchSample, load_dataset


def synthetic_dataset(per_category: int = 1, seed: int = 0, vocab_size: int = 64,
                      max_new_tokens: int = 64, categories=CATEGORIES,
                      trace_len: Optional[int] = None) -> list[BenchSample]:
    """Prompts shaped ``[system | vision block | question with a repeated phrase]``."""
    rng = np.random.default_rng(seed)
    samples = []
    for cat in categories:
        for k in range(per_category):
            system = rng.integers(0, vocab_size, int(rng.integers(2, 6)))
            vision = rng.integers(0, vocab_size, int(rng.integers(8, 17)))
            phrase = rng.integers(0, vocab_size, int(rng.integers(4, 9)))
            filler = rng.integers(0, vocab_size, int(rng.integers(2, 8)))
            question = np.concatenate([phrase, filler, phrase[: int(rng.integers(2, len(phrase) + 1))]])
            prompt = [int(t) for t in np.concatenate([system, vision, question])]
            start = len(system)
            trace = None
            if trace_len:
                trace = tuple(round(float(v), 4) for v in rng.beta(0.6, 1.2, trace_len))
            samples.append(BenchSample(
                id=f"{cat}-{k:03d}",
                category=cat,
                prompt_tokens=tuple(prompt),
                vision_span=(start, start + len(vision)),
                relevance_trace=trace,
                max_new_tokens=max_new_tokens,
            ))
    return samples


def fixture_path(name: str):
    return resources.files("speclab") / "fixtures" / name


def load_fixture(name: str, vocab_size: Optional[int] = None) -> list[BenchSample]:
    with resources.as_file(fixture_path(name)) as path:
        return load_dataset(path, vocab_size)
