"""Line-delimited JSON benchmark samples."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

CATEGORIES = (
    "general_vqa",
    "text_vqa",
    "image_captioning",
    "chart_vqa",
    "complex_reasoning",
    "multi_turn",
)


class DatasetError(ValueError):
    def __init__(self, line: int, field: str, reason: str) -> None:
        super().__init__(f"line {line}: field '{field}': {reason}")
        self.line = line
        self.field = field
        self.reason = reason


@dataclass(frozen=True)
class BenchSample:
    id: str
    category: str
    prompt_tokens: tuple[int, ...]
    vision_span: tuple[int, int]
    relevance_trace: Optional[tuple[float, ...]] = None
    max_new_tokens: int = 1024

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "id": self.id,
            "category": self.category,
            "prompt_tokens": list(self.prompt_tokens),
            "vision_span": list(self.vision_span),
            "max_new_tokens": self.max_new_tokens,
        }
        if self.relevance_trace is not None:
            d["relevance_trace"] = list(self.relevance_trace)
        return d


def _int(value, line: int, field: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise DatasetError(line, field, f"expected an integer, got {value!r}")
    return value


def parse_sample(record: Any, line: int, vocab_size: Optional[int] = None) -> BenchSample:
    if not isinstance(record, dict):
        raise DatasetError(line, "<record>", "expected a JSON object")
    for key in ("id", "category", "prompt_tokens", "vision_span"):
        if key not in record:
            raise DatasetError(line, key, "missing")
    unknown = set(record) - {"id", "category", "prompt_tokens", "vision_span", "relevance_trace", "max_new_tokens"}
    if unknown:
        raise DatasetError(line, sorted(unknown)[0], "unknown field")

    sid = record["id"]
    if not isinstance(sid, str) or not sid:
        raise DatasetError(line, "id", "expected a non-empty string")
    category = record["category"]
    if category not in CATEGORIES:
        raise DatasetError(line, "category", f"unknown category {category!r}")

    tokens = record["prompt_tokens"]
    if not isinstance(tokens, list):
        raise DatasetError(line, "prompt_tokens", "expected an integer array")
    prompt = tuple(_int(t, line, "prompt_tokens") for t in tokens)
    for t in prompt:
        if t < 0 or (vocab_size is not None and t >= vocab_size):
            raise DatasetError(line, "prompt_tokens", f"token {t} outside vocabulary")

    span = record["vision_span"]
    if not isinstance(span, list) or len(span) != 2:
        raise DatasetError(line, "vision_span", "expected [start, end)")
    start, end = (_int(v, line, "vision_span") for v in span)
    if not 0 <= start <= end <= len(prompt):
        raise DatasetError(line, "vision_span", f"[{start}, {end}) outside prompt of length {len(prompt)}")

    trace = record.get("relevance_trace")
    if trace is not None:
        if not isinstance(trace, list):
            raise DatasetError(line, "relevance_trace", "expected a real array")
        for v in trace:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0.0 <= v <= 1.0:
                raise DatasetError(line, "relevance_trace", f"value {v!r} not in [0, 1]")
        trace = tuple(float(v) for v in trace)

    max_new = _int(record.get("max_new_tokens", 1024), line, "max_new_tokens")
    if max_new < 1:
        raise DatasetError(line, "max_new_tokens", "must be at least 1")
    return BenchSample(sid, category, prompt, (start, end), trace, max_new)


def load_dataset(path, vocab_size: Optional[int] = None) -> list[BenchSample]:
    samples = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DatasetError(lineno, "<json>", exc.msg) from None
            sample = parse_sample(record, lineno, vocab_size)
            if sample.id in seen:
                raise DatasetError(lineno, "id", f"duplicate id {sample.id!r}")
            seen.add(sample.id)
            samples.append(sample)
    return samples


def write_dataset(samples, path) -> None:
    Path(path).write_text("".join(json.dumps(s.to_dict()) + "\n" for s in samples), encoding="utf-8")
