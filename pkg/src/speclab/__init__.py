"""Speculative decoding lab: drafters, lossless verification, vision-relevance gating and a benchmark harness."""

__version__ = "0.1.0"
