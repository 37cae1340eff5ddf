"""Synthetic access traces with Zipf file popularity and log-normal file sizes.

Randomness comes exclusively from ``numpy.random.Generator(PCG64(seed))``.
PCG64 (PCG XSL RR 128/64) is a fixed, published algorithm whose output
stream numpy guarantees to be stable across platforms and releases, so a
given seed always yields the same trace.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, fields
from typing import Any, Mapping

import numpy as np

from .core import SECONDS_PER_DAY, AccessEvent, ValidationError


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@functools.lru_cache(maxsize=32)
def _zipf_cdf(exponent: float, n: int) -> np.ndarray:
    ranks = np.arange(1, n + 1, dtype=np.float64)
    weights = ranks ** -exponent
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    cdf[-1] = 1.0
    cdf.setflags(write=False)
    return cdf


def zipf_probabilities(exponent: float, n: int) -> np.ndarray:
    """Closed-form probabilities ``k**-s / sum(j**-s)`` for ranks 1..n."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    weights = np.arange(1, n + 1, dtype=np.float64) ** -float(exponent)
    return weights / weights.sum()


def zipf_sample(exponent: float, n: int, rng: np.random.Generator, size=None):
    """Draw Zipf ranks in ``[1, n]`` by inverse-CDF lookup.

    Parameters
    ----------
    exponent : float
        Skew ``s >= 0``; ``s = 0`` is uniform.
    n : int
        Number of ranks.
    rng : numpy.random.Generator
        Advanced by one uniform draw per sample.
    size : int, optional
        If given, return an int64 array of that many ranks.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if exponent < 0:
        raise ValueError(f"exponent must be >= 0, got {exponent}")
    cdf = _zipf_cdf(float(exponent), int(n))
    u = rng.random(size)
    ranks = np.searchsorted(cdf, u, side="right") + 1
    if size is None:
        return int(ranks)
    return ranks.astype(np.int64)


@dataclass(frozen=True)
class WorkloadSpec:
    n_files: int
    zipf_exponent: float
    mean_file_size_bytes: int
    size_sigma: float
    requests_per_day: int
    n_days: int
    start_timestamp: float = 0.0
    seed: int = 0
    n_clients: int = 16
    file_prefix: str = "f"

    def validate(self) -> "WorkloadSpec":
        errors = []
        for name in ("n_files", "mean_file_size_bytes", "requests_per_day", "n_days", "n_clients"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
                errors.append(f"{name} must be a positive integer, got {value!r}")
        for name in ("zipf_exponent", "size_sigma"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not value >= 0:
                errors.append(f"{name} must be a non-negative number, got {value!r}")
        if not isinstance(self.start_timestamp, (int, float)) or not np.isfinite(self.start_timestamp):
            errors.append(f"start_timestamp must be finite, got {self.start_timestamp!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            errors.append(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not isinstance(self.file_prefix, str) or not self.file_prefix:
            errors.append("file_prefix must be a non-empty string")
        if errors:
            raise ValidationError(errors)
        return self

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "WorkloadSpec":
        if not isinstance(doc, Mapping):
            raise ValidationError(["workload spec must be an object"])
        known = {f.name for f in fields(cls)}
        errors = [f"unknown workload key: {k}" for k in sorted(set(doc) - known)]
        required = {"n_files", "zipf_exponent", "mean_file_size_bytes", "size_sigma",
                    "requests_per_day", "n_days"}
        errors += [f"missing workload key: {k}" for k in sorted(required - set(doc))]
        if errors:
            raise ValidationError(errors)
        return cls(**doc).validate()


def file_sizes(spec: WorkloadSpec, rng: np.random.Generator) -> np.ndarray:
    # log-normal with median mean_file_size_bytes; at least one byte
    z = rng.standard_normal(spec.n_files)
    sizes = np.rint(spec.mean_file_size_bytes * np.exp(spec.size_sigma * z))
    return np.maximum(sizes, 1).astype(np.int64)


def generate_trace(spec: WorkloadSpec) -> list[AccessEvent]:
    """Generate ``n_days * requests_per_day`` time-ordered access events.

    File ``<prefix><rank>`` has popularity rank ``rank``; its size is drawn
    once per file. Requests within a day are evenly spaced over the day.
    """
    spec.validate()
    rng = make_rng(spec.seed)
    sizes = file_sizes(spec, rng)
    total = spec.n_days * spec.requests_per_day
    ranks = zipf_sample(spec.zipf_exponent, spec.n_files, rng, size=total)
    clients = rng.integers(0, spec.n_clients, size=total)

    width = len(str(spec.n_files))
    names = [f"{spec.file_prefix}{r:0{width}d}" for r in range(1, spec.n_files + 1)]
    step = SECONDS_PER_DAY / spec.requests_per_day
    start = float(spec.start_timestamp)

    events = []
    i = 0
    for day in range(spec.n_days):
        day_start = start + day * SECONDS_PER_DAY
        for j in range(spec.requests_per_day):
            r = int(ranks[i]) - 1
            events.append(AccessEvent(
                timestamp=day_start + j * step,
                file=names[r],
                size_bytes=int(sizes[r]),
                client=f"client{int(clients[i])}",
            ))
            i += 1
    return events
