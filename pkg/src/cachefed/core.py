"""Domain types shared across the simulator, plus federation config validation.

All byte quantities are plain integers. ``TB`` and ``PB`` in reports are
decimal units (10**12 and 10**15 bytes).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Mapping, Optional

TB = 10**12
PB = 10**15
SECONDS_PER_DAY = 86400

ORIGIN_DIRECT = "origin-direct"

DEFAULT_HIGH_WATERMARK = 0.95
DEFAULT_LOW_WATERMARK = 0.90

FileId = str


class ValidationError(ValueError):
    """Raised when a config or spec has one or more violations.

    ``errors`` holds every violation found, not just the first.
    """

    def __init__(self, errors: Iterable[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class PlacementPolicy(str, Enum):
    FILL_FIRST = "fill-first"
    RENDEZVOUS_HASH = "rendezvous-hash"
    RANDOM_WEIGHTED = "random-weighted"


class EvictionPolicy(str, Enum):
    LRU = "lru"
    FIFO = "fifo"


@dataclass(frozen=True)
class AccessEvent:
    """One whole-file read request."""

    timestamp: float
    file: FileId
    size_bytes: int
    client: str = ""
    observed_node: Optional[str] = None
    observed_hit: Optional[bool] = None

    def __post_init__(self):
        if not isinstance(self.timestamp, float):
            object.__setattr__(self, "timestamp", float(self.timestamp))
        if not math.isfinite(self.timestamp):
            raise ValueError(f"timestamp must be finite, got {self.timestamp!r}")
        if not self.file:
            raise ValueError("file id must be non-empty")
        if self.size_bytes < 0:
            raise ValueError(f"negative size: {self.size_bytes}")


@dataclass(frozen=True)
class CacheNodeSpec:
    node_id: str
    capacity_bytes: int
    active_from: float = 0.0
    active_to: Optional[float] = None


@dataclass(frozen=True)
class FederationConfig:
    nodes: tuple[CacheNodeSpec, ...]
    placement_policy: PlacementPolicy = PlacementPolicy.FILL_FIRST
    eviction_policy: EvictionPolicy = EvictionPolicy.LRU
    high_watermark: Optional[float] = None
    low_watermark: Optional[float] = None
    seed: int = 0

    def node(self, node_id: str) -> CacheNodeSpec:
        for spec in self.nodes:
            if spec.node_id == node_id:
                return spec
        raise KeyError(node_id)


@dataclass(frozen=True)
class SimOutcome:
    event: AccessEvent
    served_by: str
    is_hit: bool
    origin_bytes: int
    cache_bytes: int
    evicted: tuple[tuple[FileId, int], ...] = ()
    bypassed: bool = False


def _check_fraction(name: str, value: Any, errors: list[str]) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append(f"{name} must be a number, got {value!r}")
    elif not (0.0 < value <= 1.0):
        errors.append(f"{name} must be in (0, 1], got {value!r}")


def validate_config(config: FederationConfig) -> FederationConfig:
    """Validate and normalize a federation config.

    Nodes are sorted by ``node_id`` and missing watermarks get their
    defaults (0.95 high, 0.90 low). Policy names given as strings are
    converted to their enum members.

    Raises
    ------
    ValidationError
        Carrying the complete list of violations.
    """
    errors: list[str] = []
    nodes = tuple(config.nodes)
    if not nodes:
        errors.append("empty node list")

    seen: set[str] = set()
    for spec in nodes:
        if not isinstance(spec.node_id, str) or not spec.node_id:
            errors.append(f"node_id must be a non-empty string, got {spec.node_id!r}")
        elif spec.node_id == ORIGIN_DIRECT:
            errors.append(f"node_id {ORIGIN_DIRECT!r} is reserved")
        if spec.node_id in seen:
            errors.append(f"duplicate node_id: {spec.node_id}")
        seen.add(spec.node_id)
        cap = spec.capacity_bytes
        if isinstance(cap, bool) or not isinstance(cap, int) or cap <= 0:
            errors.append(f"non-positive capacity for node {spec.node_id}: {cap!r}")
        if not isinstance(spec.active_from, (int, float)) or not math.isfinite(spec.active_from):
            errors.append(f"active_from must be a finite timestamp for node {spec.node_id}")
        elif spec.active_to is not None and not spec.active_from < spec.active_to:
            errors.append(
                f"active_from must precede active_to for node {spec.node_id}: "
                f"{spec.active_from} >= {spec.active_to}"
            )

    placement = config.placement_policy
    try:
        placement = PlacementPolicy(placement)
    except ValueError:
        errors.append(f"unknown placement_policy: {placement}")
    eviction = config.eviction_policy
    try:
        eviction = EvictionPolicy(eviction)
    except ValueError:
        errors.append(f"unknown eviction_policy: {eviction}")

    high = DEFAULT_HIGH_WATERMARK if config.high_watermark is None else config.high_watermark
    low = DEFAULT_LOW_WATERMARK if config.low_watermark is None else config.low_watermark
    n_before = len(errors)
    _check_fraction("high_watermark", high, errors)
    _check_fraction("low_watermark", low, errors)
    if len(errors) == n_before and low > high:
        errors.append(f"low_watermark {low} exceeds high_watermark {high}")

    seed = config.seed
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        errors.append(f"seed must be an unsigned 64-bit integer, got {seed!r}")

    if errors:
        raise ValidationError(errors)

    return replace(
        config,
        nodes=tuple(
            replace(n, active_from=float(n.active_from),
                    active_to=None if n.active_to is None else float(n.active_to))
            for n in sorted(nodes, key=lambda n: n.node_id)
        ),
        placement_policy=placement,
        eviction_policy=eviction,
        high_watermark=float(high),
        low_watermark=float(low),
    )


_CONFIG_KEYS = {"nodes", "placement_policy", "eviction_policy", "high_watermark",
                "low_watermark", "seed"}
_NODE_KEYS = {"node_id", "capacity_bytes", "active_from", "active_to"}


def config_from_dict(doc: Mapping[str, Any]) -> FederationConfig:
    """Build and validate a config from a JSON-compatible mapping."""
    if not isinstance(doc, Mapping):
        raise ValidationError([f"config must be an object, got {type(doc).__name__}"])
    errors = [f"unknown config key: {k}" for k in sorted(set(doc) - _CONFIG_KEYS)]
    raw_nodes = doc.get("nodes", [])
    nodes = []
    if not isinstance(raw_nodes, list):
        errors.append("nodes must be a list")
        raw_nodes = []
    for i, raw in enumerate(raw_nodes):
        if not isinstance(raw, Mapping):
            errors.append(f"nodes[{i}] must be an object")
            continue
        errors.extend(f"unknown key in nodes[{i}]: {k}" for k in sorted(set(raw) - _NODE_KEYS))
        if "node_id" not in raw or "capacity_bytes" not in raw:
            errors.append(f"nodes[{i}] requires node_id and capacity_bytes")
            continue
        nodes.append(CacheNodeSpec(
            node_id=raw["node_id"],
            capacity_bytes=raw["capacity_bytes"],
            active_from=raw.get("active_from", 0.0),
            active_to=raw.get("active_to"),
        ))
    config = FederationConfig(
        nodes=tuple(nodes),
        placement_policy=doc.get("placement_policy", PlacementPolicy.FILL_FIRST),
        eviction_policy=doc.get("eviction_policy", EvictionPolicy.LRU),
        high_watermark=doc.get("high_watermark"),
        low_watermark=doc.get("low_watermark"),
        seed=doc.get("seed", 0),
    )
    try:
        validated = validate_config(config)
    except ValidationError as exc:
        errors.extend(exc.errors)
    if errors:
        raise ValidationError(errors)
    return validated


def config_to_dict(config: FederationConfig) -> dict[str, Any]:
    return {
        "nodes": [
            {"node_id": n.node_id, "capacity_bytes": n.capacity_bytes,
             "active_from": n.active_from, "active_to": n.active_to}
            for n in config.nodes
        ],
        "placement_policy": PlacementPolicy(config.placement_policy).value,
        "eviction_policy": EvictionPolicy(config.eviction_policy).value,
        "high_watermark": config.high_watermark,
        "low_watermark": config.low_watermark,
        "seed": config.seed,
    }
