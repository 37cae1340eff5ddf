"""Placement and eviction strategies.

Every policy here is a pure function of the federation state, the event
and the config. The only source of pseudo-randomness is ``placement_hash``,
FNV-1a 64 followed by the MurmurHash3 ``fmix64`` finalizer (all arithmetic
mod 2**64)::

    h = 0xcbf29ce484222325
    for each byte b:  h = (h ^ b) * 0x100000001b3
    h ^= h >> 33;  h *= 0xff51afd7ed558ccd
    h ^= h >> 33;  h *= 0xc4ceb9fe1a85ec53
    h ^= h >> 33

The finalizer matters: raw FNV-1a leaves the high bits badly mixed for
short, similar keys such as ``file0001``/``file0002``.

Rendezvous placement hashes ``node_id.utf8 + b"\\x00" + file_id.utf8`` and
maps it to ``u = h / 2**64``; node capacity ``w`` weights the score
``ln(u) / w`` and the highest score wins. Random-weighted placement hashes
``seed.to_bytes(8, "little") + b"\\x00" + file_id.utf8`` and picks the node
whose cumulative free-byte weight first exceeds ``floor(h * total / 2**64)``.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Optional

from .core import AccessEvent, EvictionPolicy, FederationConfig, FileId, PlacementPolicy

if TYPE_CHECKING:
    from .engine import FederationState

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK = 2**64 - 1


def fnv1a64(data: bytes, h: int = FNV_OFFSET) -> int:
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _MASK
    return h


def fmix64(h: int) -> int:
    h ^= h >> 33
    h = (h * 0xFF51AFD7ED558CCD) & _MASK
    h ^= h >> 33
    h = (h * 0xC4CEB9FE1A85EC53) & _MASK
    h ^= h >> 33
    return h


def placement_hash(data: bytes, h: int = FNV_OFFSET) -> int:
    return fmix64(fnv1a64(data, h))


def watermark_bytes(fraction: float, capacity: int) -> int:
    """Largest byte count not exceeding ``fraction * capacity``.

    The fraction is taken as the decimal it prints as (0.95 means 19/20,
    not the nearest binary double), then the product is floored exactly.
    """
    return math.floor(Fraction(repr(float(fraction))) * capacity)


@dataclass(frozen=True)
class PlacementDecision:
    node_id: str
    policy_name: str
    score: float


def select_fill_first(state: "FederationState", event: AccessEvent) -> Optional[PlacementDecision]:
    """Active node with the most free bytes; ties go to the smallest node_id."""
    best = None
    best_free = -1
    for node in state.active_nodes():
        free = node.free_bytes
        if free > best_free:
            best, best_free = node, free
    if best is None:
        return None
    return PlacementDecision(best.node_id, PlacementPolicy.FILL_FIRST.value, float(best_free))


def _node_prefix(node_id: str) -> int:
    return fnv1a64(node_id.encode("utf-8") + b"\x00")


def rendezvous_score(node_id: str, file_id: FileId, weight: float, prefix: Optional[int] = None) -> float:
    h = placement_hash(file_id.encode("utf-8"), _node_prefix(node_id) if prefix is None else prefix)
    if h == 0:
        return -math.inf
    return math.log(h / 2**64) / weight


def select_rendezvous(state: "FederationState", event: AccessEvent) -> Optional[PlacementDecision]:
    """Capacity-weighted highest-random-weight choice among active nodes."""
    nodes = state.active_nodes()
    if not nodes:
        return None
    total = sum(n.capacity for n in nodes)
    best = None
    best_score = -math.inf
    for node in nodes:
        score = rendezvous_score(node.node_id, event.file, node.capacity / total, node.hash_prefix)
        if best is None or score > best_score:
            best, best_score = node, score
    return PlacementDecision(best.node_id, PlacementPolicy.RENDEZVOUS_HASH.value, best_score)


def select_random_weighted(state: "FederationState", event: AccessEvent,
                           seed: int) -> Optional[PlacementDecision]:
    """Pick a node with probability proportional to its free bytes.

    Falls back to capacity weights when every active node is full.
    """
    nodes = state.active_nodes()
    if not nodes:
        return None
    weights = [n.free_bytes for n in nodes]
    total = sum(weights)
    if total == 0:
        weights = [n.capacity for n in nodes]
        total = sum(weights)
    h = placement_hash(seed.to_bytes(8, "little") + b"\x00" + event.file.encode("utf-8"))
    target = (h * total) >> 64
    cum = 0
    for node, w in zip(nodes, weights):
        cum += w
        if cum > target:
            return PlacementDecision(node.node_id, PlacementPolicy.RANDOM_WEIGHTED.value,
                                     h / 2**64)
    raise AssertionError("unreachable: target < total")


def select_node(state: "FederationState", event: AccessEvent,
                config: FederationConfig) -> Optional[PlacementDecision]:
    policy = config.placement_policy
    if policy == PlacementPolicy.FILL_FIRST:
        return select_fill_first(state, event)
    if policy == PlacementPolicy.RENDEZVOUS_HASH:
        return select_rendezvous(state, event)
    if policy == PlacementPolicy.RANDOM_WEIGHTED:
        return select_random_weighted(state, event, config.seed)
    raise ValueError(f"unknown placement policy: {policy}")


def evict_for(state: "FederationState", node_id: str, needed_bytes: int,
              config: FederationConfig) -> list[tuple[FileId, int]]:
    """Files to purge from ``node_id`` before inserting ``needed_bytes``.

    Nothing is evicted while ``used + needed`` stays within the high
    watermark. Otherwise files go in LRU (or FIFO) order, ties by FileId,
    until ``used + needed`` fits under the low watermark. State is not
    modified.
    """
    node = state.nodes[node_id]
    used = node.used
    if used + needed_bytes <= node.high_limit:
        return []
    victims = []
    heap = list(node.heap)
    files = node.files
    while used + needed_bytes > node.low_limit and heap:
        key, fid, gen = heapq.heappop(heap)
        entry = files.get(fid)
        if entry is None or entry.gen != gen:
            continue
        victims.append((fid, entry.size))
        used -= entry.size
    return victims


def eviction_key(entry, policy: EvictionPolicy) -> float:
    return entry.last_access if policy == EvictionPolicy.LRU else entry.inserted
