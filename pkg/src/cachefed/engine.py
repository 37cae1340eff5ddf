"""Sequential event-driven simulation of a cache federation.

The federation behaves like one logical cache behind a redirector with
perfect knowledge: a file lives on at most one node, and a request is a
miss exactly when no active node holds it.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

from .core import (ORIGIN_DIRECT, AccessEvent, CacheNodeSpec, EvictionPolicy, FederationConfig,
                   FileId, SimOutcome, validate_config)
from .policies import (_node_prefix, evict_for, eviction_key, select_node, watermark_bytes)


class NodeAction(str, Enum):
    ACTIVATE = "activate"
    DEACTIVATE = "deactivate"


@dataclass(frozen=True)
class NodeLifecycleEvent:
    node_id: str
    action: NodeAction
    at: float


class CachedFile:
    __slots__ = ("size", "last_access", "inserted", "gen")

    def __init__(self, size: int, at: float, gen: int):
        self.size = size
        self.last_access = at
        self.inserted = at
        self.gen = gen

    def __repr__(self):
        return (f"CachedFile(size={self.size}, last_access={self.last_access}, "
                f"inserted={self.inserted})")


class NodeState:
    __slots__ = ("spec", "active", "used", "files", "heap", "high_limit", "low_limit",
                 "hash_prefix")

    def __init__(self, spec: CacheNodeSpec, high: float, low: float):
        self.spec = spec
        self.active = False
        self.used = 0
        self.files: dict[FileId, CachedFile] = {}
        # (eviction key, file id, generation); stale entries are skipped lazily
        self.heap: list[tuple[float, FileId, int]] = []
        self.high_limit = watermark_bytes(high, spec.capacity_bytes)
        self.low_limit = watermark_bytes(low, spec.capacity_bytes)
        self.hash_prefix = _node_prefix(spec.node_id)

    @property
    def node_id(self) -> str:
        return self.spec.node_id

    @property
    def capacity(self) -> int:
        return self.spec.capacity_bytes

    @property
    def free_bytes(self) -> int:
        return self.spec.capacity_bytes - self.used


class FederationState:
    """Mutable per-run state: node caches plus the global residency index."""

    def __init__(self, config: FederationConfig):
        self.config = config
        self.nodes: dict[str, NodeState] = {
            spec.node_id: NodeState(spec, config.high_watermark, config.low_watermark)
            for spec in sorted(config.nodes, key=lambda n: n.node_id)
        }
        self.residency: dict[FileId, str] = {}
        self.time = -math.inf
        self._gen = 0
        self._active: Optional[list[NodeState]] = None

    def active_nodes(self) -> list[NodeState]:
        if self._active is None:
            self._active = [n for n in self.nodes.values() if n.active]
        return self._active

    def _next_gen(self) -> int:
        self._gen += 1
        return self._gen

    def _push(self, node: NodeState, fid: FileId, entry: CachedFile) -> None:
        heapq.heappush(node.heap, (eviction_key(entry, self.config.eviction_policy), fid, entry.gen))

    def touch(self, node: NodeState, fid: FileId, at: float) -> None:
        entry = node.files[fid]
        entry.last_access = at
        if self.config.eviction_policy == EvictionPolicy.LRU:
            entry.gen = self._next_gen()
            self._push(node, fid, entry)
            self._maybe_compact(node)

    def insert(self, node: NodeState, fid: FileId, size: int, at: float) -> None:
        entry = CachedFile(size, at, self._next_gen())
        node.files[fid] = entry
        node.used += size
        self.residency[fid] = node.node_id
        self._push(node, fid, entry)
        self._maybe_compact(node)

    def remove(self, node: NodeState, fid: FileId) -> int:
        entry = node.files.pop(fid)
        node.used -= entry.size
        del self.residency[fid]
        return entry.size

    def _maybe_compact(self, node: NodeState) -> None:
        if len(node.heap) > 2 * len(node.files) + 64:
            policy = self.config.eviction_policy
            node.heap = [(eviction_key(e, policy), fid, e.gen) for fid, e in node.files.items()]
            heapq.heapify(node.heap)

    def set_active(self, node_id: str, active: bool) -> None:
        node = self.nodes[node_id]
        if node.active == active:
            return
        node.active = active
        self._active = None
        if not active:
            for fid in node.files:
                del self.residency[fid]
            node.files.clear()
            node.heap.clear()
            node.used = 0

    def check_invariants(self) -> None:
        seen: dict[FileId, str] = {}
        for node in self.nodes.values():
            assert node.used == sum(e.size for e in node.files.values()), node.node_id
            assert node.used <= node.capacity, node.node_id
            if not node.active:
                assert not node.files, node.node_id
            for fid in node.files:
                assert fid not in seen, fid
                seen[fid] = node.node_id
        assert seen == self.residency

    def snapshot(self) -> dict:
        return {
            nid: {
                "active": n.active,
                "used": n.used,
                "files": {fid: (e.size, e.last_access, e.inserted)
                          for fid, e in sorted(n.files.items())},
            }
            for nid, n in self.nodes.items()
        }


def lifecycle_events(config: FederationConfig) -> list[NodeLifecycleEvent]:
    """Activation/deactivation events implied by each node's active window."""
    events = []
    for spec in config.nodes:
        events.append(NodeLifecycleEvent(spec.node_id, NodeAction.ACTIVATE, spec.active_from))
        if spec.active_to is not None:
            events.append(NodeLifecycleEvent(spec.node_id, NodeAction.DEACTIVATE, spec.active_to))
    events.sort(key=lambda ev: (ev.at, ev.node_id, NodeAction(ev.action).value))
    return events


def apply_node_event(state: FederationState, ev: NodeLifecycleEvent) -> FederationState:
    """Activate (joins empty) or deactivate (drops its files). Both are idempotent."""
    if ev.node_id not in state.nodes:
        raise KeyError(f"unknown node: {ev.node_id}")
    state.set_active(ev.node_id, NodeAction(ev.action) == NodeAction.ACTIVATE)
    return state


def step(state: FederationState, event: AccessEvent,
         config: FederationConfig) -> tuple[FederationState, SimOutcome]:
    """Process one access in place and return ``(state, outcome)``."""
    if event.timestamp < state.time:
        raise ValueError(f"trace not time-ordered: {event.timestamp} after {state.time}")
    state.time = event.timestamp
    fid = event.file
    size = event.size_bytes

    holder = state.residency.get(fid)
    if holder is not None:
        node = state.nodes[holder]
        state.touch(node, fid, event.timestamp)
        return state, SimOutcome(event, holder, True, 0, size)

    decision = select_node(state, event, config)
    if decision is None:
        return state, SimOutcome(event, ORIGIN_DIRECT, False, size, 0, bypassed=True)
    node = state.nodes[decision.node_id]
    if size > node.low_limit:
        return state, SimOutcome(event, node.node_id, False, size, 0, bypassed=True)

    victims = evict_for(state, node.node_id, size, config)
    for victim, _ in victims:
        state.remove(node, victim)
    state.insert(node, fid, size, event.timestamp)
    return state, SimOutcome(event, node.node_id, False, size, 0, evicted=tuple(victims))


class Simulator:
    """Incremental driver: feed events one at a time and inspect ``state``."""

    def __init__(self, config: FederationConfig,
                 extra_lifecycle: Iterable[NodeLifecycleEvent] = ()):
        self.config = validate_config(config)
        self.state = FederationState(self.config)
        pending = lifecycle_events(self.config) + list(extra_lifecycle)
        for ev in pending:
            if ev.node_id not in self.state.nodes:
                raise KeyError(f"lifecycle event for unknown node: {ev.node_id}")
        pending.sort(key=lambda ev: (ev.at, ev.node_id, NodeAction(ev.action).value))
        self._pending = pending
        self._next = 0

    def advance_to(self, timestamp: float) -> None:
        """Apply every lifecycle event at or before ``timestamp``."""
        while self._next < len(self._pending) and self._pending[self._next].at <= timestamp:
            apply_node_event(self.state, self._pending[self._next])
            self._next += 1

    def feed(self, event: AccessEvent) -> SimOutcome:
        self.advance_to(event.timestamp)
        _, outcome = step(self.state, event, self.config)
        return outcome

    def run(self, trace: Iterable[AccessEvent]) -> list[SimOutcome]:
        return [self.feed(e) for e in trace]


def simulate(trace: Iterable[AccessEvent], config: FederationConfig,
             extra_lifecycle: Iterable[NodeLifecycleEvent] = ()) -> list[SimOutcome]:
    """Replay ``trace`` against a fresh federation and return one outcome per event.

    Lifecycle events at the same timestamp as an access are applied first.
    """
    return Simulator(config, extra_lifecycle).run(trace)
