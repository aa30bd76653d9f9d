"""In-process publish/subscribe broker.

Topic filters use `+` for one level and a trailing `#` for the rest, slash
separated. Publishes never block on consumers: each subscription owns a
bounded queue and a subscriber that falls behind is disconnected rather
than allowed to stall the simulation. Retained envelopes give late joiners
the current grid state immediately on subscribe.
"""

from __future__ import annotations

import logging
import queue
import threading
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

logger = logging.getLogger(__name__)

DEFAULT_QUEUE_BOUND = 1024


class FilterError(ValueError):
    """Malformed subscription filter."""


class PublishError(ValueError):
    """Malformed envelope (wildcards in topic, non-monotonic seq)."""


@dataclass
class Envelope:
    topic: str
    seq: int
    wall_ts: float
    sim_ts: float
    retain: bool
    payload: dict
    publisher: str = ""

    def to_doc(self) -> dict:
        return {
            "topic": self.topic,
            "seq": self.seq,
            "wall_ts": self.wall_ts,
            "sim_ts": self.sim_ts,
            "retain": self.retain,
            "payload": self.payload,
        }

    @classmethod
    def from_doc(cls, doc: dict, publisher: str = "") -> "Envelope":
        return cls(
            topic=str(doc["topic"]),
            seq=int(doc.get("seq", 0)),
            wall_ts=float(doc.get("wall_ts", 0.0)),
            sim_ts=float(doc.get("sim_ts", 0.0)),
            retain=bool(doc.get("retain", False)),
            payload=doc.get("payload") or {},
            publisher=publisher,
        )


def validate_filter(pattern: str) -> None:
    if not pattern:
        raise FilterError("empty filter")
    levels = pattern.split("/")
    for i, level in enumerate(levels):
        if level == "#":
            if i != len(levels) - 1:
                raise FilterError(f"'#' must be the final level: {pattern!r}")
        elif "#" in level or ("+" in level and level != "+"):
            raise FilterError(f"wildcard must occupy a whole level: {pattern!r}")


def validate_topic(topic: str) -> None:
    if not topic:
        raise PublishError("empty topic")
    if "#" in topic or "+" in topic:
        raise PublishError(f"published topic may not contain wildcards: {topic!r}")


def topic_matches(pattern: str, topic: str) -> bool:
    """True iff the topic satisfies the filter under +/# rules."""
    p_levels = pattern.split("/")
    t_levels = topic.split("/")
    for i, p in enumerate(p_levels):
        if p == "#":
            return True
        if i >= len(t_levels):
            return False
        if p != "+" and p != t_levels[i]:
            return False
    return len(t_levels) == len(p_levels)


class Subscription:
    def __init__(self, client: str, pattern: str, bound: int):
        self.client = client
        self.pattern = pattern
        self.queue: "queue.Queue[Envelope]" = queue.Queue(maxsize=bound)
        self.alive = True

    def get(self, timeout: Optional[float] = None) -> Optional[Envelope]:
        """Next envelope, or None on timeout/after disconnect drained."""
        try:
            return self.queue.get(timeout=timeout) if timeout is not None else self.queue.get_nowait()
        except queue.Empty:
            return None

    def drain(self) -> list[Envelope]:
        out = []
        while True:
            try:
                out.append(self.queue.get_nowait())
            except queue.Empty:
                return out

    def __iter__(self) -> Iterator[Envelope]:
        while True:
            env = self.get(timeout=0.05)
            if env is not None:
                yield env
            elif not self.alive:
                return


class Broker:
    """Thread-safe topic broker with retained last values per topic."""

    def __init__(self, queue_bound: int = DEFAULT_QUEUE_BOUND,
                 on_overflow: Optional[Callable[[Subscription], None]] = None):
        self._lock = threading.RLock()
        self._bound = queue_bound
        self._subs: list[Subscription] = []
        self._retained: dict[str, Envelope] = {}
        self._last_seq: dict[str, int] = {}
        self._on_overflow = on_overflow

    def publish(self, env: Envelope) -> int:
        """Deliver to every matching live subscription; returns delivery count."""
        validate_topic(env.topic)
        overflowed = []
        with self._lock:
            if env.publisher:
                last = self._last_seq.get(env.publisher)
                if last is not None and env.seq <= last:
                    raise PublishError(
                        f"publisher {env.publisher!r} seq {env.seq} not after {last}"
                    )
                self._last_seq[env.publisher] = env.seq
            if env.retain:
                self._retained[env.topic] = env
            delivered = 0
            for sub in self._subs:
                if not sub.alive or not topic_matches(sub.pattern, env.topic):
                    continue
                try:
                    sub.queue.put_nowait(env)
                    delivered += 1
                except queue.Full:
                    sub.alive = False
                    overflowed.append(sub)
            for sub in overflowed:
                self._subs.remove(sub)
        for sub in overflowed:
            logger.warning("subscriber %s on %r disconnected: queue overflow", sub.client, sub.pattern)
            if self._on_overflow:
                self._on_overflow(sub)
        return delivered

    def subscribe(self, client: str, pattern: str) -> Subscription:
        """Register a filter; matching retained envelopes are queued first."""
        validate_filter(pattern)
        with self._lock:
            sub = Subscription(client, pattern, self._bound)
            for topic, env in self._retained.items():
                if topic_matches(pattern, topic):
                    try:
                        sub.queue.put_nowait(env)
                    except queue.Full:
                        raise FilterError(
                            f"retained snapshot for {pattern!r} exceeds the queue bound"
                        ) from None
            self._subs.append(sub)
            return sub

    def unsubscribe(self, sub: Subscription) -> None:
        """Idempotent removal; unknown handles are a no-op."""
        with self._lock:
            sub.alive = False
            if sub in self._subs:
                self._subs.remove(sub)

    def retained_snapshot(self, pattern: str) -> list[Envelope]:
        with self._lock:
            return [e for t, e in self._retained.items() if topic_matches(pattern, t)]

    def subscription_count(self) -> int:
        with self._lock:
            return len(self._subs)
