"""Transition storage for the sample-based agents."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np


class Transition(NamedTuple):
    state: int
    action: int
    reward: float
    next_state: int
    next_action: int


@dataclass
class TransitionBatch:
    """Column-major batch of SARSA tuples.

    ``weight`` is optional; when absent every transition counts ``1/len``.
    Exhaustive batches built from an exact distribution pass explicit
    probability weights instead.
    """

    state: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_state: np.ndarray
    next_action: np.ndarray
    weight: Optional[np.ndarray] = None

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=np.int64)
        self.action = np.asarray(self.action, dtype=np.int64)
        self.reward = np.asarray(self.reward, dtype=float)
        self.next_state = np.asarray(self.next_state, dtype=np.int64)
        self.next_action = np.asarray(self.next_action, dtype=np.int64)
        if self.weight is not None:
            self.weight = np.asarray(self.weight, dtype=float)

    def __len__(self):
        return len(self.state)

    def weights(self) -> np.ndarray:
        if self.weight is None:
            return np.full(len(self), 1.0 / len(self))
        return self.weight

    def take(self, idx) -> "TransitionBatch":
        return TransitionBatch(
            self.state[idx], self.action[idx], self.reward[idx],
            self.next_state[idx], self.next_action[idx],
            None if self.weight is None else self.weight[idx],
        )

    def transitions(self):
        for k in range(len(self)):
            yield Transition(int(self.state[k]), int(self.action[k]), float(self.reward[k]),
                             int(self.next_state[k]), int(self.next_action[k]))

    @classmethod
    def from_transitions(cls, items) -> "TransitionBatch":
        items = list(items)
        if not items:
            return cls(*(np.zeros(0) for _ in range(5)))
        cols = list(zip(*items))
        return cls(*cols)


class ReplayBuffer:
    """Bounded (or unbounded) FIFO of transitions or, for ``kind="initial"``, of states."""

    def __init__(self, capacity: Optional[int] = None, kind: str = "episode"):
        if kind not in ("episode", "initial"):
            raise ValueError(f"unknown buffer kind {kind!r}")
        if capacity is not None and capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.kind = kind
        self._items: list = []
        self._cached: Optional[TransitionBatch] = None

    def __len__(self):
        return len(self._items)

    def clear(self) -> None:
        self._items.clear()
        self._cached = None

    def add(self, item) -> None:
        if self.kind == "initial":
            item = int(item)
        elif not isinstance(item, Transition):
            item = Transition(*item)
        self._items.append(item)
        self._cached = None
        if self.capacity is not None and len(self._items) > self.capacity:
            del self._items[0]

    def extend_batch(self, batch: TransitionBatch) -> None:
        was_empty = not self._items
        for t in batch.transitions():
            self.add(t)
        if was_empty and len(self._items) == len(batch):
            self._cached = batch

    def states(self) -> np.ndarray:
        if self.kind != "initial":
            raise TypeError("states() is only defined for an initial-state buffer")
        return np.asarray(self._items, dtype=np.int64)

    def as_batch(self) -> TransitionBatch:
        if self.kind != "episode":
            raise TypeError("as_batch() is only defined for a transition buffer")
        if self._cached is None:
            self._cached = TransitionBatch.from_transitions(self._items)
        return self._cached

    def sample(self, rng: np.random.Generator, size: int):
        """Uniform sample with replacement."""
        if not self._items:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, len(self._items), size=size)
        if self.kind == "initial":
            return self.states()[idx]
        return self.as_batch().take(idx)
