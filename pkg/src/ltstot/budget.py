"""Query and wall-clock accounting shared by every search algorithm."""

from __future__ import annotations

import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterator, Literal

ChargeKind = Literal["generation", "evaluation"]


@dataclass
class BudgetMeter:
    """Counts LM queries against a limit.

    Each generated thought costs ``generation_charge`` and each self-evaluation
    ``evaluation_charge``, so an evaluated thought costs two units with the
    defaults. ``limit=None`` means unbounded. In wall-clock mode only time spent
    inside :meth:`timing` blocks (LM queries) counts toward the deadline.
    """

    limit: int | None = None
    generation_charge: int = 1
    evaluation_charge: int = 1
    wall_clock_limit: float | None = None
    consumed: int = 0
    query_time: float = 0.0
    generations: int = 0
    evaluations: int = 0
    start_time: float = field(default_factory=time.monotonic)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        if self.generation_charge < 1 or self.evaluation_charge < 1:
            raise ValueError("charges must be positive integers")
        if self.limit is not None and self.limit < 0:
            raise ValueError("limit must be non-negative")

    def _price(self, kind: ChargeKind) -> int:
        if kind == "generation":
            return self.generation_charge
        if kind == "evaluation":
            return self.evaluation_charge
        raise ValueError(f"unknown charge kind {kind!r}")

    def deadline_passed(self) -> bool:
        return self.wall_clock_limit is not None and self.query_time >= self.wall_clock_limit

    def can_afford(self, kind: ChargeKind = "generation") -> bool:
        price = self._price(kind)
        if self.deadline_passed():
            return False
        return self.limit is None or self.consumed + price <= self.limit

    def charge(self, kind: ChargeKind = "generation") -> bool:
        """Charge one query of ``kind``; return False (charging nothing) if it does not fit."""
        price = self._price(kind)
        with self._lock:
            if self.deadline_passed():
                return False
            if self.limit is not None and self.consumed + price > self.limit:
                return False
            self.consumed += price
            if kind == "generation":
                self.generations += 1
            else:
                self.evaluations += 1
            return True

    @property
    def remaining(self) -> int | None:
        if self.limit is None:
            return None
        return self.limit - self.consumed

    @contextmanager
    def timing(self) -> Iterator[None]:
        t0 = time.monotonic()
        try:
            yield
        finally:
            elapsed = time.monotonic() - t0
            with self._lock:
                self.query_time += elapsed
