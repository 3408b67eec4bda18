"""A graph, a potential and an origin state bundled together."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .potentials import Potential
from .shift_core import StateGraph, TailPoint


@dataclass
class Model:
    name: str
    graph: StateGraph
    potential: Potential
    origin: object
    # escaping orbit generators: tag -> (n -> TailPoint)
    orbits: dict = field(default_factory=dict)
    walk: Optional[object] = None
    params: dict = field(default_factory=dict)
    reversed_orbits: dict = field(default_factory=dict)

    def orbit(self, tag: str, ns) -> list:
        gen: Callable[[int], TailPoint] = self.orbits[tag]
        return [gen(n) for n in ns]
