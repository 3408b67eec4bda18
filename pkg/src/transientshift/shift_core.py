"""Countable-state Markov shifts: lazy graphs, cylinders, eventually periodic points."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Optional, Sequence

from .errors import Inadmissible, NoCycleReachable, UnknownState

State = Hashable

FORWARD = "forward"
BACKWARD = "backward"


def zigzag_key(n: int) -> int:
    """Order integers as 0, 1, -1, 2, -2, ..."""
    return 2 * n - 1 if n > 0 else -2 * n


@dataclass(frozen=True)
class Lumping:
    """Equitable partition of states relative to a target state.

    ``class_of`` maps a state to its class; ``class_out`` lists, for a class,
    triples (class, multiplicity, representative edge) describing the
    out-edges of any member. Only potentials invariant under the underlying
    symmetry may be lumped. ``key`` identifies the quotient graph so DP results
    can be shared between targets.
    """

    key: Hashable
    class_of: Callable[[State], Hashable]
    class_out: Callable[[Hashable], list]
    class_in: Callable[[Hashable], list]
    target_class: Hashable


class StateGraph:
    """Directed graph over a countable state set, generated on demand.

    Parameters
    ----------
    out_fn, in_fn : callable
        Successor and predecessor generators; both must return finite iterables.
    contains : callable
        Membership test for labels; ``UnknownState`` is raised when it fails.
    key : callable, optional
        Sort key giving a deterministic total order on states.
    period : int
        Period of the graph (gcd of cycle lengths); used for block sums.
    lumping : callable, optional
        ``lumping(target)`` returning a :class:`Lumping` or ``None``.
    """

    def __init__(
        self,
        out_fn: Callable[[State], Iterable[State]],
        in_fn: Callable[[State], Iterable[State]],
        contains: Callable[[State], bool],
        key: Callable[[State], object] | None = None,
        name: str = "graph",
        period: int = 1,
        lumping: Callable[[State], Optional[Lumping]] | None = None,
        parse_state: Callable[[str], State] | None = None,
        format_state: Callable[[State], str] | None = None,
    ):
        self._out_fn = out_fn
        self._in_fn = in_fn
        self._contains = contains
        self.key = key or (lambda s: s)
        self.name = name
        self.period = period
        self._lumping = lumping
        self.parse_state = parse_state or _default_parse
        self.format_state = format_state or str
        self._out_cache: dict = {}
        self._in_cache: dict = {}

    def check(self, a: State) -> None:
        try:
            ok = self._contains(a)
        except Exception:
            ok = False
        if not ok:
            raise UnknownState(f"{a!r} is not a state of {self.name}")

    def out_edges(self, a: State) -> tuple:
        try:
            return self._out_cache[a]
        except KeyError:
            self.check(a)
            succ = tuple(sorted(set(self._out_fn(a)), key=self.key))
            self._out_cache[a] = succ
            return succ

    def in_edges(self, b: State) -> tuple:
        try:
            return self._in_cache[b]
        except KeyError:
            self.check(b)
            pred = tuple(sorted(set(self._in_fn(b)), key=self.key))
            self._in_cache[b] = pred
            return pred

    def successors(self, a: State) -> tuple:
        """Sorted successors of a state already known to be valid, bypassing checks and caches."""
        return tuple(sorted(set(self._out_fn(a)), key=self.key))

    def has_edge(self, a: State, b: State) -> bool:
        return b in self.out_edges(a)

    def lumping(self, target: State) -> Optional[Lumping]:
        if self._lumping is None:
            return None
        return self._lumping(target)

    def reversed(self) -> "StateGraph":
        """The same state set with every edge turned around."""
        rev = StateGraph(
            self._in_fn,
            self._out_fn,
            self._contains,
            key=self.key,
            name=self.name + "^rev",
            period=self.period,
            lumping=None,
            parse_state=self.parse_state,
            format_state=self.format_state,
        )
        rev._out_cache = self._in_cache
        rev._in_cache = self._out_cache
        return rev

    def ball(self, center: State, radius: int, undirected: bool = True) -> list:
        """States within ``radius`` steps of ``center``, in BFS order."""
        seen = {center: 0}
        order = [center]
        queue = deque([center])
        while queue:
            s = queue.popleft()
            if seen[s] == radius:
                continue
            nbrs = list(self.out_edges(s))
            if undirected:
                nbrs += list(self.in_edges(s))
            for t in sorted(set(nbrs), key=self.key):
                if t not in seen:
                    seen[t] = seen[s] + 1
                    order.append(t)
                    queue.append(t)
        return order


def _default_parse(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return text


@dataclass(frozen=True)
class Cylinder:
    word: tuple

    def __post_init__(self):
        object.__setattr__(self, "word", tuple(self.word))
        if not self.word:
            raise ValueError("cylinder word must be nonempty")

    def __len__(self):
        return len(self.word)

    def contains(self, x: "TailPoint") -> bool:
        return all(x.coord(i) == s for i, s in enumerate(self.word))

    @property
    def last(self):
        return self.word[-1]


@dataclass(frozen=True)
class GraphDistance:
    value: float
    cap: int

    @property
    def finite(self) -> bool:
        return self.value != math.inf

    def __str__(self):
        return str(self.value) if self.finite else f"> {self.cap}"


@dataclass(frozen=True)
class TailPoint:
    """Point prefix·cycle·cycle·… of the one-sided shift.

    For ``direction == BACKWARD`` the coordinates listed are y_0, y_-1, y_-2, …
    and consecutive coordinates are joined by reversed edges.
    """

    prefix: tuple
    cycle: tuple
    direction: str = FORWARD

    def __post_init__(self):
        prefix, cycle = _normalize(tuple(self.prefix), tuple(self.cycle))
        object.__setattr__(self, "prefix", prefix)
        object.__setattr__(self, "cycle", cycle)
        if self.direction not in (FORWARD, BACKWARD):
            raise ValueError(f"unknown direction {self.direction!r}")

    def coord(self, i: int):
        if i < len(self.prefix):
            return self.prefix[i]
        return self.cycle[(i - len(self.prefix)) % len(self.cycle)]

    def head(self, n: int) -> tuple:
        return tuple(self.coord(i) for i in range(n))

    @property
    def x0(self):
        return self.coord(0)

    def prepend(self, word: Sequence) -> "TailPoint":
        return TailPoint(tuple(word) + self.prefix, self.cycle, self.direction)

    def __str__(self):
        pre = ",".join(map(str, self.prefix))
        cyc = ",".join(map(str, self.cycle))
        return f"{pre}({cyc})" if pre else f"({cyc})"


@dataclass(frozen=True)
class RulePoint:
    """Point prefix·(rule(offset), rule(offset + 1), …) for tails that are not eventually periodic.

    ``rule`` must be a hashable callable (a module-level function or a
    ``functools.partial`` of one) so that points can serve as cache keys.
    """

    rule: Callable[[int], State]
    offset: int = 0
    prefix: tuple = ()
    direction: str = FORWARD
    horizon: int = 32

    def coord(self, i: int):
        if i < len(self.prefix):
            return self.prefix[i]
        return self.rule(self.offset + i - len(self.prefix))

    def head(self, n: int) -> tuple:
        return tuple(self.coord(i) for i in range(n))

    @property
    def x0(self):
        return self.coord(0)

    def prepend(self, word: Sequence) -> "RulePoint":
        return RulePoint(self.rule, self.offset, tuple(word) + self.prefix, self.direction, self.horizon)

    def advanced(self) -> "RulePoint":
        if self.prefix:
            return RulePoint(self.rule, self.offset, self.prefix[1:], self.direction, self.horizon)
        return RulePoint(self.rule, self.offset + 1, (), self.direction, self.horizon)

    def __str__(self):
        pre = ",".join(map(str, self.prefix))
        body = ",".join(map(str, (self.rule(self.offset + k) for k in range(3)))) + ",…"
        return f"{pre},{body}" if pre else body


def _normalize(prefix: tuple, cycle: tuple):
    if not cycle:
        raise ValueError("cycle must be nonempty")
    n = len(cycle)
    for d in range(1, n + 1):
        if n % d == 0 and cycle == cycle[:d] * (n // d):
            cycle = cycle[:d]
            break
    while prefix and prefix[-1] == cycle[-1]:
        prefix = prefix[:-1]
        cycle = cycle[-1:] + cycle[:-1]
    return prefix, cycle


def _edge(g: StateGraph, direction: str, a, b) -> bool:
    # coordinates a then b of a point in the given direction
    return g.has_edge(a, b) if direction == FORWARD else g.has_edge(b, a)


def is_admissible(word: Sequence, g: StateGraph) -> bool:
    """True iff every consecutive pair of ``word`` is an edge of ``g``."""
    word = tuple(word)
    if not word:
        raise ValueError("word must be nonempty")
    for s in word:
        g.check(s)
    return all(g.has_edge(a, b) for a, b in zip(word, word[1:]))


def point_admissible(x: TailPoint, g: StateGraph) -> bool:
    """Check every junction of prefix·cycle·cycle, including the wrap-around.

    For a :class:`RulePoint` only the first ``horizon`` coordinates are checked.
    """
    if isinstance(x, RulePoint):
        coords = x.head(len(x.prefix) + x.horizon)
        for s in coords:
            g.check(s)
        return all(_edge(g, x.direction, a, b) for a, b in zip(coords, coords[1:]))
    n = len(x.prefix) + len(x.cycle) + 1
    coords = x.head(n)
    for s in coords:
        g.check(s)
    return all(_edge(g, x.direction, a, b) for a, b in zip(coords, coords[1:]))


def graph_distance(a, b, g: StateGraph, cap: int) -> GraphDistance:
    """Forward BFS distance from ``a`` to ``b``, or ``> cap``."""
    g.check(a)
    g.check(b)
    if a == b:
        return GraphDistance(0, cap)
    seen = {a}
    frontier = [a]
    for d in range(1, cap + 1):
        nxt = []
        for s in frontier:
            for t in g.out_edges(s):
                if t == b:
                    return GraphDistance(d, cap)
                if t not in seen:
                    seen.add(t)
                    nxt.append(t)
        frontier = nxt
        if not frontier:
            break
    return GraphDistance(math.inf, cap)


def distances_to(b, g: StateGraph, cap: int) -> dict:
    """Map state -> forward distance to ``b`` for all states within ``cap``."""
    dist = {b: 0}
    frontier = [b]
    for d in range(1, cap + 1):
        nxt = []
        for t in frontier:
            for s in g.in_edges(t):
                if s not in dist:
                    dist[s] = d
                    nxt.append(s)
        frontier = nxt
        if not frontier:
            break
    return dist


def metric_d(x: TailPoint, y: TailPoint) -> float:
    if x.direction != y.direction:
        raise ValueError("points live in different shift spaces")
    if isinstance(x, RulePoint) or isinstance(y, RulePoint):
        raise TypeError("equality of rule-defined points is not decidable")
    horizon = max(len(x.prefix), len(y.prefix)) + math.lcm(len(x.cycle), len(y.cycle))
    for i in range(horizon):
        if x.coord(i) != y.coord(i):
            return 2.0 ** (-i)
    return 0.0


def shift(x: TailPoint) -> TailPoint:
    if isinstance(x, RulePoint):
        return x.advanced()
    if x.prefix:
        return TailPoint(x.prefix[1:], x.cycle, x.direction)
    return TailPoint((), x.cycle[1:] + x.cycle[:1], x.direction)


def preimages(x: TailPoint, g: StateGraph) -> list:
    """All y with T y = x, in state order."""
    back = g.in_edges(x.x0) if x.direction == FORWARD else g.out_edges(x.x0)
    return [x.prepend((b,)) for b in back]


def anchor_point(a, g: StateGraph, cap: int = 64, direction: str = FORWARD) -> TailPoint:
    """Deterministic periodic point whose first coordinate is a successor of ``a``.

    Among all successors b of ``a`` the cycle through b minimising
    (length, key sequence) is chosen.
    """
    h = g if direction == FORWARD else g.reversed()
    best = None
    for b in h.out_edges(a):
        cyc = _shortest_cycle(b, h, cap)
        if cyc is None:
            continue
        rank = (len(cyc), [h.key(s) for s in cyc])
        if best is None or rank < best[0]:
            best = (rank, cyc)
    if best is None:
        raise NoCycleReachable(f"no cycle within {cap} steps from a successor of {a!r}")
    return TailPoint((), best[1], direction)


def _shortest_cycle(b, g: StateGraph, cap: int):
    # backward BFS from b, stopped at the first layer reaching a successor of b
    succ = set(g.out_edges(b))
    dist = {b: 0}
    frontier = [b]
    length = 1 if b in succ else None
    d = 0
    while length is None and frontier and d < cap:
        d += 1
        nxt = []
        for t in frontier:
            for s in g.in_edges(t):
                if s not in dist:
                    dist[s] = d
                    nxt.append(s)
        frontier = nxt
        if succ.intersection(nxt):
            length = d + 1
    if length is None:
        return None
    cyc = [b]
    cur = b
    for remaining in range(length - 1, 0, -1):
        cur = next(t for t in g.out_edges(cur) if dist.get(t) == remaining)
        cyc.append(cur)
    return tuple(cyc)


def point_in(word: Sequence, g: StateGraph, direction: str = FORWARD) -> TailPoint:
    """A point of the cylinder ``word`` completed by the anchor of its last state."""
    word = tuple(word)
    for a, b in zip(word, word[1:]):
        if not _edge(g, direction, a, b):
            raise Inadmissible(f"no edge {a!r} -> {b!r} in word {word!r}")
    tail = anchor_point(word[-1], g, direction=direction)
    return tail.prepend(word)


def check_transitive(g: StateGraph, states: Sequence, radius: int) -> list:
    """Pairs (a, b) among ``states`` with no path a -> b within ``radius``."""
    bad = []
    for a in states:
        for b in states:
            if not graph_distance(a, b, g, radius).finite:
                bad.append((a, b))
    return bad


@dataclass(frozen=True)
class TwoSidedPoint:
    """Two-sided sequence z glued from its past (z_0, z_-1, …) and future (z_0, z_1, …)."""

    past: TailPoint
    future: TailPoint

    def __post_init__(self):
        if self.past.x0 != self.future.x0:
            raise ValueError("past and future must share coordinate 0")

    def coord(self, i: int):
        return self.future.coord(i) if i >= 0 else self.past.coord(-i)

    def shifted(self) -> "TwoSidedPoint":
        """T z, with (T z)_i = z_{i+1}."""
        fut = shift(self.future)
        return TwoSidedPoint(self.past.prepend((fut.x0,)), fut)
