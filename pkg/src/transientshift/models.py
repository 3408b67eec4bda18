"""Model zoo, first-passage sums, and the random-walk layer."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NotHarmonic, SamplerDegenerate
from .green_martin import GreenValue, certify_series, kernel_profile
from .measures_dlr import CylinderMeasure, path_measure
from .model import Model
from .potentials import constant_potential, log_stochastic
from .shift_core import Lumping, RulePoint, StateGraph, TailPoint, point_in, zigzag_key

_PRIME = re.compile(r"^([1-9][0-9]*)'$")


def prime(n: int) -> str:
    """Label of the primed state n'."""
    return f"{n}'"


def prime_index(s) -> Optional[int]:
    if isinstance(s, str):
        m = _PRIME.match(s)
        if m:
            return int(m.group(1))
    return None


def _sign(a: int) -> int:
    return 1 if a > 0 else -1


# ---------------------------------------------------------------- example 1

def _ex1_contains(s) -> bool:
    return (isinstance(s, int) and not isinstance(s, bool)) or prime_index(s) is not None


def _ex1_out(s):
    n = prime_index(s)
    if n is not None:
        return [0] if n == 1 else [prime(n - 1)]
    if s == 0:
        return [1, -1]
    return [s + _sign(s), prime(abs(s))]


def _ex1_in(s):
    n = prime_index(s)
    if n is not None:
        return [n, -n, prime(n + 1)]
    if s == 0:
        return [prime(1)]
    if abs(s) == 1:
        return [0]
    return [s - _sign(s)]


def _ex1_key(s):
    n = prime_index(s)
    return (1, n) if n is not None else (0, zigzag_key(s))


def example1_graph() -> StateGraph:
    """Integers and primed naturals: 0 -> ±1, a -> a + sign(a), a -> |a|', (n+1)' -> n', 1' -> 0."""
    return StateGraph(_ex1_out, _ex1_in, _ex1_contains, key=_ex1_key, name="example1")


def example1(alpha: float = -1.0) -> Model:
    g = example1_graph()
    p = constant_potential(g, alpha)
    rev = g.reversed()
    return Model(
        "example1",
        g,
        p,
        0,
        orbits={
            "plus": lambda n: point_in((n,), g),
            "minus": lambda n: point_in((-n,), g),
        },
        params={"alpha": alpha},
        reversed_orbits={
            "prime": lambda n: point_in((prime(n),), rev),
            "plus": lambda n: point_in((n,), rev),
            "minus": lambda n: point_in((-n,), rev),
        },
    )


# ---------------------------------------------------------------- example 2

def _ex2_out(a):
    return [a + 1, -a] if a >= 0 else [a + 1]


def _ex2_in(b):
    return [b - 1, -b] if b <= 0 else [b - 1]


def _is_int(s) -> bool:
    return isinstance(s, int) and not isinstance(s, bool)


def identity_rule(i: int) -> int:
    return i


def example2(alpha: float = 0.0) -> Model:
    """Integers with a -> a + 1 and a -> -a for a >= 0; the ray (0, 1, 2, …) is isolated from the past."""
    g = StateGraph(_ex2_out, _ex2_in, _is_int, key=zigzag_key, name="example2")
    p = constant_potential(g, alpha)
    return Model(
        "example2",
        g,
        p,
        0,
        orbits={"ray": lambda n: RulePoint(identity_rule, n)},
        params={"alpha": alpha, "ray_point": RulePoint(identity_rule, 0)},
    )


# ---------------------------------------------------------------- biased walk on Z

@dataclass
class WalkSpec:
    """A row-finite stochastic matrix on the states of ``graph``."""

    prob: Callable
    graph: StateGraph
    start: object

    def row(self, a, trusted: bool = False) -> list:
        succ = self.graph.successors(a) if trusted else self.graph.out_edges(a)
        return [(b, self.prob(a, b)) for b in succ]


def _z_lumping(target) -> Lumping:
    return Lumping(
        key=("z-translation",),
        class_of=lambda s: s - target,
        class_out=lambda c: [(c - 1, 1, (0, -1)), (c + 1, 1, (0, 1))],
        class_in=lambda c: [c - 1, c + 1],
        target_class=0,
    )


def biased_walk_z(p: float = 2 / 3) -> Model:
    """Nearest-neighbour walk on Z stepping right with probability p; potential log P."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    q = 1 - p
    g = StateGraph(lambda a: [a - 1, a + 1], lambda b: [b - 1, b + 1], _is_int, key=zigzag_key,
                   name="biased_walk_z", period=2, lumping=_z_lumping)

    def prob(a, b):
        return p if b == a + 1 else q if b == a - 1 else 0.0

    pot = log_stochastic(g, prob, lumpable=True)
    anchor = lambda n: TailPoint((n,), (n + 1, n))
    return Model(
        "biased_walk_z",
        g,
        pot,
        0,
        orbits={"plus": anchor, "minus": lambda n: TailPoint((-n,), (-n - 1, -n))},
        walk=WalkSpec(prob, g, 0),
        params={"p": p},
        reversed_orbits={"plus": anchor, "minus": lambda n: TailPoint((-n,), (-n - 1, -n))},
    )


# ---------------------------------------------------------------- regular tree

def _reduce_step(s: tuple, gen: int) -> tuple:
    return s[:-1] if s and s[-1] == gen else s + (gen,)


def tree_distance(s: tuple, t: tuple) -> int:
    k = 0
    for a, b in zip(s, t):
        if a != b:
            break
        k += 1
    return len(s) + len(t) - 2 * k


def _tree_lumping(degree: int):
    edge = ((), (0,))

    def lump(target):
        return Lumping(
            key=("tree-distance", degree),
            class_of=lambda s: tree_distance(s, target),
            class_out=lambda c: [(1, degree, edge)] if c == 0 else [(c - 1, 1, edge), (c + 1, degree - 1, edge)],
            class_in=lambda c: [1] if c == 0 else [c - 1, c + 1],
            target_class=0,
        )

    return lump


def parse_tree_state(text: str) -> tuple:
    text = text.strip()
    return () if text in ("", "e") else tuple(int(ch) for ch in text)


def format_tree_state(s: tuple) -> str:
    return "".join(map(str, s)) or "e"


def ray_word(i: int, n: int, degree: int) -> tuple:
    """Reduced word of length n alternating between generators i and i + 1."""
    j = (i + 1) % degree
    return tuple(i if k % 2 == 0 else j for k in range(n))


def regular_tree(degree: int = 3, weights: Optional[Sequence[float]] = None) -> Model:
    """Cayley graph of a free product of ``degree`` copies of Z/2 with a nearest-neighbour walk.

    ``weights[g]`` is the probability of multiplying by generator g; the
    default is the simple random walk.
    """
    if degree < 2:
        raise ValueError("degree must be >= 2")
    if weights is None:
        weights = [1.0 / degree] * degree
    weights = [float(w) for w in weights]
    if len(weights) != degree or any(w <= 0 for w in weights) or abs(sum(weights) - 1) > 1e-12:
        raise ValueError("weights must be positive, one per generator, summing to 1")
    uniform = max(weights) - min(weights) < 1e-15

    def nbrs(s):
        return [_reduce_step(s, k) for k in range(degree)]

    letters = frozenset(range(degree))

    def contains(s):
        return (isinstance(s, tuple) and letters.issuperset(s)
                and not any(a == b for a, b in zip(s, s[1:])))

    g = StateGraph(nbrs, nbrs, contains, key=lambda s: (len(s), s), name=f"tree{degree}", period=2,
                   lumping=_tree_lumping(degree) if uniform else None,
                   parse_state=parse_tree_state, format_state=format_tree_state)

    def prob(a, b):
        if len(b) > len(a):
            return weights[b[-1]]
        return weights[a[-1]]

    if uniform:
        pot = constant_potential(g, math.log(weights[0]))
        pot.name = "log_stochastic"
    else:
        pot = log_stochastic(g, prob)
    orbits = {f"subtree{i}": (lambda n, i=i: point_in((ray_word(i, n, degree),), g)) for i in range(degree)}
    return Model(f"regular_tree({degree})", g, pot, (), orbits=orbits, walk=WalkSpec(prob, g, ()),
                 params={"degree": degree, "weights": weights})


# ---------------------------------------------------------------- reflecting walk

def inward_drift_walk(p: float = 0.7, potential: str = "log_stochastic_dual") -> Model:
    """Walk on N stepping toward 0 with probability p, lazy at 0 (P(0,0) = p).

    With ``potential="log_stochastic_dual"`` the potential is log P(b, a), so
    that L^n 1_[a](x) is the n-step probability of moving from x_0 to a.
    """
    if not 0.5 < p < 1:
        raise ValueError("p must lie in (1/2, 1) for an inward drift")
    q = 1 - p

    def out(a):
        return [0, 1] if a == 0 else [a - 1, a + 1]

    def into(b):
        return [0, 1] if b == 0 else [b - 1, b + 1]

    g = StateGraph(out, into, lambda s: _is_int(s) and s >= 0, name="inward_drift_walk")

    def prob(a, b):
        if a == 0:
            return p if b == 0 else q if b == 1 else 0.0
        return p if b == a - 1 else q if b == a + 1 else 0.0

    if potential not in ("log_stochastic", "log_stochastic_dual"):
        raise ValueError(f"unknown potential {potential!r}")
    pot = log_stochastic(g, prob, dual=potential == "log_stochastic_dual")
    return Model("inward_drift_walk", g, pot, 0, walk=WalkSpec(prob, g, 0), params={"p": p})


def stationary_ratio(p: float, a: int, size: int = 400) -> float:
    """pi(a) / pi(0) for the reflecting walk, by a linear solve on a truncation."""
    q = 1 - p
    m = np.zeros((size, size))
    m[0, 0], m[0, 1] = p, q
    for i in range(1, size):
        m[i, i - 1] = p
        if i + 1 < size:
            m[i, i + 1] = q
        else:
            m[i, i] += q
    a_mat = m.T - np.eye(size)
    a_mat[-1, :] = 1.0
    rhs = np.zeros(size)
    rhs[-1] = 1.0
    pi = np.linalg.solve(a_mat, rhs)
    return float(pi[a] / pi[0])


# ---------------------------------------------------------------- self loop

def self_loop(alpha: float = -1.0) -> Model:
    g = StateGraph(lambda a: [0], lambda b: [0], lambda s: s == 0, name="self_loop")
    return Model("self_loop", g, constant_potential(g, alpha), 0,
                 walk=WalkSpec(lambda a, b: 1.0, g, 0), params={"alpha": alpha})


BUILDERS = {
    "example1": example1,
    "example2": example2,
    "biased_walk_z": biased_walk_z,
    "regular_tree": regular_tree,
    "inward_drift_walk": inward_drift_walk,
    "self_loop": self_loop,
}


# ---------------------------------------------------------------- first passage

def first_passage(
    alpha: float,
    a,
    b,
    n_cap: int = 20000,
    graph: Optional[StateGraph] = None,
    tol: float = 1e-300,
    rtol: float = 1e-14,
) -> GreenValue:
    """F(alpha, a, b) = sum_n e^{n alpha} · #(paths a -> b of length n visiting b only at the end).

    For a == b the empty path contributes the n = 0 term 1.
    """
    g = graph or example1_graph()
    z = math.exp(alpha)

    def terms():
        yield 1.0 if a == b else 0.0
        cur = {a: 1.0}
        while True:
            nxt: dict = {}
            for s, w in cur.items():
                for t in g.out_edges(s):
                    nxt[t] = nxt.get(t, 0.0) + w * z
            yield nxt.pop(b, 0.0)
            cur = nxt

    return certify_series(terms(), tol, rtol, n_cap, block=g.period)


# ---------------------------------------------------------------- harmonic functions

def harmonic_residual(walk: WalkSpec, h: Callable, states: Sequence) -> dict:
    """|h(a) - sum_b P(a, b) h(b)| per state."""
    return {a: abs(h(a) - sum(pr * h(b) for b, pr in walk.row(a))) for a in states}


def measure_from_harmonic(walk: WalkSpec, h: Callable, states: Sequence, tol: float = 1e-12) -> CylinderMeasure:
    """mu([a]) = h(a), mu([a_0 … a_m]) = P(a_0, a_1) ⋯ P(a_{m-1}, a_m) h(a_m).

    Harmonicity of h is checked on ``states`` first.
    """
    bad = {a: r for a, r in harmonic_residual(walk, h, states).items() if r > tol}
    if bad:
        raise NotHarmonic(f"h is not harmonic at {sorted(bad, key=str)[:5]}")
    return path_measure(walk.prob, h, "harmonic path measure")


# ---------------------------------------------------------------- simulation

class _Sampler:
    """Vectorised simulation of a walk.

    States are interned as integers; rows of the transition matrix are kept in
    padded tables (successor index, cumulative probability) and filled in the
    first time a state is visited.
    """

    def __init__(self, walk: WalkSpec):
        self.walk = walk
        self.states: list = []
        self.index: dict = {}
        self.succ = np.zeros((64, 1), dtype=np.int64)
        self.cum = np.full((64, 1), np.inf)
        self.ready = np.zeros(64, dtype=bool)

    def intern(self, s) -> int:
        i = self.index.get(s)
        if i is None:
            i = len(self.states)
            self.index[s] = i
            self.states.append(s)
            if i >= len(self.ready):
                grow = len(self.ready)
                self.succ = np.vstack([self.succ, np.zeros((grow, self.succ.shape[1]), dtype=np.int64)])
                self.cum = np.vstack([self.cum, np.full((grow, self.cum.shape[1]), np.inf)])
                self.ready = np.concatenate([self.ready, np.zeros(grow, dtype=bool)])
        return i

    def _fill(self, i: int) -> None:
        # states reached by the simulation are generated by the graph itself
        pairs = [(b, pr) for b, pr in self.walk.row(self.states[i], trusted=i > 0) if pr > 0]
        if not pairs:
            raise SamplerDegenerate(f"state {self.states[i]!r} has no outgoing probability")
        width = len(pairs)
        if width > self.succ.shape[1]:
            extra = width - self.succ.shape[1]
            self.succ = np.hstack([self.succ, np.zeros((len(self.succ), extra), dtype=np.int64)])
            self.cum = np.hstack([self.cum, np.full((len(self.cum), extra), np.inf)])
        idx = [self.intern(b) for b, _ in pairs]
        acc = 0.0
        for k, (_, pr) in enumerate(pairs):
            acc += pr
            self.succ[i, k] = idx[k]
            self.cum[i, k] = acc
        self.cum[i, width - 1:] = np.inf
        self.succ[i, width:] = idx[-1]
        self.ready[i] = True

    def step(self, pos: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        pending = np.unique(pos[~self.ready[pos]])
        for i in pending:
            self._fill(int(i))
        u = rng.random(len(pos))
        col = (u[:, None] >= self.cum[pos]).sum(axis=1)
        return self.succ[pos, col]

    def run(self, start, n_samples: int, horizon: int, rng: np.random.Generator, record: Sequence[int] = ()):
        pos = np.full(n_samples, self.intern(start), dtype=np.int64)
        snaps = {}
        record = set(record)
        for step in range(1, horizon + 1):
            pos = self.step(pos, rng)
            if step in record:
                snaps[step] = pos.copy()
        return pos, snaps


def simulate(walk: WalkSpec, n_samples: int, horizon: int, seed: int, start=None) -> list:
    """Endpoints of ``n_samples`` independent walks after ``horizon`` steps."""
    sampler = _Sampler(walk)
    pos, _ = sampler.run(walk.start if start is None else start, n_samples, horizon, np.random.default_rng(seed))
    return [sampler.states[i] for i in pos]


def wilson_interval(k: int, n: int, z: float = 2.5758293035489) -> tuple:
    """Wilson score interval for a binomial proportion (default 99%)."""
    if n == 0:
        return 0.0, 1.0
    ph = k / n
    den = 1 + z * z / n
    mid = (ph + z * z / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


@dataclass
class HittingReport:
    counts: dict
    frequencies: dict
    intervals: dict
    non_escaping: int
    n_samples: int
    horizon: int
    seed: int
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "horizon": self.horizon,
            "seed": self.seed,
            "non_escaping": self.non_escaping,
            "clusters": {
                tag: {"count": self.counts[tag], "frequency": self.frequencies[tag],
                      "wilson99": list(self.intervals[tag])}
                for tag in self.counts
            },
        }


def _cluster_tag(cl) -> str:
    return cl.members[0]


def hitting_distribution(
    walk: WalkSpec,
    start,
    atlas,
    model: Model,
    n_samples: int,
    horizon: int,
    seed: int,
    tol: float = 1e-300,
    rtol: float = 1e-10,
) -> HittingReport:
    """Frequencies with which walk trajectories settle near each atlas cluster.

    A trajectory is assigned to the nearest centroid in rho at half the horizon
    and at the horizon; it counts for a cluster only when both assignments
    agree and both positions lie outside the test-set states. All other
    trajectories are reported as non-escaping, and frequencies are taken
    over the escaping ones.
    """
    from .green_martin import rho_distance

    sampler = _Sampler(walk)
    rng = np.random.default_rng(seed)
    half = max(1, horizon // 2)
    pos, snaps = sampler.run(start, n_samples, horizon, rng, record=(half,))
    inner = {model.origin} | {s for w in atlas.test_set for s in w.word}
    tags = [_cluster_tag(cl) for cl in atlas.clusters]
    lumpable = model.potential.lumpable
    lasts = sorted({w.last for w in atlas.test_set}, key=model.graph.key)
    by_state: dict = {}
    by_key: dict = {}

    def assign(i: int):
        if i in by_state:
            return by_state[i]
        s = sampler.states[i]
        if s in inner:
            by_state[i] = None
            return None
        # away from the test words a lumped profile only depends on the classes of their last states
        lump = model.graph.lumping(s) if lumpable else None
        key = tuple(lump.class_of(t) for t in lasts) if lump is not None else s
        if key not in by_key:
            x = point_in((s,), model.graph)
            prof = kernel_profile(x, atlas.lam, model, atlas.test_set, tol, rtol)
            d = [rho_distance(prof, cl.centroid, atlas.constants).value for cl in atlas.clusters]
            by_key[key] = int(np.argmin(d))
        by_state[i] = by_key[key]
        return by_state[i]

    counts = {t: 0 for t in tags}
    lost = 0
    for i_half, i_end in zip(snaps[half], pos):
        a, b = assign(int(i_half)), assign(int(i_end))
        if a is None or a != b:
            lost += 1
        else:
            counts[tags[a]] += 1
    escaped = n_samples - lost
    freqs = {t: c / escaped if escaped else 0.0 for t, c in counts.items()}
    intervals = {t: wilson_interval(c, escaped) for t, c in counts.items()}
    return HittingReport(counts, freqs, intervals, lost, n_samples, horizon, seed)


def return_counts(walk: WalkSpec, state, n_samples: int, horizon: int, seed: int) -> dict:
    """Monte-Carlo visits to ``state`` in the first and second half of the horizon."""
    sampler = _Sampler(walk)
    rng = np.random.default_rng(seed)
    target = sampler.intern(state)
    pos = np.full(n_samples, sampler.intern(walk.start), dtype=np.int64)
    first = np.zeros(n_samples)
    second = np.zeros(n_samples)
    for step in range(1, horizon + 1):
        pos = sampler.step(pos, rng)
        hit = pos == target
        if step <= horizon // 2:
            first += hit
        else:
            second += hit
    return {"first_half": float(first.mean()), "second_half": float(second.mean()), "horizon": horizon}
