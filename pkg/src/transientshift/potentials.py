"""Finite-range potentials, Birkhoff sums, variations, pressure and transience."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BudgetExhausted, Diverging, Inadmissible
from .shift_core import Cylinder, StateGraph, TailPoint, TwoSidedPoint, point_admissible


class Potential:
    """A function of the first ``range`` coordinates of a point.

    ``fn`` receives an admissible word of length ``range`` and returns a real.
    ``constant`` is set when the potential does not depend on the word, and
    ``table`` when it was given by a finite table (used by :func:`variation`).
    """

    def __init__(
        self,
        graph: StateGraph,
        fn: Callable[[tuple], float],
        range: int = 2,
        name: str = "potential",
        constant: Optional[float] = None,
        table: Optional[dict] = None,
        lambda_shift: float = 1.0,
        lumpable: bool = False,
    ):
        if range < 2:
            raise ValueError("range must be at least 2")
        self.graph = graph
        self.fn = fn
        self.range = range
        self.name = name
        self.constant = constant
        self.table = table
        self.lambda_shift = lambda_shift
        # True when phi is invariant under the symmetries behind graph.lumping
        self.lumpable = lumpable or constant is not None
        self.cache: dict = {}

    @property
    def markovian(self) -> bool:
        return self.range == 2

    def __call__(self, word: Sequence) -> float:
        word = tuple(word)
        if len(word) != self.range:
            raise ValueError(f"expected a word of length {self.range}")
        return self.fn(word) - math.log(self.lambda_shift)

    def edge(self, a, b) -> float:
        """Markovian value phi(a, b)."""
        return self((a, b))

    def at(self, x: TailPoint, i: int = 0) -> float:
        """phi(T^i x)."""
        return self(tuple(x.coord(i + k) for k in range(self.range)))

    def shifted(self, lam: float) -> "Potential":
        """phi - log(lam)."""
        return Potential(
            self.graph, self.fn, self.range, self.name, self.constant, self.table,
            lambda_shift=self.lambda_shift * lam, lumpable=self.lumpable,
        )


def constant_potential(graph: StateGraph, alpha: float) -> Potential:
    return Potential(graph, lambda w: alpha, 2, f"constant {alpha}", constant=alpha)


def markov_potential(graph: StateGraph, weight: Callable, name: str = "markov") -> Potential:
    """Potential phi(x) = weight(x_0, x_1)."""
    return Potential(graph, lambda w: weight(w[0], w[1]), 2, name)


def table_potential(graph: StateGraph, table: dict, default: Optional[float] = None) -> Potential:
    """Potential given by a finite table of r-words (r inferred from the keys)."""
    table = {tuple(k): float(v) for k, v in table.items()}
    lengths = {len(k) for k in table}
    if len(lengths) != 1:
        raise ValueError("all table words must have the same length")
    r = lengths.pop()

    def fn(w):
        try:
            return table[w]
        except KeyError:
            if default is None:
                raise Inadmissible(f"potential table has no entry for {w!r}")
            return default

    return Potential(graph, fn, r, "table", table=table)


def log_stochastic(graph: StateGraph, prob: Callable, dual: bool = False,
                   lumpable: bool = False) -> Potential:
    """phi(a, b) = log P(a, b), or log P(b, a) when ``dual``."""
    if dual:
        return Potential(graph, lambda w: math.log(prob(w[1], w[0])), 2, "log_stochastic_dual",
                         lumpable=lumpable)
    return Potential(graph, lambda w: math.log(prob(w[0], w[1])), 2, "log_stochastic",
                     lumpable=lumpable)


def birkhoff_sum(p: Potential, word: Sequence, tail: TailPoint, n: int) -> float:
    """phi_n of the point word·tail."""
    x = tail.prepend(tuple(word))
    if word and not point_admissible(x, p.graph):
        raise Inadmissible(f"{tuple(word)} does not continue into {tail}")
    return sum(p.at(x, i) for i in range(n))


def variation(p: Potential, m: int, states: Optional[Sequence] = None) -> float:
    """Var_m(phi): largest spread of phi between points sharing m-1 coordinates.

    Table-backed potentials are scanned exhaustively; otherwise the admissible
    r-words starting in ``states`` are scanned.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    if m > p.range or p.constant is not None:
        return 0.0
    if p.table is not None:
        words = list(p.table)
    else:
        if states is None:
            raise ValueError("a finite state set is needed for a lazily defined potential")
        words = []
        for s in states:
            stack = [(s,)]
            while stack:
                w = stack.pop()
                if len(w) == p.range:
                    words.append(w)
                    continue
                stack.extend(w + (t,) for t in p.graph.out_edges(w[-1]))
    groups: dict = {}
    for w in words:
        v = p(w)
        lo, hi = groups.get(w[: m - 1], (v, v))
        groups[w[: m - 1]] = (min(lo, v), max(hi, v))
    return max((hi - lo for lo, hi in groups.values()), default=0.0)


@dataclass
class PressureEstimate:
    ns: list
    values: list
    log_z: list
    extrapolated: float
    window: tuple


def cycle_log_sums(p: Potential, a, n_max: int) -> list:
    """log Z_n(phi, a) for n = 0..n_max (``-inf`` when there is no cycle)."""
    g = p.graph
    lump = g.lumping(a) if (p.lumpable and p.range == 2) else None
    if lump is not None:
        return _lumped_cycle_sums(p, lump, n_max)
    r = p.range
    starts = [(a,)]
    for _ in range(r - 2):
        starts = [w + (t,) for w in starts for t in g.out_edges(w[-1])]
    out = [-math.inf] * (n_max + 1)
    out[0] = 0.0
    for u in starts:
        cur = {u: 0.0}
        for n in range(1, n_max + 1):
            nxt: dict = {}
            for ctx, lw in cur.items():
                for t in g.out_edges(ctx[-1]):
                    new = ctx[1:] + (t,)
                    val = lw + p(ctx + (t,))
                    nxt[new] = np.logaddexp(nxt[new], val) if new in nxt else val
            cur = nxt
            if u in cur:
                out[n] = float(np.logaddexp(out[n], cur[u]))
    return out


def _lumped_cycle_sums(p: Potential, lump, n_max: int) -> list:
    out = [-math.inf] * (n_max + 1)
    out[0] = 0.0
    cur = {lump.target_class: 0.0}
    for n in range(1, n_max + 1):
        nxt: dict = {}
        for c, lw in cur.items():
            for c2, mult, rep in lump.class_out(c):
                val = lw + p(rep) + math.log(mult)
                nxt[c2] = float(np.logaddexp(nxt[c2], val)) if c2 in nxt else val
        cur = nxt
        out[n] = cur.get(lump.target_class, -math.inf)
    return out


def gurevich_pressure(p: Potential, a, n_max: int) -> PressureEstimate:
    """Growth rate of weighted cycle sums through ``a``.

    The estimate is the slope of an affine fit of log Z_n against n over the
    trailing half of the n that are multiples of the graph period.
    """
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    log_z = cycle_log_sums(p, a, n_max)
    per = p.graph.period
    ns = [n for n in range(per, n_max + 1, per) if log_z[n] > -math.inf]
    if not ns:
        raise ValueError(f"no cycle through {a!r} up to length {n_max}")
    values = [log_z[n] / n for n in ns]
    tail = ns[len(ns) // 2:]
    if len(tail) >= 2:
        slope = float(np.polyfit(tail, [log_z[n] for n in tail], 1)[0])
    else:
        slope = values[-1]
    return PressureEstimate(ns, values, log_z, slope, (tail[0], tail[-1]))


@dataclass
class TransienceVerdict:
    classification: str
    ratios: list = field(default_factory=list)
    partial: float = 0.0
    tail_bound: Optional[float] = None
    terms: int = 0


def classify(
    p: Potential,
    lam: float,
    f,
    x: TailPoint,
    budget: int = 4000,
    tol: float = 1e-8,
    divergence_factor: float = 10.0,
) -> TransienceVerdict:
    """Transient, recurrent or inconclusive, from Green partial sums of f at x."""
    from .green_martin import green
    from .transfer import SimpleFunction

    if isinstance(f, Cylinder):
        f = SimpleFunction.indicator(f.word)
    try:
        gv = green(f, x, lam, p, tol=tol, rtol=tol, n_cap=budget,
                   divergence_factor=divergence_factor)
    except Diverging as exc:
        return TransienceVerdict("recurrent", exc.ratios, exc.partial, None, budget)
    except BudgetExhausted as exc:
        return TransienceVerdict("inconclusive", exc.ratios, exc.partial, None, budget)
    return TransienceVerdict("transient", gv.ratio_window, gv.partial, gv.tail_bound, gv.N)


class TransferFunction:
    """psi on two-sided points, depending on coordinates lo..hi."""

    def __init__(self, fn: Callable[[TwoSidedPoint], float], lo: int, hi: int):
        self.fn = fn
        self.lo = lo
        self.hi = hi

    def __call__(self, z: TwoSidedPoint) -> float:
        return self.fn(z)


def reverse_potential(p: Potential):
    """Potential on the reversed shift and the transfer function psi.

    The reversed potential lives on ``p.graph.reversed()``, whose points list
    y_0, y_-1, … ; it is phi^-(y) = phi(y_-(r-1), …, y_0), and
    psi(z) = -sum_{k=1}^{r-1} phi(z_-k, …, z_{r-1-k}), so that
    phi(z^+) - phi^-(z^-) = psi(z) - psi(T z).
    """
    r = p.range
    rev_graph = p.graph.reversed()
    if p.constant is not None:
        minus = Potential(rev_graph, p.fn, r, p.name + "^-", constant=p.constant,
                          lambda_shift=p.lambda_shift)
    else:
        minus = Potential(rev_graph, lambda w: p.fn(tuple(reversed(w))), r, p.name + "^-",
                          lambda_shift=p.lambda_shift)

    def psi(z: TwoSidedPoint) -> float:
        return -sum(p(tuple(z.coord(i) for i in range(-k, r - k))) for k in range(1, r))

    return minus, TransferFunction(psi, -(r - 1), r - 2)


def cohomology_residual(p: Potential, minus: Potential, psi: TransferFunction, z: TwoSidedPoint) -> float:
    """|phi(z^+) - phi^-(z^-) - psi(z) + psi(T z)|."""
    plus = p.at(z.future)
    neg = minus.at(z.past)
    return abs(plus - neg - psi(z) + psi(z.shifted()))
