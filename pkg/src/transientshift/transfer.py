"""Iterated Ruelle operators on finite combinations of cylinder indicators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import RangeTooLarge
from .potentials import Potential
from .shift_core import Cylinder, TailPoint, shift


@dataclass(frozen=True)
class SimpleFunction:
    """f = sum of coefficient * indicator of a cylinder."""

    terms: tuple

    def __post_init__(self):
        terms = tuple((float(c), w if isinstance(w, Cylinder) else Cylinder(w)) for c, w in self.terms)
        object.__setattr__(self, "terms", terms)

    @classmethod
    def indicator(cls, word) -> "SimpleFunction":
        """1_[word]. A tuple or list is always read as a word, so tuple-valued states must be wrapped."""
        if isinstance(word, Cylinder):
            return cls(((1.0, word),))
        if not isinstance(word, (tuple, list)):
            word = (word,)
        return cls(((1.0, Cylinder(tuple(word))),))

    @classmethod
    def zero(cls) -> "SimpleFunction":
        return cls(())

    def __call__(self, x: TailPoint) -> float:
        return sum(c for c, w in self.terms if w.contains(x))

    def on_word(self, head: Sequence) -> float:
        """Value at any point whose first coordinates are ``head``."""
        head = tuple(head)
        return sum(c for c, w in self.terms if head[: len(w)] == w.word)

    def __add__(self, other: "SimpleFunction") -> "SimpleFunction":
        return SimpleFunction(self.terms + other.terms).merged()

    def scaled(self, k: float) -> "SimpleFunction":
        return SimpleFunction(tuple((k * c, w) for c, w in self.terms))

    def merged(self) -> "SimpleFunction":
        acc: dict = {}
        for c, w in self.terms:
            acc[w] = acc.get(w, 0.0) + c
        return SimpleFunction(tuple((c, w) for w, c in acc.items() if c != 0.0))

    @property
    def depth(self) -> int:
        return max((len(w) for _, w in self.terms), default=1)


def _context_len(f: SimpleFunction, p: Potential) -> int:
    return max(p.range - 1, f.depth, 1)


def iterate_terms(f: SimpleFunction, x: TailPoint, p: Potential, lam: float = 1.0,
                  log_domain: bool = False) -> Iterator[float]:
    """Yield lam^-n (L^n f)(x) for n = 0, 1, 2, …

    Backward paths are merged on their first ``c`` coordinates, where ``c``
    covers both the potential's range and the deepest cylinder of ``f``.
    """
    g = p.graph
    c = _context_len(f, p)
    r1 = p.range - 1
    log_lam = math.log(lam)
    start = x.head(c)
    cur = {start: 0.0 if log_domain else 1.0}
    while True:
        if log_domain:
            yield _pair_log(cur, f)
        else:
            yield sum(w * f.on_word(ctx) for ctx, w in cur.items())
        nxt: dict = {}
        for ctx, w in cur.items():
            for b in g.in_edges(ctx[0]):
                new = (b,) + ctx[: c - 1]
                phi = p((b,) + ctx[:r1])
                if log_domain:
                    val = w + phi - log_lam
                    nxt[new] = float(np.logaddexp(nxt[new], val)) if new in nxt else val
                else:
                    val = w * math.exp(phi) / lam
                    nxt[new] = nxt.get(new, 0.0) + val
        if not log_domain and any(math.isinf(v) for v in nxt.values()):
            raise OverflowError("operator iterate overflowed; use log_domain=True")
        cur = nxt


def _pair_log(cur: dict, f: SimpleFunction) -> float:
    total = 0.0
    for ctx, lw in cur.items():
        v = f.on_word(ctx)
        if v:
            total += v * math.exp(lw)
    return total


def eval_Ln(f: SimpleFunction, x: TailPoint, n: int, p: Potential, log_domain: bool = False) -> float:
    """Exact (L^n f)(x); n = 0 returns f(x)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    for k, v in enumerate(iterate_terms(f, x, p, 1.0, log_domain)):
        if k == n:
            return v
    raise AssertionError("unreachable")


def push_L(f: SimpleFunction, p: Potential) -> SimpleFunction:
    """L f as a simple function (Markovian potentials only)."""
    if not p.markovian:
        raise RangeTooLarge("push_L needs a Markovian potential; use eval_Ln")
    out = []
    for c, cyl in f.terms:
        w = cyl.word
        if len(w) >= 2:
            out.append((c * math.exp(p.edge(w[0], w[1])), Cylinder(w[1:])))
        else:
            for b in p.graph.out_edges(w[0]):
                out.append((c * math.exp(p.edge(w[0], b)), Cylinder((b,))))
    return SimpleFunction(tuple(out)).merged()


def push_L_power(f: SimpleFunction, p: Potential, n: int) -> SimpleFunction:
    for _ in range(n):
        f = push_L(f, p)
    return f


def backward_partition_sum(x: TailPoint, n: int, p: Potential) -> float:
    """Sum of exp(phi_n(y)) over all y with T^n y = T^n x."""
    if n < 1:
        raise ValueError("n must be >= 1")
    base = x
    for _ in range(n):
        base = shift(base)
    g = p.graph
    r1 = p.range - 1
    cur = {base.head(r1): 1.0}
    for _ in range(n):
        nxt: dict = {}
        for ctx, w in cur.items():
            for b in g.in_edges(ctx[0]):
                new = ((b,) + ctx)[:r1]
                nxt[new] = nxt.get(new, 0.0) + w * math.exp(p((b,) + ctx))
        cur = nxt
    return sum(cur.values())
