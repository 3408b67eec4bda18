"""Reversed shift, the chi pairing, eigenfunctions from reversed conformal measures, and ratio limits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import RangeTooLarge, SamplerDegenerate
from .measures_dlr import CylinderMeasure, conformality_residual
from .model import Model
from .potentials import Potential, classify, reverse_potential
from .shift_core import TailPoint, point_in
from .transfer import SimpleFunction


def reverse_model(model: Model) -> Model:
    """The model on the reversed graph with the reversed potential.

    Points of the reversed shift list y_0, y_-1, … and are handled as
    ordinary points of the reversed graph.
    """
    minus, psi = reverse_potential(model.potential)
    rev = Model(
        model.name + "^rev",
        minus.graph,
        minus,
        model.origin,
        orbits=dict(model.reversed_orbits),
        params=dict(model.params, psi=psi),
        reversed_orbits=dict(model.orbits),
    )
    return rev


def chi(x: TailPoint, p: Potential) -> SimpleFunction:
    """sum over b in in(x_0) of exp(phi(b, x_0)) 1_[b], a function on the reversed shift."""
    if not p.markovian:
        raise RangeTooLarge("the chi pairing is implemented for Markovian potentials")
    x0 = x.x0
    return SimpleFunction(tuple((math.exp(p.edge(b, x0)), (b,)) for b in p.graph.in_edges(x0)))


@dataclass
class Eigenfunction:
    """A positive function on points; ``width`` gives an error bar when known."""

    rule: Callable
    lam: float
    flagged: bool = False
    notes: dict = field(default_factory=dict)
    width: Optional[Callable] = None
    table: Optional[Callable] = None

    def __call__(self, x: TailPoint) -> float:
        return self.rule(x)

    @classmethod
    def from_table(cls, table: Callable, lam: float) -> "Eigenfunction":
        """Eigenfunction depending on the first coordinate only."""
        return cls(lambda x: table(x.x0), lam, table=table)


def pi_map(mu_minus: CylinderMeasure, model: Model, lam: float, check_words: Sequence = (),
           tol: float = 1e-10) -> Eigenfunction:
    """h(x) = mu^-(chi_x) for a measure on the reversed shift.

    Conformality of ``mu_minus`` for the reversed potential is checked on
    ``check_words``; failures flag the result instead of raising.
    """
    p = model.potential
    flagged = False
    notes = {}
    if check_words:
        minus, _ = reverse_potential(p)
        res = conformality_residual(mu_minus, lam, minus, check_words, tol)
        bad = [r for r in res if not r.ok]
        if bad:
            flagged = True
            notes["not_conformal"] = {str(r.word): r.residual for r in bad}

    def h(x):
        return mu_minus.pair(chi(x, p))

    def width(x):
        return mu_minus.pair_width(chi(x, p))

    return Eigenfunction(h, lam, flagged, notes, width)


@dataclass
class PointResidual:
    point: str
    residual: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.residual <= self.bound


def eigen_residual(h: Eigenfunction, points: Sequence[TailPoint], p: Potential, tol: float = 0.0) -> list:
    """|L h(x) - lam h(x)| with L h(x) = sum over b in in(x_0) of exp(phi(b, x_0)) h(b·x)."""
    if not p.markovian:
        raise RangeTooLarge("eigen_residual needs a Markovian potential")
    out = []
    for x in points:
        x0 = x.x0
        lh = 0.0
        wid = 0.0
        for b in p.graph.in_edges(x0):
            y = x.prepend((b,))
            wt = math.exp(p.edge(b, x0))
            lh += wt * h(y)
            if h.width is not None:
                wid += wt * h.width(y)
        if h.width is not None:
            wid += h.lam * h.width(x)
        out.append(PointResidual(str(x), abs(lh - h.lam * h(x)), tol + wid))
    return out


def normalization_residual(h: Eigenfunction, points: Sequence[TailPoint], p: Potential) -> list:
    """|L_{phi^h} 1 (x) - 1| for phi^h = phi + log h - log h∘T - log lam."""
    out = []
    for x in points:
        hx = h(x)
        total = sum(math.exp(p.edge(b, x.x0)) * h(x.prepend((b,))) for b in p.graph.in_edges(x.x0))
        out.append(abs(total / (h.lam * hx) - 1.0))
    return out


def reconstruction_residual(mu_minus: CylinderMeasure, model: Model, lam: float, word: Sequence,
                            x: TailPoint) -> float:
    """Gap in mu^-[x_0, a_1, …, a_n] = lam^-(n+1) exp(phi_n(a_n … a_1 x)) (pi mu^-)(a_n … a_1 x).

    ``word`` is (a_n, …, a_1), read in forward time.
    """
    p = model.potential
    word = tuple(word)
    n = len(word)
    y = x.prepend(word)
    g = p.graph
    if any(y.coord(i + 1) not in g.out_edges(y.coord(i)) for i in range(n)):
        raise ValueError(f"word {word!r} does not lead into {x.x0!r}")
    phi_n = sum(p.edge(y.coord(i), y.coord(i + 1)) for i in range(n))
    rev_word = (x.x0,) + tuple(reversed(word))
    lhs = mu_minus(rev_word)
    rhs = lam ** (-(n + 1)) * math.exp(phi_n) * mu_minus.pair(chi(y, p))
    return abs(lhs - rhs)


@dataclass
class DualityReport:
    lam: float
    forward: str
    backward: str
    agree: bool
    certified: bool

    def to_json(self) -> dict:
        return {"lambda": self.lam, "forward": self.forward, "backward": self.backward,
                "agree": self.agree, "certified": self.certified}


def transience_duality_check(model: Model, lam: float, budget: int = 4000, tol: float = 1e-8) -> DualityReport:
    """Classify the forward and reversed potentials at lam from the origin cylinder."""
    p = model.potential
    minus, _ = reverse_potential(p)
    o = model.origin
    f = SimpleFunction.indicator((o,))
    fwd = classify(p, lam, f, point_in((o,), p.graph), budget, tol).classification
    bwd = classify(minus, lam, f, point_in((o,), minus.graph), budget, tol).classification
    certified = "inconclusive" not in (fwd, bwd)
    agree = fwd == bwd or not certified
    return DualityReport(lam, fwd, bwd, agree, certified)


@dataclass
class RatioTrajectories:
    ratios: np.ndarray
    states: list

    @property
    def final(self) -> np.ndarray:
        return self.ratios[:, -1]

    def oscillation(self, last: int = 10) -> np.ndarray:
        tail = self.ratios[:, -last:]
        return tail.max(axis=1) - tail.min(axis=1)


def poisson_ratio_limit(
    f: Eigenfunction,
    h: Eigenfunction,
    x: TailPoint,
    p: Potential,
    n_max: int,
    n_samples: int,
    seed: int,
) -> RatioTrajectories:
    """Sample backward extensions y_-n … y_0 x under the h-transformed weights and track f/h.

    From a point z the next preimage b·z is drawn with probability
    exp(phi(b, z_0)) h(b·z) / (lam h(z)).
    """
    rng = np.random.default_rng(seed)
    ratios = np.empty((n_samples, n_max + 1))
    ends = []
    g = p.graph
    # first-coordinate tables let the chain run on states instead of points
    by_state = f.table is not None and h.table is not None
    if by_state:
        fval, hval = f.table, h.table
        extend = lambda z, b: b
        head = lambda z: z
        z_start = x.x0
    else:
        fval, hval = f, h
        extend = lambda z, b: z.prepend((b,))
        head = lambda z: z.x0
        z_start = x
    for k in range(n_samples):
        z = z_start
        hz = hval(z)
        if hz <= 0:
            raise SamplerDegenerate("h must be positive at the starting point")
        ratios[k, 0] = fval(z) / hz
        for n in range(1, n_max + 1):
            z0 = head(z)
            cands = [extend(z, b) for b in g.in_edges(z0)]
            hs = [hval(y) for y in cands]
            w = np.array([math.exp(p.edge(b, z0)) * hy for b, hy in zip(g.in_edges(z0), hs)])
            total = w.sum()
            if not total > 0:
                raise SamplerDegenerate(f"no backward weight at {z0!r}")
            j = min(int(np.searchsorted(np.cumsum(w) / total, rng.random(), side="right")), len(cands) - 1)
            z, hz = cands[j], hs[j]
            ratios[k, n] = fval(z) / hz
        ends.append(head(z))
    return RatioTrajectories(ratios, ends)
