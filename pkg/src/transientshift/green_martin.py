"""Green's functions with certified tails, Martin kernels, the rho metric and boundary atlases."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np
from scipy.optimize import nnls

from .errors import BudgetExhausted, Diverging, MismatchedTestSet, NotCauchy, NotEscaping, RangeTooLarge
from .model import Model
from .potentials import Potential
from .shift_core import Cylinder, TailPoint
from .transfer import SimpleFunction, iterate_terms


@dataclass
class GreenValue:
    partial: float
    tail_bound: float
    N: int
    ratio_window: list
    q: float

    @property
    def lo(self) -> float:
        return self.partial - (self.tail_bound if self.partial < 0 else 0.0)

    @property
    def hi(self) -> float:
        return self.partial + (self.tail_bound if self.partial >= 0 else 0.0)

    def to_json(self) -> dict:
        return {
            "partial": self.partial,
            "tail_bound": self.tail_bound,
            "N": self.N,
            "q": self.q,
            "ratio_window": list(self.ratio_window),
        }


def certify_series(
    terms: Iterable[float],
    tol: float,
    rtol: float = 0.0,
    n_cap: int = 20000,
    block: int = 1,
    window: int = 8,
    divergence_factor: float = 10.0,
    q_max: float = 1.0 - 1e-9,
) -> GreenValue:
    """Sum a nonnegative-type series until a geometric tail certificate holds.

    Terms are grouped into blocks of ``block`` consecutive terms (the graph
    period) and the ratio test runs on block sums. When the trailing ratios
    rise, the ratio bound is pushed up by an extrapolation of the trend, so
    that ratios of the form rho*(1 - c/k) still give a valid bound.
    """
    partial = 0.0
    blocks: list = []
    ratios: list = []
    first = None
    acc = 0.0
    n = 0
    zeros = longest_gap = 0
    for t in terms:
        partial += t
        acc += t
        n += 1
        if n % block:
            if n >= n_cap:
                break
            continue
        s = abs(acc)
        acc = 0.0
        if s == 0.0:
            # gaps between nonzero blocks say nothing about decay; a long enough
            # run of zeros means the series has ended
            if first is not None:
                zeros += 1
                if zeros >= max(window, 4 * longest_gap + 1):
                    return GreenValue(partial, 0.0, n, list(ratios[-window:]), 0.0)
            if n >= n_cap:
                break
            continue
        longest_gap = max(longest_gap, zeros)
        zeros = 0
        if blocks:
            ratios.append(s / blocks[-1])
        blocks.append(s)
        if first is None:
            first = s
        if len(ratios) >= window:
            win = ratios[-window:]
            k = len(blocks)
            if max(win) < 1.0:
                q = max(win)
                trend = win[-1] - win[0]
                if trend > 0:
                    q = max(q, win[-1] + 2.0 * trend * k / (window - 1))
                q = min(q * (1 + 1e-9) + 1e-300, 1.0)
                if q < q_max:
                    tail = s * q / (1.0 - q)
                    if tail <= max(tol, rtol * abs(partial)):
                        return GreenValue(partial, tail, n, list(win), q)
            elif min(win) >= 1.0 and win[-1] >= win[0] and abs(partial) >= divergence_factor * first:
                raise Diverging(f"ratios >= 1 sustained after {n} terms", partial, list(win))
        if n >= n_cap:
            break
    raise BudgetExhausted(f"no certificate within {n_cap} terms", partial, ratios[-window:])


class _StateGreen:
    """Layers v_n(s) = sum over length-n paths s -> target of prod exp(phi)/lam.

    With a lumping the layers are indexed by classes instead of states.
    """

    def __init__(self, p: Potential, lam: float, target, lump=None):
        self.p = p
        self.lam = lam
        self.lump = lump
        self.g = p.graph
        start = lump.target_class if lump is not None else target
        self.layers = [{start: 1.0}]

    def _step(self):
        cur = self.layers[-1]
        nxt: dict = {}
        p, lam = self.p, self.lam
        if self.lump is None:
            for t, v in cur.items():
                for s in self.g.in_edges(t):
                    nxt[s] = nxt.get(s, 0.0) + math.exp(p.edge(s, t)) / lam * v
        else:
            cand = set()
            for c in cur:
                cand.update(self.lump.class_in(c))
            for c in cand:
                tot = 0.0
                for c2, mult, rep in self.lump.class_out(c):
                    v = cur.get(c2)
                    if v:
                        tot += mult * math.exp(p(rep)) / lam * v
                if tot:
                    nxt[c] = tot
        self.layers.append(nxt)

    def value(self, key, n: int) -> float:
        while len(self.layers) <= n:
            self._step()
        return self.layers[n].get(key, 0.0)


def _state_green(p: Potential, lam: float, target):
    lump = p.graph.lumping(target) if p.lumpable else None
    key = ("sg", lam, lump.key if lump is not None else ("state", target))
    sg = p.cache.get(key)
    if sg is None:
        sg = _StateGreen(p, lam, target, lump)
        p.cache[key] = sg
    return sg, lump


def _word_weight(p: Potential, word: Sequence, lam: float) -> float:
    w = 1.0
    for a, b in zip(word, word[1:]):
        w *= math.exp(p.edge(a, b)) / lam
    return w


def _markov_plan(f: SimpleFunction, x: TailPoint, p: Potential, lam: float):
    """Per-term data for the Markov Green stream, plus a cache signature."""
    sg, lump = _state_green(p, lam, x.x0)
    head = x.head(f.depth)
    plan = []
    sig = []
    for c, cyl in f.terms:
        w = cyl.word
        m = len(w) - 1
        key = lump.class_of(w[-1]) if lump is not None else w[-1]
        overlaps = tuple(
            _word_weight(p, w[: n + 1], lam) if head[: m - n + 1] == w[n:] else 0.0 for n in range(m)
        )
        plan.append((c, m, _word_weight(p, w, lam), key, overlaps))
        sig.append((c, w, key, tuple(o != 0.0 for o in overlaps)))
    ident = lump.key if lump is not None else ("state", x.x0)
    return sg, plan, (ident, tuple(sig))


def _markov_terms(sg: _StateGreen, plan) -> Iterator[float]:
    n = 0
    while True:
        total = 0.0
        for c, m, weight, key, overlaps in plan:
            if n < m:
                total += c * overlaps[n]
            else:
                total += c * weight * sg.value(key, n - m)
        yield total
        n += 1


def green(
    f: SimpleFunction,
    x: TailPoint,
    lam: float,
    p: Potential,
    tol: float = 1e-10,
    n_cap: int = 20000,
    rtol: float = 0.0,
    method: str = "auto",
    window: int = 8,
    divergence_factor: float = 10.0,
) -> GreenValue:
    """Certified partial sum of G(f, x | lam) = sum_n lam^-n (L^n f)(x).

    ``method`` is ``"paths"`` for the generic backward-path DP or ``"states"``
    for the Markovian reduction to state-to-state path weights; ``"auto"``
    picks the latter whenever the potential is Markovian.
    """
    if lam <= 0 or tol <= 0:
        raise ValueError("lambda and tol must be positive")
    if method == "auto":
        method = "states" if p.markovian else "paths"
    if method == "states":
        if not p.markovian:
            raise RangeTooLarge("the state reduction needs a Markovian potential")
        sg, plan, sig = _markov_plan(f, x, p, lam)
        key = ("gv", lam, tol, rtol, n_cap, window, sig)
        terms = _markov_terms(sg, plan)
    else:
        depth = max(p.range - 1, f.depth)
        key = ("gvp", lam, tol, rtol, n_cap, window, f, x.head(depth))
        terms = iterate_terms(f, x, p, lam)
    hit = p.cache.get(key)
    if hit is not None:
        return hit
    gv = certify_series(terms, tol, rtol, n_cap, block=p.graph.period, window=window,
                        divergence_factor=divergence_factor)
    p.cache[key] = gv
    return gv


@dataclass(frozen=True)
class KernelValue:
    value: float
    lo: float
    hi: float

    @property
    def err(self) -> float:
        return max(self.hi - self.value, self.value - self.lo)


def _ratio(num: GreenValue, den: GreenValue) -> KernelValue:
    a, b = num.lo, num.hi
    c, d = den.lo, den.hi
    if c <= 0:
        raise ValueError("Green value of the origin cylinder must be positive")
    qs = (a / c, a / d, b / c, b / d)
    return KernelValue(num.partial / den.partial, min(qs), max(qs))


def martin_kernel(
    f: SimpleFunction,
    x: TailPoint,
    lam: float,
    model: Model,
    tol: float = 1e-300,
    rtol: float = 1e-12,
    n_cap: int = 20000,
) -> KernelValue:
    """K(f, x | lam) = G(f, x) / G(1_[o], x) with an interval error bar."""
    origin = SimpleFunction.indicator((model.origin,))
    if f.merged() == origin:
        return KernelValue(1.0, 1.0, 1.0)
    p = model.potential
    den = green(origin, x, lam, p, tol=tol, rtol=rtol, n_cap=n_cap)
    num = green(f, x, lam, p, tol=tol, rtol=rtol, n_cap=n_cap)
    return _ratio(num, den)


@dataclass
class KernelProfile:
    test_set: tuple
    values: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    indicators: np.ndarray
    at: str

    def to_json(self, fmt=str) -> dict:
        return {
            "at": self.at,
            "values": [float(v) for v in self.values],
            "lo": [float(v) for v in self.lo],
            "hi": [float(v) for v in self.hi],
        }


def default_test_set(model: Model, depth: int = 2, radius: int = 2) -> tuple:
    """All admissible words of length <= depth starting within ``radius`` of the origin.

    The origin cylinder comes first, then shorter words before longer ones.
    """
    g = model.graph
    ball = g.ball(model.origin, radius)
    words = [(s,) for s in ball]
    layer = words
    for _ in range(depth - 1):
        layer = [w + (t,) for w in layer for t in g.out_edges(w[-1])]
        words += layer
    words.remove((model.origin,))
    return (Cylinder((model.origin,)),) + tuple(Cylinder(w) for w in words)


def kernel_profile(
    x: TailPoint,
    lam: float,
    model: Model,
    test_set: Sequence[Cylinder],
    tol: float = 1e-300,
    rtol: float = 1e-12,
    n_cap: int = 20000,
) -> KernelProfile:
    test_set = tuple(test_set)
    if not test_set or Cylinder((model.origin,)) not in test_set:
        raise ValueError("test set must contain the origin cylinder")
    vals = [martin_kernel(SimpleFunction.indicator(w.word), x, lam, model, tol, rtol, n_cap)
            for w in test_set]
    ind = [1.0 if w.contains(x) else 0.0 for w in test_set]
    return KernelProfile(
        test_set,
        np.array([v.value for v in vals]),
        np.array([v.lo for v in vals]),
        np.array([v.hi for v in vals]),
        np.array(ind),
        str(x),
    )


def best_path_weight(p: Potential, lam: float, a, b, cap: int = 256):
    """(length, weight) of the heaviest shortest path a -> b, weight = prod exp(phi)/lam."""
    if a == b:
        return 0, 1.0
    g = p.graph
    best = {a: 1.0}
    frontier = {a: 1.0}
    for d in range(1, cap + 1):
        nxt: dict = {}
        for s, w in frontier.items():
            for t in g.out_edges(s):
                if t in best:
                    continue
                val = w * math.exp(p.edge(s, t)) / lam
                if val > nxt.get(t, 0.0):
                    nxt[t] = val
        if b in nxt:
            return d, nxt[b]
        best.update(nxt)
        frontier = nxt
        if not frontier:
            break
    raise ValueError(f"no path from {a!r} to {b!r} within {cap} steps")


def harnack_pair(model: Model, lam: float, a, b) -> tuple:
    """(c_ab, C_ab) with c_ab G(1_[b], x) <= G(1_[a], x) <= C_ab G(1_[b], x) for all x."""
    p = model.potential
    if not p.markovian:
        raise RangeTooLarge("constructive constants are implemented for Markovian potentials")
    _, w_ab = best_path_weight(p, lam, a, b)
    _, w_ba = best_path_weight(p, lam, b, a)
    return w_ab, 1.0 / w_ba


def kernel_bounds(model: Model, lam: float, word: Sequence) -> tuple:
    """(c_f, C_f) bracketing K(1_[word], x) over all x."""
    word = tuple(word)
    p = model.potential
    c_low, _ = harnack_pair(model, lam, word[-1], model.origin)
    _, c_up = harnack_pair(model, lam, word[0], model.origin)
    return _word_weight(p, word, lam) * c_low, c_up


@dataclass(frozen=True)
class RhoValue:
    value: float
    error: float
    tail: float


class RhoMetric:
    """Truncated rho pseudo-metric on profiles over a fixed test set.

    ``mode`` is ``"constructive"`` (upper kernel bounds from heaviest paths)
    or ``"empirical"`` (running sup of every profile passed to ``observe``).
    """

    def __init__(self, model: Model, lam: float, test_set: Sequence[Cylinder], mode: str = "constructive"):
        self.test_set = tuple(test_set)
        self.mode = mode
        if mode == "constructive":
            self.constants = np.array([kernel_bounds(model, lam, w.word)[1] for w in self.test_set])
        elif mode == "empirical":
            self.constants = np.zeros(len(self.test_set))
        else:
            raise ValueError(f"unknown bounds mode {mode!r}")
        self.weights = self._weights()

    def _weights(self):
        i = np.arange(1, len(self.test_set) + 1)
        return 1.0 / (2.0 ** i * (self.constants + 1.0))

    def observe(self, prof: KernelProfile) -> None:
        if self.mode == "empirical":
            self.constants = np.maximum(self.constants, prof.hi)
            self.weights = self._weights()

    def distance(self, a: KernelProfile, b: KernelProfile) -> RhoValue:
        return rho_distance(a, b, self.constants, self.test_set)


def rho_distance(a: KernelProfile, b: KernelProfile, constants, test_set=None) -> RhoValue:
    """Sum over the test set of (|dK| + |d indicator|) / (2^i (C_i + 1)).

    ``error`` collects the kernel error bars; ``tail`` bounds the omitted
    words beyond the test set.
    """
    if a.test_set != b.test_set or (test_set is not None and tuple(test_set) != a.test_set):
        raise MismatchedTestSet("profiles were computed on different test sets")
    i = np.arange(1, len(a.test_set) + 1)
    w = 1.0 / (2.0 ** i * (np.asarray(constants) + 1.0))
    diff = np.abs(a.values - b.values) + np.abs(a.indicators - b.indicators)
    width = (a.hi - a.lo) + (b.hi - b.lo)
    return RhoValue(float(np.sum(w * diff)), float(np.sum(w * width)), 2.0 ** (-len(a.test_set) + 1))


@dataclass
class AtlasCluster:
    centroid: KernelProfile
    members: list
    diameter: float
    member_profiles: list
    member_points: dict
    extremality: str = "unchecked"


@dataclass
class BoundaryAtlas:
    clusters: list
    resolution: float
    test_set: tuple
    lam: float
    constants: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def to_json(self, fmt=str) -> dict:
        return {
            "resolution": self.resolution,
            "lambda": self.lam,
            "test_set": [[fmt(s) for s in w.word] for w in self.test_set],
            "rho_constants": [float(c) for c in self.constants],
            "clusters": [
                {
                    "members": list(c.members),
                    "diameter": c.diameter,
                    "extremality": c.extremality,
                    "centroid": c.centroid.to_json(),
                }
                for c in self.clusters
            ],
            "diagnostics": self.diagnostics,
        }


def _mean_profile(profiles: list, tag: str) -> KernelProfile:
    return KernelProfile(
        profiles[0].test_set,
        np.mean([q.values for q in profiles], axis=0),
        np.min([q.lo for q in profiles], axis=0),
        np.max([q.hi for q in profiles], axis=0),
        np.mean([q.indicators for q in profiles], axis=0),
        tag,
    )


def boundary_atlas(
    orbits: dict,
    lam: float,
    model: Model,
    test_set: Sequence[Cylinder],
    eps: float,
    tol: float = 1e-300,
    rtol: float = 1e-12,
    cauchy_tol: Optional[float] = None,
    cauchy_steps: int = 3,
    mode: str = "constructive",
    n_cap: int = 20000,
) -> BoundaryAtlas:
    """Cluster the limiting kernel profiles of escaping orbits at resolution ``eps``.

    ``orbits`` maps a tag to a list of points x_1, x_2, … that leave every
    finite set. Each orbit must be Cauchy in rho over its last
    ``cauchy_steps`` steps (threshold ``cauchy_tol``, default eps/10); its
    last profile is then clustered greedily.
    """
    test_set = tuple(test_set)
    cauchy_tol = eps / 10 if cauchy_tol is None else cauchy_tol
    metric = RhoMetric(model, lam, test_set, mode)
    inner = {model.origin} | {s for w in test_set for s in w.word}
    limits = {}
    diagnostics = {}
    for tag, pts in orbits.items():
        pts = list(pts)
        if len(pts) < cauchy_steps + 1:
            raise NotEscaping(f"orbit {tag!r} is too short")
        late = [x.x0 for x in pts[len(pts) // 2:]]
        if any(s in inner for s in late) or len(set(late)) != len(late):
            raise NotEscaping(f"orbit {tag!r} does not leave the test-set states")
        profs = [kernel_profile(x, lam, model, test_set, tol, rtol, n_cap) for x in pts[-(cauchy_steps + 1):]]
        for q in profs:
            metric.observe(q)
        steps = [metric.distance(a, b) for a, b in zip(profs, profs[1:])]
        spread = [s.value + s.error for s in steps]
        diagnostics[tag] = {"cauchy_steps": spread, "last_point": str(pts[-1])}
        if max(spread) > cauchy_tol:
            raise NotCauchy(f"orbit {tag!r} moves by {max(spread):.3g} > {cauchy_tol:.3g}")
        limits[tag] = (profs[-1], pts)
    clusters: list = []
    for tag, (prof, pts) in limits.items():
        for cl in clusters:
            if metric.distance(prof, cl.centroid).value <= eps:
                cl.members.append(tag)
                cl.member_profiles.append(prof)
                cl.member_points[tag] = pts
                cl.centroid = _mean_profile(cl.member_profiles, f"cluster:{cl.members[0]}")
                break
        else:
            clusters.append(AtlasCluster(_mean_profile([prof], f"cluster:{tag}"), [tag], 0.0, [prof], {tag: pts}))
    for cl in clusters:
        ds = [metric.distance(a, b).value for a in cl.member_profiles for b in cl.member_profiles]
        cl.diameter = max(ds)
    _annotate_extremality(clusters)
    return BoundaryAtlas(clusters, eps, test_set, lam, metric.constants, diagnostics)


def _annotate_extremality(clusters: list, rel_tol: float = 1e-6) -> None:
    for j, cl in enumerate(clusters):
        others = [c.centroid.values for k, c in enumerate(clusters) if k != j]
        if not others:
            cl.extremality = "no convex decomposition among other centroids"
            continue
        a = np.array(others).T
        _, res = nnls(a, cl.centroid.values)
        if res <= rel_tol * np.linalg.norm(cl.centroid.values):
            cl.extremality = "convex combination of other centroids (non-extremal candidate)"
        else:
            cl.extremality = "no convex decomposition among other centroids"


def mu_omega(
    cluster: AtlasCluster,
    w: Sequence,
    lam: float,
    model: Model,
    tol: float = 1e-300,
    rtol: float = 1e-12,
) -> KernelValue:
    """Value of the boundary measure of a cluster on the cylinder [w]."""
    cyl = w if isinstance(w, Cylinder) else Cylinder(tuple(w))
    cen = cluster.centroid
    if cyl in cen.test_set:
        i = cen.test_set.index(cyl)
        return KernelValue(float(cen.values[i]), float(cen.lo[i]), float(cen.hi[i]))
    f = SimpleFunction.indicator(cyl.word)
    vals = [martin_kernel(f, pts[-1], lam, model, tol, rtol) for pts in cluster.member_points.values()]
    return KernelValue(
        float(np.mean([v.value for v in vals])),
        min(v.lo for v in vals),
        max(v.hi for v in vals),
    )


def dissipativity_check(model: Model, lam: float, points: Sequence[TailPoint], word, tol: float = 1e-300,
                        rtol: float = 1e-10) -> list:
    """Green-weighted returns to [word] along ``points``; each must certify finite."""
    f = SimpleFunction.indicator(word)
    return [green(f, x, lam, model.potential, tol=tol, rtol=rtol) for x in points]
