"""Measures given by their values on cylinders: conformality, Riesz decomposition, DLR, thermodynamic limits."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .errors import NotExcessive
from .green_martin import KernelValue, green, martin_kernel, mu_omega
from .model import Model
from .potentials import Potential, birkhoff_sum, classify
from .shift_core import Cylinder, TailPoint, shift
from .transfer import SimpleFunction, backward_partition_sum, iterate_terms, push_L


def _word(w) -> tuple:
    if isinstance(w, Cylinder):
        return w.word
    if isinstance(w, (tuple, list)):
        return tuple(w)
    return (w,)


class CylinderMeasure:
    """A measure known through its values on cylinders.

    ``valuation(word)`` returns either a float (exact rule) or a
    :class:`KernelValue` carrying an error bar (atlas-derived).
    """

    def __init__(self, valuation: Callable, kind: str = "exact", name: str = "measure"):
        self.valuation = valuation
        self.kind = kind
        self.name = name
        self._memo: dict = {}

    def _raw(self, word: tuple):
        try:
            return self._memo[word]
        except KeyError:
            v = self.valuation(word)
            self._memo[word] = v
            return v

    def __call__(self, w) -> float:
        v = self._raw(_word(w))
        return v.value if isinstance(v, KernelValue) else float(v)

    def bounds(self, w) -> tuple:
        v = self._raw(_word(w))
        if isinstance(v, KernelValue):
            return v.lo, v.hi
        return float(v), float(v)

    def pair(self, f: SimpleFunction) -> float:
        return sum(c * self(w) for c, w in f.terms)

    def pair_width(self, f: SimpleFunction) -> float:
        """Width of the interval enclosing the pairing with f."""
        total = 0.0
        for c, w in f.terms:
            lo, hi = self.bounds(w)
            total += abs(c) * (hi - lo)
        return total


def path_measure(weight: Callable, h: Callable, name: str = "path measure") -> CylinderMeasure:
    """mu([a_0 … a_m]) = weight(a_0, a_1) ⋯ weight(a_{m-1}, a_m) · h(a_m)."""

    def val(word):
        v = h(word[-1])
        for a, b in zip(word, word[1:]):
            v *= weight(a, b)
        return v

    return CylinderMeasure(val, "exact", name)


def delta_measure(x: TailPoint) -> CylinderMeasure:
    return CylinderMeasure(lambda word: 1.0 if Cylinder(word).contains(x) else 0.0, "exact", f"delta {x}")


def green_measure(model: Model, x0: TailPoint, lam: float = 1.0, tol: float = 1e-15) -> CylinderMeasure:
    """mu(f) = G(f, x0 | lam)."""
    p = model.potential

    def val(word):
        return green(SimpleFunction.indicator(word), x0, lam, p, tol=tol).partial

    return CylinderMeasure(val, "exact", f"green at {x0}")


def atlas_measure(cluster, model: Model, lam: float) -> CylinderMeasure:
    return CylinderMeasure(lambda word: mu_omega(cluster, word, lam, model), "atlas", "atlas centroid")


def combine(parts: Sequence, name: str = "combination") -> CylinderMeasure:
    """Linear combination of measures given as (coefficient, measure) pairs."""
    parts = list(parts)
    return CylinderMeasure(lambda word: sum(c * m(word) for c, m in parts), "exact", name)


def perturbed(mu: CylinderMeasure, word, delta: float) -> CylinderMeasure:
    """mu with the mass of one cylinder moved by delta (breaks additivity on purpose)."""
    target = _word(word)
    return CylinderMeasure(lambda w: mu(w) + (delta if w == target else 0.0), "exact", mu.name + " (perturbed)")


def additivity_residual(mu: CylinderMeasure, p: Potential, word) -> float:
    """|mu([w]) - sum over successors b of mu([w b])|."""
    w = _word(word)
    return abs(mu(w) - sum(mu(w + (b,)) for b in p.graph.out_edges(w[-1])))


@dataclass
class Residual:
    word: tuple
    residual: float
    bound: float = 0.0

    @property
    def ok(self) -> bool:
        return self.residual <= self.bound


def conformality_residual(mu: CylinderMeasure, lam: float, p: Potential, test: Sequence, tol: float = 0.0) -> list:
    """|mu(L 1_[w]) - lam mu([w])| per test cylinder, with error-bar widening."""
    out = []
    for w in test:
        w = _word(w)
        ind = SimpleFunction.indicator(w)
        pushed = push_L(ind, p)
        r = abs(mu.pair(pushed) - lam * mu(w))
        bound = tol + mu.pair_width(pushed) + lam * mu.pair_width(ind)
        out.append(Residual(w, r, bound))
    return out


@dataclass
class ExcessVerdict:
    word: tuple
    slack: float
    excessive: bool


def excessiveness_check(mu: CylinderMeasure, lam: float, p: Potential, test: Sequence, tol: float = 1e-12) -> list:
    """Slack lam mu([w]) - mu(L 1_[w]); excessive when slack >= -tol."""
    out = []
    for w in test:
        w = _word(w)
        slack = lam * mu(w) - mu.pair(push_L(SimpleFunction.indicator(w), p))
        out.append(ExcessVerdict(w, slack, slack >= -tol))
    return out


@dataclass
class RieszDecomposition:
    nu: CylinderMeasure
    mu_star_partial: dict
    identity_residuals: dict
    point_residuals: dict = field(default_factory=dict)
    support_weights: list = field(default_factory=list)


def riesz_decompose(
    mu: CylinderMeasure,
    lam: float,
    p: Potential,
    test_functions: Sequence,
    n_max: int,
    support: Optional[Sequence[TailPoint]] = None,
    support_depth: int = 8,
    tol: float = 1e-12,
    green_tol: float = 1e-15,
) -> RieszDecomposition:
    """Split an excessive measure into a Green potential and a conformal part.

    The charge is nu = mu - lam^-1 L* mu. For each test function f the
    sequence lam^-n mu(L^n f) (the conformal part) is tracked up to n_max and
    the finite identity mu(f) = sum_{k<n} lam^-k nu(L^k f) + lam^-n mu(L^n f)
    is checked. When ``support`` lists the atoms of nu, the integral of
    G(f, .) against nu is also evaluated directly.
    """
    fs = [f if isinstance(f, SimpleFunction) else SimpleFunction.indicator(_word(f)) for f in test_functions]
    words = {w.word for f in fs for _, w in f.terms}
    bad = {v.word: v.slack for v in excessiveness_check(mu, lam, p, sorted(words, key=str), tol) if not v.excessive}
    if bad:
        raise NotExcessive("measure is not excessive on the tested cylinders", bad)

    def nu_pair(f: SimpleFunction) -> float:
        return mu.pair(f) - mu.pair(push_L(f, p)) / lam

    nu = CylinderMeasure(lambda word: nu_pair(SimpleFunction.indicator(word)), "exact", "charge")
    star: dict = {}
    resid: dict = {}
    for f in fs:
        key = _fkey(f)
        seq = []
        nu_part = 0.0
        g = f
        for n in range(n_max + 1):
            scale = lam ** (-n)
            seq.append(scale * mu.pair(g))
            if n < n_max:
                nu_part += scale * nu_pair(g)
                g = push_L(g, p)
        star[key] = seq
        resid[key] = abs(mu.pair(f) - nu_part - seq[-1])
    point_res: dict = {}
    weights: list = []
    if support:
        weights = [nu(x.head(support_depth)) for x in support]
        for f in fs:
            part = sum(wt * green(f, x, lam, p, tol=green_tol).partial for wt, x in zip(weights, support))
            point_res[_fkey(f)] = abs(mu.pair(f) - part - star[_fkey(f)][-1])
    return RieszDecomposition(nu, star, resid, point_res, weights)


def _fkey(f: SimpleFunction) -> tuple:
    return tuple((c, w.word) for c, w in f.terms)


def _preimage_words(p: Potential, tail_word: tuple, n: int) -> list:
    """All admissible words u of length n such that u·tail_word is admissible."""
    words = [()]
    head = tail_word[0]
    for _ in range(n):
        words = [(b,) + u for u in words for b in p.graph.in_edges(u[0] if u else head)]
    return words


@dataclass
class DLRResidual:
    word: tuple
    tail: tuple
    depth: int
    lhs: Optional[float]
    rhs: float
    residual: Optional[float]
    status: str


def dlr_check_conditional(mu: CylinderMeasure, p: Potential, n: int, points: Sequence[TailPoint],
                          depths: Sequence[int] = (1, 2, 3)) -> list:
    """Compare mu's conditional law of the first n symbols given the tail with the Gibbs ratio.

    Each point x supplies the word x_0 … x_{n-1} and the tail class
    T^-n [x_n … x_{n+k-1}] at each refinement depth k. A tail class of
    measure zero is reported with status ``"zero-mass"`` and not divided.
    """
    out = []
    for x in points:
        w = x.head(n)
        base = x
        for _ in range(n):
            base = shift(base)
        rhs = math.exp(birkhoff_sum(p, (), x, n)) / backward_partition_sum(x, n, p)
        for k in depths:
            t = base.head(k)
            den = sum(mu(u + t) for u in _preimage_words(p, t, n))
            if den == 0.0:
                out.append(DLRResidual(w, t, k, None, rhs, None, "zero-mass"))
                continue
            lhs = mu(w + t) / den
            out.append(DLRResidual(w, t, k, lhs, rhs, abs(lhs - rhs), "ok"))
    return out


def dlr_check_ratio(mu: CylinderMeasure, p: Potential, a_word: Sequence, b_word: Sequence,
                    tails: Sequence[TailPoint], depths: Sequence[int] = (1, 2, 3)) -> list:
    """|mu([b·t]) - mu([a·t]) exp(phi_n(b·x) - phi_n(a·x))| per tail point x and depth."""
    a, b = tuple(a_word), tuple(b_word)
    if len(a) != len(b) or a[-1] != b[-1]:
        raise ValueError("words must have the same length and the same last symbol")
    n = len(a)
    out = []
    for x in tails:
        factor = math.exp(birkhoff_sum(p, b, x, n) - birkhoff_sum(p, a, x, n))
        for k in depths:
            t = x.head(k)
            r = abs(mu(b + t) - mu(a + t) * factor)
            out.append(DLRResidual(b, t, k, mu(b + t), mu(a + t) * factor, r, "ok"))
    return out


def dlr_tail_correction(mu: CylinderMeasure, p: Potential, n: int, points: Sequence[TailPoint], depth: int = 2) -> dict:
    """Per tested tail class, the factor mu(T^-n [t]) / (Gibbs weight of the class · mu([t])).

    A measure that satisfies DLR but is not conformal shows up as factors that
    differ between tail classes; a conformal measure at lam = 1 gives 1 everywhere.
    """
    out = {}
    for x in points:
        base = x
        for _ in range(n):
            base = shift(base)
        t = base.head(depth)
        mass = sum(mu(u + t) for u in _preimage_words(p, t, n))
        gibbs = backward_partition_sum(x, n, p) * mu(t)
        out[t] = mass / gibbs if gibbs else math.nan
    return out


@dataclass
class ThermoSequence:
    scheme: str
    values: list
    lo: list
    hi: list
    warning: Optional[str] = None

    def oscillation(self, last: int = 5) -> float:
        tail = self.values[-last:]
        return max(tail) - min(tail)


def thermo_limit(
    scheme: str,
    x,
    f: SimpleFunction,
    N: int,
    model: Model,
    lam: float = 1.0,
    check_scheme: bool = False,
    tol: float = 1e-300,
    rtol: float = 1e-12,
) -> ThermoSequence:
    """Finite-volume Gibbs ensembles mu_N(f) for N = 1..N.

    For the transient scheme ``x`` is a callable N -> T^N x (an escaping
    orbit); a TailPoint is accepted too and shifted N times.
    """
    p = model.potential
    one_o = SimpleFunction.indicator((model.origin,))
    warning = None
    if check_scheme:
        x_ref = x(1) if callable(x) else x
        verdict = classify(p, lam, one_o, x_ref).classification
        expected = "transient" if scheme == "transient" else "recurrent"
        if verdict != expected:
            warning = f"scheme {scheme} used on a {verdict} potential"
            warnings.warn(warning)
    values, lo, hi = [], [], []
    if scheme in ("pos_recurrent", "null_recurrent"):
        num = iterate_terms(f, x, p, lam)
        den = iterate_terms(one_o, x, p, lam)
        sn = sd = 0.0
        for n in range(N + 1):
            a, b = next(num), next(den)
            sn += a
            sd += b
            if n == 0:
                continue
            num_v, den_v = (a, b) if scheme == "pos_recurrent" else (sn - a, sd - b)
            # no mass on the origin at this N (periodicity): the ratio is undefined
            values.append(num_v / den_v if den_v else math.nan)
        # the Cesaro scheme uses the sums over n < N, so shift by one
        lo, hi = list(values), list(values)
    elif scheme == "transient":
        for n in range(1, N + 1):
            xn = x(n) if callable(x) else _shift_n(x, n)
            k = martin_kernel(f, xn, lam, model, tol, rtol)
            values.append(k.value)
            lo.append(k.lo)
            hi.append(k.hi)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return ThermoSequence(scheme, values, lo, hi, warning)


def _shift_n(x: TailPoint, n: int) -> TailPoint:
    for _ in range(n):
        x = shift(x)
    return x
