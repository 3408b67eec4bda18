import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from transientshift import (
    BudgetExhausted,
    Cylinder,
    Diverging,
    MismatchedTestSet,
    NotCauchy,
    NotEscaping,
    SimpleFunction,
    boundary_atlas,
    default_test_set,
    green,
    kernel_bounds,
    kernel_profile,
    martin_kernel,
    mu_omega,
    point_in,
    push_L,
    rho_distance,
)
from transientshift.duality import reverse_model
from transientshift.green_martin import RhoMetric, dissipativity_check, harnack_pair
from transientshift.models import biased_walk_z, first_passage, return_counts, self_loop


@pytest.mark.parametrize("alpha", [-0.05, -0.5, -1.0, -3.0])
def test_self_loop_closed_form(alpha):
    m = self_loop(alpha)
    gv = green(SimpleFunction.indicator((0,)), point_in((0,), m.graph), 1.0, m.potential, tol=1e-10)
    exact = oracles.self_loop_green(alpha)
    assert gv.lo <= exact <= gv.hi + 1e-12
    assert gv.tail_bound <= 1e-10


def test_self_loop_zero_diverges():
    m = self_loop(0.0)
    with pytest.raises(Diverging):
        green(SimpleFunction.indicator((0,)), point_in((0,), m.graph), 1.0, m.potential)


def test_budget_exhausted_near_criticality():
    m = self_loop(-1e-6)
    with pytest.raises(BudgetExhausted):
        green(SimpleFunction.indicator((0,)), point_in((0,), m.graph), 1.0, m.potential, n_cap=500)


def test_bad_arguments(loop):
    with pytest.raises(ValueError):
        green(SimpleFunction.indicator((0,)), point_in((0,), loop.graph), 0.0, loop.potential)


def _ex1_return_series(alpha, n_max):
    """sum_{n<=n_max} e^{n alpha} (#loops at 0 of length n), by matrix powers on a ball."""
    states = oracles.ex1_states(n_max // 2 + 2)
    idx = {s: i for i, s in enumerate(states)}
    a = np.zeros((len(states), len(states)))
    for s in states:
        for t in states:
            if oracles.ex1_edge(s, t):
                a[idx[s], idx[t]] = math.exp(alpha)
    v = np.zeros(len(states))
    v[idx[0]] = 1.0
    total = 1.0
    for _ in range(n_max):
        v = a @ v
        total += v[idx[0]]
    return total


def test_example1_green_against_path_sums(ex1):
    gv = green(SimpleFunction.indicator((0,)), point_in((0,), ex1.graph), 1.0, ex1.potential, tol=1e-12)
    ref = _ex1_return_series(-1.0, 200)
    assert gv.lo - 1e-13 <= ref <= gv.hi + 1e-13


@pytest.mark.parametrize("p", [0.6, 2 / 3, 0.8])
@pytest.mark.parametrize("a", [-4, -1, 0, 2, 7])
def test_biased_walk_enclosure(p, a):
    m = biased_walk_z(p)
    gv = green(SimpleFunction.indicator((0,)), point_in((a,), m.graph), 1.0, m.potential, tol=1e-10)
    r = (1 - p) / p
    exact = oracles.z_return_green(p) * (1.0 if a >= 0 else r ** (-a))
    assert gv.lo <= exact * (1 + 1e-14) and exact <= gv.hi * (1 + 1e-14)


def test_kernel_of_origin_is_one(ex1):
    k = martin_kernel(SimpleFunction.indicator((0,)), point_in((7,), ex1.graph), 1.0, ex1)
    assert (k.value, k.lo, k.hi) == (1.0, 1.0, 1.0)


@pytest.mark.parametrize("word", [(1,), (-1,), (2, 3), ("1'", 0), (-3,)])
def test_kernel_within_harnack_bounds(ex1, word):
    c, cap = kernel_bounds(ex1, 1.0, word)
    f = SimpleFunction.indicator(word)
    for s in [0, 3, -5, 9, "4'", "1'", -12]:
        k = martin_kernel(f, point_in((s,), ex1.graph), 1.0, ex1)
        # the bound can be attained, so compare against the certified interval
        assert c <= k.hi and k.lo <= cap


def test_harnack_pairs_bracket_green(ex1):
    for a, b in [(1, -1), (2, 0), ("2'", 3), (-4, 0)]:
        lo, hi = harnack_pair(ex1, 1.0, a, b)
        for s in [0, 5, -5, "3'"]:
            x = point_in((s,), ex1.graph)
            ga = green(SimpleFunction.indicator((a,)), x, 1.0, ex1.potential, tol=1e-300, rtol=1e-12)
            gb = green(SimpleFunction.indicator((b,)), x, 1.0, ex1.potential, tol=1e-300, rtol=1e-12)
            assert lo * gb.lo <= ga.hi and ga.lo <= hi * gb.hi


@pytest.mark.parametrize("n", [5, 6, 8])
def test_first_passage_kernel_identity(ex1, n):
    f = SimpleFunction.indicator((-1,))
    kp = martin_kernel(f, ex1.orbits["plus"](n), 1.0, ex1)
    km = martin_kernel(f, ex1.orbits["minus"](n), 1.0, ex1)
    fv = first_passage(-1.0, -1, 1, 2000)
    assert abs(kp.value - fv.partial * km.value) <= kp.err + fv.hi * km.err + km.hi * fv.tail_bound


def test_biased_walk_profiles_toward_minus_infinity(zwalk):
    test = default_test_set(zwalk, depth=1, radius=3)
    prof = kernel_profile(point_in((-20,), zwalk.graph), 1.0, zwalk, test)
    for w, v in zip(test, prof.values):
        assert v == pytest.approx(0.5 ** w.word[0], rel=1e-9)
    assert prof.values[0] == 1.0


def test_biased_walk_profiles_converge_toward_plus_infinity(zwalk):
    test = default_test_set(zwalk, depth=2, radius=2)
    profs = [kernel_profile(point_in((n,), zwalk.graph), 1.0, zwalk, test) for n in (6, 9, 12)]
    metric = RhoMetric(zwalk, 1.0, test)
    assert metric.distance(profs[1], profs[2]).value <= 1e-9
    assert metric.distance(profs[0], profs[2]).value <= 1e-9


def test_rho_basic(ex1):
    test = default_test_set(ex1)
    a = kernel_profile(point_in((6,), ex1.graph), 1.0, ex1, test)
    b = kernel_profile(point_in((-6,), ex1.graph), 1.0, ex1, test)
    metric = RhoMetric(ex1, 1.0, test)
    assert metric.distance(a, a).value == 0
    assert metric.distance(a, b).value > 1e-3
    other = kernel_profile(point_in((6,), ex1.graph), 1.0, ex1, test[:5])
    with pytest.raises(MismatchedTestSet):
        rho_distance(a, other, metric.constants)


def test_rho_same_cylinder_points(ex1):
    test = default_test_set(ex1, depth=2)
    metric = RhoMetric(ex1, 1.0, test)
    x = kernel_profile(point_in((3, 4, 5), ex1.graph), 1.0, ex1, test)
    y = kernel_profile(point_in((3, 4, "4'"), ex1.graph), 1.0, ex1, test)
    d = metric.distance(x, y)
    # both points agree on every cylinder of length two, so only kernel terms contribute
    assert np.array_equal(x.indicators, y.indicators)
    assert d.value <= d.tail + np.sum(np.abs(x.values - y.values))


def test_empirical_mode_is_a_pseudometric(ex1):
    test = default_test_set(ex1)
    metric = RhoMetric(ex1, 1.0, test, mode="empirical")
    profs = [kernel_profile(point_in((s,), ex1.graph), 1.0, ex1, test) for s in (4, -4, "3'")]
    for q in profs:
        metric.observe(q)
    d = [[metric.distance(a, b).value for b in profs] for a in profs]
    for i in range(3):
        assert d[i][i] == 0
        for j in range(3):
            assert d[i][j] == pytest.approx(d[j][i])
            for k in range(3):
                assert d[i][k] <= d[i][j] + d[j][k] + 1e-15


def test_pushed_function_kernel_identity(ex1):
    """K(Lf, x) = K(f, x) - f(x)/G(1_[o], x)."""
    o = SimpleFunction.indicator((0,))
    for word in [(1,), (-2, -3), (0,), ("1'", 0)]:
        f = SimpleFunction.indicator(word)
        for s in [0, 4, -3, "2'"]:
            x = point_in((s,), ex1.graph)
            lhs = martin_kernel(push_L(f, ex1.potential), x, 1.0, ex1)
            k = martin_kernel(f, x, 1.0, ex1)
            g0 = green(o, x, 1.0, ex1.potential, tol=1e-300, rtol=1e-12)
            rhs = k.value - f(x) / g0.partial
            assert abs(lhs.value - rhs) <= lhs.err + k.err + 1e-12 * max(1.0, abs(rhs))


def test_atlas_example1_two_clusters(ex1):
    test = default_test_set(ex1)
    orbits = {tag: ex1.orbit(tag, range(8, 15)) for tag in ("plus", "minus")}
    atlas = boundary_atlas(orbits, 1.0, ex1, test, 1e-3)
    assert len(atlas.clusters) == 2
    assert all(c.diameter < 1e-4 for c in atlas.clusters)
    plus, minus = atlas.clusters
    assert mu_omega(plus, (0,), 1.0, ex1).value == 1.0
    kp, km = oracles.ex1_kernels(-1.0)
    vp, vm = mu_omega(plus, (-1,), 1.0, ex1), mu_omega(minus, (-1,), 1.0, ex1)
    assert vp.lo - 1e-12 <= kp <= vp.hi + 1e-12
    assert vm.lo - 1e-12 <= km <= vm.hi + 1e-12
    fv = oracles.ex1_F(-1.0)
    assert abs(vp.value - fv * vm.value) <= vp.err + fv * vm.err + 1e-12
    # a cylinder outside the test set is evaluated along the member orbits
    far = mu_omega(plus, (5, 6), 1.0, ex1)
    assert far.lo <= far.value <= far.hi
    doc = atlas.to_json(ex1.graph.format_state)
    assert len(doc["clusters"]) == 2 and doc["resolution"] == 1e-3


def test_atlas_example1_reversed_single_cluster(ex1):
    rev = reverse_model(ex1)
    test = default_test_set(rev)
    orbits = {tag: rev.orbit(tag, range(8, 15)) for tag in rev.orbits}
    atlas = boundary_atlas(orbits, 1.0, rev, test, 1e-3)
    assert len(atlas.clusters) == 1
    assert atlas.clusters[0].diameter < 1e-4


def test_atlas_tree_three_clusters(tree):
    test = default_test_set(tree, depth=1, radius=2)
    orbits = {tag: tree.orbit(tag, range(6, 12)) for tag in tree.orbits}
    atlas = boundary_atlas(orbits, 1.0, tree, test, 1e-3)
    assert len(atlas.clusters) == 3


def test_atlas_rejects_non_escaping(ex1):
    pts = [point_in((0,), ex1.graph)] * 6
    with pytest.raises(NotEscaping):
        boundary_atlas({"stuck": pts}, 1.0, ex1, default_test_set(ex1), 1e-3)


def test_atlas_rejects_non_cauchy(ex1):
    pts = [ex1.orbits["plus" if n % 2 else "minus"](n) for n in range(8, 15)]
    with pytest.raises(NotCauchy):
        boundary_atlas({"zigzag": pts}, 1.0, ex1, default_test_set(ex1), 1e-3)


def test_dissipativity_along_orbits(ex1, zwalk):
    for gv in dissipativity_check(ex1, 1.0, ex1.orbit("plus", range(5, 15)), (0,)):
        assert math.isfinite(gv.hi)
    counts = return_counts(zwalk.walk, 0, n_samples=2000, horizon=400, seed=5)
    # expected visits after time 0 are G - 1 = 2, and they die out
    assert counts["first_half"] + counts["second_half"] == pytest.approx(2.0, abs=0.2)
    assert counts["second_half"] < 0.01


@given(st.integers(-6, 6), st.sampled_from([(0,), (1,), (-1,), (1, 2), (-2, -1)]))
@settings(max_examples=40, deadline=None)
def test_enclosure_property(a, word):
    m = biased_walk_z(2 / 3)
    f = SimpleFunction.indicator(word)
    x = point_in((a,), m.graph)
    gv = green(f, x, 1.0, m.potential, tol=1e-300, rtol=1e-10)
    # G(1_[w], x) = P(w) * sum_k P^k(w_last, a) = P(w) * 3 * hit(w_last -> a)
    pw = 1.0
    for u, v in zip(word, word[1:]):
        pw *= 2 / 3 if v == u + 1 else 1 / 3
    last = word[-1]
    hit = 1.0 if a >= last else 0.5 ** (last - a)
    exact = pw * 3.0 * hit
    if len(word) == 2:
        # the n = 0 term, not covered by the return series from the last letter
        exact += f(x)
    assert gv.lo <= exact * (1 + 1e-13) and exact <= gv.hi * (1 + 1e-13)


def test_certificate_is_not_fooled_by_gaps():
    from transientshift.green_martin import certify_series

    # nonzero terms only at odd n; the sum is 0.5 / (1 - 0.25)
    gapped = (0.5 ** n if n % 2 else 0.0 for n in range(1, 10 ** 6))
    got = certify_series(gapped, 1e-300, 1e-14)
    assert got.lo <= 2 / 3 <= got.hi + 1e-15
    assert got.partial == pytest.approx(2 / 3, rel=1e-13)


def test_certificate_for_finite_series():
    from transientshift.green_martin import certify_series

    got = certify_series(iter([1.0, 2.0, 0.5] + [0.0] * 100), 1e-300, 1e-14)
    assert got.partial == 3.5 and got.tail_bound == 0.0
