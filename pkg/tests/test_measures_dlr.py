import math
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from transientshift import (
    NotExcessive,
    SimpleFunction,
    TailPoint,
    boundary_atlas,
    conformality_residual,
    default_test_set,
    dlr_check_conditional,
    dlr_check_ratio,
    excessiveness_check,
    point_in,
    riesz_decompose,
    thermo_limit,
)
from transientshift.measures_dlr import (
    additivity_residual,
    atlas_measure,
    combine,
    delta_measure,
    dlr_tail_correction,
    green_measure,
    path_measure,
    perturbed,
)
from transientshift.models import biased_walk_z, stationary_ratio


def z_prob(p):
    return lambda a, b: p if b == a + 1 else 1 - p


def z_path(p=2 / 3):
    return path_measure(z_prob(p), lambda a: 1.0, "biased path")


def inward_reversed_path(p=0.7):
    """Stationary law of the lazy reflecting walk read backwards in time."""

    def prob(a, b):
        if a == 0:
            return p if b == 0 else 1 - p
        return p if b == a - 1 else 1 - p

    return path_measure(lambda a, b: prob(b, a), lambda a: ((1 - p) / p) ** a, "reversed stationary")


def z_words(max_len=4, span=3):
    return oracles.forward_words(range(-span, span + 1), max_len, oracles.z_edge, range(-span - max_len, span + max_len + 1))


def test_path_measure_is_conformal(zwalk):
    for r in conformality_residual(z_path(), 1.0, zwalk.potential, z_words(4)):
        assert r.residual <= 1e-15


def test_path_measure_is_additive(zwalk, inward):
    for w in z_words(3):
        assert additivity_residual(z_path(), zwalk.potential, w) <= 1e-15
    mu = inward_reversed_path()
    for w in oracles.forward_words(range(0, 4), 3, oracles.inward_edge, range(0, 8)):
        assert additivity_residual(mu, inward.potential, w) <= 1e-15


def test_example2_delta_is_not_conformal(ex2):
    mu = delta_measure(ex2.params["ray_point"])
    battery = [(0,), (0, 0), (0, 1)]
    res = conformality_residual(mu, 1.0, ex2.potential, battery)
    assert res[1].residual == pytest.approx(math.exp(ex2.potential.edge(0, 0)))
    for lam in (0.25, 0.5, 1.0, 2.0, 4.0):
        assert any(r.residual > 1e-3 for r in conformality_residual(mu, lam, ex2.potential, battery))


def test_atlas_centroid_conformal_within_bars(ex1):
    test = default_test_set(ex1)
    orbits = {tag: ex1.orbit(tag, range(8, 15)) for tag in ("plus", "minus")}
    atlas = boundary_atlas(orbits, 1.0, ex1, test, 1e-3)
    words = [(0,), (1,), (-1,), (1, 2), ("1'", 0), (-1, -2), (2, "2'")]
    for cl in atlas.clusters:
        mu = atlas_measure(cl, ex1, 1.0)
        for r in conformality_residual(mu, 1.0, ex1.potential, words, tol=1e-12):
            assert r.ok, r


def test_excessive_slack_of_green_measure(ex1):
    x0 = point_in((0,), ex1.graph)
    mu = green_measure(ex1, x0)
    words = [(0,), (0, 1), (0, -1), (1,), (-1,), ("1'", 0), (2,)]
    for v in excessiveness_check(mu, 1.0, ex1.potential, words):
        assert v.excessive
        assert v.slack == pytest.approx(SimpleFunction.indicator(v.word)(x0), abs=1e-10)


def test_conformal_measure_has_zero_slack(zwalk):
    for v in excessiveness_check(z_path(), 1.0, zwalk.potential, z_words(2)):
        assert v.excessive and abs(v.slack) <= 1e-15


def test_non_excessive_witness(ex1):
    mu = perturbed(green_measure(ex1, point_in((0,), ex1.graph)), (0,), 0.5)
    verdicts = excessiveness_check(mu, 1.0, ex1.potential, [("1'", 0), (0,)])
    assert not verdicts[0].excessive
    with pytest.raises(NotExcessive):
        riesz_decompose(mu, 1.0, ex1.potential, [("1'", 0)], 5)


def test_riesz_of_green_measure(ex1):
    x0 = point_in((0,), ex1.graph)
    mu = green_measure(ex1, x0)
    tests = [(0,), (1,), (-1,), (0, 1), ("1'", 0), (2, 3)]
    dec = riesz_decompose(mu, 1.0, ex1.potential, tests, 40, support=[x0])
    assert dec.nu((0,)) == pytest.approx(1.0, abs=1e-10)
    for w in [(1,), (-1,), ("1'",), (2,), (-3,), ("2'",)]:
        assert abs(dec.nu(w)) < 1e-8
    for seq in dec.mu_star_partial.values():
        assert seq[-1] < 1e-8
    for key, r in dec.identity_residuals.items():
        assert r <= 1e-12
    for key, r in dec.point_residuals.items():
        assert r <= dec.mu_star_partial[key][-1] + 1e-10


def test_riesz_of_conformal_measure(zwalk):
    mu = z_path()
    tests = [(0,), (1, 2), (-1, 0)]
    dec = riesz_decompose(mu, 1.0, zwalk.potential, tests, 10)
    for w in tests:
        assert abs(dec.nu(w)) <= 1e-15
    for f_key, seq in dec.mu_star_partial.items():
        assert all(v == pytest.approx(seq[0], rel=1e-12) for v in seq)


def _z_points():
    return [TailPoint((0, 1, 2), (3, 2)), TailPoint((0, -1, 0, 1), (2, 1)), TailPoint((3, 2, 1, 0, -1), (-2, -1)),
            TailPoint((1, 2, 1), (0, 1))]


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_dlr_for_path_measures(zwalk, inward, n):
    for r in dlr_check_conditional(z_path(), zwalk.potential, n, _z_points()):
        assert r.status == "ok" and r.residual < 1e-12
    pts = [TailPoint((0, 0, 1, 2), (3, 2)), TailPoint((3, 2, 1, 0), (0,)), TailPoint((1, 0, 1), (2, 1))]
    for r in dlr_check_conditional(inward_reversed_path(), inward.potential, n, pts):
        assert r.status == "ok" and r.residual < 1e-12


def test_dlr_ratio_examples(zwalk):
    mu = z_path()
    tails = [TailPoint((2, 3), (4, 3)), TailPoint((0, -1), (0, 1)), TailPoint((2,), (1, 2))]
    for r in dlr_check_ratio(mu, zwalk.potential, (0, 1), (0, 1), tails):
        assert r.residual == 0
    tails0 = [TailPoint((1, 2), (3, 2)), TailPoint((-1, 0), (1, 0))]
    for r in dlr_check_ratio(mu, zwalk.potential, (1, 0), (-1, 0), tails0):
        assert r.residual < 1e-15
    # a measure conformal for p = 0.6 seen through the p = 2/3 potential
    other = z_path(0.6)
    worst = max(r.residual for r in dlr_check_ratio(other, zwalk.potential, (1, 0), (-1, 0), tails0))
    assert worst > 1e-3


def test_dlr_ratio_rejects_mismatched_words(zwalk):
    with pytest.raises(ValueError):
        dlr_check_ratio(z_path(), zwalk.potential, (1, 0), (0, 1), _z_points())


def test_dlr_detects_perturbation(zwalk):
    mu = perturbed(z_path(), (0, 1, 2), 1e-3)
    res = dlr_check_conditional(mu, zwalk.potential, 1, [TailPoint((0, 1, 2), (3, 2))])
    assert max(r.residual for r in res) > 1e-5


def test_example2_delta_is_dlr(ex2):
    mu = delta_measure(ex2.params["ray_point"])
    for n in range(1, 5):
        for r in dlr_check_conditional(mu, ex2.potential, n, [ex2.params["ray_point"]]):
            assert r.status == "ok"
            assert r.lhs == 1.0 and r.rhs == pytest.approx(1.0)


def test_zero_mass_tail_is_reported(ex2):
    mu = delta_measure(ex2.params["ray_point"])
    res = dlr_check_conditional(mu, ex2.potential, 1, [point_in((-3, -2), ex2.graph)])
    assert all(r.status == "zero-mass" and r.residual is None for r in res)


def test_tail_correction_is_one_for_conformal(zwalk):
    factors = dlr_tail_correction(z_path(), zwalk.potential, 2, _z_points())
    assert all(v == pytest.approx(1.0, rel=1e-12) for v in factors.values())


def test_thermo_positive_recurrent(inward):
    for a in (1, 2, 4):
        seq = thermo_limit("pos_recurrent", point_in((0,), inward.graph), SimpleFunction.indicator((a,)), 400, inward)
        assert seq.values[-1] == pytest.approx(stationary_ratio(0.7, a), abs=1e-6)
        assert seq.values[-1] == pytest.approx(oracles.stationary_inward(0.7, a), abs=1e-6)


def test_thermo_null_scheme_averages(inward):
    seq = thermo_limit("null_recurrent", point_in((0,), inward.graph), SimpleFunction.indicator((1,)), 400, inward)
    target = oracles.stationary_inward(0.7, 1)
    # Cesaro averages approach the limit like 1/N
    gap_200, gap_400 = abs(seq.values[199] - target), abs(seq.values[-1] - target)
    assert gap_400 < 5e-3
    assert 0.4 < gap_400 / gap_200 < 0.6


def test_thermo_transient_limits(ex1):
    f = SimpleFunction.indicator((-1,))
    kp, km = oracles.ex1_kernels(-1.0)
    plus = thermo_limit("transient", ex1.orbits["plus"], f, 15, ex1)
    minus = thermo_limit("transient", ex1.orbits["minus"], f, 15, ex1)
    assert plus.oscillation() < 1e-4 and minus.oscillation() < 1e-4
    assert plus.lo[-1] - 1e-12 <= kp <= plus.hi[-1] + 1e-12
    assert minus.lo[-1] - 1e-12 <= km <= minus.hi[-1] + 1e-12


def test_thermo_shifting_a_point(zwalk):
    x = TailPoint((0,), (1, 2, 3, 2))
    seq = thermo_limit("transient", x, SimpleFunction.indicator((0,)), 4, zwalk)
    assert seq.values == [1.0] * 4


def test_origin_function_is_constant_in_every_scheme(ex1, inward):
    o = SimpleFunction.indicator((0,))
    assert thermo_limit("transient", ex1.orbits["plus"], o, 6, ex1).values == [1.0] * 6
    x = point_in((0,), inward.graph)
    for scheme in ("pos_recurrent", "null_recurrent"):
        assert thermo_limit(scheme, x, o, 30, inward).values == [1.0] * 30


def test_scheme_mismatch_warns(ex1):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        seq = thermo_limit("pos_recurrent", point_in((0,), ex1.graph), SimpleFunction.indicator((1,)), 5, ex1,
                           check_scheme=True)
    assert seq.warning and caught


def test_unknown_scheme(ex1):
    with pytest.raises(ValueError):
        thermo_limit("bogus", point_in((0,), ex1.graph), SimpleFunction.indicator((1,)), 3, ex1)


@given(st.floats(0, 3), st.floats(0, 3), st.sampled_from([(0,), (1, 2), (-1, 0, 1), (2, 1)]))
@settings(max_examples=60, deadline=None)
def test_combinations_stay_conformal_and_additive(a, b, w):
    model = biased_walk_z(2 / 3)
    harmonic = path_measure(z_prob(2 / 3), lambda s: 0.5 ** s, "decaying")
    mu = combine([(a, z_path()), (b, harmonic)])
    assert additivity_residual(mu, model.potential, w) <= 1e-12 * (1 + mu(w))
    (r,) = conformality_residual(mu, 1.0, model.potential, [w])
    assert r.residual <= 1e-12 * (1 + mu(w))
