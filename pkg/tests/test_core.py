import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binom

from modsel import (
    CapacityError,
    DefectState,
    DomainError,
    ModelSpec,
    OperationalProfile,
    UtilitySpec,
    ValidationError,
    binomial_kernel,
    reliability,
    utility_eval,
    validate_model,
)


def test_reliability_zero_defects():
    assert reliability((0, 0), (0.2, 0.8), (0.3, 0.2)) == 1.0


@pytest.mark.parametrize("x, reference", [((12, 19), 0.014), ((13, 19), 0.0106)])
def test_reliability_example_states(x, reference):
    exact = 0.8 * 0.7 ** x[0] + 0.2 * 0.8 ** x[1]
    r = reliability(x, (0.8, 0.2), (0.3, 0.2))
    assert r == pytest.approx(exact, rel=1e-14)
    assert r == pytest.approx(reference, abs=5e-4)


def test_reliability_example_value_to_five_places():
    # 0.8 * 0.7**12 + 0.2 * 0.8**19 = 0.0139553...
    assert reliability((12, 19), (0.8, 0.2), (0.3, 0.2)) == pytest.approx(0.0139553, abs=1e-7)


def test_reliability_batched_matches_pointwise():
    xs = np.array([[0, 1], [3, 2], [7, 0]])
    batch = reliability(xs, (0.4, 0.6), (0.1, 0.2))
    assert np.allclose(batch, [reliability(x, (0.4, 0.6), (0.1, 0.2)) for x in xs])


@pytest.mark.parametrize(
    "x, p, theta",
    [((1, 2, 3), (0.5, 0.5), (0.1, 0.2)), ((1, 2), (0.5, 0.5), (0.0, 0.2)), ((1, 2), (0.5, 0.5), (0.1, 1.0))],
)
def test_reliability_rejects_bad_input(x, p, theta):
    with pytest.raises(ValidationError):
        reliability(x, p, theta)


def test_reliability_nonincreasing_full_scan():
    theta, p = (0.3, 0.15, 0.6), (0.2, 0.5, 0.3)
    R = np.array([[[reliability((a, b, c), p, theta) for c in range(6)] for b in range(6)] for a in range(6)])
    for axis in range(3):
        assert np.all(np.diff(R, axis=axis) <= 0)


profiles = st.integers(2, 5).flatmap(
    lambda m: st.tuples(
        st.lists(st.floats(0.01, 1), min_size=m, max_size=m),
        st.lists(st.floats(0.01, 1), min_size=m, max_size=m),
        st.lists(st.integers(0, 30), min_size=m, max_size=m),
        st.lists(st.floats(0.01, 0.99), min_size=m, max_size=m),
    )
)


@given(profiles, st.floats(0, 1))
def test_reliability_linear_in_profile(data, alpha):
    a, b, x, theta = data
    p = np.array(a) / sum(a)
    q = np.array(b) / sum(b)
    mix = alpha * p + (1 - alpha) * q
    mix /= mix.sum()
    lhs = reliability(x, mix, theta)
    rhs = alpha * reliability(x, p, theta) + (1 - alpha) * reliability(x, q, theta)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_utility_examples():
    assert utility_eval(UtilitySpec.identity(), 0.5382) == 0.5382
    assert utility_eval(UtilitySpec.exponential(1.0), 0.0) == 0.0
    assert utility_eval(UtilitySpec.quadratic(), 0.3) == pytest.approx(0.21, abs=1e-15)
    for u in (UtilitySpec.identity(), UtilitySpec.quadratic(), UtilitySpec.exponential(0.01)):
        assert utility_eval(u, 0.0) == 0.0


def test_utility_domain_and_gamma():
    with pytest.raises(DomainError):
        utility_eval(UtilitySpec.identity(), 1.01)
    with pytest.raises(DomainError):
        utility_eval(UtilitySpec.identity(), -0.001)
    assert utility_eval(UtilitySpec.identity(), 1 + 1e-10) == pytest.approx(1.0)
    for g in (0.0, -1.0, None):
        with pytest.raises(ValidationError):
            UtilitySpec.exponential(g)
    with pytest.raises(ValidationError):
        UtilitySpec("log")


@pytest.mark.parametrize(
    "u, upper",
    [(UtilitySpec.identity(), 1.0), (UtilitySpec.exponential(0.05), 1.0), (UtilitySpec.exponential(5.0), 1.0),
     (UtilitySpec.quadratic(), 0.5)],
)
def test_utility_nondecreasing_on_grid(u, upper):
    r = np.arange(0, upper + 1e-12, 1e-3)
    assert np.all(np.diff(utility_eval(u, r)) >= 0)


def test_exponential_ordering_approaches_identity():
    # for large gamma, U is an increasing affine map of r to first order
    u = UtilitySpec.exponential(1e6)
    r = np.linspace(0, 1, 11)
    assert np.allclose(utility_eval(u, r) * 1e6, r, atol=1e-5)


@pytest.mark.parametrize(
    "n, q, pmf",
    [(0, 0.8, [1.0]), (1, 0.8, [0.2, 0.8]), (2, 0.9, [0.01, 0.18, 0.81])],
)
def test_binomial_kernel_examples(n, q, pmf):
    assert np.allclose(binomial_kernel(n, q).pmf, pmf, atol=1e-15)


@pytest.mark.parametrize("q", [0.001, 0.015, 0.5, 0.985, 0.999])
def test_binomial_kernel_matches_scipy(q):
    for n in (0, 1, 5, 40, 200):
        k = binomial_kernel(n, q)
        assert abs(k.pmf.sum() - 1) <= 1e-12
        assert np.all(k.pmf >= 0)
        assert np.allclose(k.pmf, binom.pmf(np.arange(n + 1), n, q), rtol=1e-9, atol=1e-300)


@settings(max_examples=200)
@given(st.integers(0, 200), st.floats(1e-4, 1 - 1e-4))
def test_binomial_kernel_sums_to_one(n, q):
    assert abs(binomial_kernel(n, q).pmf.sum() - 1) <= 1e-12


def test_binomial_kernel_rejects_q():
    for q in (0.0, 1.0, -0.1):
        with pytest.raises(ValidationError):
            binomial_kernel(3, q)


def test_validate_model_examples():
    m = validate_model(ModelSpec(2, (40, 50), (0.015, 0.02), 40))
    assert m.n_states == 2091
    assert validate_model(ModelSpec(1, (0,), (0.5,), 1)).n_states == 1
    with pytest.raises(ValidationError) as e:
        validate_model(ModelSpec(2, (3, 3), (0.0, 0.5), 2))
    assert [v.field for v in e.value.violations] == ["theta[0]"]


def test_validate_model_collects_all_violations():
    with pytest.raises(ValidationError) as e:
        validate_model(ModelSpec(3, (3, -1), (0.0, 0.5), 0))
    fields = {v.field for v in e.value.violations}
    assert {"N", "theta", "N[1]", "theta[0]", "T"} <= fields


def test_state_cap():
    with pytest.raises(CapacityError) as e:
        ModelSpec.of((99, 99), (0.1, 0.1), 2, state_cap=1000)
    assert e.value.size == 10_000


def test_profile_and_state_types():
    assert OperationalProfile((0.25, 0.75)).p == (0.25, 0.75)
    with pytest.raises(ValidationError):
        OperationalProfile((0.5, 0.6))
    with pytest.raises(ValidationError):
        OperationalProfile((1.5, -0.5))
    model = ModelSpec.of((3, 4), (0.1, 0.2), 2)
    DefectState((3, 0), 2).check(model)
    with pytest.raises(ValidationError):
        DefectState((4, 0), 3).check(model)


def test_quadratic_warns_on_solve():
    from modsel import UncertaintySet, solve

    with pytest.warns(UserWarning, match="quadratic"):
        solve(ModelSpec.of((2,), (0.3,), 1), UtilitySpec.quadratic(), UncertaintySet.singleton((1.0,)))
