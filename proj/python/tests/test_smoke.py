import itertools
import math

import numpy as np
import pytest

import dcm


def random_psd(rng, n):
    a = rng.standard_normal((n, n))
    return a @ a.T / n


def test_normalizer_matches_enumeration():
    rng = np.random.default_rng(1)
    L = random_psd(rng, 5)
    total = sum(
        np.linalg.det(L[np.ix_(c, c)]) if c else 1.0
        for k in range(6)
        for c in map(list, itertools.combinations(range(5), k))
    )
    assert math.isclose(math.exp(dcm.log_normalizer(L)), total, rel_tol=1e-10)
    pmf = dcm.enumerate_pmf(L)
    assert len(pmf) == 32
    assert math.isclose(sum(pmf), 1.0, rel_tol=1e-12)
    assert math.isclose(dcm.subset_probability(L, [0, 2]), pmf[0b101], rel_tol=1e-10)


def test_kernel_and_identity_limit():
    x = np.array([[0.0, 1.0], [1.0, 0.5], [2.0, -1.0]])
    beta = np.array([0.3, -0.2])
    q, S, L = dcm.build_kernel(beta, np.zeros(2), x)
    assert np.allclose(np.diag(S), 1.0)
    assert np.allclose(L, np.diag(q) @ S @ np.diag(q))
    _, _, Li = dcm.build_kernel(beta, np.zeros(2), x, mode="identity")
    p = dcm.subset_probability(Li, [1])
    assert math.isclose(math.log(p), dcm.logistic_log_likelihood(beta, x, [1]), abs_tol=1e-12)


def test_samplers_agree_with_pmf():
    rng = np.random.default_rng(2)
    L = random_psd(rng, 3)
    pmf = np.array(dcm.enumerate_pmf(L))
    for method in ("spectral", "gumbel", "enumeration"):
        draws = dcm.sample(L, 20000, seed=3, method=method)
        hist = np.zeros(8)
        for c in draws:
            hist[sum(1 << i for i in c)] += 1
        assert 0.5 * np.abs(hist / len(draws) - pmf).sum() < 0.02
    assert dcm.sample(L, 5, seed=4) == dcm.sample(L, 5, seed=4)


def test_mcc():
    assert dcm.mcc([1, 0, 1], [1, 0, 1]) == pytest.approx(1.0)
    assert dcm.mcc([1, 0, 1], [0, 1, 0]) == pytest.approx(-1.0)
    assert dcm.mcc([1, 1, 0, 0], [1, 0, 1, 0]) == pytest.approx(0.0)
    with pytest.raises(dcm.DcmError):
        dcm.mcc([1], [1, 0])


def test_simulate_and_fit():
    text = dcm.simulate_spatial(60, radius=0.3, seed=5)
    lines = text.splitlines()
    assert len(lines) == 61
    fit = dcm.fit(text)
    assert fit["model"] == "determinantal"
    assert fit["converged"]
    assert len(fit["parameter_names"]) == len(fit["beta"]) + len(fit["log_lengthscales"])
    logit = dcm.fit(text, method="logistic")
    assert logit["model"] == "logistic"


def test_verify_smoke():
    report = dcm.verify(seed=1, trials=1, draws=20000)
    assert report["passed"]
    assert len(report["checks"]) == 6


def test_errors_surface_as_exceptions():
    with pytest.raises(dcm.DcmError):
        dcm.fit("not json\n")
    with pytest.raises(dcm.DcmError):
        dcm.sample(np.eye(2), 1, method="bogus")
