import math

import numpy as np
import pytest

from errors import ResourceGuardError
from fourier_core import SparseSpectrum, random_spectrum
from oracles import (KernelShapConfig, PropertySuite, ValueFunction, convergence_report,
                     double_counting_failures, exact_shap_bruteforce, kernel_shap, r2_vector,
                     shapley_weights, spectrum_model)
from shap_engine import BackgroundDataset, shap_values, weight_table


def instance(seed, n=8, k=24, m=6):
    rng = np.random.default_rng(seed)
    spectrum = random_spectrum(n, k, rng=rng)
    background = BackgroundDataset(rng.integers(0, 2, size=(m, n), dtype=np.uint8))
    query = rng.integers(0, 2, size=n, dtype=np.uint8)
    return spectrum, background, query


def test_value_function_endpoints():
    spectrum, background, query = instance(0)
    vf = ValueFunction(spectrum_model(spectrum), query, background)
    assert vf.empty() == pytest.approx(shap_values(spectrum, query, background).base_value, abs=1e-12)
    assert vf.full() == pytest.approx(shap_values(spectrum, query, background).prediction, abs=1e-12)


def test_bruteforce_constant_is_zero():
    background = BackgroundDataset([[0, 1, 1], [1, 0, 0]])
    phi = exact_shap_bruteforce(lambda pts: np.full(len(pts), 4.0), [1, 1, 0], background)
    np.testing.assert_array_equal(phi, np.zeros(3))


def test_bruteforce_hand_example():
    spectrum = SparseSpectrum.from_terms(2, {(0,): 1.0})
    phi = exact_shap_bruteforce(spectrum_model(spectrum), [0, 0], BackgroundDataset([[1, 0]]))
    np.testing.assert_allclose(phi, [2.0, 0.0], atol=1e-15)


def test_bruteforce_matches_engine_n12():
    spectrum, background, query = instance(12, n=12, k=32, m=10)
    truth = exact_shap_bruteforce(spectrum_model(spectrum), query, background)
    np.testing.assert_allclose(shap_values(spectrum, query, background).attributions, truth, atol=1e-9)


def test_bruteforce_efficiency():
    spectrum, background, query = instance(4)
    model = spectrum_model(spectrum)
    vf = ValueFunction(model, query, background)
    phi = exact_shap_bruteforce(model, query, background)
    assert phi.sum() == pytest.approx(vf.full() - vf.empty(), abs=1e-10)


def test_bruteforce_guard():
    background = BackgroundDataset(np.zeros((1, 6), dtype=np.uint8))
    with pytest.raises(ResourceGuardError):
        exact_shap_bruteforce(lambda pts: np.zeros(len(pts)), np.zeros(6), background, max_n=5)


def test_shapley_weights_sum():
    n = 9
    w = shapley_weights(n)
    # every feature sees each coalition size s with C(n-1, s) coalitions
    assert sum(w[s] * math.comb(n - 1, s) for s in range(n)) == pytest.approx(1.0)


def test_kernel_shap_full_enumeration_matches_bruteforce():
    for seed in range(3):
        spectrum, background, query = instance(seed, n=7)
        model = spectrum_model(spectrum)
        truth = exact_shap_bruteforce(model, query, background)
        phi, diag = kernel_shap(model, query, background, KernelShapConfig(full_enumeration=True))
        assert diag.enumerated
        assert diag.num_samples == 2 ** 7 - 2
        np.testing.assert_allclose(phi, truth, atol=1e-8)


def test_kernel_shap_sampled_is_efficient_and_reproducible():
    spectrum, background, query = instance(7, n=12, k=32, m=8)
    model = spectrum_model(spectrum)
    vf = ValueFunction(model, query, background)
    config = KernelShapConfig(sample_factor=0.1, rng_seed=3)
    phi, diag = kernel_shap(model, query, background, config)
    again, _ = kernel_shap(model, query, background, config)
    assert np.array_equal(phi, again)
    assert not diag.enumerated
    assert diag.num_samples == round(0.1 * (2 * 12 + 2048))
    assert phi.sum() == pytest.approx(vf.full() - vf.empty(), abs=1e-8)
    other, _ = kernel_shap(model, query, background, config, repetition=1)
    assert not np.array_equal(phi, other)


def test_kernel_shap_needs_two_features():
    background = BackgroundDataset([[0], [1]])
    with pytest.raises(ValueError):
        kernel_shap(lambda pts: np.zeros(len(pts)), [1], background)


def test_kernel_shap_config_validation():
    assert KernelShapConfig().effective_samples(10) == 2068
    assert KernelShapConfig(num_subset_samples=50).effective_samples(10) == 50
    with pytest.raises(ValueError):
        KernelShapConfig(sample_factor=0.0)


def test_paired_sampling_reduces_error():
    spectrum, background, query = instance(5, n=10, k=32, m=10)
    model = spectrum_model(spectrum)
    truth = exact_shap_bruteforce(model, query, background)

    def mse(paired):
        errors = []
        for rep in range(40):
            config = KernelShapConfig(num_subset_samples=60, paired_sampling=paired, rng_seed=1)
            phi, _ = kernel_shap(model, query, background, config, repetition=rep)
            errors.append(np.mean((phi - truth) ** 2))
        return np.mean(errors)

    assert mse(True) < mse(False)


@pytest.mark.parametrize("estimate,truth,expected", [
    ([1, 2, 3], [1, 2, 3], 1.0),
    ([2, 2, 2], [1, 2, 3], 0.0),
    ([1, 2, 4], [1, 2, 3], 0.5),
    ([5, 5], [5, 5], 1.0),
    ([5, 6], [5, 5], -math.inf),
])
def test_r2_vector(estimate, truth, expected):
    assert r2_vector(estimate, truth) == expected


def test_r2_vector_needs_two_entries():
    with pytest.raises(ValueError):
        r2_vector([1.0], [1.0])


def test_double_counting_identity_holds():
    assert double_counting_failures(12) == []


def test_property_suite_passes():
    outcomes = PropertySuite(n=8, k=16, background_size=6, trials=5, seed=2).run()
    assert {o.prop for o in outcomes} == set(PropertySuite.TOLERANCES)
    assert all(o.passed for o in outcomes)
    assert next(o for o in outcomes if o.prop == "dummy").max_deviation == 0.0


def test_property_suite_flags_efficiency_first_for_bad_weights():
    weights = weight_table(8).copy()
    weights[0] = 1.5
    outcomes = PropertySuite(n=8, k=16, background_size=6, trials=3, seed=0, weights=weights).run()
    assert outcomes[0].prop == "efficiency"
    assert not outcomes[0].passed


def test_convergence_report_improves_with_samples():
    spectrum, background, query = instance(10, n=10, k=32, m=10)
    rows = convergence_report(spectrum_model(spectrum), query, background,
                              factors=(0.02, 0.1, 1.0, 2.0), seeds=range(10))
    scores = [r["r2_vs_exact"] for r in rows]
    assert [r["sample_factor"] for r in rows] == [0.02, 0.1, 1.0, 2.0]
    assert scores == sorted(scores)
    assert scores[2] >= 0.99


def test_signed_arithmetic_model_oracles():
    def model(pts):
        return pts[:, 0] - pts[:, 1]

    background = BackgroundDataset([[0, 0]])
    phi = exact_shap_bruteforce(model, [0, 1], background)
    np.testing.assert_allclose(phi, [0.0, -1.0], atol=1e-15)
    kernel, _ = kernel_shap(model, [0, 1], background, KernelShapConfig(full_enumeration=True))
    np.testing.assert_allclose(kernel, [0.0, -1.0], atol=1e-8)
