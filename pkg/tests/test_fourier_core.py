import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import DimensionMismatchError, ResourceGuardError, SchemaError
from fourier_core import (Frequency, PointVector, SparseSpectrum, amplitude_prune, canonical_order,
                          degree_support_count, dense_wht, evaluate, evaluate_many, from_orthonormal, load_spectrum,
                          pack_bits, parity_matrix, popcount, prune, random_spectrum, save_spectrum, to_orthonormal,
                          to_truth_table, truth_table_points, unpack_bits, _swar_popcount)


def test_evaluate_constant_and_single_character():
    const = SparseSpectrum.from_terms(3, {(): 2.5})
    assert evaluate(const, [1, 0, 1]) == 2.5

    psi = SparseSpectrum.from_terms(2, {(0,): 1.0})
    assert evaluate(psi, [0, 1]) == 1.0
    assert evaluate(psi, [1, 0]) == -1.0


def test_evaluate_rejects_wrong_dimension():
    spectrum = SparseSpectrum.from_terms(3, {(0, 2): 1.0})
    with pytest.raises(DimensionMismatchError):
        evaluate(spectrum, [0, 1])


def test_non_binary_point_is_schema_error():
    spectrum = SparseSpectrum.from_terms(2, {(0,): 1.0})
    with pytest.raises(SchemaError):
        evaluate(spectrum, [0, 2])


def test_dense_wht_examples():
    spectrum = dense_wht([1.0, 1.0, 1.0, 1.0])
    assert spectrum.terms() == {Frequency.zero(2): 1.0}

    # feature 0 is the most significant bit of the truth-table index
    spectrum = dense_wht([1.0, 1.0, -1.0, -1.0])
    assert spectrum.terms() == {Frequency(2, (0,)): 1.0}


def test_dense_wht_rejects_bad_lengths():
    with pytest.raises(ValueError):
        dense_wht([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        dense_wht([1.0])
    with pytest.raises(ResourceGuardError):
        dense_wht(np.zeros(1 << 4), max_n=3)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2 ** 31 - 1))
def test_truth_table_round_trip_and_parseval(n, seed):
    rng = np.random.default_rng(seed)
    values = rng.normal(size=1 << n)
    spectrum = dense_wht(values)
    np.testing.assert_allclose(to_truth_table(spectrum), values, atol=1e-12)
    # Parseval in the unnormalized convention
    assert spectrum.energy() == pytest.approx(float(np.mean(values ** 2)), rel=1e-10)
    np.testing.assert_allclose(evaluate_many(spectrum, truth_table_points(n)), values, atol=1e-12)


def test_canonical_order_is_degree_then_bits():
    n = 3
    rows = truth_table_points(n)
    order = canonical_order(pack_bits(rows), n)
    keys = [(int(r.sum()), tuple(r.tolist())) for r in rows[order]]
    assert keys == sorted(keys)
    assert tuple(rows[order][1]) == (0, 0, 1)


def test_spectrum_rejects_duplicates_and_drops_zeros():
    masks = pack_bits(np.array([[1, 0], [1, 0]], dtype=np.uint8))
    with pytest.raises(ValueError):
        SparseSpectrum(2, masks, [1.0, 2.0])
    spectrum = SparseSpectrum(2, pack_bits(np.array([[1, 0], [0, 1]], dtype=np.uint8)), [0.0, 3.0])
    assert spectrum.support_size == 1
    assert spectrum.coef_of((1,)) == 3.0


def test_spectrum_is_read_only():
    spectrum = random_spectrum(5, 4, rng=1)
    with pytest.raises(ValueError):
        spectrum.coefs[0] = 1.0


def test_prune_examples():
    spectrum = SparseSpectrum.from_terms(2, {(0,): 3.0, (1,): 0.001})
    kept, report = prune(spectrum, 0.9995, 0.005)
    assert kept.terms() == {Frequency(2, (0,)): 3.0}
    assert report.dropped_count == 1
    assert report.kept_fraction >= 0.9995

    spectrum = SparseSpectrum.from_terms(2, {(0,): 3.0, (1,): 0.01})
    kept, _ = prune(spectrum, 0.5, 0.005)
    assert kept.support_size == 2

    spectrum = SparseSpectrum.from_terms(3, {(): 0.9, (0,): 0.3, (1,): 0.1})
    kept, _ = prune(spectrum, 0.8)
    assert kept.terms() == {Frequency.zero(3): 0.9}
    kept, report = prune(spectrum, 1.0)
    assert kept.support_size == 3
    assert report.dropped_count == 0


def test_prune_is_idempotent():
    spectrum = random_spectrum(8, 60, rng=3)
    once, report = prune(spectrum, 0.95)
    twice, report2 = prune(once, 0.95)
    assert once == twice
    assert report2.total_energy == report.total_energy


def test_prune_bad_arguments():
    spectrum = random_spectrum(4, 3, rng=0)
    with pytest.raises(ValueError):
        prune(spectrum, 0.0)
    with pytest.raises(ValueError):
        prune(spectrum, 0.5, -1.0)


@pytest.mark.parametrize("n,d,expected", [(12, 2, 79), (40, 2, 821), (5, 0, 1), (4, 4, 16)])
def test_degree_support_count(n, d, expected):
    assert degree_support_count(n, d) == expected


def test_popcount_matches_swar_fallback(rng):
    words = rng.integers(0, 2 ** 63, size=200, dtype=np.uint64) * np.uint64(2) + np.uint64(1)
    expected = np.array([bin(int(w)).count("1") for w in words], dtype=np.uint8)
    np.testing.assert_array_equal(popcount(words), expected)
    np.testing.assert_array_equal(_swar_popcount(words), expected)


def test_packing_spans_multiple_words(rng):
    bits = rng.integers(0, 2, size=(7, 130), dtype=np.uint8)
    packed = pack_bits(bits)
    assert packed.shape == (7, 3)
    np.testing.assert_array_equal(unpack_bits(packed, 130), bits)
    parity = parity_matrix(packed, packed)
    np.testing.assert_array_equal(parity, (bits.astype(int) @ bits.T.astype(int)) % 2)


def test_wide_spectrum_evaluation(rng):
    n = 100
    spectrum = SparseSpectrum.from_terms(n, {(0, 70, 99): 2.0, (5,): -1.0})
    x = np.zeros(n, dtype=np.uint8)
    x[[70, 5]] = 1
    assert evaluate(spectrum, x) == pytest.approx(-2.0 + 1.0)


def test_linear_arithmetic():
    a = SparseSpectrum.from_terms(3, {(0,): 1.0, (1, 2): 2.0})
    b = SparseSpectrum.from_terms(3, {(0,): -1.0, (): 0.5})
    total = a + b
    assert total.terms() == {Frequency(3, (1, 2)): 2.0, Frequency.zero(3): 0.5}
    assert (a - a).support_size == 0
    assert (2 * a).coef_of((1, 2)) == 4.0
    assert a.max_abs_diff(b) == 2.0


def test_json_round_trip(tmp_path):
    spectrum = random_spectrum(9, 12, rng=7)
    path = tmp_path / "s.json"
    save_spectrum(spectrum, path)
    loaded = load_spectrum(path)
    assert loaded == spectrum
    payload = json.loads(path.read_text())
    assert payload["convention"] == "pm1_unnormalized"


@pytest.mark.parametrize("payload,pointer", [
    ({"n": 0, "convention": "pm1_unnormalized", "terms": []}, "/n"),
    ({"n": 2, "convention": "orthonormal", "terms": []}, "/convention"),
    ({"n": 2, "convention": "pm1_unnormalized", "terms": [{"freq": [0, 5], "coef": 1.0}]}, "/terms/0/freq/1"),
    ({"n": 2, "convention": "pm1_unnormalized", "terms": [{"freq": [0], "coef": "x"}]}, "/terms/0/coef"),
])
def test_spectrum_schema_errors_carry_pointer(payload, pointer):
    with pytest.raises(SchemaError) as info:
        SparseSpectrum.from_dict(payload)
    assert info.value.path == pointer


def test_orthonormal_conversion():
    spectrum = SparseSpectrum.from_terms(4, {(1,): 0.25})
    values = to_orthonormal(spectrum)
    assert values[0] == pytest.approx(0.25 * math.sqrt(16))
    back = from_orthonormal(4, spectrum.masks, values)
    assert back.coef_of((1,)) == pytest.approx(0.25)


def test_random_spectrum_respects_degree():
    spectrum = random_spectrum(10, 30, max_degree=2, rng=0)
    assert spectrum.support_size == 30
    assert spectrum.degree <= 2


def test_point_vector():
    p = PointVector.from_array(np.array([1, 0, 1]))
    assert p.n == 3
    with pytest.raises(ValueError):
        PointVector((0, 2))


@pytest.mark.parametrize("n,d,expected", [(10, 2, 56), (13, 3, 378)])
def test_degree_support_count_reference_values(n, d, expected):
    assert degree_support_count(n, d) == expected


def test_evaluate_two_term_example():
    spectrum = SparseSpectrum.from_terms(2, {(0, 1): 2.0, (): 1.0})
    assert evaluate(spectrum, [1, 0]) == -1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2 ** 31 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_dense_wht_is_linear(n, seed, a, b):
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=(2, 1 << n))
    combined = dense_wht(a * u + b * v)
    separate = a * dense_wht(u) + b * dense_wht(v)
    assert combined.max_abs_diff(separate) <= 1e-12


def sum_of_local_tables(n, subsets, rng):
    """Truth table of sum_i g_i(x restricted to subsets[i]) with integer-valued g_i"""
    points = truth_table_points(n).astype(np.int64)
    values = np.zeros(1 << n)
    for subset in subsets:
        table = rng.integers(-4, 5, size=1 << len(subset)).astype(float)
        index = np.zeros(len(points), dtype=np.int64)
        for feature in subset:
            index = 2 * index + points[:, feature]
        values += table[index]
    return values


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(1, 4), st.integers(0, 2 ** 31 - 1))
def test_support_stays_within_feature_subsets(n, parts, seed):
    rng = np.random.default_rng(seed)
    subsets = [sorted(rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False).tolist())
               for _ in range(parts)]
    spectrum = dense_wht(sum_of_local_tables(n, subsets, rng))
    for f in spectrum.terms():
        assert any(set(f.indices) <= set(s) for s in subsets)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(0, 3), st.integers(0, 2 ** 31 - 1))
def test_bounded_degree_support_size(n, d, seed):
    rng = np.random.default_rng(seed)
    d = min(d, n)
    subsets = [sorted(rng.choice(n, size=d, replace=False).tolist()) for _ in range(6)]
    spectrum = dense_wht(sum_of_local_tables(n, subsets, rng))
    assert spectrum.degree <= d
    assert spectrum.support_size <= degree_support_count(n, d)


def test_zero_min_amplitude_disables_guard():
    spectrum = SparseSpectrum.from_terms(3, {(): 2.0, (0,): 0.5, (1,): 0.01})
    kept, report = prune(spectrum, 0.9, 0.0)
    assert kept.terms() == {Frequency.zero(3): 2.0}
    assert report.dropped_count == 2
    kept, _ = prune(spectrum, 0.9, 0.01)
    assert kept.support_size == 3


def test_amplitude_prune():
    spectrum = SparseSpectrum.from_terms(3, {(): 2.0, (0,): -0.05, (1, 2): 0.001})
    kept, report = amplitude_prune(spectrum, 0.01)
    assert kept.terms() == {Frequency.zero(3): 2.0, Frequency(3, (0,)): -0.05}
    assert report.dropped_count == 1
    assert kept.source_energy == pytest.approx(spectrum.energy())
    assert amplitude_prune(spectrum, 0.0)[0] == spectrum
    assert amplitude_prune(spectrum, 10.0)[0].support_size == 0
    with pytest.raises(ValueError):
        amplitude_prune(spectrum, -1.0)
