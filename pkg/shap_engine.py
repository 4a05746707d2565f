"""
Closed-form interventional SHAP values from a sparse Walsh-Hadamard spectrum

For frequency f, feature i, query x* and background row x let
    diff = x XOR x*      A~ = {j : diff_j = 1, f_j = 1}      |A| = |A~| - 1
Then
    phi_i = -(2/|D|) sum_f c_f f_i sum_x [diff_i] (-1)^<f,x> ((|A|+1) mod 2)/(|A|+1)

The weight only depends on (f, x), so each variant builds a k x |D| weight
block G[f, x] = c_f (-1)^<f,x> w(|A~| - 1) and differs in how the block is
scattered onto coordinates.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from errors import DimensionMismatchError, FourierShapError, QueryError
from fourier_core import (CHUNK_SIZE, Frequency, PointVector, SparseSpectrum, as_point_array,
                          as_point_matrix, evaluate_many, pack_bits, parity_matrix, popcount)

logger = logging.getLogger(__name__)

BASE_BLOCK = 1 << 20
SHAP_COLUMNS = ["query_id", "feature_index", "phi"]


class VariantId(str, Enum):
    BASE = "base"
    PRECOMPUTE = "precompute"
    SPARSE = "sparse"
    POSITIONAL = "positional"


class BackgroundDataset:
    """Background rows defining the empirical marginal; row order is kept"""
    __slots__ = ("points", "labels", "_packed")

    def __init__(self, points, labels: Optional[Sequence] = None):
        if isinstance(points, (list, tuple)) and points and isinstance(points[0], PointVector):
            n = points[0].n
        else:
            arr = np.asarray(points)
            n = arr.shape[-1] if arr.ndim else 0
        rows = as_point_matrix(points, n, "background")
        if rows.shape[0] == 0:
            raise ValueError("background dataset is empty")
        rows.setflags(write=False)
        self.points = rows
        self.labels = None if labels is None else list(labels)
        self._packed = None

    @property
    def n(self) -> int:
        return int(self.points.shape[1])

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    def __len__(self) -> int:
        return self.size

    def packed(self) -> np.ndarray:
        if self._packed is None:
            self._packed = pack_bits(self.points)
        return self._packed


@dataclass(frozen=True, eq=False)
class ShapResult:
    query: PointVector
    attributions: np.ndarray
    base_value: float
    prediction: float

    @property
    def n(self) -> int:
        return int(self.attributions.size)

    @property
    def sum_phi(self) -> float:
        return float(np.sum(self.attributions))

    @property
    def efficiency_residual(self) -> float:
        return self.sum_phi - (self.prediction - self.base_value)


def weight_table(max_A: int) -> np.ndarray:
    """table[m] = ((m+1) mod 2)/(m+1): 1, 0, 1/3, 0, 1/5, ..."""
    if max_A < 0:
        raise ValueError("max_A must be >= 0")
    m = np.arange(max_A + 1)
    return np.where(m % 2 == 0, 1.0 / (m + 1), 0.0)


def shap_single_frequency(f: Frequency, i: int, query, background: BackgroundDataset) -> float:
    """SHAP value of feature i for the single basis function (-1)^<f,x>"""
    n = background.n
    if f.n != n:
        raise DimensionMismatchError(f"frequency has n={f.n}, background n={n}", "frequency")
    if not 0 <= i < n:
        raise ValueError(f"feature index {i} outside [0, {n})")
    q = as_point_array(query, n, "query")
    fmask = f.mask()
    if not fmask[i]:
        return 0.0
    total = 0.0
    for x in background.points:
        if x[i] == q[i]:
            continue
        differs = (x != q) & (fmask == 1)
        a_size = int(differs.sum()) - 1
        if (a_size + 1) % 2 == 0:
            continue
        sign = -1.0 if int(np.dot(fmask, x)) % 2 else 1.0
        total += sign / (a_size + 1)
    return -2.0 * total / background.size + 0.0


class FourierShapExplainer:
    """Explains many queries against one (spectrum, background) pair.

    Everything that depends only on frequencies and background rows is
    built once here; `explain` then costs one pass over (f, x) pairs.
    """

    def __init__(self, spectrum: SparseSpectrum, background: BackgroundDataset,
                 variant: Union[VariantId, str] = VariantId.PRECOMPUTE,
                 weights: Optional[Sequence[float]] = None):
        if background.n != spectrum.n:
            raise DimensionMismatchError(f"background has {background.n} features, "
                                         f"spectrum has {spectrum.n}", "background")
        self.spectrum = spectrum
        self.background = background
        self.variant = VariantId(variant)
        n = spectrum.n
        table = weight_table(n) if weights is None else np.asarray(weights, dtype=np.float64)
        if table.size < n + 1:
            raise ValueError(f"weight table needs {n + 1} entries, got {table.size}")
        self._table = table
        # indexed by |A~|; |A~| = 0 never reaches a coordinate
        self._by_atilde = np.concatenate(([0.0], table[:n]))
        self._bits = spectrum.bits().astype(np.float64)
        self._background_values = evaluate_many(spectrum, background.points)
        self.base_value = float(np.mean(self._background_values))

        if self.variant is not VariantId.BASE:
            self._signs = 1.0 - 2.0 * parity_matrix(spectrum.masks, background.packed())
            self._fx = spectrum.masks[:, None, :] & background.packed()[None, :, :]
        if self.variant is VariantId.SPARSE:
            self._pair_f, self._pair_i = np.nonzero(spectrum.bits())
        if self.variant is VariantId.POSITIONAL:
            bits = spectrum.bits()
            self._coord_freqs = [np.flatnonzero(bits[:, i]) for i in range(n)]
        logger.debug("explainer ready: variant=%s k=%d |D|=%d n=%d", self.variant.value,
                     spectrum.support_size, background.size, n)

    # -- public ------------------------------------------------------------

    def explain(self, query) -> ShapResult:
        n = self.spectrum.n
        q = as_point_array(query, n, "query")
        diff = (self.background.points != q[None, :]).astype(np.uint8)
        kernel = {
            VariantId.BASE: self._explain_base,
            VariantId.PRECOMPUTE: self._explain_precompute,
            VariantId.SPARSE: self._explain_sparse,
            VariantId.POSITIONAL: self._explain_positional,
        }[self.variant]
        # +0.0 turns -0.0 from the negative scale into 0.0
        phi = -2.0 / self.background.size * kernel(q, diff) + 0.0
        prediction = float(evaluate_many(self.spectrum, q[None, :])[0])
        return ShapResult(PointVector.from_array(q), phi, self.base_value, prediction)

    def explain_batch(self, queries, workers: int = 1) -> List[ShapResult]:
        """Explain each query; results are independent of `workers`"""
        queries = list(queries)

        def one(item):
            index, query = item
            try:
                return self.explain(query)
            except FourierShapError as exc:
                raise QueryError(index, exc) from exc

        if workers > 1 and len(queries) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(one, enumerate(queries)))
        return [one(item) for item in enumerate(queries)]

    # -- variants ----------------------------------------------------------

    def _explain_base(self, q: np.ndarray, diff: np.ndarray) -> np.ndarray:
        # dense (f, x, i) tensor, chunked over frequencies
        n, m = self.spectrum.n, self.background.size
        freqs = self.spectrum.bits().astype(np.int64)
        rows = self.background.points.astype(np.int64)
        diff = diff.astype(np.int64)
        coefs = self.spectrum.coefs
        chunk = max(1, min(CHUNK_SIZE, BASE_BLOCK // (m * n)))
        acc = np.zeros(n)
        for start in range(0, freqs.shape[0], chunk):
            f = freqs[start:start + chunk]
            sign = 1.0 - 2.0 * ((f @ rows.T) & 1)
            atilde = f @ diff.T
            indicator = f[:, None, :] * diff[None, :, :]
            a_size = atilde[:, :, None] - indicator
            scaled = coefs[start:start + chunk, None] * sign
            terms = indicator * self._table[a_size] * scaled[:, :, None]
            acc += terms.sum(axis=(0, 1))
        return acc

    def _weight_block(self, start: int, stop: int, fq: np.ndarray) -> np.ndarray:
        fx = self._fx[start:stop]
        atilde = np.zeros(fx.shape[:2], dtype=np.int64)
        for w in range(fx.shape[2]):
            atilde += popcount(fx[:, :, w] ^ fq[start:stop, None, w])
        return self.spectrum.coefs[start:stop, None] * self._signs[start:stop] * self._by_atilde[atilde]

    def _blocks(self, q: np.ndarray):
        fq = self.spectrum.masks & pack_bits(q)[None, :]
        k = self.spectrum.support_size
        for start in range(0, k, CHUNK_SIZE):
            stop = min(start + CHUNK_SIZE, k)
            yield start, stop, self._weight_block(start, stop, fq)

    def _explain_precompute(self, q: np.ndarray, diff: np.ndarray) -> np.ndarray:
        diff_f = diff.astype(np.float64)
        acc = np.zeros(self.spectrum.n)
        for start, stop, block in self._blocks(q):
            spread = block.T @ self._bits[start:stop]
            acc += (spread * diff_f).sum(axis=0)
        return acc

    def _explain_sparse(self, q: np.ndarray, diff: np.ndarray) -> np.ndarray:
        # only (f, i) pairs with f_i = 1
        n = self.spectrum.n
        diff_t = diff.T.astype(np.float64)
        acc = np.zeros(n)
        for start, stop, block in self._blocks(q):
            lo, hi = np.searchsorted(self._pair_f, [start, stop])
            pf, pi = self._pair_f[lo:hi], self._pair_i[lo:hi]
            contrib = np.einsum("pm,pm->p", block[pf - start], diff_t[pi])
            acc += np.bincount(pi, weights=contrib, minlength=n)
        return acc

    def _explain_positional(self, q: np.ndarray, diff: np.ndarray) -> np.ndarray:
        n = self.spectrum.n
        diff_f = diff.astype(np.float64)
        k = self.spectrum.support_size
        weights = np.zeros((k, self.background.size))
        for start, stop, block in self._blocks(q):
            weights[start:stop] = block
        acc = np.zeros(n)
        for i, freqs in enumerate(self._coord_freqs):
            if freqs.size:
                acc[i] = weights[freqs].sum(axis=0) @ diff_f[:, i]
        return acc


def shap_values(spectrum: SparseSpectrum, query, background: BackgroundDataset,
                variant: Union[VariantId, str] = VariantId.PRECOMPUTE,
                weights: Optional[Sequence[float]] = None) -> ShapResult:
    return FourierShapExplainer(spectrum, background, variant, weights).explain(query)


def batch_explain(spectrum: SparseSpectrum, queries, background: BackgroundDataset,
                  variant: Union[VariantId, str] = VariantId.PRECOMPUTE,
                  workers: int = 1, weights: Optional[Sequence[float]] = None) -> List[ShapResult]:
    """shap_values for many queries, paying the (f, x) precomputation once"""
    explainer = FourierShapExplainer(spectrum, background, variant, weights)
    return explainer.explain_batch(queries, workers)


# ---------------------------------------------------------------------------
# output files
# ---------------------------------------------------------------------------

def shap_frame(results: Sequence[ShapResult]) -> pd.DataFrame:
    """Long-form table: one row per (query, feature)"""
    if not results:
        return pd.DataFrame({"query_id": pd.Series(dtype=np.int64),
                             "feature_index": pd.Series(dtype=np.int64),
                             "phi": pd.Series(dtype=np.float64)})
    n = results[0].n
    return pd.DataFrame({
        "query_id": np.repeat(np.arange(len(results)), n),
        "feature_index": np.tile(np.arange(n), len(results)),
        "phi": np.concatenate([r.attributions for r in results]),
    })[SHAP_COLUMNS]


def write_shap_csv(results: Sequence[ShapResult], path: Union[str, Path]):
    shap_frame(results).to_csv(path, index=False, float_format="%.17g")


def summary_records(results: Sequence[ShapResult]) -> List[dict]:
    return [{"query_id": q, "base_value": r.base_value, "prediction": r.prediction,
             "sum_phi": r.sum_phi, "efficiency_residual": r.efficiency_residual}
            for q, r in enumerate(results)]


def variant_diff(results_by_variant: Dict[str, Sequence[ShapResult]]) -> Dict[str, float]:
    """Pairwise max |delta phi| between variants over all queries"""
    names = list(results_by_variant)
    out = {}
    for a in range(len(names)):
        for b in range(a + 1, len(names)):
            ra, rb = results_by_variant[names[a]], results_by_variant[names[b]]
            dev = max((float(np.max(np.abs(x.attributions - y.attributions)))
                       for x, y in zip(ra, rb)), default=0.0)
            out[f"{names[a]}-{names[b]}"] = dev
    return out
