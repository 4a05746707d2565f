"""
Step one for query-access models: turn a black box on {0,1}^n into a sparse
spectrum, either exhaustively (small n) or by low-degree regression.
"""
import itertools
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Union

import numpy as np
import pandas as pd
import scipy.linalg

from errors import DimensionMismatchError, ResourceGuardError, SchemaError
from fourier_core import (DEFAULT_MAX_DENSE_N, SparseSpectrum, as_point_matrix, canonical_order,
                          degree_support_count, dense_wht, evaluate_many, load_spectrum,
                          pack_bits, parity_matrix, random_spectrum, truth_table_points)
from oracles import r2_vector
from tree_fourier import TreeEnsemble, load_tree_model

logger = logging.getLogger(__name__)

MAX_RECOVERY_SAMPLES = 10 ** 6
QUERY_CHUNK = 1 << 16
ILL_CONDITIONED = 1e12
RECOVERY_MODES = ("exhaustive", "low_degree")
SYNTHETIC_NAMES = ("parity", "random_sparse", "majority")

_FIT_STREAM = 0
_EVAL_STREAM = 1


class QueryHandle:
    """Black-box predictor with a query counter.

    `evaluator` maps an (m, n) int64 0/1 array to m values. Handles that are not
    thread-safe are serialized behind the handle's lock.
    """

    def __init__(self, evaluator: Callable[[np.ndarray], np.ndarray], n: int,
                 thread_safe: bool = False, name: str = "callable"):
        if n < 1:
            raise ValueError("handle dimension must be at least 1")
        self.evaluator = evaluator
        self.n = n
        self.thread_safe = thread_safe
        self.name = name
        self.lock = threading.Lock()
        self._queries = 0

    @property
    def query_count(self) -> int:
        with self.lock:
            return self._queries

    def __call__(self, points) -> np.ndarray:
        pts = as_point_matrix(points, self.n, "query points")
        # evaluators see signed int64 points, never the packed uint8 storage
        signed = pts.astype(np.int64)
        if self.thread_safe:
            values = self.evaluator(signed)
        else:
            with self.lock:
                values = self.evaluator(signed)
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if values.size != pts.shape[0]:
            raise DimensionMismatchError(f"evaluator returned {values.size} values for "
                                         f"{pts.shape[0]} points", self.name)
        with self.lock:
            self._queries += pts.shape[0]
        return values

    def query_batched(self, points, workers: int = 1, chunk: int = QUERY_CHUNK) -> np.ndarray:
        """Evaluate in chunks; chunks run concurrently only for thread-safe handles"""
        pts = as_point_matrix(points, self.n, "query points")
        starts = range(0, pts.shape[0], chunk)
        if workers > 1 and self.thread_safe and len(starts) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(lambda s: self(pts[s:s + chunk]), starts))
        else:
            parts = [self(pts[s:s + chunk]) for s in starts]
        return np.concatenate(parts) if parts else np.zeros(0)

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_callable(cls, fn: Callable, n: int, thread_safe: bool = False,
                      vectorized: bool = True) -> "QueryHandle":
        if vectorized:
            return cls(fn, n, thread_safe, "callable")
        return cls(lambda pts: np.array([fn(row) for row in pts], dtype=np.float64), n,
                   thread_safe, "callable")

    @classmethod
    def from_ensemble(cls, ensemble: TreeEnsemble) -> "QueryHandle":
        return cls(ensemble.predict_many, ensemble.n_features, True, "tree model")

    @classmethod
    def from_tree_model(cls, path: Union[str, Path], fmt: str = "native") -> "QueryHandle":
        return cls.from_ensemble(load_tree_model(path, fmt))

    @classmethod
    def from_spectrum(cls, spectrum: Union[SparseSpectrum, str, Path]) -> "QueryHandle":
        if not isinstance(spectrum, SparseSpectrum):
            spectrum = load_spectrum(spectrum)
        return cls(lambda pts: evaluate_many(spectrum, pts), spectrum.n, True, "spectrum")

    @classmethod
    def from_truth_table_csv(cls, path: Union[str, Path]) -> "QueryHandle":
        """CSV with one 0/1 column per feature followed by a `value` column,
        one row for every point of the cube"""
        frame = pd.read_csv(path)
        if frame.columns.empty or frame.columns[-1] != "value":
            raise SchemaError("last column must be named 'value'", str(path))
        n = frame.shape[1] - 1
        if n < 1:
            raise SchemaError("truth table has no feature columns", str(path))
        bits = frame.iloc[:, :n].to_numpy()
        if not np.isin(bits, (0, 1)).all():
            raise SchemaError("feature columns must hold 0/1", str(path))
        if frame.shape[0] != 1 << n:
            raise SchemaError(f"expected {1 << n} rows for n={n}, found {frame.shape[0]}", str(path))
        index = bits.astype(np.int64) @ (1 << np.arange(n - 1, -1, -1, dtype=np.int64))
        if np.unique(index).size != index.size:
            raise SchemaError("truth table repeats a point", str(path))
        table = np.empty(1 << n)
        table[index] = frame["value"].to_numpy(dtype=np.float64)
        weights = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
        return cls(lambda pts: table[pts.astype(np.int64) @ weights], n, True, "truth table")

    @classmethod
    def from_synthetic(cls, name: str, n: int, **params) -> "QueryHandle":
        if name == "parity":
            features = params.get("features", range(n))
            spectrum = SparseSpectrum.from_terms(n, {tuple(sorted(features)): 1.0})
            return cls.from_spectrum(spectrum)
        if name == "random_sparse":
            spectrum = random_spectrum(n, int(params.get("k", 16)), params.get("d"),
                                       rng=params.get("seed", 0))
            return cls.from_spectrum(spectrum)
        if name == "majority":
            return cls(lambda pts: np.where(2 * pts.sum(axis=1) > n, 1.0, -1.0), n, True, "majority")
        raise ValueError(f"unknown synthetic generator {name!r}; choose from {SYNTHETIC_NAMES}")


@dataclass(frozen=True)
class RecoveryConfig:
    mode: str = "low_degree"
    max_degree: int = 2
    num_samples: Optional[int] = None
    ridge: float = 1e-6
    rng_seed: int = 0
    top_k: Optional[int] = None
    drop_below: float = 1e-10

    def __post_init__(self):
        if self.mode not in RECOVERY_MODES:
            raise ValueError(f"mode must be one of {RECOVERY_MODES}")
        if self.max_degree < 0:
            raise ValueError("max_degree must be >= 0")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")
        if self.num_samples is not None and self.num_samples < 1:
            raise ValueError("num_samples must be positive")
        if self.top_k is not None and self.top_k < 0:
            raise ValueError("top_k must be >= 0")


@dataclass
class RecoveryReport:
    spectrum: SparseSpectrum
    condition_number: float
    num_samples: int
    in_sample_r2: float
    warnings: List[str] = field(default_factory=list)


def uniform_points(n: int, count: int, seed: int, stream: int = _FIT_STREAM) -> np.ndarray:
    """Uniform cube points from a Philox stream keyed by (seed, stream)"""
    rng = np.random.Generator(np.random.Philox(key=(stream << 64) | (seed & ((1 << 64) - 1))))
    return rng.integers(0, 2, size=(count, n), dtype=np.uint8)


def degree_basis(n: int, d: int) -> np.ndarray:
    """Packed masks of every frequency of degree <= d, canonical order"""
    d = min(d, n)
    rows = np.zeros((degree_support_count(n, d), n), dtype=np.uint8)
    r = 0
    for deg in range(d + 1):
        for combo in itertools.combinations(range(n), deg):
            rows[r, list(combo)] = 1
            r += 1
    masks = pack_bits(rows)
    return masks[canonical_order(masks, n)]


def exhaustive_transform(handle: QueryHandle, n: int, max_n: int = DEFAULT_MAX_DENSE_N,
                         workers: int = 1) -> SparseSpectrum:
    """Query every point of the cube once and transform the truth table"""
    if n != handle.n:
        raise DimensionMismatchError(f"handle has n={handle.n}, asked for n={n}", "handle")
    if n > max_n:
        raise ResourceGuardError(f"exhaustive transform needs 2^{n} queries, cap is n <= {max_n}")
    size = 1 << n
    values = np.empty(size)
    for start in range(0, size, QUERY_CHUNK):
        stop = min(start + QUERY_CHUNK, size)
        values[start:stop] = handle.query_batched(truth_table_points(n, start, stop), workers)
    logger.info("exhaustive transform: %d queries", size)
    return dense_wht(values, max_n=max_n)


def _features(basis: np.ndarray, points: np.ndarray) -> np.ndarray:
    return 1.0 - 2.0 * parity_matrix(basis, pack_bits(points)).T


def low_degree_fit(handle: QueryHandle, n: int, config: Optional[RecoveryConfig] = None) -> RecoveryReport:
    config = config or RecoveryConfig()
    if n != handle.n:
        raise DimensionMismatchError(f"handle has n={handle.n}, asked for n={n}", "handle")
    basis = degree_basis(n, config.max_degree)
    p = basis.shape[0]
    samples = config.num_samples or 4 * p
    if samples > MAX_RECOVERY_SAMPLES:
        raise ResourceGuardError(f"{samples} samples exceeds guard {MAX_RECOVERY_SAMPLES}")
    notes = []
    if samples < 2 * p:
        notes.append(f"{samples} samples for {p} basis functions (recommended >= {2 * p})")
        logger.warning(notes[-1])

    points = uniform_points(n, samples, config.rng_seed, _FIT_STREAM)
    y = handle(points)
    phi = _features(basis, points)

    gram = phi.T @ phi / samples + config.ridge * np.eye(p)
    cond = float(np.linalg.cond(gram))
    if cond > ILL_CONDITIONED:
        notes.append(f"ill-conditioned fit: condition estimate {cond:.3e}")
        logger.warning(notes[-1])
    coefs = scipy.linalg.solve(gram, phi.T @ y / samples, assume_a="sym")

    if config.top_k is not None:
        keep = np.argsort(-np.abs(coefs), kind="stable")[:config.top_k]
    else:
        keep = np.flatnonzero(np.abs(coefs) >= config.drop_below)
    keep = np.sort(keep)
    refit = np.zeros(0)
    if keep.size:
        refit = scipy.linalg.lstsq(phi[:, keep], y)[0]
    fitted = phi[:, keep] @ refit if keep.size else np.zeros(samples)
    in_sample = r2_vector(fitted, y) if samples >= 2 else float("nan")

    final = np.abs(refit) >= config.drop_below
    spectrum = SparseSpectrum(n, basis[keep][final], refit[final])
    logger.info("low-degree fit: %d samples, %d/%d terms kept, in-sample R^2 %.6f",
                samples, spectrum.support_size, p, in_sample)
    return RecoveryReport(spectrum, cond, samples, in_sample, notes)


def low_degree_recovery(handle: QueryHandle, n: int, config: Optional[RecoveryConfig] = None) -> SparseSpectrum:
    return low_degree_fit(handle, n, config).spectrum


def recover(handle: QueryHandle, n: int, config: Optional[RecoveryConfig] = None,
            workers: int = 1) -> SparseSpectrum:
    config = config or RecoveryConfig()
    if config.mode == "exhaustive":
        return exhaustive_transform(handle, n, workers=workers)
    return low_degree_recovery(handle, n, config)


def fidelity_r2(handle: QueryHandle, spectrum: SparseSpectrum, num_eval_samples: int = 1000,
                rng_seed: int = 0) -> float:
    """R^2 of the spectrum against the handle on fresh uniform points"""
    if num_eval_samples < 2:
        raise ValueError("num_eval_samples must be >= 2")
    if spectrum.n != handle.n:
        raise DimensionMismatchError(f"spectrum n={spectrum.n}, handle n={handle.n}", "spectrum")
    points = uniform_points(handle.n, num_eval_samples, rng_seed, _EVAL_STREAM)
    return r2_vector(evaluate_many(spectrum, points), handle(points))
