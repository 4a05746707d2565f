"""
Ground-truth engines: exhaustive Shapley enumeration and KernelSHAP
least squares, plus the property suite behind `fourier-shap verify`.
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.special

from errors import DegenerateSystemError, DimensionMismatchError, ResourceGuardError
from fourier_core import (SparseSpectrum, as_point_array, evaluate_many, random_spectrum,
                          truth_table_points)
from shap_engine import BackgroundDataset, FourierShapExplainer, VariantId

logger = logging.getLogger(__name__)

BRUTE_FORCE_MAX_N = 20
ORACLE_MAX_N = 12
KERNEL_RIDGE = 1e-10
KERNEL_RETRIES = 3
EVAL_BLOCK = 1 << 18
DEFAULT_FACTORS = (0.02, 0.1, 1.0)
WIDE_FACTORS = (0.02, 0.03, 0.04, 0.1, 1.0, 2.0, 10.0)

# models receive an (m, n) int64 0/1 matrix
Model = Callable[[np.ndarray], np.ndarray]


def spectrum_model(spectrum: SparseSpectrum) -> Model:
    return lambda points: evaluate_many(spectrum, points)


class ValueFunction:
    """v(S) = mean over x in D of h(x*_S, x_rest)"""

    def __init__(self, h: Model, query, background: BackgroundDataset):
        self.h = h
        self.n = background.n
        self.query = as_point_array(query, self.n, "query")
        self.background = background

    def __call__(self, coalitions) -> np.ndarray:
        """Values for a (s, n) 0/1 matrix of coalitions"""
        coalitions = np.atleast_2d(np.asarray(coalitions, dtype=bool))
        if coalitions.shape[1] != self.n:
            raise DimensionMismatchError(f"coalition width {coalitions.shape[1]} != {self.n}", "coalition")
        rows = self.background.points
        m = rows.shape[0]
        step = max(1, EVAL_BLOCK // (m * self.n))
        out = np.empty(coalitions.shape[0])
        for start in range(0, coalitions.shape[0], step):
            block = coalitions[start:start + step]
            mixed = np.where(block[:, None, :], self.query[None, None, :], rows[None, :, :])
            values = np.asarray(self.h(mixed.reshape(-1, self.n).astype(np.int64)), dtype=np.float64)
            out[start:start + step] = values.reshape(block.shape[0], m).mean(axis=1)
        return out

    def empty(self) -> float:
        return float(self(np.zeros((1, self.n), dtype=bool))[0])

    def full(self) -> float:
        return float(self(np.ones((1, self.n), dtype=bool))[0])


def shapley_weights(n: int) -> np.ndarray:
    """w[s] = 1 / (n * C(n-1, s)), computed exactly then rounded once"""
    return np.array([float(Fraction(1, n * math.comb(n - 1, s))) for s in range(n)])


def exact_shap_bruteforce(h: Model, query, background: BackgroundDataset,
                          max_n: int = BRUTE_FORCE_MAX_N) -> np.ndarray:
    n = background.n
    if n > max_n:
        raise ResourceGuardError(f"brute-force Shapley needs 2^{n} coalitions, guard is n <= {max_n}")
    vf = ValueFunction(h, query, background)
    values = vf(truth_table_points(n).astype(bool))
    index = np.arange(1 << n)
    sizes = np.zeros(1 << n, dtype=np.int64)
    for j in range(n):
        sizes += (index >> j) & 1
    weights = shapley_weights(n)
    phi = np.zeros(n)
    for i in range(n):
        bit = 1 << (n - 1 - i)
        without = index[(index & bit) == 0]
        phi[i] = np.sum(weights[sizes[without]] * (values[without | bit] - values[without]))
    return phi


@dataclass(frozen=True)
class KernelShapConfig:
    num_subset_samples: Optional[int] = None
    paired_sampling: bool = True
    sample_factor: float = 1.0
    rng_seed: int = 0
    full_enumeration: bool = False

    def __post_init__(self):
        if self.num_subset_samples is not None and self.num_subset_samples < 1:
            raise ValueError("num_subset_samples must be positive")
        if self.sample_factor <= 0:
            raise ValueError("sample_factor must be positive")

    def effective_samples(self, n: int) -> int:
        if self.num_subset_samples is not None:
            return self.num_subset_samples
        return max(1, int(round(self.sample_factor * (2 * n + 2048))))


@dataclass
class KernelShapDiagnostics:
    num_samples: int
    condition_number: float
    retries: int = 0
    enumerated: bool = False


def _kernel_weights(n: int, sizes: np.ndarray) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=np.float64)
    return (n - 1) / (scipy.special.comb(n, sizes) * sizes * (n - sizes))


def _enumerate_coalitions(n: int) -> Tuple[np.ndarray, np.ndarray]:
    z = truth_table_points(n)
    sizes = z.sum(axis=1)
    keep = (sizes > 0) & (sizes < n)
    return z[keep].astype(bool), _kernel_weights(n, sizes[keep])


def _sample_coalitions(n: int, count: int, paired: bool, rng: np.random.Generator) -> np.ndarray:
    sizes = np.arange(1, n)
    probs = (n - 1) / (sizes * (n - sizes))
    probs = probs / probs.sum()
    draws = (count + 1) // 2 if paired else count
    chosen = rng.choice(sizes, size=draws, p=probs)
    ranks = np.argsort(np.argsort(rng.random((draws, n)), axis=1), axis=1)
    z = ranks < chosen[:, None]
    if paired:
        z = np.concatenate([z, ~z])[:count]
    return z


def _solve_constrained(z: np.ndarray, w: np.ndarray, y: np.ndarray, delta: float) -> Tuple[np.ndarray, float]:
    # beta_0 fixed by v(empty); last coordinate eliminated through sum(beta) = delta
    zf = z.astype(np.float64)
    x = zf[:, :-1] - zf[:, -1:]
    target = y - zf[:, -1] * delta
    xtw = x.T * w
    normal = xtw @ x + KERNEL_RIDGE * np.eye(x.shape[1])
    cond = float(np.linalg.cond(normal))
    head = scipy.linalg.solve(normal, xtw @ target, assume_a="pos")
    return np.append(head, delta - head.sum()), cond


def kernel_shap(h: Model, query, background: BackgroundDataset,
                config: Optional[KernelShapConfig] = None,
                repetition: int = 0) -> Tuple[np.ndarray, KernelShapDiagnostics]:
    config = config or KernelShapConfig()
    n = background.n
    if n < 2:
        raise ValueError("kernel_shap needs n >= 2")
    vf = ValueFunction(h, query, background)
    v0, v_full = vf.empty(), vf.full()
    delta = v_full - v0
    budget = config.effective_samples(n)
    enumerate_all = config.full_enumeration or budget >= (1 << n) - 2

    if enumerate_all:
        z, w = _enumerate_coalitions(n)
        phi, cond = _solve_constrained(z, w, vf(z) - v0, delta)
        return phi, KernelShapDiagnostics(len(z), cond, 0, True)

    for attempt in range(KERNEL_RETRIES + 1):
        entropy = [config.rng_seed, repetition] + ([attempt] if attempt else [])
        rng = np.random.default_rng(np.random.SeedSequence(entropy))
        z = _sample_coalitions(n, budget, config.paired_sampling, rng)
        if np.unique(z, axis=0).shape[0] > 1:
            break
        logger.debug("kernel_shap: degenerate sample on attempt %d", attempt)
    else:
        raise DegenerateSystemError(f"all sampled coalitions identical after {KERNEL_RETRIES} retries")
    phi, cond = _solve_constrained(z, np.ones(len(z)), vf(z) - v0, delta)
    return phi, KernelShapDiagnostics(len(z), cond, attempt, False)


def r2_vector(estimate, truth) -> float:
    estimate = np.asarray(estimate, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if estimate.shape != truth.shape or truth.size < 2:
        raise ValueError("r2_vector needs two vectors of equal length >= 2")
    residual = float(np.sum((estimate - truth) ** 2))
    spread = float(np.sum((truth - truth.mean()) ** 2))
    if spread == 0.0:
        return 1.0 if residual == 0.0 else -math.inf
    return 1.0 - residual / spread


def double_counting_failures(max_n: int) -> List[Tuple[int, int, int]]:
    """Every (n, |A|, a) where the subset-counting identity behind the
    closed-form weights fails; exact integers, so the list should be empty."""
    failures = []
    for n in range(1, max_n + 1):
        for size in range(n):
            rhs = math.comb(n, size + 1)
            for a in range(size + 1):
                lhs = sum(math.comb(a + b, a) * math.comb(n - a - b - 1, size - a)
                          for b in range(n - size))
                if lhs != rhs:
                    failures.append((n, size, a))
    return failures


# ---------------------------------------------------------------------------
# property suite
# ---------------------------------------------------------------------------

@dataclass
class PropertyOutcome:
    prop: str
    max_deviation: float
    tolerance: float
    seed: int
    trials: int = 0

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance

    def to_dict(self) -> dict:
        return {"property": self.prop, "max_deviation": self.max_deviation,
                "tolerance": self.tolerance, "passed": self.passed, "seed": self.seed}


@dataclass
class PropertySuite:
    """Randomized checks of the engine against the Shapley axioms and oracles.

    `weights` replaces the engine's weight table (negative-control hook).
    """
    n: int = 10
    k: int = 32
    background_size: int = 10
    trials: int = 20
    seed: int = 0
    weights: Optional[Sequence[float]] = None
    _devs: dict = field(default_factory=dict, init=False, repr=False)

    TOLERANCES = {
        "efficiency": 1e-9,
        "oracle-equivalence": 1e-9,
        "dummy": 0.0,
        "linearity": 1e-10,
        "background-match": 0.0,
        "variant-agreement": 1e-10,
        "identity": 0.0,
    }

    def _record(self, prop: str, deviation: float):
        self._devs[prop] = max(self._devs.get(prop, 0.0), float(deviation))

    def _explain(self, spectrum, background, query, variant=VariantId.PRECOMPUTE):
        return FourierShapExplainer(spectrum, background, variant, self.weights).explain(query)

    def _trial(self, trial: int):
        rng = np.random.default_rng([self.seed, trial])
        n = self.n
        spectrum = random_spectrum(n, self.k, rng=rng)
        background = BackgroundDataset(rng.integers(0, 2, size=(self.background_size, n), dtype=np.uint8))
        query = rng.integers(0, 2, size=n, dtype=np.uint8)

        result = self._explain(spectrum, background, query)
        self._record("efficiency", abs(result.efficiency_residual))

        if n <= ORACLE_MAX_N:
            truth = exact_shap_bruteforce(spectrum_model(spectrum), query, background)
            self._record("oracle-equivalence", np.max(np.abs(result.attributions - truth)))

        dummy = int(rng.integers(n))
        keep = spectrum.bits()[:, dummy] == 0
        reduced = SparseSpectrum(n, spectrum.masks[keep], spectrum.coefs[keep])
        self._record("dummy", abs(self._explain(reduced, background, query).attributions[dummy]))

        other = random_spectrum(n, self.k, rng=rng)
        a, b = rng.uniform(-2, 2, size=2)
        combined = spectrum * a + other * b
        lhs = self._explain(combined, background, query).attributions
        rhs = a * result.attributions + b * self._explain(other, background, query).attributions
        self._record("linearity", np.max(np.abs(lhs - rhs)))

        matched = int(rng.integers(n))
        rows = background.points.copy()
        rows[:, matched] = query[matched]
        phi = self._explain(spectrum, BackgroundDataset(rows), query).attributions
        self._record("background-match", abs(phi[matched]))

        per_variant = [self._explain(spectrum, background, query, v).attributions for v in VariantId]
        spread = max(float(np.max(np.abs(p - q))) for p in per_variant for q in per_variant)
        self._record("variant-agreement", spread)

    def run(self) -> List[PropertyOutcome]:
        self._devs = {}
        if self.n > ORACLE_MAX_N:
            logger.warning("n=%d > %d: skipping brute-force oracle leg", self.n, ORACLE_MAX_N)
        for trial in range(self.trials):
            self._trial(trial)
        self._record("identity", len(double_counting_failures(min(self.n, ORACLE_MAX_N))))
        return [PropertyOutcome(prop, self._devs[prop], tol, self.seed, self.trials)
                for prop, tol in self.TOLERANCES.items() if prop in self._devs]


def convergence_report(h: Model, query, background: BackgroundDataset,
                       factors: Sequence[float] = DEFAULT_FACTORS,
                       seeds: Sequence[int] = tuple(range(20)),
                       truth: Optional[np.ndarray] = None,
                       paired_sampling: bool = True, workers: int = 1) -> List[dict]:
    """Mean wall time and R^2 vs exact values of kernel_shap per sample factor"""
    if truth is None:
        truth = exact_shap_bruteforce(h, query, background)
    rows = []
    for factor in factors:
        def one(seed):
            config = KernelShapConfig(sample_factor=factor, rng_seed=seed, paired_sampling=paired_sampling)
            start = time.perf_counter()
            phi, _ = kernel_shap(h, query, background, config)
            return time.perf_counter() - start, r2_vector(phi, truth)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                runs = list(pool.map(one, seeds))
        else:
            runs = [one(s) for s in seeds]
        times, scores = zip(*runs)
        rows.append({"sample_factor": factor, "wall_time_s": float(np.mean(times)),
                     "r2_vs_exact": float(np.mean(scores))})
        logger.debug("convergence factor=%g r2=%.6f", factor, rows[-1]["r2_vs_exact"])
    return rows
