"""
Sparse Walsh-Hadamard spectra of pseudo-boolean functions on {0,1}^n

Canonical storage is the unnormalized +-1 basis:
    h(x) = sum_f c_f * (-1)^<f, x>
The orthonormal coefficient of f is c_f * sqrt(2^n).
"""
import json
import logging
import math
from dataclasses import dataclass
from functools import total_ordering
from pathlib import Path
from typing import Dict, Iterable, Iterator, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from errors import DimensionMismatchError, ResourceGuardError, SchemaError

logger = logging.getLogger(__name__)

CONVENTION = "pm1_unnormalized"
ZERO_TOL = 1e-15
DEFAULT_MAX_DENSE_N = 24
CHUNK_SIZE = 1024
FREQ_CHUNK = 4096
PRESET_PRUNE = (0.9995, 0.005)
WORD_BITS = 64

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)
_HAS_BITWISE_COUNT = hasattr(np, "bitwise_count")


# ---------------------------------------------------------------------------
# packed-word primitives
# ---------------------------------------------------------------------------

def n_words(n: int) -> int:
    """Number of 64-bit words holding n bits"""
    return max(1, (n + WORD_BITS - 1) // WORD_BITS)


def pack_bits(bits) -> np.ndarray:
    """Pack 0/1 vectors along the last axis into little-endian uint64 words.

    Bit j of the vector lands in word j // 64 at position j % 64.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    n = bits.shape[-1]
    words = n_words(n)
    padded = np.zeros(bits.shape[:-1] + (words * WORD_BITS,), dtype=np.uint8)
    padded[..., :n] = bits
    packed = np.packbits(padded, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64)


def unpack_bits(words, n: int) -> np.ndarray:
    """Inverse of pack_bits"""
    words = np.ascontiguousarray(words, dtype="<u8")
    return np.unpackbits(words.view(np.uint8), axis=-1, count=n, bitorder="little")


def _swar_popcount(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.uint64, copy=True)
    arr -= (arr >> np.uint64(1)) & _M1
    arr = (arr & _M2) + ((arr >> np.uint64(2)) & _M2)
    arr = (arr + (arr >> np.uint64(4))) & _M4
    arr *= _H01
    arr >>= np.uint64(56)
    return arr.astype(np.uint8)


def popcount(words) -> np.ndarray:
    """Elementwise popcount of uint64 words (uint8 result)"""
    words = np.asarray(words, dtype=np.uint64)
    if _HAS_BITWISE_COUNT:
        return np.bitwise_count(words).astype(np.uint8, copy=False)
    return _swar_popcount(words)


def parity_matrix(masks: np.ndarray, points: np.ndarray) -> np.ndarray:
    """<f, x> mod 2 for every (mask row, point row) pair, shape (k, m)"""
    k, m = masks.shape[0], points.shape[0]
    acc = np.zeros((k, m), dtype=np.uint8)
    for w in range(masks.shape[1]):
        acc ^= popcount(masks[:, w, None] & points[None, :, w]) & np.uint8(1)
    return acc


def truth_table_points(n: int, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
    """Points of {0,1}^n in natural order; feature 0 is the most significant bit"""
    stop = (1 << n) if stop is None else stop
    idx = np.arange(start, stop, dtype=np.uint64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.uint64)
    return ((idx[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointVector:
    bits: Tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError("point entries must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_array(cls, values) -> "PointVector":
        return cls(tuple(np.asarray(values).ravel().tolist()))

    @property
    def n(self) -> int:
        return len(self.bits)

    def to_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.uint8)


def as_point_array(x, n: int, artifact: str = "point") -> np.ndarray:
    """Validate a single point against dimension n and return it as uint8"""
    arr = x.to_array() if isinstance(x, PointVector) else np.asarray(x)
    arr = arr.ravel()
    if arr.size != n:
        raise DimensionMismatchError(f"expected {n} features, got {arr.size}", artifact)
    if not np.isin(arr, (0, 1)).all():
        raise SchemaError(f"{artifact} entries must be 0 or 1")
    return arr.astype(np.uint8)


def as_point_matrix(points, n: int, artifact: str = "points") -> np.ndarray:
    """Validate a batch of points; accepts PointVectors or a 2-D array"""
    if isinstance(points, PointVector):
        points = [points]
    if isinstance(points, (list, tuple)):
        if len(points) == 0:
            return np.zeros((0, n), dtype=np.uint8)
        points = np.stack([p.to_array() if isinstance(p, PointVector) else np.asarray(p)
                           for p in points])
    arr = np.asarray(points)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != n:
        raise DimensionMismatchError(f"expected rows of {n} features, got shape {arr.shape}",
                                     artifact)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise SchemaError(f"{artifact} entries must be 0 or 1")
    return arr.astype(np.uint8)


@total_ordering
@dataclass(frozen=True)
class Frequency:
    """A Walsh-Hadamard basis index, stored as its ascending set-bit indices"""
    n: int
    indices: Tuple[int, ...]

    def __post_init__(self):
        indices = tuple(sorted(int(i) for i in self.indices))
        if len(set(indices)) != len(indices):
            raise ValueError("duplicate frequency index")
        if indices and (indices[0] < 0 or indices[-1] >= self.n):
            raise DimensionMismatchError(f"index out of range for n={self.n}", "frequency")
        object.__setattr__(self, "indices", indices)

    @classmethod
    def from_mask(cls, bits) -> "Frequency":
        bits = np.asarray(bits).ravel()
        return cls(int(bits.size), tuple(np.flatnonzero(bits).tolist()))

    @classmethod
    def zero(cls, n: int) -> "Frequency":
        return cls(n, ())

    @property
    def degree(self) -> int:
        return len(self.indices)

    def mask(self) -> np.ndarray:
        bits = np.zeros(self.n, dtype=np.uint8)
        bits[list(self.indices)] = 1
        return bits

    def packed(self) -> np.ndarray:
        return pack_bits(self.mask())

    def sort_key(self):
        return (self.degree, tuple(self.mask().tolist()))

    def __lt__(self, other: "Frequency") -> bool:
        return self.sort_key() < other.sort_key()


def canonical_order(masks: np.ndarray, n: int) -> np.ndarray:
    """Permutation sorting mask rows by (degree, bit tuple b0..b_{n-1})"""
    if masks.shape[0] == 0:
        return np.zeros(0, dtype=np.intp)
    degrees = popcount(masks).astype(np.int64).sum(axis=1)
    bits = unpack_bits(masks, n)
    keys = [bits[:, j] for j in range(n - 1, -1, -1)]
    keys.append(degrees)
    return np.lexsort(keys)


@dataclass(frozen=True)
class EnergyReport:
    total_energy: float
    kept_energy: float
    dropped_count: int

    @property
    def kept_fraction(self) -> float:
        if self.total_energy == 0.0:
            return 1.0
        return self.kept_energy / self.total_energy

    def to_dict(self) -> dict:
        return {"total_energy": self.total_energy,
                "kept_energy": self.kept_energy,
                "kept_fraction": self.kept_fraction,
                "dropped_count": self.dropped_count}


TermKey = Union[Frequency, Sequence[int]]


class SparseSpectrum:
    """Immutable k-sparse spectrum; terms kept in canonical frequency order.

    `source_energy` records the energy of the unpruned spectrum this one
    was pruned from (None for spectra that were never pruned).
    """
    convention = CONVENTION
    __slots__ = ("n", "masks", "coefs", "source_energy", "_bits")

    def __init__(self, n: int, masks, coefs, source_energy: Optional[float] = None,
                 _canonical: bool = False):
        if n < 1:
            raise ValueError("spectrum dimension must be at least 1")
        words = n_words(n)
        masks = np.asarray(masks, dtype=np.uint64).reshape(-1, words)
        coefs = np.asarray(coefs, dtype=np.float64).ravel()
        if masks.shape[0] != coefs.size:
            raise ValueError("masks and coefficients differ in length")
        if not _canonical:
            keep = coefs != 0.0
            masks, coefs = masks[keep], coefs[keep]
            _check_mask_range(masks, n)
            order = canonical_order(masks, n)
            masks, coefs = masks[order], coefs[order]
            if masks.shape[0] > 1 and np.all(masks[1:] == masks[:-1], axis=1).any():
                raise ValueError("duplicate frequency in spectrum")
        masks = np.ascontiguousarray(masks)
        coefs = np.ascontiguousarray(coefs)
        masks.setflags(write=False)
        coefs.setflags(write=False)
        self.n = n
        self.masks = masks
        self.coefs = coefs
        self.source_energy = source_energy
        self._bits = None

    # -- construction ------------------------------------------------------

    @classmethod
    def empty(cls, n: int) -> "SparseSpectrum":
        return cls(n, np.zeros((0, n_words(n)), dtype=np.uint64), np.zeros(0))

    @classmethod
    def accumulate(cls, n: int, masks, coefs, tol: float = 0.0) -> "SparseSpectrum":
        """Sum coefficients of repeated masks, then drop |c| < tol (and exact zeros)"""
        masks = np.asarray(masks, dtype=np.uint64).reshape(-1, n_words(n))
        coefs = np.asarray(coefs, dtype=np.float64).ravel()
        if masks.shape[0] == 0:
            return cls.empty(n)
        uniq, inverse = np.unique(masks, axis=0, return_inverse=True)
        summed = np.bincount(inverse.ravel(), weights=coefs, minlength=uniq.shape[0])
        keep = np.abs(summed) >= tol if tol > 0 else summed != 0.0
        return cls(n, uniq[keep], summed[keep])

    @classmethod
    def from_terms(cls, n: int, terms: Union[Mapping[TermKey, float], Iterable[Tuple[TermKey, float]]],
                   tol: float = 0.0) -> "SparseSpectrum":
        """Build from {Frequency or index list: coefficient}; repeats are summed"""
        items = terms.items() if isinstance(terms, Mapping) else terms
        masks, coefs = [], []
        for key, coef in items:
            freq = key if isinstance(key, Frequency) else Frequency(n, tuple(key))
            if freq.n != n:
                raise DimensionMismatchError(f"frequency of length {freq.n} in n={n} spectrum",
                                             "spectrum")
            masks.append(freq.packed())
            coefs.append(float(coef))
        if not masks:
            return cls.empty(n)
        return cls.accumulate(n, np.stack(masks), coefs, tol)

    @classmethod
    def from_int_terms(cls, n: int, terms: Mapping[int, float], tol: float = 0.0) -> "SparseSpectrum":
        """Build from {python-int bitmask: coefficient} (bit j = feature j)"""
        keys = [m for m, c in terms.items() if (abs(c) >= tol if tol > 0 else c != 0.0)]
        words = n_words(n)
        masks = np.zeros((len(keys), words), dtype=np.uint64)
        for w in range(words):
            shift = w * WORD_BITS
            masks[:, w] = np.array([(m >> shift) & 0xFFFFFFFFFFFFFFFF for m in keys],
                                   dtype=np.uint64)
        return cls(n, masks, [terms[m] for m in keys])

    # -- inspection --------------------------------------------------------

    @property
    def support_size(self) -> int:
        return int(self.coefs.size)

    def __len__(self) -> int:
        return self.support_size

    def bits(self) -> np.ndarray:
        """Dense (k, n) 0/1 matrix of the support, cached"""
        if self._bits is None:
            bits = unpack_bits(self.masks, self.n)
            bits.setflags(write=False)
            self._bits = bits
        return self._bits

    def degrees(self) -> np.ndarray:
        return popcount(self.masks).astype(np.int64).sum(axis=1)

    @property
    def degree(self) -> int:
        return int(self.degrees().max()) if self.support_size else 0

    def energy(self) -> float:
        return float(np.dot(self.coefs, self.coefs))

    def frequencies(self) -> Iterator[Frequency]:
        for row in self.bits():
            yield Frequency(self.n, tuple(np.flatnonzero(row).tolist()))

    def __iter__(self) -> Iterator[Tuple[Frequency, float]]:
        return iter(zip(self.frequencies(), self.coefs.tolist()))

    def terms(self) -> Dict[Frequency, float]:
        return dict(iter(self))

    def coef_of(self, freq: TermKey) -> float:
        freq = freq if isinstance(freq, Frequency) else Frequency(self.n, tuple(freq))
        hit = np.flatnonzero(np.all(self.masks == freq.packed()[None, :], axis=1))
        return float(self.coefs[hit[0]]) if hit.size else 0.0

    def __repr__(self) -> str:
        return f"SparseSpectrum(n={self.n}, k={self.support_size}, degree={self.degree})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseSpectrum):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.masks, other.masks)
                and np.array_equal(self.coefs, other.coefs))

    __hash__ = None

    # -- arithmetic --------------------------------------------------------

    def _check_same_n(self, other: "SparseSpectrum"):
        if self.n != other.n:
            raise DimensionMismatchError(f"cannot combine n={self.n} with n={other.n}", "spectrum")

    def __add__(self, other: "SparseSpectrum") -> "SparseSpectrum":
        self._check_same_n(other)
        return SparseSpectrum.accumulate(self.n, np.concatenate([self.masks, other.masks]),
                                         np.concatenate([self.coefs, other.coefs]), ZERO_TOL)

    def __neg__(self) -> "SparseSpectrum":
        return SparseSpectrum(self.n, self.masks, -self.coefs, _canonical=True)

    def __sub__(self, other: "SparseSpectrum") -> "SparseSpectrum":
        return self + (-other)

    def __mul__(self, scalar: float) -> "SparseSpectrum":
        scaled = self.coefs * float(scalar)
        keep = scaled != 0.0
        return SparseSpectrum(self.n, self.masks[keep], scaled[keep], _canonical=True)

    __rmul__ = __mul__

    def max_abs_diff(self, other: "SparseSpectrum") -> float:
        """Largest termwise coefficient difference over the union of supports"""
        self._check_same_n(other)
        diff = SparseSpectrum.accumulate(self.n, np.concatenate([self.masks, other.masks]),
                                         np.concatenate([self.coefs, -other.coefs]))
        return float(np.abs(diff.coefs).max()) if diff.support_size else 0.0

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        payload = {
            "n": self.n,
            "convention": CONVENTION,
            "terms": [{"freq": np.flatnonzero(row).tolist(), "coef": float(c)}
                      for row, c in zip(self.bits(), self.coefs)],
        }
        if self.source_energy is not None:
            payload["source_energy"] = float(self.source_energy)
        return payload

    @classmethod
    def from_dict(cls, payload) -> "SparseSpectrum":
        if not isinstance(payload, dict):
            raise SchemaError("spectrum must be a JSON object", "/")
        n = payload.get("n")
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise SchemaError("'n' must be a positive integer", "/n")
        if payload.get("convention") != CONVENTION:
            raise SchemaError(f"'convention' must be {CONVENTION!r}", "/convention")
        terms = payload.get("terms")
        if not isinstance(terms, list):
            raise SchemaError("'terms' must be a list", "/terms")
        words = n_words(n)
        masks = np.zeros((len(terms), words), dtype=np.uint64)
        coefs = np.zeros(len(terms))
        for t, term in enumerate(terms):
            if not isinstance(term, dict):
                raise SchemaError("term must be an object", f"/terms/{t}")
            freq = term.get("freq")
            if not isinstance(freq, list):
                raise SchemaError("'freq' must be a list of indices", f"/terms/{t}/freq")
            bits = np.zeros(n, dtype=np.uint8)
            for j, idx in enumerate(freq):
                if not isinstance(idx, int) or isinstance(idx, bool) or not 0 <= idx < n:
                    raise SchemaError(f"index must be an integer in [0, {n})",
                                      f"/terms/{t}/freq/{j}")
                bits[idx] = 1
            coef = term.get("coef")
            if not isinstance(coef, (int, float)) or isinstance(coef, bool) or not math.isfinite(coef):
                raise SchemaError("'coef' must be a finite number", f"/terms/{t}/coef")
            masks[t] = pack_bits(bits)
            coefs[t] = float(coef)
        source_energy = payload.get("source_energy")
        try:
            spectrum = cls(n, masks, coefs)
        except ValueError as exc:
            raise SchemaError(str(exc), "/terms") from exc
        spectrum.source_energy = None if source_energy is None else float(source_energy)
        return spectrum


def _check_mask_range(masks: np.ndarray, n: int):
    tail = n % WORD_BITS
    if masks.shape[0] and tail:
        high = ~np.uint64((1 << tail) - 1)
        if (masks[:, -1] & high).any():
            raise DimensionMismatchError(f"frequency bit beyond n={n}", "spectrum")


def save_spectrum(spectrum: SparseSpectrum, path: Union[str, Path]):
    Path(path).write_text(json.dumps(spectrum.to_dict(), indent=2) + "\n")


def load_spectrum(path: Union[str, Path]) -> SparseSpectrum:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc.msg})", line=exc.lineno) from exc
    return SparseSpectrum.from_dict(payload)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def evaluate_many(spectrum: SparseSpectrum, points) -> np.ndarray:
    """Evaluate the spectrum at each row of `points`"""
    pts = as_point_matrix(points, spectrum.n)
    packed = pack_bits(pts)
    out = np.zeros(pts.shape[0])
    k = spectrum.support_size
    for start in range(0, pts.shape[0], CHUNK_SIZE):
        block = packed[start:start + CHUNK_SIZE]
        acc = np.zeros(block.shape[0])
        for fstart in range(0, k, FREQ_CHUNK):
            signs = 1.0 - 2.0 * parity_matrix(spectrum.masks[fstart:fstart + FREQ_CHUNK], block)
            acc += spectrum.coefs[fstart:fstart + FREQ_CHUNK] @ signs
        out[start:start + CHUNK_SIZE] = acc
    return out


def evaluate(spectrum: SparseSpectrum, x) -> float:
    pt = as_point_array(x, spectrum.n, "point")
    return float(evaluate_many(spectrum, pt[None, :])[0])


def fwht(values) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform (butterfly per feature axis)"""
    h = np.array(values, dtype=np.float64).ravel()
    n = h.size.bit_length() - 1
    for j in range(n):
        h = h.reshape(1 << j, 2, -1)
        h = np.concatenate((h[:, :1] + h[:, 1:], h[:, :1] - h[:, 1:]), axis=1)
    return h.reshape(-1)


def _index_to_masks(idx: np.ndarray, n: int) -> np.ndarray:
    # truth-table index has feature 0 as its MSB; mask words have feature 0 as bit 0
    idx = idx.astype(np.uint64)
    words = np.zeros((idx.size, 1), dtype=np.uint64)
    for j in range(n):
        words[:, 0] |= ((idx >> np.uint64(n - 1 - j)) & np.uint64(1)) << np.uint64(j)
    return words


def _masks_to_index(masks: np.ndarray, n: int) -> np.ndarray:
    word = masks[:, 0].astype(np.uint64)
    idx = np.zeros(word.size, dtype=np.uint64)
    for j in range(n):
        idx |= ((word >> np.uint64(j)) & np.uint64(1)) << np.uint64(n - 1 - j)
    return idx.astype(np.int64)


def dense_wht(values, max_n: int = DEFAULT_MAX_DENSE_N) -> SparseSpectrum:
    """Exact spectrum of a full truth table given in natural binary order"""
    values = np.asarray(values, dtype=np.float64).ravel()
    size = values.size
    if size < 2 or size & (size - 1):
        raise ValueError(f"truth table length {size} is not a power of two >= 2")
    n = size.bit_length() - 1
    if n > max_n:
        raise ResourceGuardError(f"dense transform over n={n} exceeds cap {max_n}")
    coefs = fwht(values) / size
    idx = np.flatnonzero(np.abs(coefs) >= ZERO_TOL)
    logger.debug("dense_wht n=%d kept %d of %d coefficients", n, idx.size, size)
    return SparseSpectrum(n, _index_to_masks(idx, n), coefs[idx])


def to_truth_table(spectrum: SparseSpectrum, max_n: int = DEFAULT_MAX_DENSE_N) -> np.ndarray:
    """All 2^n values of the spectrum's function, natural binary order"""
    if spectrum.n > max_n:
        raise ResourceGuardError(f"truth table over n={spectrum.n} exceeds cap {max_n}")
    dense = np.zeros(1 << spectrum.n)
    dense[_masks_to_index(spectrum.masks, spectrum.n)] = spectrum.coefs
    return fwht(dense)


def prune(spectrum: SparseSpectrum, energy_fraction: float,
          min_amplitude: float = 0.0) -> Tuple[SparseSpectrum, EnergyReport]:
    """Keep the largest-|c| terms covering `energy_fraction` of the energy.

    The fraction is measured against `spectrum.source_energy` when set, so
    re-pruning a pruned spectrum with the same parameters is a no-op.
    Terms with |c| >= min_amplitude are never dropped. min_amplitude=0
    disables the guard instead of protecting every term; it is the default
    here and of the `--min-amp` CLI flag, so the energy target alone decides.
    """
    if not 0.0 < energy_fraction <= 1.0:
        raise ValueError("energy_fraction must be in (0, 1]")
    if min_amplitude < 0.0:
        raise ValueError("min_amplitude must be >= 0")
    total = spectrum.source_energy if spectrum.source_energy is not None else spectrum.energy()
    k = spectrum.support_size
    if k == 0:
        return spectrum, EnergyReport(total, 0.0, 0)
    mag = np.abs(spectrum.coefs)
    order = np.argsort(-mag, kind="stable")
    cum = np.cumsum(spectrum.coefs[order] ** 2)
    count = min(int(np.searchsorted(cum, energy_fraction * total, side="left")) + 1, k)
    keep = np.zeros(k, dtype=bool)
    keep[order[:count]] = True
    if min_amplitude > 0.0:
        keep |= mag >= min_amplitude
    kept = SparseSpectrum(spectrum.n, spectrum.masks[keep], spectrum.coefs[keep],
                          source_energy=total, _canonical=True)
    report = EnergyReport(total_energy=total, kept_energy=min(kept.energy(), total),
                          dropped_count=int(k - keep.sum()))
    logger.debug("prune kept %d/%d terms (%.6f of energy)", kept.support_size, k,
                 report.kept_fraction)
    return kept, report


def amplitude_prune(spectrum: SparseSpectrum, threshold: float) -> Tuple[SparseSpectrum, EnergyReport]:
    """Drop every term with |c| < threshold"""
    if threshold < 0.0:
        raise ValueError("threshold must be >= 0")
    total = spectrum.source_energy if spectrum.source_energy is not None else spectrum.energy()
    keep = np.abs(spectrum.coefs) >= threshold
    kept = SparseSpectrum(spectrum.n, spectrum.masks[keep], spectrum.coefs[keep],
                          source_energy=total, _canonical=True)
    report = EnergyReport(total_energy=total, kept_energy=min(kept.energy(), total),
                          dropped_count=int(spectrum.support_size - kept.support_size))
    return kept, report


def degree_support_count(n: int, d: int) -> int:
    """Number of frequencies of degree at most d over n variables"""
    if not 0 <= d <= n:
        raise ValueError("need 0 <= d <= n")
    return sum(math.comb(n, i) for i in range(d + 1))


def to_orthonormal(spectrum: SparseSpectrum) -> np.ndarray:
    """Coefficients in the orthonormal 2^(-n/2) basis, canonical term order"""
    return spectrum.coefs * math.sqrt(2.0 ** spectrum.n)


def from_orthonormal(n: int, masks, values) -> SparseSpectrum:
    return SparseSpectrum(n, masks, np.asarray(values, dtype=np.float64) / math.sqrt(2.0 ** n))


def random_spectrum(n: int, k: int, max_degree: Optional[int] = None,
                    rng=None, low: float = -1.0, high: float = 1.0) -> SparseSpectrum:
    """k distinct random frequencies of degree <= max_degree, coefficients U[low, high]"""
    rng = np.random.default_rng(rng)
    d = n if max_degree is None else max_degree
    if k > degree_support_count(n, d):
        raise ValueError(f"only {degree_support_count(n, d)} frequencies of degree <= {d}")
    chosen = {}
    while len(chosen) < k:
        deg = int(rng.integers(0, d + 1))
        idx = tuple(sorted(rng.choice(n, size=deg, replace=False).tolist()))
        chosen.setdefault(idx, None)
    coefs = rng.uniform(low, high, size=k)
    return SparseSpectrum.from_terms(n, zip(chosen.keys(), coefs))
