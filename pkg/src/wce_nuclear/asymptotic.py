"""Countable atom families with closed-form per-atom moments.

A family maps an array of atom indices to the atom masses and the moments
E(|u|^p')(A_i), E(|w|^q)(A_i) (plus the extra moments the compactness
criteria read). Families that know a rigorous bound for the tail of their
series can back a certified verdict; decay fitting is evidence only.

Built in: the counting measure on the positive integers partitioned into
odd singletons {2k-1} and even blocks A_n = {2k_n, 2(k_n+1), ..., 2(k_n+n-1)}
with k_n = n(n-1)/2 + 1, weights u(n) = n and w(n) = n^-3.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .errors import GeneratorError, InsufficientDataError, RegimeUnsupportedError
from .operators import AtomStats, Exponents, Regime, stats_from_moments
from .summation import running_sums

logger = logging.getLogger(__name__)

# Blocks up to this size are averaged term by term
DIRECT_SUM_MAX = 256

# B_2, B_4, B_6, B_8
_BERNOULLI = (1 / 6, -1 / 30, 1 / 42, -1 / 30)


@dataclass(frozen=True)
class AtomMoments:
    mass: np.ndarray
    eu: np.ndarray
    ew: np.ndarray
    eu_p: np.ndarray | None = None
    eu_qc: np.ndarray | None = None


Generator = Callable[[np.ndarray, Exponents], AtomMoments]
TailBound = Callable[[int, Exponents], float]
DecayPoints = Callable[[list[AtomStats]], list[tuple[int, float]]]


@dataclass(frozen=True)
class AtomFamily:
    name: str
    generator: Generator
    tail_bound: TailBound | None = None
    # (index, term) pairs of the sub-family whose decay is fitted
    decay_points: DecayPoints | None = None

    def moments(self, indices: np.ndarray, exps: Exponents) -> AtomMoments:
        moments = self.generator(np.asarray(indices, dtype=np.int64), exps)
        if np.any(~np.isfinite(moments.mass)) or np.any(moments.mass <= 0):
            raise GeneratorError(f"{self.name}: masses must be positive and finite")
        for name in ("eu", "ew", "eu_p", "eu_qc"):
            values = getattr(moments, name)
            if values is None:
                continue
            if np.any(~np.isfinite(values)) or np.any(values < 0):
                raise GeneratorError(f"{self.name}: {name} must be finite and nonnegative")
        return moments


# --- Power means -------------------------------------------------------------

def _falling(a: float, j: int) -> float:
    out = 1.0
    for i in range(j):
        out *= a - i
    return out


def _euler_maclaurin_sum(k: np.ndarray, n: np.ndarray, a: float) -> np.ndarray:
    """sum_{j=0}^{n-1} (1 + j/k)^a for large blocks."""
    length = (n - 1).astype(float)
    ratio = length / k
    log_end = np.log1p(ratio)
    if a == -1:
        integral = k * log_end
    else:
        integral = k / (a + 1) * np.expm1((a + 1) * log_end)
    end = np.exp(a * log_end)
    total = integral + (1.0 + end) / 2
    for m, bernoulli in enumerate(_BERNOULLI, start=1):
        order = 2 * m - 1
        coeff = bernoulli / math.factorial(2 * m) * _falling(a, order) / k ** order
        total = total + coeff * (np.exp((a - order) * log_end) - 1.0)
    return total


def power_mean(k: np.ndarray, n: np.ndarray, a: float) -> np.ndarray:
    """mean_{0<=j<n} (1 + j/k)^a, elementwise over blocks."""
    k = np.asarray(k, dtype=float)
    n = np.asarray(n, dtype=np.int64)
    out = np.ones(k.shape, dtype=float)
    small = (n > 1) & (n <= DIRECT_SUM_MAX)
    for pos in np.flatnonzero(small):
        j = np.arange(n[pos], dtype=float)
        out[pos] = math.fsum((1.0 + j / k[pos]) ** a) / n[pos]
    large = n > DIRECT_SUM_MAX
    if np.any(large):
        out[large] = _euler_maclaurin_sum(k[large], n[large], a) / n[large]
    return out


# --- The worked example --------------------------------------------------------

def even_block_start(n: np.ndarray) -> np.ndarray:
    """k_n = n(n-1)/2 + 1; the block A_n starts at the integer 2 k_n."""
    n = np.asarray(n, dtype=np.int64)
    return n * (n - 1) // 2 + 1


def _example_u_moment(first: np.ndarray, count: np.ndarray, exponent: float) -> np.ndarray:
    # u(m) = m on the cells first, first+2, ..., first+2(count-1)
    if math.isinf(exponent):
        return first + 2.0 * (count - 1)
    return first ** exponent * power_mean(first / 2.0, count, exponent)


def _example_w_moment(first: np.ndarray, count: np.ndarray, q: float) -> np.ndarray:
    return first ** (-3 * q) * power_mean(first / 2.0, count, -3 * q)


def _example_moments(first: np.ndarray, count: np.ndarray, exps: Exponents) -> AtomMoments:
    first = first.astype(float)
    # the extra moments only feed the compactness case that reads them
    needs_eu_p = 1 < exps.q < exps.p
    needs_eu_qc = exps.p == 1
    return AtomMoments(
        mass=count.astype(float),
        eu=_example_u_moment(first, count, exps.p_conj),
        ew=_example_w_moment(first, count, exps.q),
        eu_p=_example_u_moment(first, count, exps.p) if needs_eu_p else None,
        eu_qc=_example_u_moment(first, count, exps.q_conj) if needs_eu_qc else None,
    )


def _odd_generator(indices: np.ndarray, exps: Exponents) -> AtomMoments:
    return _example_moments(2 * indices - 1, np.ones_like(indices), exps)


def _even_generator(indices: np.ndarray, exps: Exponents) -> AtomMoments:
    return _example_moments(2 * even_block_start(indices), indices, exps)


def _merged_generator(indices: np.ndarray, exps: Exponents) -> AtomMoments:
    # index 2k-1 -> odd singleton k, index 2n -> even block n
    odd = indices % 2 == 1
    first = np.where(odd, indices, 2 * even_block_start(indices // 2))
    count = np.where(odd, 1, indices // 2)
    return _example_moments(first, count, exps)


def odd_tail_bound(k: int) -> float:
    """Integral test: sum_{j>k} (2j-1)^-2 <= 1/(2(2k-1))."""
    if k < 1:
        # first term 1 plus the integral test from k = 1
        return 1.5
    return 1 / (2 * (2 * k - 1))


def even_tail_bound(m: int, exps: Exponents) -> float:
    """Bound for the sum of the even-block terms with index n > m.

    term_n <= n^e / (2 k_n^2) with e = +-1/r, and k_n > (n - 1/2)^2 / 2, so
    term_n <= 2 c (n - 1/2)^(e - 4) where c = (4/3)^e covers n^e when e > 0
    and n >= 2. The right side decreases in n; the integral test finishes.
    """
    e = exps.mass_exponent
    if m < 1:
        # first term exactly bounded by 1/(2 k_1^2) = 1/2, then the tail from 1
        return 0.5 + even_tail_bound(1, exps)
    c = (4 / 3) ** e if e > 0 else 1.0
    return 2 * c * (m - 0.5) ** (e - 3) / (3 - e)


def example_tail_bound(n_terms: int, exps: Exponents) -> float:
    """Tail bound after ``n_terms`` terms of the interleaved example family."""
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    odd_seen = (n_terms + 1) // 2
    even_seen = n_terms // 2
    return odd_tail_bound(odd_seen) + even_tail_bound(even_seen, exps)


def odd_family() -> AtomFamily:
    return AtomFamily("example-odd", _odd_generator, lambda n, exps: odd_tail_bound(n))


def even_family() -> AtomFamily:
    return AtomFamily("example-even", _even_generator, even_tail_bound)


def _even_block_points(stats: list[AtomStats]) -> list[tuple[int, float]]:
    # the odd singletons decay like k^-2 and would drown the block decay
    return [(s.block_index // 2, s.term) for s in stats if s.block_index % 2 == 0]


def example_family() -> AtomFamily:
    return AtomFamily("example", _merged_generator, example_tail_bound, _even_block_points)


BUILTIN_FAMILIES = {
    "paper": example_family,
    "paper-odd": odd_family,
    "paper-even": even_family,
}


# --- Series evaluation --------------------------------------------------------

def family_stats(family: AtomFamily, exps: Exponents, n_terms: int) -> list[AtomStats]:
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    indices = np.arange(1, n_terms + 1, dtype=np.int64)
    m = family.moments(indices, exps)
    eu_p = m.eu_p if m.eu_p is not None else [None] * n_terms
    eu_qc = m.eu_qc if m.eu_qc is not None else [None] * n_terms
    stats = [
        stats_from_moments(int(i), float(mass), float(eu), float(ew), exps,
                           None if a is None else float(a), None if b is None else float(b))
        for i, mass, eu, ew, a, b in zip(indices, m.mass, m.eu, m.ew, eu_p, eu_qc)
    ]
    logger.info("%s: generated %d atoms", family.name, n_terms)
    return stats


def partial_sums(family: AtomFamily, exps: Exponents, n_terms: int) -> list[tuple[int, float, float]]:
    """(i, term_i, S_i) for i = 1..n_terms."""
    if exps.regime is Regime.EQUAL:
        raise RegimeUnsupportedError("partial sums need p != q")
    stats = family_stats(family, exps, n_terms)
    terms = [s.term for s in stats]
    return [(s.block_index, t, total) for s, t, total in zip(stats, terms, running_sums(terms))]


def decay_fit(terms: list[tuple[int, float]], window: tuple[int, int]) -> float:
    """Least-squares slope of log(term) against log(index) over ``window``."""
    lo, hi = window
    points = [(i, t) for i, t in terms if lo <= i <= hi and t > 0]
    if len(points) < 8:
        raise InsufficientDataError(f"need 8 positive terms in [{lo}, {hi}], got {len(points)}")
    x = np.log([i for i, _ in points])
    y = np.log([t for _, t in points])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def family_decay_slope(family: AtomFamily, stats: list[AtomStats]) -> float | None:
    """Decay slope over the last decade of the generated terms, or None when too few."""
    if family.decay_points is not None:
        points = family.decay_points(stats)
    else:
        points = [(s.block_index, s.term) for s in stats]
    if not points:
        return None
    hi = points[-1][0]
    try:
        slope = decay_fit(points, (max(1, hi // 10), hi))
    except InsufficientDataError as e:
        logger.info("%s: no decay slope (%s)", family.name, e)
        return None
    logger.info("%s: fitted decay slope %.4f", family.name, slope)
    return slope
