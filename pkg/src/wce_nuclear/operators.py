"""The weighted conditional expectation operator T f = w * E(u f).

On a partition sub-algebra T splits into rank-one pieces, one per block:

    T = sum_i phi_i (x) g_i,  phi_i(f) = integral (u chi_{A_i}) f dmu,
                              g_i = w chi_{A_i} / mu(A_i)

Everything the criteria need is a per-block summary (AtomStats); the
series term of a block equals the operator norm of its rank-one piece.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .condexp import cond_exp_values
from .errors import InvalidExponentError
from .measure import AtomicSpace, SubAlgebra, Weight

logger = logging.getLogger(__name__)


class Regime(str, Enum):
    SMALLER = "q<p"
    LARGER = "p<q"
    EQUAL = "p=q"


def conjugate(p: float) -> float:
    if p == 1:
        return math.inf
    return p / (p - 1)


@dataclass(frozen=True)
class Exponents:
    p: float
    q: float
    p_conj: float
    q_conj: float
    r: float
    regime: Regime

    @classmethod
    def of(cls, p: float, q: float) -> "Exponents":
        p, q = float(p), float(q)
        for name, value in (("p", p), ("q", q)):
            if not (value >= 1) or math.isinf(value):
                raise InvalidExponentError(f"{name} must be finite and >= 1, got {value}")
        gap = abs(1 / p - 1 / q)
        if q < p:
            regime = Regime.SMALLER
        elif p < q:
            regime = Regime.LARGER
        else:
            regime = Regime.EQUAL
        return cls(
            p=p,
            q=q,
            p_conj=conjugate(p),
            q_conj=conjugate(q),
            r=math.inf if gap == 0 else 1 / gap,
            regime=regime,
        )

    @property
    def inv_p_conj(self) -> float:
        """1/p' with 1/inf = 0."""
        return 1 - 1 / self.p

    @property
    def inv_q_conj(self) -> float:
        return 1 - 1 / self.q

    @property
    def mass_exponent(self) -> float:
        """+1/r when q < p, -1/r when p < q, 0 when p = q."""
        return 1 / self.q - 1 / self.p


@dataclass(frozen=True)
class AtomStats:
    block_index: int
    mass: float
    eu: float  # E(|u|^p')(A_i); sup |u| on A_i when p = 1
    ew: float  # E(|w|^q)(A_i)
    d: float
    term: float
    eu_p: float | None = None  # E(|u|^p)(A_i), used by the q<p compactness series
    eu_qc: float | None = None  # E(|u|^q')(A_i), used by the p=1 compactness limits


@dataclass(frozen=True)
class RankOneFactor:
    block_index: int
    phi_norm: float
    g_norm: float
    product: float
    phi_norm_printed: float  # E(|u|^p')(A_i)^(1/p'), without the mass factor


@dataclass(frozen=True)
class CellAtom:
    cell_id: int
    block_index: int
    mass: float


def _root(moment: float, inv_exponent: float) -> float:
    return moment ** inv_exponent if inv_exponent else moment


def stats_from_moments(
    block_index: int,
    mass: float,
    eu: float,
    ew: float,
    exps: Exponents,
    eu_p: float | None = None,
    eu_qc: float | None = None,
) -> AtomStats:
    # eu already is the sup norm when p = 1, so it enters unrooted
    d = _root(eu, exps.inv_p_conj) * ew ** (1 / exps.q)
    return AtomStats(
        block_index=block_index,
        mass=mass,
        eu=eu,
        ew=ew,
        d=d,
        term=d * mass ** exps.mass_exponent,
        eu_p=eu_p,
        eu_qc=eu_qc,
    )


def _moment(values: np.ndarray, masses: np.ndarray, block_mass: float, exponent: float) -> float:
    magnitudes = np.abs(values)
    if math.isinf(exponent):
        return float(magnitudes.max())
    return math.fsum(magnitudes ** exponent * masses) / block_mass


def apply(u: Weight, w: Weight, alg: SubAlgebra, f: Weight, space: AtomicSpace) -> Weight:
    """T f = w * E(u f)."""
    uf = u.evaluate(space) * f.evaluate(space)
    return Weight.from_values(space, w.evaluate(space) * cond_exp_values(uf, alg, space))


def atom_stats(u: Weight, w: Weight, alg: SubAlgebra, exps: Exponents, space: AtomicSpace) -> list[AtomStats]:
    u_values = u.evaluate(space)
    w_values = w.evaluate(space)
    stats = []
    for block in alg.blocks:
        positions = space.positions(block.cell_ids)
        masses = space.masses[positions]
        bu, bw = u_values[positions], w_values[positions]
        stats.append(stats_from_moments(
            block.index,
            block.mass,
            eu=_moment(bu, masses, block.mass, exps.p_conj),
            ew=_moment(bw, masses, block.mass, exps.q),
            exps=exps,
            eu_p=_moment(bu, masses, block.mass, exps.p),
            eu_qc=_moment(bu, masses, block.mass, exps.q_conj),
        ))
    logger.debug("computed stats for %d blocks (%s)", len(stats), exps.regime.value)
    return stats


def factor_norms(u: Weight, w: Weight, alg: SubAlgebra, exps: Exponents, space: AtomicSpace) -> list[RankOneFactor]:
    """Closed-form norms of phi_i in L^p' and g_i in L^q.

    ||phi_i|| carries the factor mu(A_i)^(1/p'); without it the product
    would not reproduce the series term.
    """
    factors = []
    for s in atom_stats(u, w, alg, exps, space):
        printed = _root(s.eu, exps.inv_p_conj)
        phi_norm = printed * s.mass ** exps.inv_p_conj
        g_norm = s.ew ** (1 / exps.q) * s.mass ** (1 / exps.q - 1)
        factors.append(RankOneFactor(s.block_index, phi_norm, g_norm, phi_norm * g_norm, printed))
    return factors


def nuclear_bound(u: Weight, w: Weight, alg: SubAlgebra, exps: Exponents, space: AtomicSpace) -> float:
    """Sum of ||phi_i|| ||g_i||, an upper bound for the nuclear norm."""
    return math.fsum(f.product for f in factor_norms(u, w, alg, exps, space))


def cell_atoms(alg: SubAlgebra, space: AtomicSpace) -> list[CellAtom]:
    return [CellAtom(cell.id, alg.block_of(cell.id).index, cell.mass) for cell in space.cells]
