"""Conditional expectation onto a partition sub-algebra.

On an atomic sub-algebra E(f) is the blockwise mass-weighted average:

    E(f) = sum_i (1/mu(A_i) * integral_{A_i} f dmu) * chi_{A_i}

Non-atomic panels never enter the numerics; only their support flags are
used (see criteria.nonatomic_condition).
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .measure import AtomicSpace, Block, SubAlgebra, Weight

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BlockAverage:
    block_index: int
    mass: float
    value: float
    residual: float  # |integral of E(f) - integral of f| over the block


def block_average(values: np.ndarray, masses: np.ndarray) -> float:
    """Mass-weighted mean; exact when the values are constant."""
    if values.min() == values.max():
        return float(values[0])
    return math.fsum(values * masses) / math.fsum(masses)


def _block_values(f_values: np.ndarray, alg: SubAlgebra, space: AtomicSpace) -> list[tuple[Block, list[int], float]]:
    out = []
    for block in alg.blocks:
        positions = space.positions(block.cell_ids)
        values = f_values[positions]
        out.append((block, positions, block_average(values, space.masses[positions])))
    return out


def cond_exp_values(f_values: np.ndarray, alg: SubAlgebra, space: AtomicSpace) -> np.ndarray:
    """E applied to values given in cell order."""
    result = np.empty(len(space), dtype=float)
    for _, positions, avg in _block_values(np.asarray(f_values, dtype=float), alg, space):
        result[positions] = avg
    return result


def cond_exp(f: Weight, alg: SubAlgebra, space: AtomicSpace) -> Weight:
    return Weight.from_values(space, cond_exp_values(f.evaluate(space), alg, space))


def support_cover(f: Weight, alg: SubAlgebra, space: AtomicSpace) -> set[int]:
    """Indices of the blocks on which ``f`` is not identically zero."""
    values = f.evaluate(space)
    cover = set()
    for block in alg.blocks:
        if np.any(values[space.positions(block.cell_ids)] != 0):
            cover.add(block.index)
    return cover


def averaging_residuals(f: Weight, alg: SubAlgebra, space: AtomicSpace) -> list[BlockAverage]:
    """Per-block value of E(f) and the defect of the averaging identity."""
    values = f.evaluate(space)
    rows = []
    for block, positions, avg in _block_values(values, alg, space):
        masses = space.masses[positions]
        lhs = math.fsum(np.full(len(positions), avg) * masses)
        rhs = math.fsum(values[positions] * masses)
        rows.append(BlockAverage(block.index, block.mass, avg, abs(lhs - rhs)))
    logger.debug("conditional expectation over %d blocks", len(rows))
    return rows
