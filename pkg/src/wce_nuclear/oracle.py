"""Independent checks of the series criteria on finite atomic spaces.

Nothing here reads AtomStats to produce its own answer: block norms come
from direct L^p integration, the operator norm from a nonlinear power
iteration, the Hilbert-space trace norm from an SVD of the materialized
matrix. The criteria are then compared against these values.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .config import get_config
from .criteria import nonatomic_condition
from .errors import NonFiniteDataError, RegimeUnsupportedError, ZeroOperatorError
from .measure import AtomicSpace, Block, SubAlgebra, Weight, lp_norm_of_values
from .operators import Exponents, Regime, apply, atom_stats
from .summation import lr_norm

logger = logging.getLogger(__name__)

# Test functions may exceed the unit ball by rounding only
UNIT_BALL_SLACK = 1e-9
FIXED_POINT_TOL = 1e-12


@dataclass(frozen=True)
class NormBracket:
    formula_value: float  # exact, from the block norms
    ascent_value: float  # best ||Tf||_q / ||f||_p found

    @property
    def gap(self) -> float:
        return self.formula_value - self.ascent_value

    @property
    def relative_gap(self) -> float:
        if self.formula_value == 0:
            return 0.0
        return self.gap / self.formula_value


@dataclass(frozen=True)
class PietschTestFunction:
    block_index: int
    values: Weight
    p_norm: float


def _require_atomic(alg: SubAlgebra) -> None:
    if not nonatomic_condition(alg):
        raise RegimeUnsupportedError("the oracle needs the operator to live on the atoms only")


def _finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise NonFiniteDataError(f"{what} is not finite")
    return value


def block_norm(u: Weight, w: Weight, block: Block, exps: Exponents, space: AtomicSpace) -> float:
    """Norm of the rank-one piece of T on one block, as a map L^p(A) -> L^q(A).

    By Hoelder this is ||u chi_A||_p' * ||w chi_A||_q / mu(A).
    """
    positions = space.positions(block.cell_ids)
    masses = space.masses[positions]
    u_values = np.array([u(cid) for cid in block.cell_ids])
    w_values = np.array([w(cid) for cid in block.cell_ids])
    return lp_norm_of_values(u_values, masses, exps.p_conj) * lp_norm_of_values(w_values, masses, exps.q) / block.mass


def aggregate_norm(u: Weight, w: Weight, alg: SubAlgebra, exps: Exponents, space: AtomicSpace) -> float:
    """||T|| for a direct sum of rank-one blocks.

    sup of the block norms when p <= q, their l^r norm when q < p.
    """
    _require_atomic(alg)
    norms = [block_norm(u, w, block, exps, space) for block in alg.blocks]
    if exps.regime is Regime.SMALLER:
        value = lr_norm(norms, exps.r)
    else:
        value = max(norms)
    return _finite(value, "operator norm")


class _BlockOperator:
    """T and its adjoint on cell-order arrays."""

    def __init__(self, u: Weight, w: Weight, alg: SubAlgebra, space: AtomicSpace):
        self.u = u.evaluate(space)
        self.w = w.evaluate(space)
        self.masses = space.masses
        self.labels = alg.labels(space)
        self.block_mass = np.array([block.mass for block in alg.blocks])

    def _average(self, values: np.ndarray) -> np.ndarray:
        sums = np.bincount(self.labels, weights=values * self.masses, minlength=len(self.block_mass))
        return (sums / self.block_mass)[self.labels]

    def forward(self, f: np.ndarray) -> np.ndarray:
        return self.w * self._average(self.u * f)

    def adjoint(self, g: np.ndarray) -> np.ndarray:
        return self.u * self._average(self.w * g)

    def ratio(self, f: np.ndarray, exps: Exponents) -> float:
        denominator = lp_norm_of_values(f, self.masses, exps.p)
        if denominator == 0:
            return 0.0
        return lp_norm_of_values(self.forward(f), self.masses, exps.q) / denominator


def _duality_map(values: np.ndarray, exponent: float) -> np.ndarray:
    """sign(v) |v|^(exponent - 1), scaled by max |v| first."""
    peak = np.abs(values).max()
    if peak == 0:
        return np.zeros_like(values)
    scaled = values / peak
    return np.sign(scaled) * np.abs(scaled) ** (exponent - 1)


def _power_iteration(op: _BlockOperator, f: np.ndarray, exps: Exponents, max_iter: int) -> float:
    # f stays on the unit sphere of L^p, so ||T f||_q is the ratio itself
    best = 0.0
    for _ in range(max_iter + 1):
        g = op.forward(f)
        best = max(best, lp_norm_of_values(g, op.masses, exps.q))
        if not np.any(g):
            break
        nxt = _duality_map(op.adjoint(_duality_map(g, exps.q)), exps.p_conj)
        norm = lp_norm_of_values(nxt, op.masses, exps.p)
        if norm == 0:
            break
        nxt = nxt / norm
        if np.max(np.abs(nxt - f)) <= FIXED_POINT_TOL * np.max(np.abs(nxt)):
            break
        f = nxt
    return best


def norm_ascent(
    u: Weight,
    w: Weight,
    alg: SubAlgebra,
    exps: Exponents,
    space: AtomicSpace,
    restarts: int | None = None,
    seed: int | None = None,
    max_iter: int | None = None,
) -> float:
    """Lower bound for ||T||: best ratio ||Tf||_q / ||f||_p found.

    For p = 1 the unit ball's extreme points are the normalized cell
    indicators, so all of them are tried. Otherwise the duality iteration
    f <- J_p'(T* J_q(T f)) runs from ``restarts`` random starts plus one
    start localized on each block.
    """
    _require_atomic(alg)
    cfg = get_config()
    restarts = cfg.ascent_restarts if restarts is None else restarts
    seed = cfg.ascent_seed if seed is None else seed
    max_iter = cfg.ascent_max_iter if max_iter is None else max_iter

    op = _BlockOperator(u, w, alg, space)
    if exps.p == 1:
        best = 0.0
        for pos in range(len(space)):
            f = np.zeros(len(space))
            f[pos] = 1.0 / op.masses[pos]
            best = max(best, op.ratio(f, exps))
        return _finite(best, "ascent value")

    rng = np.random.default_rng(seed)
    # starts keep the sign of u so that every iterate does
    sign = np.where(op.u < 0, -1.0, 1.0)
    starts = [sign * rng.uniform(0.1, 1.0, len(space)) for _ in range(restarts)]
    for label in range(len(alg)):
        local = np.where(op.labels == label, rng.uniform(0.1, 1.0, len(space)), 0.0)
        starts.append(sign * local)

    best = 0.0
    for f in starts:
        f = f / lp_norm_of_values(f, op.masses, exps.p)
        best = max(best, _power_iteration(op, f, exps, max_iter))
    logger.debug("norm ascent: %d starts, best %.15g", len(starts), best)
    return _finite(best, "ascent value")


def operator_norm(
    u: Weight,
    w: Weight,
    alg: SubAlgebra,
    exps: Exponents,
    space: AtomicSpace,
    restarts: int | None = None,
    seed: int | None = None,
    max_iter: int | None = None,
) -> NormBracket:
    bracket = NormBracket(
        formula_value=aggregate_norm(u, w, alg, exps, space),
        ascent_value=norm_ascent(u, w, alg, exps, space, restarts=restarts, seed=seed, max_iter=max_iter),
    )
    logger.info("operator norm: formula %.12g, ascent %.12g", bracket.formula_value, bracket.ascent_value)
    return bracket


def hilbert_matrix(u: Weight, w: Weight, alg: SubAlgebra, space: AtomicSpace) -> np.ndarray:
    """Matrix of T on L^2(mu) in the orthonormal basis chi_x / sqrt(mu(x)).

    M[x, y] = sqrt(m_x) w(x) u(y) sqrt(m_y) / mu(A) when x and y share the
    block A, zero otherwise.
    """
    root = np.sqrt(space.masses)
    labels = alg.labels(space)
    block_mass = np.array([block.mass for block in alg.blocks])
    same = labels[:, None] == labels[None, :]
    outer = np.outer(root * w.evaluate(space) / block_mass[labels], root * u.evaluate(space))
    matrix = np.where(same, outer, 0.0)
    if not np.all(np.isfinite(matrix)):
        raise NonFiniteDataError("matrix of T has non-finite entries")
    return matrix


def trace_norm_hilbert(u: Weight, w: Weight, alg: SubAlgebra, space: AtomicSpace) -> float:
    """Nuclear norm of T on L^2(mu): the sum of its singular values."""
    singular = np.linalg.svd(hilbert_matrix(u, w, alg, space), compute_uv=False)
    return math.fsum(singular)


def _test_function_exponent(exps: Exponents) -> float:
    p, r = exps.p, exps.r
    if exps.regime is Regime.SMALLER:
        return (r - exps.p_conj) / (p * r)
    return (exps.p_conj + r) / (p * r)


def pietsch_test_functions(
    u: Weight,
    w: Weight,
    alg: SubAlgebra,
    exps: Exponents,
    space: AtomicSpace,
    norm: float | None = None,
) -> list[PietschTestFunction]:
    """The unit-ball functions f_i, one per block on which u is not zero.

    f_i = sign(u) |u|^(p'-1) E(|w|^q)^((p'-1)/q) / (||T||^(p'/p) mu(A_i)^e) on A_i
    """
    if exps.regime is Regime.EQUAL or exps.p == 1:
        raise RegimeUnsupportedError(f"test functions need p > 1 and p != q, got p={exps.p}, q={exps.q}")
    norm = aggregate_norm(u, w, alg, exps, space) if norm is None else norm
    if norm == 0:
        raise ZeroOperatorError("T = 0 has no test functions")

    pc = exps.p_conj
    e = _test_function_exponent(exps)
    scale = norm ** (pc / exps.p)
    functions = []
    for block in alg.blocks:
        positions = space.positions(block.cell_ids)
        masses = space.masses[positions]
        u_values = np.array([u(cid) for cid in block.cell_ids])
        if not np.any(u_values):
            continue
        w_values = np.array([w(cid) for cid in block.cell_ids])
        ew = math.fsum(np.abs(w_values) ** exps.q * masses) / block.mass
        values = np.sign(u_values) * np.abs(u_values) ** (pc - 1) * ew ** ((pc - 1) / exps.q)
        values = values / (scale * block.mass ** e)
        table = {cid: 0.0 for cid in space.ids}
        table.update(zip(block.cell_ids, values.tolist()))
        p_norm = lp_norm_of_values(values, masses, exps.p)
        if p_norm > 1 + UNIT_BALL_SLACK:
            logger.warning("test function for block %d has p-norm %.15g > 1", block.index, p_norm)
        functions.append(PietschTestFunction(block.index, Weight.table(table), p_norm))
    return functions


def pietsch_identity_check(u: Weight, w: Weight, alg: SubAlgebra, exps: Exponents, space: AtomicSpace) -> float:
    """Max relative residual of ||T f_i||_q = ||T||^(-p'/p) term_i^p' over the blocks."""
    _require_atomic(alg)
    norm = aggregate_norm(u, w, alg, exps, space)
    functions = pietsch_test_functions(u, w, alg, exps, space, norm=norm)
    terms = {s.block_index: s.term for s in atom_stats(u, w, alg, exps, space)}
    pc = exps.p_conj
    worst = 0.0
    for fn in functions:
        direct = lp_norm_of_values(apply(u, w, alg, fn.values, space).evaluate(space), space.masses, exps.q)
        closed = norm ** (-pc / exps.p) * terms[fn.block_index] ** pc
        if closed == 0:
            residual = 0.0 if direct == 0 else math.inf
        else:
            residual = abs(direct - closed) / closed
        worst = max(worst, residual)
    logger.info("test-function identity: %d blocks, max residual %.3g", len(functions), worst)
    return worst
