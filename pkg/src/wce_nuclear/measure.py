"""Discrete measure spaces, partition sub-algebras, weights and integration.

A space is a finite ordered list of positive-mass cells (the atoms of the
full sigma-algebra). A sub-algebra is a partition of the cells into blocks,
plus optional non-atomic panels that only carry support information.
"""

import ast
import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from .errors import EvalError, InvalidExponentError, InvalidSpaceError, UnknownCellError

logger = logging.getLogger(__name__)

MASS_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Cell:
    id: int
    mass: float

    def __post_init__(self):
        if not (math.isfinite(self.mass) and self.mass > 0):
            raise InvalidSpaceError(f"cell {self.id}: mass must be positive and finite, got {self.mass}")


@dataclass(frozen=True)
class AtomicSpace:
    cells: tuple[Cell, ...]

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        if not self.cells:
            raise InvalidSpaceError("a space needs at least one cell")
        seen: set[int] = set()
        for cell in self.cells:
            if cell.id in seen:
                raise InvalidSpaceError(f"duplicate cell id {cell.id}")
            seen.add(cell.id)

    @classmethod
    def from_masses(cls, masses: Mapping[int, float] | Sequence[float]) -> "AtomicSpace":
        """Build a space from ``{id: mass}`` or a list (ids 1, 2, ...)."""
        if isinstance(masses, Mapping):
            return cls(tuple(Cell(int(k), float(v)) for k, v in masses.items()))
        return cls(tuple(Cell(i, float(m)) for i, m in enumerate(masses, start=1)))

    @cached_property
    def position(self) -> dict[int, int]:
        return {cell.id: pos for pos, cell in enumerate(self.cells)}

    @cached_property
    def ids(self) -> tuple[int, ...]:
        return tuple(cell.id for cell in self.cells)

    @cached_property
    def masses(self) -> np.ndarray:
        return np.array([cell.mass for cell in self.cells], dtype=float)

    @cached_property
    def total_mass(self) -> float:
        return math.fsum(cell.mass for cell in self.cells)

    def mass_of(self, cell_id: int) -> float:
        return self.cells[self.index_of(cell_id)].mass

    def index_of(self, cell_id: int) -> int:
        try:
            return self.position[cell_id]
        except KeyError:
            raise UnknownCellError(f"unknown cell {cell_id}") from None

    def positions(self, cell_ids: Iterable[int]) -> list[int]:
        """Positions of ``cell_ids`` sorted into cell order."""
        return sorted(self.index_of(cid) for cid in set(cell_ids))

    def __len__(self) -> int:
        return len(self.cells)


@dataclass(frozen=True)
class Block:
    index: int  # 1-based, position in the partition
    cell_ids: tuple[int, ...]  # in cell order
    mass: float

    def __post_init__(self):
        if not self.cell_ids:
            raise InvalidSpaceError(f"block {self.index} is empty")
        if not self.mass > 0:
            raise InvalidSpaceError(f"block {self.index}: mass must be positive")


@dataclass(frozen=True)
class NonAtomicPanel:
    """A piece of the non-atomic part, described only by support flags."""

    id: str
    u_support_positive: bool = False
    w_support_positive: bool = False

    @property
    def carries_operator(self) -> bool:
        return self.u_support_positive and self.w_support_positive


@dataclass(frozen=True)
class SubAlgebra:
    blocks: tuple[Block, ...]
    panels: tuple[NonAtomicPanel, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "panels", tuple(self.panels))

    @classmethod
    def from_partition(
        cls,
        space: AtomicSpace,
        groups: Iterable[Iterable[int]],
        panels: Iterable[NonAtomicPanel] = (),
    ) -> "SubAlgebra":
        blocks = []
        for index, group in enumerate(groups, start=1):
            group = list(group)
            positions = space.positions(group)
            if len(positions) != len(group):
                raise InvalidSpaceError(f"block {index} lists a cell twice")
            cell_ids = tuple(space.cells[pos].id for pos in positions)
            mass = math.fsum(space.cells[pos].mass for pos in positions)
            blocks.append(Block(index=index, cell_ids=cell_ids, mass=mass))
        alg = cls(tuple(blocks), tuple(panels))
        alg.validate(space)
        return alg

    @classmethod
    def discrete(cls, space: AtomicSpace) -> "SubAlgebra":
        """Every cell its own block (E is the identity)."""
        return cls.from_partition(space, [[cell.id] for cell in space.cells])

    @classmethod
    def coarse(cls, space: AtomicSpace) -> "SubAlgebra":
        """A single block holding every cell."""
        return cls.from_partition(space, [space.ids])

    def validate(self, space: AtomicSpace) -> None:
        covered: set[int] = set()
        for block in self.blocks:
            overlap = covered.intersection(block.cell_ids)
            if overlap:
                raise InvalidSpaceError(f"block {block.index} overlaps earlier blocks on cells {sorted(overlap)}")
            covered.update(block.cell_ids)
        missing = set(space.ids) - covered
        if missing:
            raise InvalidSpaceError(f"cells {sorted(missing)} are not in any block")
        extra = covered - set(space.ids)
        if extra:
            raise UnknownCellError(f"blocks reference unknown cells {sorted(extra)}")
        total = math.fsum(block.mass for block in self.blocks)
        if abs(total - space.total_mass) > MASS_TOLERANCE * space.total_mass:
            raise InvalidSpaceError("block masses do not add up to the total mass")

    @cached_property
    def _block_by_cell(self) -> dict[int, int]:
        return {cid: block.index for block in self.blocks for cid in block.cell_ids}

    def block_of(self, cell_id: int) -> Block:
        try:
            return self.blocks[self._block_by_cell[cell_id] - 1]
        except KeyError:
            raise UnknownCellError(f"unknown cell {cell_id}") from None

    def labels(self, space: AtomicSpace) -> np.ndarray:
        """0-based block label of every cell, in cell order."""
        return np.array([self._block_by_cell[cid] - 1 for cid in space.ids], dtype=int)

    def __len__(self) -> int:
        return len(self.blocks)


# --- Weights ---------------------------------------------------------------

class WeightKind(str, Enum):
    TABLE = "table"
    EXPR = "expr"


_BINARY_OPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a ** b,
}
_UNARY_OPS = {
    ast.USub: lambda a: -a,
    ast.UAdd: lambda a: a,
}
INDEX_VARIABLE = "n"


def _compile_formula(formula: str) -> ast.Expression:
    try:
        tree = ast.parse(formula.replace("^", "**"), mode="eval")
    except SyntaxError as e:
        raise EvalError(f"cannot parse weight formula {formula!r}: {e.msg}") from None
    for node in ast.walk(tree):
        if isinstance(node, (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Load)):
            continue
        if isinstance(node, tuple(_BINARY_OPS) + tuple(_UNARY_OPS)):
            continue
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            continue
        if isinstance(node, ast.Name) and node.id == INDEX_VARIABLE:
            continue
        raise EvalError(f"weight formula {formula!r} uses unsupported syntax ({type(node).__name__})")
    return tree


def _eval_node(node: ast.AST, n: int) -> float:
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, n)
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return float(n)
    if isinstance(node, ast.UnaryOp):
        return _UNARY_OPS[type(node.op)](_eval_node(node.operand, n))
    left = _eval_node(node.left, n)
    right = _eval_node(node.right, n)
    return _BINARY_OPS[type(node.op)](left, right)


@dataclass(frozen=True, eq=False)
class Weight:
    """A real function on cells: a per-cell table or a formula in the cell id ``n``."""

    kind: WeightKind
    values: Mapping[int, float] = field(default_factory=dict)
    formula: str = ""

    @classmethod
    def table(cls, values: Mapping[int, float]) -> "Weight":
        return cls(WeightKind.TABLE, values={int(k): float(v) for k, v in values.items()})

    @classmethod
    def expr(cls, formula: str) -> "Weight":
        weight = cls(WeightKind.EXPR, formula=formula)
        weight._tree  # fail early on bad syntax
        return weight

    @classmethod
    def constant(cls, c: float) -> "Weight":
        return cls.expr(repr(float(c)))

    @classmethod
    def from_values(cls, space: AtomicSpace, values: Sequence[float]) -> "Weight":
        """Table weight from values listed in cell order."""
        if len(values) != len(space):
            raise EvalError(f"expected {len(space)} values, got {len(values)}")
        return cls.table(dict(zip(space.ids, (float(v) for v in values))))

    @cached_property
    def _tree(self) -> ast.Expression:
        return _compile_formula(self.formula)

    def __call__(self, cell_id: int) -> float:
        if self.kind is WeightKind.TABLE:
            try:
                value = self.values[cell_id]
            except KeyError:
                raise EvalError(f"weight table has no value for cell {cell_id}") from None
        else:
            try:
                value = _eval_node(self._tree, cell_id)
            except (ZeroDivisionError, OverflowError) as e:
                raise EvalError(f"formula {self.formula!r} fails at n={cell_id}: {e}") from None
            if isinstance(value, complex):
                raise EvalError(f"formula {self.formula!r} is complex at n={cell_id}")
        if not math.isfinite(value):
            raise EvalError(f"weight is not finite on cell {cell_id}")
        return value

    def evaluate(self, space: AtomicSpace) -> np.ndarray:
        """Values on every cell of ``space``, in cell order."""
        return np.array([self(cid) for cid in space.ids], dtype=float)

    def describe(self) -> str:
        if self.kind is WeightKind.EXPR:
            return self.formula
        return f"table[{len(self.values)}]"


# --- Integration -----------------------------------------------------------

def integrate(f: Weight, cell_ids: Iterable[int], space: AtomicSpace) -> float:
    """Integral of ``f`` over the cells ``cell_ids``, summed in cell order."""
    positions = space.positions(cell_ids)
    return math.fsum(f(space.cells[pos].id) * space.cells[pos].mass for pos in positions)


def lp_norm(f: Weight, p: float, space: AtomicSpace) -> float:
    """L^p(mu) norm of ``f`` on the whole space; ``p`` may be ``math.inf``."""
    return lp_norm_of_values(f.evaluate(space), space.masses, p)


def lp_norm_of_values(values: np.ndarray, masses: np.ndarray, p: float) -> float:
    if not (p >= 1):
        raise InvalidExponentError(f"p must be >= 1, got {p}")
    magnitudes = np.abs(np.asarray(values, dtype=float))
    if magnitudes.size == 0:
        return 0.0
    if math.isinf(p):
        return float(magnitudes.max())
    return math.fsum(magnitudes ** p * masses) ** (1.0 / p)


def restrict(f: Weight, cell_ids: Iterable[int], space: AtomicSpace) -> Weight:
    """``f`` times the indicator of ``cell_ids``."""
    keep = set(cell_ids)
    for cid in keep:
        space.index_of(cid)
    return Weight.table({cid: (f(cid) if cid in keep else 0.0) for cid in space.ids})
