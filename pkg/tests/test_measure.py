import math

import numpy as np
import pytest

from wce_nuclear.errors import EvalError, InvalidExponentError, InvalidSpaceError, UnknownCellError
from wce_nuclear.measure import (
    AtomicSpace,
    Cell,
    NonAtomicPanel,
    SubAlgebra,
    Weight,
    WeightKind,
    integrate,
    lp_norm,
    lp_norm_of_values,
    restrict,
)
from wce_nuclear.summation import CompensatedSum, lr_norm, power_sum, running_sums


class TestAtomicSpace:
    def test_from_list_numbers_cells_from_one(self):
        space = AtomicSpace.from_masses([1.0, 2.0, 0.5])
        assert space.ids == (1, 2, 3)
        assert space.total_mass == 3.5
        assert space.mass_of(2) == 2.0

    def test_from_mapping_keeps_ids(self):
        space = AtomicSpace.from_masses({10: 1.0, 7: 2.0})
        assert space.ids == (10, 7)
        assert space.index_of(7) == 1

    def test_rejects_nonpositive_mass(self):
        with pytest.raises(InvalidSpaceError):
            Cell(1, 0.0)
        with pytest.raises(InvalidSpaceError):
            Cell(1, math.inf)

    def test_rejects_duplicate_ids(self):
        with pytest.raises(InvalidSpaceError):
            AtomicSpace((Cell(1, 1.0), Cell(1, 2.0)))

    def test_rejects_empty_space(self):
        with pytest.raises(InvalidSpaceError):
            AtomicSpace(())

    def test_unknown_cell(self):
        space = AtomicSpace.from_masses([1.0])
        with pytest.raises(UnknownCellError, match="unknown cell 5"):
            space.mass_of(5)

    def test_positions_are_in_cell_order(self):
        space = AtomicSpace.from_masses({3: 1.0, 1: 1.0, 2: 1.0})
        assert space.positions([2, 3]) == [0, 2]


class TestSubAlgebra:
    def test_partition_blocks(self, two_block_space):
        space, alg = two_block_space
        assert len(alg) == 2
        assert alg.blocks[0].index == 1
        assert alg.blocks[0].mass == 3.0
        assert alg.block_of(4).index == 2
        assert alg.labels(space).tolist() == [0, 0, 1, 1]

    def test_block_cells_sorted_into_cell_order(self):
        space = AtomicSpace.from_masses([1.0, 1.0, 1.0])
        alg = SubAlgebra.from_partition(space, [[3, 1], [2]])
        assert alg.blocks[0].cell_ids == (1, 3)

    def test_overlapping_blocks_rejected(self):
        space = AtomicSpace.from_masses([1.0, 1.0])
        with pytest.raises(InvalidSpaceError, match="overlaps"):
            SubAlgebra.from_partition(space, [[1, 2], [2]])

    def test_missing_cell_rejected(self):
        space = AtomicSpace.from_masses([1.0, 1.0, 1.0])
        with pytest.raises(InvalidSpaceError, match="not in any block"):
            SubAlgebra.from_partition(space, [[1, 2]])

    def test_unknown_cell_rejected(self):
        space = AtomicSpace.from_masses([1.0])
        with pytest.raises(UnknownCellError):
            SubAlgebra.from_partition(space, [[1], [9]])

    def test_empty_block_rejected(self):
        space = AtomicSpace.from_masses([1.0])
        with pytest.raises(InvalidSpaceError):
            SubAlgebra.from_partition(space, [[1], []])

    def test_discrete_and_coarse(self):
        space = AtomicSpace.from_masses([1.0, 2.0, 3.0])
        assert len(SubAlgebra.discrete(space)) == 3
        coarse = SubAlgebra.coarse(space)
        assert len(coarse) == 1
        assert coarse.blocks[0].mass == 6.0

    def test_panel_carries_operator_only_with_both_supports(self):
        assert NonAtomicPanel("b", True, True).carries_operator
        assert not NonAtomicPanel("b", True, False).carries_operator
        assert not NonAtomicPanel("b").carries_operator


class TestWeight:
    def test_table_lookup(self):
        f = Weight.table({1: 2.0, 2: -1.0})
        assert f.kind is WeightKind.TABLE
        assert f(2) == -1.0

    def test_table_missing_cell(self):
        with pytest.raises(EvalError, match="no value for cell 3"):
            Weight.table({1: 2.0})(3)

    def test_expression_with_caret_power(self):
        f = Weight.expr("n^2 - 1/n")
        assert f(2) == pytest.approx(3.5)

    def test_expression_with_double_star(self):
        assert Weight.expr("n**-3")(2) == 0.125

    def test_expression_rejects_calls(self):
        with pytest.raises(EvalError, match="unsupported"):
            Weight.expr("__import__('os')")

    def test_expression_rejects_other_names(self):
        with pytest.raises(EvalError):
            Weight.expr("x + 1")

    def test_expression_division_by_zero(self):
        with pytest.raises(EvalError, match="n=0"):
            Weight.expr("1/n")(0)

    def test_expression_complex_result(self):
        with pytest.raises(EvalError):
            Weight.expr("(-n)^0.5")(2)

    def test_expression_overflow_is_not_finite(self):
        with pytest.raises(EvalError):
            Weight.expr("10.0^400")(1)

    def test_from_values_in_cell_order(self):
        space = AtomicSpace.from_masses({5: 1.0, 3: 1.0})
        f = Weight.from_values(space, [1.5, 2.5])
        assert f(5) == 1.5
        assert f.evaluate(space).tolist() == [1.5, 2.5]

    def test_from_values_length_mismatch(self):
        space = AtomicSpace.from_masses([1.0, 1.0])
        with pytest.raises(EvalError):
            Weight.from_values(space, [1.0])

    def test_constant(self):
        assert Weight.constant(4.0)(17) == 4.0


class TestIntegrate:
    def test_zero_function(self, two_block_space):
        space, _ = two_block_space
        assert integrate(Weight.constant(0), space.ids, space) == 0

    def test_one_gives_total_mass(self, two_block_space):
        space, _ = two_block_space
        assert integrate(Weight.constant(1), space.ids, space) == space.total_mass

    def test_hand_example(self):
        space = AtomicSpace.from_masses([1.0, 2.0])
        assert integrate(Weight.table({1: 3.0, 2: 5.0}), {1, 2}, space) == 13

    def test_unknown_cell(self):
        space = AtomicSpace.from_masses([1.0])
        with pytest.raises(UnknownCellError):
            integrate(Weight.constant(1), {2}, space)

    def test_additive_over_disjoint_sets(self, rng, random_instance):
        for _ in range(50):
            inst = random_instance(rng)
            ids = list(inst.space.ids)
            cut = int(rng.integers(0, len(ids) + 1))
            left, right = ids[:cut], ids[cut:]
            whole = integrate(inst.u, ids, inst.space)
            parts = integrate(inst.u, left, inst.space) + integrate(inst.u, right, inst.space)
            assert whole == pytest.approx(parts, rel=1e-12, abs=1e-12)


class TestLpNorm:
    def test_zero(self, two_block_space):
        space, _ = two_block_space
        assert lp_norm(Weight.constant(0), 3, space) == 0

    def test_single_cell(self):
        space = AtomicSpace.from_masses([4.0])
        assert lp_norm(Weight.constant(-3.0), 2, space) == pytest.approx(3.0 * 2.0)

    def test_pythagoras(self):
        space = AtomicSpace.from_masses([1.0, 1.0])
        assert lp_norm(Weight.table({1: 3.0, 2: 4.0}), 2, space) == pytest.approx(5.0)

    def test_sup_norm_is_max(self):
        space = AtomicSpace.from_masses([1.0, 0.01])
        assert lp_norm(Weight.table({1: 1.0, 2: -7.0}), math.inf, space) == 7.0

    def test_rejects_small_exponent(self):
        with pytest.raises(InvalidExponentError):
            lp_norm_of_values(np.ones(2), np.ones(2), 0.5)

    def test_homogeneous(self, rng, random_instance):
        for _ in range(50):
            inst = random_instance(rng)
            p = float(rng.uniform(1, 10))
            c = float(rng.uniform(-5, 5))
            scaled = Weight.from_values(inst.space, (c * inst.u.evaluate(inst.space)).tolist())
            assert lp_norm(scaled, p, inst.space) == pytest.approx(abs(c) * lp_norm(inst.u, p, inst.space), rel=1e-12)

    def test_hoelder(self, rng, random_instance):
        for _ in range(200):
            inst = random_instance(rng)
            p = float(rng.uniform(1.01, 10))
            pc = p / (p - 1)
            product = Weight.from_values(inst.space, (inst.u.evaluate(inst.space) * inst.w.evaluate(inst.space)).tolist())
            lhs = abs(integrate(product, inst.space.ids, inst.space))
            rhs = lp_norm(inst.u, p, inst.space) * lp_norm(inst.w, pc, inst.space)
            assert lhs <= rhs * (1 + 1e-12)


class TestRestrict:
    def test_restrict_zeroes_outside(self):
        space = AtomicSpace.from_masses([1.0, 1.0, 1.0])
        f = restrict(Weight.constant(2.0), {1, 3}, space)
        assert f.evaluate(space).tolist() == [2.0, 0.0, 2.0]

    def test_restrict_unknown_cell(self):
        space = AtomicSpace.from_masses([1.0])
        with pytest.raises(UnknownCellError):
            restrict(Weight.constant(1.0), {4}, space)


class TestCompensatedSum:
    def test_recovers_small_terms(self):
        acc = CompensatedSum()
        for value in (1.0, 1e100, 1.0, -1e100):
            acc.add(value)
        assert acc.value == 2.0

    def test_running_sums(self):
        assert running_sums([1, 2, 3]) == [1.0, 3.0, 6.0]

    def test_matches_fsum_on_harmonic_terms(self):
        terms = [1 / k for k in range(1, 10_001)]
        assert running_sums(terms)[-1] == pytest.approx(math.fsum(terms), rel=1e-15)


class TestPowerSums:
    def test_power_sum(self):
        assert power_sum([1.0, 2.0, 3.0], 2) == 14.0

    def test_power_sum_overflow_is_inf(self):
        assert math.isinf(power_sum([75.0, 2.0], 903.0))

    def test_lr_norm_matches_direct_formula(self):
        assert lr_norm([3.0, 4.0], 2) == pytest.approx(5.0, rel=1e-15)

    def test_lr_norm_for_large_r(self):
        value = lr_norm([300.0, 400.0, 0.0], 402.0)
        assert math.isfinite(value)
        assert 400.0 <= value <= 400.0 * 2 ** (1 / 402)
        assert value == pytest.approx(400.0, rel=1e-12)

    def test_lr_norm_of_zeros(self):
        assert lr_norm([0.0, 0.0], 5.0) == 0.0
        assert lr_norm([], 5.0) == 0.0
