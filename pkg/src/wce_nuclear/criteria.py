"""Verdicts on nuclearity and compactness from per-atom statistics.

A finite truncation alone never certifies an infinite series: the caller
has to supply a tail bound (nuclearity) or a tail statement (compactness),
otherwise the verdict is INCONCLUSIVE with the partial evidence attached.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

from .errors import RegimeUnsupportedError
from .measure import SubAlgebra
from .operators import AtomStats, CellAtom, Exponents, Regime
from .summation import power_sum

logger = logging.getLogger(__name__)


class Status(str, Enum):
    NUCLEAR = "Nuclear"
    NOT_NUCLEAR = "NotNuclear"
    COMPACT = "Compact"
    NOT_COMPACT = "NotCompact"
    ZERO = "Zero"
    INCONCLUSIVE = "Inconclusive"


class Flag(str, Enum):
    VERBATIM_TYPO_SUSPECTED = "VerbatimTypoSuspected"
    HEURISTIC_TAIL = "HeuristicTail"
    ZERO_OPERATOR = "ZeroOperator"
    NON_ATOMIC_SUPPORT = "NonAtomicSupport"
    FINITE_RANK = "FiniteRank"
    Q_EQUALS_ONE = "QEqualsOne"
    MISSING_MOMENTS = "MissingMoments"
    DIVERGENT_TAIL = "DivergentTail"
    NUMERIC_OVERFLOW = "NumericOverflow"


class TailStatement(str, Enum):
    """What the caller knows about the atoms beyond the truncation."""

    FINITE_ATOMS = "finite"  # there are none
    HOLDS = "holds"  # the series converges / the limit is zero
    FAILS = "fails"


class CompactnessCase(str, Enum):
    Q_BELOW_P = "1<q<p"
    P_BELOW_Q = "1<p<q"
    Q_ONE = "q=1<p"
    P_ONE = "p=1<q"

    @classmethod
    def for_exponents(cls, exps: Exponents) -> "CompactnessCase":
        if exps.p == 1 and exps.q > 1:
            return cls.P_ONE
        if exps.q == 1 and exps.p > 1:
            return cls.Q_ONE
        if 1 < exps.q < exps.p:
            return cls.Q_BELOW_P
        if 1 < exps.p < exps.q:
            return cls.P_BELOW_Q
        raise RegimeUnsupportedError(f"no compactness criterion for p={exps.p}, q={exps.q}")

    def accepts(self, exps: Exponents) -> bool:
        try:
            return CompactnessCase.for_exponents(exps) is self
        except RegimeUnsupportedError:
            return False


# Divergence marker for tail bounds
DIVERGENT = math.inf


@dataclass
class Verdict:
    status: Status
    partial_sum: float
    terms_used: int
    notes: list[Flag] = field(default_factory=list)
    total: float | None = None  # partial_sum + tail bound when certified
    last_value: float | None = None  # last limit quantity, for limit criteria
    corrected_sum: float | None = None
    necessary: bool | None = None  # p = 1 compactness, A-atom conditions
    sufficient: bool | None = None  # p = 1 compactness, cell conditions
    decay_slope: float | None = None

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "partial_sum": self.partial_sum,
            "terms_used": self.terms_used,
            "notes": [n.value for n in self.notes],
            "total": self.total,
            "last_value": self.last_value,
            "corrected_sum": self.corrected_sum,
            "necessary": self.necessary,
            "sufficient": self.sufficient,
            "decay_slope": self.decay_slope,
        }


def nonatomic_condition(alg: SubAlgebra) -> bool:
    """True iff no panel carries both u and w on its support.

    E(|u|^a) and E(|w|^b) have the same support as the smallest A-sets
    covering u and w, so the product of their roots vanishes on a panel
    exactly when one of the two flags is off.
    """
    return not any(panel.carries_operator for panel in alg.panels)


def _is_zero(stats: Sequence[AtomStats]) -> bool:
    return all(s.d == 0 for s in stats)


def _monomial(*factors: tuple[float, float]) -> float:
    """Product of base^exponent over nonnegative bases, inf when it overflows.

    Exponents near p = q reach the thousands, so a product that leaves the
    float range is retried in log space before it is reported as inf.
    """
    if any(base == 0 and exponent > 0 for base, exponent in factors):
        return 0.0
    try:
        value = math.prod(base ** exponent for base, exponent in factors)
    except OverflowError:
        value = math.inf
    if math.isfinite(value):
        return value
    log_value = math.fsum(exponent * math.log(base) for base, exponent in factors)
    try:
        return math.exp(log_value)
    except OverflowError:
        return math.inf


def _overflow_notes(*values: float | None) -> list[Flag]:
    if any(v is not None and math.isinf(v) for v in values):
        return [Flag.NUMERIC_OVERFLOW]
    return []


def _equal_regime(stats: Sequence[AtomStats], nonatomic_ok: bool, exps: Exponents) -> "Verdict":
    if nonatomic_ok and _is_zero(stats):
        return Verdict(Status.ZERO, 0.0, len(stats), [Flag.ZERO_OPERATOR], total=0.0)
    raise RegimeUnsupportedError(f"no criterion covers p = q = {exps.p}")


def nuclearity_verdict(
    stats: Sequence[AtomStats],
    exps: Exponents,
    nonatomic_ok: bool,
    tail_bound: float | None = None,
    decay_slope: float | None = None,
) -> Verdict:
    """Series test sum d_i mu(A_i)^(+-1/r) < inf plus the B-condition.

    ``tail_bound`` bounds the sum of the terms beyond ``stats``; pass
    ``DIVERGENT`` when the tail is known to diverge and ``0.0`` when the
    truncation is the whole space.
    """
    if exps.regime is Regime.EQUAL:
        return _equal_regime(stats, nonatomic_ok, exps)

    partial = math.fsum(s.term for s in stats)
    notes: list[Flag] = []
    if exps.q == 1:
        notes.append(Flag.Q_EQUALS_ONE)

    if not nonatomic_ok:
        notes.append(Flag.NON_ATOMIC_SUPPORT)
        verdict = Verdict(Status.NOT_NUCLEAR, partial, len(stats), notes)
    elif tail_bound is not None and math.isinf(tail_bound):
        notes.append(Flag.DIVERGENT_TAIL)
        verdict = Verdict(Status.NOT_NUCLEAR, partial, len(stats), notes)
    elif tail_bound is not None:
        if partial == 0 and tail_bound == 0:
            notes.append(Flag.ZERO_OPERATOR)
        verdict = Verdict(Status.NUCLEAR, partial, len(stats), notes, total=partial + tail_bound)
    else:
        verdict = Verdict(Status.INCONCLUSIVE, partial, len(stats), notes)
        if decay_slope is not None:
            verdict.notes.append(Flag.HEURISTIC_TAIL)
    verdict.decay_slope = decay_slope

    logger.info(
        "nuclearity (%s): %s after %d terms, partial sum %.12g",
        exps.regime.value, verdict.status.value, len(stats), partial,
    )
    return verdict


def _from_tail(tail: TailStatement | None) -> Status:
    if tail in (TailStatement.FINITE_ATOMS, TailStatement.HOLDS):
        return Status.COMPACT
    if tail is TailStatement.FAILS:
        return Status.NOT_COMPACT
    return Status.INCONCLUSIVE


def compactness_verdict(
    stats: Sequence[AtomStats],
    exps: Exponents,
    nonatomic_ok: bool,
    mode: CompactnessCase | None = None,
    tail: TailStatement | None = None,
    cells: Sequence[CellAtom] | None = None,
) -> Verdict:
    """Evaluate the compactness criterion selected by ``mode``.

    ``tail`` states whether the series / limit condition holds beyond the
    truncation; ``cells`` (the Sigma-atoms) feeds the p = 1 sufficient
    condition.
    """
    if exps.regime is Regime.EQUAL:
        return _equal_regime(stats, nonatomic_ok, exps)
    mode = mode or CompactnessCase.for_exponents(exps)
    if not mode.accepts(exps):
        raise RegimeUnsupportedError(f"case {mode.value} does not apply to p={exps.p}, q={exps.q}")

    if mode is CompactnessCase.Q_BELOW_P:
        verdict = _series_case(stats, exps, tail, verbatim=True)
    elif mode is CompactnessCase.Q_ONE:
        verdict = _series_case(stats, exps, tail, verbatim=False)
    elif mode is CompactnessCase.P_BELOW_Q:
        verdict = _limit_case(stats, exps, tail)
    else:
        verdict = _p_one_case(stats, exps, nonatomic_ok, tail, cells)

    if not nonatomic_ok:
        verdict.status = Status.NOT_COMPACT
        verdict.notes.append(Flag.NON_ATOMIC_SUPPORT)
    elif _is_zero(stats):
        verdict.status = Status.COMPACT
        verdict.notes.append(Flag.ZERO_OPERATOR)
    elif tail is TailStatement.FINITE_ATOMS:
        verdict.notes.append(Flag.FINITE_RANK)

    logger.info("compactness (%s): %s after %d atoms", mode.value, verdict.status.value, len(stats))
    return verdict


def _total(values) -> float:
    try:
        return math.fsum(values)
    except OverflowError:
        return math.inf


def _series_case(stats: Sequence[AtomStats], exps: Exponents, tail: TailStatement | None, verbatim: bool) -> Verdict:
    if verbatim:
        # sum (E|w|^q)^(p'q'/(q'-p')) (E|u|^p)^(q'/(q'-p')) mu, as printed
        if any(s.eu_p is None for s in stats):
            return Verdict(Status.INCONCLUSIVE, math.nan, len(stats), [Flag.MISSING_MOMENTS])
        gap = exps.q_conj - exps.p_conj
        w_exp = exps.p_conj * exps.q_conj / gap
        u_exp = exps.q_conj / gap
        terms = [_monomial((s.ew, w_exp), (s.eu_p, u_exp), (s.mass, 1.0)) for s in stats]
        notes = [Flag.VERBATIM_TYPO_SUSPECTED]
        corrected = power_sum((s.term for s in stats), exps.r)
    else:
        # q = 1: sum E(|u|^p')(E|w|)^p' mu, which is sum term_i^p'
        terms = [_q_one_term(s, exps) for s in stats]
        notes = [Flag.Q_EQUALS_ONE]
        corrected = None
    partial = _total(terms)
    notes += _overflow_notes(partial, corrected)
    return Verdict(_from_tail(tail), partial, len(stats), notes, corrected_sum=corrected)


def _q_one_term(s: AtomStats, exps: Exponents) -> float:
    return _monomial((s.eu, 1.0), (s.ew, exps.p_conj), (s.mass, 1.0))


def _limit_case(stats: Sequence[AtomStats], exps: Exponents, tail: TailStatement | None) -> Verdict:
    # E(|u|^p')(E|w|^q)^(p'/q) / mu^((p'-q')/q'), which equals term_i^p'
    exponent = (exps.p_conj - exps.q_conj) / exps.q_conj
    values = [_monomial((s.eu, 1.0), (s.ew, exps.p_conj / exps.q), (s.mass, -exponent)) for s in stats]
    last = values[-1] if values else None
    partial = _total(values)
    return Verdict(_from_tail(tail), partial, len(stats), _overflow_notes(partial), last_value=last)


def _block_limit_value(s: AtomStats, mass: float, exps: Exponents) -> float:
    return _monomial((s.eu_qc, 1.0), (s.ew, exps.q_conj / exps.q), (mass, -1.0))


def _p_one_case(
    stats: Sequence[AtomStats],
    exps: Exponents,
    nonatomic_ok: bool,
    tail: TailStatement | None,
    cells: Sequence[CellAtom] | None,
) -> Verdict:
    notes: list[Flag] = []
    if any(s.eu_qc is None for s in stats):
        return Verdict(Status.INCONCLUSIVE, math.nan, len(stats), [Flag.MISSING_MOMENTS])

    # necessary: A-atom limit E(|u|^q')(A_i)(E|w|^q)^(q'/q)(A_i) / mu(A_i) -> 0
    atom_values = [_block_limit_value(s, s.mass, exps) for s in stats]
    # sufficient: same quantity over the Sigma-atoms (cells), with E taken on the block
    by_block = {s.block_index: s for s in stats}
    if cells is None:
        notes.append(Flag.MISSING_MOMENTS)
        cell_values = None
    else:
        cell_values = [
            _block_limit_value(by_block[c.block_index], c.mass, exps)
            for c in cells if c.block_index in by_block
        ]

    if tail in (TailStatement.FINITE_ATOMS, TailStatement.HOLDS):
        necessary = nonatomic_ok
        sufficient = nonatomic_ok if cell_values is not None or tail is TailStatement.HOLDS else None
    elif tail is TailStatement.FAILS:
        necessary, sufficient = False, False
    else:
        necessary = None if nonatomic_ok else False
        sufficient = None if nonatomic_ok else False

    if sufficient:
        status = Status.COMPACT
    elif necessary is False:
        status = Status.NOT_COMPACT
    else:
        status = Status.INCONCLUSIVE
    partial = _total(atom_values)
    cell_sum = _total(cell_values) if cell_values is not None else None
    notes += _overflow_notes(partial, cell_sum)
    return Verdict(
        status,
        partial,
        len(stats),
        notes,
        last_value=atom_values[-1] if atom_values else None,
        necessary=necessary,
        sufficient=sufficient,
        corrected_sum=cell_sum,
    )


def consistency_check(nuclear: Verdict, compact: Verdict) -> bool:
    """Every nuclear operator is compact; flag the one contradictory pair."""
    return not (nuclear.status is Status.NUCLEAR and compact.status is Status.NOT_COMPACT)
