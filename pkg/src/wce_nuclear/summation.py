"""Compensated running sums and power sums that survive large exponents.

One-shot reductions use math.fsum directly; this module covers the running
case (partial sums of a series) where every intermediate value is reported,
and sums of r-th powers where r can reach the thousands.
"""

import math


class CompensatedSum:
    """Neumaier-compensated accumulator.

    Values are added in call order; ``value`` is the running total with the
    accumulated rounding error folded back in.
    """

    def __init__(self, start: float = 0.0):
        self.sum = float(start)
        self.carry = 0.0

    def add(self, value: float) -> float:
        total = self.sum + value
        if abs(self.sum) >= abs(value):
            self.carry += (self.sum - total) + value
        else:
            self.carry += (value - total) + self.sum
        self.sum = total
        return self.value

    @property
    def value(self) -> float:
        return self.sum + self.carry


def running_sums(values) -> list[float]:
    acc = CompensatedSum()
    return [acc.add(float(v)) for v in values]


def power_sum(values, exponent: float) -> float:
    """fsum of v^exponent over nonnegative values; inf once the sum leaves float range."""
    try:
        return math.fsum(v ** exponent for v in values)
    except OverflowError:
        return math.inf


def lr_norm(values, r: float) -> float:
    """(sum v^r)^(1/r) over nonnegative values, scaled by the largest one.

    Stays finite for large r where the plain power sum would overflow.
    """
    values = [float(v) for v in values]
    top = max(values, default=0.0)
    if top == 0:
        return 0.0
    return top * math.fsum((v / top) ** r for v in values) ** (1 / r)
