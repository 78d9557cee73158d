"""Real-operation counts for decoding via ``H_check^T y_check / sigma``.

Decoding is split into four pieces:

1. the product ``H_check^T y_check`` (one output row per real symbol),
2. ``sigma = c * sum h_i^2``,
3. one inversion ``1/sigma``,
4. ``2K`` scalings ``x_hat_i = sigma^-1 * ybar_i``.

The product is driven by a :class:`Schedule` planned from the symbolic
lattice matrix at one of four :class:`ScheduleLevel` values.  Every schedule
can be *planned* (counted from its structure) and *executed* on
:class:`Counted` scalars that tally each arithmetic operation; the two counts
must agree exactly.

Counting conventions:

* multiplying by 0 or +-1 and changing signs are free,
* a square counts as one multiplication,
* multiplying a sum by a stored constant (``c``, ``1/sqrt2``) is one
  multiplication,
* a subtraction is an addition,
* a linear combination ``h_i +- h_j`` costs one addition each time it occurs
  in a row (nothing is shared between rows),
* below the ``full`` level a nonzero matrix entry is an opaque stored value
  and forming it is not charged.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .codes import ONE, CodeSpec, Coefficient
from .decode import Constellation, quantize
from .lattice import LinearForm, lattice_basis, symbolic_check_H

__all__ = [
    "OpCount",
    "DivisionPolicy",
    "CostModel",
    "ScheduleLevel",
    "EntryTerm",
    "PureGroup",
    "ComboTerm",
    "RowPlan",
    "SigmaPlan",
    "Schedule",
    "OpCounter",
    "Counted",
    "CountMismatch",
    "plan_schedule",
    "count_decode",
    "formula",
    "instrumented_execute",
    "count_tjc_naive",
    "count_simplified",
]


@dataclass(frozen=True)
class OpCount:
    """Real divisions, multiplications and additions."""

    div: int = 0
    mul: int = 0
    add: int = 0

    def __add__(self, other: "OpCount") -> "OpCount":
        if not isinstance(other, OpCount):
            return NotImplemented
        return OpCount(self.div + other.div, self.mul + other.mul, self.add + other.add)

    def __sub__(self, other: "OpCount") -> "OpCount":
        return OpCount(self.div - other.div, self.mul - other.mul, self.add - other.add)

    def apply(self, model: "CostModel") -> "OpCount":
        if model.division_policy is DivisionPolicy.FOUR_MULTIPLICATIONS:
            return OpCount(0, self.mul + 4 * self.div, self.add)
        return self

    def as_dict(self) -> dict:
        return {"R_D": self.div, "R_M": self.mul, "R_A": self.add}

    def __str__(self) -> str:
        return f"{self.div} R_D, {self.mul} R_M, {self.add} R_A"


class DivisionPolicy(enum.Enum):
    DIVISION = "division"
    FOUR_MULTIPLICATIONS = "4mul"


@dataclass(frozen=True)
class CostModel:
    division_policy: DivisionPolicy = DivisionPolicy.FOUR_MULTIPLICATIONS


FOUR_MUL = CostModel(DivisionPolicy.FOUR_MULTIPLICATIONS)


class ScheduleLevel(enum.Enum):
    DENSE = "dense"
    ZERO_SKIP = "zero_skip"
    GROUPED = "grouped"
    FULL = "full"


# --------------------------------------------------------------------------
# Schedule terms.  ``inputs`` are (y_check position, sign) pairs whose signed
# sum is formed before the single multiplication of the term.
# --------------------------------------------------------------------------

Inputs = tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class EntryTerm:
    """Stored matrix entry times one received component (may be zero at ``dense``)."""

    form: LinearForm
    position: int

    def cost(self) -> OpCount:
        return OpCount(mul=1)


@dataclass(frozen=True)
class PureGroup:
    """``h_symbol * (sum of signed y_check components)``."""

    symbol: int
    inputs: Inputs

    def cost(self) -> OpCount:
        return OpCount(mul=1, add=len(self.inputs) - 1)


@dataclass(frozen=True)
class ComboTerm:
    """``(sum_i w_i h_i) * (sum of signed y_check components)``.

    Forming the combination costs ``len(weights) - 1`` additions plus one
    multiplication per weight that is not +-1.
    """

    weights: tuple[tuple[int, Coefficient], ...]
    inputs: Inputs

    def cost(self) -> OpCount:
        scaled = sum(1 for _, w in self.weights if not w.is_unit())
        return OpCount(mul=1 + scaled, add=len(self.weights) - 1 + len(self.inputs) - 1)


Term = EntryTerm | PureGroup | ComboTerm


@dataclass(frozen=True)
class RowPlan:
    terms: tuple[Term, ...]
    common_scalar: Coefficient | None = None

    def cost(self) -> OpCount:
        total = OpCount(add=max(len(self.terms) - 1, 0))
        for term in self.terms:
            total = total + term.cost()
        if self.common_scalar is not None and self.terms:
            total = total + OpCount(mul=1)
        return total


@dataclass(frozen=True)
class SigmaPlan:
    """``sigma = c * sum of n_symbols squares``."""

    n_symbols: int
    c: int
    include_c_mult: bool = True

    def cost(self) -> OpCount:
        extra = 1 if (self.c > 1 and self.include_c_mult) else 0
        return OpCount(mul=self.n_symbols + extra, add=self.n_symbols - 1)


@dataclass(frozen=True)
class Schedule:
    level: ScheduleLevel
    rows: tuple[RowPlan, ...]
    n_symbols: int
    n_received: int

    def product_cost(self) -> OpCount:
        total = OpCount()
        for row in self.rows:
            total = total + row.cost()
        return total

    def decode_cost(self, sigma_plan: SigmaPlan, model: CostModel = FOUR_MUL) -> OpCount:
        """Product + sigma + one division + ``2K`` scalings."""
        total = self.product_cost() + sigma_plan.cost() + OpCount(div=1) + OpCount(mul=len(self.rows))
        return total.apply(model)


class CountMismatch(AssertionError):
    """Observed operation count differs from the planned one."""


# --------------------------------------------------------------------------
# Planning
# --------------------------------------------------------------------------


def _unit_symbol(form: LinearForm) -> tuple[int, int] | None:
    """``(symbol, sign)`` if ``form`` is ``+-h_i``, else None."""
    if len(form) == 1:
        idx, w = form.terms[0]
        if w.is_unit():
            return idx, w.sign()
    return None


def _grouped_terms(column, allow_combos: bool) -> list[Term]:
    groups: dict = {}
    stored: list[Term] = []
    for pos, form in column:
        unit = _unit_symbol(form)
        if unit is not None:
            key, sign = ("h", unit[0]), unit[1]
        elif allow_combos:
            # combinations equal up to sign share one multiplication
            lead = form.terms[0][1].sign()
            key, sign = ("c", form if lead > 0 else -form), lead
        else:
            stored.append(EntryTerm(form, pos))
            continue
        groups.setdefault(key, []).append((pos, sign))
    terms: list[Term] = []
    for (kind, val), inputs in groups.items():
        if kind == "h":
            terms.append(PureGroup(val, tuple(inputs)))
        else:
            terms.append(ComboTerm(val.terms, tuple(inputs)))
    return terms + stored


def plan_schedule(symbolic_H, level: ScheduleLevel | str) -> Schedule:
    """Plan ``H_check^T y_check`` from a symbolic lattice matrix.

    ``dense``
        every entry, zeros included, is a stored value: ``2MT`` multiplications
        and ``2MT - 1`` additions per row.
    ``zero_skip``
        as ``dense`` but exact zeros are skipped.
    ``grouped``
        ``zero_skip`` plus, per row, all occurrences of ``+-h_i`` are served by
        one multiplication after pre-adding their received components.
    ``full``
        ``grouped`` plus a scalar shared by every entry of a row is factored
        out into one trailing multiplication, and the remaining linear
        combinations are formed explicitly (equal combinations in a row are
        grouped like single symbols).
    """
    level = ScheduleLevel(level)
    rows_sym = [list(r) for r in symbolic_H]
    if not rows_sym:
        raise ValueError("empty lattice matrix")
    n_rx = len(rows_sym)
    n_out = len(rows_sym[0])
    n_symbols = max((idx for r in rows_sym for f in r for idx, _ in f.terms), default=0)
    plans = []
    for c in range(n_out):
        column = [(r, rows_sym[r][c]) for r in range(n_rx)]
        for _, form in column:
            if not isinstance(form, LinearForm):
                raise TypeError(f"unsupported lattice entry {form!r}")
        if level is ScheduleLevel.DENSE:
            plans.append(RowPlan(tuple(EntryTerm(f, r) for r, f in column)))
            continue
        nonzero = [(r, f) for r, f in column if not f.is_zero()]
        if level is ScheduleLevel.ZERO_SKIP:
            plans.append(RowPlan(tuple(EntryTerm(f, r) for r, f in nonzero)))
        elif level is ScheduleLevel.GROUPED:
            plans.append(RowPlan(tuple(_grouped_terms(nonzero, allow_combos=False))))
        else:
            scalars = {f.factor()[0] for _, f in nonzero}
            common = scalars.pop() if len(scalars) == 1 else None
            if common is not None and common != ONE:
                nonzero = [(r, f.scale(ONE / common)) for r, f in nonzero]
            else:
                common = None
            plans.append(RowPlan(tuple(_grouped_terms(nonzero, allow_combos=True)), common))
    return Schedule(level=level, rows=tuple(plans), n_symbols=n_symbols, n_received=n_rx)


def count_decode(spec: CodeSpec, M: int, level: ScheduleLevel | str = ScheduleLevel.DENSE,
                 cost_model: CostModel = FOUR_MUL, include_c_mult: bool = True) -> OpCount:
    """Planned cost of the whole decode for ``spec`` with ``M`` receive antennas."""
    schedule = plan_schedule(symbolic_check_H(spec, M), level)
    plan = SigmaPlan(2 * M * spec.N, spec.c, include_c_mult)
    return schedule.decode_cost(plan, cost_model)


def formula(K: int, M: int, T: int, N: int, c: int = 1, sigma_variant: str = "2MT",
            cost_model: CostModel = FOUR_MUL) -> OpCount:
    """Closed-form count ``(1, 4KMT + S + 2K, 4KMT + S - 2K - 1)`` with ``S`` the sigma term.

    ``sigma_variant`` picks ``S = 2MN`` or ``S = 2MT``.  ``c`` is accepted for
    symmetry with the planner but does not enter the closed form.
    """
    for v in (K, M, T, N, c):
        if int(v) != v or v < 1:
            raise ValueError("formula arguments must be positive integers")
    if sigma_variant == "2MN":
        s = 2 * M * N
    elif sigma_variant == "2MT":
        s = 2 * M * T
    else:
        raise ValueError("sigma_variant must be '2MN' or '2MT'")
    core = 4 * K * M * T
    return OpCount(div=1, mul=core + s + 2 * K, add=core + s - 2 * K - 1).apply(cost_model)


# --------------------------------------------------------------------------
# Instrumented execution
# --------------------------------------------------------------------------


@dataclass
class OpCounter:
    """Per-execution accumulator; never shared between executions."""

    div: int = 0
    mul: int = 0
    add: int = 0

    def snapshot(self) -> OpCount:
        return OpCount(self.div, self.mul, self.add)


@dataclass(frozen=True)
class Counted:
    """Real scalar that records every arithmetic operation in ``counter``.

    Negation is free; ``+``/``-`` count one addition, ``*`` one
    multiplication and ``/`` one division, whether the other operand is a
    :class:`Counted` or a plain stored constant.
    """

    value: float
    counter: OpCounter = field(repr=False, compare=False)

    def _wrap(self, v):
        return Counted(v, self.counter)

    @staticmethod
    def _raw(other):
        return other.value if isinstance(other, Counted) else float(other)

    def __neg__(self):
        return self._wrap(-self.value)

    def __add__(self, other):
        self.counter.add += 1
        return self._wrap(self.value + self._raw(other))

    __radd__ = __add__

    def __sub__(self, other):
        self.counter.add += 1
        return self._wrap(self.value - self._raw(other))

    def __rsub__(self, other):
        self.counter.add += 1
        return self._wrap(self._raw(other) - self.value)

    def __mul__(self, other):
        self.counter.mul += 1
        return self._wrap(self.value * self._raw(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        self.counter.div += 1
        return self._wrap(self.value / self._raw(other))

    def __rtruediv__(self, other):
        self.counter.div += 1
        return self._wrap(self._raw(other) / self.value)

    def uncharged_scale(self, factor: float) -> "Counted":
        """Scale without recording an operation."""
        return self._wrap(self.value * factor)


def _signed_sum(values, inputs: Inputs):
    pos, sign = inputs[0]
    acc = values[pos] if sign > 0 else -values[pos]
    for pos, sign in inputs[1:]:
        acc = acc + values[pos] if sign > 0 else acc - values[pos]
    return acc


def _combo_value(h, weights):
    acc = None
    for idx, w in weights:
        term = h[idx - 1] if w.is_unit() else h[idx - 1] * w.value
        if w.sign() < 0 and w.is_unit():
            term = -term
        acc = term if acc is None else acc + term
    return acc


def _execute_row(row: RowPlan, h_raw, h, y):
    parts = []
    for term in row.terms:
        if isinstance(term, EntryTerm):
            stored = term.form.evaluate(h_raw)
            parts.append(y[term.position] * stored)
        elif isinstance(term, PureGroup):
            parts.append(h[term.symbol - 1] * _signed_sum(y, term.inputs))
        else:
            parts.append(_combo_value(h, term.weights) * _signed_sum(y, term.inputs))
    if not parts:
        return None
    acc = parts[0]
    for p in parts[1:]:
        acc = acc + p
    if row.common_scalar is not None:
        acc = acc * row.common_scalar.value
    return acc


def instrumented_execute(schedule: Schedule, h, y_check, sigma_plan: SigmaPlan,
                         cost_model: CostModel = FOUR_MUL, *, check: bool = True):
    """Run the schedule on counting scalars.

    Parameters
    ----------
    schedule : Schedule
    h : array_like
        Real channel vector ``h1..h_{2NM}`` (0-based).
    y_check : array_like
        Interleaved received vector.
    sigma_plan : SigmaPlan
    check : bool
        Raise :class:`CountMismatch` when the observed count differs from
        ``schedule.decode_cost``.

    Returns
    -------
    x_hat : ndarray
    observed : OpCount
    """
    h_raw = np.asarray(h, dtype=float)
    y_raw = np.asarray(y_check, dtype=float)
    if len(h_raw) != sigma_plan.n_symbols or len(y_raw) != schedule.n_received:
        raise ValueError("input sizes do not match the schedule")
    counter = OpCounter()
    hc = [Counted(float(v), counter) for v in h_raw]
    yc = [Counted(float(v), counter) for v in y_raw]

    ybar = [_execute_row(row, h_raw, hc, yc) for row in schedule.rows]

    sig = hc[0] * hc[0]
    for v in hc[1:]:
        sig = sig + v * v
    if sigma_plan.c > 1:
        sig = sig * sigma_plan.c if sigma_plan.include_c_mult else sig.uncharged_scale(sigma_plan.c)
    inv = 1.0 / sig
    x_hat = np.array([(inv * (v if v is not None else 0.0)).value for v in ybar])

    observed = counter.snapshot().apply(cost_model)
    if check:
        planned = schedule.decode_cost(sigma_plan, cost_model)
        if observed != planned:
            raise CountMismatch(f"planned {planned}, observed {observed}")
    return x_hat, observed


def count_simplified(spec: CodeSpec, M: int, L: int, level=ScheduleLevel.GROUPED,
                     cost_model: CostModel = FOUR_MUL, rng=None) -> OpCount:
    """Instrumented count of lattice decoding plus quantization on data drawn at size ``L``."""
    rng = np.random.default_rng(0) if rng is None else rng
    schedule = plan_schedule(symbolic_check_H(spec, M), level)
    h = rng.standard_normal(2 * spec.N * M) / np.sqrt(2)
    x = np.column_stack([rng.choice(Constellation(L).alphabet, spec.K) for _ in range(2)]).ravel()
    y = np.tensordot(h, lattice_basis(spec, M), axes=1) @ x
    x_hat, count = instrumented_execute(schedule, h, y, SigmaPlan(2 * M * spec.N, spec.c), cost_model)
    quantize(x_hat, L)  # comparisons are not charged
    return count


def count_tjc_naive(spec: CodeSpec, M: int, L: int, cost_model: CostModel = FOUR_MUL,
                    rng=None) -> OpCount:
    """Instrumented count of the unsimplified metric scanned over every candidate.

    ``r_k`` comes from the grouped schedule (its real and imaginary parts are
    the rows of ``H_check^T y_check``), then ``beta = c ||H||^2 - 1`` is
    formed once and for every symbol and every one of the ``4L^2`` candidates
    ``|s - r_k|^2 + beta |s|^2`` is evaluated, with ``|s|^2`` a stored
    constellation constant.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    schedule = plan_schedule(symbolic_check_H(spec, M), ScheduleLevel.GROUPED)
    h_raw = rng.standard_normal(2 * spec.N * M) / np.sqrt(2)
    x = Constellation(L).random_symbols(rng, spec.K)
    y_raw = np.tensordot(h_raw, lattice_basis(spec, M), axes=1) @ np.column_stack((x.real, x.imag)).ravel()

    counter = OpCounter()
    h = [Counted(float(v), counter) for v in h_raw]
    y = [Counted(float(v), counter) for v in y_raw]
    ybar = [_execute_row(row, h_raw, h, y) for row in schedule.rows]

    energy = h[0] * h[0]
    for v in h[1:]:
        energy = energy + v * v
    if spec.c > 1:
        energy = energy * spec.c
    beta = energy - 1.0

    points = Constellation(L).points()
    for k in range(spec.K):
        r_re, r_im = ybar[2 * k], ybar[2 * k + 1]
        best = None
        for s in points:
            d_re = r_re - s.real
            d_im = r_im - s.imag
            metric = d_re * d_re + d_im * d_im + beta * (s.real**2 + s.imag**2)
            if best is None or metric.value < best:
                best = metric.value
    return counter.snapshot().apply(cost_model)
