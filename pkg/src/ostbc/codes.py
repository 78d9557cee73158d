"""Orthogonal space-time block codes with exact coefficients.

A code is stored in its real-linear form

    G(s) = sum_k Re(s_k) A_k + i Im(s_k) B_k

where every entry of ``A_k`` and ``B_k`` is a :class:`Coefficient`, i.e. a
small rational number optionally multiplied by ``1/sqrt(2)``.  Keeping the
entries exact lets the complexity planner reason about zeros, repeated
symbols and shared scalar factors without comparing floats.
"""

from __future__ import annotations

import json
import math
import re
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Coefficient",
    "CodeSpec",
    "CodeValidationError",
    "BUILTIN_NAMES",
    "builtin",
    "encode",
    "validate",
    "load_code",
    "code_from_json",
    "code_to_json",
    "from_display",
]

INV_SQRT2 = 1.0 / math.sqrt(2.0)

# Closed set of coefficient strings accepted in code-definition files.
JSON_COEFFICIENTS = ("0", "1", "-1", "1/2", "-1/2", "1/sqrt2", "-1/sqrt2", "2", "-2")


class CodeValidationError(ValueError):
    """Raised when a code fails the orthogonality check."""


@dataclass(frozen=True, order=False)
class Coefficient:
    """Exact scalar ``numerator/denominator * (1/sqrt2 if inv_sqrt2)``.

    Instances are normalised on construction: the fraction is reduced, the
    denominator is positive and zero is always ``Coefficient(0, 1, False)``.
    Code entries stay within numerators ``-2..2`` and denominators ``{1, 2}``;
    intermediate values produced by arithmetic may leave that range.
    """

    numerator: int
    denominator: int = 1
    inv_sqrt2: bool = False

    def __post_init__(self):
        if self.denominator == 0:
            raise ZeroDivisionError("coefficient denominator is zero")
        frac = Fraction(self.numerator, self.denominator)
        object.__setattr__(self, "numerator", frac.numerator)
        object.__setattr__(self, "denominator", frac.denominator)
        if frac == 0:
            object.__setattr__(self, "inv_sqrt2", False)

    @classmethod
    def from_fraction(cls, frac: Fraction, inv_sqrt2: bool = False) -> "Coefficient":
        return cls(frac.numerator, frac.denominator, inv_sqrt2)

    @classmethod
    def parse(cls, text: str) -> "Coefficient":
        """Parse ``"0"``, ``"-1/2"``, ``"1/sqrt2"`` and similar strings."""
        t = text.strip().replace(" ", "")
        flag = False
        for suffix in ("/sqrt2", "/sqrt(2)", "*sqrt2/2"):
            if t.endswith(suffix):
                t = t[: -len(suffix)]
                flag = True
                break
        try:
            frac = Fraction(t)
        except ValueError:
            raise ValueError(f"unsupported coefficient {text!r}") from None
        return cls.from_fraction(frac, flag)

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    @property
    def value(self) -> float:
        v = self.numerator / self.denominator
        return v * INV_SQRT2 if self.inv_sqrt2 else v

    def __float__(self) -> float:
        return self.value

    def is_zero(self) -> bool:
        return self.numerator == 0

    def is_unit(self) -> bool:
        """True for +1 and -1 (multiplication by these is free)."""
        return abs(self.numerator) == 1 and self.denominator == 1 and not self.inv_sqrt2

    def sign(self) -> int:
        return (self.numerator > 0) - (self.numerator < 0)

    def __abs__(self) -> "Coefficient":
        return Coefficient(abs(self.numerator), self.denominator, self.inv_sqrt2)

    def __neg__(self) -> "Coefficient":
        return Coefficient(-self.numerator, self.denominator, self.inv_sqrt2)

    def __add__(self, other: "Coefficient") -> "Coefficient":
        if not isinstance(other, Coefficient):
            return NotImplemented
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        if self.inv_sqrt2 != other.inv_sqrt2:
            raise ValueError(f"cannot add {self} and {other} exactly")
        return Coefficient.from_fraction(self.fraction + other.fraction, self.inv_sqrt2)

    def __sub__(self, other: "Coefficient") -> "Coefficient":
        return self + (-other)

    def __mul__(self, other) -> "Coefficient":
        if isinstance(other, int):
            other = Coefficient(other)
        if not isinstance(other, Coefficient):
            return NotImplemented
        frac = self.fraction * other.fraction
        if self.inv_sqrt2 and other.inv_sqrt2:
            return Coefficient.from_fraction(frac / 2)
        return Coefficient.from_fraction(frac, self.inv_sqrt2 or other.inv_sqrt2)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Coefficient":
        if isinstance(other, int):
            return Coefficient.from_fraction(self.fraction / other, self.inv_sqrt2)
        if not isinstance(other, Coefficient):
            return NotImplemented
        if other.is_zero():
            raise ZeroDivisionError("division by zero coefficient")
        frac = self.fraction / other.fraction
        if self.inv_sqrt2 == other.inv_sqrt2:
            return Coefficient.from_fraction(frac)
        if self.inv_sqrt2:
            # (a/sqrt2) / b
            return Coefficient.from_fraction(frac, True)
        # a / (b/sqrt2) = a*sqrt2/b = 2a/b * (1/sqrt2)
        return Coefficient.from_fraction(frac * 2, True)

    def __str__(self) -> str:
        rational = str(self.fraction)
        if not self.inv_sqrt2:
            return rational
        if self.denominator == 1:
            return f"{self.numerator}/sqrt2"
        return f"{self.numerator}/({self.denominator}*sqrt2)"

    def __repr__(self) -> str:
        return f"Coefficient({self})"


ZERO = Coefficient(0)
ONE = Coefficient(1)


Matrix = tuple[tuple[Coefficient, ...], ...]


def _as_matrix(rows: Iterable[Iterable]) -> Matrix:
    out = []
    for row in rows:
        out.append(tuple(c if isinstance(c, Coefficient) else Coefficient.parse(str(c)) for c in row))
    return tuple(out)


@dataclass(frozen=True)
class CodeSpec:
    """An OSTBC ``G = sum_k Re(s_k) A_k + i Im(s_k) B_k`` of size ``T x N``.

    Parameters
    ----------
    name : str
    N : int
        Transmit antennas (columns of the code matrix).
    T : int
        Block length in symbol periods (rows).
    K : int
        Complex symbols per block.
    c : int
        Gram gain, ``G^H G = c (sum |s_k|^2) I_N``.
    A, B : tuple of K ``T x N`` coefficient matrices
    """

    name: str
    N: int
    T: int
    K: int
    c: int
    A: tuple[Matrix, ...]
    B: tuple[Matrix, ...]

    def __post_init__(self):
        if min(self.N, self.T, self.K, self.c) < 1:
            raise ValueError("N, T, K and c must all be positive")
        if self.K > self.T:
            raise ValueError(f"rate K/T = {self.K}/{self.T} exceeds 1")
        object.__setattr__(self, "A", tuple(_as_matrix(m) for m in self.A))
        object.__setattr__(self, "B", tuple(_as_matrix(m) for m in self.B))
        for label, mats in (("A", self.A), ("B", self.B)):
            if len(mats) != self.K:
                raise ValueError(f"{label} must hold K={self.K} matrices, got {len(mats)}")
            for k, m in enumerate(mats):
                if len(m) != self.T or any(len(r) != self.N for r in m):
                    raise ValueError(f"{label}_{k + 1} is not {self.T}x{self.N}")

    @property
    def rate(self) -> Fraction:
        return Fraction(self.K, self.T)

    @cached_property
    def A_array(self) -> np.ndarray:
        """Numeric ``A`` as a ``(K, T, N)`` float array."""
        return np.array([[[c.value for c in row] for row in m] for m in self.A], dtype=float)

    @cached_property
    def B_array(self) -> np.ndarray:
        return np.array([[[c.value for c in row] for row in m] for m in self.B], dtype=float)

    def conjugate_linear(self) -> tuple[tuple[Matrix, ...], tuple[Matrix, ...]]:
        """Return ``(A_check, B_check)`` with ``G = sum s_k A_check_k + s_k^* B_check_k``."""
        return self._conjugate_linear

    @cached_property
    def _conjugate_linear(self):
        a_chk = tuple(
            tuple(tuple((a + b) / 2 for a, b in zip(ra, rb)) for ra, rb in zip(ma, mb))
            for ma, mb in zip(self.A, self.B)
        )
        b_chk = tuple(
            tuple(tuple((a - b) / 2 for a, b in zip(ra, rb)) for ra, rb in zip(ma, mb))
            for ma, mb in zip(self.A, self.B)
        )
        return a_chk, b_chk

    @classmethod
    def from_conjugate_linear(cls, name, N, T, K, c, a_check, b_check) -> "CodeSpec":
        A = [[[a + b for a, b in zip(ra, rb)] for ra, rb in zip(ma, mb)] for ma, mb in zip(a_check, b_check)]
        B = [[[a - b for a, b in zip(ra, rb)] for ra, rb in zip(ma, mb)] for ma, mb in zip(a_check, b_check)]
        return cls(name, N, T, K, c, A, B)


# --------------------------------------------------------------------------
# Built-in codes, written the way they are displayed (rows = time slots).
# --------------------------------------------------------------------------

_TERM = re.compile(r"([+-]?)s(\d+)(\*?)")


def _parse_entry(text: str, K: int) -> tuple[list[Coefficient], list[Coefficient]]:
    """Parse one displayed code entry into per-symbol ``A``/``B`` weights.

    Accepted forms: ``0``, ``s1``, ``-s2*``, ``s3/sqrt2``, ``(-s1-s1*+s2-s2*)/2``.
    ``s_k`` contributes ``(+w, +w)`` and ``s_k^*`` contributes ``(+w, -w)``.
    """
    t = text.replace(" ", "")
    a = [ZERO] * K
    b = [ZERO] * K
    if t == "0":
        return a, b
    scale = ONE
    if t.endswith("/sqrt2"):
        scale, t = Coefficient(1, 1, True), t[: -len("/sqrt2")]
    elif t.endswith("/2"):
        scale, t = Coefficient(1, 2), t[: -len("/2")]
    if t.startswith("(") and t.endswith(")"):
        t = t[1:-1]
    pos = 0
    for m in _TERM.finditer(t):
        if m.start() != pos:
            raise ValueError(f"cannot parse code entry {text!r}")
        pos = m.end()
        k = int(m.group(2)) - 1
        if not 0 <= k < K:
            raise ValueError(f"symbol index out of range in {text!r}")
        w = -scale if m.group(1) == "-" else scale
        a[k] = a[k] + w
        b[k] = b[k] + (-w if m.group(3) else w)
    if pos != len(t):
        raise ValueError(f"cannot parse code entry {text!r}")
    return a, b


def from_display(name: str, rows: Sequence[Sequence[str]], K: int, c: int) -> CodeSpec:
    """Build a :class:`CodeSpec` from a displayed ``T x N`` code matrix of strings."""
    T, N = len(rows), len(rows[0])
    A = [[[ZERO] * N for _ in range(T)] for _ in range(K)]
    B = [[[ZERO] * N for _ in range(T)] for _ in range(K)]
    for t, row in enumerate(rows):
        if len(row) != N:
            raise ValueError("ragged code display")
        for i, entry in enumerate(row):
            a, b = _parse_entry(entry, K)
            for k in range(K):
                A[k][t][i] = a[k]
                B[k][t][i] = b[k]
    return CodeSpec(name, N, T, K, c, A, B)


def _conj_rows(rows):
    def conj(e):
        out = []
        for sign, sym, star in _TERM.findall(e):
            out.append(f"{sign}s{sym}{'' if star else '*'}")
        return "".join(out)

    return [[conj(e) for e in r] for r in rows]


_G4_TOP = [
    ["s1", "s2", "s3", "s4"],
    ["-s2", "s1", "-s4", "s3"],
    ["-s3", "s4", "s1", "-s2"],
    ["-s4", "-s3", "s2", "s1"],
]

_DISPLAYS = {
    "G2": ([["s1", "s2"], ["-s2*", "s1*"]], 2, 1),
    "G3": ([r[:3] for r in _G4_TOP + _conj_rows(_G4_TOP)], 4, 2),
    "G4": (_G4_TOP + _conj_rows(_G4_TOP), 4, 2),
    "H3": (
        [
            ["s1", "s2", "s3/sqrt2"],
            ["-s2*", "s1*", "s3/sqrt2"],
            ["s3*/sqrt2", "s3*/sqrt2", "(-s1-s1*+s2-s2*)/2"],
            ["s3*/sqrt2", "-s3*/sqrt2", "(s2+s2*+s1-s1*)/2"],
        ],
        3,
        1,
    ),
}

BUILTIN_NAMES = tuple(_DISPLAYS)
_BUILTIN_CACHE: dict[str, CodeSpec] = {}


def builtin(name: str) -> CodeSpec:
    """Return one of the built-in codes ``G2``, ``G3``, ``G4`` or ``H3``."""
    try:
        rows, K, c = _DISPLAYS[name]
    except KeyError:
        raise KeyError(f"unknown code {name!r}; choose from {', '.join(BUILTIN_NAMES)}") from None
    if name not in _BUILTIN_CACHE:
        _BUILTIN_CACHE[name] = from_display(name, rows, K, c)
    return _BUILTIN_CACHE[name]


def encode(spec: CodeSpec, s) -> np.ndarray:
    """Map ``K`` complex symbols to the ``T x N`` transmit matrix."""
    s = np.asarray(s, dtype=complex)
    if s.shape != (spec.K,):
        raise ValueError(f"expected {spec.K} symbols, got shape {s.shape}")
    return np.tensordot(s.real, spec.A_array, axes=1) + 1j * np.tensordot(s.imag, spec.B_array, axes=1)


def validate(spec: CodeSpec, trials: int = 20, tol: float = 1e-9, rng=None) -> int:
    """Check ``G^H G = gamma I_N`` on random symbols and return the detected gain.

    The ratio ``gamma / sum|s_k|^2`` must be the same positive integer on every
    trial.  A mismatch with ``spec.c`` is reported with a warning, the detected
    value is returned.

    Raises
    ------
    CodeValidationError
        If a Gram matrix is not proportional to the identity, or the ratio
        varies between trials or is not an integer.
    """
    if trials < 1 or tol <= 0:
        raise ValueError("trials must be >= 1 and tol > 0")
    rng = np.random.default_rng(0) if rng is None else rng
    ratio = None
    for trial in range(trials):
        s = rng.standard_normal(spec.K) + 1j * rng.standard_normal(spec.K)
        g = encode(spec, s)
        gram = g.conj().T @ g
        energy = float(np.sum(np.abs(s) ** 2))
        scaled = gram / energy
        gamma = scaled[0, 0].real
        dev = np.abs(scaled - gamma * np.eye(spec.N))
        i, j = np.unravel_index(np.argmax(dev), dev.shape)
        if dev[i, j] > tol:
            kind = "off-diagonal" if i != j else "diagonal"
            raise CodeValidationError(
                f"{spec.name}: Gram matrix not proportional to identity in trial {trial}: "
                f"{kind} entry ({i + 1},{j + 1}) deviates by {dev[i, j]:.3g}"
            )
        if ratio is None:
            ratio = gamma
        elif abs(gamma - ratio) > tol:
            raise CodeValidationError(
                f"{spec.name}: gain ratio changed from {ratio:.12g} to {gamma:.12g} in trial {trial}"
            )
    c = round(ratio)
    if c < 1 or abs(ratio - c) > tol:
        raise CodeValidationError(f"{spec.name}: gain ratio {ratio:.12g} is not a positive integer")
    if c != spec.c:
        warnings.warn(f"{spec.name}: declared c={spec.c} but detected c={c}", stacklevel=2)
    return c


# --------------------------------------------------------------------------
# JSON code-definition files
# --------------------------------------------------------------------------


def code_from_json(obj: dict) -> CodeSpec:
    for key in ("name", "N", "T", "K", "c", "A", "B"):
        if key not in obj:
            raise ValueError(f"code definition is missing {key!r}")

    def conv(mats):
        out = []
        for m in mats:
            rows = []
            for row in m:
                cells = []
                for cell in row:
                    cell = str(cell).strip()
                    if cell not in JSON_COEFFICIENTS:
                        raise ValueError(f"coefficient {cell!r} not in {JSON_COEFFICIENTS}")
                    cells.append(Coefficient.parse(cell))
                rows.append(cells)
            out.append(rows)
        return out

    return CodeSpec(obj["name"], int(obj["N"]), int(obj["T"]), int(obj["K"]), int(obj["c"]),
                    conv(obj["A"]), conv(obj["B"]))


def code_to_json(spec: CodeSpec) -> dict:
    def conv(mats):
        return [[[str(c) for c in row] for row in m] for m in mats]

    return {"name": spec.name, "N": spec.N, "T": spec.T, "K": spec.K, "c": spec.c,
            "A": conv(spec.A), "B": conv(spec.B)}


def load_code(name_or_path: str) -> CodeSpec:
    """Resolve a built-in name or read a JSON code-definition file."""
    if name_or_path in _DISPLAYS:
        return builtin(name_or_path)
    path = Path(name_or_path)
    if not path.exists():
        raise KeyError(f"{name_or_path!r} is neither a built-in code nor a file")
    return code_from_json(json.loads(path.read_text()))
