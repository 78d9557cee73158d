"""Real-valued lattice representation of an OSTBC link.

Everything here follows the chain

    y = F_a s_bar + F_b s_tilde + v          (complex, MT rows)
    y' = F' s' + v'                          (real, stacked Re/Im)
    y_check = P_y y',  x = P_s s'
    H_check = P_y F' P_s^T

with ``H_check^T H_check = sigma I`` and ``sigma = c ||H||^2``.  The lattice
matrix is produced twice from the same construction: numerically, and over
symbolic real channel components ``h1 .. h_{2NM}`` so the complexity planner
can inspect its structure.

Permutations are stored as 0-based gather maps: ``y_check = y_prime[perm_y]``
and ``x = s_prime[perm_s]``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from math import gcd
from typing import Mapping

import numpy as np

from .codes import ONE, ZERO, CodeSpec, Coefficient

__all__ = [
    "LinearForm",
    "ChannelRealization",
    "LatticeSystem",
    "real_channel_vector",
    "channel_from_real_vector",
    "vectorize_received",
    "build_F",
    "build_F_prime",
    "permutations",
    "symbolic_check_H",
    "lattice_basis",
    "build_check_H",
    "sigma",
    "format_symbolic",
    "parse_linear_form",
]


class LinearForm:
    """A linear combination ``sum_i w_i h_i`` of real channel symbols.

    Symbols are 1-based, as in ``h1 .. h_{2NM}``; weights are exact
    :class:`Coefficient` values.  Instances are immutable and hashable.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[int, Coefficient] | None = None):
        items = {}
        for idx, w in (terms or {}).items():
            if not w.is_zero():
                items[int(idx)] = w
        self._terms = tuple(sorted(items.items()))

    @classmethod
    def symbol(cls, index: int, weight: Coefficient = ONE) -> "LinearForm":
        return cls({index: weight})

    @property
    def terms(self) -> tuple[tuple[int, Coefficient], ...]:
        return self._terms

    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self):
        return len(self._terms)

    def __eq__(self, other):
        return isinstance(other, LinearForm) and self._terms == other._terms

    def __hash__(self):
        return hash(self._terms)

    def __add__(self, other: "LinearForm") -> "LinearForm":
        acc = dict(self._terms)
        for idx, w in other._terms:
            acc[idx] = acc.get(idx, ZERO) + w
        return LinearForm(acc)

    def __neg__(self) -> "LinearForm":
        return LinearForm({i: -w for i, w in self._terms})

    def __sub__(self, other: "LinearForm") -> "LinearForm":
        return self + (-other)

    def scale(self, c: Coefficient) -> "LinearForm":
        return LinearForm({i: w * c for i, w in self._terms})

    def evaluate(self, h) -> float:
        """Value at the real channel vector ``h`` (0-based array of length 2NM)."""
        return sum(w.value * h[i - 1] for i, w in self._terms)

    def factor(self) -> tuple[Coefficient, "LinearForm"]:
        """Split into ``scalar * form`` with a positive scalar.

        The scalar carries the gcd of the numerators, a factor 1/2 when every
        weight has denominator 2 and 1/sqrt2 when every weight has it.  The
        remaining form has the signs.  The zero form factors as ``(0, 0)``.
        """
        if not self._terms:
            return ZERO, self
        ws = [w for _, w in self._terms]
        num = 0
        for w in ws:
            num = gcd(num, abs(w.numerator))
        den = 2 if all(w.denominator == 2 for w in ws) else 1
        flag = all(w.inv_sqrt2 for w in ws)
        scalar = Coefficient(num, den, flag)
        return scalar, LinearForm({i: w / scalar for i, w in self._terms})

    def __str__(self) -> str:
        return format_symbolic(self)

    def __repr__(self) -> str:
        return f"LinearForm({self})"


def _format_sum(form: LinearForm) -> str:
    parts = []
    for n, (idx, w) in enumerate(form.terms):
        mag = abs(w)
        body = f"h{idx}" if mag == ONE else f"{mag}*h{idx}"
        if w.sign() < 0:
            parts.append(f"-{body}")
        else:
            parts.append(body if n == 0 else f"+{body}")
    return "".join(parts)


def format_symbolic(form: LinearForm) -> str:
    """Stable text for one entry: ``0``, ``-h2``, ``h5/sqrt2``, ``-(h1+h3)/sqrt2``."""
    if form.is_zero():
        return "0"
    scalar, inner = form.factor()
    if scalar == ONE:
        return _format_sum(inner)
    if all(w.sign() < 0 for _, w in inner.terms):
        sign, inner = "-", -inner
    else:
        sign = ""
    body = _format_sum(inner)
    if len(inner) > 1:
        body = f"({body})"
    if scalar.numerator == 1:
        suffix = "/sqrt2" if scalar.inv_sqrt2 else ""
        if scalar.denominator != 1:
            suffix = f"/{scalar.denominator}" + suffix
        return sign + body + suffix
    return f"{sign}{scalar}*{body}"


_FORM_TERM = re.compile(r"([+-]?)h(\d+)")


def parse_linear_form(text: str) -> LinearForm:
    """Parse the text produced by :func:`format_symbolic` (and hand-written variants).

    Accepts ``0``, ``h3``, ``-h6/sqrt2``, ``(h1+h3)/sqrt2``, ``-(h1+h3)/sqrt2``
    and ``(-h1+h3)/sqrt2``.
    """
    t = text.replace(" ", "")
    if t in ("0", "-0"):
        return LinearForm()
    scale = ONE
    if t.endswith("/sqrt2"):
        scale, t = Coefficient(1, 1, True), t[: -len("/sqrt2")]
    elif t.endswith("/2"):
        scale, t = Coefficient(1, 2), t[:-2]
    if t.startswith("-(") and t.endswith(")"):
        scale, t = -scale, t[2:-1]
    elif t.startswith("(") and t.endswith(")"):
        t = t[1:-1]
    acc: dict[int, Coefficient] = {}
    pos = 0
    for m in _FORM_TERM.finditer(t):
        if m.start() != pos:
            raise ValueError(f"cannot parse entry {text!r}")
        pos = m.end()
        idx = int(m.group(2))
        w = -scale if m.group(1) == "-" else scale
        acc[idx] = acc.get(idx, ZERO) + w
    if pos != len(t) or not acc:
        raise ValueError(f"cannot parse entry {text!r}")
    return LinearForm(acc)


# --------------------------------------------------------------------------
# Channel and received-signal vectors
# --------------------------------------------------------------------------


def real_channel_vector(H) -> np.ndarray:
    """``h_{2i-1+2(j-1)N} = Re h_ij``, ``h_{2i+2(j-1)N} = Im h_ij`` (0-based array)."""
    H = np.asarray(H, dtype=complex)
    flat = H.T.ravel()
    return np.column_stack((flat.real, flat.imag)).ravel()


def channel_from_real_vector(h, N: int, M: int) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.shape != (2 * N * M,):
        raise ValueError(f"expected {2 * N * M} real channel components, got {h.shape}")
    z = h[0::2] + 1j * h[1::2]
    return z.reshape(M, N).T.copy()


@dataclass(frozen=True)
class ChannelRealization:
    """Complex channel ``H`` (``N x M``; transmit ``i`` to receive ``j``)."""

    H: np.ndarray

    def __post_init__(self):
        H = np.array(self.H, dtype=complex)
        if H.ndim != 2:
            raise ValueError("channel matrix must be 2-D")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    @classmethod
    def from_real_vector(cls, h, N: int, M: int) -> "ChannelRealization":
        return cls(channel_from_real_vector(h, N, M))

    @property
    def N(self) -> int:
        return self.H.shape[0]

    @property
    def M(self) -> int:
        return self.H.shape[1]

    @property
    def real_vector(self) -> np.ndarray:
        return real_channel_vector(self.H)


def _as_channel(H) -> np.ndarray:
    return H.H if isinstance(H, ChannelRealization) else np.asarray(H, dtype=complex)


def vectorize_received(Y) -> np.ndarray:
    """Stack the columns of ``Y`` and interleave ``(Re, Im)`` per entry."""
    Y = np.asarray(Y, dtype=complex)
    if Y.ndim == 1:
        Y = Y[:, None]
    return real_channel_vector(Y)


# --------------------------------------------------------------------------
# F, F' and permutations
# --------------------------------------------------------------------------


def build_F(spec: CodeSpec, H) -> tuple[np.ndarray, np.ndarray]:
    """``F_a = [vec(A_k H)]``, ``F_b = [i vec(B_k H)]``, each ``MT x K``."""
    H = _as_channel(H)
    if H.ndim != 2 or H.shape[0] != spec.N:
        raise ValueError(f"channel must have {spec.N} rows (transmit antennas), got shape {H.shape}")
    AH = np.einsum("ktn,nm->kmt", spec.A_array, H)  # k, column j, row t
    BH = np.einsum("ktn,nm->kmt", spec.B_array, H)
    Fa = AH.reshape(spec.K, -1).T
    Fb = 1j * BH.reshape(spec.K, -1).T
    return Fa, Fb


def build_F_prime(Fa, Fb) -> np.ndarray:
    """Real ``2MT x 2K`` matrix ``[[Re F_a, Re F_b], [Im F_a, Im F_b]]``."""
    Fa = np.asarray(Fa, dtype=complex)
    Fb = np.asarray(Fb, dtype=complex)
    return np.block([[Fa.real, Fb.real], [Fa.imag, Fb.imag]])


def permutations(M: int, T: int, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Gather maps with ``y_check = y_prime[perm_y]`` and ``x = s_prime[perm_s]``."""
    n = M * T
    perm_y = np.empty(2 * n, dtype=int)
    perm_y[0::2] = np.arange(n)
    perm_y[1::2] = np.arange(n) + n
    perm_s = np.empty(2 * K, dtype=int)
    perm_s[0::2] = np.arange(K)
    perm_s[1::2] = np.arange(K) + K
    return perm_y, perm_s


@lru_cache(maxsize=None)
def symbolic_check_H(spec: CodeSpec, M: int) -> tuple[tuple[LinearForm, ...], ...]:
    """Lattice matrix over symbols ``h1..h_{2NM}``, built exactly like the numeric one."""
    N, T, K = spec.N, spec.T, spec.K

    def h_sym(i, j):
        re_idx = 2 * i + 2 * j * N + 1
        return LinearForm.symbol(re_idx), LinearForm.symbol(re_idx + 1)

    def vec_mat_times_H(mat):
        # vec(mat @ H) as (re, im) pairs; mat has real Coefficient entries.
        out = []
        for j in range(M):
            for t in range(T):
                re_acc, im_acc = LinearForm(), LinearForm()
                for i in range(N):
                    w = mat[t][i]
                    if w.is_zero():
                        continue
                    hr, hi = h_sym(i, j)
                    re_acc = re_acc + hr.scale(w)
                    im_acc = im_acc + hi.scale(w)
                out.append((re_acc, im_acc))
        return out

    fa = [vec_mat_times_H(spec.A[k]) for k in range(K)]
    # i * (re + i im) = -im + i re
    fb = [[(-im, re) for re, im in vec_mat_times_H(spec.B[k])] for k in range(K)]
    rows = M * T
    f_prime = [[None] * (2 * K) for _ in range(2 * rows)]
    for k in range(K):
        for r in range(rows):
            f_prime[r][k] = fa[k][r][0]
            f_prime[r][K + k] = fb[k][r][0]
            f_prime[rows + r][k] = fa[k][r][1]
            f_prime[rows + r][K + k] = fb[k][r][1]
    perm_y, perm_s = permutations(M, T, K)
    return tuple(tuple(f_prime[perm_y[r]][perm_s[c]] for c in range(2 * K)) for r in range(2 * rows))


@lru_cache(maxsize=None)
def _basis(spec: CodeSpec, M: int) -> np.ndarray:
    sym = symbolic_check_H(spec, M)
    n_h = 2 * spec.N * M
    basis = np.zeros((n_h, len(sym), 2 * spec.K))
    for r, row in enumerate(sym):
        for c, form in enumerate(row):
            for idx, w in form.terms:
                basis[idx - 1, r, c] = w.value
    basis.setflags(write=False)
    return basis


def lattice_basis(spec: CodeSpec, M: int) -> np.ndarray:
    """Array ``S`` of shape ``(2NM, 2MT, 2K)`` with ``H_check = sum_m h_m S[m]``.

    Handy for building lattice matrices of many channels at once.
    """
    return _basis(spec, M)


def sigma(spec: CodeSpec, H) -> float:
    """``sigma = c * sum of squared real channel components``."""
    h = real_channel_vector(_as_channel(H))
    return float(spec.c * np.dot(h, h))


@dataclass(frozen=True)
class LatticeSystem:
    """Every representation of one (code, channel) pair."""

    spec: CodeSpec
    channel: ChannelRealization
    F_a: np.ndarray
    F_b: np.ndarray
    F_prime: np.ndarray
    perm_y: np.ndarray
    perm_s: np.ndarray
    check_H: np.ndarray
    symbolic_H: tuple[tuple[LinearForm, ...], ...]
    sigma: float

    @property
    def M(self) -> int:
        return self.channel.M

    def evaluate_symbolic(self) -> np.ndarray:
        h = self.channel.real_vector
        return np.array([[f.evaluate(h) for f in row] for row in self.symbolic_H])


def build_check_H(spec: CodeSpec, H) -> LatticeSystem:
    """Construct ``F_a, F_b, F'``, the permutations and ``H_check = P_y F' P_s^T``."""
    channel = H if isinstance(H, ChannelRealization) else ChannelRealization(H)
    Fa, Fb = build_F(spec, channel.H)
    Fp = build_F_prime(Fa, Fb)
    perm_y, perm_s = permutations(channel.M, spec.T, spec.K)
    check_H = Fp[perm_y][:, perm_s]
    for arr in (Fa, Fb, Fp, perm_y, perm_s, check_H):
        arr.setflags(write=False)
    return LatticeSystem(
        spec=spec,
        channel=channel,
        F_a=Fa,
        F_b=Fb,
        F_prime=Fp,
        perm_y=perm_y,
        perm_s=perm_s,
        check_H=check_H,
        symbolic_H=symbolic_check_H(spec, channel.M),
        sigma=sigma(spec, channel.H),
    )
