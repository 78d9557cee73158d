"""Maximum-likelihood decoders for OSTBCs.

Four matched-filter formulations produce the same soft estimate:

* :func:`decode_trace` works on the code's ``A_k``/``B_k`` matrices directly,
* :func:`decode_complex_matched` uses ``Re[F^H y]``,
* :func:`decode_real_matched` uses ``F'^T y'``,
* :func:`decode_lattice` uses ``H_check^T y_check / sigma``,

and :func:`decode_tjc` evaluates the per-symbol decision statistic ``r_k``
of the classical OSTBC metric.  Hard decisions come from :func:`quantize`,
applied per real component.  :func:`oracle_ml` searches the full symbol space
and is kept independent of all of the above.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .codes import CodeSpec, encode
from .lattice import LatticeSystem, build_F, vectorize_received

log = logging.getLogger(__name__)

__all__ = [
    "DegenerateChannelError",
    "SearchSpaceTooLarge",
    "Constellation",
    "DecodeOutcome",
    "quantize",
    "hard_decision",
    "decode_trace",
    "trace_numerators",
    "decode_complex_matched",
    "decode_real_matched",
    "decode_lattice",
    "decode_tjc",
    "tjc_statistics",
    "metric_tjc_naive",
    "oracle_ml",
    "OracleResult",
    "interleave",
    "deinterleave",
    "ORACLE_LIMIT",
    "Comparison",
    "compare_decoders",
    "decode",
]

ORACLE_LIMIT = 10**7


class DegenerateChannelError(ZeroDivisionError):
    """The channel has zero energy, so ``sigma = c ||H||^2 = 0``."""


class SearchSpaceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Constellation:
    """Square QAM built from the odd-integer alphabet ``{+-1, +-3, ..., +-(2L-1)}``."""

    L: int

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be a positive integer")

    @property
    def alphabet(self) -> np.ndarray:
        pos = np.arange(1, 2 * self.L, 2)
        return np.concatenate((-pos[::-1], pos)).astype(float)

    @property
    def mean_square(self) -> float:
        """Mean of ``x^2`` over the real alphabet, ``(4L^2 - 1)/3``."""
        return (4 * self.L**2 - 1) / 3

    @property
    def symbol_energy(self) -> float:
        """Mean ``|s|^2`` of one complex symbol."""
        return 2 * self.mean_square

    def points(self) -> np.ndarray:
        a = self.alphabet
        return (a[:, None] + 1j * a[None, :]).ravel()

    def random_symbols(self, rng, size) -> np.ndarray:
        a = self.alphabet
        re = rng.integers(0, len(a), size=size)
        im = rng.integers(0, len(a), size=size)
        return a[re] + 1j * a[im]


def quantize(z, L: int):
    """Nearest element of ``{+-1, ..., +-(2L-1)}``.

    Ties (``z`` an even integer) go to the smaller magnitude; ``z = 0`` maps
    to ``+1``.  Works elementwise on arrays.
    """
    arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("cannot quantize non-finite values")
    q = 2.0 * np.floor(arr / 2.0) + 1.0
    tie_down = (arr > 0) & (arr == np.round(arr)) & (np.mod(arr, 2.0) == 0.0)
    q = np.where(tie_down, q - 2.0, q)
    q = np.clip(q, -(2 * L - 1), 2 * L - 1)
    return float(q) if q.ndim == 0 else q


def hard_decision(soft, L: int) -> np.ndarray:
    """Quantize complex soft estimates per real component."""
    soft = np.asarray(soft, dtype=complex)
    return quantize(soft.real, L) + 1j * quantize(soft.imag, L)


def interleave(s) -> np.ndarray:
    """``(Re s_1, Im s_1, Re s_2, ...)``."""
    s = np.asarray(s, dtype=complex)
    return np.column_stack((s.real, s.imag)).ravel()


def deinterleave(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[0::2] + 1j * x[1::2]


@dataclass(frozen=True)
class DecodeOutcome:
    soft: np.ndarray
    hard: np.ndarray
    residual: float | None = None

    @property
    def x_hat(self) -> np.ndarray:
        return interleave(self.soft)


def _energy(H) -> float:
    H = np.asarray(H, dtype=complex)
    e = float(np.sum(H.real**2 + H.imag**2))
    if e == 0.0:
        raise DegenerateChannelError("channel has zero energy")
    return e


def _check_received(spec: CodeSpec, H, Y):
    H = np.asarray(H, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    if Y.ndim == 1:
        Y = Y[:, None]
    if H.shape[0] != spec.N or Y.shape != (spec.T, H.shape[1]):
        raise ValueError(f"shape mismatch: H {H.shape}, Y {Y.shape} for a {spec.T}x{spec.N} code")
    return H, Y


def trace_numerators(spec: CodeSpec, H, Y) -> np.ndarray:
    """``Re Tr(H^H A_k^H Y) + i Im Tr(H^H B_k^H Y)`` for every k.

    Only the real part of the first trace and the imaginary part of the second
    are formed: with ``P = Y H^H`` (``T x N``) the traces reduce to
    ``sum A_k * Re(P)`` and ``sum B_k * Im(P)``.
    """
    H, Y = _check_received(spec, H, Y)
    re_p = Y.real @ H.real.T + Y.imag @ H.imag.T
    im_p = Y.imag @ H.real.T - Y.real @ H.imag.T
    re_part = np.einsum("ktn,tn->k", spec.A_array, re_p)
    im_part = np.einsum("ktn,tn->k", spec.B_array, im_p)
    return re_part + 1j * im_part


def decode_trace(spec: CodeSpec, H, Y) -> np.ndarray:
    """Soft estimates ``s_hat_k`` from the trace form, divided by ``c ||H||^2``."""
    H = np.asarray(H, dtype=complex)
    return trace_numerators(spec, H, Y) / (spec.c * _energy(H))


def decode_complex_matched(spec: CodeSpec, H, y) -> np.ndarray:
    """``Re[F^H y] / (c ||H||^2)`` ordered ``(s_bar_1..s_bar_K, s_tilde_1..s_tilde_K)``.

    ``y`` is ``vec(Y)`` (length ``MT``); a ``T x M`` matrix is accepted too.
    """
    H = np.asarray(H, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if y.ndim == 2:
        y = y.T.ravel()
    Fa, Fb = build_F(spec, H)
    F = np.hstack((Fa, Fb))
    if y.shape != (F.shape[0],):
        raise ValueError(f"received vector must have length {F.shape[0]}")
    return (F.real.T @ y.real + F.imag.T @ y.imag) / (spec.c * _energy(H))


def decode_real_matched(system: LatticeSystem, y_prime) -> np.ndarray:
    """``F'^T y' / (c ||H||^2)`` with ``y' = (Re y; Im y)``."""
    y_prime = np.asarray(y_prime, dtype=float)
    if system.sigma == 0.0:
        raise DegenerateChannelError("channel has zero energy")
    return system.F_prime.T @ y_prime / system.sigma


def decode_lattice(system: LatticeSystem, y_check) -> np.ndarray:
    """``x_hat = H_check^T y_check / sigma``, interleaved ``(Re s_1, Im s_1, ...)``."""
    y_check = np.asarray(y_check, dtype=float)
    if system.sigma == 0.0:
        raise DegenerateChannelError("sigma is zero")
    return system.check_H.T @ y_check / system.sigma


def tjc_statistics(spec: CodeSpec, H, Y) -> np.ndarray:
    """Decision statistics ``r_k``, summed row by row over the code.

    For each row ``t`` in which ``s_k`` appears, an occurrence of ``s_k`` in
    column ``i`` contributes ``w * conj(h_ij) * y_tj`` and an occurrence of
    ``s_k^*`` contributes ``w * h_ij * conj(y_tj)``, where ``w`` is the signed
    weight of the occurrence (``+-1`` for plain codes).
    """
    H, Y = _check_received(spec, H, Y)
    a_chk, b_chk = spec.conjugate_linear()
    M = H.shape[1]
    r = np.zeros(spec.K, dtype=complex)
    for k in range(spec.K):
        rows = [t for t in range(spec.T)
                if any(not w.is_zero() for w in a_chk[k][t]) or any(not w.is_zero() for w in b_chk[k][t])]
        acc = 0j
        for t in rows:
            for i in range(spec.N):
                wa = a_chk[k][t][i]
                wb = b_chk[k][t][i]
                for j in range(M):
                    if not wa.is_zero():
                        acc += wa.value * np.conj(H[i, j]) * Y[t, j]
                    if not wb.is_zero():
                        acc += wb.value * H[i, j] * np.conj(Y[t, j])
        r[k] = acc
    return r


def decode_tjc(spec: CodeSpec, H, Y) -> np.ndarray:
    """``s_hat_k = r_k / (c ||H||^2)``."""
    H = np.asarray(H, dtype=complex)
    return tjc_statistics(spec, H, Y) / (spec.c * _energy(H))


def metric_tjc_naive(spec: CodeSpec, H, Y, k: int, candidate: complex, r=None) -> float:
    """``|s - r_k|^2 + (c sum|h_ij|^2 - 1) |s|^2`` for symbol ``k`` (0-based).

    Pass precomputed statistics ``r`` to avoid recomputing them per candidate.
    """
    H = np.asarray(H, dtype=complex)
    r_k = (tjc_statistics(spec, H, Y) if r is None else r)[k]
    energy = float(np.sum(np.abs(H) ** 2))
    s = complex(candidate)
    return abs(s - r_k) ** 2 + (spec.c * energy - 1.0) * abs(s) ** 2


# --------------------------------------------------------------------------
# Exhaustive oracle
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleResult:
    symbols: np.ndarray
    metric: float
    unique: bool
    runner_up: float = field(default=np.inf)


@lru_cache(maxsize=8)
def _candidate_grid(K: int, L: int) -> np.ndarray:
    """All real vectors of length 2K over the alphabet, in lexicographic order.

    The order is lexicographic in ``(Re s_1, Im s_1, Re s_2, ...)``.
    """
    alphabet = Constellation(L).alphabet
    grid = np.array(list(itertools.product(alphabet, repeat=2 * K)), dtype=float)
    grid.setflags(write=False)
    return grid


def _received_basis(spec: CodeSpec, H) -> np.ndarray:
    """Received signal for each unit real symbol component, ``(2K, T*M)`` complex."""
    rows = []
    for k in range(spec.K):
        for unit in (1.0, 1j):
            s = np.zeros(spec.K, dtype=complex)
            s[k] = unit
            rows.append((encode(spec, s) @ H).ravel())
    return np.array(rows)


def _quadratic(spec: CodeSpec, H, Y):
    E = _received_basis(spec, H)
    y = Y.ravel()
    Q = (E.conj() @ E.T).real
    b = (E.conj() @ y).real
    return Q, b, float(np.vdot(y, y).real)


def oracle_ml(spec: CodeSpec, H, Y, L: int, *, method: str = "auto", limit: int = ORACLE_LIMIT,
              exhaustive_limit: int = 1 << 12, tol: float = 1e-9) -> OracleResult:
    """Minimiser of ``||Y - G(s) H||^2`` over every symbol vector in ``(Omega^2)^K``.

    The codeword response is built from :func:`codes.encode` one real
    dimension at a time, and the metric is written as
    ``||Y||^2 - 2 x^T b + x^T Q x`` with ``Q`` and ``b`` computed numerically
    from that response; no orthogonality is assumed.

    ``method="exhaustive"`` scores every candidate and refuses spaces larger
    than ``limit``.  ``method="pruned"`` is a depth-first enumeration that
    discards a branch only when its partial metric already exceeds the two
    best complete candidates, so it returns the same minimiser and runner-up.
    ``"auto"`` scans exhaustively up to ``exhaustive_limit`` candidates.

    Ties are broken by the lexicographic order of the interleaved real symbol
    vector; ``unique`` is False when the runner-up is within ``tol``
    (relative) of the best metric.
    """
    H, Y = _check_received(spec, H, Y)
    size = (2 * L) ** (2 * spec.K)
    if method == "auto":
        method = "exhaustive" if size <= exhaustive_limit else "pruned"
    if method == "exhaustive":
        if size > limit:
            raise SearchSpaceTooLarge(f"{size} candidates exceed the oracle limit {limit}")
        best, second = _exhaustive(spec, H, Y, L)
    elif method == "pruned":
        best, second = _pruned(spec, H, Y, L)
    else:
        raise ValueError(f"unknown oracle method {method!r}")
    metric_best, x = best
    scale = max(abs(metric_best), 1.0)
    unique = (second - metric_best) > tol * scale
    if not unique:
        log.info("oracle tie: best %.12g runner-up %.12g", metric_best, second)
    return OracleResult(symbols=deinterleave(x), metric=float(metric_best), unique=bool(unique),
                        runner_up=float(second))


def _pruned(spec: CodeSpec, H, Y, L: int):
    Q, b, y2 = _quadratic(spec, H, Y)
    n = len(b)
    R = np.linalg.cholesky(Q).T  # Q = R^T R, R upper triangular
    z = np.linalg.solve(Q, b)
    offset = y2 - float(z @ Q @ z)  # metric(x) = offset + ||R (x - z)||^2
    alphabet = Constellation(L).alphabet
    x = np.zeros(n)
    top: list[tuple[float, tuple]] = []  # two best (distance, x) pairs

    def bound():
        return top[1][0] if len(top) == 2 else np.inf

    def visit(level: int, partial: float):
        rdiag = R[level, level]
        centre = z[level] - R[level, level + 1:] @ (x[level + 1:] - z[level + 1:]) / rdiag
        for v in sorted(alphabet, key=lambda a: (abs(a - centre), a)):
            d = partial + (rdiag * (v - centre)) ** 2
            if d > bound():
                break
            x[level] = v
            if level == 0:
                top.append((d, tuple(x)))
                top.sort()
                del top[2:]
            else:
                visit(level - 1, d)

    visit(n - 1, 0.0)
    best = (offset + top[0][0], np.array(top[0][1]))
    second = offset + top[1][0] if len(top) > 1 else np.inf
    return best, second


def _exhaustive(spec: CodeSpec, H, Y, L: int, chunk: int = 1 << 16):
    Q, b, y2 = _quadratic(spec, H, Y)
    grid = _candidate_grid(spec.K, L)
    metric_best, idx = np.inf, -1
    second = np.inf
    for start in range(0, len(grid), chunk):
        X = grid[start:start + chunk]
        metric = y2 - 2.0 * (X @ b) + np.sum((X @ Q) * X, axis=1)
        i = int(np.argmin(metric))
        m = metric[i]
        rest = np.delete(metric, i)
        chunk_second = rest.min() if rest.size else np.inf
        if m < metric_best:
            second = min(metric_best, chunk_second)
            metric_best, idx = m, start + i
        else:
            second = min(second, m)
    return (float(metric_best), grid[idx].copy()), float(second)


def decode(system: LatticeSystem, Y, L: int) -> DecodeOutcome:
    """Lattice decode plus per-component quantization."""
    x_hat = decode_lattice(system, vectorize_received(Y))
    soft = deinterleave(x_hat)
    return DecodeOutcome(soft=soft, hard=hard_decision(soft, L))


@dataclass
class Comparison:
    """Soft estimates of every decoder for one received block, as complex ``s_hat``."""

    soft: dict[str, np.ndarray]
    hard: np.ndarray
    oracle: OracleResult | None
    max_rel_diff: float

    @property
    def oracle_agrees(self) -> bool | None:
        if self.oracle is None or not self.oracle.unique:
            return None
        return bool(np.array_equal(self.oracle.symbols, self.hard))


def compare_decoders(spec: CodeSpec, H, Y, L: int, *, run_oracle: bool = True) -> Comparison:
    """Run the trace, complex, real, lattice and r_k decoders plus the oracle.

    Orderings are reconciled before comparison: ``s'`` outputs are paired as
    ``s_bar_k + i s_tilde_k`` and the interleaved lattice output as
    ``x_{2k-1} + i x_{2k}``.  ``max_rel_diff`` is the largest deviation from the
    lattice estimate relative to ``max(1, max|s_hat|)``.
    """
    from .lattice import build_check_H

    H, Y = _check_received(spec, H, Y)
    system = build_check_H(spec, H)
    y = Y.T.ravel()
    y_prime = np.concatenate((y.real, y.imag))
    K = spec.K
    s_c = decode_complex_matched(spec, H, y)
    s_r = decode_real_matched(system, y_prime)
    soft = {
        "lattice": deinterleave(decode_lattice(system, vectorize_received(Y))),
        "trace": decode_trace(spec, H, Y),
        "complex": s_c[:K] + 1j * s_c[K:],
        "real": s_r[:K] + 1j * s_r[K:],
        "tjc": decode_tjc(spec, H, Y),
    }
    ref = soft["lattice"]
    scale = max(1.0, float(np.max(np.abs(ref))))
    diff = max(float(np.max(np.abs(v - ref))) for v in soft.values()) / scale
    oracle = oracle_ml(spec, H, Y, L) if run_oracle else None
    return Comparison(soft=soft, hard=hard_decision(ref, L), oracle=oracle, max_rel_diff=diff)
