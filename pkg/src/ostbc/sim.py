"""Seeded Monte Carlo symbol-error-rate measurement over Rayleigh fading.

SNR convention: ``Es/N0`` with ``Es = 2(4L^2 - 1)/3``, the mean energy of
one complex symbol of the square constellation, and ``N0`` the variance of
each complex noise sample (``N0/2`` per real dimension).  No normalisation by
the number of transmit antennas or by ``c`` is applied.

Random streams: numpy ``PCG64`` seeded through ``SeedSequence(seed,
spawn_key=(point, block))``.  Trials are cut into blocks of
:data:`BLOCK_SIZE`; block ``b`` of SNR point ``p`` always draws from its own
stream, so results do not depend on how blocks are spread over workers.
Within a block the draws happen in a fixed order: symbol indices, channels,
noise, crosscheck selectors.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .codes import CodeSpec, encode, load_code
from .decode import Constellation, oracle_ml, quantize
from .lattice import lattice_basis

__all__ = [
    "BLOCK_SIZE",
    "DECODERS",
    "SimConfig",
    "SerRecord",
    "draw_channel",
    "transmit",
    "noise_variance",
    "run_monte_carlo",
    "records_to_csv",
]

BLOCK_SIZE = 1000
DECODERS = ("lattice", "trace")
CSV_COLUMNS = ("snr_db", "trials", "sym_errors", "ser", "crosschecks", "disagreements")


@dataclass(frozen=True)
class SimConfig:
    code: str = "G2"
    M: int = 1
    L: int = 2
    snr_db: tuple[float, ...] = (10.0, 20.0, 30.0)
    trials: int = 10_000
    seed: int = 0
    decoder: str = "lattice"
    crosscheck_fraction: float = 0.0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.M < 1 or self.L < 1:
            raise ValueError("M and L must be positive")
        if any(math.isnan(s) or s == -math.inf for s in self.snr_db):
            raise ValueError("SNR grid entries must be finite or +inf")
        if not 0.0 <= self.crosscheck_fraction <= 1.0:
            raise ValueError("crosscheck fraction must lie in [0, 1]")
        if self.decoder not in DECODERS:
            raise ValueError(f"decoder must be one of {DECODERS}")

    def header(self) -> str:
        snr = ",".join(_fmt(s) for s in self.snr_db)
        return (f"# code={self.code} M={self.M} L={self.L} trials={self.trials} seed={self.seed} "
                f"decoder={self.decoder} crosscheck={_fmt(self.crosscheck_fraction)} snr_db={snr} "
                f"snr_def=Es/N0 Es=2(4L^2-1)/3 rng=numpy-PCG64/SeedSequence(seed,(point,block)) "
                f"block={BLOCK_SIZE}")


@dataclass
class SerRecord:
    snr_db: float
    trials: int = 0
    symbol_errors: int = 0
    component_errors: int = 0
    symbols_per_trial: int = 1
    crosschecks: int = 0
    disagreements: int = 0
    ties: int = 0
    first_disagreement: dict | None = field(default=None, repr=False)

    @property
    def ser(self) -> float:
        """Symbol errors over transmitted complex symbols."""
        return self.symbol_errors / (self.trials * self.symbols_per_trial) if self.trials else 0.0


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def draw_channel(rng: np.random.Generator, N: int, M: int) -> np.ndarray:
    """``N x M`` i.i.d. circularly symmetric Gaussian entries with unit variance."""
    return (rng.standard_normal((N, M)) + 1j * rng.standard_normal((N, M))) / math.sqrt(2.0)


def transmit(spec: CodeSpec, H, s, N0: float, rng: np.random.Generator) -> np.ndarray:
    """``Y = G(s) H + V`` with complex noise of variance ``N0``.

    The noise is always drawn so the stream advances identically for every
    ``N0``; at ``N0 = 0`` it is scaled to exactly zero.
    """
    if N0 < 0:
        raise ValueError("N0 must be nonnegative")
    H = np.asarray(H, dtype=complex)
    shape = (spec.T, H.shape[1])
    V = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    Y = encode(spec, s) @ H
    if N0 > 0:
        Y = Y + math.sqrt(N0 / 2.0) * V
    return Y


def noise_variance(snr_db: float, L: int) -> float:
    if snr_db == math.inf:
        return 0.0
    return Constellation(L).symbol_energy / 10.0 ** (snr_db / 10.0)


def _batch_real(Z: np.ndarray) -> np.ndarray:
    """:func:`real_channel_vector` applied to a stack of matrices."""
    flat = np.swapaxes(Z, 1, 2).reshape(len(Z), -1)
    return np.stack((flat.real, flat.imag), axis=-1).reshape(len(Z), -1)


def _block_rng(seed: int, point: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(point, block))))


def _run_block(spec: CodeSpec, cfg: SimConfig, point: int, block: int, n: int) -> SerRecord:
    rng = _block_rng(cfg.seed, point, block)
    snr = cfg.snr_db[point]
    N0 = noise_variance(snr, cfg.L)
    alphabet = Constellation(cfg.L).alphabet
    K, N, T, M = spec.K, spec.N, spec.T, cfg.M

    idx = rng.integers(0, len(alphabet), size=(n, 2 * K))
    x = alphabet[idx]
    s = x[:, 0::2] + 1j * x[:, 1::2]
    Hs = (rng.standard_normal((n, N, M)) + 1j * rng.standard_normal((n, N, M))) / math.sqrt(2.0)
    V = rng.standard_normal((n, T, M)) + 1j * rng.standard_normal((n, T, M))
    picks = rng.random(n) < cfg.crosscheck_fraction

    G = np.einsum("bk,ktn->btn", s.real, spec.A_array) + 1j * np.einsum("bk,ktn->btn", s.imag, spec.B_array)
    Y = G @ Hs
    if N0 > 0:
        Y = Y + math.sqrt(N0 / 2.0) * V

    energy = np.sum(Hs.real**2 + Hs.imag**2, axis=(1, 2))
    if cfg.decoder == "lattice":
        h = _batch_real(Hs)
        checkH = np.einsum("bm,mrc->brc", h, lattice_basis(spec, M))
        yv = _batch_real(Y)
        x_hat = np.einsum("brc,br->bc", checkH, yv) / (spec.c * energy)[:, None]
        soft = x_hat[:, 0::2] + 1j * x_hat[:, 1::2]
    else:
        # trace form: Re/Im parts of P = Y H^H only
        re_p = np.einsum("btm,bnm->btn", Y.real, Hs.real) + np.einsum("btm,bnm->btn", Y.imag, Hs.imag)
        im_p = np.einsum("btm,bnm->btn", Y.imag, Hs.real) - np.einsum("btm,bnm->btn", Y.real, Hs.imag)
        num = np.einsum("ktn,btn->bk", spec.A_array, re_p) + 1j * np.einsum("ktn,btn->bk", spec.B_array, im_p)
        soft = num / (spec.c * energy)[:, None]

    hard = quantize(soft.real, cfg.L) + 1j * quantize(soft.imag, cfg.L)
    comp_err = (hard.real != s.real).astype(int) + (hard.imag != s.imag).astype(int)
    rec = SerRecord(snr_db=snr, trials=n, symbol_errors=int(np.count_nonzero(comp_err)),
                    component_errors=int(comp_err.sum()), symbols_per_trial=K)
    for b in np.flatnonzero(picks):
        res = oracle_ml(spec, Hs[b], Y[b], cfg.L)
        rec.crosschecks += 1
        if not res.unique:
            rec.ties += 1
            continue
        if not np.array_equal(res.symbols, hard[b]):
            rec.disagreements += 1
            if rec.first_disagreement is None:
                rec.first_disagreement = {"point": point, "trial": block * BLOCK_SIZE + int(b),
                                          "oracle": res.symbols.tolist(), "decoder": hard[b].tolist()}
    return rec


def _merge(parts: list[SerRecord], snr: float, K: int) -> SerRecord:
    out = SerRecord(snr_db=snr, symbols_per_trial=K)
    for p in parts:
        out.trials += p.trials
        out.symbol_errors += p.symbol_errors
        out.component_errors += p.component_errors
        out.crosschecks += p.crosschecks
        out.disagreements += p.disagreements
        out.ties += p.ties
        if out.first_disagreement is None:
            out.first_disagreement = p.first_disagreement
    return out


def run_monte_carlo(config: SimConfig, spec: CodeSpec | None = None) -> list[SerRecord]:
    """One :class:`SerRecord` per SNR point, reproducible from ``config.seed``."""
    spec = load_code(config.code) if spec is None else spec
    jobs = []
    for p in range(len(config.snr_db)):
        for b in range(math.ceil(config.trials / BLOCK_SIZE)):
            n = min(BLOCK_SIZE, config.trials - b * BLOCK_SIZE)
            jobs.append((p, b, n))
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(lambda j: _run_block(spec, config, *j), jobs))
    else:
        results = [_run_block(spec, config, *j) for j in jobs]
    records = []
    for p, snr in enumerate(config.snr_db):
        parts = [r for (jp, _, _), r in zip(jobs, results) if jp == p]
        records.append(_merge(parts, snr, spec.K))
    return records


def records_to_csv(config: SimConfig, records: list[SerRecord]) -> str:
    buf = io.StringIO()
    buf.write(config.header() + "\n")
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in records:
        buf.write(f"{_fmt(r.snr_db)},{r.trials},{r.symbol_errors},{_fmt(r.ser)},"
                  f"{r.crosschecks},{r.disagreements}\n")
    return buf.getvalue()
