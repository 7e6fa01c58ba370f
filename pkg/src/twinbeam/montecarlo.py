"""Seeded per-pulse simulation of source, tap, loss and detection.

Each pump pulse draws one thermal photon number per matched mode (shared
by both beams) and independent thermal numbers for every unmatched mode of
each beam.  Both beam totals are split binomially onto the tap detector,
which counts the pooled photons with efficiency ``eta_tap``; the through
beams are thinned by their detector efficiencies.

Runs are cut into fixed-size chunks.  Chunk ``k`` draws from a generator
derived only from ``(seed, k)``, so the thread count never changes the
records.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import (ConditionWindow, ConditioningError, PulseRecord,
                   ValidatedConfig, substream)

DEFAULT_CHUNK = 10_000
# geometric draws per internal batch, bounds memory for wide mode counts
_BATCH_DRAWS = 1 << 21


def sample_geometric(lam: float, rng: np.random.Generator, size=None):
    """Draw n with P(n) = (1 - lam) lam^n by inverse transform.

    n = floor(ln U / ln lam) with U uniform on (0, 1].
    """
    if not 0.0 <= lam < 1.0:
        raise ValueError("lam must lie in [0, 1)")
    if lam == 0.0:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    u = 1.0 - rng.random(size)
    out = np.floor(np.log(u) / math.log(lam))
    if size is None:
        return int(out)
    return out.astype(np.int64)


def sample_binomial(n: int, p: float, rng: np.random.Generator) -> int:
    """Exact Binomial(n, p) draw.

    Bit-by-bit for n <= 64, sequential inversion while n*min(p, 1-p) <= 30,
    otherwise numpy's BTPE accept-reject sampler.
    """
    if n < 0 or not 0.0 <= p <= 1.0:
        raise ValueError("need n >= 0 and p in [0,1]")
    if n == 0 or p == 0.0:
        return 0
    if p == 1.0:
        return n
    if n <= 64:
        return int(np.count_nonzero(rng.random(n) < p))
    q = min(p, 1.0 - p)
    if n * q <= 30:
        u = rng.random()
        odds = q / (1.0 - q)
        pk = (1.0 - q) ** n
        cdf = pk
        k = 0
        while u > cdf and k < n:
            pk *= (n - k) / (k + 1) * odds
            k += 1
            cdf += pk
        return k if p <= 0.5 else n - k
    return int(rng.binomial(n, p))


def _thin(counts, p, rng, gaussian=False):
    if not gaussian:
        return rng.binomial(counts, p)
    # rounded normal approximation, clamped to [0, n]
    mean = counts * p
    draw = rng.normal(mean, np.sqrt(mean * (1.0 - p)))
    return np.clip(np.rint(draw), 0, counts).astype(np.int64)


def _mode_sums(lam, modes, size, rng):
    """Row sums of a (size, modes) matrix of geometric draws."""
    total = np.zeros(size, dtype=np.int64)
    if modes == 0 or lam == 0.0:
        return total
    rows = max(1, _BATCH_DRAWS // modes)
    for start in range(0, size, rows):
        stop = min(size, start + rows)
        total[start:stop] = sample_geometric(lam, rng, (stop - start, modes)).sum(axis=1)
    return total


@dataclass(frozen=True)
class Chunk:
    d_s: np.ndarray
    d_i: np.ndarray
    n_c: np.ndarray
    noise: Optional[np.ndarray] = None


def generate_chunk(cfg: ValidatedConfig, rng: np.random.Generator, size: int,
                   fast_binomial: bool = False) -> Chunk:
    """Vectorized counterpart of :func:`generate_pulse` for ``size`` pulses."""
    src, ch = cfg.source, cfg.channel
    lam = cfg.lam
    shared = _mode_sums(lam, src.matched_modes, size, rng)
    n_s = shared + _mode_sums(lam, src.unmatched_modes, size, rng)
    n_i = shared + _mode_sums(lam, src.unmatched_modes, size, rng)

    tap_s = _thin(n_s, ch.tap_ratio, rng, fast_binomial)
    tap_i = _thin(n_i, ch.tap_ratio, rng, fast_binomial)
    n_c = _thin(tap_s + tap_i, ch.eta_tap, rng, fast_binomial)
    d_s = _thin(n_s - tap_s, ch.eta_signal, rng, fast_binomial)
    d_i = _thin(n_i - tap_i, ch.eta_idler, rng, fast_binomial)

    noise = None
    if ch.read_noise_sd > 0:
        noise = rng.normal(0.0, ch.read_noise_sd, size=(size, 3))
    return Chunk(d_s.astype(np.int64), d_i.astype(np.int64),
                 n_c.astype(np.int64), noise)


def generate_pulse(cfg: ValidatedConfig, rng: np.random.Generator) -> PulseRecord:
    """Simulate one pulse with the scalar samplers.

    Read noise is not part of the integer record; see :class:`Ensemble`.
    """
    src, ch = cfg.source, cfg.channel
    lam = cfg.lam
    shared = sum(sample_geometric(lam, rng) for _ in range(src.matched_modes))
    n_s = shared + sum(sample_geometric(lam, rng) for _ in range(src.unmatched_modes))
    n_i = shared + sum(sample_geometric(lam, rng) for _ in range(src.unmatched_modes))
    tap_s = sample_binomial(n_s, ch.tap_ratio, rng)
    tap_i = sample_binomial(n_i, ch.tap_ratio, rng)
    n_c = sample_binomial(tap_s + tap_i, ch.eta_tap, rng)
    d_s = sample_binomial(n_s - tap_s, ch.eta_signal, rng)
    d_i = sample_binomial(n_i - tap_i, ch.eta_idler, rng)
    return PulseRecord(d_s, d_i, n_c)


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Per-pulse detected counts.

    Integer counts are never modified; when read noise is enabled its
    Gaussian perturbations live in ``noise`` (columns d_s, d_i, n_c) and the
    ``signal``/``idler``/``tap`` views include them.
    """

    d_s: np.ndarray
    d_i: np.ndarray
    n_c: np.ndarray
    seed: int
    config_digest: str
    noise: Optional[np.ndarray] = None
    acceptance: float = 1.0
    parent_count: Optional[int] = None
    window: Optional[ConditionWindow] = field(default=None)

    @property
    def pulse_count(self) -> int:
        return int(self.d_s.shape[0])

    def __len__(self):
        return self.pulse_count

    def __getitem__(self, i) -> PulseRecord:
        return PulseRecord(int(self.d_s[i]), int(self.d_i[i]), int(self.n_c[i]))

    @property
    def records(self) -> list:
        return [self[i] for i in range(self.pulse_count)]

    def _view(self, col, arr):
        if self.noise is None:
            return arr.astype(np.float64)
        return arr + self.noise[:, col]

    @property
    def signal(self) -> np.ndarray:
        return self._view(0, self.d_s)

    @property
    def idler(self) -> np.ndarray:
        return self._view(1, self.d_i)

    @property
    def tap(self) -> np.ndarray:
        return self._view(2, self.n_c)

    @property
    def is_empty(self) -> bool:
        return self.pulse_count == 0

    def identical(self, other: "Ensemble") -> bool:
        same_noise = (self.noise is None and other.noise is None) or (
            self.noise is not None and other.noise is not None
            and np.array_equal(self.noise, other.noise))
        return (self.seed == other.seed and self.config_digest == other.config_digest
                and np.array_equal(self.d_s, other.d_s)
                and np.array_equal(self.d_i, other.d_i)
                and np.array_equal(self.n_c, other.n_c) and same_noise)

    def to_csv(self, fh=None, digest_line: bool = True) -> Optional[str]:
        """Write ``pulse,d_s,d_i,n_c`` rows (plus noisy columns when present)."""
        own = fh is None
        if own:
            fh = io.StringIO()
        if digest_line:
            fh.write(f"# config_digest={self.config_digest} seed={self.seed}\n")
        w = csv.writer(fh, lineterminator="\n")
        header = ["pulse", "d_s", "d_i", "n_c"]
        if self.noise is not None:
            header += ["d_s_noisy", "d_i_noisy", "n_c_noisy"]
        w.writerow(header)
        if self.noise is None:
            for k in range(self.pulse_count):
                w.writerow([k, int(self.d_s[k]), int(self.d_i[k]), int(self.n_c[k])])
        else:
            s, i, c = self.signal, self.idler, self.tap
            for k in range(self.pulse_count):
                w.writerow([k, int(self.d_s[k]), int(self.d_i[k]), int(self.n_c[k]),
                            f"{s[k]:.12g}", f"{i[k]:.12g}", f"{c[k]:.12g}"])
        return fh.getvalue() if own else None


def run_ensemble(cfg: ValidatedConfig, seed: int, pulses: int,
                 chunk_size: int = DEFAULT_CHUNK, threads: int = 1,
                 fast_binomial: bool = False) -> Ensemble:
    """Generate ``pulses`` records; identical for any ``threads`` value."""
    if pulses < 1:
        raise ValueError("pulses must be >= 1")
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    sizes = [min(chunk_size, pulses - start) for start in range(0, pulses, chunk_size)]

    def work(index):
        return generate_chunk(cfg, substream(seed, index), sizes[index], fast_binomial)

    try:
        if threads > 1 and len(sizes) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                chunks = list(pool.map(work, range(len(sizes))))
        else:
            chunks = [work(k) for k in range(len(sizes))]
    except MemoryError as exc:
        raise MemoryError(
            f"not enough memory for {pulses} pulses x {cfg.source.total_modes} modes; "
            "lower chunk_size or pulses") from exc

    noise = None
    if chunks[0].noise is not None:
        noise = np.concatenate([c.noise for c in chunks])
    return Ensemble(
        d_s=np.concatenate([c.d_s for c in chunks]),
        d_i=np.concatenate([c.d_i for c in chunks]),
        n_c=np.concatenate([c.n_c for c in chunks]),
        seed=int(seed),
        config_digest=cfg.digest(),
        noise=noise,
        parent_count=pulses,
    )


@dataclass(frozen=True)
class TapSummary:
    mean_tap: float
    sd_tap: float


def tap_statistics(e: Ensemble) -> TapSummary:
    """Mean and unbiased standard deviation of the tap count."""
    if e.pulse_count < 2:
        raise ValueError("tap statistics need at least 2 pulses")
    tap = e.tap
    return TapSummary(float(tap.mean()), float(tap.std(ddof=1)))


def apply_condition(e: Ensemble, w: ConditionWindow,
                    tap: Optional[TapSummary] = None) -> Ensemble:
    """Keep the pulses whose tap count falls in the closed window.

    The result records its acceptance ratio; an empty result is returned
    as an empty ensemble rather than raised.
    """
    if tap is None:
        tap = tap_statistics(e)
    if math.isinf(w.width_sigma):
        keep = np.ones(e.pulse_count, dtype=bool)
    else:
        if not tap.sd_tap > 0:
            raise ConditioningError("tap count has zero spread; window has zero width")
        lo, hi = w.bounds(tap.mean_tap, tap.sd_tap)
        t = e.tap
        keep = (t >= lo) & (t <= hi)
    kept = int(keep.sum())
    return replace(
        e,
        d_s=e.d_s[keep], d_i=e.d_i[keep], n_c=e.n_c[keep],
        noise=None if e.noise is None else e.noise[keep],
        acceptance=kept / e.pulse_count if e.pulse_count else 0.0,
        parent_count=e.pulse_count,
        window=w,
    )
