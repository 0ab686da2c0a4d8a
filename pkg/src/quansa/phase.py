"""Phase-estimation outcome laws and the unbiased phase estimator.

The register distribution of textbook phase estimation is known in closed
form, so the simulator never builds the circuit: it draws outcomes from the
exact law and spends its effort where the statistics are subtle -- the
shift-scan detector that turns biased phase estimation into an exactly
unbiased one while keeping the eigenvector intact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from quansa.qcore import RandomSource

# The estimator runs phase estimation on an 8x oversampled register and scans
# phase shifts in steps of 1/(16 t').  128 steps cover one full period of the
# scaled remainder, so exactly one detection window is swept whatever the
# input phase is.
OVERSAMPLE = 8
SHIFT_COUNT = 128

# Detection accepts a cell only when its sub-grid fraction pins the remainder
# to [5/8, 3/4); on the 8x register that singles out one residue class.
MARK_RESIDUE = 5

# Frequency cutoff between "hot" adjacent cells (true weight >= 0.22) and
# every other cell (true weight <= 0.11); see the two-sided weight bounds
# tested in test_phase / the acceptance suite.
DETECT_THRESHOLD = 0.17


def pe_point(offset, t: int):
    """Weight of a register outcome ``offset`` grid cells away from the phase.

    ``offset`` is ``phase * t - index`` (any real); the weight is
    ``(sin(pi d) / (t sin(pi d / t)))**2``, periodic in d with period t and
    -> 1 as d -> 0 (the on-grid case).  Accepts scalars or arrays.
    """
    d = np.atleast_1d(np.asarray(offset, dtype=float))
    r = np.mod(d + t / 2.0, t) - t / 2.0
    num = np.sin(np.pi * r)
    den = t * np.sin(np.pi * r / t)
    out = np.ones_like(r)
    np.divide(num, den, out=out, where=(den != 0.0))
    out = out * out
    # nonzero integer offsets are exact zeros of the law; snap them so
    # on-grid phases yield exact point masses
    out[(r == np.round(r)) & (r != 0.0)] = 0.0
    return float(out[0]) if np.isscalar(offset) else out


def pe_distribution(theta, t: int) -> np.ndarray:
    """Outcome distribution of t-point phase estimation at eigenphase theta."""
    if t < 1:
        raise ValueError(f"register size must be positive, got {t}")
    p = pe_point(float(theta) * t - np.arange(t), t)
    total = p.sum()
    assert abs(total - 1.0) < 1e-9
    return p / total


def pe_sample(theta, t: int, rng: RandomSource) -> int:
    """One register outcome of t-point phase estimation."""
    return rng.choice(pe_distribution(theta, t))


def as_phase_fraction(theta) -> Fraction:
    """Exact rational phase in [0, 1); float inputs convert exactly."""
    th = Fraction(theta)
    if not 0 <= th < 1:
        raise ValueError(f"phase {theta} outside [0, 1)")
    return th


def split_phase(theta: Fraction, t: int) -> tuple[Fraction, Fraction]:
    """Split ``theta = head + tail / t`` with head on the 1/t grid, tail in [0, 1)."""
    scaled = theta * t
    whole = math.floor(scaled)
    return Fraction(whole, t), scaled - whole


@dataclass
class UPEResult:
    """Outcome of one unbiased phase estimation run."""

    estimate: float
    detected: bool
    restored: bool
    controlled_ops: int
    shifts_scanned: int


@lru_cache(maxsize=4096)
def _shift_table(theta: Fraction, t: int):
    """Detection geometry of the shift scan at exact phase ``theta``.

    For shift index k the register sees phase theta + k/(16 t').  A shift can
    fire only when the oversampled integer part lands in the marked residue
    class, and then only on the two cells straddling the true value: every
    other cell sits at or below the cold weight cutoff, where crossing the
    detection threshold has probability < 1e-9 at the smallest rep count in
    use.  Rows are None for shifts that cannot fire, else
    ``(p_lo, p_hi, est_miss, est_hit, remainder)`` where est_miss/est_hit are
    the two possible estimator outputs (coin 0 / coin 1) and remainder is the
    exact coin bias.
    """
    tp = OVERSAMPLE * t
    rows = []
    for k in range(SHIFT_COUNT):
        phi = Fraction(k, 16 * tp)
        g = (theta + phi) * tp
        cell = math.floor(g)
        if cell % OVERSAMPLE != MARK_RESIDUE:
            rows.append(None)
            continue
        delta = g - cell
        p_lo = pe_point(float(delta), tp)
        if p_lo >= 1.0 - 1e-15:
            # on (or within float eps of) an oversampled grid point: the
            # neighbor cell carries no weight, so this pair cannot fire
            rows.append(None)
            continue
        p_hi = pe_point(float(delta) - 1.0, tp)
        measured = cell % tp
        head = Fraction(measured // OVERSAMPLE, t)
        remainder = (MARK_RESIDUE + delta) / OVERSAMPLE
        est_miss = float(head - phi)
        est_hit = float(head + Fraction(1, t) - phi)
        rows.append((p_lo, p_hi, est_miss, est_hit, float(remainder)))
    return tuple(rows)


def upe(theta, t: int, eps: float, rng: RandomSource) -> UPEResult:
    """Unbiased estimate of an eigenphase, eigenvector kept intact.

    Scans phase shifts until plain phase estimation pins the shifted phase to
    one oversampled cell (two adjacent outcome frequencies above the
    detection threshold, sub-grid fraction in the marked window), then
    resolves the remainder into a single coin whose bias equals it.  The
    returned estimate satisfies E[estimate] = theta exactly (modulo 1 --
    phases within a shift of the wraparound may resolve to theta - 1), with
    |estimate - theta| <= 1/t on detection.

    When no shift fires (probability below ~1e-5 at the default scan), the
    estimate falls back to 0.0 with ``detected=False``.  ``restored`` is
    always True: every branch leaves the eigenvector unchanged.

    ``controlled_ops`` charges t' walk applications per phase-estimation rep
    on the oversampled register, for every shift scanned, plus the
    remainder-to-coin conversion cost on detection.
    """
    th = as_phase_fraction(theta)
    if t < 8 or t & (t - 1):
        raise ValueError(f"register size must be a power of two >= 8, got {t}")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps {eps} outside (0, 1)")
    tp = OVERSAMPLE * t
    reps = math.ceil(200.0 * math.log(72.0 * tp / eps))
    thresh = math.ceil(DETECT_THRESHOLD * reps - 1e-9)
    table = _shift_table(th, t)
    ops = 0
    for k, row in enumerate(table):
        ops += reps * tp
        if row is None:
            continue
        p_lo, p_hi, est_miss, est_hit, remainder = row
        n_lo = rng.binomial(reps, p_lo)
        if n_lo < thresh:
            continue
        n_hi = rng.binomial(reps - n_lo, min(1.0, p_hi / (1.0 - p_lo)))
        if n_hi < thresh:
            continue
        ops += t * math.ceil(math.log(4.0 / eps))
        hit = rng.bernoulli(remainder)
        return UPEResult(
            estimate=est_hit if hit else est_miss,
            detected=True,
            restored=True,
            controlled_ops=ops,
            shifts_scanned=k + 1,
        )
    return UPEResult(
        estimate=0.0,
        detected=False,
        restored=True,
        controlled_ops=ops,
        shifts_scanned=SHIFT_COUNT,
    )
