"""Nondestructive amplitude estimation, from single coins to unbiased output.

The chain goes: a Marriott-Watrous coin flip samples a projector without
losing the state; amplitude estimation run on the Grover iterate has a known
two-peak outcome law; amplified uncomputation turns a median of such runs
into a nondestructive (still biased) estimate; linear amplification plus
phase conversion and the unbiased phase estimator remove the bias.  Every
stochastic step draws from exact outcome laws -- large registers are handled
through windows around the peaks, never materialized in full.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import binom

from quansa.phase import pe_point, upe
from quansa.qcore import DEGEN_TOL, RandomSource

# Estimation grid of one amplitude-estimation run at time parameter t; the
# 2*pi factor is what turns the raw two-peak error bound into
# sqrt(p(1-p))/t + 1/t^2.
AE_GRID_FACTOR = 2.0 * math.pi

# Median bank size coefficient: ceil(18 ln(2/eta)) runs drive the
# off-peak median probability below eta/2 with a wide Chernoff margin.
MEDIAN_LOG_COEFF = 18.0

# The median register of the bank is concentrated on at most two adjacent
# grid values, so its collision probability sum(G^2) stays far above 1/8.
UNCOMP_OVERLAP_LB = 0.125

# Estimates at or below 1/(4t^2) are reported as exactly zero.  The first
# nonzero grid value sin^2(pi/M) always sits under this cutoff (M >= 2 pi t),
# so tiny amplitudes collapse to 0 rather than to a spurious floor value.
#   zero cutoff = 1 / (4 t^2)

# Outcome-law windows keep +-64 grid cells around the peaks: the mass beyond
# the window is below 0.01, so the median of any bank in use escapes it with
# probability under 1e-40 (folded into the edge cells, not renormalized).
AE_WINDOW = 64
_CHUNK = 1 << 19

# Dense cap for the public outcome-law constructor; estimation paths use the
# windowed tables and have no size limit.
AE_DENSE_CAP = 1 << 16

# A restoration loop this long means the simulation parameters are broken,
# not unlucky: the probability is below exp(-1e5) anywhere in use.
RESTORE_CAP = 10**6


def _check_prob(p: float, name: str = "p") -> float:
    p = float(p)
    if not -DEGEN_TOL <= p <= 1.0 + DEGEN_TOL:
        raise ValueError(f"{name} = {p} outside [0, 1]")
    return min(max(p, 0.0), 1.0)


@dataclass
class CoinResult:
    """One nondestructive Bernoulli sample and its restoration record."""

    outcome: bool
    iterations: int
    reflections: int
    restored: bool


def coin_flip(p: float, rng: RandomSource) -> CoinResult:
    """Sample b with E[b] = p while restoring the measured state.

    The first projective measurement yields the coin; the state is then
    bounced between the projector basis and the state basis until it
    reprojects onto the original.  Each loop iteration succeeds with
    probability 2p(1-p), and the unconditional expected number of
    iterations is exactly 1 for every nondegenerate p.  ``reflections``
    counts two per measurement pair: 2 + 2 * iterations.
    """
    p = _check_prob(p)
    if p <= DEGEN_TOL or p >= 1.0 - DEGEN_TOL:
        # the state is an eigenvector of the projector: the coin is
        # deterministic and the first reprojection cannot fail
        return CoinResult(outcome=p >= 0.5, iterations=0, reflections=2, restored=True)
    outcome = rng.bernoulli(p)
    if rng.bernoulli(p if outcome else 1.0 - p):
        return CoinResult(outcome=outcome, iterations=0, reflections=2, restored=True)
    iterations = rng.geometric(2.0 * p * (1.0 - p))
    if iterations > RESTORE_CAP:
        raise RuntimeError(f"restoration loop exceeded {RESTORE_CAP} iterations")
    return CoinResult(
        outcome=outcome,
        iterations=iterations,
        reflections=2 + 2 * iterations,
        restored=True,
    )


def _folded_masses(center: float, m: int, idx: np.ndarray) -> np.ndarray:
    """Mass of folded register outcomes ``idx`` for peak offset ``center``.

    The register law is an equal mixture of the two rotation directions,
    folded by i <-> m - i onto indices 0..m//2; the mixture makes each
    folded mass pe(center - i) + pe(center + i), halved at the self-paired
    indices 0 and m/2.
    """
    out = pe_point(center - idx, m) + pe_point(center + idx, m)
    self_paired = (idx == 0) | (2 * idx == m)
    out[self_paired] *= 0.5
    return out


def _left_mass(center: float, m: int, i_lo: int) -> float:
    """Total folded mass strictly below index ``i_lo``, summed in chunks."""
    total = 0.0
    for start in range(0, i_lo, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, i_lo))
        total += float(_folded_masses(center, m, idx).sum())
    return total


def ae_grid(t: float) -> int:
    """Register size of one amplitude-estimation run at time parameter t."""
    if not t >= 1.0:
        raise ValueError(f"time parameter must be >= 1, got {t}")
    return max(2, math.ceil(AE_GRID_FACTOR * t))


def ae_distribution(p: float, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact outcome law of one amplitude-estimation run on a t-cell register.

    Returns ``(values, probs)`` over the folded estimates
    ``sin^2(pi i / t)`` for i = 0..t//2.  Degenerate amplitudes give exact
    point masses (at 0, and at 1 for even t).
    """
    p = _check_prob(p)
    if not isinstance(t, (int, np.integer)) or t < 2:
        raise ValueError(f"register size must be an integer >= 2, got {t}")
    if t > AE_DENSE_CAP:
        raise ValueError(f"register size {t} above dense cap {AE_DENSE_CAP}")
    theta = math.asin(math.sqrt(p)) / math.pi
    idx = np.arange(t // 2 + 1)
    probs = _folded_masses(theta * t, t, idx)
    assert abs(float(probs.sum()) - 1.0) < 1e-9
    values = np.sin(np.pi * idx / t) ** 2
    return values, probs


@dataclass
class UncompResult:
    """Sample surfaced through amplified uncomputation."""

    sample: float
    restored: bool
    rounds: int


def _uncomp_rounds(overlap_lb: float, eta: float) -> int:
    return math.ceil(math.log(4.0 / eta) / math.sqrt(overlap_lb))


def amplified_uncomputation(
    values,
    probs,
    overlap_lb: float,
    eta: float,
    rng: RandomSource,
) -> UncompResult:
    """Sample a subroutine outcome while reprojecting onto its input state.

    Success (probability exactly 1 - eta here, the contract floor) returns a
    draw from the collision-tilted law pi^2 / sum(pi^2) with the state
    restored; failure returns a draw from the one-shot residual law
    pi(1-pi), normalized, with ``restored=False``.  A deterministic
    subroutine leaves nothing entangled, so it restores surely and consumes
    no randomness.  ``rounds`` is the fixed-point amplification schedule
    length ceil(ln(4/eta) / sqrt(overlap_lb)).
    """
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if values.shape != probs.shape or probs.ndim != 1 or probs.size == 0:
        raise ValueError("values/probs must be matching nonempty 1-D arrays")
    if probs.min() < -1e-12 or abs(float(probs.sum()) - 1.0) > 1e-9:
        raise ValueError("probs must be a probability distribution")
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta {eta} outside (0, 1)")
    collision = float((probs * probs).sum())
    if not 0.0 < overlap_lb <= collision + 1e-9:
        raise ValueError(
            f"overlap bound {overlap_lb} invalid (collision probability {collision})"
        )
    rounds = _uncomp_rounds(overlap_lb, eta)
    top = int(np.argmax(probs))
    if probs[top] >= 1.0 - DEGEN_TOL:
        return UncompResult(sample=float(values[top]), restored=True, rounds=rounds)
    failed = rng.bernoulli(eta)
    weights = probs * (1.0 - probs) if failed else probs * probs
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    i = int(np.searchsorted(cdf, rng.uniform(), side="right"))
    return UncompResult(
        sample=float(values[min(i, values.size - 1)]),
        restored=not failed,
        rounds=rounds,
    )


@dataclass
class NDAEResult:
    """Biased-but-bounded amplitude estimate with restoration record."""

    estimate: float
    restored: bool
    reflections: int


@dataclass(frozen=True)
class _MedianTable:
    """Cached outcome law of the median bank at one (p, grid, bank) triple."""

    values: np.ndarray
    mode_value: float
    mode_mass: float
    success_cdf: np.ndarray
    fail_cdf: np.ndarray
    collision: float


@lru_cache(maxsize=512)
def _median_table(p: float, m_ae: int, m_med: int) -> _MedianTable:
    theta = math.asin(math.sqrt(p)) / math.pi
    center = theta * m_ae
    half = m_ae // 2
    mid = min(half, max(0, round(center)))
    i_lo = max(0, mid - AE_WINDOW)
    i_hi = min(half, mid + AE_WINDOW)
    idx = np.arange(i_lo, i_hi + 1)
    masses = _folded_masses(center, m_ae, idx)
    left = _left_mass(center, m_ae, i_lo) if i_lo > 0 else 0.0
    cum = np.clip(left + np.cumsum(masses), 0.0, 1.0)

    # median of m_med draws: P[median <= v_i] = P[Bin(m_med, cdf_i) >= rank];
    # the (negligible) off-window median mass folds into the edge cells
    rank = (m_med + 1) // 2
    upper = binom.sf(rank - 1, m_med, cum)
    g = np.diff(upper, prepend=0.0)
    g[-1] += 1.0 - upper[-1]
    g = np.clip(g, 0.0, None)

    values = np.sin(np.pi * idx / m_ae) ** 2
    g_sq = g * g
    fail_w = g * (1.0 - g)
    collision = float(g_sq.sum())
    success_cdf = np.cumsum(g_sq)
    success_cdf /= success_cdf[-1]
    fail_total = float(fail_w.sum())
    if fail_total > 0.0:
        fail_cdf = np.cumsum(fail_w) / fail_total
    else:
        fail_cdf = success_cdf
    top = int(np.argmax(g))
    for arr in (values, success_cdf, fail_cdf):
        arr.flags.writeable = False
    return _MedianTable(
        values=values,
        mode_value=float(values[top]),
        mode_mass=float(g[top]),
        success_cdf=success_cdf,
        fail_cdf=fail_cdf,
        collision=collision,
    )


def _draw(values: np.ndarray, cdf: np.ndarray, rng: RandomSource) -> float:
    i = int(np.searchsorted(cdf, rng.uniform(), side="right"))
    return float(values[min(i, values.size - 1)])


def ndae(p: float, t: float, eta: float, rng: RandomSource) -> NDAEResult:
    """Nondestructive amplitude estimate within sqrt(p(1-p))/t + 1/t^2.

    Simulates the median of ceil(18 ln(2/eta)) amplitude-estimation runs on
    a ceil(2 pi t)-cell grid, surfaced through amplified uncomputation: with
    probability 1 - eta/2 the output is a collision-tilted median draw and
    the state is restored, otherwise a residual-law draw with
    ``restored=False``.  Outputs at or below 1/(4t^2) are reported as
    exactly 0, which is what makes the zero rule for p <= 1/(4t^2) hold.
    A degenerate outcome law short-circuits deterministically.

    ``reflections`` charges the procedure rate ceil(2 t ln(1/eta)); the
    simulation's own bank replication is not the metered quantity.
    """
    p = _check_prob(p)
    if not (isinstance(t, (int, float, np.floating, np.integer)) and math.isfinite(t)):
        raise ValueError(f"time parameter must be finite, got {t}")
    if not t >= 1.0:
        raise ValueError(f"time parameter must be >= 1, got {t}")
    if not 0.0 < eta < 0.5:
        raise ValueError(f"eta {eta} outside (0, 1/2)")
    m_ae = ae_grid(t)
    m_med = math.ceil(MEDIAN_LOG_COEFF * math.log(2.0 / eta))
    m_med += 1 - (m_med & 1)  # odd bank, unique middle order statistic
    reflections = math.ceil(2.0 * t * math.log(1.0 / eta))
    zero_cutoff = 1.0 / (4.0 * t * t)

    table = _median_table(p, m_ae, m_med)
    if table.mode_mass >= 1.0 - DEGEN_TOL:
        value = table.mode_value
        return NDAEResult(
            estimate=0.0 if value <= zero_cutoff else value,
            restored=True,
            reflections=reflections,
        )
    if table.collision < UNCOMP_OVERLAP_LB:
        raise ValueError(
            f"median collision probability {table.collision} below "
            f"{UNCOMP_OVERLAP_LB}; uncomputation bound does not hold"
        )
    failed = rng.bernoulli(0.5 * eta)
    value = _draw(table.values, table.fail_cdf if failed else table.success_cdf, rng)
    return NDAEResult(
        estimate=0.0 if value <= zero_cutoff else value,
        restored=not failed,
        reflections=reflections,
    )


@dataclass
class AmplifyResult:
    """Outcome of applying the linear amplifier V_tau to a known amplitude."""

    amplitude: float
    p_amp: float
    reflections_per_application: int
    clamped: bool


def linear_amplify(
    p: float, tau: float, eps: float, adversarial: bool = False
) -> AmplifyResult:
    """Amplitude after the degree-O(tau log(1/eps)) linear amplifier.

    Exact mode maps sqrt(p) -> tau sqrt(p); adversarial mode adds the full
    tolerance eps on the amplitude (the worst-case sign, fixed).  Requires
    tau sqrt(p) <= 1/2 when tau > 1.
    """
    p = _check_prob(p)
    if not tau >= 1.0:
        raise ValueError(f"amplification factor must be >= 1, got {tau}")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps {eps} outside (0, 1)")
    root = tau * math.sqrt(p)
    if tau > 1.0 and root > 0.5 + 1e-12:
        raise ValueError(f"tau sqrt(p) = {root} above 1/2; amplifier is not linear there")
    amplitude = root + (eps if adversarial else 0.0)
    clamped = amplitude > 1.0
    amplitude = min(amplitude, 1.0)
    return AmplifyResult(
        amplitude=amplitude,
        p_amp=amplitude * amplitude,
        reflections_per_application=2 * math.ceil(tau * math.log(1.0 / eps)) + 1,
        clamped=clamped,
    )


def _amplify_clamped(p: float, tau: float, eps: float, adversarial: bool) -> AmplifyResult:
    """Amplifier without the linearity precondition: out-of-range inputs clamp.

    The unbiased estimator can (with its own small failure probability) pick
    an amplification factor whose linear range excludes p; physically the
    amplitude saturates, so the simulation clamps instead of rejecting.
    """
    root = tau * math.sqrt(_check_prob(p)) + (eps if adversarial else 0.0)
    clamped = root > 1.0
    amplitude = min(root, 1.0)
    return AmplifyResult(
        amplitude=amplitude,
        p_amp=amplitude * amplitude,
        reflections_per_application=2 * math.ceil(tau * math.log(1.0 / eps)) + 1,
        clamped=clamped,
    )


@dataclass
class PhaseOracleSpec:
    """Phase encoding of an amplitude, with its per-application charge."""

    theta: float
    eps_prime: float
    reflections_per_application: int


def amp_to_phase_oracle(p_amp: float, eps_prime: float) -> PhaseOracleSpec:
    """Encode a squared amplitude as the eigenphase fraction p_amp / (2 pi).

    The conversion unitary costs ceil(ln(1/eps_prime)) reflections per
    application at approximation error eps_prime.
    """
    p_amp = _check_prob(p_amp, "p_amp")
    if not 0.0 < eps_prime < 1.0:
        raise ValueError(f"eps_prime {eps_prime} outside (0, 1)")
    return PhaseOracleSpec(
        theta=p_amp / (2.0 * math.pi),
        eps_prime=eps_prime,
        reflections_per_application=math.ceil(math.log(1.0 / eps_prime)),
    )


@dataclass
class NDUAEResult:
    """Unbiased amplitude estimate with branch and resource diagnostics."""

    estimate: float
    restored: bool
    reflections: int
    branch: str
    q: float
    tau: float
    controlled_ops: int


def nduae(
    p: float,
    t: float,
    eps: float,
    rng: RandomSource,
    adversarial: bool = False,
    po_applications: int | None = None,
    po_eps_prime: float | None = None,
) -> NDUAEResult:
    """Unbiased amplitude estimate: |E - p| <= eps, Var <= 91 p / t^2 + eps.

    A rough estimate q (nondestructive, time 2t) picks the amplification
    factor tau = max(1, min(t, 1/sqrt(q)) / 4).  Small q takes the coin
    branch: one nondestructive coin on the amplified state, estimate
    b / tau^2.  Otherwise the amplified amplitude is encoded as a phase and
    the unbiased phase estimator reads it back, estimate
    2 pi theta-tilde / tau^2 in [-2 pi, 2 pi].  Both branches average to p
    exactly, up to the eps-budgeted failure events (rough estimate in its
    tail, amplifier clamp, undetected phase scan).

    Adversarial mode biases the amplifier by its full tolerance and, with
    probability min(1, 2 T eps_prime n_vals), shifts the phase read-out by
    one conversion cell -- the worst perturbations the component contracts
    allow.  ``po_applications``/``po_eps_prime`` override the modeled
    oracle-use count and conversion precision (testing hooks).

    ``reflections`` meters the composition: the rough estimate at its own
    rate, then either the coin wrapped in the amplifier, or T = O((t/tau)
    log(t/(eps tau))) conversion applications at the theory precision.
    """
    p = _check_prob(p)
    if not t >= 4.0:
        raise ValueError(f"time parameter must be >= 4, got {t}")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps {eps} outside (0, 1)")
    rough = ndae(p, 2.0 * t, eps / 8.0, rng)
    q = rough.estimate
    restored = rough.restored
    reflections = rough.reflections
    tau = max(1.0, 0.25 * (t if q <= 0.0 else min(t, 1.0 / math.sqrt(q))))
    amp = _amplify_clamped(p, tau, eps / 40.0, adversarial)

    if q <= 1.0 / (t * t):
        coin = coin_flip(amp.p_amp, rng)
        reflections += coin.reflections * (amp.reflections_per_application + 1)
        return NDUAEResult(
            estimate=(1.0 if coin.outcome else 0.0) / (tau * tau),
            restored=restored,
            reflections=reflections,
            branch="coin",
            q=q,
            tau=tau,
            controlled_ops=0,
        )

    t_upe = 1 << int(math.floor(math.log2(max(8.0, 7.0 * t / tau))))
    log_scale = math.log(t / (eps * tau))
    eps_theory = tau * tau / (t * t * log_scale)
    n_vals = math.ceil(36.0 * math.pi * t / tau)
    t_model = (
        po_applications
        if po_applications is not None
        else math.ceil((7.0 * t / tau) * log_scale)
    )
    # the ledger meters T conversion applications at the theory precision;
    # the simulated perturbation channel runs at a precision additionally
    # capped so the worst-case read-out flip spends at most eps/8 of bias
    oracle = amp_to_phase_oracle(
        amp.p_amp, eps_theory if po_eps_prime is None else po_eps_prime
    )
    if po_eps_prime is not None:
        eps_prime = po_eps_prime
    else:
        budget = eps * t_upe * tau * tau / (16.0 * math.pi)
        eps_prime = min(eps_theory, budget / (2.0 * t_model * n_vals))
    run = upe(oracle.theta, t_upe, eps / 90.0, rng)
    estimate = run.estimate
    if adversarial and rng.bernoulli(min(1.0, 2.0 * t_model * eps_prime * n_vals)):
        estimate += 1.0 / t_upe
    reflections += t_model * oracle.reflections_per_application
    return NDUAEResult(
        estimate=2.0 * math.pi * estimate / (tau * tau),
        restored=restored and run.restored,
        reflections=reflections,
        branch="phase",
        q=q,
        tau=tau,
        controlled_ops=run.controlled_ops,
    )
