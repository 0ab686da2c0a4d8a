"""Dense statevector primitives and seeded randomness.

Everything downstream runs on two ingredients: small dense complex vectors
with explicit unitaries/projectors, and a reproducible randomness tree.  The
vectors stay dense on purpose -- nothing in the stack needs more than a few
thousand dimensions, and exactness is worth more here than scale.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

# Dense linear algebra is capped well below anything that could swap; the
# estimators only ever touch registers of a few dozen states.
DENSE_DIM_CAP = 1 << 12

# Probabilities within this of 0 or 1 are treated as exact and resolved
# without consuming randomness, so degenerate inputs stay deterministic.
DEGEN_TOL = 1e-12

ATOL = 1e-9

_FNV64 = 0x100000001B3
_MASK64 = (1 << 64) - 1


class RandomSource:
    """Philox-backed randomness with an addressable substream tree.

    Every stochastic component takes (or derives) one of these.  Substreams
    are derived by index, not by splitting a shared stream, so changing how
    much randomness one component consumes never shifts what an unrelated
    component sees.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        self._rng = np.random.Generator(
            np.random.Philox(key=[self.seed, self.stream])
        )

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, stream={self.stream})"

    def substream(self, index: int) -> RandomSource:
        """Child source at ``index``, deterministic in (seed, stream, index)."""
        child = ((self.stream * _FNV64) ^ (int(index) + 1)) & _MASK64
        return RandomSource(self.seed, child)

    def uniform(self) -> float:
        return float(self._rng.random())

    def bernoulli(self, p: float) -> bool:
        """One biased coin; degenerate p resolves without consuming randomness."""
        if not -DEGEN_TOL <= p <= 1.0 + DEGEN_TOL:
            raise ValueError(f"probability {p} outside [0, 1]")
        if p <= DEGEN_TOL:
            return False
        if p >= 1.0 - DEGEN_TOL:
            return True
        return bool(self._rng.random() < p)

    def binomial(self, n: int, p: float) -> int:
        if n < 0:
            raise ValueError(f"binomial needs n >= 0, got {n}")
        if not -DEGEN_TOL <= p <= 1.0 + DEGEN_TOL:
            raise ValueError(f"probability {p} outside [0, 1]")
        if n == 0 or p <= DEGEN_TOL:
            return 0
        if p >= 1.0 - DEGEN_TOL:
            return n
        return int(self._rng.binomial(n, p))

    def geometric(self, p: float) -> int:
        """Trials until first success, support {1, 2, ...}."""
        if p <= DEGEN_TOL:
            raise ValueError("geometric needs success probability > 0")
        if p >= 1.0 - DEGEN_TOL:
            return 1
        return int(self._rng.geometric(p))

    def choice(self, probs: np.ndarray) -> int:
        """Index drawn from a finite distribution (one uniform consumed).

        A point mass (max prob within DEGEN_TOL of 1) short-circuits without
        consuming randomness; zero-probability indices are never returned.
        """
        probs = np.asarray(probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a nonempty 1-D array")
        if probs.min() < -1e-12 or abs(float(probs.sum()) - 1.0) > 1e-9:
            raise ValueError("probs must be a probability distribution")
        top = int(np.argmax(probs))
        if probs[top] >= 1.0 - DEGEN_TOL:
            return top
        cum = np.cumsum(probs)
        cum[-1] = 1.0
        return int(np.searchsorted(cum, self._rng.random(), side="right"))


def assert_state(psi: np.ndarray) -> np.ndarray:
    """Validate (and coerce to complex) a pure-state vector."""
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise ValueError(f"state must be 1-D, got shape {psi.shape}")
    if not 0 < psi.size <= DENSE_DIM_CAP:
        raise ValueError(f"state dimension {psi.size} outside (0, {DENSE_DIM_CAP}]")
    norm = float(np.linalg.norm(psi))
    if abs(norm - 1.0) > ATOL:
        raise ValueError(f"state norm {norm} is not 1")
    return psi


def assert_unitary(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"unitary must be square, got shape {u.shape}")
    if not 0 < u.shape[0] <= DENSE_DIM_CAP:
        raise ValueError(f"dimension {u.shape[0]} outside (0, {DENSE_DIM_CAP}]")
    err = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
    if err > ATOL:
        raise ValueError(f"matrix is not unitary (deviation {err})")
    return u


def assert_projector(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=complex)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"projector must be square, got shape {p.shape}")
    if not 0 < p.shape[0] <= DENSE_DIM_CAP:
        raise ValueError(f"dimension {p.shape[0]} outside (0, {DENSE_DIM_CAP}]")
    if float(np.max(np.abs(p - p.conj().T))) > ATOL:
        raise ValueError("projector is not Hermitian")
    if float(np.max(np.abs(p @ p - p))) > ATOL:
        raise ValueError("projector is not idempotent")
    return p


def measure(psi: np.ndarray, projector: np.ndarray, rng: RandomSource):
    """Projective yes/no measurement of ``projector`` on ``psi``.

    Returns ``(outcome, post_state)`` with outcome 1 when the projector
    fires.  Degenerate probabilities resolve deterministically without
    consuming randomness (inherited from RandomSource.bernoulli).
    """
    psi = assert_state(psi)
    projector = assert_projector(projector)
    if projector.shape[0] != psi.size:
        raise ValueError("projector/state dimension mismatch")
    inside = projector @ psi
    p = float(np.real(np.vdot(inside, inside)))
    p = min(max(p, 0.0), 1.0)
    hit = rng.bernoulli(p)
    post = inside if hit else psi - inside
    norm = float(np.linalg.norm(post))
    assert norm > 0.0  # a drawn outcome always has positive probability
    return (1 if hit else 0), post / norm


def uniform_state(n: int) -> np.ndarray:
    if n <= 0 or n > DENSE_DIM_CAP:
        raise ValueError(f"dimension {n} outside (0, {DENSE_DIM_CAP}]")
    return np.full(n, 1.0 / np.sqrt(n), dtype=complex)


def qft_matrix(n: int) -> np.ndarray:
    """Discrete Fourier transform unitary F[j, k] = exp(2 pi i jk / n) / sqrt(n)."""
    if n <= 0 or n > DENSE_DIM_CAP:
        raise ValueError(f"dimension {n} outside (0, {DENSE_DIM_CAP}]")
    j = np.arange(n)
    return np.exp(2j * np.pi * np.outer(j, j) / n) / np.sqrt(n)


def controlled_powers(u: np.ndarray, t: int) -> np.ndarray:
    """sum_k |k><k| (x) U^k on a t-dimensional control register."""
    u = assert_unitary(u)
    d = u.shape[0]
    if t <= 0 or t * d > DENSE_DIM_CAP:
        raise ValueError(f"control dimension {t} (total {t * d}) out of range")
    out = np.zeros((t * d, t * d), dtype=complex)
    blk = np.eye(d, dtype=complex)
    for k in range(t):
        out[k * d : (k + 1) * d, k * d : (k + 1) * d] = blk
        blk = blk @ u
    return out


def grover_operator(psi: np.ndarray, projector: np.ndarray) -> np.ndarray:
    """Two-reflection iterate ``-(I - 2|psi><psi|)(I - 2P)``.

    In the plane spanned by ``psi`` and its projection it rotates by twice
    the angle ``arcsin(sqrt(p))`` with ``p = <psi|P|psi>``; see
    :func:`grover_plane_phases` for the resulting eigenphases.
    """
    psi = assert_state(psi)
    projector = assert_projector(projector)
    if projector.shape[0] != psi.size:
        raise ValueError("projector/state dimension mismatch")
    eye = np.eye(psi.size, dtype=complex)
    return -(eye - 2.0 * np.outer(psi, psi.conj())) @ (eye - 2.0 * projector)


def grover_plane_phases(p: float) -> tuple[float, float]:
    """Eigenphases (fractions of a turn) of the Grover iterate in its plane.

    Raises for degenerate ``p``: at 0 or 1 the plane collapses and the
    rotation angle is no longer identified.
    """
    if not -DEGEN_TOL <= p <= 1.0 + DEGEN_TOL:
        raise ValueError(f"probability {p} outside [0, 1]")
    if p <= DEGEN_TOL or p >= 1.0 - DEGEN_TOL:
        raise ValueError(f"Grover plane is degenerate at p = {p}")
    theta = float(np.arcsin(np.sqrt(p)) / np.pi)
    return theta, 1.0 - theta


def eigendecompose_unitary(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal eigenbasis of a unitary.

    Returns ``(phases, vectors)`` with ``u @ vectors[:, j] ==
    exp(2 pi i phases[j]) * vectors[:, j]`` and phases in [0, 1).  Uses the
    complex Schur form, which is diagonal for normal matrices, so the basis
    comes out orthonormal even inside degenerate eigenspaces.
    """
    u = assert_unitary(u)
    t_mat, q = scipy.linalg.schur(u, output="complex")
    if u.shape[0] > 1:
        off = float(np.max(np.abs(t_mat - np.diag(np.diag(t_mat)))))
        assert off <= 1e-8  # unitaries are normal; Schur must be diagonal
    phases = np.angle(np.diag(t_mat)) / (2.0 * np.pi)
    phases = np.mod(phases, 1.0)
    phases[phases >= 1.0] -= 1.0
    return phases, q
