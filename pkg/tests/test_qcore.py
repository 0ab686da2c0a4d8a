"""Tests for the statevector and randomness primitives."""

from __future__ import annotations

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from quansa import qcore
from quansa.qcore import RandomSource


def random_state(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def random_projector(rng: np.random.Generator, n: int, rank: int) -> np.ndarray:
    m = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    q, _ = np.linalg.qr(m)
    return q @ q.conj().T


# ---------------------------------------------------------------- randomness


def test_random_source_reproducible():
    a = [RandomSource(42).uniform() for _ in range(5)]
    assert len(set(a)) == 1  # fresh source, same first draw
    seq1 = RandomSource(42)
    seq2 = RandomSource(42)
    assert [seq1.uniform() for _ in range(5)] == [seq2.uniform() for _ in range(5)]


def test_streams_and_substreams_differ():
    base = RandomSource(7)
    assert RandomSource(7, 1).uniform() != RandomSource(7, 2).uniform()
    subs = [base.substream(i).uniform() for i in range(20)]
    assert len(set(subs)) == 20
    again = [base.substream(i).uniform() for i in range(20)]
    assert subs == again


def test_substream_tree_does_not_collide_with_parent():
    parent = RandomSource(13, 5)
    child = parent.substream(0)
    assert (child.seed, child.stream) != (parent.seed, parent.stream)
    # nesting stays deterministic
    assert parent.substream(3).substream(4).uniform() == \
        parent.substream(3).substream(4).uniform()


def test_degenerate_draws_consume_no_randomness():
    ref = RandomSource(99).uniform()
    src = RandomSource(99)
    assert src.bernoulli(0.0) is False
    assert src.bernoulli(1.0) is True
    assert src.binomial(10, 0.0) == 0
    assert src.binomial(10, 1.0) == 10
    assert src.geometric(1.0) == 1
    assert src.choice(np.array([0.0, 1.0, 0.0])) == 1
    assert src.uniform() == ref


def test_bernoulli_frequency():
    src = RandomSource(3)
    n, p = 20000, 0.37
    hits = sum(src.bernoulli(p) for _ in range(n))
    se = np.sqrt(p * (1 - p) / n)
    assert abs(hits / n - p) < 4 * se


def test_choice_frequencies():
    probs = np.array([0.2, 0.3, 0.5])
    src = RandomSource(11)
    n = 30000
    counts = np.bincount([src.choice(probs) for _ in range(n)], minlength=3)
    for k in range(3):
        se = np.sqrt(probs[k] * (1 - probs[k]) / n)
        assert abs(counts[k] / n - probs[k]) < 4 * se


def test_choice_rejects_non_distribution():
    src = RandomSource(0)
    with pytest.raises(ValueError):
        src.choice(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        src.choice(np.array([1.5, -0.5]))


def test_geometric_zero_probability_raises():
    with pytest.raises(ValueError):
        RandomSource(0).geometric(0.0)


@settings(max_examples=50)
@given(
    weights=st.lists(st.floats(0.05, 1.0), min_size=2, max_size=6),
    zero_at=st.integers(0, 5),
    seed=st.integers(0, 2**32 - 1),
)
def test_choice_never_leaves_support(weights, zero_at, seed):
    probs = np.array(weights)
    probs[zero_at % len(probs)] = 0.0
    probs /= probs.sum()
    src = RandomSource(seed)
    for _ in range(10):
        k = src.choice(probs)
        assert probs[k] > 0.0


# --------------------------------------------------------------- validators


def test_state_validation():
    with pytest.raises(ValueError):
        qcore.assert_state(np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        qcore.assert_state(np.eye(2))
    out = qcore.assert_state(np.array([1.0, 0.0]))
    assert out.dtype == complex


def test_unitary_validation():
    with pytest.raises(ValueError):
        qcore.assert_unitary(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        qcore.assert_unitary(np.ones((2, 3)))
    qcore.assert_unitary(np.eye(3))


def test_projector_validation():
    with pytest.raises(ValueError):
        qcore.assert_projector(np.array([[0.0, 1.0], [0.0, 0.0]]))  # not Hermitian
    with pytest.raises(ValueError):
        qcore.assert_projector(0.5 * np.eye(2))  # not idempotent
    qcore.assert_projector(np.zeros((2, 2)))


def test_dimension_cap_enforced():
    n = qcore.DENSE_DIM_CAP + 1
    v = np.zeros(n)
    v[0] = 1.0
    with pytest.raises(ValueError):
        qcore.assert_state(v)


# -------------------------------------------------------------- measurement


def test_measure_statistics_match_projection_weight():
    rng = np.random.default_rng(5)
    psi = random_state(rng, 6)
    proj = random_projector(rng, 6, 2)
    p_true = float(np.real(psi.conj() @ proj @ psi))
    src = RandomSource(21)
    n = 20000
    hits = 0
    for _ in range(n):
        outcome, post = qcore.measure(psi, proj, src)
        hits += outcome
        if outcome:
            assert np.allclose(proj @ post, post, atol=1e-9)
        else:
            assert np.allclose(proj @ post, 0.0, atol=1e-9)
        assert abs(np.linalg.norm(post) - 1.0) < 1e-9
    se = np.sqrt(p_true * (1 - p_true) / n)
    assert abs(hits / n - p_true) < 4 * se


def test_measure_degenerate_consumes_no_randomness():
    rng = np.random.default_rng(8)
    psi = random_state(rng, 4)
    ref = RandomSource(55).uniform()
    src = RandomSource(55)
    outcome, post = qcore.measure(psi, np.eye(4), src)
    assert outcome == 1 and np.allclose(post, psi)
    outcome, post = qcore.measure(psi, np.zeros((4, 4)), src)
    assert outcome == 0 and np.allclose(post, psi)
    assert src.uniform() == ref


# ------------------------------------------------- spectra / Grover algebra


@pytest.mark.parametrize("dim", [2, 3, 8, 16])
def test_eigendecompose_reconstructs_unitary(dim):
    u = scipy.stats.unitary_group.rvs(dim, random_state=np.random.default_rng(dim))
    phases, vecs = qcore.eigendecompose_unitary(u)
    assert np.all((phases >= 0.0) & (phases < 1.0))
    assert np.allclose(vecs.conj().T @ vecs, np.eye(dim), atol=1e-9)
    rebuilt = vecs @ np.diag(np.exp(2j * np.pi * phases)) @ vecs.conj().T
    assert np.max(np.abs(rebuilt - u)) < 1e-8


def test_eigendecompose_handles_degenerate_spectrum():
    u = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)
    phases, vecs = qcore.eigendecompose_unitary(u)
    assert np.allclose(sorted(phases), [0.0, 0.0, 0.5, 0.5], atol=1e-12)
    assert np.allclose(vecs.conj().T @ vecs, np.eye(4), atol=1e-9)


@pytest.mark.parametrize("rank,seed", [(1, 0), (2, 1), (3, 2)])
def test_grover_spectrum_matches_closed_form(rank, seed):
    # two independent routes to the rotation angle: explicit eigendecomposition
    # of the two-reflection operator vs arcsin(sqrt(p))/pi
    rng = np.random.default_rng(seed)
    psi = random_state(rng, 5)
    proj = random_projector(rng, 5, rank)
    p = float(np.real(psi.conj() @ proj @ psi))
    g = qcore.grover_operator(psi, proj)
    qcore.assert_unitary(g)
    phases, _ = qcore.eigendecompose_unitary(g)
    for want in qcore.grover_plane_phases(p):
        dist = np.min(np.abs(phases - want))
        assert dist < 1e-9


def test_grover_plane_phases_degenerate_raises():
    with pytest.raises(ValueError):
        qcore.grover_plane_phases(0.0)
    with pytest.raises(ValueError):
        qcore.grover_plane_phases(1.0)
    lo, hi = qcore.grover_plane_phases(0.5)
    assert abs(lo - 0.25) < 1e-12 and abs(hi - 0.75) < 1e-12


def test_controlled_powers_applies_matrix_powers():
    rng = np.random.default_rng(4)
    u = scipy.stats.unitary_group.rvs(3, random_state=rng)
    t = 5
    big = qcore.controlled_powers(u, t)
    qcore.assert_unitary(big)
    for k in range(t):
        for j in range(3):
            vec = np.zeros(t * 3, dtype=complex)
            vec[k * 3 + j] = 1.0
            out = big @ vec
            want = np.zeros(t * 3, dtype=complex)
            want[k * 3 : (k + 1) * 3] = np.linalg.matrix_power(u, k)[:, j]
            assert np.allclose(out, want, atol=1e-10)


def test_qft_matrix_is_unitary_and_balanced():
    f = qcore.qft_matrix(8)
    qcore.assert_unitary(f)
    assert np.allclose(f[:, 0], qcore.uniform_state(8))
