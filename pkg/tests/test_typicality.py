from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from measim.cq import Ensemble
from measim.errors import BadSequence, EmptyTypicalSet, NotPsd
from measim.qcore import kron_all
from measim.sampling import random_density, random_unitary
from measim.typicality import (
    TypicalSetSpec,
    all_sequences,
    conditionally_typical_projector,
    cutoff_projector,
    declared_constant,
    is_strongly_typical,
    pruned,
    pruned_average_gap,
    sandwich_bounds,
    sequence_index,
    spectrum,
    typical_mass,
    typical_projector,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_strong_typicality_examples():
    spec = TypicalSetSpec([0.5, 0.5], 4, 0.0)
    assert is_strongly_typical([0, 1, 0, 1], spec)
    assert not is_strongly_typical([0, 0, 0, 1], spec)
    skew = TypicalSetSpec([0.75, 0.25, 0.0], 4, 0.3)
    assert is_strongly_typical([0, 0, 0, 1], skew)
    # zero-probability symbols never occur in a typical sequence
    assert not is_strongly_typical([0, 0, 0, 2], skew)
    with pytest.raises(BadSequence):
        is_strongly_typical([0, 1], spec)
    with pytest.raises(BadSequence):
        is_strongly_typical([0, 1, 2, 0], spec)


def test_typical_mass_uniform_binary():
    tm = typical_mass(TypicalSetSpec([0.5, 0.5], 10, 0.1))
    oracle = sum(comb(10, k) for k in range(4, 7)) / 1024
    assert oracle == 0.65625
    assert tm.mass == pytest.approx(0.65625, abs=1e-15)
    assert tm.cardinality == 672
    assert tm.bound_ok


def test_typical_mass_trivial_cases():
    assert typical_mass(TypicalSetSpec([0.3, 0.7], 5, 0.7)).mass == pytest.approx(1.0)
    tm = typical_mass(TypicalSetSpec([0.3, 0.7], 1, 0.0))
    assert tm.cardinality == 0 and tm.mass == 0.0
    tm = typical_mass(TypicalSetSpec([1.0, 0.0], 1, 0.0))
    assert tm.mass == 1.0 and tm.cardinality == 1


def test_typical_mass_trend():
    masses = [typical_mass(TypicalSetSpec([0.5, 0.5], n, 0.2)).mass for n in (4, 8, 12, 16)]
    assert all(a <= b + 1e-12 for a, b in zip(masses, masses[1:]))


def test_pruned_distribution_examples():
    pd = pruned(TypicalSetSpec([0.5, 0.5], 10, 0.1))
    assert pd.prob([0, 1] * 5) == pytest.approx((1 / 1024) / 0.65625, rel=1e-12)
    assert pd.prob([0] * 10) == 0.0
    assert pd.pruned_probabilities().sum() == pytest.approx(1.0)
    with pytest.raises(EmptyTypicalSet):
        pruned(TypicalSetSpec([0.3, 0.7], 1, 0.0))


def test_pruned_sampling_matches_law():
    spec = TypicalSetSpec([0.7, 0.3], 4, 0.1)
    pd = pruned(spec)
    draws = pd.sample(np.random.default_rng(11), 20000)
    assert all(is_strongly_typical(s, spec) for s in draws[:200])
    idx = np.array([sequence_index(s, 2) for s in draws])
    emp = np.bincount(idx, minlength=16)
    want = np.zeros(16)
    for s, p in zip(pd.sequences, pd.pruned_probabilities()):
        want[sequence_index(s, 2)] = p
    assert np.max(np.abs(emp / draws.shape[0] - want)) < 0.02


def test_all_sequences_order():
    seqs = all_sequences(3, 2)
    assert seqs.shape == (9, 2)
    assert [sequence_index(s, 3) for s in seqs] == list(range(9))


def test_declared_constant():
    assert declared_constant([0.5, 0.5]) == pytest.approx(2.0)
    assert declared_constant([1.0, 0.0]) == 0.0


def test_typical_projector_maximally_mixed():
    for n in (1, 2, 3):
        tp = typical_projector(np.eye(2) / 2, n, 0.0)
        assert np.allclose(tp.projector, np.eye(2**n))


def test_typical_projector_rank_28():
    # strong typicality at n = 8, δ = 0.1 admits exactly six zeros
    tp = typical_projector(np.diag([0.75, 0.25]), 8, 0.1)
    assert tp.rank == comb(8, 6) == 28
    assert tp.rank_bound_ok


def test_typical_projector_pure_state():
    psi = np.array([0.6, 0.8])
    tp = typical_projector(np.outer(psi, psi), 3, 0.05)
    assert tp.rank == 1
    v = kron_all([psi[:, None]] * 3)
    assert np.allclose(tp.projector, v @ v.T)


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(1, 4), st.sampled_from([0.05, 0.15, 0.3]))
def test_typical_projector_is_projector_commuting_with_state(seed, n, delta):
    g = np.random.default_rng(seed)
    rho = random_density(2, g)
    tp = typical_projector(rho, n, delta)
    p = tp.projector
    assert np.allclose(p @ p, p, atol=1e-10)
    big = kron_all([rho] * n)
    assert np.allclose(p @ big, big @ p, atol=1e-10)
    assert tp.rank_bound_ok


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_typical_projector_unitary_covariant(seed):
    g = np.random.default_rng(seed)
    rho = random_density(2, g)
    u = random_unitary(2, g)
    a = typical_projector(rho, 3, 0.2).projector
    b = typical_projector(u @ rho @ u.conj().T, 3, 0.2).projector
    u3 = kron_all([u] * 3)
    assert np.allclose(u3 @ a @ u3.conj().T, b, atol=1e-8)


def test_spectrum_groups_degenerate_eigenvalues():
    sp = spectrum(np.diag([0.25, 0.25, 0.5]))
    assert np.allclose(sp.symbol_values, [0.5, 0.25])
    assert np.allclose(sp.symbol_mass, [0.5, 0.5])


def test_conditionally_typical_examples():
    same = np.diag([0.75, 0.25])
    ens = Ensemble([0.5, 0.5], [same, same])
    a = conditionally_typical_projector(ens, [0, 0, 0, 0], 0.3)
    b = typical_projector(same, 4, 0.3)
    assert np.allclose(a.projector, b.projector)
    mixed = Ensemble([0.5, 0.5], [np.eye(2) / 2, np.eye(2) / 2])
    assert np.allclose(conditionally_typical_projector(mixed, [0, 1, 1], 0.1).projector, np.eye(8))
    pure = Ensemble([0.5, 0.5], [np.diag([1.0, 0]), np.diag([0, 1.0])])
    ct = conditionally_typical_projector(pure, [0, 1, 1], 0.1)
    e = np.zeros(8)
    e[0b011] = 1
    assert np.allclose(ct.projector, np.outer(e, e))


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(1, 4))
def test_conditional_rank_bound(seed, n):
    g = np.random.default_rng(seed)
    ens = Ensemble([0.4, 0.6], [random_density(2, g), random_density(2, g)])
    xn = g.integers(0, 2, size=n)
    ct = conditionally_typical_projector(ens, xn, 0.2)
    assert ct.rank_bound_ok
    p = ct.projector
    assert np.allclose(p @ p, p, atol=1e-10)


def test_cutoff_projector_examples():
    c = cutoff_projector(np.diag([0.5, 0.3, 0.01, 0.0]), 0.05)
    assert c.rank == 2
    assert c.discarded_trace == pytest.approx(0.01)
    assert c.accounting_ok
    assert cutoff_projector(np.diag([0.5, 0.3]), 0.0).rank == 2
    with pytest.raises(NotPsd):
        cutoff_projector(np.diag([1.0, -0.1]), 0.0)


def test_sandwich_bounds_examples():
    for n in (4, 6):
        r = sandwich_bounds(np.diag([0.75, 0.25]), n, 0.15)
        assert r["ok"]
        assert r["lower"] <= r["min_eigenvalue"] <= r["max_eigenvalue"] <= r["upper"]


def test_pruned_average_operator_inequality():
    plus = np.full((2, 2), 0.5)
    ens = Ensemble([0.5, 0.5], [np.diag([1.0, 0]), plus])
    for n in (2, 3, 4):
        assert pruned_average_gap(ens, n, 0.3)["ok"]
