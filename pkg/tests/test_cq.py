import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import KET0, KET1, MINUS, PLUS, bb84_elements, proj
from measim.cq import (
    ClassicalQuantumState,
    Povm,
    QuantumInstrument,
    Refinement,
    apply_refinement,
    born_distribution,
    convex_combine,
    cq_mutual_information,
    groenewold_gain,
    instrument_apply,
    is_random_unitary_kraus,
    is_rank_one_povm,
    measurement_map,
    post_measurement_cq,
    purified_reference_states,
    random_unitary_tests,
    tensor_povm,
    transpose_trick_states,
)
from measim.errors import BadPmf, DimMismatch, InvalidInstrument, InvalidPovm, SizeLimit, Unsupported
from measim.io import decode_matrix
from measim.qcore import SystemLayout, binary_entropy, canonical_purification, shannon_entropy, von_neumann_entropy
from measim.sampling import random_density, random_kraus_instrument, random_povm, random_pure_state, random_unitary

seeds = st.integers(min_value=0, max_value=2**32 - 1)
FIXTURES = Path(__file__).parent / "fixtures"
PAULIS = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]


def amplitude_damping(gamma):
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]])
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]])
    return QuantumInstrument([[k0], [k1]])


def test_povm_validation():
    with pytest.raises(InvalidPovm):
        Povm([np.eye(2) / 2])
    with pytest.raises(InvalidPovm):
        Povm([np.diag([1.5, 0.5]), np.diag([-0.5, 0.5])])
    with pytest.raises(DimMismatch):
        Povm([np.eye(2), np.zeros((3, 3))])


def test_born_distribution_examples(bb84):
    assert np.allclose(born_distribution(bb84, np.eye(2) / 2), [0.25] * 4)
    assert np.allclose(born_distribution(Povm([np.eye(3)]), random_density(3, np.random.default_rng(0))), [1.0])
    z = Povm([proj(KET0), proj(KET1)])
    assert np.allclose(born_distribution(z, np.diag([0.75, 0.25])), [0.75, 0.25])
    with pytest.raises(DimMismatch):
        born_distribution(z, np.eye(3) / 3)


def test_post_measurement_cq_bb84_on_bell(bb84, bell_ab):
    cq = post_measurement_cq(bb84, bell_ab, SystemLayout((2, 2), ("R", "A")), "A")
    assert np.allclose(cq.weights, 0.25)
    # Φ is invariant under conj(Λ) ⊗ Λ, and BB84 states are real
    for st_, v in zip(cq.states, (KET0, KET1, PLUS, MINUS)):
        assert np.allclose(st_, proj(v))


def test_post_measurement_cq_product_and_brute_force(bb84):
    ref = random_density(2, np.random.default_rng(7))
    prod = np.kron(ref, proj(PLUS))
    cq = post_measurement_cq(bb84, prod, SystemLayout((2, 2), ("R", "A")), "A")
    for w, s in zip(cq.weights, cq.states):
        if w > 0:
            assert np.allclose(s, ref)
    v = np.zeros(4)
    v[0], v[3] = np.sqrt(0.75), np.sqrt(0.25)
    z = Povm([proj(KET0), proj(KET1)])
    cq = post_measurement_cq(z, proj(v), SystemLayout((2, 2), ("R", "A")), "A")
    assert np.allclose(cq.weights, [0.75, 0.25])
    assert np.allclose(cq.states[0], proj(KET0)) and np.allclose(cq.states[1], proj(KET1))


def test_zero_probability_outcome_kept():
    z = Povm([proj(KET0), proj(KET1)])
    cq = post_measurement_cq(z, np.kron(np.eye(2) / 2, proj(KET0)), SystemLayout((2, 2), ("R", "A")), "A")
    assert cq.weights[1] == 0.0
    assert np.allclose(cq.states[1], 0)
    assert cq.labels == ("0", "1")


def test_transpose_trick_examples():
    cq = transpose_trick_states(np.eye(2) / 2, Povm([0.5 * proj(KET0), np.diag([0.5, 1.0])]))
    assert np.allclose(cq.weights[0] * cq.states[0], 0.25 * proj(KET0))
    rho = np.diag([0.6, 0.3, 0.1])
    z = Povm([np.diag([1.0, 0, 0]), np.diag([0, 1.0, 1.0])])
    cq = transpose_trick_states(rho, z)
    for w, s, e in zip(cq.weights, cq.states, z.elements):
        # commuting case: block ∝ ρΛ in the eigenbasis of ρ (already diagonal)
        assert np.allclose(w * s, rho @ e)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 4))
def test_transpose_trick_matches_purification_route(seed, d):
    g = np.random.default_rng(seed)
    rho = random_density(d, g)
    povm = Povm(random_povm(d, int(g.integers(2, 4)), g))
    a = transpose_trick_states(rho, povm)
    b = purified_reference_states(rho, povm)
    for wa, sa, wb, sb in zip(a.weights, a.states, b.weights, b.states):
        assert np.allclose(wa * sa, wb * sb, atol=1e-9)


def test_measurement_map_examples(bb84):
    out = measurement_map(Povm([np.eye(2)]))(proj(PLUS))
    assert np.allclose(out.weights, [1.0])
    out = measurement_map(bb84)(np.eye(2) / 2)
    assert np.allclose(out.weights, [0.25] * 4)
    rho = random_density(2, np.random.default_rng(3))
    out = measurement_map(bb84)(rho)
    assert shannon_entropy(out.weights) == pytest.approx(shannon_entropy(born_distribution(bb84, rho)))
    with pytest.raises(DimMismatch):
        measurement_map(bb84)(np.eye(3) / 3)


def test_tensor_povm_examples(bb84):
    assert tensor_povm(bb84, 1) is bb84
    z = Povm([proj(KET0), proj(KET1)])
    z2 = tensor_povm(z, 2)
    for i, e in enumerate(z2.elements):
        expected = np.zeros((4, 4))
        expected[i, i] = 1
        assert np.allclose(e, expected)
    rho = random_density(2, np.random.default_rng(9))
    p = born_distribution(bb84, rho)
    p3 = born_distribution(tensor_povm(bb84, 3), np.kron(np.kron(rho, rho), rho))
    assert np.allclose(p3, np.einsum("i,j,k->ijk", p, p, p).ravel())


def test_tensor_povm_size_limit(bb84, monkeypatch):
    monkeypatch.setenv("MEASIM_MAX_AMBIENT_DIM", "100")
    with pytest.raises(SizeLimit):
        tensor_povm(bb84, 4)


def test_convex_combine_examples(bb84):
    assert np.allclose(convex_combine([bb84], [1.0]).elements, bb84.elements)
    zero = np.zeros((2, 2))
    zm = Povm([proj(KET0), proj(KET1), zero, zero])
    xm = Povm([zero, zero, proj(PLUS), proj(MINUS)])
    combo = convex_combine([zm, xm], [0.5, 0.5])
    assert np.allclose(combo.elements, bb84_elements())
    rho = random_density(2, np.random.default_rng(4))
    mix = 0.5 * born_distribution(zm, rho) + 0.5 * born_distribution(xm, rho)
    assert np.allclose(born_distribution(combo, rho), mix)
    with pytest.raises(BadPmf):
        convex_combine([zm, xm], [0.7, 0.7])


def test_apply_refinement_examples(bb84):
    assert np.allclose(apply_refinement(Refinement(bb84, np.eye(4))).elements, bb84.elements)
    noise = apply_refinement(Refinement(Povm([np.eye(2)]), np.array([[0.3], [0.7]])))
    assert np.allclose(noise.elements[0], 0.3 * np.eye(2))
    proj4 = Povm([np.diag(np.eye(4)[i]) for i in range(4)])
    coarse = apply_refinement(Refinement(proj4, np.array([[1, 1, 0, 0], [0, 0, 1, 1]])))
    assert np.allclose(coarse.elements[0], np.diag([1, 1, 0, 0]))
    assert np.allclose(coarse.elements[1], np.diag([0, 0, 1, 1]))


def test_is_rank_one_povm_examples(bb84):
    assert is_rank_one_povm(bb84)
    assert not is_rank_one_povm(Povm([np.eye(2) / 2, np.eye(2) / 2]))
    assert not is_rank_one_povm(Povm([np.diag([1.0, 1, 0]), np.diag([0, 0, 1.0])]))


def test_instrument_validation():
    with pytest.raises(InvalidInstrument):
        QuantumInstrument([[np.eye(2) * 0.5]])


def test_instrument_apply_examples():
    luders = QuantumInstrument([[proj(KET0)], [proj(KET1)]])
    cq = instrument_apply(luders, proj(PLUS))
    assert np.allclose(cq.weights, [0.5, 0.5])
    assert np.allclose(cq.states[0], proj(KET0)) and np.allclose(cq.states[1], proj(KET1))
    u = random_unitary(2, np.random.default_rng(1))
    rho = random_density(2, np.random.default_rng(2))
    cq = instrument_apply(QuantumInstrument([[u]]), rho)
    assert np.allclose(cq.weights, [1.0]) and np.allclose(cq.states[0], u @ rho @ u.conj().T)
    ad = amplitude_damping(0.3)
    # oracle: Tr{N†N I/2}
    w = [np.trace(k.conj().T @ k).real / 2 for k in (ad.kraus[0][0], ad.kraus[1][0])]
    assert np.allclose(w, [0.85, 0.15])
    assert np.allclose(instrument_apply(ad, np.eye(2) / 2).weights, w)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_instrument_marginal_is_born_rule(seed):
    g = np.random.default_rng(seed)
    k = random_kraus_instrument(2, 3, g, kraus_per_outcome=2)
    instr = QuantumInstrument(k)
    rho = random_density(2, g)
    assert np.allclose(instrument_apply(instr, rho).weights, born_distribution(instr.povm(), rho), atol=1e-10)


def test_random_unitary_examples():
    pauli = QuantumInstrument([[np.sqrt(p) * s] for p, s in zip([0.4, 0.3, 0.2, 0.1], PAULIS)])
    assert is_random_unitary_kraus(pauli, np.eye(2) / 2)
    assert not is_random_unitary_kraus(amplitude_damping(0.3), np.eye(2) / 2)
    dep = QuantumInstrument([[np.sqrt(p) * s] for p, s in zip([0.7, 0.1, 0.1, 0.1], PAULIS)])
    op_ok, ent_ok, info = random_unitary_tests(dep, np.eye(2) / 2)
    assert op_ok and ent_ok and info < 1e-9
    with pytest.raises(Unsupported):
        is_random_unitary_kraus(QuantumInstrument(random_kraus_instrument(2, 2, np.random.default_rng(0), 2)), np.eye(2) / 2)


def test_groenewold_examples():
    u = random_unitary(2, np.random.default_rng(5))
    rho = random_density(2, np.random.default_rng(6))
    assert groenewold_gain(rho, QuantumInstrument([[u]])) == pytest.approx(0.0, abs=1e-10)
    p = 0.3
    luders = QuantumInstrument([[proj(KET0)], [proj(KET1)]])
    g = groenewold_gain(np.diag([p, 1 - p]), luders)
    assert g == pytest.approx(binary_entropy(p), abs=1e-12)
    assert g == pytest.approx(cq_mutual_information(transpose_trick_states(np.diag([p, 1 - p]), luders.povm())), abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 3))
def test_groenewold_equals_reference_information(seed, d):
    g = np.random.default_rng(seed)
    instr = QuantumInstrument(random_kraus_instrument(d, int(g.integers(2, 4)), g))
    rho = random_density(d, g)
    info = cq_mutual_information(transpose_trick_states(rho, instr.povm()))
    assert groenewold_gain(rho, instr) == pytest.approx(info, abs=1e-8)


def test_negative_groenewold_fixture():
    doc = json.loads((FIXTURES / "groenewold_negative.json").read_text())
    g = np.random.default_rng(np.random.SeedSequence(doc["search"]["seed_sequence"]))
    kraus = random_kraus_instrument(2, 2, g, kraus_per_outcome=2)
    rho = random_density(2, g)
    stored = [[decode_matrix(m, "kraus") for m in fam] for fam in doc["kraus"]]
    assert all(np.allclose(a, b, atol=1e-15) for fa, fb in zip(kraus, stored) for a, b in zip(fa, fb))
    gain = groenewold_gain(decode_matrix(doc["state"], "state"), QuantumInstrument(stored))
    assert gain == pytest.approx(doc["groenewold_gain"], abs=1e-12)
    assert gain < -1e-3
    assert groenewold_gain(rho, QuantumInstrument(kraus)) == pytest.approx(gain, abs=1e-12)


def test_cq_state_validation():
    with pytest.raises(Exception):
        ClassicalQuantumState((("a", 0.5, np.eye(2) / 2),))


def test_pure_state_reference_uncorrelated(bb84):
    psi = random_pure_state(2, np.random.default_rng(8))
    cq = transpose_trick_states(proj(psi), bb84)
    assert cq_mutual_information(cq) == pytest.approx(0.0, abs=1e-9)
    assert von_neumann_entropy(canonical_purification(proj(psi)).density()) == pytest.approx(0.0, abs=1e-9)
