import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import KET0, KET1, MINUS, PLUS, proj
from measim.cq import ClassicalQuantumState, Ensemble, Povm, QuantumInstrument, Refinement
from measim.errors import BadRefinement, DimMismatch
from measim.qcore import SystemLayout
from measim.rates import (
    cdc_qsi_rate,
    instrument_feedback_rates,
    mc_feedback_region,
    mc_nonfeedback_region,
    mcqsi_feedback_region,
    mcqsi_nonfeedback_region,
    overlap_constants,
    prescribed_sizes,
    uncertainty_bounds,
)
from measim.sampling import random_density, random_kraus_instrument, random_povm, random_pure_state, random_unitary

seeds = st.integers(min_value=0, max_value=2**32 - 1)
Z = Povm([proj(KET0), proj(KET1)])
X = Povm([proj(PLUS), proj(MINUS)])


def h_bits(m):
    w = np.linalg.eigvalsh(m)
    w = w[w > 1e-14]
    return float(-np.sum(w * np.log2(w)))


def test_mc_region_bb84(bb84):
    reg = mc_feedback_region(np.eye(2) / 2, bb84)
    assert reg.corner == pytest.approx((1.0, 1.0), abs=1e-12)
    assert reg.quantities["H(X)"] == pytest.approx(2.0)
    assert reg.contains(1.0, 1.0) and not reg.contains(0.9, 2.0) and not reg.contains(1.0, 0.9)


def test_mc_region_pure_state_and_trivial_povm(bb84):
    psi = random_pure_state(2, np.random.default_rng(0))
    reg = mc_feedback_region(proj(psi), bb84)
    p = np.array([np.real(psi.conj() @ e @ psi) for e in bb84.elements])
    assert reg.constraints[0].value == pytest.approx(0.0, abs=1e-9)
    assert reg.constraints[1].value == pytest.approx(-np.sum(p * np.log2(p)), abs=1e-9)
    assert mc_feedback_region(random_density(3, np.random.default_rng(1)), Povm([np.eye(3)])).corner == (0.0, 0.0)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_mc_region_quantities_match_oracle(seed):
    g = np.random.default_rng(seed)
    rho = random_density(2, g)
    povm = Povm(random_povm(2, 3, g))
    q = mc_feedback_region(rho, povm).quantities
    # oracle: I(X;R) = H(ρ) − Σ p_x H(ρ̂_x) with ρ̂_x = √ρΛ√ρ/p
    w, v = np.linalg.eigh(rho)
    sq = v @ np.diag(np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    blocks = [sq @ e @ sq for e in povm.elements]
    p = np.array([np.trace(b).real for b in blocks])
    info = h_bits(rho) - sum(pi * h_bits(b / pi) for pi, b in zip(p, blocks))
    assert q["I(X;R)"] == pytest.approx(info, abs=1e-8)
    assert q["H(X)"] == pytest.approx(-np.sum(p * np.log2(p)), abs=1e-8)
    assert q["H(X|R)"] == pytest.approx(q["H(X)"] - q["I(X;R)"], abs=1e-8)


def test_instrument_rates_examples():
    luders = QuantumInstrument([[proj(KET0)], [proj(KET1)]])
    _, br = instrument_feedback_rates(random_density(2, np.random.default_rng(2)), luders)
    assert br["I(Y;R|X)"] == 0.0 and br["H(Y|XR)"] == 0.0
    paulis = [np.eye(2), np.array([[0, 1], [1, 0]]), np.diag([1.0, -1.0])]
    ru = QuantumInstrument([[np.sqrt(p) * u] for p, u in zip([0.5, 0.3, 0.2], paulis)])
    reg, br = instrument_feedback_rates(np.eye(2) / 2, ru)
    assert br["I(X;R)"] == pytest.approx(0.0, abs=1e-12)
    assert reg.corner[0] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DimMismatch):
        instrument_feedback_rates(np.eye(3) / 3, ru)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_instrument_chain_rule(seed):
    g = np.random.default_rng(seed)
    instr = QuantumInstrument(random_kraus_instrument(2, 2, g, kraus_per_outcome=2))
    _, br = instrument_feedback_rates(random_density(2, g), instr)
    assert br["I(X;R)"] + br["I(Y;R|X)"] == pytest.approx(br["I(XY;R)"], abs=1e-8)


def test_nonfeedback_examples(bb84):
    rho = random_density(2, np.random.default_rng(3))
    u = mc_nonfeedback_region(rho, [], target=bb84)
    fb = mc_feedback_region(rho, bb84)
    assert u.corner == pytest.approx(fb.corner, abs=1e-9)
    noise = Povm([0.3 * np.eye(2), 0.7 * np.eye(2)])
    ref = Refinement(Povm([np.eye(2)]), np.array([[0.3], [0.7]]))
    assert mc_nonfeedback_region(rho, [ref], target=noise).corner == (0.0, 0.0)
    # rank-one target: coarse-graining cannot beat W = X
    split = Refinement(Povm([0.5 * e for e in bb84.elements for _ in (0, 1)]), np.kron(np.eye(4), [[1, 1]]))
    u = mc_nonfeedback_region(rho, [split], target=bb84)
    assert sum(u.corner) == pytest.approx(sum(fb.corner), abs=1e-9)
    with pytest.raises(BadRefinement):
        mc_nonfeedback_region(rho, [ref], target=bb84)
    with pytest.raises(BadRefinement):
        mc_nonfeedback_region(rho, [])


def test_nonfeedback_coarse_refinement_cheaper(bb84):
    coarse = Povm([(proj(KET0) + proj(PLUS)) / 2, (proj(KET1) + proj(MINUS)) / 2])
    ref = Refinement(bb84, np.array([[1, 0, 1, 0], [0, 1, 0, 1]]))
    u = mc_nonfeedback_region(np.eye(2) / 2, [ref], target=coarse)
    fb = mc_feedback_region(np.eye(2) / 2, coarse)
    assert u.contains(*fb.corner)
    assert len(u.members) == 2


def test_cdc_qsi_rate_examples(conjugate_ensemble):
    copy = Ensemble([0.3, 0.7], [proj(KET0), proj(KET1)])
    assert cdc_qsi_rate(copy) == 0.0
    sigma = random_density(2, np.random.default_rng(4))
    p = np.array([0.2, 0.3, 0.5])
    assert cdc_qsi_rate(Ensemble(p, [sigma] * 3)) == pytest.approx(-np.sum(p * np.log2(p)), abs=1e-9)
    # oracle: H(XB) − H(B) = 2 − 1
    assert cdc_qsi_rate(conjugate_ensemble) == pytest.approx(1.0, abs=1e-12)
    cq = ClassicalQuantumState(tuple((str(i), 0.25, s) for i, s in enumerate(conjugate_ensemble.states)), SystemLayout((2,), ("B",)))
    assert cdc_qsi_rate(cq) == pytest.approx(1.0, abs=1e-12)


def test_mcqsi_bell_state(bb84, bell_ab):
    reg = mcqsi_feedback_region(bell_ab, SystemLayout((2, 2), ("A", "B")), bb84)
    assert reg.corner == pytest.approx((0.0, 1.0), abs=1e-9)
    assert reg.quantities["H(X|B)"] == pytest.approx(1.0, abs=1e-9)


def test_mcqsi_reduces_without_side_information(bb84):
    g = np.random.default_rng(5)
    rho_a = random_density(2, g)
    fb = mc_feedback_region(rho_a, bb84)
    trivial = mcqsi_feedback_region(rho_a, SystemLayout((2, 1), ("A", "B")), bb84)
    assert trivial.corner == pytest.approx(fb.corner, abs=1e-9)
    prod = mcqsi_feedback_region(np.kron(rho_a, random_density(2, g)), SystemLayout((2, 2), ("A", "B")), bb84)
    assert prod.corner == pytest.approx(fb.corner, abs=1e-8)
    swapped = mcqsi_feedback_region(np.kron(random_density(3, g), rho_a), SystemLayout((3, 2), ("B", "A")), bb84)
    assert swapped.corner == pytest.approx(fb.corner, abs=1e-8)


def test_mcqsi_nonfeedback_trivial(bb84, bell_ab):
    u = mcqsi_nonfeedback_region(bell_ab, SystemLayout((2, 2), ("A", "B")), [], target=bb84)
    assert u.corner == pytest.approx((0.0, 1.0), abs=1e-9)


def test_overlap_constants():
    c1, c2 = overlap_constants(Z, X)
    assert c1 == pytest.approx(0.5) and c2 == pytest.approx(np.sqrt(0.5))
    c1, c2 = overlap_constants(Z, Z)
    assert c1 == pytest.approx(1.0) and c2 == pytest.approx(1.0)


def test_uncertainty_ghz():
    ghz = np.zeros(8)
    ghz[0] = ghz[7] = 1 / np.sqrt(2)
    rep = uncertainty_bounds(np.outer(ghz, ghz), SystemLayout((2, 2, 2), ("A", "B", "C")), Z, X)
    assert rep.bound_cost == pytest.approx(1.0)
    assert rep.cost_ok and rep.cr_ok


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_uncertainty_bounds_hold(seed):
    g = np.random.default_rng(seed)
    rho = random_density(8, g)
    u = random_unitary(2, g)
    xs = Povm([u @ e @ u.conj().T for e in X.elements])
    rep = uncertainty_bounds(rho, SystemLayout((2, 2, 2), ("A", "B", "C")), Z, xs)
    assert rep.cost_ok and rep.cr_ok


def test_prescribed_sizes(bb84):
    assert prescribed_sizes(np.eye(2) / 2, bb84, 2, 0.0) == (4, 4)
    assert prescribed_sizes(np.eye(2) / 2, bb84, 2, 0.25) == (int(np.ceil(2**3.5)), int(np.ceil(2**2.5)))
