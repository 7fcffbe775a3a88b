import warnings

import numpy as np
import pytest

from conftest import KET0, KET1, proj
from measim.cq import Ensemble, Povm, QuantumInstrument, Refinement
from measim.protocol import (
    simulate_cdcqsi,
    simulate_mc,
    simulate_mc_instr,
    simulate_mcqsi,
    simulate_nonfeedback,
)
from measim.protocol.qsi import side_ensemble
from measim.qcore import SystemLayout

HALF = np.eye(2) / 2


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


def test_simulate_mc_bb84_routes_agree(bb84):
    rep = simulate_mc(HALF, bb84, 2, 4, 4, 0.75, 5, 0, on_violation="rescale")
    assert len(rep.deltas) == 5
    assert max(r.equivalence_gap for r in rep.reports) <= 1e-8
    d = rep.to_dict()
    assert d["all_equivalent"] is True


def test_simulate_mc_median_decreases_with_L(bb84):
    meds = [simulate_mc(HALF, bb84, 2, L, 4, 0.75, 20, 0, on_violation="rescale").median_delta for L in (1, 4, 16)]
    assert meds[0] > meds[1] > meds[2]


def test_simulate_mc_deterministic(bb84):
    a = simulate_mc(HALF, bb84, 2, 4, 2, 0.75, 4, 3, on_violation="rescale", threads=1).to_dict()
    b = simulate_mc(HALF, bb84, 2, 4, 2, 0.75, 4, 3, on_violation="rescale", threads=2).to_dict()
    assert a == b


def test_simulate_mc_instr_luders():
    instr = QuantumInstrument([[proj(KET0)], [proj(KET1)]])
    rep = simulate_mc_instr(instr, HALF, 2, 4, 2, 0.75, 4, 0, on_violation="rescale")
    for r in rep.results:
        assert r.distance <= r.chain_bound + 1e-8
    assert rep.to_dict()["within_chain_bound"] is True


def test_nonfeedback_trivial_matches_mc(bb84):
    ref = Refinement(bb84, np.eye(4))
    nf = simulate_nonfeedback(HALF, ref, 2, 4, 2, 0.75, 4, 0, on_violation="rescale")
    mc = simulate_mc(HALF, bb84, 2, 4, 2, 0.75, 4, 0, on_violation="rescale")
    assert np.allclose(nf.deltas, mc.deltas, atol=1e-10)


def test_nonfeedback_pure_noise_exact():
    ref = Refinement(Povm([np.eye(2)]), np.array([[0.3], [0.7]]))
    nf = simulate_nonfeedback(HALF, ref, 2, 1, 1, 1.0, 2, 0, eps=0.0)
    assert max(nf.deltas) == pytest.approx(0.0, abs=1e-12)


def test_nonfeedback_coarse_routes_agree(bb84):
    ref = Refinement(bb84, np.array([[1, 0, 1, 0], [0, 1, 0, 1]]))
    nf = simulate_nonfeedback(HALF, ref, 2, 4, 2, 0.75, 4, 0, on_violation="rescale")
    assert nf.equivalence_gap <= 1e-8


def test_cdcqsi_error_rate_and_bound(conjugate_ensemble):
    rep = simulate_cdcqsi(conjugate_ensemble, 4, 1.5, 0.75, 100, 0, recover=False)
    assert 0.0 <= rep.error_rate <= 1.0
    assert rep.bound_ok
    assert rep.h_x_given_b == pytest.approx(1.0, abs=1e-12)


def test_cdcqsi_perfect_copy():
    ens = Ensemble([0.5, 0.5], [proj(KET0), proj(KET1)])
    rep = simulate_cdcqsi(ens, 4, 0.0, 0.75, 50, 0)
    assert rep.errors == 0


def test_cdcqsi_deterministic(conjugate_ensemble):
    a = simulate_cdcqsi(conjugate_ensemble, 2, 1.5, 0.75, 30, 9).to_dict()
    b = simulate_cdcqsi(conjugate_ensemble, 2, 1.5, 0.75, 30, 9, threads=3).to_dict()
    assert a == b


def test_side_ensemble_bell():
    v = np.zeros(4)
    v[0] = v[3] = 1 / np.sqrt(2)
    z = Povm([proj(KET0), proj(KET1)])
    ens = side_ensemble(np.outer(v, v), 2, 2, z)
    assert np.allclose(ens.pmf, [0.5, 0.5])
    assert np.allclose(ens.states[0], proj(KET0)) and np.allclose(ens.states[1], proj(KET1))


def test_mcqsi_trivial_side_information_decodes(bb84):
    rho = np.kron(HALF, np.ones((1, 1)))
    rep = simulate_mcqsi(rho, SystemLayout((2, 1), ("A", "B")), bb84, 2, 3.0, 4, 2, 0.75, 6, 0, on_violation="rescale")
    assert rep.decode_errors == 0
    assert rep.decoded_trials == rep.trials - rep.completion_events


def test_mcqsi_bell_rate_values(bb84, bell_ab):
    rep = simulate_mcqsi(bell_ab, SystemLayout((2, 2), ("A", "B")), bb84, 2, 0.0, 4, 2, 0.75, 8, 0, on_violation="rescale")
    d = rep.to_dict()
    assert d["trials"] == 8
    assert 0.0 <= rep.decode_error_rate <= 1.0
    assert rep.faithfulness.equivalent


def test_side_ensemble_absent_outcome():
    z4 = Povm([proj(KET0), proj(KET1), np.zeros((2, 2)), np.zeros((2, 2))])
    ens = side_ensemble(np.kron(proj(KET0), HALF), 2, 2, z4)
    assert np.allclose(ens.pmf, [1, 0, 0, 0])
    assert np.allclose(ens.states[1], HALF)
