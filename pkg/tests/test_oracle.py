import itertools
import math

import numpy as np
import pytest

from locsim import protocol
from locsim.dsl import CircuitIR, Source
from locsim.elements import apply_elements, beamsplitter, rotation
from locsim.errors import CapacityError
from locsim.fock import FockBasisVector, ModeId, Pol, vacuum
from locsim.measurement import BellKind
from locsim.oracle import (
    ModeUnitary,
    amplitude_via_permanent,
    max_deviation,
    mode_unitary,
    oracle_state,
    permanent_naive,
    permanent_ryser,
)

from conftest import THETAS
from randomcases import random_circuit, random_input, random_unitary

R = 1 / math.sqrt(2)
BS2 = np.array([[1, 1j], [1j, 1]]) * R


def two_mode(u):
    a, b = ModeId("a", Pol.H), ModeId("b", Pol.H)
    return ModeUnitary(np.asarray(u, dtype=complex), (a, b), (a, b)), a, b


def test_permanent_small_cases():
    assert permanent_ryser(np.eye(5)) == pytest.approx(1)
    assert permanent_ryser(np.ones((3, 3))) == pytest.approx(6)
    assert permanent_ryser(np.zeros((0, 0))) == 1
    assert permanent_ryser([[1, 2], [3, 4]]) == pytest.approx(10)
    assert permanent_ryser(BS2) == pytest.approx(0, abs=1e-16)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_ryser_matches_naive(n, rng):
    for _ in range(10):
        a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        assert abs(permanent_ryser(a) - permanent_naive(a)) < 1e-12


def test_permanent_invariant_under_permutation_and_transpose(rng):
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    p = rng.permutation(5)
    q = rng.permutation(5)
    ref = permanent_ryser(a)
    assert permanent_ryser(a.T) == pytest.approx(ref, abs=1e-12)
    assert permanent_ryser(a[p][:, q]) == pytest.approx(ref, abs=1e-12)


def test_identity_transitions():
    u, a, b = two_mode(np.eye(2))
    cfg = FockBasisVector.of({a: 2, b: 1})
    assert amplitude_via_permanent(u, cfg, cfg) == pytest.approx(1)


def test_hom_via_permanent():
    u, a, b = two_mode(BS2)
    one_each = FockBasisVector.of({a: 1, b: 1})
    assert amplitude_via_permanent(u, one_each, one_each) == 0
    assert amplitude_via_permanent(u, one_each, FockBasisVector.of({a: 2})) == pytest.approx(1j * R)


def test_photon_number_mismatch_and_cap():
    u, a, b = two_mode(BS2)
    assert amplitude_via_permanent(u, FockBasisVector.of({a: 1}), FockBasisVector.of({a: 2})) == 0
    with pytest.raises(CapacityError):
        amplitude_via_permanent(u, FockBasisVector.of({a: 7}), FockBasisVector.of({a: 7}))


def test_mode_unitary_of_circuit_without_elements():
    ir = CircuitIR(sources=(Source("vacuum", None, ("1", "2")),))
    u = mode_unitary(ir)
    assert u.dim == 4
    assert np.array_equal(u.matrix, np.eye(4))


def test_single_bs_matrix():
    ir = CircuitIR(elements=(beamsplitter("1", "3", "1p", "3p"),))
    u = mode_unitary(ir)
    assert [str(m) for m in u.rows] == ["1pH", "1pV", "3pH", "3pV"]
    assert [str(m) for m in u.cols] == ["1H", "1V", "3H", "3V"]
    for p in Pol:
        block = [[u.entry(ModeId(o, p), ModeId(i, p)) for i in ("1", "3")] for o in ("1p", "3p")]
        assert np.allclose(block, BS2, atol=1e-15)
    assert u.entry(ModeId("1p", Pol.V), ModeId("1", Pol.H)) == 0


def test_fig1_mode_matrices():
    ir = protocol.fig1_ir()
    pre = mode_unitary(CircuitIR(elements=ir.elements[:2]))
    assert pre.dim == 8
    sector = {"1": 0, "3": 0, "1p": 0, "3p": 0, "2": 1, "4": 1, "2p": 1, "4p": 1}
    for r, out in enumerate(pre.rows):
        for c, inp in enumerate(pre.cols):
            if sector[out.spatial] != sector[inp.spatial]:
                assert pre.matrix[r, c] == 0
    full = mode_unitary(ir)
    assert full.dim == 12
    assert full.unitarity_error() < 1e-12


def analytic_post_bs_state(theta):
    """The post-beamsplitter state written out term by term from the analytic expansion.

    Four-photon pairs occupy (1p,2p), (1p,4p), (2p,3p), (3p,4p).
    """
    c, s = math.cos(theta), math.sin(theta)
    pairs = [("1p", "2p"), ("1p", "4p"), ("2p", "3p"), ("3p", "4p")]
    terms = {}
    for i, j in pairs:
        terms[f"{i}H:2,{j}H:2"] = -c * c / 2
        terms[f"{i}V:2,{j}V:2"] = -s * s / 2
        terms[f"{i}H:1,{i}V:1,{j}H:1,{j}V:1"] = -s * c / 2
    # +sin(2 theta)/2 |psi->_{1p3p} |psi->_{2p4p}
    amp = math.sin(2 * theta) / 2 / 2
    for (p1, p3, s13), (p2, p4, s24) in itertools.product([("H", "V", 1), ("V", "H", -1)], repeat=2):
        key = FockBasisVector.of([(ModeId("1p", Pol(p1)), 1), (ModeId("3p", Pol(p3)), 1),
                                  (ModeId("2p", Pol(p2)), 1), (ModeId("4p", Pol(p4)), 1)])
        terms[key.config()] = amp * s13 * s24
    return terms


@pytest.mark.parametrize("theta", THETAS)
def test_oracle_reproduces_post_bs_state(theta):
    ir = protocol.fig1_ir(BellKind.PhiPlus, theta)
    sub = CircuitIR(sources=ir.sources, elements=ir.elements[:2])
    out = oracle_state(protocol.initial_state(sub), sub)
    expected = analytic_post_bs_state(theta)
    assert len(out) == len(expected) == 16
    for cfg, amp in expected.items():
        assert abs(out.amplitude(cfg) - amp) < 1e-12, cfg
    assert out.norm() == pytest.approx(1, abs=1e-12)


def test_oracle_of_vacuum():
    ir = CircuitIR(elements=(beamsplitter("1", "3", "1p", "3p"),))
    vac = vacuum(ir.modes)
    assert oracle_state(vac, ir) == vac


def test_random_three_photon_four_mode_case(rng):
    for _ in range(20):
        u = random_unitary(rng)
        ir = CircuitIR(elements=(rotation("a", u), beamsplitter("a", "b", "c", "d"), rotation("d", random_unitary(rng))))
        state = random_input(rng, ir, ["a", "b"], max_photons=3)
        assert max_deviation(apply_elements(state, ir.elements), oracle_state(state, ir)) < 1e-10


def test_random_circuit_equivalence_with_naive_permanent(rng):
    for _ in range(15):
        ir, inputs = random_circuit(rng)
        state = random_input(rng, ir, inputs)
        engine = apply_elements(state, ir.elements)
        assert max_deviation(engine, oracle_state(state, ir)) < 1e-10
        assert max_deviation(engine, oracle_state(state, ir, permanent=permanent_naive)) < 1e-10
        assert mode_unitary(ir).unitarity_error() < 1e-12
