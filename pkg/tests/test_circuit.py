from pathlib import Path

import numpy as np
import pytest
from scipy.linalg import expm

from qcollide import circuit, model
from qcollide.circuit import CircuitError, Gate, GateIR
from qcollide.collision import CollisionParams, run_collisional, trotter_unitary
from qcollide.model import BathSpec, ChainSpec
from qcollide.qcore import UP, embed, kron, partial_trace, phase_aligned_distance

GOLDEN = Path(__file__).parent / "golden"
XX_YY = np.kron(model.X, model.X) + np.kron(model.Y, model.Y)


def lowered_unitary(layers, qubits=(0, 1)):
    ir = GateIR(len(qubits), layers, [0] * len(layers), native=True)
    return circuit.segment_unitary(ir, 0)


def test_lowered_iswap_pow_matches_generator():
    layers = circuit.lower_gate(Gate("ISWAP_POW", (0, 1), (0.439,)))
    exact = expm(-1j * 0.439 * XX_YY / 2)
    assert phase_aligned_distance(lowered_unitary(layers), exact) < 1e-9


def test_lowered_bond_evolve_matches_expm():
    layers = circuit.lower_gate(Gate("BOND_EVOLVE", (0, 1), (1.0, 0.01, 1.0, 1.0, 0.0, 0.0)))
    exact = expm(-1j * 0.01 * (XX_YY + np.kron(model.Z, model.Z)))
    assert phase_aligned_distance(lowered_unitary(layers), exact) < 1e-9


def test_template_shape():
    layers = circuit.lower_gate(Gate("BOND_EVOLVE", (3, 4), (3.0, 0.2, 1.0, 1.5, 0.5, -0.5)))
    assert len(layers) == 12
    names = [{g.name for g in layer} for layer in layers]
    assert sum(n == {"CNOT"} for n in names) == 3
    assert sum(n == {"RZ"} for n in names) == 5
    assert sum(n == {"SX"} for n in names) == 4
    assert all(set(g.qubits) <= {3, 4} for layer in layers for g in layer)


def test_random_conserving_unitaries_lower_exactly(rng):
    for _ in range(25):
        z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        q, _ = np.linalg.qr(z)
        u = np.zeros((4, 4), dtype=complex)
        u[0, 0], u[3, 3] = np.exp(1j * rng.uniform(0, 2 * np.pi, 2))
        u[1:3, 1:3] = q
        assert phase_aligned_distance(lowered_unitary(circuit.lower_two_qubit(u, 0, 1)), u) < 1e-9


def test_non_conserving_unitary_is_rejected():
    with pytest.raises(CircuitError):
        circuit.lower_two_qubit(np.kron(model.X, np.eye(2)), 0, 1)


def spec_bath_params(L, tau=0.2, dt=0.05, n=2, theta=None, lam=(1.0, 0.0), h=None):
    spec = ChainSpec(L, 1.0, 1.5, tuple(h) if h is not None else (0.0,) * L)
    bath = BathSpec(1.0, *lam)
    return spec, bath, CollisionParams.from_rates(1.0, tau, dt, n, theta)


def test_emitted_native_circuits_verify():
    for L in (2, 4):
        spec, bath, params = spec_bath_params(L, h=[0.3 * (-1) ** k for k in range(L)])
        ir = circuit.emit_collisions(spec, bath, params, native=True)
        assert ir.native and ir.source is not None
        assert circuit.verify_lowering(ir) < 1e-9
        assert circuit.verify_lowering(ir.source) < 1e-9


def test_identity_and_empty_programs():
    assert circuit.verify_lowering(GateIR(3)) == 0.0
    spec, bath, params = spec_bath_params(2)
    ir = circuit.emit_collisions(spec, bath, params, n_collisions=0, native=True)
    assert ir.depth == 0
    assert circuit.estimate_duration(ir, circuit.PROFILES["manila"]).total_ns == 0.0


def test_overlapping_gates_are_rejected():
    ir = GateIR(3, [[Gate("SX", (0,)), Gate("CNOT", (0, 1))]], [0])
    with pytest.raises(CircuitError, match="overlap"):
        circuit.verify_lowering(ir)
    with pytest.raises(CircuitError):
        Gate("CNOT", (1, 1))
    with pytest.raises(CircuitError):
        Gate("RZ", (0,))


def test_zero_theta_elides_swaps_and_is_pure_trotter():
    spec, bath, params = spec_bath_params(4, theta=0.0, n=1)
    ir = circuit.emit_collisions(spec, bath, params)
    assert not any(g.name == "ISWAP_POW" for g in ir.gates())
    u = circuit.segment_unitary(ir, 0)
    sys = embed(trotter_unitary(spec, params.dt, params.n_steps), [1, 2, 3, 4], 6)
    # ancilla X flip factors out on the right bath
    sys = embed(model.X, [5], 6) @ sys
    assert phase_aligned_distance(u, sys) < 1e-12


def test_refresh_ops_flip_the_down_bath():
    spec, bath, params = spec_bath_params(2, lam=(1.0, 0.0), n=1)
    ir = circuit.emit_collisions(spec, bath, params)
    flips = [g.qubits for g in ir.gates() if g.name == "X"]
    assert flips == [(3,)]
    spec, bath, params = spec_bath_params(2, lam=(0.5, 0.0), n=1)
    with pytest.raises(CircuitError, match="mixed"):
        circuit.emit_collisions(spec, bath, params)


@pytest.mark.parametrize("L,native", [(2, False), (2, True), (4, True)])
def test_simulated_program_matches_engine(L, native):
    spec, bath, params = spec_bath_params(L, n=3, lam=(1.0, 0.0), h=[0.2 * k for k in range(L)])
    ir = circuit.emit_collisions(spec, bath, params, native=native)
    rec = run_collisional(spec, bath, params)
    rho0 = kron(UP, model.default_initial_state(L), UP)
    out = partial_trace(circuit.simulate(ir, rho0), [0, L + 1])
    assert np.linalg.norm(out - rec.final_state) < 1e-9


def test_two_spin_unitary_block_budget():
    spec, bath, params = spec_bath_params(2, tau=0.2, dt=0.2, n=1)
    ir = circuit.emit_collisions(spec, bath, params, native=True)
    block = circuit.restrict(ir, [1, 2], [0])
    counts = circuit.layer_breakdown(block)
    assert counts["single_qubit"] == 9 and counts["two_qubit"] == 3
    rep = circuit.estimate_duration(block, circuit.PROFILES["manila"])
    assert rep.total_ns == pytest.approx(4 * 35.5 + 3 * 576)
    assert abs(rep.total_ns - 1900) / 1900 < 0.1


def test_measure_reset_layer_costs():
    ir = GateIR(2, [[Gate("MEASURE", (0,)), Gate("RZ", (1,), (0.3,))], [Gate("RESET", (0,))]], [0, 0])
    assert circuit.estimate_duration(ir, circuit.PROFILES["manila"]).total_ns == 5300.0
    ionq = circuit.PROFILES["ionq-harmony"]
    reset_only = GateIR(1, [[Gate("RESET", (0,))]], [0])
    assert circuit.estimate_duration(reset_only, ionq).total_ns == 25_000.0
    assert ionq.gate_cost(Gate("MEASURE", (0,))) == 100_000.0
    assert ionq.gate_cost(Gate("RZ", (0,), (0.1,))) == 10_000.0


def test_duration_additive_in_collisions():
    spec, bath, params = spec_bath_params(4)
    t = circuit.PROFILES["manila"]
    one = circuit.estimate_duration(circuit.emit_collisions(spec, bath, params, 1, native=True), t)
    three = circuit.estimate_duration(circuit.emit_collisions(spec, bath, params, 3, native=True), t)
    assert three.total_ns == pytest.approx(3 * one.total_ns)
    assert three.per_collision_ns == pytest.approx(one.total_ns)
    assert three.coherence_ratio == pytest.approx(three.total_ns / 67_300)


def test_timing_profiles(tmp_path):
    assert circuit.PROFILES["manila"].T1 == 188.77
    with pytest.raises(ValueError, match="T2"):
        circuit.TimingModel("bad", 1, 1, 1, T1=10.0, T2=30.0)
    path = tmp_path / "lab.ini"
    path.write_text("[timing]\nname = lab\nt_1q = 20\nt_2q = 300\nt_meas_reset = 1000\nT1 = 100\nT2 = 150\nrz_free = false\n")
    prof = circuit.load_profile(str(path))
    assert prof.name == "lab" and prof.t_2q == 300.0 and not prof.rz_free
    with pytest.raises(KeyError):
        circuit.load_profile("no-such-device")


def test_text_round_trip():
    spec, bath, params = spec_bath_params(4, n=2)
    ir = circuit.emit_collisions(spec, bath, params, native=True)
    back = circuit.loads(circuit.dumps(ir, "manila"))
    assert back.layers == ir.layers and back.segments == ir.segments and back.native
    with pytest.raises(CircuitError, match="line 2"):
        circuit.loads("# n_qubits=2\nLAYER 0: FOO 1\n")


def test_golden_two_spin_circuit():
    spec, bath, params = spec_bath_params(2, tau=0.2, dt=0.2, n=1)
    text = circuit.dumps(circuit.emit_collisions(spec, bath, params), "manila")
    assert text == (GOLDEN / "two_spin_macro.txt").read_text()
