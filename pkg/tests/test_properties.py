import math
import tempfile
from pathlib import Path

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from qcollide import circuit, model
from qcollide.circuit import Gate
from qcollide.collision import TrajectoryRecord, collide, partial_iswap
from qcollide.io import read_trajectory, trajectory_csv
from qcollide.qcore import check_density_matrix, embed, kron, partial_trace, phase_aligned_distance

from conftest import random_density

angles = st.floats(-math.pi, math.pi, allow_nan=False)
unit = st.floats(0.0, 1.0, allow_nan=False)
seeds = st.integers(0, 2**31 - 1)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0.0, math.pi / 2), unit, unit)
def test_collision_is_a_channel(seed, theta, lam1, lamL):
    rho = random_density(np.random.default_rng(seed), 3)
    out = collide(rho, theta, model.bath_state(lam1), model.bath_state(lamL))
    check_density_matrix(out, psd_tol=-1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds, st.permutations([0, 1, 2, 3]))
def test_embed_is_a_slot_permutation(seed, perm):
    rng = np.random.default_rng(seed)
    ops = [rng.normal(size=(2, 2)) for _ in range(4)]
    placed = [None] * 4
    for op, slot in zip(ops, perm):
        placed[slot] = op
    assert np.allclose(embed(kron(*ops), list(perm), 4), kron(*placed))


@settings(max_examples=30, deadline=None)
@given(seeds, st.sets(st.integers(0, 3), min_size=1, max_size=3))
def test_partial_trace_of_products(seed, discard):
    rng = np.random.default_rng(seed)
    parts = [random_density(rng, 1) for _ in range(4)]
    kept = [p for i, p in enumerate(parts) if i not in discard]
    assert np.allclose(partial_trace(kron(*parts), sorted(discard)), kron(*kept))


@settings(max_examples=40, deadline=None)
@given(angles, angles, angles, angles, angles, angles)
def test_lowering_covers_conserving_gates(a, b, c, d, e, f):
    rz = lambda x: np.diag([np.exp(-0.5j * x), np.exp(0.5j * x)])  # noqa: E731
    g = model.two_site_hamiltonian(1.0, c, 0.0, 0.0)
    u = np.kron(rz(a), rz(b)) @ circuit.herm_expm(g, d) @ np.kron(rz(e), rz(f))
    layers = circuit.lower_two_qubit(u, 0, 1)
    ir = circuit.GateIR(2, layers, [0] * len(layers), native=True)
    assert phase_aligned_distance(circuit.segment_unitary(ir, 0), u) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, math.pi / 2))
def test_lowered_swap_matches(theta):
    layers = circuit.lower_gate(Gate("ISWAP_POW", (0, 1), (theta,)))
    ir = circuit.GateIR(2, layers, [0] * 12, native=True)
    assert phase_aligned_distance(circuit.segment_unitary(ir, 0), partial_iswap(theta)) < 1e-9


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=7, max_size=7), st.integers(1, 5))
def test_trajectory_csv_round_trip(values, n):
    row = np.array(values)
    rec = TrajectoryRecord(np.arange(1, n + 1), 0.05 * np.arange(1, n + 1), np.tile(row[:4], (n, 1)), np.tile(row[4:], (n, 1)))
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "t.csv"
        path.write_text(trajectory_csv(rec))
        back = read_trajectory(path)
    assert np.array_equal(back.magnetizations, rec.magnetizations)
    assert np.array_equal(back.currents, rec.currents)
    assert np.array_equal(back.time, rec.time)
