"""Gate-level form of the collision protocol and its hardware cost.

Qubit ``0`` is the left ancilla, qubits ``1..L`` the chain and ``L+1`` the
right ancilla. A program is a list of layers of gates on disjoint qubits.
Layers are grouped into segments: each collision contributes a "refresh and
evolve" segment and, unless theta is zero, a "swap" segment.

Macro gates (``ISWAP_POW``, ``BOND_EVOLVE``) are lowered to ``RZ``, ``SX`` and
``CNOT`` with a fixed 12-layer template: three CNOT layers and nine
single-qubit layers, five of which contain only ``RZ``.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import model
from .collision import CollisionParams, partial_iswap
from .model import BathSpec, ChainSpec
from .qcore import X, embed, herm_expm, phase_aligned_distance

ONE_QUBIT = {"RZ", "SX", "X", "MEASURE", "RESET"}
TWO_QUBIT = {"CNOT", "ISWAP_POW", "BOND_EVOLVE"}
MACRO = {"ISWAP_POW", "BOND_EVOLVE"}
NON_UNITARY = {"MEASURE", "RESET"}
N_PARAMS = {"RZ": 1, "SX": 0, "X": 0, "MEASURE": 0, "RESET": 0, "CNOT": 0, "ISWAP_POW": 1, "BOND_EVOLVE": 6}

SX_MATRIX = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])
CNOT_MATRIX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.name not in N_PARAMS:
            raise CircuitError(f"unknown gate {self.name!r}")
        arity = 1 if self.name in ONE_QUBIT else 2
        if len(self.qubits) != arity or len(set(self.qubits)) != arity:
            raise CircuitError(f"{self.name} needs {arity} distinct qubits, got {self.qubits}")
        if len(self.params) != N_PARAMS[self.name]:
            raise CircuitError(f"{self.name} takes {N_PARAMS[self.name]} parameters, got {len(self.params)}")


@dataclass
class GateIR:
    n_qubits: int
    layers: list[list[Gate]] = field(default_factory=list)
    segments: list[int] = field(default_factory=list)
    native: bool = False
    n_collisions: int = 0
    source: "GateIR | None" = field(default=None, repr=False, compare=False)

    def validate(self) -> None:
        if len(self.segments) != len(self.layers):
            raise CircuitError("every layer needs a segment id")
        for k, layer in enumerate(self.layers):
            seen: set[int] = set()
            for g in layer:
                if any(q < 0 or q >= self.n_qubits for q in g.qubits):
                    raise CircuitError(f"layer {k}: {g.name} uses qubit outside 0..{self.n_qubits - 1}")
                if seen & set(g.qubits):
                    raise CircuitError(f"layer {k}: gates overlap on qubits {sorted(seen & set(g.qubits))}")
                seen |= set(g.qubits)

    def segment_ids(self) -> list[int]:
        return list(dict.fromkeys(self.segments))

    def segment_layers(self, seg: int) -> list[list[Gate]]:
        return [layer for layer, s in zip(self.layers, self.segments) if s == seg]

    @property
    def depth(self) -> int:
        return len(self.layers)

    def gates(self):
        for layer in self.layers:
            yield from layer


# -- gate matrices -----------------------------------------------------------


def rz(phi: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)])


def gate_matrix(g: Gate) -> np.ndarray:
    if g.name == "RZ":
        return rz(g.params[0])
    if g.name == "SX":
        return SX_MATRIX
    if g.name == "X":
        return X
    if g.name == "CNOT":
        return CNOT_MATRIX
    if g.name == "ISWAP_POW":
        return partial_iswap(g.params[0])
    if g.name == "BOND_EVOLVE":
        _, t, J, Delta, h_left, h_right = g.params
        return herm_expm(model.two_site_hamiltonian(J, Delta, h_left, h_right), t)
    raise CircuitError(f"{g.name} has no unitary matrix")


# -- lowering ----------------------------------------------------------------


def _wrap(angle: float) -> float:
    return math.remainder(angle, 2 * math.pi)


def _zxz(m: np.ndarray) -> tuple[float, float, float, float]:
    """m = exp(i phase) Rz(p) Rx(q) Rz(r) for a 2x2 unitary ``m``."""
    phase = 0.5 * np.angle(np.linalg.det(m))
    v = m * np.exp(-1j * phase)
    a, b = v[0, 0], v[0, 1]
    q = 2 * math.atan2(abs(b), abs(a))
    p_plus_r = -2 * np.angle(a) if abs(a) > 1e-12 else 0.0
    p_minus_r = -2 * (np.angle(b) + math.pi / 2) if abs(b) > 1e-12 else 0.0
    return phase, 0.5 * (p_plus_r + p_minus_r), q, 0.5 * (p_plus_r - p_minus_r)


def _template(qa: int, qb: int, before: tuple[float, float], after: tuple[float, float], xy: float, zz: float):
    """RZ pair, exp(-i(xy (XX+YY) + zz ZZ)) on three CNOTs, RZ pair; 12 layers."""
    # three-CNOT circuit for exp(i(a XX + b YY + c ZZ)) with a = b = -xy, c = -zz
    a, c = -xy, -zz
    ry1 = 2 * a - math.pi / 2
    ry2 = math.pi / 2 - 2 * a
    pi = math.pi
    layers = [
        [Gate("RZ", (qa,), (_wrap(before[0]),)), Gate("RZ", (qb,), (_wrap(before[1] - pi / 2),))],
        [Gate("CNOT", (qb, qa))],
        [Gate("RZ", (qa,), (_wrap(pi / 2 - 2 * c),)), Gate("RZ", (qb,), (pi,))],
        [Gate("SX", (qb,))],
        [Gate("RZ", (qb,), (_wrap(pi - ry1),))],
        [Gate("SX", (qb,))],
        [Gate("CNOT", (qa, qb))],
        [Gate("SX", (qb,))],
        [Gate("RZ", (qb,), (_wrap(ry2 + pi),))],
        [Gate("SX", (qb,))],
        [Gate("CNOT", (qb, qa))],
        # trailing RZ(pi) of the second Ry commutes through the control of the last CNOT
        [Gate("RZ", (qa,), (_wrap(pi / 2 + after[0]),)), Gate("RZ", (qb,), (_wrap(pi + after[1]),))],
    ]
    return layers


def _layers_unitary(layers: list[list[Gate]], qubits: tuple[int, ...]) -> np.ndarray:
    index = {q: i for i, q in enumerate(qubits)}
    u = np.eye(2 ** len(qubits), dtype=complex)
    for layer in layers:
        for g in layer:
            u = embed(gate_matrix(g), [index[q] for q in g.qubits], len(qubits)) @ u
    return u


def lower_two_qubit(u: np.ndarray, qa: int, qb: int) -> list[list[Gate]]:
    """Lower a magnetization-conserving 4x4 unitary to the 12-layer native template."""
    off_block = np.abs(u[[0, 0, 0, 1, 2, 3, 3, 3], [1, 2, 3, 0, 0, 0, 1, 2]]).max()
    off_block = max(off_block, abs(u[1, 3]), abs(u[2, 3]), abs(u[1, 0]), abs(u[2, 0]))
    if off_block > 1e-10:
        raise CircuitError("lowering template only covers gates that conserve total Z")
    phi, p, q, r = _zxz(u[1:3, 1:3])
    g_minus_c = 0.5 * np.angle(u[0, 0] * u[3, 3])
    s = 0.5 * np.angle(u[3, 3] / u[0, 0])
    c = 0.5 * (phi - g_minus_c)
    xy = q / 4
    best = None
    for shift in (0.0, math.pi):
        before = (s + shift + r / 2, s + shift - r / 2)
        layers = _template(qa, qb, before, (p / 2, -p / 2), xy, c)
        err = phase_aligned_distance(_layers_unitary(layers, (qa, qb)), u)
        if best is None or err < best[0]:
            best = (err, layers)
    return best[1]


def lower_gate(g: Gate) -> list[list[Gate]]:
    if g.name in MACRO:
        return lower_two_qubit(gate_matrix(g), *g.qubits)
    return [[g]]


def _zip_layers(blocks: list[list[list[Gate]]]) -> list[list[Gate]]:
    depth = max((len(b) for b in blocks), default=0)
    return [[g for b in blocks if k < len(b) for g in b[k]] for k in range(depth)]


def _split_side_ops(layers: list[list[Gate]]):
    """Separate ancilla refresh ops (qubits that see MEASURE/RESET in this segment) from the rest."""
    side_qubits = {q for layer in layers for g in layer if g.name in NON_UNITARY for q in g.qubits}
    main, side = [], []
    for layer in layers:
        main.append([g for g in layer if not set(g.qubits) & side_qubits])
        side.append([g for g in layer if set(g.qubits) & side_qubits])
    if any(g.name in TWO_QUBIT for layer in side for g in layer):
        raise CircuitError("refreshed qubits may only carry single-qubit gates within a segment")
    return main, [layer for layer in side if layer]


def lower(ir: GateIR) -> GateIR:
    """Native version of a macro program; refresh ops are overlaid on the first native layers."""
    if ir.native:
        return ir
    ir.validate()
    layers, segments = [], []
    for seg in ir.segment_ids():
        main, side = _split_side_ops(ir.segment_layers(seg))
        native: list[list[Gate]] = []
        for layer in main:
            native.extend(_zip_layers([lower_gate(g) for g in layer]))
        native = [layer for layer in native if layer]
        for k, ops in enumerate(side):
            if k < len(native):
                native[k] = ops + native[k]
            else:
                native.append(list(ops))
        layers.extend(native)
        segments.extend([seg] * len(native))
    out = GateIR(ir.n_qubits, layers, segments, native=True, n_collisions=ir.n_collisions, source=ir)
    out.validate()
    return out


# -- emission ----------------------------------------------------------------


def _bond_gate(spec: ChainSpec, l: int, t: float) -> Gate:
    h_left, h_right = model.bond_fields(spec, l)
    return Gate("BOND_EVOLVE", (l, l + 1), (float(l), t, spec.J, spec.Delta, h_left, h_right))


def trotter_layers(spec: ChainSpec, dt: float, n_steps: int) -> list[list[Gate]]:
    """Macro layers of [U(dt)]^n with neighbouring even half-steps merged."""
    odd = lambda t: [_bond_gate(spec, l, t) for l in spec.odd_bonds]  # noqa: E731
    even = lambda t: [_bond_gate(spec, l, t) for l in spec.even_bonds]  # noqa: E731
    if not spec.even_bonds:
        return [odd(dt) for _ in range(n_steps)]
    layers = [even(dt / 2)]
    for k in range(n_steps):
        layers.append(odd(dt))
        layers.append(even(dt if k < n_steps - 1 else dt / 2))
    return layers


def refresh_ops(bath: BathSpec, L: int) -> list[list[Gate]]:
    """Measure, reset to |0> = up, then flip the ancillae whose bath is spin down."""
    right = L + 1
    flips = []
    for q, lam in ((0, bath.lambda_1), (right, bath.lambda_L)):
        if lam not in (0.0, 1.0):
            raise CircuitError(f"bath with lambda={lam} is mixed; only pure up/down baths can be emitted")
        if lam == 0.0:
            flips.append(Gate("X", (q,)))
    ops = [[Gate("MEASURE", (0,)), Gate("MEASURE", (right,))], [Gate("RESET", (0,)), Gate("RESET", (right,))]]
    if flips:
        ops.append(flips)
    return ops


def emit_collisions(
    spec: ChainSpec,
    bath: BathSpec,
    params: CollisionParams,
    n_collisions: int | None = None,
    native: bool = False,
) -> GateIR:
    """Program for ``n_collisions`` collisions; ``native`` lowers it to RZ/SX/CNOT."""
    if spec.L < 2:
        raise CircuitError("circuit emission needs at least two sites")
    n = params.n_collisions if n_collisions is None else n_collisions
    L = spec.L
    trotter = trotter_layers(spec, params.dt, params.n_steps)
    refresh = refresh_ops(bath, L)
    swaps = [Gate("ISWAP_POW", (0, 1), (params.theta,)), Gate("ISWAP_POW", (L, L + 1), (params.theta,))]
    ir = GateIR(L + 2, n_collisions=n)
    seg = 0
    for _ in range(n):
        stage = [list(r) for r in refresh] + [[] for _ in range(max(0, len(trotter) - len(refresh)))]
        for k, layer in enumerate(trotter):
            stage[k] = stage[k] + list(layer)
        ir.layers.extend(stage)
        ir.segments.extend([seg] * len(stage))
        seg += 1
        if params.theta != 0.0:
            ir.layers.append(list(swaps))
            ir.segments.append(seg)
            seg += 1
    ir.validate()
    return lower(ir) if native else ir


def restrict(ir: GateIR, qubits, segments=None) -> GateIR:
    """Sub-program keeping only gates entirely on ``qubits`` (and in ``segments``)."""
    qubits = set(qubits)
    layers, segs = [], []
    for layer, s in zip(ir.layers, ir.segments):
        if segments is not None and s not in segments:
            continue
        kept = [g for g in layer if set(g.qubits) <= qubits]
        if kept:
            layers.append(kept)
            segs.append(s)
    return GateIR(ir.n_qubits, layers, segs, native=ir.native, n_collisions=ir.n_collisions)


def layer_breakdown(ir: GateIR) -> dict[str, int]:
    counts = {"single_qubit": 0, "rz_only": 0, "two_qubit": 0, "measure_reset": 0}
    for layer in ir.layers:
        names = {g.name for g in layer}
        if names & TWO_QUBIT:
            counts["two_qubit"] += 1
        elif names & NON_UNITARY:
            counts["measure_reset"] += 1
        else:
            counts["single_qubit"] += 1
            if names == {"RZ"}:
                counts["rz_only"] += 1
    return counts


# -- verification and simulation --------------------------------------------


def segment_unitary(ir: GateIR, seg: int) -> np.ndarray:
    """Product of the unitary gates of one segment (MEASURE/RESET skipped)."""
    layers = [[g for g in layer if g.name not in NON_UNITARY] for layer in ir.segment_layers(seg)]
    return _layers_unitary(layers, tuple(range(ir.n_qubits)))


def verify_lowering(ir: GateIR) -> float:
    """Largest phase-aligned Frobenius error between native and exact segment unitaries."""
    ir.validate()
    if ir.native:
        if ir.source is None:
            raise CircuitError("native program has no macro source to verify against")
        exact, lowered = ir.source, ir
    else:
        exact, lowered = ir, lower(ir)
    exact.validate()
    if exact.segment_ids() != lowered.segment_ids():
        raise CircuitError("lowered program has a different segment structure")
    err = 0.0
    for seg in exact.segment_ids():
        err = max(err, phase_aligned_distance(segment_unitary(lowered, seg), segment_unitary(exact, seg)))
    return err


def simulate(ir: GateIR, rho: np.ndarray) -> np.ndarray:
    """Apply the program to a density matrix; MEASURE dephases, RESET prepares |0>."""
    ir.validate()
    n = ir.n_qubits
    p0 = np.array([[1, 0], [0, 0]], dtype=complex)
    p1 = np.array([[0, 0], [0, 1]], dtype=complex)
    lower_op = np.array([[0, 1], [0, 0]], dtype=complex)
    rho = np.array(rho, dtype=complex)
    for layer in ir.layers:
        for g in layer:
            if g.name == "MEASURE":
                kraus = [p0, p1]
            elif g.name == "RESET":
                kraus = [p0, lower_op]
            else:
                u = embed(gate_matrix(g), list(g.qubits), n)
                rho = u @ rho @ u.conj().T
                continue
            ks = [embed(k, list(g.qubits), n) for k in kraus]
            rho = sum(k @ rho @ k.conj().T for k in ks)
    return rho


# -- timing ------------------------------------------------------------------


@dataclass(frozen=True)
class TimingModel:
    """Gate durations in nanoseconds, coherence times in microseconds."""

    name: str
    t_1q: float
    t_2q: float
    t_meas_reset: float
    T1: float
    T2: float
    t_measure: float = 0.0
    rz_free: bool = True

    def __post_init__(self):
        for key in ("t_1q", "t_2q", "t_meas_reset", "t_measure", "T1", "T2"):
            if getattr(self, key) < 0:
                raise ValueError(f"{key} must be non-negative")
        if self.T2 > 2 * self.T1:
            raise ValueError(f"T2={self.T2} exceeds 2*T1={2 * self.T1}")

    def gate_cost(self, g: Gate) -> float:
        if g.name == "RZ":
            return 0.0 if self.rz_free else self.t_1q
        if g.name in ("SX", "X"):
            return self.t_1q
        if g.name == "MEASURE":
            return self.t_measure
        if g.name == "RESET":
            return self.t_meas_reset
        return self.t_2q


PROFILES = {
    # median IBM Manila figures; the 5.3 us covers measurement plus reset
    "manila": TimingModel("manila", t_1q=35.5, t_2q=576.0, t_meas_reset=5300.0, T1=188.77, T2=67.3),
    "ionq-harmony": TimingModel(
        "ionq-harmony",
        t_1q=10_000.0,
        t_2q=210_000.0,
        t_meas_reset=25_000.0,
        t_measure=100_000.0,
        T1=1e7,
        T2=2e5,
        rz_free=False,
    ),
}


def load_profile(name_or_path: str) -> TimingModel:
    """Built-in profile by name, or a file with a ``[timing]`` section."""
    if name_or_path in PROFILES:
        return PROFILES[name_or_path]
    path = Path(name_or_path)
    if not path.is_file():
        raise KeyError(f"unknown timing profile {name_or_path!r}; built-ins: {sorted(PROFILES)}")
    cp = configparser.ConfigParser()
    cp.read(path)
    if not cp.has_section("timing"):
        raise ValueError(f"{path}: missing [timing] section")
    sec = cp["timing"]
    try:
        return TimingModel(
            name=sec.get("name", path.stem),
            t_1q=sec.getfloat("t_1q"),
            t_2q=sec.getfloat("t_2q"),
            t_meas_reset=sec.getfloat("t_meas_reset"),
            T1=sec.getfloat("T1"),
            T2=sec.getfloat("T2"),
            t_measure=sec.getfloat("t_measure", 0.0),
            rz_free=sec.getboolean("rz_free", True),
        )
    except TypeError:
        raise ValueError(f"{path}: [timing] needs t_1q, t_2q, t_meas_reset, T1 and T2") from None


@dataclass(frozen=True)
class DurationReport:
    total_ns: float
    per_collision_ns: float
    coherence_ratio: float
    layers: dict = field(default_factory=dict)


def estimate_duration(ir: GateIR, timing: TimingModel) -> DurationReport:
    """Sum over layers of the slowest gate in each layer."""
    ir.validate()
    total = sum(max((timing.gate_cost(g) for g in layer), default=0.0) for layer in ir.layers)
    per = total / ir.n_collisions if ir.n_collisions else total
    return DurationReport(total, per, total / (timing.T2 * 1000.0), layer_breakdown(ir))


# -- text format -------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps(ir: GateIR, profile: str | None = None) -> str:
    lines = [
        "# qcollide circuit v1",
        f"# n_qubits={ir.n_qubits}",
        f"# profile={profile or 'none'}",
        f"# native={int(ir.native)}",
        f"# n_collisions={ir.n_collisions}",
    ]
    current = None
    for k, (layer, seg) in enumerate(zip(ir.layers, ir.segments)):
        if seg != current:
            lines.append(f"# SEGMENT {seg}")
            current = seg
        for g in layer:
            params = ", ".join(_fmt(p) for p in g.params)
            qubits = ",".join(f"q{q}" for q in g.qubits)
            lines.append(f"LAYER {k}: {g.name}({params}) {qubits}")
    return "\n".join(lines) + "\n"


_GATE_LINE = re.compile(r"^LAYER (\d+): ([A-Z_]+)\(([^)]*)\) (q\d+(?:,q\d+)*)$")
_HEADER = re.compile(r"^# (\w+)=(.*)$")


def loads(text: str) -> GateIR:
    header: dict[str, str] = {}
    layers: dict[int, list[Gate]] = {}
    seg_of: dict[int, int] = {}
    seg = 0
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("# SEGMENT "):
            seg = int(line.split()[2])
            continue
        m = _HEADER.match(line)
        if m:
            header[m.group(1)] = m.group(2)
            continue
        if line.startswith("#"):
            continue
        m = _GATE_LINE.match(line)
        if not m:
            raise CircuitError(f"line {lineno}: cannot parse {line!r}")
        k = int(m.group(1))
        params = tuple(float(p) for p in m.group(3).split(",") if p.strip())
        qubits = tuple(int(q[1:]) for q in m.group(4).split(","))
        layers.setdefault(k, []).append(Gate(m.group(2), qubits, params))
        seg_of[k] = seg
    order = sorted(layers)
    if order != list(range(len(order))):
        raise CircuitError("layer numbers must be consecutive from 0")
    ir = GateIR(
        int(header["n_qubits"]),
        [layers[k] for k in order],
        [seg_of[k] for k in order],
        native=header.get("native", "0") == "1",
        n_collisions=int(header.get("n_collisions", "0")),
    )
    ir.validate()
    return ir

