"""Dense linear algebra over small qubit registers.

Operators and density matrices are plain ``numpy`` complex arrays. Slot 0 is
the most significant tensor factor, so ``kron(a, b)`` puts ``a`` on slot 0.
Basis state 0 is spin up (+1 eigenvector of Z).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
# sigma^+ raises |down> = |1> to |up> = |0>
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()
UP = np.array([[1, 0], [0, 0]], dtype=complex)
DOWN = np.array([[0, 0], [0, 1]], dtype=complex)

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = -1e-10


@dataclass(frozen=True)
class QubitLayout:
    """Map between physical roles and tensor slots.

    ``QubitLayout.chain(L)`` gives the collisional register: slot 0 is the
    left ancilla, slots 1..L the chain sites, slot L+1 the right ancilla.
    """

    n_total: int
    system_indices: tuple[int, ...]
    ancilla_left_index: int | None = None
    ancilla_right_index: int | None = None

    def __post_init__(self):
        used = list(self.system_indices)
        for idx in (self.ancilla_left_index, self.ancilla_right_index):
            if idx is not None:
                used.append(idx)
        if sorted(used) != list(range(self.n_total)):
            raise ValueError(f"layout indices {used} are not a permutation of 0..{self.n_total - 1}")
        sys_idx = list(self.system_indices)
        if sys_idx != list(range(sys_idx[0], sys_idx[0] + len(sys_idx))):
            raise ValueError("system indices must be contiguous and in chain order")

    @classmethod
    def chain(cls, n_sites: int) -> "QubitLayout":
        return cls(n_sites + 2, tuple(range(1, n_sites + 1)), 0, n_sites + 1)

    @classmethod
    def register(cls, n_qubits: int) -> "QubitLayout":
        return cls(n_qubits, tuple(range(n_qubits)))

    @property
    def n_system(self) -> int:
        return len(self.system_indices)

    @property
    def ancilla_indices(self) -> tuple[int, ...]:
        return tuple(i for i in (self.ancilla_left_index, self.ancilla_right_index) if i is not None)


def _n_qubits(layout: QubitLayout | int) -> int:
    return layout.n_total if isinstance(layout, QubitLayout) else int(layout)


def n_qubits_of(mat: np.ndarray) -> int:
    dim = mat.shape[0]
    n = dim.bit_length() - 1
    if mat.ndim != 2 or mat.shape[1] != dim or dim < 2 or 2**n != dim:
        raise ValueError(f"expected a square matrix with power-of-two dimension, got shape {mat.shape}")
    return n


def kron(*ops: np.ndarray) -> np.ndarray:
    """Tensor product; the leftmost factor occupies the lowest slot index."""
    return reduce(np.kron, ops)


def embed(op: np.ndarray, slots: Sequence[int], layout: QubitLayout | int) -> np.ndarray:
    """Lift ``op`` acting on ``slots`` (in the given order) to the full register."""
    n = _n_qubits(layout)
    slots = list(slots)
    k = len(slots)
    if op.shape != (2**k, 2**k):
        raise ValueError(f"operator of shape {op.shape} does not act on {k} qubits")
    if len(set(slots)) != k:
        raise ValueError(f"duplicate slots in {slots}")
    if any(s < 0 or s >= n for s in slots):
        raise ValueError(f"slots {slots} out of range for {n} qubits")
    rest = [q for q in range(n) if q not in slots]
    full = np.kron(op, np.eye(2 ** (n - k), dtype=complex))
    order = slots + rest
    if order == list(range(n)):
        return full
    # axes of ``full`` are labelled by ``order``; move each back to its slot
    perm = np.argsort(order)
    t = full.reshape([2] * (2 * n))
    t = t.transpose(list(perm) + [n + p for p in perm])
    return t.reshape(2**n, 2**n)


def partial_trace(rho: np.ndarray, discard: Sequence[int], layout: QubitLayout | int | None = None) -> np.ndarray:
    """Trace out the ``discard`` slots and return the marginal on the rest (slot order kept)."""
    n = n_qubits_of(rho) if layout is None else _n_qubits(layout)
    if rho.shape != (2**n, 2**n):
        raise ValueError(f"matrix of shape {rho.shape} does not match {n} qubits")
    discard = sorted(set(discard))
    if any(q < 0 or q >= n for q in discard):
        raise ValueError(f"discard indices {discard} out of range for {n} qubits")
    keep = [q for q in range(n) if q not in discard]
    if not keep:
        raise ValueError("cannot discard every qubit")
    t = rho.reshape([2] * (2 * n))
    t = t.transpose(keep + discard + [n + q for q in keep] + [n + q for q in discard])
    dk, dd = 2 ** len(keep), 2 ** len(discard)
    return np.einsum("ijkj->ik", t.reshape(dk, dd, dk, dd))


def is_hermitian(mat: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.linalg.norm(mat - mat.conj().T) <= tol)


def herm_expm(h: np.ndarray, t: float) -> np.ndarray:
    """Return exp(-i h t) for Hermitian ``h`` using its eigendecomposition."""
    if not is_hermitian(h):
        raise ValueError("herm_expm needs a Hermitian generator")
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def frob_distance(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def unitarity_error(u: np.ndarray) -> float:
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])))


def phase_aligned_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Frobenius distance after removing the best global phase between two unitaries."""
    overlap = np.vdot(a.ravel(), b.ravel())
    phase = overlap / abs(overlap) if abs(overlap) > 1e-300 else 1.0
    return float(np.linalg.norm(a * phase - b))


def check_density_matrix(rho: np.ndarray, psd_tol: float = PSD_TOL) -> None:
    """Raise ``ValueError`` unless ``rho`` is Hermitian, unit-trace and PSD within tolerance."""
    n_qubits_of(rho)
    if np.linalg.norm(rho - rho.conj().T) > 1e-12 * max(1.0, np.linalg.norm(rho)) + 1e-12:
        raise ValueError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1) > TRACE_TOL:
        raise ValueError(f"density matrix has trace {tr.real:.3e}{tr.imag:+.3e}j")
    lo = np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()
    if lo < psd_tol:
        raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")


def basis_density(bits: Sequence[int]) -> np.ndarray:
    """Projector onto a computational basis state; bit 0 is up, 1 is down."""
    return kron(*[UP if b == 0 else DOWN for b in bits])


def spin_state(spins: str) -> np.ndarray:
    """Projector from a string such as ``"uudd"`` (u = up, d = down)."""
    try:
        bits = [{"u": 0, "d": 1}[c] for c in spins.lower()]
    except KeyError:
        raise ValueError(f"spin string {spins!r} may only contain 'u' and 'd'") from None
    return basis_density(bits)


def pure_density(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def expectation(op: np.ndarray, rho: np.ndarray) -> float:
    return float(np.real(np.trace(op @ rho)))
