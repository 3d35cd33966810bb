"""Reference GKSL dynamics for the boundary-driven chain.

Vectorization stacks columns: vec(A X B) = (B^T kron A) vec(X), and a
density matrix is recovered with ``reshape(d, d, order="F")``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import model
from .model import BathSpec, ChainSpec
from .qcore import SIGMA_MINUS, SIGMA_PLUS

log = logging.getLogger(__name__)

MAX_NESS_SITES = 5
MAX_GAP_SITES = 4


class DegenerateSteadyState(RuntimeError):
    """The Liouvillian has more than one stationary state."""


class IntegrationError(RuntimeError):
    """The fixed-step integrator drifted off the space of density matrices."""


@dataclass
class MESolution:
    times: np.ndarray
    states: list[np.ndarray]
    ness: np.ndarray | None
    gap_estimate: float | None = None

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def jump_operators(spec: ChainSpec, bath: BathSpec) -> list[np.ndarray]:
    """sqrt-rate-weighted raising/lowering jumps on the two end sites."""
    L = spec.L
    ops = []
    for site, lam in ((1, bath.lambda_1), (L, bath.lambda_L)):
        up = model.site_operator(SIGMA_PLUS, site, L)
        down = model.site_operator(SIGMA_MINUS, site, L)
        ops.append(np.sqrt(bath.gamma * lam) * up)
        ops.append(np.sqrt(bath.gamma * (1 - lam)) * down)
    return ops


def me_rhs(spec: ChainSpec, bath: BathSpec, rho: np.ndarray, hamiltonian: np.ndarray | None = None) -> np.ndarray:
    """-i[H, rho] + D_1(rho) + D_L(rho)."""
    h = model.full_hamiltonian(spec) if hamiltonian is None else hamiltonian
    out = -1j * (h @ rho - rho @ h)
    out += model.dissipator_apply(bath, rho, "left")
    out += model.dissipator_apply(bath, rho, "right")
    return out


def liouvillian(spec: ChainSpec, bath: BathSpec) -> np.ndarray:
    """Column-stacked superoperator of the master equation (4^L x 4^L)."""
    h = model.full_hamiltonian(spec)
    d = h.shape[0]
    eye = np.eye(d)
    sup = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for c in jump_operators(spec, bath):
        cdc = c.conj().T @ c
        sup += np.kron(c.conj(), c) - 0.5 * np.kron(eye, cdc) - 0.5 * np.kron(cdc.T, eye)
    return sup


def vec(rho: np.ndarray) -> np.ndarray:
    return rho.reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(v.size)))
    return v.reshape(d, d, order="F")


def ness_direct(spec: ChainSpec, bath: BathSpec, degeneracy_tol: float = 1e-9) -> np.ndarray:
    """Steady state from the null vector of the Liouvillian."""
    if spec.L > MAX_NESS_SITES:
        raise ValueError(f"ness_direct supports L <= {MAX_NESS_SITES}, got {spec.L}")
    sup = liouvillian(spec, bath)
    _, s, vh = np.linalg.svd(sup)
    if s[-2] < degeneracy_tol * max(1.0, s[0]):
        n_null = int(np.sum(s < degeneracy_tol * max(1.0, s[0])))
        raise DegenerateSteadyState(f"Liouvillian null space has dimension {n_null} (singular values {s[-3:]})")
    rho = unvec(vh[-1].conj())
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho)


def residual(spec: ChainSpec, bath: BathSpec, rho: np.ndarray) -> float:
    return float(np.linalg.norm(me_rhs(spec, bath, rho)))


def gap_estimate(spec: ChainSpec, bath: BathSpec, zero_tol: float = 1e-9) -> float:
    """Slowest relaxation rate: minus the largest real part among nonzero Liouvillian eigenvalues."""
    if spec.L > MAX_GAP_SITES:
        raise ValueError(f"gap_estimate supports L <= {MAX_GAP_SITES}, got {spec.L}")
    ev = np.linalg.eigvals(liouvillian(spec, bath))
    nonzero = ev[np.abs(ev) > zero_tol]
    return float(-np.max(nonzero.real))


def _rk4(spec, bath, h, rho, step):
    k1 = me_rhs(spec, bath, rho, h)
    k2 = me_rhs(spec, bath, rho + 0.5 * step * k1, h)
    k3 = me_rhs(spec, bath, rho + 0.5 * step * k2, h)
    k4 = me_rhs(spec, bath, rho + step * k3, h)
    return rho + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def evolve(
    spec: ChainSpec,
    bath: BathSpec,
    rho0: np.ndarray,
    t_end: float,
    step: float = 1e-2,
    save_every: int = 1,
    with_ness: bool = True,
    with_gap: bool = False,
    trace_tol: float = 1e-9,
) -> MESolution:
    """Fixed-step classical RK4 integration of the master equation."""
    if step <= 0:
        raise ValueError("step must be positive")
    n_steps = int(round(t_end / step))
    h = model.full_hamiltonian(spec)
    rho = np.array(rho0, dtype=complex)
    times, states = [0.0], [rho.copy()]
    for k in range(1, n_steps + 1):
        rho = _rk4(spec, bath, h, rho, step)
        rho = 0.5 * (rho + rho.conj().T)
        tr = np.trace(rho).real
        purity = np.real(np.vdot(rho, rho))
        if abs(tr - 1) > trace_tol or purity > 1 + 1e-6:
            raise IntegrationError(
                f"RK4 step {step} is unstable: trace drifted to {tr:.3e} / purity {purity:.3e} at t={k * step:.4g}"
            )
        rho = rho / tr
        if k % save_every == 0 or k == n_steps:
            times.append(k * step)
            states.append(rho.copy())
    ness = ness_direct(spec, bath) if with_ness and spec.L <= MAX_NESS_SITES else None
    gap = gap_estimate(spec, bath) if with_gap and spec.L <= MAX_GAP_SITES else None
    return MESolution(np.array(times), states, ness, gap)
