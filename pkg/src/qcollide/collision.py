"""Collisional-model engine.

Each collision has two stages. First the chain evolves for ``tau`` under a
second-order Trotter product while the two ancillae are refreshed with the
bath states. Then each boundary site undergoes a partial iSWAP with its
ancilla. Observables are read off the chain marginal after the swaps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import model
from .model import BathSpec, ChainSpec
from .qcore import QubitLayout, X, Y, embed, herm_expm, kron, partial_trace

#: generator of the partial iSWAP, (XX + YY) / 2: it swaps |01> and |10> and leaves |00>, |11> alone
ISWAP_GENERATOR = 0.5 * (np.kron(X, X) + np.kron(Y, Y))

NOISE_TARGETS = frozenset({"J", "Delta", "lambda", "theta"})


def theta_from_gamma_tau(gamma: float, tau: float) -> float:
    """Swap angle whose amplitude damping matches rate ``gamma`` over time ``tau``."""
    if gamma < 0 or tau < 0:
        raise ValueError("gamma and tau must be non-negative")
    return math.asin(math.sqrt(-math.expm1(-gamma * tau)))


def partial_iswap(theta: float) -> np.ndarray:
    """exp(-i theta (XX+YY)/2): identity on |00>, |11>, rotation by theta between |01> and |10>."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array(
        [[1, 0, 0, 0], [0, c, -1j * s, 0], [0, -1j * s, c, 0], [0, 0, 0, 1]],
        dtype=complex,
    )


@dataclass(frozen=True)
class CollisionParams:
    tau: float
    dt: float
    n_collisions: int
    theta: float

    def __post_init__(self):
        if self.tau <= 0 or self.dt <= 0:
            raise ValueError("tau and dt must be positive")
        if self.n_collisions < 0:
            raise ValueError("n_collisions must be non-negative")
        steps = self.tau / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps) or round(steps) < 1:
            raise ValueError(f"tau/dt = {steps!r} is not a positive integer")
        if not 0.0 <= self.theta <= math.pi / 2:
            raise ValueError(f"theta must lie in [0, pi/2], got {self.theta}")

    @classmethod
    def from_rates(cls, gamma: float, tau: float, dt: float, n_collisions: int, theta: float | None = None):
        return cls(tau, dt, n_collisions, theta_from_gamma_tau(gamma, tau) if theta is None else theta)

    @property
    def n_steps(self) -> int:
        return int(round(self.tau / self.dt))


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian perturbations of the protocol parameters.

    Draw order, per collision: for each Trotter step and each bond in index
    order, one (J, Delta) pair; then lambda_1, lambda_L and one theta shared
    by both boundary swaps. Disabled targets consume no draws.
    """

    sigma: float
    seed: int = 0
    targets: frozenset[str] = NOISE_TARGETS

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        object.__setattr__(self, "targets", frozenset(self.targets))
        unknown = self.targets - NOISE_TARGETS
        if unknown:
            raise ValueError(f"unknown noise targets {sorted(unknown)}")

    @property
    def active(self) -> bool:
        return self.sigma > 0 and bool(self.targets)


@dataclass
class TrajectoryRecord:
    """Per-collision observables; row ``m-1`` holds collision ``m``."""

    index: np.ndarray
    time: np.ndarray
    magnetizations: np.ndarray
    currents: np.ndarray
    final_state: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.index)

    @property
    def first_bond_current(self) -> np.ndarray:
        return self.currents[:, 0]

    def cumulative_currents(self) -> np.ndarray:
        """Running sum of each bond current over collisions."""
        return np.cumsum(self.currents, axis=0)

    def steady_current(self, window: int = 20) -> float:
        """Mean first-bond current over the last ``window`` collisions."""
        return float(np.mean(self.first_bond_current[-window:]))


def trotter_step_groups(spec: ChainSpec, dt: float, J: np.ndarray | None = None, Delta: np.ndarray | None = None):
    """Bond propagators for one symmetric step: (even half-step, odd full step).

    ``J`` and ``Delta`` optionally give per-bond values (used for noise).
    Returns two lists of (bond, 4x4 unitary).
    """

    def h_bond(l):
        if J is None and Delta is None:
            return model.bond_hamiltonian(spec, l)
        j = spec.J if J is None else J[l - 1]
        d = spec.Delta if Delta is None else Delta[l - 1]
        return model.two_site_hamiltonian(j, d, *model.bond_fields(spec, l))

    even = [(l, herm_expm(h_bond(l), dt / 2)) for l in spec.even_bonds]
    odd = [(l, herm_expm(h_bond(l), dt)) for l in spec.odd_bonds]
    return even, odd


def _group_unitary(spec: ChainSpec, bonds: Iterable[tuple[int, np.ndarray]]) -> np.ndarray:
    u = np.eye(2**spec.L, dtype=complex)
    for l, ub in bonds:
        u = embed(ub, [l - 1, l], spec.L) @ u
    return u


def trotter_step(spec: ChainSpec, dt: float, **bond_values) -> np.ndarray:
    """One unmerged step: even half, odd full, even half."""
    if spec.L == 1:
        return herm_expm(model.full_hamiltonian(spec), dt)
    even, odd = trotter_step_groups(spec, dt, **bond_values)
    e = _group_unitary(spec, even)
    return e @ _group_unitary(spec, odd) @ e


def trotter_unitary(spec: ChainSpec, dt: float, n_steps: int) -> np.ndarray:
    """[U(dt)]^n with the even half-steps of neighbouring steps merged."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if spec.L == 1:
        return herm_expm(model.full_hamiltonian(spec), dt * n_steps)
    even_half, odd = trotter_step_groups(spec, dt)
    e_half = _group_unitary(spec, even_half)
    e_full = _group_unitary(spec, [(l, herm_expm(model.bond_hamiltonian(spec, l), dt)) for l in spec.even_bonds])
    o = _group_unitary(spec, odd)
    u = o @ e_half
    for _ in range(n_steps - 1):
        u = o @ e_full @ u
    return e_half @ u


class NoiseDraws:
    """Seeded source of the perturbed parameters, consumed in a fixed order."""

    def __init__(self, noise: NoiseSpec):
        self.noise = noise
        self.rng = np.random.default_rng(noise.seed)

    def _normal(self, size=None):
        return self.rng.normal(0.0, self.noise.sigma, size)

    def bond_values(self, spec: ChainSpec) -> dict[str, np.ndarray]:
        nb = spec.L - 1
        J = np.full(nb, spec.J, dtype=float)
        D = np.full(nb, spec.Delta, dtype=float)
        use_j, use_d = "J" in self.noise.targets, "Delta" in self.noise.targets
        for b in range(nb):
            if use_j:
                J[b] += self._normal()
            if use_d:
                D[b] += self._normal()
        return {"J": J, "Delta": D}

    def collision_values(self, bath: BathSpec, theta: float) -> tuple[float, float, float]:
        lam1, lamL = bath.lambda_1, bath.lambda_L
        if "lambda" in self.noise.targets:
            lam1 = min(max(lam1 - abs(self._normal()), 0.0), 1.0)
            lamL = min(max(lamL + abs(self._normal()), 0.0), 1.0)
        if "theta" in self.noise.targets:
            theta = theta + self._normal()
        return lam1, lamL, theta


def apply_noise(noise: NoiseSpec, spec: ChainSpec, bath: BathSpec, params: CollisionParams):
    """Yield the perturbed parameters of successive collisions.

    Each item is ``(step_values, lambda_1, lambda_L, theta)`` where
    ``step_values`` holds per-Trotter-step dicts of per-bond J and Delta.
    """
    draws = NoiseDraws(noise)
    while True:
        steps = [draws.bond_values(spec) if spec.L > 1 else {} for _ in range(params.n_steps)]
        lam1, lamL, theta = draws.collision_values(bath, params.theta)
        yield steps, lam1, lamL, theta


def collide(rho_sys: np.ndarray, theta: float, reset_left: np.ndarray, reset_right: np.ndarray) -> np.ndarray:
    """Tensor fresh ancillae onto the chain, swap them with the end sites, trace them out."""
    L = rho_sys.shape[0].bit_length() - 1
    layout = QubitLayout.chain(L)
    gate = partial_iswap(theta)
    w = embed(gate, [layout.system_indices[-1], layout.ancilla_right_index], layout) @ embed(
        gate, [layout.ancilla_left_index, layout.system_indices[0]], layout
    )
    full = kron(reset_left, rho_sys, reset_right)
    full = w @ full @ w.conj().T
    out = partial_trace(full, layout.ancilla_indices, layout)
    return 0.5 * (out + out.conj().T)


def run_collisional(
    spec: ChainSpec,
    bath: BathSpec,
    params: CollisionParams,
    rho0: np.ndarray | None = None,
    noise: NoiseSpec | None = None,
) -> TrajectoryRecord:
    """Run ``params.n_collisions`` collisions from ``rho0`` (default: left half up, right half down)."""
    L = spec.L
    rho = model.default_initial_state(L) if rho0 is None else np.asarray(rho0, dtype=complex)
    model.validate_state(rho, L)

    n = params.n_collisions
    mags = np.empty((n, L))
    currents = np.empty((n, max(L - 1, 0)))
    z_ops = [model.site_operator(model.Z, s, L) for s in range(1, L + 1)]
    j_ops = [model.current_operator(spec, l) for l in spec.bonds]

    noisy = noise is not None and noise.active
    if noisy:
        perturbed = apply_noise(noise, spec, bath, params)
    else:
        u_sys = trotter_unitary(spec, params.dt, params.n_steps)

    for m in range(n):
        if noisy:
            steps, lam1, lamL, theta = next(perturbed)
            for values in steps:
                u = trotter_step(spec, params.dt, **values)
                rho = u @ rho @ u.conj().T
            reset_l, reset_r = model.bath_state(lam1), model.bath_state(lamL)
        else:
            rho = u_sys @ rho @ u_sys.conj().T
            theta, reset_l, reset_r = params.theta, bath.reset_left, bath.reset_right
        rho = collide(rho, theta, reset_l, reset_r)
        mags[m] = [np.real(np.trace(z @ rho)) for z in z_ops]
        currents[m] = [np.real(np.trace(j @ rho)) for j in j_ops]

    idx = np.arange(1, n + 1)
    return TrajectoryRecord(idx, idx * params.tau, mags, currents, rho)


def detect_steady(record: TrajectoryRecord | np.ndarray, window: int = 20, tol: float = 1e-4) -> int | None:
    """First collision index m whose trailing window of first-bond currents stays within ``tol`` of j(m)."""
    if window < 2:
        raise ValueError("window must be at least 2")
    j = record.first_bond_current if isinstance(record, TrajectoryRecord) else np.asarray(record)
    for m in range(window, len(j) + 1):
        if np.max(np.abs(j[m - window : m] - j[m - 1])) < tol:
            return m
    return None
