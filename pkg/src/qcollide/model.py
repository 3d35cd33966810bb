"""Boundary-driven XXZ chain: Hamiltonian, dissipators and observables.

Sites and bonds are numbered from 1 as in the physics convention: sites
1..L, bond ``l`` couples sites ``l`` and ``l+1``. Operators returned here act
on an L-qubit register whose slot ``l-1`` holds site ``l``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .qcore import (
    DOWN,
    I2,
    SIGMA_MINUS,
    SIGMA_PLUS,
    UP,
    X,
    Y,
    Z,
    check_density_matrix,
    embed,
    expectation,
    n_qubits_of,
)

XX_YY = np.kron(X, X) + np.kron(Y, Y)
ZZ = np.kron(Z, Z)
Z1 = np.kron(Z, I2)
Z2 = np.kron(I2, Z)


@dataclass(frozen=True)
class ChainSpec:
    L: int
    J: float
    Delta: float
    h: tuple[float, ...]

    def __post_init__(self):
        if self.L < 1:
            raise ValueError(f"L must be positive, got {self.L}")
        object.__setattr__(self, "J", float(self.J))
        object.__setattr__(self, "Delta", float(self.Delta))
        object.__setattr__(self, "h", tuple(float(x) for x in self.h))
        if len(self.h) != self.L:
            raise ValueError(f"h has {len(self.h)} entries, expected L={self.L}")

    @classmethod
    def uniform(cls, L: int, J: float = 1.0, Delta: float = 0.0, h: float = 0.0) -> "ChainSpec":
        return cls(L, J, Delta, (h,) * L)

    @property
    def bonds(self) -> range:
        return range(1, self.L)

    @property
    def even_bonds(self) -> list[int]:
        return [b for b in self.bonds if b % 2 == 0]

    @property
    def odd_bonds(self) -> list[int]:
        return [b for b in self.bonds if b % 2 == 1]


def bath_state(lam: float) -> np.ndarray:
    return lam * UP + (1 - lam) * DOWN


@dataclass(frozen=True)
class BathSpec:
    gamma: float
    lambda_1: float
    lambda_L: float
    reset_left: np.ndarray = field(init=False, repr=False, compare=False)
    reset_right: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        for name in ("lambda_1", "lambda_L"):
            lam = getattr(self, name)
            if not 0.0 <= lam <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {lam}")
        object.__setattr__(self, "reset_left", bath_state(self.lambda_1))
        object.__setattr__(self, "reset_right", bath_state(self.lambda_L))


class BiasDirection(enum.Enum):
    FORWARD = "forward"
    REVERSE = "reverse"

    @property
    def lambdas(self) -> tuple[float, float]:
        """(lambda_1, lambda_L) for this bias: forward pumps up spins in from the right."""
        return (0.0, 1.0) if self is BiasDirection.FORWARD else (1.0, 0.0)


def _check_bond(spec: ChainSpec, l: int) -> None:
    if not 1 <= l <= spec.L - 1:
        raise ValueError(f"bond index {l} out of range 1..{spec.L - 1}")


def field_owner(spec: ChainSpec) -> dict[int, int]:
    """Which bond carries the local field of each site.

    A site's field goes to the first bond containing it when bonds are visited
    in Trotter order (even bonds, then odd bonds). Every site has exactly one
    owner, so the bond terms add up to the full Hamiltonian.
    """
    owner: dict[int, int] = {}
    for b in spec.even_bonds + spec.odd_bonds:
        owner.setdefault(b, b)
        owner.setdefault(b + 1, b)
    return owner


def bond_fields(spec: ChainSpec, l: int) -> tuple[float, float]:
    """Field strengths (left site, right site) carried by bond ``l``."""
    _check_bond(spec, l)
    owner = field_owner(spec)
    left = spec.h[l - 1] if owner[l] == l else 0.0
    right = spec.h[l] if owner[l + 1] == l else 0.0
    return left, right


def two_site_hamiltonian(J: float, Delta: float, h_left: float = 0.0, h_right: float = 0.0) -> np.ndarray:
    return J * XX_YY + Delta * ZZ + h_left * Z1 + h_right * Z2


def bond_hamiltonian(spec: ChainSpec, l: int) -> np.ndarray:
    """4x4 bond term H_l on sites (l, l+1), including its share of the fields."""
    return two_site_hamiltonian(spec.J, spec.Delta, *bond_fields(spec, l))


def full_hamiltonian(spec: ChainSpec) -> np.ndarray:
    if spec.L == 1:
        return spec.h[0] * Z
    return sum(embed(bond_hamiltonian(spec, l), [l - 1, l], spec.L) for l in spec.bonds)


def current_operator(spec: ChainSpec, l: int) -> np.ndarray:
    """Spin current through bond ``l``: 2J (sx_l sy_{l+1} - sy_l sx_{l+1})."""
    _check_bond(spec, l)
    local = 2 * spec.J * (np.kron(X, Y) - np.kron(Y, X))
    return embed(local, [l - 1, l], spec.L)


def site_operator(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    if not 1 <= site <= n_sites:
        raise ValueError(f"site {site} out of range 1..{n_sites}")
    return embed(op, [site - 1], n_sites)


def magnetization(rho: np.ndarray, site: int) -> float:
    n = n_qubits_of(rho)
    return expectation(site_operator(Z, site, n), rho)


def magnetization_profile(rho: np.ndarray) -> np.ndarray:
    n = n_qubits_of(rho)
    return np.array([magnetization(rho, s) for s in range(1, n + 1)])


def bond_currents(spec: ChainSpec, rho: np.ndarray) -> np.ndarray:
    return np.array([expectation(current_operator(spec, l), rho) for l in spec.bonds])


def _lindblad_term(c: np.ndarray, rho: np.ndarray) -> np.ndarray:
    cdc = c.conj().T @ c
    return c @ rho @ c.conj().T - 0.5 * (cdc @ rho + rho @ cdc)


def dissipator_apply(bath: BathSpec, rho: np.ndarray, side: str) -> np.ndarray:
    """Boundary dissipator D_1 (``side="left"``) or D_L (``side="right"``) applied to ``rho``."""
    n = n_qubits_of(rho)
    if side == "left":
        site, lam = 1, bath.lambda_1
    elif side == "right":
        site, lam = n, bath.lambda_L
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    up = site_operator(SIGMA_PLUS, site, n)
    down = site_operator(SIGMA_MINUS, site, n)
    return bath.gamma * (lam * _lindblad_term(up, rho) + (1 - lam) * _lindblad_term(down, rho))


def rectifier_field(h: float, L: int, bias: BiasDirection = BiasDirection.FORWARD) -> tuple[float, ...]:
    """Step profile (+h on the left half, -h on the right half).

    The profile is the same for both biases: reversing the bias swaps the
    bath polarizations (see ``BiasDirection.lambdas``). Negating the field as
    well would map the forward problem onto itself under a global spin flip.
    """
    if L % 2:
        raise ValueError(f"rectifier needs an even number of sites, got L={L}")
    if not isinstance(bias, BiasDirection):
        raise TypeError(f"bias must be a BiasDirection, got {bias!r}")
    half = L // 2
    return (float(h),) * half + (-float(h),) * half


def reflected_field(h: Sequence[float]) -> tuple[float, ...]:
    """Field seen by the mirror-image chain under a global spin flip (an exact symmetry)."""
    return tuple(-x for x in reversed(h))


def default_initial_state(L: int) -> np.ndarray:
    """Domain wall with the left half up: |uu..dd>."""
    from .qcore import basis_density

    return basis_density([0] * (L - L // 2) + [1] * (L // 2)) if L > 1 else UP.copy()


def validate_state(rho: np.ndarray, L: int) -> None:
    if rho.shape != (2**L, 2**L):
        raise ValueError(f"state has shape {rho.shape}, expected {(2**L, 2**L)}")
    check_density_matrix(rho)
