import math

import numpy as np
import pytest

from qcollide import lindblad, model
from qcollide.model import BathSpec, ChainSpec
from qcollide.qcore import basis_density, pure_density

from conftest import random_density

# frozen from an independent scipy.linalg.null_space construction (row-major vectorization)
NESS_L4_D15_M = [0.3931790996878369, 0.19981328587682667, -0.19981328587682745, -0.39317909968783754]
NESS_L4_D15_J = 0.6068209003121627
NESS_L4_D05_M1 = 0.08280753240401065
NESS_L4_D05_J = 0.9171924675959893
GAP_L4_D15 = 0.33889310834752895


def test_single_qubit_closed_form():
    # p(t) = lam + (p0 - lam) e^{-gamma t}, coherence decays at gamma/2
    gamma, lam, t = 0.7, 0.3, 2.0
    spec = ChainSpec(1, 1.0, 0.0, (0.0,))
    bath = BathSpec(gamma, lam, lam)
    rho0 = pure_density(np.array([math.cos(0.4), math.sin(0.4)]))
    sol = lindblad.evolve(spec, bath, rho0, t, step=1e-3, save_every=500, with_ness=False)
    # a single site is coupled to both baths, so the rates add
    g = 2 * gamma
    p = lam + (rho0[0, 0].real - lam) * math.exp(-g * t)
    q = rho0[0, 1] * math.exp(-g * t / 2)
    assert sol.final_state[0, 0].real == pytest.approx(p, abs=1e-10)
    assert sol.final_state[0, 1] == pytest.approx(q, abs=1e-10)
    assert len(sol.times) == 5


def test_single_qubit_gap_is_half_rate():
    spec = ChainSpec(1, 1.0, 0.0, (0.0,))
    assert lindblad.gap_estimate(spec, BathSpec(0.5, 0.5, 0.5)) == pytest.approx(0.5, abs=1e-10)


def test_equal_mixture_bath_gives_zero_magnetization():
    rho = lindblad.ness_direct(ChainSpec(1, 1.0, 0.0, (0.0,)), BathSpec(1.0, 0.5, 0.5))
    assert model.magnetization(rho, 1) == pytest.approx(0.0, abs=1e-12)


def test_two_site_ness():
    spec = ChainSpec.uniform(2, 1.0, 1.5)
    bath = BathSpec(1.0, 1.0, 0.0)
    rho = lindblad.ness_direct(spec, bath)
    assert model.bond_currents(spec, rho)[0] == pytest.approx(16 / 17, abs=1e-12)
    assert np.allclose(model.magnetization_profile(rho), [1 / 17, -1 / 17], atol=1e-12)
    assert lindblad.gap_estimate(spec, bath) == pytest.approx(1.0, abs=1e-9)


def test_four_site_ness_against_oracle():
    spec = ChainSpec.uniform(4, 1.0, 1.5)
    bath = BathSpec(1.0, 1.0, 0.0)
    rho = lindblad.ness_direct(spec, bath)
    assert np.allclose(model.magnetization_profile(rho), NESS_L4_D15_M, atol=1e-10)
    assert np.allclose(model.bond_currents(spec, rho), NESS_L4_D15_J, atol=1e-10)
    assert lindblad.residual(spec, bath, rho) < 1e-10
    assert lindblad.gap_estimate(spec, bath) == pytest.approx(GAP_L4_D15, abs=1e-8)

    spec = ChainSpec.uniform(4, 1.0, 0.5)
    rho = lindblad.ness_direct(spec, bath)
    assert model.magnetization(rho, 1) == pytest.approx(NESS_L4_D05_M1, abs=1e-10)
    assert model.bond_currents(spec, rho)[1] == pytest.approx(NESS_L4_D05_J, abs=1e-10)


def test_liouvillian_matches_rhs(rng):
    spec = ChainSpec(3, 0.9, 1.2, (0.1, 0.0, -0.3))
    bath = BathSpec(0.8, 0.7, 0.2)
    rho = random_density(rng, 3)
    sup = lindblad.liouvillian(spec, bath)
    assert np.allclose(lindblad.unvec(sup @ lindblad.vec(rho)), lindblad.me_rhs(spec, bath, rho))


def test_evolution_reaches_ness():
    spec = ChainSpec.uniform(2, 1.0, 1.5)
    bath = BathSpec(1.0, 1.0, 0.0)
    sol = lindblad.evolve(spec, bath, basis_density([0, 1]), 25.0, step=0.01, save_every=100)
    assert np.linalg.norm(sol.final_state - sol.ness) < 1e-8


def test_closed_chain_is_degenerate():
    with pytest.raises(lindblad.DegenerateSteadyState):
        lindblad.ness_direct(ChainSpec.uniform(2, 1.0, 1.0), BathSpec(0.0, 1.0, 0.0))


def test_unstable_step_is_reported():
    spec = ChainSpec.uniform(2, 1.0, 1.5)
    with pytest.raises(lindblad.IntegrationError, match="step 2"):
        lindblad.evolve(spec, BathSpec(1.0, 1.0, 0.0), basis_density([0, 1]), 40.0, step=2.0)


def test_size_limits():
    with pytest.raises(ValueError):
        lindblad.gap_estimate(ChainSpec.uniform(5), BathSpec(1.0, 1.0, 0.0))


def test_rectifier_gaps():
    # oracle values from the independent scipy construction
    h = model.rectifier_field(4.0, 4)
    spec = ChainSpec(4, 1.0, 4.0, h)
    forward = lindblad.gap_estimate(spec, BathSpec(1.0, *model.BiasDirection.FORWARD.lambdas))
    reverse = lindblad.gap_estimate(spec, BathSpec(1.0, *model.BiasDirection.REVERSE.lambdas))
    assert forward == pytest.approx(0.05041702453102734, abs=1e-8)
    assert reverse == pytest.approx(0.027473001651940582, abs=1e-8)
    assert reverse < forward
