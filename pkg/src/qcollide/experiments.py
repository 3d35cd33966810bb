"""Experiment drivers behind the CLI subcommands.

Each ``run_*`` function takes a ``RunConfig``, writes its files under
``cfg.out_dir`` and returns the summary it wrote.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import circuit, lindblad, model
from .circuit import CircuitError
from .collision import NoiseSpec, TrajectoryRecord, detect_steady, run_collisional
from .config import ConfigError, RunConfig
from .io import summary_text, trajectory_csv
from .model import BiasDirection, ChainSpec
from .qcore import check_density_matrix, spin_state

log = logging.getLogger(__name__)

VERIFY_TOL = 1e-9


class PhysicsError(RuntimeError):
    """A physical invariant (trace, positivity, uniqueness of the steady state) failed."""


class VerificationError(RuntimeError):
    """A lowered circuit does not reproduce its exact unitary."""


def _write(cfg: RunConfig, name: str, text: str) -> Path:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.out_dir / f"{cfg.prefix}{name}"
    path.write_text(text)
    return path


def _initial_state(cfg: RunConfig, L: int, spins: str | None = None):
    spins = cfg.initial_state if spins is None else spins
    return None if spins is None else spin_state(spins)


def _checked(record: TrajectoryRecord) -> TrajectoryRecord:
    try:
        check_density_matrix(record.final_state, psd_tol=-1e-9)
    except ValueError as exc:
        raise PhysicsError(f"final chain state is not a density matrix: {exc}") from None
    return record


def simulate(cfg: RunConfig, chain: ChainSpec | None = None, bath=None, noise: NoiseSpec | None = None, spins=None):
    chain = cfg.chain if chain is None else chain
    bath = cfg.bath if bath is None else bath
    rho0 = _initial_state(cfg, chain.L, spins)
    return _checked(run_collisional(chain, bath, cfg.params, rho0=rho0, noise=noise))


def _final_items(record: TrajectoryRecord, prefix: str = "final") -> dict:
    items = {}
    if len(record):
        for s, m in enumerate(record.magnetizations[-1], 1):
            items[f"{prefix}_m_{s}"] = float(m)
        for l, j in enumerate(record.currents[-1], 1):
            items[f"{prefix}_j_{l}"] = float(j)
    return items


# -- collide -----------------------------------------------------------------


def run_collide(cfg: RunConfig) -> dict:
    noise = cfg.noise if cfg.noise.active else None
    record = simulate(cfg, noise=noise)
    _write(cfg, "trajectory.csv", trajectory_csv(record))
    steady = detect_steady(record, cfg.window, cfg.tol) if record.currents.shape[1] and len(record) else None
    summary = {
        "command": "collide",
        "L": cfg.chain.L,
        "n_collisions": cfg.params.n_collisions,
        "tau": cfg.params.tau,
        "dt": cfg.params.dt,
        "theta": cfg.params.theta,
        "sigma": cfg.noise.sigma,
        "seed": cfg.noise.seed,
        "steady_index": steady,
        "steady_current": record.steady_current(cfg.window) if record.currents.size else None,
        **_final_items(record),
    }
    _write(cfg, "summary.txt", summary_text(summary))
    return summary


# -- lindblad ----------------------------------------------------------------


def run_lindblad(cfg: RunConfig) -> dict:
    chain, bath = cfg.chain, cfg.bath
    try:
        rho = lindblad.ness_direct(chain, bath)
        check_density_matrix(rho, psd_tol=-1e-9)
    except (lindblad.DegenerateSteadyState, ValueError) as exc:
        raise PhysicsError(str(exc)) from None
    mags = model.magnetization_profile(rho)
    currents = model.bond_currents(chain, rho) if chain.L > 1 else np.zeros(0)
    summary = {"command": "lindblad", "L": chain.L, "gamma": bath.gamma}
    summary.update({f"ness_m_{s}": float(m) for s, m in enumerate(mags, 1)})
    summary.update({f"ness_j_{l}": float(j) for l, j in enumerate(currents, 1)})
    summary["ness_current"] = float(np.mean(currents)) if currents.size else None
    summary["residual"] = lindblad.residual(chain, bath, rho)
    summary["gap"] = lindblad.gap_estimate(chain, bath) if chain.L <= lindblad.MAX_GAP_SITES else None

    if cfg.me_t_end:
        rho0 = _initial_state(cfg, chain.L)
        rho0 = model.default_initial_state(chain.L) if rho0 is None else rho0
        save = max(1, int(round(cfg.params.tau / cfg.me_step)))
        try:
            sol = lindblad.evolve(chain, bath, rho0, cfg.me_t_end, cfg.me_step, save_every=save, with_ness=False)
        except lindblad.IntegrationError as exc:
            raise PhysicsError(str(exc)) from None
        record = TrajectoryRecord(
            np.arange(len(sol.times)),
            sol.times,
            np.array([model.magnetization_profile(r) for r in sol.states]),
            np.array([model.bond_currents(chain, r) for r in sol.states]).reshape(len(sol.states), chain.L - 1),
        )
        _write(cfg, "me_trajectory.csv", trajectory_csv(record))
        summary["me_t_end"] = cfg.me_t_end
        summary["me_distance_to_ness"] = float(np.linalg.norm(sol.final_state - rho))
    _write(cfg, "ness.txt", summary_text(summary))
    return summary


# -- rectify -----------------------------------------------------------------


@dataclass(frozen=True)
class RectificationResult:
    R: float
    I_forward: float
    I_reverse: float
    j_forward: float
    j_reverse: float
    steady_forward: int | None
    steady_reverse: int | None

    @property
    def R_instant(self) -> float:
        return -self.j_forward / self.j_reverse


def rectification(forward: TrajectoryRecord, reverse: TrajectoryRecord, window=20, tol=1e-4) -> RectificationResult:
    """R = -I_f / I_r from currents accumulated over all collisions.

    I_f is the most negative bond of the forward run, I_r the most positive
    bond of the reverse run, both taken at the final collision.
    """
    cf = forward.cumulative_currents()[-1]
    cr = reverse.cumulative_currents()[-1]
    i_f, i_r = float(cf.min()), float(cr.max())
    jf = forward.currents[-1]
    jr = reverse.currents[-1]
    return RectificationResult(
        R=-i_f / i_r,
        I_forward=i_f,
        I_reverse=i_r,
        j_forward=float(jf.min()),
        j_reverse=float(jr.max()),
        steady_forward=detect_steady(forward, window, tol),
        steady_reverse=detect_steady(reverse, window, tol),
    )


def run_rectify(cfg: RunConfig) -> RectificationResult:
    if cfg.params.n_collisions < 1:
        raise ConfigError("rectify needs [collision] n_collisions >= 1")
    if cfg.chain.L < 2:
        raise ConfigError("rectify needs L >= 2")
    records = {}
    for bias in BiasDirection:
        chain, bath = cfg.biased(bias)
        # both biases start from the same state unless a separate reverse start is configured
        spins = cfg.reverse_initial_state if bias is BiasDirection.REVERSE else None
        records[bias] = simulate(cfg, chain, bath, spins=spins)
        _write(cfg, f"{bias.value}_trajectory.csv", trajectory_csv(records[bias]))
    res = rectification(records[BiasDirection.FORWARD], records[BiasDirection.REVERSE], cfg.window, cfg.tol)
    summary = {
        "command": "rectify",
        "L": cfg.chain.L,
        "rectifier_h": cfg.rectifier_h,
        "n_collisions": cfg.params.n_collisions,
        "tau": cfg.params.tau,
        "R": res.R,
        "I_forward": res.I_forward,
        "I_reverse": res.I_reverse,
        "j_forward": res.j_forward,
        "j_reverse": res.j_reverse,
        "R_instant": res.R_instant,
        "steady_forward": res.steady_forward,
        "steady_reverse": res.steady_reverse,
    }
    _write(cfg, "rectification.txt", summary_text(summary))
    return res


# -- noise sweep ---------------------------------------------------------------


def overlap(j: np.ndarray, j_ref: np.ndarray) -> float:
    """1 - relative L2 distance between two first-bond current series."""
    return float(1.0 - np.linalg.norm(j - j_ref) / np.linalg.norm(j_ref))


def run_noise_sweep(cfg: RunConfig, sigmas=None) -> dict:
    sigmas = tuple(cfg.sigmas if sigmas is None else sigmas)
    if cfg.chain.L < 2:
        raise ConfigError("noise-sweep needs L >= 2")
    base = simulate(cfg)
    j0 = base.first_bond_current
    ref = base.steady_current(cfg.window)
    _write(cfg, "sweep_sigma0.csv", trajectory_csv(base))
    summary = {"command": "noise-sweep", "seed": cfg.noise.seed, "n_seeds": cfg.n_seeds, "noiseless_current": ref}
    for sigma in sigmas:
        if sigma == 0:
            continue
        overlaps = []
        for k in range(cfg.n_seeds):
            seed = cfg.noise.seed + k
            rec = simulate(cfg, noise=NoiseSpec(sigma, seed, cfg.noise.targets))
            _write(cfg, f"sweep_sigma{sigma:g}_seed{seed}.csv", trajectory_csv(rec))
            tag = f"sigma_{sigma:g}.seed_{seed}"
            cur = rec.steady_current(cfg.window)
            overlaps.append(overlap(rec.first_bond_current, j0))
            summary[f"{tag}.steady_current"] = cur
            summary[f"{tag}.relative_deviation"] = abs(cur - ref) / abs(ref)
            summary[f"{tag}.overlap"] = overlaps[-1]
            summary[f"{tag}.steady_index"] = detect_steady(rec, cfg.window, cfg.tol)
        summary[f"sigma_{sigma:g}.mean_overlap"] = float(np.mean(overlaps))
    _write(cfg, "noise_sweep.txt", summary_text(summary))
    return summary


# -- emit ----------------------------------------------------------------------


def run_emit(cfg: RunConfig, profiles=None) -> dict:
    names = tuple(cfg.profiles if profiles is None else profiles)
    timings = []
    for name in names:
        candidate = name
        if cfg.source is not None and name not in circuit.PROFILES and not Path(name).is_absolute():
            candidate = str(cfg.source.parent / name)
        try:
            timings.append(circuit.load_profile(candidate))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"timing profile {name!r}: {exc}") from None
    try:
        ir = circuit.emit_collisions(cfg.chain, cfg.bath, cfg.params, cfg.emit_collisions, native=cfg.native)
    except CircuitError as exc:
        raise ConfigError(str(exc)) from None

    summary = {"command": "emit", "native": cfg.native, "n_qubits": ir.n_qubits, "n_collisions": ir.n_collisions}
    summary["depth"] = ir.depth
    if cfg.native:
        err = circuit.verify_lowering(ir)
        summary["verify_error"] = err
        if not err < VERIFY_TOL:
            _write(cfg, "timing.txt", summary_text(summary))
            raise VerificationError(f"lowered circuit deviates from exact unitaries by {err:.3e}")
    _write(cfg, "circuit.txt", circuit.dumps(ir, ",".join(t.name for t in timings)))

    system = range(1, cfg.chain.L + 1)
    block = circuit.restrict(ir, system, ir.segment_ids()[:1]) if ir.layers else ir
    for t in timings:
        rep = circuit.estimate_duration(ir, t)
        blk = circuit.estimate_duration(block, t)
        p = t.name
        summary[f"{p}:total_us"] = rep.total_ns / 1000
        summary[f"{p}:per_collision_us"] = rep.per_collision_ns / 1000
        summary[f"{p}:coherence_ratio"] = rep.coherence_ratio
        summary[f"{p}:unitary_block_us"] = blk.total_ns / 1000
        summary[f"{p}:measure_us"] = t.t_measure / 1000
        summary[f"{p}:reset_us"] = t.t_meas_reset / 1000
        for kind, n in blk.layers.items():
            summary[f"{p}:unitary_block_{kind}_layers"] = n
        for kind, n in rep.layers.items():
            summary[f"{p}:{kind}_layers"] = n
    _write(cfg, "timing.txt", summary_text(summary))
    return summary
