"""Run configuration: a sectioned INI file.

Physics keys have no defaults; a missing one is a ``ConfigError`` naming the
section and key. Errors on a present key carry ``path:line``.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .collision import NOISE_TARGETS, CollisionParams, NoiseSpec, theta_from_gamma_tau
from .model import BathSpec, BiasDirection, ChainSpec, rectifier_field

DEFAULT_SIGMAS = (0.0, 1e-3, 1e-2, 1e-1)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    chain: ChainSpec
    gamma: float
    lambdas: tuple[float, float] | None
    params: CollisionParams
    noise: NoiseSpec
    sigmas: tuple[float, ...] = DEFAULT_SIGMAS
    n_seeds: int = 3
    window: int = 20
    tol: float = 1e-4
    rectifier_h: float | None = None
    bias: BiasDirection | None = None
    initial_state: str | None = None
    reverse_initial_state: str | None = None
    me_t_end: float | None = None
    me_step: float = 1e-2
    out_dir: Path = Path("out")
    prefix: str = ""
    native: bool = True
    profiles: tuple[str, ...] = ("manila",)
    emit_collisions: int = 1
    source: Path | None = field(default=None, compare=False)

    @property
    def bath(self) -> BathSpec:
        if self.lambdas is None:
            raise ConfigError("[bath] lambda_1 and lambda_L (or [model] bias) are required for this command")
        return BathSpec(self.gamma, *self.lambdas)

    def biased(self, bias: BiasDirection) -> tuple[ChainSpec, BathSpec]:
        """Chain and bath for one bias direction of the rectifier."""
        if self.rectifier_h is None:
            raise ConfigError("[model] rectifier_h is required for rectify")
        chain = replace(self.chain, h=rectifier_field(self.rectifier_h, self.chain.L, bias))
        return chain, BathSpec(self.gamma, *bias.lambdas)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, noise=replace(self.noise, seed=seed))

    def with_out(self, out_dir) -> "RunConfig":
        return replace(self, out_dir=Path(out_dir))


class _Reader:
    def __init__(self, path: Path, text: str):
        self.path = path
        self.cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            self.cp.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        self.lines = self._index(text)

    @staticmethod
    def _index(text: str) -> dict[tuple[str, str], int]:
        where, section = {}, None
        for n, line in enumerate(text.splitlines(), 1):
            s = line.strip()
            m = re.match(r"^\[([^\]]+)\]", s)
            if m:
                section = m.group(1).strip().lower()
                continue
            m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", s)
            if m and section is not None:
                where[(section, m.group(1).strip().lower())] = n
        return where

    def fail(self, section: str, key: str, msg: str):
        line = self.lines.get((section, key.lower()))
        loc = f"{self.path}:{line}" if line else str(self.path)
        raise ConfigError(f"{loc}: [{section}] {key}: {msg}")

    def has(self, section: str, key: str) -> bool:
        return self.cp.has_option(section, key)

    def raw(self, section: str, key: str, required: bool):
        if not self.has(section, key):
            if required:
                raise ConfigError(f"{self.path}: missing required key [{section}] {key}")
            return None
        return self.cp.get(section, key).strip()

    def float(self, section, key, required=False, default=None, lo=None, hi=None):
        raw = self.raw(section, key, required)
        if raw is None:
            return default
        try:
            val = float(raw)
        except ValueError:
            self.fail(section, key, f"expected a number, got {raw!r}")
        if not math.isfinite(val):
            self.fail(section, key, f"must be finite, got {raw!r}")
        if lo is not None and val < lo:
            self.fail(section, key, f"must be >= {lo}, got {val}")
        if hi is not None and val > hi:
            self.fail(section, key, f"must be <= {hi}, got {val}")
        return val

    def int(self, section, key, required=False, default=None, lo=None):
        raw = self.raw(section, key, required)
        if raw is None:
            return default
        try:
            val = int(raw)
        except ValueError:
            self.fail(section, key, f"expected an integer, got {raw!r}")
        if lo is not None and val < lo:
            self.fail(section, key, f"must be >= {lo}, got {val}")
        return val

    def floats(self, section, key, required=False, default=None):
        raw = self.raw(section, key, required)
        if raw is None:
            return default
        try:
            return tuple(float(x) for x in raw.split(",") if x.strip())
        except ValueError:
            self.fail(section, key, f"expected a comma-separated list of numbers, got {raw!r}")

    def bool(self, section, key, default):
        if not self.has(section, key):
            return default
        try:
            return self.cp.getboolean(section, key)
        except ValueError:
            self.fail(section, key, f"expected true/false, got {self.cp.get(section, key)!r}")


def _spins(r: _Reader, key: str, L: int) -> str | None:
    spins = r.raw("output", key, False)
    if spins is not None and (len(spins) != L or set(spins.lower()) - {"u", "d"}):
        r.fail("output", key, f"expected {L} characters from u/d, got {spins!r}")
    return spins


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path)


def parse_config(text: str, path: Path | str = "<config>") -> RunConfig:
    r = _Reader(Path(path), text)

    L = r.int("model", "L", required=True, lo=1)
    J = r.float("model", "J", required=True)
    Delta = r.float("model", "Delta", required=True)
    rect_h = r.float("model", "rectifier_h")
    h = r.floats("model", "h")
    if h is not None and rect_h is not None:
        r.fail("model", "rectifier_h", "give either h or rectifier_h, not both")
    bias = None
    if r.has("model", "bias"):
        name = r.raw("model", "bias", False).lower()
        try:
            bias = BiasDirection(name)
        except ValueError:
            r.fail("model", "bias", f"expected forward or reverse, got {name!r}")
    if rect_h is not None:
        if L % 2:
            r.fail("model", "L", "rectifier needs an even number of sites")
        h = rectifier_field(rect_h, L, bias or BiasDirection.FORWARD)
    elif h is None:
        raise ConfigError(f"{path}: missing required key [model] h (or rectifier_h)")
    elif len(h) == 1:
        h = h * L
    elif len(h) != L:
        r.fail("model", "h", f"has {len(h)} entries, expected 1 or L={L}")
    chain = ChainSpec(L, J, Delta, tuple(h))

    gamma = r.float("bath", "gamma", required=True, lo=0.0)
    if r.has("bath", "lambda_1") or r.has("bath", "lambda_L"):
        lambdas = (
            r.float("bath", "lambda_1", required=True, lo=0.0, hi=1.0),
            r.float("bath", "lambda_L", required=True, lo=0.0, hi=1.0),
        )
    else:
        lambdas = bias.lambdas if bias is not None else None

    tau = r.float("collision", "tau", required=True)
    dt = r.float("collision", "dt", required=True)
    n_coll = r.int("collision", "n_collisions", required=True, lo=0)
    if tau <= 0:
        r.fail("collision", "tau", "must be positive")
    if dt <= 0:
        r.fail("collision", "dt", "must be positive")
    theta = r.float("collision", "theta", lo=0.0, hi=math.pi / 2)
    try:
        params = CollisionParams(tau, dt, n_coll, theta_from_gamma_tau(gamma, tau) if theta is None else theta)
    except ValueError as exc:
        r.fail("collision", "dt", str(exc))

    sigma = r.float("noise", "sigma", default=0.0, lo=0.0)
    seed = r.int("noise", "seed", default=0, lo=0)
    targets = NOISE_TARGETS
    if r.has("noise", "targets"):
        targets = frozenset(t.strip() for t in r.raw("noise", "targets", False).split(",") if t.strip())
        if not targets <= NOISE_TARGETS:
            r.fail("noise", "targets", f"unknown targets {sorted(targets - NOISE_TARGETS)}")
    sigmas = r.floats("noise", "sigmas", default=DEFAULT_SIGMAS)
    if any(s < 0 for s in sigmas):
        r.fail("noise", "sigmas", "must be non-negative")

    initial = _spins(r, "initial_state", L)
    reverse_initial = _spins(r, "reverse_initial_state", L)

    profiles = ("manila",)
    if r.has("circuit", "profile"):
        profiles = tuple(p.strip() for p in r.raw("circuit", "profile", False).split(",") if p.strip())

    return RunConfig(
        chain=chain,
        gamma=gamma,
        lambdas=lambdas,
        params=params,
        noise=NoiseSpec(sigma, seed, targets),
        sigmas=sigmas,
        n_seeds=r.int("noise", "n_seeds", default=3, lo=1),
        window=r.int("steady", "window", default=20, lo=2),
        tol=r.float("steady", "tol", default=1e-4, lo=0.0),
        rectifier_h=rect_h,
        bias=bias,
        initial_state=initial,
        reverse_initial_state=reverse_initial,
        me_t_end=r.float("lindblad", "t_end", lo=0.0),
        me_step=r.float("lindblad", "step", default=1e-2, lo=1e-12),
        out_dir=Path(r.raw("output", "dir", False) or "out"),
        prefix=r.raw("output", "prefix", False) or "",
        native=r.bool("circuit", "native", True),
        profiles=profiles,
        emit_collisions=r.int("circuit", "n_collisions", default=1, lo=0),
        source=Path(path),
    )
