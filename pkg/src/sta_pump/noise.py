"""Hamiltonian noise on the drive and Monte Carlo frequency sweeps.

A trial draws one Gaussian value per integrator step and adds
``c * omega * xi`` times ``sigma_x`` (off-diagonal channel) or ``sigma_z``
(diagonal channel) to the generator over that step.

Two normalizations of ``xi`` are offered:

``per_step`` (default)
    ``xi ~ N(0, 1)`` on every step, independent of the step length.
``white``
    ``xi ~ N(0, 1/dt)``, the discretization of a delta-correlated process.
    The accumulated phase noise then scales as ``c sqrt(2 pi omega)`` and
    overwhelms the pump for ``c = 0.5`` at any omega of interest.

Every trial has its own counter-based stream keyed by
``(seed, omega_index, trial)``, so results do not depend on scheduling.
"""
from __future__ import annotations

import dataclasses
import enum
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .evolution import EvolutionConfig, plan_steps
from .model import DriveParams, _coerce_scheme
from .observables import pump_shift


class Channel(str, enum.Enum):
    OFF_DIAGONAL = "off_diagonal"
    DIAGONAL = "diagonal"


CHANNEL_AXIS = {Channel.OFF_DIAGONAL: 0, Channel.DIAGONAL: 2}
NORMALIZATIONS = ("per_step", "white")


@dataclass(frozen=True)
class NoiseConfig:
    c: float = 0.0
    channel: Channel = Channel.OFF_DIAGONAL
    trials: int = 1
    seed: int = 0
    shared_across_k: bool = True
    normalization: str = "per_step"

    def __post_init__(self):
        try:
            object.__setattr__(self, "channel", Channel(self.channel))
        except ValueError:
            raise ConfigError(f"unknown noise channel {self.channel!r}") from None
        if not np.isfinite(self.c) or self.c < 0:
            raise ConfigError(f"noise strength c must be >= 0, got {self.c}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError(f"trials must be an integer >= 1, got {self.trials}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigError(f"normalization must be one of {NORMALIZATIONS}")


def trial_rng(seed: int, omega_index: int, trial: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(omega_index), int(trial)))
    return np.random.Generator(np.random.Philox(ss))


def noise_increment(cfg: NoiseConfig, dt: float, rng: np.random.Generator, size=None):
    """Draw ``xi`` for steps of length ``dt`` under the configured normalization."""
    if dt <= 0:
        raise ConfigError("dt must be positive")
    xi = rng.standard_normal(size)
    if cfg.normalization == "white":
        xi = xi / np.sqrt(dt)
    return xi


def perturbation_path(cfg: NoiseConfig, omega: float, n_steps: int, dt: float, rng, n_k: int | None = None):
    """Field perturbation per step, ``(n_steps, 3)`` or ``(n_steps, n_k, 3)``.

    ``dt`` is the physical step length. With ``c == 0`` the path is exactly
    zero (the RNG is still advanced so streams stay aligned).
    """
    shape = (n_steps,) if cfg.shared_across_k or n_k is None else (n_steps, n_k)
    xi = noise_increment(cfg, dt, rng, shape)
    out = np.zeros(shape + (3,))
    out[..., CHANNEL_AXIS[cfg.channel]] = cfg.c * omega * xi
    return out


@dataclass(frozen=True)
class SweepResult:
    omega: float
    scheme: str
    mean: float
    std: float
    trials: int
    values: tuple = ()


def _physical_step(p: DriveParams, plan) -> float:
    return plan.step / p.omega if plan.scaled else plan.step


def noisy_shift(p: DriveParams, cfg: NoiseConfig, evo: EvolutionConfig, omega_index: int, trial: int) -> float:
    """``ybar(T)`` for one noise realization."""
    plan = plan_steps(p, evo, p.k_grid, p.scheme)
    if cfg.c == 0:
        return float(pump_shift(p, evo, plan=plan)[0])
    rng = trial_rng(cfg.seed, omega_index, trial)
    path = perturbation_path(cfg, p.omega, plan.n_steps, _physical_step(p, plan), rng, p.n_k)
    return float(pump_shift(p, evo, perturbation=path, plan=plan)[0])


def _task(args):
    return noisy_shift(*args)


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("STA_PUMP_THREADS")
        threads = int(env) if env else 1
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    return int(threads)


def parallel_map(fn, items, threads: int | None = None) -> list:
    """Order-preserving map; uses worker processes when ``threads > 1``."""
    items = list(items)
    threads = resolve_threads(threads)
    if threads == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


def noisy_frequency_sweep(
    template: DriveParams,
    omegas,
    cfg: NoiseConfig,
    evo: EvolutionConfig | None = None,
    scheme=None,
    threads: int | None = None,
) -> list[SweepResult]:
    """Mean and standard deviation (1 sigma, ddof=0) of ``ybar(T)`` per omega."""
    evo = evo or EvolutionConfig()
    scheme = _coerce_scheme(scheme if scheme is not None else template.scheme)
    params = [dataclasses.replace(template, omega=float(w), scheme=scheme) for w in omegas]
    # Without noise every trial is identical; compute once.
    n_trials = cfg.trials if cfg.c > 0 else 1
    tasks = [(p, cfg, evo, i, j) for i, p in enumerate(params) for j in range(n_trials)]
    values = parallel_map(_task, tasks, threads)
    out = []
    for i, p in enumerate(params):
        v = np.array(values[i * n_trials : (i + 1) * n_trials])
        if cfg.c == 0:
            v = np.repeat(v, cfg.trials)
        out.append(SweepResult(p.omega, scheme.value, float(v.mean()), float(v.std()), cfg.trials, tuple(v.tolist())))
    return out
