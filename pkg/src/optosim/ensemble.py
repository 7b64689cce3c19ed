"""Monte Carlo ensembles over independent trajectories.

Trajectory ``j`` always draws from stream ``(master_seed, j)`` and belongs to
batch ``j // (n_traj // n_batches)``.  Batch sums are exactly rounded
(``math.fsum``), so a result does not depend on thread count, and merging
batches in any order gives bit-identical totals.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .errors import DivergenceBudgetExceeded, InsufficientBatches, InvalidConfig, ValidationError
from .kernels import N_MONO, integrate_batch
from .model import PhysicalParams, PulseEnvelope, gain_grid
from .rng import stream_keys_np
from .sde import REPRESENTATIONS, IntegratorConfig

log = logging.getLogger(__name__)

MIN_BATCHES = 10
DIVERGENCE_BUDGET = 1e-4
CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class EnsembleConfig:
    integrator: IntegratorConfig
    n_traj: int = 80000
    n_batches: int = 20
    master_seed: int = 0
    representation: str = "wigner"

    def __post_init__(self):
        if self.n_traj <= 0:
            raise InvalidConfig("n_traj must be positive")
        if self.n_batches < MIN_BATCHES:
            raise InvalidConfig(f"n_batches must be >= {MIN_BATCHES}")
        if self.n_traj % self.n_batches:
            raise InvalidConfig("n_traj must be divisible by n_batches")
        if self.representation not in REPRESENTATIONS:
            raise InvalidConfig(f"unknown representation {self.representation!r}")
        if not 0 <= int(self.master_seed) < 2**64:
            raise InvalidConfig("master_seed must fit in an unsigned 64-bit integer")


def _exact_sum(x, axis=0):
    """Exactly rounded complex sum along ``axis`` (order independent)."""
    x = np.moveaxis(np.asarray(x), axis, 0)
    flat_re = x.real.reshape(x.shape[0], -1)
    flat_im = x.imag.reshape(x.shape[0], -1)
    out = np.empty(flat_re.shape[1], dtype=np.complex128)
    for k in range(out.size):
        out[k] = complex(math.fsum(flat_re[:, k]), math.fsum(flat_im[:, k]))
    return out.reshape(x.shape[1:])


@dataclass(frozen=True)
class MomentAccumulator:
    """Raw monomial sums ``(n_checkpoints, 28)`` over ``count`` trajectories."""

    sums: np.ndarray
    count: int

    def __post_init__(self):
        self.sums.setflags(write=False)

    @classmethod
    def from_trajectories(cls, mom):
        mom = np.asarray(mom)
        if mom.shape[0] == 0:
            return cls(np.zeros(mom.shape[1:], np.complex128), 0)
        return cls(_exact_sum(mom, axis=0), mom.shape[0])

    @classmethod
    def merge(cls, accs):
        accs = list(accs)
        return cls(_exact_sum(np.stack([a.sums for a in accs])), sum(a.count for a in accs))

    def __add__(self, other):
        return MomentAccumulator.merge([self, other])

    def means(self):
        if self.count == 0:
            raise InsufficientBatches("accumulator holds no trajectories")
        return self.sums / self.count


@dataclass(frozen=True)
class EnsembleResult:
    representation: str
    batches: tuple
    checkpoint_steps: np.ndarray
    times: np.ndarray  # scaled units
    r: np.ndarray
    N: np.ndarray  # scaled units, consistent with the output accumulation
    params: object  # ScaledParams
    n_traj: int
    diverged: int
    diverged_ids: tuple = ()
    wall_time: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def total(self) -> MomentAccumulator:
        return MomentAccumulator.merge(self.batches)

    @property
    def n_batches(self):
        return len(self.batches)

    @property
    def diverged_fraction(self):
        return self.diverged / self.n_traj


def run_ensemble(cfg: EnsembleConfig, params, env: PulseEnvelope,
                 backend=None, check_budget=True, progress=None) -> EnsembleResult:
    p = params.scaled() if isinstance(params, PhysicalParams) else params
    ic = cfg.integrator
    ic.validate(p)
    grid = gain_grid(p, env, ic.dt, ic.n_steps, ic.gain_form)
    per = cfg.n_traj // cfg.n_batches
    batches, div_ids = [], []
    t0 = time.perf_counter()
    for b in range(cfg.n_batches):
        ids = np.arange(b * per, (b + 1) * per, dtype=np.uint64)
        keys = stream_keys_np(cfg.master_seed, ids)
        mom, div = integrate_batch(cfg.representation, keys, p, grid, ic, backend=backend)
        ok = div == 0
        batches.append(MomentAccumulator.from_trajectories(mom[ok]))
        div_ids.extend(int(j) for j in ids[~ok])
        if progress is not None:
            progress(b + 1, cfg.n_batches)
    wall = time.perf_counter() - t0
    steps = np.asarray(ic.checkpoints, dtype=np.int64)
    result = EnsembleResult(
        representation=cfg.representation,
        batches=tuple(batches),
        checkpoint_steps=steps,
        times=steps * ic.dt,
        r=grid.r[steps],
        N=grid.N[steps],
        params=p,
        n_traj=cfg.n_traj,
        diverged=len(div_ids),
        diverged_ids=tuple(div_ids),
        wall_time=wall,
        meta={"backend": backend or _accel.backend_name(), "threads": _accel.get_threads(),
              "seed": int(cfg.master_seed), "dt": ic.dt, "scheme": ic.scheme,
              "gain_form": ic.gain_form},
    )
    log.info("%s ensemble: %d trajectories, %d diverged, %.1f s",
             cfg.representation, cfg.n_traj, result.diverged, wall)
    if check_budget and result.diverged_fraction > DIVERGENCE_BUDGET:
        first = div_ids[0]
        raise DivergenceBudgetExceeded(
            f"{result.diverged} of {cfg.n_traj} trajectories diverged "
            f"(budget {DIVERGENCE_BUDGET:g}); first index {first}",
            trajectory=first,
        )
    return result


def batch_standard_error(values):
    """Standard deviation across batches divided by sqrt(n_batches).

    ``values`` has the batch index first; trailing axes are kept.
    """
    v = np.asarray(values, dtype=float)
    if v.shape[0] < MIN_BATCHES:
        raise InsufficientBatches(f"need >= {MIN_BATCHES} batches, got {v.shape[0]}")
    return np.std(v, axis=0, ddof=1) / math.sqrt(v.shape[0])


def batch_estimate(result: EnsembleResult, fn):
    """``(fn(total), standard error of fn across batches)``."""
    value = np.asarray(fn(result.total), dtype=float)
    per_batch = np.array([fn(b) for b in result.batches], dtype=float)
    return value, batch_standard_error(per_batch)


# checkpoint files --------------------------------------------------------
#
# A .npz archive with the members
#   format_version  int64 scalar (CHECKPOINT_FORMAT_VERSION)
#   sums            complex128 (n_batches, n_checkpoints, 28) raw monomial sums
#   counts          int64 (n_batches,) trajectories per batch after exclusions
#   steps, times, r, N   per-checkpoint grid data (scaled units)
#   diverged_ids    int64 list of excluded trajectory indices
#   header          JSON string: representation, n_traj, params, meta


def save_checkpoint(result: EnsembleResult, path):
    header = {
        "representation": result.representation,
        "n_traj": result.n_traj,
        "params": {k: getattr(result.params, k) for k in result.params.__dataclass_fields__},
        "meta": result.meta,
        "wall_time": result.wall_time,
    }
    np.savez(
        path,
        format_version=np.int64(CHECKPOINT_FORMAT_VERSION),
        sums=np.stack([b.sums for b in result.batches]),
        counts=np.array([b.count for b in result.batches], dtype=np.int64),
        steps=result.checkpoint_steps, times=result.times, r=result.r, N=result.N,
        diverged_ids=np.array(result.diverged_ids, dtype=np.int64),
        header=np.array(json.dumps(header)),
    )


def load_checkpoint(path) -> EnsembleResult:
    from .model import ScaledParams

    with np.load(path, allow_pickle=False) as z:
        version = int(z["format_version"])
        if version != CHECKPOINT_FORMAT_VERSION:
            raise ValidationError(f"unsupported checkpoint format version {version}")
        header = json.loads(str(z["header"]))
        sums, counts = z["sums"], z["counts"]
        if sums.shape[-1] != N_MONO:
            raise ValidationError("checkpoint monomial layout mismatch")
        batches = tuple(MomentAccumulator(np.array(s), int(c)) for s, c in zip(sums, counts))
        ids = tuple(int(i) for i in z["diverged_ids"])
        return EnsembleResult(
            representation=header["representation"], batches=batches,
            checkpoint_steps=np.array(z["steps"]), times=np.array(z["times"]),
            r=np.array(z["r"]), N=np.array(z["N"]),
            params=ScaledParams(**header["params"]), n_traj=int(header["n_traj"]),
            diverged=len(ids), diverged_ids=ids, wall_time=header["wall_time"],
            meta=header["meta"],
        )
