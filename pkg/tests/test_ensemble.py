import json
import math

import numpy as np
import pytest

from optosim import _accel, ensemble, sde
from optosim.ensemble import (
    EnsembleConfig,
    MomentAccumulator,
    batch_estimate,
    batch_standard_error,
    load_checkpoint,
    run_ensemble,
    save_checkpoint,
)
from optosim.errors import (
    DivergenceBudgetExceeded,
    InsufficientBatches,
    InvalidConfig,
    ValidationError,
)
from optosim.kernels import MONOMIALS
from optosim.model import PulseEnvelope, ScaledParams

from conftest import run_python

ENV = PulseEnvelope()
BDB = MONOMIALS.index("cav:23")  # beta * beta_plus


def thermal_params(**kw):
    base = dict(omega_m=6.0, gamma_a=1.0, gamma_b=0.5, chi0=0.0, Delta=-6.0, n_b0=2.0,
                n_th_a=0.0, n_th_b=0.2, N_ph=0.0, tau=1.0)
    base.update(kw)
    return ScaledParams(**base)


def small_cfg(n_traj=2000, n_batches=10, rep="positive_p", seed=3, **ic):
    ic = dict(dict(dt=0.01, n_steps=100, checkpoints=(0, 50, 100)), **ic)
    return EnsembleConfig(sde.IntegratorConfig(**ic), n_traj=n_traj, n_batches=n_batches,
                          master_seed=seed, representation=rep)


@pytest.mark.parametrize("kw", [dict(n_traj=0), dict(n_batches=5), dict(n_traj=1001),
                                dict(rep="glauber"), dict(seed=-1), dict(seed=2**64)])
def test_invalid_config(kw):
    with pytest.raises(InvalidConfig):
        small_cfg(**kw)


@pytest.mark.parametrize("rep", ["positive_p", "wigner"])
def test_thermal_relaxation(rep):
    # <b^dag b>(t) = n_th + (n_0 - n_th) exp(-2 gamma_b t)
    p = thermal_params()
    res = run_ensemble(small_cfg(n_traj=20000, n_batches=20, rep=rep), p, ENV)
    shift = 0.5 if rep == "wigner" else 0.0
    val, se = batch_estimate(res, lambda acc: acc.means()[:, BDB].real - shift)
    expect = p.n_th_b + (p.n_b0 - p.n_th_b) * np.exp(-2 * p.gamma_b * res.times)
    assert np.all(np.abs(val - expect) <= 4 * se + 1e-3 * np.abs(expect) * (rep == "wigner"))
    assert res.diverged == 0 and res.total.count == 20000


def test_batches_partition_trajectory_ids():
    p = thermal_params()
    res = run_ensemble(small_cfg(), p, ENV)
    whole = run_ensemble(small_cfg(n_traj=2000, n_batches=20), p, ENV)
    # same trajectories, different batching: totals agree to rounding
    assert res.total.count == whole.total.count
    assert np.allclose(res.total.sums, whole.total.sums, rtol=1e-13, atol=1e-12)


def test_merge_is_order_independent():
    g = np.random.default_rng(0)
    accs = [MomentAccumulator.from_trajectories(g.standard_normal((50, 3, 28)) * 10.0 ** g.integers(-8, 8)
                                                + 1j * g.standard_normal((50, 3, 28)))
            for _ in range(12)]
    ref = MomentAccumulator.merge(accs)
    for seed in range(5):
        perm = np.random.default_rng(seed).permutation(len(accs))
        other = MomentAccumulator.merge([accs[i] for i in perm])
        assert np.array_equal(other.sums, ref.sums) and other.count == ref.count
    # regrouping rounds partial sums, so it agrees only to rounding
    tree = (accs[0] + accs[1]) + MomentAccumulator.merge(accs[2:])
    assert np.allclose(tree.sums, ref.sums, rtol=1e-14, atol=0)
    with pytest.raises(ValueError):
        ref.sums[0, 0] = 1.0


def test_empty_accumulator():
    acc = MomentAccumulator.from_trajectories(np.zeros((0, 2, 28), complex))
    assert acc.count == 0
    with pytest.raises(InsufficientBatches):
        acc.means()


def test_batch_standard_error():
    v = np.arange(10, dtype=float)
    assert batch_standard_error(v) == pytest.approx(np.std(v, ddof=1) / math.sqrt(10))
    assert batch_standard_error(np.ones((12, 3))).shape == (3,)
    with pytest.raises(InsufficientBatches):
        batch_standard_error(np.ones(9))


def test_standard_error_calibrated():
    # batch errors of a known-mean quantity cover the truth at the nominal rate
    p = thermal_params()
    z = []
    for seed in range(40):
        res = run_ensemble(small_cfg(n_traj=500, seed=seed, checkpoints=(100,)), p, ENV)
        val, se = batch_estimate(res, lambda acc: acc.means()[0, BDB].real)
        z.append((val - (p.n_th_b + (p.n_b0 - p.n_th_b) * math.exp(-2 * p.gamma_b))) / se)
    z = np.asarray(z).ravel()
    # t with 9 dof: variance 9/7
    assert abs(z.mean()) < 4 * math.sqrt(9 / 7 / z.size)
    assert 0.5 < z.var() < 2.5


def test_checkpoint_round_trip(tmp_path):
    res = run_ensemble(small_cfg(), thermal_params(), ENV)
    path = tmp_path / "ck.npz"
    save_checkpoint(res, path)
    back = load_checkpoint(path)
    assert back.representation == res.representation and back.params == res.params
    assert np.array_equal(back.total.sums, res.total.sums)
    assert [b.count for b in back.batches] == [b.count for b in res.batches]
    for f in ("checkpoint_steps", "times", "r", "N"):
        assert np.array_equal(getattr(back, f), getattr(res, f))
    assert back.meta == json.loads(json.dumps(res.meta))


def test_checkpoint_version_mismatch(tmp_path):
    res = run_ensemble(small_cfg(), thermal_params(), ENV)
    path = tmp_path / "ck.npz"
    save_checkpoint(res, path)
    with np.load(path) as z:
        members = dict(z)
    members["format_version"] = np.int64(ensemble.CHECKPOINT_FORMAT_VERSION + 1)
    np.savez(path, **members)
    with pytest.raises(ValidationError):
        load_checkpoint(path)


def test_divergence_budget():
    p = thermal_params(n_b0=50.0, n_th_b=50.0)
    cfg = small_cfg(divergence_threshold=8.0)
    with pytest.raises(DivergenceBudgetExceeded) as exc:
        run_ensemble(cfg, p, ENV)
    assert exc.value.exit_code == 3
    res = run_ensemble(cfg, p, ENV, check_budget=False)
    assert 0 < res.diverged < res.n_traj
    assert res.total.count == res.n_traj - res.diverged
    assert res.diverged_fraction == res.diverged / res.n_traj
    assert len(set(res.diverged_ids)) == res.diverged


THREAD_CODE = """
import hashlib, sys
from optosim import _accel, model, sde
from optosim.ensemble import EnsembleConfig, run_ensemble
p = model.paper_preset(n_th_b=112.0).scaled()
ic = sde.IntegratorConfig(dt=0.01, n_steps=3000, checkpoints=(0, 100, 3000))
out = []
for n in (1, 2, 4):
    _accel.set_threads(n)
    res = run_ensemble(EnsembleConfig(ic, n_traj=4000, n_batches=10, master_seed=99,
                                      representation=sys.argv[1] if len(sys.argv) > 1 else "positive_p"),
                       p, model.PulseEnvelope())
    out.append(hashlib.sha256(b"".join(b.sums.tobytes() for b in res.batches)).hexdigest())
print(_accel.get_threads(), *out)
"""


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba unavailable")
def test_thread_count_does_not_change_results():
    threads, *digests = run_python(THREAD_CODE, threads=4).split()
    assert threads == "4"
    assert len(set(digests)) == 1
    # and a process whose pool holds one thread agrees bit for bit
    _, *single = run_python(THREAD_CODE, threads=1).split()
    assert set(single) == set(digests)
