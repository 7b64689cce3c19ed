import json

import numpy as np
import pytest

from optosim import _accel, kernels, model, rng, sde

from conftest import run_python

needs_numba = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba unavailable")


def setup(scheme, dt, n_steps=300, n_th_b=112.0):
    p = model.paper_preset(n_th_b=n_th_b).scaled()
    env = model.PulseEnvelope()
    cfg = sde.IntegratorConfig(dt=dt, n_steps=n_steps, checkpoints=(0, n_steps // 3, n_steps), scheme=scheme)
    return p, env, cfg, model.gain_grid(p, env, dt, n_steps)


@needs_numba
@pytest.mark.parametrize("scheme,dt", [("rotating_euler", 0.01), ("euler_maruyama", 0.001)])
@pytest.mark.parametrize("rep", ["positive_p", "wigner"])
def test_backends_agree(scheme, dt, rep):
    p, env, cfg, grid = setup(scheme, dt)
    keys = rng.stream_keys_np(7, np.arange(64))
    m1, d1 = kernels.integrate_batch(rep, keys, p, grid, cfg, backend="numba")
    m2, d2 = kernels.integrate_batch(rep, keys, p, grid, cfg, backend="numpy")
    assert np.array_equal(d1, d2) and not d1.any()
    scale = np.abs(m1).max(axis=0, keepdims=True) + 1e-300
    assert np.max(np.abs(m1 - m2) / scale) < 1e-10


@pytest.mark.parametrize("rep", ["positive_p", "wigner"])
@pytest.mark.parametrize("drift", ["printed", "weyl"])
def test_kernel_matches_reference_step(rep, drift):
    p, env, cfg, grid = setup("rotating_euler", 0.01)
    cfg = sde.IntegratorConfig(dt=cfg.dt, n_steps=cfg.n_steps, checkpoints=cfg.checkpoints,
                               wigner_drift=drift)
    keys = rng.stream_keys_np(7, np.arange(5))
    mom, _ = kernels.integrate_batch(rep, keys, p, grid, cfg)
    for j in (0, 3):
        st = rng.CounterStream(7, j)
        s = sde.sample_initial(rep, p, st)
        for n in range(cfg.n_steps):
            s = sde.step(s, cfg, p, env, st, weight=grid.weight[n])
        out = mom[j, -1]
        assert abs(out[14] - s.alpha) < 1e-9 * max(1, abs(s.alpha))
        assert abs(out[16] - s.beta) < 1e-9 * max(1, abs(s.beta))
        assert abs(out[2] - s.out_raw) < 1e-9 * max(1, abs(s.out_raw))
        br = sde.rotate_to_frame(s, s.t, p.omega_m)[2]
        assert abs(out[0] - br) < 1e-9 * max(1, abs(br))


def test_monomial_layout():
    assert len(kernels.MONOMIALS) == kernels.N_MONO == 28
    assert kernels.MONOMIALS[4] == "out:00" and kernels.MONOMIALS[14] == "cav:0"
    p, env, cfg, grid = setup("rotating_euler", 0.01, n_steps=50)
    cfg = sde.IntegratorConfig(dt=0.01, n_steps=50, checkpoints=(50,))
    mom, _ = kernels.integrate_batch("wigner", rng.stream_keys_np(1, np.arange(3)), p, grid, cfg)
    z = mom[:, 0, 14:18]
    for k, (i, j) in enumerate(kernels.PAIRS):
        assert np.allclose(mom[:, 0, 18 + k], z[:, i] * z[:, j], rtol=1e-12)
    assert np.allclose(z[:, 1], np.conj(z[:, 0]))


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_divergence_flags(backend):
    if backend == "numba" and not _accel.HAVE_NUMBA:
        pytest.skip("numba unavailable")
    p = model.paper_preset(n_th_b=112.0, n_b0=112.0).replace(N_ph=0.0).scaled()
    grid = model.gain_grid(p, model.PulseEnvelope(), 0.01, 100)
    # thermal mirror amplitudes straddle the threshold
    cfg = sde.IntegratorConfig(dt=0.01, n_steps=100, checkpoints=(100,), divergence_threshold=11.0)
    mom, div = kernels.integrate_batch("wigner", rng.stream_keys_np(2, np.arange(200)), p, grid,
                                       cfg, backend=backend)
    assert 0 < div.sum() < 200
    assert np.all(mom[div.astype(bool)] == 0)


def test_disable_flag_falls_back_to_numpy():
    code = (
        "import json, numpy as np\n"
        "from optosim import _accel, kernels, model, rng, sde\n"
        "p = model.paper_preset(n_th_b=112.0).scaled(); env = model.PulseEnvelope()\n"
        "cfg = sde.IntegratorConfig(dt=0.01, n_steps=40, checkpoints=(40,))\n"
        "g = model.gain_grid(p, env, 0.01, 40)\n"
        "m, _ = kernels.integrate_batch('positive_p', rng.stream_keys_np(3, np.arange(4)), p, g, cfg)\n"
        "print(json.dumps([_accel.backend_name(), _accel.HAVE_NUMBA, m[:, 0, 14].real.tolist()]))\n"
    )
    out = json.loads(run_python(code, env_extra={"OPTOSIM_DISABLE_NUMBA": "1"}))
    assert out[:2] == ["numpy", False]
    p, env, cfg, grid = setup("rotating_euler", 0.01, n_steps=40)
    cfg = sde.IntegratorConfig(dt=0.01, n_steps=40, checkpoints=(40,))
    m, _ = kernels.integrate_batch("positive_p", rng.stream_keys_np(3, np.arange(4)), p, grid, cfg)
    assert np.allclose(out[2], m[:, 0, 14].real, rtol=1e-10, atol=1e-12)


@needs_numba
def test_benchmark_script_runs():
    import pathlib
    import sys

    code = (
        "import sys, runpy\n"
        f"sys.argv = ['bench', '--n-traj', '16', '--n-steps', '50', '--repeat', '1', '--json']\n"
        f"runpy.run_path({str(pathlib.Path(__file__).parents[1] / 'benchmarks' / 'bench_backends.py')!r},"
        " run_name='__main__')\n"
    )
    out = json.loads(run_python(code))
    assert {r["representation"] for r in out} == {"positive_p", "wigner"}
    assert all(r["max_rel_deviation"] < 1e-10 for r in out)
