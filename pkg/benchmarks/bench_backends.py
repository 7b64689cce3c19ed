"""Compare the numba and numpy trajectory kernels on the paper parameters.

Times one batch per representation and backend, after a warm-up call that
absorbs JIT compilation, and checks that the two backends produce the same
moments.  Example::

    python3 benchmarks/bench_backends.py --n-traj 2000 --n-steps 20000

The numpy backend is what runs when ``OPTOSIM_DISABLE_NUMBA=1`` is set.
"""

import argparse
import json
import time

import numpy as np

from optosim import _accel, kernels, model, rng, sde


def time_backend(rep, backend, keys, p, grid, cfg, repeat):
    kernels.integrate_batch(rep, keys[:8], p, grid, cfg, backend=backend)  # warm-up
    best, mom = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        mom, _ = kernels.integrate_batch(rep, keys, p, grid, cfg, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, mom


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-traj", type=int, default=2000)
    ap.add_argument("--n-steps", type=int, default=20000, help="steps of dt = 0.01")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--json", action="store_true", help="print a JSON record instead of a table")
    args = ap.parse_args(argv)

    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is unavailable (or disabled); nothing to compare")
    _accel.set_threads(args.threads)
    p = model.paper_preset().scaled()
    env = model.PulseEnvelope()
    n = min(args.n_steps, int(round(p.tau / 0.01)))
    cfg = sde.IntegratorConfig(dt=0.01, n_steps=n, checkpoints=(n // 2, n))
    grid = model.gain_grid(p, env, cfg.dt, n)
    keys = rng.stream_keys_np(2024, np.arange(args.n_traj))

    records = []
    for rep in sde.REPRESENTATIONS:
        t_nb, m_nb = time_backend(rep, "numba", keys, p, grid, cfg, args.repeat)
        t_np, m_np = time_backend(rep, "numpy", keys, p, grid, cfg, args.repeat)
        scale = np.abs(m_nb).max(axis=0) + 1e-300
        dev = float(np.max(np.abs(m_nb - m_np) / scale))
        steps = args.n_traj * n
        records.append({
            "representation": rep, "n_traj": args.n_traj, "n_steps": n,
            "threads": _accel.get_threads(),
            "numba_s": t_nb, "numpy_s": t_np, "speedup": t_np / t_nb,
            "numba_ns_per_step": 1e9 * t_nb / steps, "numpy_ns_per_step": 1e9 * t_np / steps,
            "max_rel_deviation": dev,
        })
    if args.json:
        print(json.dumps(records, indent=2))
        return
    print(f"{args.n_traj} trajectories x {n} steps, {_accel.get_threads()} numba thread(s)")
    print(f"{'representation':<12} {'numba s':>9} {'numpy s':>9} {'speedup':>8} {'max rel dev':>12}")
    for r in records:
        print(f"{r['representation']:<12} {r['numba_s']:9.3f} {r['numpy_s']:9.3f} "
              f"{r['speedup']:8.2f} {r['max_rel_deviation']:12.2e}")


if __name__ == "__main__":
    main()
