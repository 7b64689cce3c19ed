"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 divergence budget exceeded,
4 statistics error (including a failed oracle comparison), 5 Fock
truncation or master-equation step-size failure.
"""

from __future__ import annotations

import json
import logging
import os
import sys

import click

REPS = {"pp": ("positive_p",), "wigner": ("wigner",), "both": ("positive_p", "wigner")}
THREADS_ENV = "PHASESPACE_THREADS"


def _early_threads(argv):
    """Thread count from argv or the environment, before numba is imported."""
    n = None
    for i, a in enumerate(argv):
        if a == "--threads" and i + 1 < len(argv):
            n = argv[i + 1]
        elif a.startswith("--threads="):
            n = a.split("=", 1)[1]
    if n is None:
        n = os.environ.get(THREADS_ENV)
    try:
        return int(n) if n is not None else None
    except ValueError:
        return None


def _prepare_pool(n):
    # the numba pool size is fixed at import; make room for the request
    if n and n > 0 and "numba" not in sys.modules:
        cur = os.environ.get("NUMBA_NUM_THREADS")
        if cur is None or int(cur) < n:
            os.environ["NUMBA_NUM_THREADS"] = str(n)


def _load(config, seed, representation, n_traj):
    from .config import resolve_config

    cfg = resolve_config(config)
    kw = {}
    if seed is not None:
        kw["seed"] = seed
    if representation is not None:
        kw["representations"] = REPS[representation]
    if n_traj is not None:
        kw["n_traj"] = n_traj
    if kw:
        from .config import validate

        cfg = validate(cfg.replace(**kw))
    return cfg


def _apply_threads(threads):
    from . import _accel

    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else None
    if threads is not None:
        _accel.set_threads(threads)


def common(f, default_config="preset:paper"):
    f = click.option("--config", "config", default=default_config, show_default=True,
                     help="config file path, or preset:NAME (paper, paper_20K, oracle, zero_drive)")(f)
    f = click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None,
                     help="master seed (unsigned 64-bit)")(f)
    f = click.option("--threads", type=click.IntRange(1), default=None,
                     help=f"worker threads (fallback: ${THREADS_ENV})")(f)
    f = click.option("--representation", type=click.Choice(sorted(REPS)), default=None,
                     help="override the configured representation(s)")(f)
    f = click.option("--out", "out", default=None, help="output directory")(f)
    f = click.option("--n-traj", type=click.IntRange(1), default=None,
                     help="override the trajectory count")(f)
    return f


def _fail(exc):
    click.echo(f"error: {exc}", err=True)
    sys.exit(getattr(exc, "exit_code", 1))


@click.group()
@click.option("-v", "--verbose", count=True, help="more logging")
def cli(verbose):
    """Phase-space Monte Carlo for pulsed cavity optomechanics."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@common
@click.option("--svg/--no-svg", default=None, help="write witnesses.svg")
def run(config, seed, threads, representation, out, n_traj, svg):
    """Witnesses at every checkpoint of one pulse."""
    from .errors import OptosimError
    from .runner import run_command

    try:
        cfg = _load(config, seed, representation, n_traj)
        _apply_threads(threads)
        rows = run_command(cfg, out_dir=out, svg=svg)
    except OptosimError as e:
        _fail(e)
    click.echo(f"wrote {len(rows)} rows to {out or cfg.out_dir}")


@cli.command()
@common
@click.option("--svg/--no-svg", default=None)
def sweep(config, seed, threads, representation, out, n_traj, svg):
    """Witnesses at the end of pulses of varying duration ([sweep] tau)."""
    from .errors import OptosimError
    from .runner import sweep_command

    try:
        cfg = _load(config, seed, representation, n_traj)
        _apply_threads(threads)
        rows = sweep_command(cfg, out_dir=out, svg=svg)
    except OptosimError as e:
        _fail(e)
    click.echo(f"wrote {len(rows)} rows to {out or cfg.out_dir}")


@cli.command("oracle-compare")
@(lambda f: common(f, "preset:oracle"))
def oracle_compare(config, seed, threads, representation, out, n_traj):
    """Ensemble intracavity moments against the master equation."""
    from .errors import OptosimError, StatisticsError
    from .runner import oracle_compare_command

    try:
        cfg = _load(config, seed, representation, n_traj)
        _apply_threads(threads)
        rows, summary = oracle_compare_command(cfg, out_dir=out)
    except OptosimError as e:
        _fail(e)
    click.echo(json.dumps({k: summary[k] for k in ("pp_max_abs_z", "pp_pass",
                                                   "wigner_cov_rel_dev", "wigner_pass")}))
    if "positive_p" in cfg.representations and not summary["pp_pass"]:
        _fail(StatisticsError(f"positive-P z-score {summary['pp_max_abs_z']:.2f} exceeds 4"))


@cli.command()
@click.argument("csv_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out", default=None, help="SVG path (default: next to the CSV)")
def plot(csv_path, out):
    """Re-plot an SVG from a witnesses CSV."""
    from .runner import plot_command

    click.echo(f"wrote {plot_command(csv_path, out)}")


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    _prepare_pool(_early_threads(argv))
    return cli.main(args=argv, prog_name="optosim")


if __name__ == "__main__":
    main()
