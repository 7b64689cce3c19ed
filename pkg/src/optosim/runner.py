"""Run orchestration and result files (CSV, JSON manifest, SVG)."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import platform
import time
from pathlib import Path

import numpy as np

from . import __version__, _accel
from .config import RunConfig
from .ensemble import EnsembleConfig, batch_estimate, run_ensemble
from .estimators import (
    INTRACAVITY_MOMENTS,
    intracavity_moment_set,
    intracavity_moments,
    quad_covariance,
    witness_vs_r,
)
from .model import gain_grid, steps_for_gain
from .sde import IntegratorConfig
from .svg import witness_chart

log = logging.getLogger(__name__)

CSV_COLUMNS = ("r", "t", "delta_ent", "delta_ent_err", "g_ent", "E_m_c", "E_m_c_err",
               "E_c_m", "E_c_m_err", "gx_mc", "gp_mc", "gx_cm", "gp_cm", "representation")
ORACLE_COLUMNS = ("moment", "me_value", "pp_value", "pp_err", "wigner_value", "wigner_err",
                  "z_score")
PP_Z_LIMIT = 4.0
WIGNER_REL_LIMIT = 0.10


def integrator_for(cfg: RunConfig, p, final_only=False) -> IntegratorConfig:
    """Integrator grid for scaled params ``p`` with the configured checkpoints."""
    n_steps = max(1, int(round(p.tau / cfg.dt)))
    kw = dict(divergence_threshold=cfg.divergence_threshold, scheme=cfg.scheme,
              gain_form=cfg.gain_form, wigner_drift=cfg.wigner_drift)
    if final_only:
        ck = [n_steps]
    elif cfg.checkpoint_kind == "r":
        grid = gain_grid(p, cfg.envelope, cfg.dt, n_steps, cfg.gain_form)
        ck = steps_for_gain(grid, cfg.checkpoint_values)
    elif cfg.checkpoint_kind == "t_frac":
        ck = sorted({int(round(f * n_steps)) for f in cfg.checkpoint_values})
    else:
        n = cfg.checkpoint_values[0]
        fr = np.linspace(0.0, 1.0, n) if n > 1 else np.array([1.0])
        ck = sorted({int(round(f * n_steps)) for f in fr})
    return IntegratorConfig(dt=cfg.dt, n_steps=n_steps, checkpoints=tuple(ck), **kw)


def run_representation(cfg: RunConfig, representation, params=None, final_only=False,
                       backend=None):
    p = (params or cfg.params).scaled()
    ic = integrator_for(cfg, p, final_only=final_only)
    ec = EnsembleConfig(ic, n_traj=cfg.n_traj, n_batches=cfg.n_batches,
                        master_seed=cfg.seed, representation=representation)
    result = run_ensemble(ec, p, cfg.envelope, backend=backend)
    return result, witness_vs_r(result)


def report_row(rep):
    return {
        "r": rep.r, "t": rep.t, "delta_ent": rep.delta_ent, "delta_ent_err": rep.delta_ent_err,
        "g_ent": rep.g_ent, "E_m_c": rep.E_m_c, "E_m_c_err": rep.E_m_c_err, "E_c_m": rep.E_c_m,
        "E_c_m_err": rep.E_c_m_err, "gx_mc": rep.gx_mc, "gp_mc": rep.gp_mc, "gx_cm": rep.gx_cm,
        "gp_cm": rep.gp_cm, "representation": rep.representation,
    }


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(rows, columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def read_csv(path):
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append({k: (v if k == "representation" else float(v)) for k, v in row.items()})
    return rows


def group_rows(rows):
    out = {}
    for row in rows:
        out.setdefault(row["representation"], []).append(row)
    return out


def manifest(cfg: RunConfig, results: dict, wall, command):
    return {
        "command": command,
        "library_version": __version__,
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "representations": list(results),
        "n_traj": cfg.n_traj,
        "n_batches": cfg.n_batches,
        "diverged": {rep: res.diverged for rep, res in results.items()},
        "diverged_fraction": {rep: res.diverged_fraction for rep, res in results.items()},
        "wall_time_s": wall,
        "ensemble_wall_time_s": {rep: res.wall_time for rep, res in results.items()},
        "backend": _accel.backend_name(),
        "threads": _accel.get_threads(),
        "python": platform.python_version(),
    }


def run_command(cfg: RunConfig, out_dir=None, svg=None, backend=None):
    """Run every configured representation and write ``witnesses.csv``,
    ``manifest.json`` and optionally ``witnesses.svg``.  Returns the rows."""
    out = Path(out_dir or cfg.out_dir)
    t0 = time.perf_counter()
    results, rows = {}, []
    for rep in cfg.representations:
        res, reports = run_representation(cfg, rep, backend=backend)
        results[rep] = res
        rows += [report_row(r) for r in reports]
    wall = time.perf_counter() - t0
    write_text(out / "witnesses.csv", csv_text(rows))
    write_text(out / "manifest.json", json.dumps(manifest(cfg, results, wall, "run"), indent=2) + "\n")
    if cfg.svg if svg is None else svg:
        write_text(out / "witnesses.svg", witness_chart(group_rows(rows), "witnesses vs r"))
    return rows


def sweep_command(cfg: RunConfig, out_dir=None, svg=None, backend=None):
    """Vary the pulse duration; one row per duration at the end of the pulse."""
    if not cfg.sweep_tau:
        from .errors import ValidationError

        raise ValidationError("sweep needs [sweep] tau = ... in the config")
    out = Path(out_dir or cfg.out_dir)
    t0 = time.perf_counter()
    rows, results = [], {}
    for tau in cfg.sweep_tau:
        params = cfg.params.replace(tau=tau)
        for rep in cfg.representations:
            res, reports = run_representation(cfg, rep, params=params, final_only=True,
                                              backend=backend)
            results[f"{rep}@tau={tau!r}"] = res
            rows += [report_row(r) for r in reports]
    rows.sort(key=lambda r: (r["representation"], r["r"]))
    wall = time.perf_counter() - t0
    write_text(out / "sweep.csv", csv_text(rows))
    write_text(out / "manifest.json", json.dumps(manifest(cfg, results, wall, "sweep"), indent=2) + "\n")
    if cfg.svg if svg is None else svg:
        write_text(out / "sweep.svg", witness_chart(group_rows(rows), "witnesses vs r (duration sweep)"))
    return rows


def plot_command(csv_path, svg_path=None):
    rows = read_csv(csv_path)
    svg_path = Path(svg_path) if svg_path else Path(csv_path).with_suffix(".svg")
    write_text(svg_path, witness_chart(group_rows(rows), Path(csv_path).stem))
    return svg_path


# oracle comparison --------------------------------------------------------

_COV_NAMES = ("Xb", "Pb", "Xa", "Pa")


def oracle_compare(cfg: RunConfig, backend=None):
    """Compare ensemble intracavity moments with the master equation.

    Returns ``(rows, summary)``.  Rows hold each moment component (real and
    imaginary parts of the normally ordered moments, then the symmetrised
    quadrature covariance) at each oracle time.  ``z_score`` is the
    positive-P deviation in units of its batch standard error.
    """
    from .oracle import FockConfig, evolve_me, initial_state

    p = cfg.params.scaled()
    o = cfg.oracle
    t_final = p.tau if o.t_final is None else o.t_final
    times = tuple(o.times) or (t_final,)
    fc = FockConfig(o.dim_a, o.dim_b, o.dt_me, t_final)
    t0 = time.perf_counter()
    me = evolve_me(initial_state(fc, p.n_b0), fc, p, cfg.envelope, checkpoints=times)
    me_time = time.perf_counter() - t0

    n_steps = max(1, int(round(max(times) / cfg.dt)))
    ck = tuple(sorted({int(round(t / cfg.dt)) for t in times}))
    ic = IntegratorConfig(dt=cfg.dt, n_steps=n_steps, checkpoints=ck,
                          divergence_threshold=cfg.divergence_threshold, scheme=cfg.scheme,
                          gain_form=cfg.gain_form, wigner_drift=cfg.wigner_drift)
    sde = {}
    for rep in ("positive_p", "wigner"):
        if rep not in cfg.representations:
            continue
        ec = EnsembleConfig(ic, n_traj=cfg.n_traj, n_batches=cfg.n_batches,
                            master_seed=cfg.seed, representation=rep)
        sde[rep] = run_ensemble(ec, p, cfg.envelope, backend=backend)

    def est(rep, k, fn):
        if rep not in sde:
            return math.nan, math.nan
        v, e = batch_estimate(sde[rep], fn)
        return float(v), float(e)

    rows = []
    wig_rel = []
    for k, t in enumerate(times):
        for name in INTRACAVITY_MOMENTS:
            for part, f in (("re", np.real), ("im", np.imag)):
                fn = {rep: (lambda acc, rep=rep: f(intracavity_moments(acc, k, rep)[name]))
                      for rep in sde}
                pv, pe = est("positive_p", k, fn.get("positive_p"))
                wv, we = est("wigner", k, fn.get("wigner"))
                mv = float(f(me.moments[name][k]))
                rows.append(_oracle_row(f"{part}:{name}:t={t:g}", mv, pv, pe, wv, we))
        C_me = me.covariance[k]
        covs = {}
        for rep in sde:
            covs[rep] = quad_covariance(intracavity_moment_set(sde[rep].total, k, rep), rep,
                                        0.0, 0.0).matrix
        for i in range(4):
            for j in range(i, 4):
                nm = f"cov:{_COV_NAMES[i]}{_COV_NAMES[j]}:t={t:g}"
                vals = {}
                for rep in sde:
                    vals[rep] = est(rep, k, lambda acc, rep=rep, i=i, j=j: quad_covariance(
                        intracavity_moment_set(acc, k, rep), rep, 0.0, 0.0).matrix[i, j])
                pv, pe = vals.get("positive_p", (math.nan, math.nan))
                wv, we = vals.get("wigner", (math.nan, math.nan))
                rows.append(_oracle_row(nm, float(C_me[i, j]), pv, pe, wv, we))
        if "wigner" in covs:
            wig_rel.append(float(np.linalg.norm(covs["wigner"] - C_me) / np.linalg.norm(C_me)))
    zs = [abs(r["z_score"]) for r in rows if math.isfinite(r["z_score"])]
    summary = {
        "times": list(times),
        "me_wall_time_s": me_time,
        "top_population": me.top_population.tolist(),
        "pp_max_abs_z": max(zs) if zs else math.nan,
        "pp_z_limit": PP_Z_LIMIT,
        "wigner_cov_rel_dev": wig_rel,
        "wigner_rel_limit": WIGNER_REL_LIMIT,
        "diverged": {rep: res.diverged for rep, res in sde.items()},
    }
    # None marks a representation that was not run
    summary["pp_pass"] = (summary["pp_max_abs_z"] <= PP_Z_LIMIT) if zs else None
    summary["wigner_pass"] = (max(wig_rel) <= WIGNER_REL_LIMIT) if wig_rel else None
    return rows, summary


def _oracle_row(name, mv, pv, pe, wv, we):
    z = (pv - mv) / pe if (math.isfinite(pv) and pe > 0) else (0.0 if pv == mv else math.nan)
    return {"moment": name, "me_value": mv, "pp_value": pv, "pp_err": pe,
            "wigner_value": wv, "wigner_err": we, "z_score": z}


def oracle_compare_command(cfg: RunConfig, out_dir=None, backend=None):
    out = Path(out_dir or cfg.out_dir)
    rows, summary = oracle_compare(cfg, backend=backend)
    write_text(out / "oracle_compare.csv", csv_text(rows, ORACLE_COLUMNS))
    write_text(out / "oracle_summary.json", json.dumps(summary, indent=2) + "\n")
    return rows, summary
