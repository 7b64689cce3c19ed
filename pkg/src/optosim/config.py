"""Plain-text run configuration.

The format is flat ``key = value`` lines grouped under ``[section]``
headers; ``#`` starts a comment.  Dimensional quantities carry an explicit
unit suffix::

    [params]
    omega_m = 3.7 GHz      # ordinary frequency, converted with 2 pi
    gamma_b = 37 kHz
    tau     = 0.04 us
    T_bath_b = 20 K        # alternative to n_th_b

Setting ``units = scaled`` in ``[params]`` switches to bare numbers in units
of the cavity decay rate (rates) and ``1/gamma_a`` (times).  Unknown
sections or keys are errors.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import InvalidConfig, ParseError, ValidationError
from .model import GAIN_FORMS, PhysicalParams, PulseEnvelope, thermal_occupation
from .sde import SCHEMES, WIGNER_DRIFTS

TWO_PI = 2.0 * math.pi

FREQ_UNITS = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}
RATE_UNITS = {"rad/s": 1.0}
TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9, "ps": 1e-12}
TEMP_UNITS = {"K": 1.0, "mK": 1e-3}

RATE_KEYS = ("omega_m", "gamma_a", "gamma_b", "chi0", "Delta")
COUNT_KEYS = ("n_b0", "n_th_a", "n_th_b", "N_ph")
REP_ALIASES = {"pp": ("positive_p",), "positive_p": ("positive_p",), "wigner": ("wigner",),
               "both": ("positive_p", "wigner")}

SCHEMA = {
    "params": {"units", "tau", "T_bath_b", *RATE_KEYS, *COUNT_KEYS},
    "pulse": {"kind", "center", "width", "samples"},
    "integrator": {"dt", "scheme", "divergence_threshold", "gain_form", "wigner_drift"},
    "ensemble": {"n_traj", "n_batches", "seed", "representation"},
    "checkpoints": {"r", "t_frac", "count"},
    "sweep": {"tau"},
    "oracle": {"dim_a", "dim_b", "dt_me", "t_final", "times"},
    "output": {"dir", "svg"},
}

_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_QTY = re.compile(rf"^({_NUM})\s*([A-Za-z/]*)$")


@dataclass(frozen=True)
class OracleSettings:
    dim_a: int = 14
    dim_b: int = 14
    dt_me: float = 2e-3
    t_final: float | None = None  # scaled units; defaults to tau
    times: tuple = ()


@dataclass(frozen=True)
class RunConfig:
    params: PhysicalParams
    envelope: PulseEnvelope = PulseEnvelope()
    dt: float = 0.01
    scheme: str = "rotating_euler"
    divergence_threshold: float = 1e6
    gain_form: str = "adiabatic"
    wigner_drift: str = "printed"
    n_traj: int = 80000
    n_batches: int = 20
    seed: int = 0
    representations: tuple = ("positive_p", "wigner")
    checkpoint_kind: str = "count"  # r | t_frac | count
    checkpoint_values: tuple = (13,)
    sweep_tau: tuple = ()
    oracle: OracleSettings = OracleSettings()
    out_dir: str = "out"
    svg: bool = True

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def semantic_dict(self):
        """Fields that affect results (output location excluded)."""
        d = {
            "params": dataclasses.asdict(self.params),
            "envelope": {"kind": self.envelope.kind, "center": self.envelope.center,
                         "width": self.envelope.width, "samples": list(self.envelope.samples)},
            "integrator": {"dt": self.dt, "scheme": self.scheme,
                           "divergence_threshold": self.divergence_threshold,
                           "gain_form": self.gain_form, "wigner_drift": self.wigner_drift},
            "ensemble": {"n_traj": self.n_traj, "n_batches": self.n_batches, "seed": self.seed,
                         "representations": list(self.representations)},
            "checkpoints": {"kind": self.checkpoint_kind, "values": list(self.checkpoint_values)},
            "sweep": {"tau": list(self.sweep_tau)},
            "oracle": dataclasses.asdict(self.oracle),
        }
        return d

    def config_hash(self):
        blob = json.dumps(self.semantic_dict(), sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_text(self):
        """Canonical text form; ``parse_config(cfg.to_text()) == cfg``."""
        p = self.params
        lines = ["[params]"]
        for k in RATE_KEYS:
            lines.append(f"{k} = {getattr(p, k)!r} rad/s")
        for k in COUNT_KEYS:
            lines.append(f"{k} = {getattr(p, k)!r}")
        lines.append(f"tau = {p.tau!r} s")
        e = self.envelope
        lines += ["", "[pulse]", f"kind = {e.kind}", f"center = {e.center!r}", f"width = {e.width!r}"]
        if e.samples:
            lines.append("samples = " + ", ".join(repr(float(x)) for x in e.samples))
        lines += ["", "[integrator]", f"dt = {self.dt!r}", f"scheme = {self.scheme}",
                  f"divergence_threshold = {self.divergence_threshold!r}",
                  f"gain_form = {self.gain_form}", f"wigner_drift = {self.wigner_drift}"]
        rep = "both" if len(self.representations) == 2 else self.representations[0]
        lines += ["", "[ensemble]", f"n_traj = {self.n_traj}", f"n_batches = {self.n_batches}",
                  f"seed = {self.seed}", f"representation = {rep}"]
        vals = ", ".join(repr(v) for v in self.checkpoint_values)
        lines += ["", "[checkpoints]", f"{self.checkpoint_kind} = {vals}"]
        if self.sweep_tau:
            lines += ["", "[sweep]", "tau = " + ", ".join(f"{t!r} s" for t in self.sweep_tau)]
        o = self.oracle
        lines += ["", "[oracle]", f"dim_a = {o.dim_a}", f"dim_b = {o.dim_b}", f"dt_me = {o.dt_me!r}"]
        if o.t_final is not None:
            lines.append(f"t_final = {o.t_final!r}")
        if o.times:
            lines.append("times = " + ", ".join(repr(t) for t in o.times))
        lines += ["", "[output]", f"dir = {self.out_dir}", f"svg = {'true' if self.svg else 'false'}", ""]
        return "\n".join(lines)


# parsing ------------------------------------------------------------------


class _Entry:
    __slots__ = ("value", "line", "col")

    def __init__(self, value, line, col):
        self.value, self.line, self.col = value, line, col


def _tokenize(text):
    sections = {}
    current = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        stripped = line.strip()
        if not stripped:
            continue
        indent = len(line) - len(line.lstrip())
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ParseError("unterminated section header", ln, indent + 1)
            name = stripped[1:-1].strip()
            if name not in SCHEMA:
                raise ParseError(f"unknown section [{name}]", ln, indent + 2)
            if name in sections:
                raise ParseError(f"duplicate section [{name}]", ln, indent + 1)
            current = name
            sections[name] = {}
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", ln, indent + 1)
        if current is None:
            raise ParseError("key outside of any [section]", ln, indent + 1)
        key_part, val_part = line.split("=", 1)
        key = key_part.strip()
        if key not in SCHEMA[current]:
            raise ParseError(f"unknown key {key!r} in [{current}]", ln, indent + 1)
        if key in sections[current]:
            raise ParseError(f"duplicate key {key!r}", ln, indent + 1)
        value = val_part.strip()
        vcol = len(key_part) + 2 + (len(val_part) - len(val_part.lstrip()))
        if not value:
            raise ParseError(f"empty value for {key!r}", ln, vcol)
        sections[current][key] = _Entry(value, ln, vcol)
    return sections


def _quantity(entry, units, *, required_unit=True):
    m = _QTY.match(entry.value)
    if not m:
        raise ParseError(f"malformed quantity {entry.value!r}", entry.line, entry.col)
    num, unit = float(m.group(1)), m.group(2)
    if not unit:
        if required_unit:
            raise ParseError(f"missing unit (one of {', '.join(units)})", entry.line, entry.col)
        return num, None
    if unit not in units:
        raise ParseError(f"unit {unit!r} not allowed here (one of {', '.join(units)})",
                         entry.line, entry.col + len(m.group(1)) + 1)
    return num, unit


def _number(entry, kind=float):
    try:
        if kind is int:
            if not re.fullmatch(r"[+-]?\d+", entry.value):
                raise ValueError
            return int(entry.value)
        return float(entry.value)
    except ValueError:
        raise ParseError(f"expected {'an integer' if kind is int else 'a number'}, "
                         f"got {entry.value!r}", entry.line, entry.col) from None


def _list(entry, conv):
    out = []
    for part in entry.value.split(","):
        part = part.strip()
        if not part:
            raise ParseError("empty list element", entry.line, entry.col)
        out.append(conv(_Entry(part, entry.line, entry.col)))
    return tuple(out)


def _rate(entry, scaled):
    if scaled:
        return _number(entry)
    num, unit = _quantity(entry, {**FREQ_UNITS, **RATE_UNITS})
    if unit in FREQ_UNITS:
        return TWO_PI * (num * FREQ_UNITS[unit])
    return num


def _time(entry, scaled):
    if scaled:
        return _number(entry)
    num, unit = _quantity(entry, TIME_UNITS)
    return num * TIME_UNITS[unit]


def _bool(entry):
    v = entry.value.lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ParseError(f"expected a boolean, got {entry.value!r}", entry.line, entry.col)


def _choice(entry, options):
    if entry.value not in options:
        raise ParseError(f"expected one of {', '.join(options)}, got {entry.value!r}",
                         entry.line, entry.col)
    return entry.value


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration text."""
    sec = _tokenize(text)
    ps = sec.get("params", {})
    scaled = False
    if "units" in ps:
        scaled = _choice(ps["units"], ("si", "scaled")) == "scaled"
    missing = [k for k in (*RATE_KEYS, "N_ph", "tau", "n_b0") if k not in ps]
    if "n_th_b" not in ps and "T_bath_b" not in ps:
        missing.append("n_th_b")
    if missing:
        raise ValidationError("missing required [params] keys: " + ", ".join(missing))
    vals = {k: _rate(ps[k], scaled) for k in RATE_KEYS}
    vals["tau"] = _time(ps["tau"], scaled)
    for k in COUNT_KEYS:
        if k in ps:
            vals[k] = _number(ps[k])
    if "T_bath_b" in ps:
        if "n_th_b" in ps:
            raise ParseError("give either n_th_b or T_bath_b, not both", ps["T_bath_b"].line, 1)
        T, unit = _quantity(ps["T_bath_b"], TEMP_UNITS)
        if not vals["omega_m"] > 0:
            raise ValidationError("omega_m must be > 0 to convert T_bath_b")
        vals["n_th_b"] = thermal_occupation(T * TEMP_UNITS[unit], vals["omega_m"])
    vals.setdefault("n_th_a", 0.0)
    params = PhysicalParams(**vals)

    pl = sec.get("pulse", {})
    env_kw = {}
    if "kind" in pl:
        env_kw["kind"] = _choice(pl["kind"], ("square", "gaussian", "tabulated"))
    for k in ("center", "width"):
        if k in pl:
            env_kw[k] = _number(pl[k])
    if "samples" in pl:
        env_kw["samples"] = _list(pl["samples"], _number)
    envelope = PulseEnvelope(**env_kw)

    kw = {}
    it = sec.get("integrator", {})
    if "dt" in it:
        kw["dt"] = _number(it["dt"])
    if "scheme" in it:
        kw["scheme"] = _choice(it["scheme"], SCHEMES)
    if "divergence_threshold" in it:
        kw["divergence_threshold"] = _number(it["divergence_threshold"])
    if "gain_form" in it:
        kw["gain_form"] = _choice(it["gain_form"], GAIN_FORMS)
    if "wigner_drift" in it:
        kw["wigner_drift"] = _choice(it["wigner_drift"], WIGNER_DRIFTS)

    en = sec.get("ensemble", {})
    for k in ("n_traj", "n_batches", "seed"):
        if k in en:
            kw[k] = _number(en[k], int)
    if "representation" in en:
        kw["representations"] = REP_ALIASES[_choice(en["representation"], tuple(REP_ALIASES))]

    ck = sec.get("checkpoints", {})
    if len(ck) > 1:
        e = list(ck.values())[1]
        raise ParseError("give exactly one of r, t_frac, count", e.line, 1)
    if ck:
        (kind, entry), = ck.items()
        kw["checkpoint_kind"] = kind
        kw["checkpoint_values"] = (_number(entry, int),) if kind == "count" else _list(entry, _number)

    sw = sec.get("sweep", {})
    if "tau" in sw:
        kw["sweep_tau"] = _list(sw["tau"], lambda e: _time(e, scaled))

    orc = sec.get("oracle", {})
    okw = {}
    for k in ("dim_a", "dim_b"):
        if k in orc:
            okw[k] = _number(orc[k], int)
    for k in ("dt_me", "t_final"):
        if k in orc:
            okw[k] = _number(orc[k])
    if "times" in orc:
        okw["times"] = _list(orc["times"], _number)
    kw["oracle"] = OracleSettings(**okw)

    out = sec.get("output", {})
    if "dir" in out:
        kw["out_dir"] = out["dir"].value
    if "svg" in out:
        kw["svg"] = _bool(out["svg"])

    cfg = RunConfig(params=params, envelope=envelope, **kw)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig):
    """Raise :class:`ValidationError` naming the first violated invariant."""
    if not cfg.dt > 0:
        raise ValidationError("integrator dt must be > 0")
    if cfg.n_traj <= 0:
        raise ValidationError("n_traj must be positive")
    if cfg.n_batches < 10:
        raise ValidationError("n_batches must be >= 10")
    if cfg.n_traj % cfg.n_batches:
        raise ValidationError("n_traj must be divisible by n_batches")
    if not 0 <= cfg.seed < 2**64:
        raise ValidationError("seed must fit in an unsigned 64-bit integer")
    if cfg.checkpoint_kind not in ("r", "t_frac", "count"):
        raise ValidationError(f"unknown checkpoint kind {cfg.checkpoint_kind!r}")
    vals = cfg.checkpoint_values
    if cfg.checkpoint_kind == "count" and (len(vals) != 1 or vals[0] < 1):
        raise ValidationError("checkpoint count must be a single integer >= 1")
    if cfg.checkpoint_kind == "t_frac" and any(not 0 <= v <= 1 for v in vals):
        raise ValidationError("t_frac checkpoints must lie in [0, 1]")
    if cfg.checkpoint_kind == "r" and any(v < 0 for v in vals):
        raise ValidationError("r checkpoints must be >= 0")
    if any(t <= 0 for t in cfg.sweep_tau):
        raise ValidationError("sweep durations must be > 0")
    if cfg.oracle.dim_a < 2 or cfg.oracle.dim_b < 2:
        raise ValidationError("oracle Fock dimensions must be >= 2")
    return cfg


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


PRESETS = ("paper", "paper_20K", "oracle", "zero_drive")


def preset_text(name) -> str:
    if name not in PRESETS:
        raise InvalidConfig(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return resources.files("optosim.presets").joinpath(f"{name}.cfg").read_text(encoding="utf-8")


def load_preset(name) -> RunConfig:
    return parse_config(preset_text(name))


def resolve_config(spec) -> RunConfig:
    """A path to a config file, or ``preset:NAME``."""
    spec = str(spec)
    if spec.startswith("preset:"):
        return load_preset(spec.split(":", 1)[1])
    return load_config(spec)
