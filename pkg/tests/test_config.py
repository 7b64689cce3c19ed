import math

import pytest

from optosim import config
from optosim.errors import InvalidConfig, ParseError, ValidationError
from optosim.model import paper_preset

MINIMAL = """\
[params]
omega_m = 3.7 GHz
gamma_a = 0.26 GHz
gamma_b = 37 kHz
chi0 = 910 kHz
Delta = -3.7 GHz
n_b0 = 0.7
n_th_b = 0.7
N_ph = 8.2e6
tau = 0.04 us
"""


def test_paper_preset_matches_model(paper):
    cfg = config.load_preset("paper")
    assert cfg.params == paper
    assert cfg.representations == ("positive_p", "wigner")
    assert cfg.checkpoint_kind == "r" and cfg.checkpoint_values[-1] == 0.6
    assert (cfg.n_traj, cfg.n_batches, cfg.dt) == (80000, 20, 0.01)


def test_20K_preset():
    cfg = config.load_preset("paper_20K")
    assert cfg.params.n_th_b == pytest.approx(112, abs=0.5)
    assert cfg.params.replace(n_th_b=0.7) == paper_preset()


@pytest.mark.parametrize("name", config.PRESETS)
def test_presets_round_trip(name):
    cfg = config.load_preset(name)
    again = config.parse_config(cfg.to_text())
    assert again == cfg and again.config_hash() == cfg.config_hash()


def test_unknown_preset():
    with pytest.raises(InvalidConfig):
        config.resolve_config("preset:nope")


def test_empty_input():
    with pytest.raises(ValidationError):
        config.parse_config("")


def test_minimal_defaults():
    cfg = config.parse_config(MINIMAL)
    assert cfg.params == paper_preset()
    assert cfg.params.n_th_a == 0.0 and cfg.dt == 0.01


@pytest.mark.parametrize("line,msg", [("gamma_a = -0.26 GHz", "gamma_a"), ("tau = 0 us", "tau")])
def test_invalid_values(line, msg):
    key = line.split()[0]
    text = "\n".join(line if ln.startswith(key + " ") else ln for ln in MINIMAL.splitlines())
    with pytest.raises(ValidationError, match=msg):
        config.parse_config(text)


def test_parse_error_location():
    text = MINIMAL + "\n[ensemble]\nn_traj = 100\n  bogus_key = 3\n"
    with pytest.raises(ParseError) as exc:
        config.parse_config(text)
    assert exc.value.line == 14 and exc.value.column == 3
    assert "line 14" in str(exc.value)


@pytest.mark.parametrize("extra,line", [
    ("[nosuch]\n", 11),
    ("[ensemble]\nseed = 1\nseed = 2\n", 13),
    ("[ensemble]\nthis line has no equals\n", 12),
    ("[ensemble]\nseed =\n", 12),
])
def test_parse_errors(extra, line):
    with pytest.raises(ParseError) as exc:
        config.parse_config(MINIMAL + extra)
    assert exc.value.line == line


def test_bad_units():
    with pytest.raises(InvalidConfig):
        config.parse_config(MINIMAL.replace("0.26 GHz", "0.26 furlongs"))
    with pytest.raises(InvalidConfig):
        config.parse_config(MINIMAL.replace("0.26 GHz", "0.26"))


def test_temperature_conversion():
    text = MINIMAL.replace("n_th_b = 0.7", "T_bath_b = 20 K")
    assert config.parse_config(text).params.n_th_b == pytest.approx(112.13, abs=0.01)
    with pytest.raises(InvalidConfig):
        config.parse_config(MINIMAL + "T_bath_b = 20 K\n")


def test_hash_is_unit_invariant():
    a = config.parse_config(MINIMAL)
    b = config.parse_config(MINIMAL.replace("omega_m = 3.7 GHz", "omega_m = 3700 MHz"))
    assert math.isclose(a.params.omega_m, b.params.omega_m, rel_tol=1e-15)
    assert a.config_hash() == b.config_hash()


def test_hash_ignores_output_but_not_physics():
    a = config.parse_config(MINIMAL)
    assert a.replace(out_dir="elsewhere", svg=False).config_hash() == a.config_hash()
    assert a.replace(seed=a.seed + 1).config_hash() != a.config_hash()


def test_checkpoint_sections():
    with pytest.raises(ParseError):
        config.parse_config(MINIMAL + "[checkpoints]\nr = 0, 0.1\ncount = 3\n")
    with pytest.raises(ValidationError):
        config.parse_config(MINIMAL + "[checkpoints]\nt_frac = 0, 1.5\n")
    cfg = config.parse_config(MINIMAL + "[checkpoints]\ncount = 4\n")
    assert cfg.checkpoint_kind == "count" and cfg.checkpoint_values == (4,)


def test_ensemble_validation():
    with pytest.raises(ValidationError):
        config.parse_config(MINIMAL + "[ensemble]\nn_traj = 105\nn_batches = 10\n")
    with pytest.raises(ValidationError):
        config.parse_config(MINIMAL + "[ensemble]\nn_batches = 5\nn_traj = 100\n")
    cfg = config.parse_config(MINIMAL + "[ensemble]\nrepresentation = pp\n")
    assert cfg.representations == ("positive_p",)


def test_scaled_units():
    cfg = config.load_preset("oracle")
    p = cfg.params.scaled()
    assert p.gamma_a == 1.0 and p.omega_m == pytest.approx(6.0) and p.tau == pytest.approx(3.0)
    assert math.sqrt(2 * p.N_ph / p.tau) == pytest.approx(5.0)


def test_load_from_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(MINIMAL, encoding="utf-8")
    assert config.resolve_config(str(path)) == config.parse_config(MINIMAL)
