from __future__ import annotations

import math

import pytest

from volterra_lab.config import RunConfig, load, load_scenario, parse, resolve_seed, scenario_ids, serialize
from volterra_lab.errors import ConfigError

BASIC = """
# comment line
kernel.density = exp(-s)
nonlinearity.family = power
nonlinearity.beta = 0.5      # trailing comment
forcing.kind = builtin
forcing.name = log1p
grid.T = 50
grid.dt = 0.1
analysis.envelope = "(1 + t)**2  # not a comment"
"""


def test_parse_basic_and_defaults():
    cfg = parse(BASIC)
    assert cfg.kernel.density == "exp(-s)"
    assert cfg.nonlinearity.beta == 0.5
    assert cfg.forcing.name == "log1p"
    assert cfg.grid.T == 50.0
    assert cfg.analysis.envelope == "(1 + t)**2  # not a comment"
    assert cfg.noise.kind == "none" and not cfg.stochastic
    assert cfg.run.psi == 1.0
    assert cfg.l_horizon == 1e6
    assert math.isinf(cfg.kernel.cutoff)


def test_serialize_parses_back_to_the_same_config():
    cfg = parse(BASIC + "run.psi = auto\nnoise.kind = brownian\nnoise.sigma = t**2\nkernel.atoms = [[0, 0.5]]\n")
    assert parse(serialize(cfg)) == cfg
    assert parse(serialize(RunConfig())) == RunConfig()


@pytest.mark.parametrize(
    "line,fragment",
    [
        ("grid.Tmax = 3", "unknown key"),
        ("nonsense", "expected 'section.key = value'"),
        ("grid.T = abc", "expected a number"),
        ("noise.seed = true", "expected an integer"),
        ("noise.kind = levy", "expected one of"),
        ("kernel.atoms = [[0, 1, 2]]", "kernel.atoms"),
        ("ensemble.merged_checks = [1]", "list of names"),
    ],
)
def test_parse_errors_name_the_line(line, fragment):
    with pytest.raises(ConfigError) as exc:
        parse(f"grid.dt = 0.1\n{line}\n", source="bad.cfg")
    assert "bad.cfg:2" in str(exc.value)
    assert fragment in str(exc.value)


def test_duplicate_key():
    with pytest.raises(ConfigError, match="duplicate"):
        parse("grid.T = 1\ngrid.T = 2\n")


@pytest.mark.parametrize(
    "text",
    [
        "grid.T = 1\ngrid.dt = 2",
        "grid.T = -5",
        "convergence.levels = 2",
        "ensemble.required_fraction = 0",
        "run.snapshots = 1",
        "forcing.kind = builtin",
        "forcing.kind = custom-expr",
        "nonlinearity.family = custom\nnonlinearity.f = x",
        "noise.paths = 0",
    ],
)
def test_semantic_checks(text):
    with pytest.raises(ConfigError):
        parse(text)


def test_config_error_is_a_value_error():
    with pytest.raises(ValueError):
        parse("grid.T = -1")


def test_seed_precedence():
    cfg = parse("noise.seed = 5")
    assert resolve_seed(cfg, None, {}).noise.seed == 5
    assert resolve_seed(cfg, None, {"VOLTERRA_SEED": "0x10"}).noise.seed == 16
    assert resolve_seed(cfg, 99, {"VOLTERRA_SEED": "7"}).noise.seed == 99
    with pytest.raises(ConfigError):
        resolve_seed(cfg, None, {"VOLTERRA_SEED": "seven"})
    with pytest.raises(ConfigError):
        resolve_seed(cfg, None, {"VOLTERRA_SEED": "-1"})


def test_load_reads_files(tmp_path, config_file):
    path = config_file(BASIC)
    assert load(path) == parse(BASIC)
    with pytest.raises(ConfigError, match="cannot read"):
        load(str(tmp_path / "missing.cfg"))


def test_bundled_scenarios_parse():
    ids = scenario_ids()
    assert set(ids) == {"golden", "L1", "Lgt1", "Linf", "gamma_plus", "sigma_const", "stoch1", "stoch2"}
    for example in ids:
        cfg = load_scenario(example)
        assert cfg.stochastic == (example in {"sigma_const", "stoch1", "stoch2"})
    with pytest.raises(ConfigError, match="unknown example"):
        load_scenario("nope")
