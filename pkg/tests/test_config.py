import textwrap
from importlib.resources import files

import numpy as np
import pytest

from ifs_lab.config import ConfigError, load_config
from ifs_lab.ifs_core import AffineList, Analytic1D, PolyAffineBox

FIXTURES = files("ifs_lab") / "fixtures"

BASE = """\
seed: 3
system:
  kind: affine_list
  maps:
    - {A: [0.5], b: [0.0]}
    - {A: [0.5], b: [0.5]}
domain: {lo: [0.0], hi: [1.0]}
"""


def _write(tmp_path, text, name="c.yaml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return p


@pytest.mark.parametrize("name", ["cantor", "sierpinski", "halving", "edalat", "blend", "identity"])
def test_fixtures_load(name):
    cfg = load_config(FIXTURES / f"{name}.yaml")
    assert cfg.family is not None
    assert cfg.family.name == name
    assert len(cfg.sha256) == 64


def test_defaults_and_given_flags(tmp_path):
    cfg = load_config(_write(tmp_path, BASE))
    assert cfg.seed == 3 and cfg.threads == 1
    assert cfg.section("attractor")["tol"] == 1e-3
    assert not cfg.section("attractor")["_given"]
    assert cfg.section("system")["_given"]
    assert isinstance(cfg.family, AffineList)
    assert cfg.measure.probs.tolist() == [0.5, 0.5]


def test_unknown_key_names_field_and_line(tmp_path):
    p = _write(tmp_path, BASE + "attractor:\n  tol: 1.0e-3\n  tolerance: 2\n")
    with pytest.raises(ConfigError) as info:
        load_config(p)
    msg = str(info.value)
    assert f"{p}:10:" in msg and "attractor.tolerance" in msg and "unknown key" in msg


def test_unknown_section(tmp_path):
    p = _write(tmp_path, BASE + "atractor:\n  tol: 1.0e-3\n")
    with pytest.raises(ConfigError, match=r":8: atractor: unknown section"):
        load_config(p)


def test_negative_tol_rejected(tmp_path):
    p = _write(tmp_path, BASE + "measure:\n  tol: -1.0e-3\n")
    with pytest.raises(ConfigError, match=r":9: measure.tol: must be positive"):
        load_config(p)


@pytest.mark.parametrize("snippet,field", [
    ("attractor:\n  n_max: 2.5\n", "attractor.n_max"),
    ("attractor:\n  seed_check: yes please\n", "attractor.seed_check"),
    ("chaos:\n  eps: .nan\n", "chaos.eps"),
    ("seed: -1\n", "seed"),
    ("threads: 0\n", "threads"),
])
def test_bad_values(tmp_path, snippet, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        load_config(_write(tmp_path, BASE.replace("seed: 3\n", "") + snippet))


def test_yaml_syntax_error_reports_line(tmp_path):
    p = _write(tmp_path, BASE + "attractor:\n  tol: [1\n  n_max: 3\n")
    with pytest.raises(ConfigError, match=r"c\.yaml:1[01]: YAML syntax error"):
        load_config(p)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.yaml")


@pytest.mark.parametrize("probs,msg", [
    ("[0.5, 0.6]", "sum to"),
    ("[1.5, -0.5]", "nonnegative"),
    ("[1.0]", "expected 2 numbers"),
])
def test_bad_probs(tmp_path, probs, msg):
    p = _write(tmp_path, BASE + f"parameters:\n  probs: {probs}\n")
    with pytest.raises(ConfigError, match=msg) as info:
        load_config(p)
    assert "parameters.probs" in str(info.value)


def test_invariance_failure_is_config_error(tmp_path):
    # x -> 0.5 x + 0.75 leaves [0, 1]
    p = _write(tmp_path, BASE.replace("b: [0.5]", "b: [0.75]"))
    with pytest.raises(ConfigError, match="invariance"):
        load_config(p)


def test_map_shape_mismatch(tmp_path):
    p = _write(tmp_path, BASE.replace("A: [0.5], b: [0.0]", "A: [0.5, 0.0], b: [0.0]"))
    with pytest.raises(ConfigError, match=r"system\.maps\.0\.A: expected 1 numbers"):
        load_config(p)


def test_missing_domain(tmp_path):
    p = _write(tmp_path, BASE.replace("domain: {lo: [0.0], hi: [1.0]}\n", ""))
    with pytest.raises(ConfigError, match="domain: missing section"):
        load_config(p)


def test_other_system_kinds():
    blend = load_config(FIXTURES / "blend.yaml")
    assert isinstance(blend.family, PolyAffineBox)
    edalat = load_config(FIXTURES / "edalat.yaml")
    assert isinstance(edalat.family, Analytic1D)
    np.testing.assert_array_equal(edalat.domain.hi, [1.0])


def test_relative_paths_resolve_next_to_config(tmp_path):
    cfg = load_config(_write(tmp_path, BASE))
    assert cfg.resolve("k.csv") == tmp_path / "k.csv"
