import pytest

from levy_nse.config import Config, env_overrides, load, parse_text
from levy_nse.errors import ConfigError

GOOD = """
# comment
[model]
backend = abstract   # trailing comment
N = 8
m = 4

noise.beta = 1.5
noise.sigma = 0.1, 0.2, 0.3, 0.4
time.h = 1e-3
time.T = 10
"""


def test_sections_and_dotted_keys():
    cfg = parse_text(GOOD)
    assert cfg.get_str("model.backend") == "abstract"
    assert cfg.get_int("model.N") == 8
    assert cfg.get_floats("noise.sigma") == [0.1, 0.2, 0.3, 0.4]
    assert cfg.get_float("time.theta") == 0.05  # default
    assert cfg.get_bool("verify.negative_control") is False


@pytest.mark.parametrize("text,line,fragment", [
    ("[model]\nbackend = x\nbogus = 1\n", 3, "unknown key 'model.bogus'"),
    ("[nope]\n", 1, "unknown section"),
    ("model.m = 2\nmodel.m = 3\n", 2, "duplicate key"),
    ("model.m =\n", 1, "empty value"),
    ("just words\n", 1, "expected 'key = value'"),
    ("m = 2\n", 1, "outside a section"),
])
def test_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_text(text, "run.conf")
    assert info.value.line == line
    assert f"run.conf:{line}:" in str(info.value)
    assert fragment in str(info.value)


def test_type_errors_point_at_key():
    cfg = parse_text("model.m = four\n", "c.conf")
    with pytest.raises(ConfigError, match=r"c.conf:1: 'model.m' must be an integer"):
        cfg.get_int("model.m")


def test_missing_required(tmp_path):
    path = tmp_path / "c.conf"
    path.write_text("model.backend = abstract\n")
    with pytest.raises(ConfigError, match="missing required key 'model.m'"):
        load(path, environ={})
    with pytest.raises(ConfigError, match="cannot read"):
        load(tmp_path / "absent.conf")


def test_environment_overrides(tmp_path):
    path = tmp_path / "c.conf"
    path.write_text(GOOD)
    cfg = load(path, environ={"LEVY_NSE_TIME_H": "0.01", "HOME": "/x"})
    assert cfg.get_float("time.h") == 0.01
    assert env_overrides({"LEVY_NSE_MODEL_N": "4"}) == {"model.N": "4"}
    with pytest.raises(ConfigError):
        env_overrides({"LEVY_NSE_TIME_BOGUS": "1"})


def test_digest_stable_and_sensitive():
    a, b = parse_text(GOOD), parse_text(GOOD + "\ntime.theta = 0.05\n")
    assert a.digest(0) == b.digest(0)  # explicit default resolves to the same config
    assert a.digest(0) != a.digest(1)
    assert a.digest(0) != a.with_overrides(**{"time.h": 2e-3}).digest(0)
    assert isinstance(Config({}).digest(), str)
