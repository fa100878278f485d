import pytest

from noetherquant.cases import CaseError, builtin_cases, load_case, parse_case

MINIMAL = """
[case]
name = tiny

[params]
k = 3/2

[ode]
rhs = -k*x
"""


def test_builtin_list():
    assert builtin_cases() == ["free-particle", "harmonic-oscillator", "inverted", "lienard", "vonroos"]
    for name in builtin_cases():
        assert load_case(name).name == name


def test_minimal_case_and_path_loading(tmp_path):
    cfg = parse_case(MINIMAL)
    assert cfg.params["k"] == pytest.approx(1.5)
    assert cfg.number("params", "missing", default=2.0) == 2.0
    path = tmp_path / "tiny.ini"
    path.write_text(MINIMAL)
    assert load_case(str(path)).name == "tiny"


@pytest.mark.parametrize("text,fragment", [
    (MINIMAL + "\n[extras]\na = 1\n", "unknown section"),
    (MINIMAL.replace("rhs =", "rhz ="), "unknown key"),
    (MINIMAL.replace("3/2", "three"), "expected a number"),
    (MINIMAL.replace("name = tiny", "summary = none"), "name is required"),
    (MINIMAL.replace("-k*x", "-k*(x"), "[ode] rhs"),
    (MINIMAL + "\n[generators]\ng1.xi = 1\n", "needs both xi and eta"),
    (MINIMAL + "\n[domain]\nx = 1, 0\n", "empty interval"),
])
def test_malformed_cases(text, fragment):
    with pytest.raises(CaseError, match=fragment.replace("[", r"\[").replace("]", r"\]")):
        parse_case(text)


def test_unknown_case_name():
    with pytest.raises(CaseError, match="built-in cases"):
        load_case("no-such-case")


def test_missing_key_is_named():
    cfg = parse_case(MINIMAL)
    with pytest.raises(CaseError, match=r"\[quantum\] map"):
        cfg.expr("quantum", "map")
