import pytest

from eigconc.config import ConfigError, parse_config, parse_config_text, parse_distribution


def write(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return path


def test_valid_preset(tmp_path):
    cfg = parse_config(write(tmp_path, "preset = bernoulli\np = 0.5\nn = 100\ntrials = 10\n"))
    assert cfg.trials == 10 and cfg.spec.n == 100 and cfg.spec.p == 0.5
    assert cfg.spec.name == "bernoulli"


def test_p_out_of_range(tmp_path):
    with pytest.raises(ConfigError, match=r"p out of range \[0,1\]"):
        parse_config(write(tmp_path, "preset = bernoulli\np = 1.5\nn = 100\n"))


def test_mutually_exclusive(tmp_path):
    text = "preset = bernoulli\np = 0.5\nn = 10\noffdiag = 1:0.5,-1:0.5\n"
    with pytest.raises(ConfigError, match="mutually exclusive keys"):
        parse_config(write(tmp_path, text))


def test_all_violations_reported():
    with pytest.raises(ConfigError) as info:
        parse_config_text("n = 1\ntrials = 0\nbogus = 3\npreset = nope\nlemma_checks = maybe\n")
    v = info.value.violations
    assert len(v) >= 5
    assert any("bogus" in x for x in v) and any("trials" in x for x in v)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "absent.cfg")


def test_flag_seed_wins(tmp_path):
    path = write(tmp_path, "preset = rademacher\nn = 8\nseed = 5\n")
    assert parse_config(path).spec.master_seed == 5
    assert parse_config(path, {"seed": 99}).spec.master_seed == 99
    assert parse_config(path, {"seed": None}).spec.master_seed == 5


def test_explicit_distributions_and_roundtrip():
    cfg = parse_config_text(
        "n = 6\noffdiag = uniform:-0.5,0.5\ndiag = 1:0.25,0:0.75\nseed = 3\n"
        "statistics = lambda1,mu2\nt_grid = 0,1,2\nlemma_checks = true\nmethod = ql\n")
    assert cfg.spec.diag.mean == 0.25
    assert cfg.statistics == ("lambda1", "mu2") and cfg.t_grid == (0.0, 1.0, 2.0)
    assert cfg.lemma_checks and cfg.method == "ql"
    assert parse_config_text(cfg.to_text()) == cfg


def test_distribution_parsing():
    d = parse_distribution("1:0.5, -1:0.5")
    assert d.atoms == ((1.0, 0.5), (-1.0, 0.5))
    with pytest.raises(ValueError):
        parse_distribution("1;0.5")


def test_bad_distribution_reported():
    with pytest.raises(ConfigError, match="offdiag"):
        parse_config_text("n = 4\noffdiag = 2:1\n")


def test_comments_and_duplicates():
    cfg = parse_config_text("# header\n\npreset = rademacher  # inline\nn = 4\n")
    assert cfg.spec.n == 4
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("preset = rademacher\nn = 4\nn = 5\n")
