import pytest

from hcreid.config import ConfigError, RunConfig, load_config, parse_ini


def test_round_trip(tmp_path):
    cfg = RunConfig().set("hc", "lambda", "0.1").set("train", "T", "4").set("eval", "exclusion_pairs", "3:2,6:5")
    cfg.save(tmp_path / "c.ini")
    back = load_config(tmp_path / "c.ini")
    assert back == cfg
    assert back.hc.lam == 0.1 and back.train.T == 4
    assert back.eval.exclusion_pairs == ((3, 2), (6, 5))


def test_defaults_match_the_benchmark():
    cfg = RunConfig()
    assert cfg.data.n_identities == 32 and cfg.data.seed == 42
    assert cfg.split.train_fraction == 0.75
    assert (cfg.model.p, cfg.train.L, cfg.train.T, cfg.hc.lam, cfg.train.momentum) == (6, 4, 8, 0.5, 0.9)


def test_with_seed_reaches_every_stage():
    cfg = RunConfig().with_seed(7)
    assert (cfg.data.seed, cfg.split.seed, cfg.train.seed, cfg.eval.seed) == (7, 7, 7, 7)


def test_partial_file_keeps_defaults():
    cfg = parse_ini("[hc]\nmetric = cosine\n[data]\nstripe_structure = off\n")
    assert cfg.hc.metric == "cosine" and cfg.data.stripe_structure is False
    assert cfg.model == RunConfig().model and cfg.train.epochs == RunConfig().train.epochs


@pytest.mark.parametrize(
    "text",
    [
        "[nope]\nx = 1\n",
        "[train]\nbogus = 1\n",
        "[train]\nepochs = many\n",
        "[hc]\nmetric = manhattan\n",
        "[data]\nstripe_structure = maybe\n",
        "not an ini file",
    ],
)
def test_errors(text):
    with pytest.raises(ConfigError):
        parse_ini(text)
