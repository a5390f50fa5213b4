import pytest

from gnndsim.config import (
    ConfigError,
    ExperimentConfig,
    apply_paper_scale,
    config_echo,
    parse_config,
    pilot_power_value,
)

GOOD = """
# a comment
kind = gmi-sweep
seed = 7
users = 4
antennas = 2
snr_db = 0, 5, 10
methods = gnnd, cl, mi
receiver = sic
draws = 3
samples = 1000
out = result.csv
"""


def test_parse_good_config():
    cfg = parse_config(GOOD)
    assert cfg.kind == "gmi-sweep"
    assert cfg.snr_db == (0.0, 5.0, 10.0)
    assert cfg.methods == ("gnnd", "cl", "mi")
    assert cfg.receiver == "sic"
    assert cfg.users == 4 and cfg.antennas == 2
    assert cfg.out == "result.csv"


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError, match="line 3: unknown key 'bogus'"):
        parse_config("kind = gmi-sweep\nseed = 1\nbogus = 2\n")


def test_duplicate_key_reports_line():
    with pytest.raises(ConfigError, match="line 3: duplicate"):
        parse_config("kind = gmi-sweep\nseed = 1\nseed = 2\n")


def test_bad_value_reports_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("kind = gmi-sweep\nseed = banana\n")


def test_missing_seed_rejected():
    with pytest.raises(ConfigError, match="seed"):
        parse_config("kind = gmi-sweep\n")


def test_missing_kind_rejected():
    with pytest.raises(ConfigError, match="kind"):
        parse_config("seed = 3\n")


def test_empty_methods_rejected():
    with pytest.raises(ConfigError, match="method"):
        parse_config("kind = gmi-sweep\nseed = 1\nmethods =\n")


def test_empty_snr_grid_rejected():
    with pytest.raises(ConfigError, match="snr"):
        parse_config("kind = gmi-sweep\nseed = 1\nsnr_db =\n")


def test_nonpositive_counts_rejected():
    with pytest.raises(ConfigError, match="users"):
        ExperimentConfig(kind="gmi-sweep", seed=1, users=0)


def test_pilot_power_forms():
    base = dict(kind="ldpc-ber", seed=1, users=2, antennas=2, power=2.0,
                methods=("gnnd",))
    assert pilot_power_value(ExperimentConfig(**base, pilot_power="perfect")) == "perfect"
    assert pilot_power_value(ExperimentConfig(**base, pilot_power="16P")) == 32.0
    assert pilot_power_value(ExperimentConfig(**base, pilot_power="4p")) == 8.0
    assert pilot_power_value(ExperimentConfig(**base, pilot_power="0.5")) == 0.5
    with pytest.raises(ConfigError):
        ExperimentConfig(**base, pilot_power="junk")
    with pytest.raises(ConfigError):
        ExperimentConfig(**base, pilot_power="-3P")


def test_user_order():
    cfg = ExperimentConfig(kind="viterbi-ber", seed=1, users=3, antennas=3,
                           sic_order="2,0,1")
    assert cfg.user_order() == [2, 0, 1]
    assert ExperimentConfig(kind="viterbi-ber", seed=1, users=3,
                            antennas=3).user_order() == [0, 1, 2]
    bad = ExperimentConfig(kind="viterbi-ber", seed=1, users=3, antennas=3,
                           sic_order="0,0,1")
    with pytest.raises(ConfigError):
        bad.user_order()


def test_paper_scale_overrides():
    cfg = ExperimentConfig(kind="ldpc-ber", seed=1, users=2, antennas=2,
                           methods=("gnnd",))
    big = apply_paper_scale(cfg)
    assert big.net_samples == 400_000
    assert big.net_epochs == 100
    assert big.net_batch == 2000
    assert big.draws == 50
    assert big.seed == cfg.seed


def test_echo_is_stable_and_complete():
    cfg = parse_config(GOOD)
    echo = config_echo(cfg)
    assert any(line == "seed = 7" for line in echo)
    assert any(line.startswith("snr_db = 0.0,5.0,10.0") for line in echo)
    assert echo == sorted(echo)


def test_bool_parsing():
    cfg = parse_config("kind = ldpc-ber\nseed = 1\nnet = on\nmethods = gnnd\n")
    assert cfg.net is True
    with pytest.raises(ConfigError, match="line 3"):
        parse_config("kind = ldpc-ber\nseed = 1\nnet = maybe\n")
