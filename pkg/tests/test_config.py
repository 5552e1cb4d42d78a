import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scobul.config import (
    ConfigError,
    ExperimentConfig,
    config_hash,
    dump_config,
    from_dict,
    get_value,
    load_config,
    per_cluster,
    substream,
    to_dict,
)
from scobul.core import RenormMode

CONFIGS = ["cluster_scobul.ini", "cluster_stdp.ini", "dvs_desk.ini"]


@pytest.fixture
def configs_dir(request):
    return request.config.rootpath / "configs"


@pytest.mark.parametrize("name", CONFIGS)
def test_shipped_configs_load_and_roundtrip(configs_dir, tmp_path, name):
    cfg = load_config(configs_dir / name)
    dump_config(cfg, tmp_path / "x.ini")
    back = load_config(tmp_path / "x.ini")
    assert to_dict(back) == to_dict(cfg)
    assert config_hash(back) == config_hash(cfg)


def write(tmp_path, text):
    p = tmp_path / "c.ini"
    p.write_text(text)
    return p


def test_missing_required_key_is_named(tmp_path):
    with pytest.raises(ConfigError) as err:
        load_config(write(tmp_path, "[signal]\nkind = dvs\n"))
    assert err.value.key == "signal.duration"


def test_unknown_key_and_section(tmp_path):
    base = "[signal]\nkind = dvs\nduration = 10\n"
    with pytest.raises(ConfigError, match="neuron.tau"):
        load_config(write(tmp_path, base + "[neuron]\ntau = 3\n"))
    with pytest.raises(ConfigError, match="bogus"):
        load_config(write(tmp_path, base + "[bogus]\nx = 1\n"))


def test_bad_value_names_key(tmp_path):
    with pytest.raises(ConfigError, match="plasticity.d"):
        load_config(write(tmp_path, "[signal]\nkind = dvs\nduration = 10\n[plasticity]\nd = -1\n"))


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/c.ini")


def test_search_parsing(tmp_path):
    cfg = load_config(write(tmp_path, "[signal]\nkind = dvs\nduration = 10\n"
                                      "[search.scobul]\nneuron.tau_m = 2, 50\nplasticity.d = 1e-5, 0.3, log\n"))
    assert cfg.search["scobul"] == [("neuron.tau_m", 2.0, 50.0, "linear"), ("plasticity.d", 1e-5, 0.3, "log")]
    with pytest.raises(ConfigError, match="scale"):
        load_config(write(tmp_path, "[search.stdp]\nstdp.A_plus = 1, 2, cubic\n"), require=())


def test_replace_and_coercion():
    cfg = ExperimentConfig()
    new = cfg.replace(**{"neuron.refractory": 2.6, "plasticity.renorm_mode": "periodic", "seed": "7"})
    assert new.neuron.refractory == 3 and new.seed == 7
    assert new.plasticity.renorm_mode is RenormMode.PERIODIC
    assert cfg.neuron.refractory != 3  # original untouched
    assert get_value(new, "neuron.refractory") == 3


def test_dict_roundtrip():
    cfg = ExperimentConfig().replace(**{"ga.population": 6})
    cfg.search = {"stdp": [("stdp.A_plus", 0.001, 0.1, "log")]}
    assert to_dict(from_dict(to_dict(cfg))) == to_dict(cfg)


def test_per_cluster():
    assert per_cluster("0.1", 3) == [0.1] * 3
    assert per_cluster("1,2,3", 3, int) == [1, 2, 3]
    with pytest.raises(ConfigError):
        per_cluster("1,2", 3)


class TestSubstream:
    def test_reproducible(self):
        assert substream(5, "signal").random() == substream(5, "signal").random()

    @given(st.integers(0, 2**32), st.text(min_size=1, max_size=8), st.text(min_size=1, max_size=8))
    def test_names_separate_streams(self, root, a, b):
        if a != b:
            assert not np.array_equal(substream(root, a).integers(0, 2**62, 4), substream(root, b).integers(0, 2**62, 4))

    def test_roots_separate_streams(self):
        assert substream(0, "ga").random() != substream(1, "ga").random()
