import json

import numpy as np
import pytest

from tclif.config import (ConfigError, TrainConfig, apply_overrides,
                          build_network, config_from_dict, default_config,
                          desk_shd_config, desk_smnist_config, load_config)
from tclif.neurons import Kind


def test_round_trip_through_json():
    cfg = default_config("psmnist", recurrent=True)
    back = config_from_dict(json.loads(cfg.to_json()))
    assert back == cfg


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"datset": "smnist"})
    cfg = TrainConfig()
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["not_a_key=1"])
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["epochs"])


def test_overrides_coerce_types():
    cfg = apply_overrides(TrainConfig(), [
        "epochs=3", "lr0=0.5", "recurrent=true", "arch=12-7-5",
        "neuron=lif", "trainer=bptt"])
    assert cfg.epochs == 3 and cfg.lr0 == 0.5 and cfg.recurrent is True
    assert cfg.arch == [12, 7, 5]
    assert cfg.neuron == "lif" and cfg.trainer == "bptt"
    with pytest.raises(ConfigError):
        apply_overrides(TrainConfig(), ["recurrent=perhaps"])


def test_validation_catches_bad_values():
    for overrides in (["dataset=imagenet"], ["lr0=0"], ["frame_size=0"],
                      ["readout_kappa=1.0"], ["a_d=0"], ["batch_size=0"],
                      ["schedule=linear"], ["step_factor=1.0"]):
        with pytest.raises(ConfigError):
            apply_overrides(TrainConfig(), overrides)


def test_load_config_file(tmp_path):
    path = str(tmp_path / "cfg.json")
    open(path, "w").write(default_config("shd").to_json())
    cfg = load_config(path)
    assert cfg.dataset == "shd" and cfg.arch == [700, 128, 128, 20]


def test_default_configs_follow_published_table():
    sm = default_config("smnist")
    assert (sm.optimizer, sm.lr0, sm.schedule) == ("sgd", 0.08, "cosine")
    assert (sm.a_d, sm.a_s) == (0.7, 0.8)
    smr = default_config("smnist", recurrent=True)
    assert (smr.a_d, smr.a_s) == (0.8, 0.9)
    ps = default_config("psmnist", recurrent=True)
    assert (ps.v_th, ps.gamma, ps.a_d, ps.a_s) == (1.8, 1.0, 0.75, 0.85)
    shd = default_config("shd")
    assert (shd.v_th, shd.a_d, shd.a_s) == (1.6, 0.65, 0.75)
    assert (shd.optimizer, shd.lr0) == ("adam", 5e-5)
    assert (shd.step_every, shd.step_factor) == (15, 0.8)


def test_build_network_shapes_and_kind():
    cfg = default_config("smnist", recurrent=True)
    net = build_network(cfg, np.random.default_rng(0))
    assert [p.n_pre for p in net.layers] == [64, 256]
    assert [p.n_post for p in net.layers] == [256, 256]
    assert net.w_out.shape == (10, 256)
    assert all(p.kind.tag is Kind.TCLIF_ADAPTIVE for p in net.layers)
    assert all(p.w_rec is not None for p in net.layers)
    for p in net.layers:
        np.testing.assert_array_equal(np.diag(p.w_rec), 0.0)
    assert all(p.beta_fixed == (-0.5, 1.0) for p in net.layers)


def test_train_couplings_unpins_betas():
    cfg = apply_overrides(TrainConfig(), ["train_couplings=true",
                                          "trainer=bptt"])
    net = build_network(cfg, np.random.default_rng(0))
    assert net.layers[0].beta_fixed is None
    b1, b2 = net.layers[0].betas()
    assert -1.0 < b1 < 0.0 and 0.0 < b2 < 1.0


def test_desk_configs_validate():
    desk_smnist_config("lif").validate()
    desk_shd_config("tclif_modified", seed=2).validate()
