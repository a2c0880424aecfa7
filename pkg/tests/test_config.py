import json

import pytest

from pbss.config import ConfigError, config_from_dict, load_config
from pbss.weightbank import WeightModel


def test_defaults():
    cfg = load_config(None)
    assert cfg.scenario.n_sources == 2 and cfg.bank.noise_std == 0.03
    assert cfg.pbss.plan.n_s == 2**14 and cfg.sweep.trials == 32


def test_full_document(tmp_path):
    doc = {
        "label": "M2",
        "sources": [{"seed": 1, "carrier_hz": 1.000176e9}, {"seed": 2, "carrier_hz": 0.999824e9}],
        "mixing": [[1.0, 0.5], [1.0, 0.2]],
        "rings": [{"a": 0.5, "b_per_mA2": 0.125}, {"a": 0.5, "b_per_mA2": 0.125}],
        "weight_model": "ideal", "noise_std": 0.0, "noise_seed": 4,
        "pbss": {"n_s": 4096, "f_s_hz": 7.68e6, "iterations": 20},
        "sweep": {"grid": "full", "trials": 4},
    }
    p = tmp_path / "c.json"
    p.write_text(json.dumps(doc))
    cfg = load_config(p, seed=9)
    assert cfg.bank.weight_model is WeightModel.IDEAL and cfg.bank.noise_seed == 9
    assert cfg.pbss.nm.iterations == 20 and cfg.pbss.plan.f_s == 7.68e6
    assert len(cfg.sweep.f_s) == 12 and cfg.sweep.trials == 4 and cfg.sweep.seed == 9


@pytest.mark.parametrize("doc", [
    {"pbss": {"n_s": 1000}},
    {"mixing": [[1, 2], [2, 4]]},
    {"bogus": 1},
    {"pbss": {"nm": 3}},
    {"sweep": {"grid": "huge"}},
    {"sources": [{"seed": 1}]},
    {"rings": [{"a": 2.0}, {}]},
    {"rings": [{}]},
    [],
])
def test_invalid_documents(doc):
    with pytest.raises(ConfigError):
        config_from_dict(doc)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
