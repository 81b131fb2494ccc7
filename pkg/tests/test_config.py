import json

import pytest

from colmatch.config import config_from_dict, interpolate_secret, load_config, settings_hash
from colmatch.errors import ConfigError
from colmatch.evaluation import NaPolicy


def test_defaults(tmp_path):
    cfg = config_from_dict({"providers": {"mock": True}}, tmp_path)
    assert cfg.ks == (1, 3, 5)
    assert cfg.enrichment.num_names == 3
    assert cfg.retrieval.cosine_threshold == 0.5
    assert cfg.retrieval.bm25_threshold == 1.0
    assert cfg.paths.artifact_dir == tmp_path / "artifacts"
    assert cfg.na_policy is NaPolicy.EXCLUDE


def test_relative_paths_resolve_against_config_dir(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"paths": {"source_schema": "s.json", "cache_dir": "/abs/cache"}, "providers": {"mock": True}}))
    cfg = load_config(path)
    assert cfg.paths.source_schema == tmp_path.resolve() / "s.json"
    assert str(cfg.paths.cache_dir) == "/abs/cache"


@pytest.mark.parametrize(
    "data,match",
    [
        ({"bogus": 1}, "unknown top-level"),
        ({"retrieval": {"topk": 3}}, "unknown key"),
        ({"enrichment": {"num_names": 9}}, "num_names"),
        ({"retrieval": {"use_vector": False, "use_lexical": False}}, "channel"),
        ({"ks": [0]}, "positive"),
        ({"na_policy": "maybe"}, "maybe"),
        ({"providers": {"mock": True, "parallelism": 0}}, "parallelism"),
    ],
)
def test_invalid_configs(tmp_path, data, match):
    data = {"providers": {"mock": True}, **data}
    with pytest.raises(ConfigError, match=match):
        config_from_dict(data, tmp_path)


def test_http_provider_needs_credential_variable(tmp_path):
    data = {"providers": {"api_key": "${COLMATCH_TEST_KEY}"}}
    with pytest.raises(ConfigError, match="COLMATCH_TEST_KEY"):
        config_from_dict(data, tmp_path, environ={})
    cfg = config_from_dict(data, tmp_path, environ={"COLMATCH_TEST_KEY": "sk-123"})
    assert cfg.providers.api_key == "sk-123"


def test_literal_secret_rejected():
    with pytest.raises(ConfigError, match="environment variable"):
        interpolate_secret("sk-literal", {})


def test_secret_never_in_public_settings(tmp_path):
    cfg = config_from_dict({"providers": {"api_key": "${K}"}}, tmp_path, environ={"K": "sk-secret"})
    assert "sk-secret" not in json.dumps(cfg.run_settings())


def test_mock_flag_overrides_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"providers": {"api_key": "${UNSET_VAR}"}}))
    assert load_config(path, environ={}, mock=True).providers.mock


def test_bad_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{\n  nope")
    with pytest.raises(ConfigError, match=r"cfg\.json:2:"):
        load_config(path)


def test_settings_hash_tracks_flags(tmp_path):
    base = config_from_dict({"providers": {"mock": True}}, tmp_path)
    off = config_from_dict({"providers": {"mock": True}, "ablation": {"table_selection": False}}, tmp_path)
    assert settings_hash(base.run_settings()) != settings_hash(off.run_settings())
    # table selection is query-time only, so the index is shared
    assert settings_hash(base.index_settings()) == settings_hash(off.index_settings())
    doc_off = base.with_overrides(ablation=base.ablation.without("document_enrichment"))
    assert settings_hash(base.index_settings()) != settings_hash(doc_off.index_settings())
