import pytest
import yaml

from hcsum.config import ConfigError, load_config
from hcsum.tokenizers import TokenizerKind


class TestLoadConfig:
    def test_defaults_without_file(self):
        config = load_config(None)
        assert config.thresholds.bhc_min == 50
        assert config.thresholds.input_min == 500
        assert config.split.fractions == (0.85, 0.10, 0.05)
        assert config.tokenizer.kind is TokenizerKind.WHITESPACE_APPROX
        assert config.subgroup_boundary == 2048
        assert config.generation.temperature == 0.1

    def test_file_values_override_defaults(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text(
            yaml.safe_dump(
                {
                    "corpus": "notes.csv",
                    "thresholds": {"bhc_min": 10, "input_min": 100},
                    "subgroup_boundary": 1024,
                    "column_mapping": {"text": "BODY"},
                }
            ),
            encoding="utf-8",
        )
        config = load_config(path)
        assert config.corpus == "notes.csv"
        assert config.thresholds.bhc_min == 10
        assert config.subgroup_boundary == 1024
        assert config.column_mapping == {"text": "BODY"}

    def test_dotted_overrides_win(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text("split: {seed: 1}\n", encoding="utf-8")
        config = load_config(path, {"split.seed": 9, "workdir": "elsewhere"})
        assert config.split.seed == 9
        assert config.workdir == "elsewhere"

    def test_missing_file_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.yaml")

    def test_unparseable_yaml_is_config_error(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text("corpus: [unclosed\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="parse"):
            load_config(path)

    def test_bad_fractions_is_config_error(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text("split: {fractions: [0.5, 0.4, 0.2]}\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="sum"):
            load_config(path)

    def test_bpe_without_asset_is_config_error(self):
        with pytest.raises(ConfigError, match="asset_path"):
            load_config(None, {"tokenizer.kind": "subword_bpe"})


class TestDigest:
    def test_digest_stable_for_same_settings(self):
        a = load_config(None, {"split.seed": 3})
        b = load_config(None, {"split.seed": 3})
        assert a.digest() == b.digest()

    def test_digest_changes_with_settings(self):
        a = load_config(None, {"split.seed": 3})
        b = load_config(None, {"split.seed": 4})
        assert a.digest() != b.digest()

    def test_meta_carries_version_and_digest(self):
        meta = load_config(None).meta()
        assert set(meta) == {"toolkit_version", "config_digest"}
