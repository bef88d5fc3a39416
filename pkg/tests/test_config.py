"""Run-config parsing, defaults, and hashing."""

from fractions import Fraction

import pytest

from stylebalance.config import ConfigError, load_config
from conftest import DOMAINS, VOCAB


def write(tmp_path, body):
    path = tmp_path / "run.conf"
    path.write_text(body, encoding="utf-8")
    return path


MINIMAL = "dataset_root: data\nmanifest: data/manifest.tsv\nout_dir: out\n"


class TestLoad:
    def test_minimal_with_defaults(self, tmp_path):
        config = load_config(write(tmp_path, MINIMAL))
        assert config.vocabulary == VOCAB
        assert config.domains == DOMAINS
        assert config.tolerance == Fraction(5, 4)
        assert config.minority_threshold == Fraction(1, 2)
        assert config.max_copies_per_pair == 3
        assert config.translator == "stat_transfer"
        assert config.work_dir.name == "out.work"
        assert config.dataset_root.is_absolute()

    def test_fraction_and_decimal_tolerance(self, tmp_path):
        config = load_config(write(tmp_path, MINIMAL + "tolerance: 1.25\n"))
        assert config.tolerance == Fraction(5, 4)
        config = load_config(write(tmp_path, MINIMAL + "tolerance: 3/2\n"))
        assert config.tolerance == Fraction(3, 2)

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            load_config(write(tmp_path, MINIMAL + "tollerance: 1.25\n"))
        assert "tollerance" in str(err.value)

    def test_duplicate_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, MINIMAL + "seed: 1\nseed: 2\n"))

    def test_comments_and_blanks_ignored(self, tmp_path):
        config = load_config(write(tmp_path, "# run\n\n" + MINIMAL + "seed: 9\n"))
        assert config.seed == 9

    def test_seed_override(self, tmp_path):
        config = load_config(write(tmp_path, MINIMAL + "seed: 9\n"), seed_override=42)
        assert config.seed == 42

    def test_anchor_file_reference(self, tmp_path):
        (tmp_path / "anchors.conf").write_text(
            "murky: 0.2 0.3 0.2 0.3\nclear: 0.6 0.7 0.7 0.3\n"
        )
        body = MINIMAL + "anchors: anchors.conf\nhaze.murky: 0.2 0.3 0.2 0.7\nhaze.clear: 0.7 0.8 0.8 0.9\n"
        config = load_config(write(tmp_path, body))
        assert config.domains == ("murky", "clear")
        assert config.haze["murky"] == ((0.2, 0.3, 0.2), 0.7)

    def test_haze_override_for_default_domain(self, tmp_path):
        config = load_config(write(tmp_path, MINIMAL + "haze.green: 0.1 0.2 0.3 0.5\n"))
        assert config.haze["green"] == ((0.1, 0.2, 0.3), 0.5)

    def test_haze_for_unknown_domain_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, MINIMAL + "haze.purple: 0.1 0.2 0.3 0.5\n"))

    def test_external_requires_command(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, MINIMAL + "translator: external\n"))

    def test_minority_class_must_be_known(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, MINIMAL + "minority_classes: kraken\n"))

    def test_tolerance_below_one_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, MINIMAL + "tolerance: 0.5\n"))


class TestHash:
    def test_stable_across_loads(self, tmp_path):
        path = write(tmp_path, MINIMAL + "seed: 3\n")
        assert load_config(path).config_hash() == load_config(path).config_hash()

    def test_changes_with_content(self, tmp_path):
        one = load_config(write(tmp_path, MINIMAL + "seed: 3\n"))
        two = load_config(write(tmp_path, MINIMAL + "seed: 4\n"))
        assert one.config_hash() != two.config_hash()

    def test_snapshot_covers_qc_and_anchors(self, tmp_path):
        snap = load_config(write(tmp_path, MINIMAL)).snapshot()
        assert "qc_block_clip" in snap
        assert "anchor.green" in snap
        assert "haze.deepblue" in snap
