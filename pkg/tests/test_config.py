import dataclasses

import pytest

from spadesynth.config import (
    ablate_profile, desk_profile, dump_config, load_config, paper_profile,
    parse_config,
)
from spadesynth.errors import ConfigError


def test_defaults():
    cfg = parse_config("")
    assert cfg.epochs == 30 and cfg.batch_size == 8
    assert cfg.gen.out_size == 32 and cfg.gen.nf == 16
    assert cfg.loss.w_kld == pytest.approx(0.05)
    assert cfg.decay_start_epoch == 15  # -1 resolves to half


def test_sections_and_types():
    cfg = parse_config(
        """
        # comment line
        train.epochs = 4
        train.lr_g = 0.0002   # inline comment
        train.use_encoder = false
        gen.nf = 8
        gen.variant = concat
        loss.w_feat = 5.0
        data.n_train = 12
        ablate.seeds = 3
        """
    )
    assert cfg.epochs == 4
    assert cfg.lr_g == pytest.approx(0.0002)
    assert cfg.use_encoder is False
    assert cfg.gen.nf == 8 and cfg.gen.variant == "concat"
    assert cfg.loss.w_feat == pytest.approx(5.0)
    assert cfg.data.n_train == 12
    assert cfg.ablate.seeds == 3


def test_later_lines_override():
    cfg = parse_config("train.epochs = 4\ntrain.epochs = 9\n")
    assert cfg.epochs == 9


@pytest.mark.parametrize("text,fragment", [
    ("train.epochs", "line 1"),
    ("epochs = 4", "section prefix"),
    ("orchestra.size = 9", "unknown section"),
    ("train.eppochs = 4", "unknown key"),
    ("gen.nf = many", "expected int"),
    ("train.use_encoder = maybe", "boolean"),
    ("ok = 1", "section prefix"),
])
def test_parse_errors_carry_location(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(text)


def test_error_reports_correct_line_number():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config("train.epochs = 2\n\ngen.wat = 1\n")


def test_cross_validation():
    with pytest.raises(ConfigError, match="out_size"):
        parse_config("gen.out_size = 64\n")
    with pytest.raises(ConfigError, match="num_labels"):
        parse_config("data.num_labels = 4\ngen.num_labels = 4\n")
    with pytest.raises(ConfigError, match="decay_start_epoch"):
        parse_config("train.epochs = 5\ntrain.decay_start_epoch = 7\n")
    with pytest.raises(ConfigError):
        parse_config("train.batch_size = 0\n")


def test_dump_round_trip():
    cfg = parse_config("train.epochs = 3\ngen.nf = 8\nloss.w_kld = 0.25\n")
    again = parse_config(dump_config(cfg))
    assert again == cfg


def test_dump_round_trip_all_profiles():
    for make in (desk_profile, paper_profile, ablate_profile):
        cfg = make()
        assert parse_config(dump_config(cfg)) == cfg


def test_profiles_are_internally_consistent():
    desk = desk_profile()
    assert desk.epochs * desk.steps_per_epoch == 600
    paper = paper_profile()
    assert paper.gen.out_size == 256 and paper.gen.nf == 64
    ab = ablate_profile()
    assert ab.gen.nf == 8 and ab.batch_size == 4
    assert ab.data.n_train == 80


def test_replace_revalidates():
    cfg = ablate_profile()
    with pytest.raises(ConfigError):
        dataclasses.replace(cfg, epochs=2)  # materialized decay_start now invalid
    ok = dataclasses.replace(cfg, epochs=2, decay_start_epoch=1)
    assert ok.epochs == 2


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "absent.cfg"))


def test_load_config_reads_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("train.epochs = 2\ntrain.decay_start_epoch = 0\n")
    assert load_config(str(p)).epochs == 2
