import numpy as np
import pytest
import torch

from helpers import tiny_model_config

from fingerspell.alignment import FrequencyTable
from fingerspell.detection import new_detection_model
from fingerspell.errors import ParseError
from fingerspell.preprocessing import PoseSequence
from fingerspell.suggestion import Lexicon, LexiconEntry, load_lexicon, suggest

LEXICON_CSV = (
    "word,gloss,uri,domain\n"
    "mean,AVERAGE,https://lex.example/mean-avg,math\n"
    "mean,INTENTION,https://lex.example/mean-intent,\n"
    "acid,ACID,https://lex.example/acid,chemistry\n"
)


class TestLoadLexicon:
    def test_rows_grouped_by_word(self, tmp_path):
        path = tmp_path / "lex.csv"
        path.write_text(LEXICON_CSV)
        lex = load_lexicon(path)
        assert len(lex.lookup("mean")) == 2
        assert lex.lookup("Mean.") == lex.lookup("mean")  # normalized lookup
        assert lex.lookup("acid") == [LexiconEntry("ACID", "https://lex.example/acid", "chemistry")]

    def test_empty_gloss_rejected(self, tmp_path):
        path = tmp_path / "lex.csv"
        path.write_text("word,gloss,uri,domain\nacid,,u,\n")
        with pytest.raises(ParseError, match=":2"):
            load_lexicon(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "lex.csv"
        path.write_text("word,gloss,uri,domain\n")
        assert load_lexicon(path).entries == {}

    def test_unknown_word_empty_candidates(self, tmp_path):
        path = tmp_path / "lex.csv"
        path.write_text(LEXICON_CSV)
        assert load_lexicon(path).lookup("zymurgy") == []


class TestSuggest:
    def _fixed_prob_model(self, probs_value_by_frame):
        """Detection model rigged to produce a chosen per-frame pattern."""
        cfg = tiny_model_config(video_target_len=len(probs_value_by_frame), text_target_len=32)
        model = new_detection_model(cfg, seed=0)
        torch.nn.init.zeros_(model.fusion.weight)
        torch.nn.init.zeros_(model.fusion.bias)
        return cfg, model

    def test_no_spans_no_suggestions(self):
        cfg, model = self._fixed_prob_model([0.0] * 20)
        with torch.no_grad():
            model.fusion.bias.fill_(-10.0)  # probability ~0 everywhere
        video = PoseSequence.from_array(np.zeros((20, 75, 2), dtype=np.float32))
        table = FrequencyTable.from_counts({"the": 10})
        out = suggest(video, "the words", model, table, Lexicon())
        assert out == []

    def test_word_not_in_lexicon_yields_empty_candidates(self):
        cfg, model = self._fixed_prob_model([0.0] * 20)
        with torch.no_grad():
            model.fusion.bias.fill_(10.0)  # probability ~1 everywhere -> one big span
        video = PoseSequence.from_array(np.zeros((20, 75, 2), dtype=np.float32))
        table = FrequencyTable.from_counts({"the": 10, "zymurgy": 0})
        out = suggest(video, "the zymurgy", model, table, Lexicon())
        assert len(out) == 1
        assert out[0].word == "zymurgy"
        assert out[0].candidates == []

    def test_candidates_found_for_known_word(self, tmp_path):
        path = tmp_path / "lex.csv"
        path.write_text(LEXICON_CSV)
        lexicon = load_lexicon(path)
        cfg, model = self._fixed_prob_model([0.0] * 20)
        with torch.no_grad():
            model.fusion.bias.fill_(10.0)
        video = PoseSequence.from_array(np.zeros((20, 75, 2), dtype=np.float32))
        table = FrequencyTable.from_counts({"the": 10, "acid": 1})
        out = suggest(video, "the acid", model, table, lexicon)
        assert len(out) == 1
        assert out[0].word == "acid" and len(out[0].candidates) == 1

    def test_deterministic(self):
        cfg, model = self._fixed_prob_model([0.0] * 16)
        video = PoseSequence.from_array(
            np.random.default_rng(0).normal(0.5, 0.1, (16, 75, 2)).astype(np.float32)
        )
        table = FrequencyTable.from_counts({"a": 5, "b": 1})
        one = suggest(video, "a b", model, table, Lexicon())
        two = suggest(video, "a b", model, table, Lexicon())
        assert one == two
