import datetime as dt
import json

import pytest

from hatescan.corpus import Comment, HateLabel, LabeledComment, SentimentLabel, Source
from hatescan.synth import write_demo
from hatescan.textprep import PipelineConfig


@pytest.fixture(scope="session")
def default_cfg():
    return PipelineConfig.default()


@pytest.fixture
def small_cfg():
    return PipelineConfig(
        stopwords={"das", "ist", "nicht", "und", "die"},
        negation_whitelist={"nicht", "kein"},
        lemma_dict={"soldaten": "soldat"},
    )


def make_item(cid, hate=None, sentiment=None, text="x", source=Source.PUBLIC,
              date=dt.date(2023, 10, 2), **kw):
    c = Comment(cid, "v1", source, date, text)
    return LabeledComment(c, hate=hate, sentiment=sentiment, **kw)


def hate_items(n_pos, n_neg, prefix="i"):
    items = [make_item(f"{prefix}{k:03d}", HateLabel.HATE) for k in range(n_pos)]
    items += [make_item(f"{prefix}{n_pos + k:03d}", HateLabel.NO_HATE) for k in range(n_neg)]
    return items


@pytest.fixture
def demo_run(tmp_path):
    """A demo corpus plus run config in a fresh directory."""
    write_demo(tmp_path, n=200, seed=3)
    cfg = {
        "seed": 11,
        "paths": {"comments": "comments.jsonl", "labels": "labels.csv",
                  "field_comments": "comments.jsonl", "output_dir": "out"},
        "eval": {"split_ratio": 0.8, "k": 5},
        "svm": {"grid": [0.01, 0.1, 1.0]},
        "field": {"range_start": "2023-10-02", "range_end": "2023-11-20", "top_n": 15},
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return path


SENTIMENTS = (SentimentLabel.NEUTRAL, SentimentLabel.PRO_ISRAEL, SentimentLabel.PRO_PALESTINE)
