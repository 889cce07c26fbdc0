"""Shared fixtures: stub indexes and small corpora."""

import json

import pytest

from src.models.qpp_models import DfIndex, Document


def make_index(df, num_docs=1000, max_n=3, cf=None, total_tokens=None):
    """DfIndex with hand-chosen counts; cf defaults to the unigram df values"""
    if cf is None:
        cf = {k: v for k, v in df.items() if " " not in k}
    if total_tokens is None:
        total_tokens = max(sum(cf.values()), 1)
    return DfIndex(num_docs=num_docs, max_n=max_n, df=dict(df), cf=dict(cf), total_tokens=total_tokens)


@pytest.fixture
def stub_index():
    return make_index


@pytest.fixture
def small_corpus():
    return [
        Document("Toppers Pizza", "Toppers Pizza",
                 "Toppers Pizza is a pizza chain founded in Whitewater in 1991."),
        Document("America's Incredible Pizza Company", "America's Incredible Pizza Company",
                 "America's Incredible Pizza Company is a restaurant chain founded in 2005."),
        Document("Whitewater", "Whitewater", "Whitewater is a city in Wisconsin."),
        Document("Buck-Tick", "Buck-Tick", "Buck-Tick is a Japanese rock band formed in 1983."),
        Document("Pizza", "Pizza", "Pizza is a dish of Italian origin."),
    ]


@pytest.fixture
def write_lines(tmp_path):
    """Write records as JSON lines and return the path"""
    def _write(name, records):
        path = tmp_path / name
        with open(path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record) + "\n")
        return path
    return _write
