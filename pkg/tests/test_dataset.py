import numpy as np
import pytest

from mufasa.dataset import block_arms, ingest_csv, read_contexts
from mufasa.errors import ParseError

from . import TESTDATA

DATASETS = TESTDATA / "datasets"
CONTEXTS = TESTDATA / "contexts"


def test_ingest_three_rows():
    dataset = ingest_csv(DATASETS / "three_rows.csv")
    assert len(dataset.rounds) == 3
    assert dataset.n_classes == 3
    assert dataset.dim == 2
    assert dataset.labels() == [0, 1, 2]
    np.testing.assert_allclose(dataset.features(), [[0.6, 0.8], [0.2, 0.0], [0.0, 0.4]])
    assert np.max(np.linalg.norm(dataset.features(), axis=1)) == pytest.approx(1.0)


def test_ingest_skips_byte_order_mark():
    dataset = ingest_csv(DATASETS / "bom.csv")
    assert dataset.labels() == [0, 1, 2]
    np.testing.assert_allclose(dataset.features(), ingest_csv(DATASETS / "three_rows.csv").features())


def test_ingest_declared_classes():
    assert ingest_csv(DATASETS / "three_rows.csv", n_classes=5).n_classes == 5


@pytest.mark.parametrize(
    ("name", "kwargs", "match"),
    [
        pytest.param("empty.csv", {}, "empty.csv:1: file is empty", id="empty"),
        pytest.param("ragged.csv", {}, "ragged.csv:3: expected 3 cells, got 2", id="ragged"),
        pytest.param("fractional_label.csv", {}, "fractional_label.csv:2: label '1.5' is not an integer", id="label"),
        pytest.param("non_numeric.csv", {}, "non_numeric.csv:3: non-numeric feature", id="non-numeric"),
        pytest.param("label_range.csv", {"n_classes": 2}, "label_range.csv:3: label 3 outside 0..1", id="range"),
        pytest.param("three_rows.csv", {"n_classes": 2}, "three_rows.csv:4: label 2 outside 0..1", id="declared"),
        pytest.param("not_utf8.csv", {}, "not_utf8.csv: not valid UTF-8", id="not-utf8"),
    ],
)
def test_ingest_errors(name: str, kwargs: dict, match: str):
    with pytest.raises(ParseError, match=match):
        ingest_csv(DATASETS / name, **kwargs)


def test_ingest_error_line():
    with pytest.raises(ParseError) as info:
        ingest_csv(DATASETS / "ragged.csv")
    assert info.value.line == 3


def test_block_arms():
    arms = block_arms(np.array([1.0, 2.0]), 3)
    assert arms.shape == (3, 6)
    np.testing.assert_array_equal(arms[1], [0.0, 0.0, 1.0, 2.0, 0.0, 0.0])
    for c in range(3):
        blocks = arms[c].reshape(3, 2)
        assert np.count_nonzero(np.linalg.norm(blocks, axis=1)) == 1


def test_block_arms_layout():
    x = np.random.default_rng(0).uniform(size=4)
    arms = block_arms(x, 10)
    assert arms.shape == (10, 40)
    np.testing.assert_array_equal(arms.reshape(10, 10, 4)[np.arange(10), np.arange(10)], np.tile(x, (10, 1)))


@pytest.mark.parametrize(
    ("name", "expected"),
    [
        pytest.param("single.csv", [[0.6, 0.8]], id="no-header"),
        pytest.param("orthonormal.csv", np.eye(3), id="header"),
        pytest.param("bom.csv", [[0.6, 0.8], [0.0, 1.0]], id="byte-order-mark"),
    ],
)
def test_read_contexts(name: str, expected):
    np.testing.assert_array_equal(read_contexts(CONTEXTS / name), expected)


def test_read_contexts_drops_labels():
    contexts = read_contexts(DATASETS / "three_rows.csv")
    # no rescaling
    np.testing.assert_array_equal(contexts, [[3.0, 4.0], [1.0, 0.0], [0.0, 2.0]])


@pytest.mark.parametrize(
    ("path", "match"),
    [
        pytest.param(CONTEXTS / "ragged.csv", "ragged.csv:3: expected 2 values, got 1", id="ragged"),
        pytest.param(CONTEXTS / "non_numeric.csv", "non_numeric.csv:2: non-numeric value", id="non-numeric"),
        pytest.param(DATASETS / "empty.csv", "empty.csv:1: file is empty", id="empty"),
        pytest.param(CONTEXTS / "not_utf8.csv", "not_utf8.csv: not valid UTF-8", id="not-utf8"),
    ],
)
def test_read_contexts_errors(path, match: str):
    with pytest.raises(ParseError, match=match):
        read_contexts(path)
