import io

import numpy as np
import pytest

from conftest import make_samples, write_mini_fixture
from dataset import (
    META_COLUMNS, RATIO_COLUMNS, RATING_GRADES, DatasetConfig, DatasetStore, RatingClass, Standardizer,
    class_histogram, index_reports, ingest, join_reports, map_rating, parse_financial_csv, report_key,
    slugify, split, standardize,
)
from errors import InputError, SchemaError, UnknownRatingError


def _csv(rows, header=None):
    header = header or META_COLUMNS + RATIO_COLUMNS
    lines = [",".join(header)] + [",".join(r) for r in rows]
    return io.StringIO("\n".join(lines) + "\n")


def _row(corporation="Acme", rating="A", date="2016-03-31", agency="S&P", values=None):
    values = values or [str(i) for i in range(len(RATIO_COLUMNS))]
    return [agency, corporation, rating, date] + values


@pytest.mark.parametrize("raw, expected", [
    ("AAA", RatingClass.AAA), ("AA-", RatingClass.AA), ("A+", RatingClass.A), ("BBB", RatingClass.BBB),
    ("BB-", RatingClass.BB), ("B+", RatingClass.B), ("CCC-", RatingClass.CCC), ("D", RatingClass.CCC),
    (" bbb+ ", RatingClass.BBB),
])
def test_map_rating(raw, expected):
    assert map_rating(raw) == expected


def test_rating_vocabulary_covers_all_classes():
    assert len(RATING_GRADES) == 23
    assert set(RATING_GRADES.values()) == set(RatingClass)


def test_unknown_rating():
    with pytest.raises(UnknownRatingError):
        map_rating("Z")


def test_slug_and_key():
    assert slugify("Acme Holdings, Inc.") == "acme-holdings-inc"
    assert report_key("Beta  Corp", 2017) == "beta-corp:2017"


def test_parse_one_row_keeps_column_order():
    records = parse_financial_csv(_csv([_row()]))
    assert len(records) == 1
    assert records[0].ratios.tolist() == list(range(len(RATIO_COLUMNS)))
    assert records[0].year == 2016


def test_parse_accepts_us_dates():
    records = parse_financial_csv(_csv([_row(date="6/30/2017")]))
    assert records[0].rating_date == "2017-06-30"


def test_non_numeric_cell_names_row_and_column():
    values = [str(i) for i in range(len(RATIO_COLUMNS))]
    values[2] = "abc"
    with pytest.raises(SchemaError) as info:
        parse_financial_csv(_csv([_row(values=values)]))
    assert info.value.row == 2
    assert info.value.column == RATIO_COLUMNS[2]
    assert RATIO_COLUMNS[2] in str(info.value)


def test_missing_column_is_named():
    header = [c for c in META_COLUMNS + RATIO_COLUMNS if c != "Rating"]
    rows = [[v for c, v in zip(META_COLUMNS + RATIO_COLUMNS, _row()) if c != "Rating"]]
    with pytest.raises(SchemaError, match="Rating"):
        parse_financial_csv(_csv(rows, header))


def test_join_keeps_matched_pairs_and_first_rating(tmp_path):
    records = parse_financial_csv(_csv([
        _row("Acme", "AA", "2016-01-01", "S&P"),
        _row("Acme", "BB", "2016-05-01", "Moody's"),
        _row("Orphan", "A", "2016-01-01"),
    ]))
    (tmp_path / "acme_2016.txt").write_text("x", encoding="utf-8")
    (tmp_path / "nobody_2016.txt").write_text("x", encoding="utf-8")
    (tmp_path / "README.md").write_text("x", encoding="utf-8")
    index = index_reports(str(tmp_path))
    assert set(index) == {("acme", 2016), ("nobody", 2016)}
    samples = join_reports(records, index)
    assert len(samples) == 1
    assert samples[0].label == RatingClass.AA


def test_duplicate_agency_row_is_ignored(caplog):
    records = parse_financial_csv(_csv([_row("Acme", "AA"), _row("Acme", "CCC")]))
    samples = join_reports(records, {("acme", 2016): "acme_2016.txt"})
    assert [s.label for s in samples] == [RatingClass.AA]
    assert "dupliquée" in caplog.text


def test_standardize_population_std_and_constant_feature():
    samples = make_samples([3], n_features=2)
    samples[0].financial = np.array([1.0, 5.0])
    samples[1].financial = np.array([2.0, 5.0])
    samples[2].financial = np.array([3.0, 5.0])
    out, _ = standardize(samples, samples)
    assert np.allclose([s.financial[0] for s in out], [-1.2247, 0.0, 1.2247], atol=1e-4)
    assert all(s.financial[1] == 0.0 for s in out)


def test_test_rows_use_train_statistics():
    train = make_samples([5, 5], n_features=4, seed=1)
    test = make_samples([2, 2], n_features=4, seed=2)
    out, standardizer = standardize(test, train)
    matrix = np.stack([s.financial for s in train]).astype(np.float64)
    oracle = (test[0].financial - matrix.mean(axis=0)) / matrix.std(axis=0)
    assert np.allclose(out[0].financial, oracle, atol=1e-5)
    restored = standardizer.inverse(np.stack([s.financial for s in out]))
    assert np.allclose(restored, np.stack([s.financial for s in test]), atol=1e-5)


def test_standardize_empty_train_split():
    with pytest.raises(InputError):
        Standardizer.fit([])


def test_split_single_class_proportions():
    train, test = split(make_samples([100]), 0.75, seed=3)
    assert (len(train), len(test)) == (75, 25)


def test_split_is_stratified_partition():
    samples = make_samples([4, 4])
    train, test = split(samples, 0.75, seed=5)
    assert class_histogram(train)[:2].tolist() == [3, 3]
    assert class_histogram(test)[:2].tolist() == [1, 1]
    keys = {s.corporation for s in train} | {s.corporation for s in test}
    assert len(keys) == len(samples) == len(train) + len(test)


def test_split_singleton_class_goes_to_train():
    train, test = split(make_samples([1, 8]), 0.75, seed=0)
    assert class_histogram(test)[0] == 0
    assert class_histogram(train)[0] == 1


def test_split_is_deterministic():
    samples = make_samples([10, 7, 3])
    first = [s.corporation for s in split(samples, seed=9)[1]]
    second = [s.corporation for s in split(samples, seed=9)[1]]
    assert first == second


def test_split_empty():
    with pytest.raises(InputError):
        split([])


def test_ingest_mini_fixture_and_store_round_trip(tmp_path):
    csv_path, reports_dir = write_mini_fixture(tmp_path)
    store = ingest(str(csv_path), str(reports_dir), DatasetConfig(), seed=1)
    assert len(store.samples) == 2
    assert sorted(s.key for s in store.samples) == ["acme-holdings-inc:2016", "beta-corp:2017"]
    out = tmp_path / "store"
    store.save(str(out))
    loaded = DatasetStore.load(str(out))
    assert [s.key for s in loaded.samples] == [s.key for s in store.samples]
    assert loaded.assignment == store.assignment
    assert np.allclose(loaded.standardizer.mean, store.standardizer.mean)
    first = (out / "samples.jsonl").read_bytes()
    loaded.save(str(out))
    assert (out / "samples.jsonl").read_bytes() == first


def test_ingest_rejects_unknown_rating_with_row(tmp_path):
    rows = [["S&P", "Acme Holdings Inc.", "ZZZ", "2016-03-31"] + ["1"] * len(RATIO_COLUMNS)]
    csv_path, reports_dir = write_mini_fixture(tmp_path, rows=rows)
    with pytest.raises(SchemaError) as info:
        ingest(str(csv_path), str(reports_dir), DatasetConfig(), seed=1)
    assert info.value.row == 2 and info.value.column == "Rating"


def test_ingest_without_matches(tmp_path):
    csv_path, reports_dir = write_mini_fixture(tmp_path, reports={"someone-else_2001.txt": "x y z"})
    with pytest.raises(InputError):
        ingest(str(csv_path), str(reports_dir), DatasetConfig(), seed=1)


def test_missing_store():
    with pytest.raises(InputError):
        DatasetStore.load("/nonexistent/store")
