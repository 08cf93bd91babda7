"""Format round-trips, the min-word filter, and parse errors."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fival.dataset_io import (
    DatasetStats,
    ParseError,
    filter_min_words,
    read_dataset,
    write_dataset,
    word_count,
)
from fival.records import Label, Record, SchemaError, UnknownComponent

from conftest import (
    make_choice_records,
    make_pair_records,
    make_qa_records,
    make_single_records,
)


class TestJsonl:
    def test_round_trip_pairs(self, tmp_path, pair_records):
        path = tmp_path / "pairs.jsonl"
        write_dataset(pair_records, path, "jsonl")
        assert list(read_dataset(path, "jsonl")) == pair_records

    def test_round_trip_all_tasks(self, tmp_path):
        for records in (make_single_records(10), make_choice_records(10),
                        make_qa_records(10)):
            path = tmp_path / "data.jsonl"
            write_dataset(records, path, "jsonl")
            assert list(read_dataset(path, "jsonl")) == records

    def test_tab_preserved_exactly(self, tmp_path):
        record = Record("r1", "single_sentence",
                        {"part1": "has a\ttab and four words"},
                        Label("class", "ok"))
        path = tmp_path / "tab.jsonl"
        write_dataset([record], path, "jsonl")
        (loaded,) = read_dataset(path, "jsonl")
        assert loaded.components["part1"] == "has a\ttab and four words"

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id":"a","task":"single_sentence",'
                        '"components":{"part1":"x y z"},'
                        '"gold":{"kind":"class","value":"ok"}}\n'
                        "{not json}\n", encoding="utf-8")
        with pytest.raises(ParseError, match="line 2"):
            list(read_dataset(path, "jsonl"))

    def test_bom_stripped(self, tmp_path):
        path = tmp_path / "bom.jsonl"
        body = json.dumps({"id": "a", "task": "single_sentence",
                           "components": {"part1": "x y z"},
                           "gold": {"kind": "class", "value": "ok"}})
        path.write_bytes(b"\xef\xbb\xbf" + body.encode() + b"\n")
        (record,) = read_dataset(path, "jsonl")
        assert record.id == "a"

    def test_provenance_survives(self, tmp_path):
        from fival.records import AugmentedRecord
        record = AugmentedRecord(
            id="a-inv0", task="single_sentence",
            components={"part1": "z y x"}, gold=Label("class", "invalid"),
            source_id="a", perturbed_component="part1", n=1, mode="differs",
        )
        path = tmp_path / "prov.jsonl"
        write_dataset([record], path, "jsonl")
        (loaded,) = read_dataset(path, "jsonl")
        assert isinstance(loaded, AugmentedRecord)
        assert loaded == record


class TestGlueTsv:
    def test_header_round_trip(self, tmp_path, pair_records):
        path = tmp_path / "pairs.tsv"
        write_dataset(pair_records, path, "glue_tsv")
        assert list(read_dataset(path, "glue_tsv")) == pair_records

    def test_single_sentence_round_trip(self, tmp_path):
        records = make_single_records(8)
        path = tmp_path / "single.tsv"
        write_dataset(records, path, "glue_tsv")
        assert list(read_dataset(path, "glue_tsv")) == records

    def test_three_line_pair_file(self, tmp_path):
        path = tmp_path / "two.tsv"
        path.write_text("id\tpart1\tpart2\tlabel\n"
                        "a\tx y z\tp q r\tentailment\n"
                        "b\tu v w\tm n o\tneutral\n", encoding="utf-8")
        records = list(read_dataset(path, "glue_tsv"))
        assert len(records) == 2
        assert all(r.task == "pair_classification" for r in records)

    def test_tab_in_field_refused(self, tmp_path):
        record = Record("r1", "single_sentence",
                        {"part1": "has a\ttab here"}, Label("class", "ok"))
        with pytest.raises(ValueError, match="tab"):
            write_dataset([record], tmp_path / "bad.tsv", "glue_tsv")

    def test_cola_preset_headerless(self, tmp_path):
        path = tmp_path / "cola.tsv"
        path.write_text("gj04\t1\t\tThe sailors rode the breeze clear of "
                        "the rocks.\n"
                        "gj04\t0\t*\tThe horse raced past the barn fell.\n",
                        encoding="utf-8")
        records = list(read_dataset(path, "glue_tsv", preset="cola"))
        assert len(records) == 2
        assert records[0].gold.value == "1"
        assert records[0].components["part1"].startswith("The sailors")

    def test_mnli_preset_by_column_name(self, tmp_path):
        path = tmp_path / "mnli.tsv"
        path.write_text(
            "index\tpairID\tsentence1\tsentence2\tgold_label\n"
            "0\tid-77\tThe cat sat on the mat\tA cat is sitting\t"
            "entailment\n",
            encoding="utf-8")
        (record,) = read_dataset(path, "glue_tsv", preset="mnli")
        assert record.id == "id-77"
        assert record.components["part2"] == "A cat is sitting"

    def test_missing_column_is_schema_error(self, tmp_path):
        path = tmp_path / "broken.tsv"
        path.write_text("id\tpart1\n" "a\tx y z\n", encoding="utf-8")
        with pytest.raises(SchemaError):
            list(read_dataset(path, "glue_tsv", preset="canonical_single"))

    def test_empty_stream_writes_header(self, tmp_path):
        path = tmp_path / "empty.tsv"
        write_dataset([], path, "glue_tsv")
        assert path.read_text(encoding="utf-8") == "id\tpart1\tlabel\n"


class TestSwagCsv:
    def test_round_trip(self, tmp_path):
        records = make_choice_records(12)
        path = tmp_path / "swag.csv"
        write_dataset(records, path, "swag_csv")
        assert list(read_dataset(path, "swag_csv")) == records

    def test_label_index_parsed(self, tmp_path):
        path = tmp_path / "mini.csv"
        path.write_text(
            "sent1,sent2,ending0,ending1,ending2,ending3,label\n"
            "The band plays,and then they,stop playing,keep going,"
            "fall asleep,start over,2\n", encoding="utf-8")
        (record,) = read_dataset(path, "swag_csv")
        assert record.gold == Label("choice_index", 2)
        assert record.id == "row-0"
        assert record.components["ending_2"] == "fall asleep"

    def test_comma_in_field_round_trips(self, tmp_path):
        records = make_choice_records(3)
        records[0].components["context"] = "well, this has commas, lots"
        path = tmp_path / "commas.csv"
        write_dataset(records, path, "swag_csv")
        loaded = list(read_dataset(path, "swag_csv"))
        assert loaded[0].components["context"] == \
            "well, this has commas, lots"

    def test_bad_label_is_parse_error(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("sent1,sent2,ending0,ending1,label\n"
                        "a b c,d e,f g,h i,not-an-int\n", encoding="utf-8")
        with pytest.raises(ParseError):
            list(read_dataset(path, "swag_csv"))


class TestDropJson:
    def test_nested_passages_share_component(self, tmp_path):
        data = {
            "p1": {
                "passage": "The team scored twelve points in the half",
                "qa_pairs": [
                    {"question": "How many points were scored?",
                     "query_id": "q1",
                     "answer": {"number": "12", "spans": [], "date": {}}},
                    {"question": "Who scored the points there?",
                     "query_id": "q2",
                     "answer": {"number": "", "spans": ["The team"],
                                "date": {}}},
                ],
            }
        }
        path = tmp_path / "drop.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        records = list(read_dataset(path, "drop_json"))
        assert len(records) == 2
        assert records[0].components["passage"] == \
            records[1].components["passage"]
        assert records[0].gold == Label("answer_spans", ["12"])
        assert records[1].gold == Label("answer_spans", ["The team"])

    def test_round_trip(self, tmp_path):
        records = make_qa_records(9)
        path = tmp_path / "drop.json"
        write_dataset(records, path, "drop_json")
        assert list(read_dataset(path, "drop_json")) == records

    def test_date_answer_normalized(self, tmp_path):
        data = {"p": {"passage": "Something happened a while ago then",
                      "qa_pairs": [{"question": "When did it happen?",
                                    "query_id": "q",
                                    "answer": {"number": "", "spans": [],
                                               "date": {"day": "5",
                                                        "month": "March",
                                                        "year": "1990"}}}]}}
        path = tmp_path / "drop.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        (record,) = read_dataset(path, "drop_json")
        assert record.gold == Label("answer_spans", ["5 March 1990"])


class TestFilterMinWords:
    def test_counts_ignore_trailing_punct(self):
        assert word_count("two words .") == 2
        assert word_count("two words.") == 2
        assert word_count("three whole words") == 3

    def test_boundary_drop(self):
        records = [
            Record(f"r{i}", "single_sentence", {"part1": text},
                   Label("class", "any"))
            for i, text in enumerate(["just two", "exactly three words",
                                      "four words right here"])
        ]
        kept, stats = filter_min_words(records, 3, ["part1"])
        assert [r.id for r in kept] == ["r1", "r2"]
        assert stats == DatasetStats(3, 2, {"part1": 3})

    def test_no_drop_when_all_long(self, pair_records):
        kept, stats = filter_min_words(pair_records, 3, ["part1", "part2"])
        assert stats.used_count == stats.original_count == len(pair_records)
        assert kept == pair_records

    def test_idempotent_and_order_preserving(self, pair_records):
        kept1, _ = filter_min_words(pair_records, 5, ["part1"])
        kept2, stats2 = filter_min_words(kept1, 5, ["part1"])
        assert kept1 == kept2
        assert stats2.used_count == stats2.original_count

    def test_unknown_component(self, pair_records):
        with pytest.raises(UnknownComponent):
            filter_min_words(pair_records, 3, ["part9"])

    def test_lower_median(self):
        records = [
            Record(f"r{i}", "single_sentence",
                   {"part1": " ".join(["w"] * n)}, Label("class", "x"))
            for i, n in enumerate([4, 5, 6, 7])
        ]
        _, stats = filter_min_words(records, 1, ["part1"])
        assert stats.median_words["part1"] == 5

    def test_endings_pseudo_component(self):
        records = make_choice_records(6, seed=3)
        kept, stats = filter_min_words(records, 3, ["context", "endings"])
        assert "ending_0" in stats.median_words
        assert stats.used_count == len(kept)


@st.composite
def random_pair_record(draw, index: int = 0):
    words = st.text(alphabet=st.characters(
        whitelist_categories=("Ll", "Lu", "Nd")), min_size=1, max_size=8)
    part = st.lists(words, min_size=1, max_size=6).map(" ".join)
    return Record(
        id=f"r{draw(st.integers(0, 10**6))}-{index}",
        task="pair_classification",
        components={"part1": draw(part), "part2": draw(part)},
        gold=Label("class", draw(st.sampled_from(["yes", "no", "maybe"]))),
    )


class TestRoundTripProperty:
    @given(st.lists(random_pair_record(), min_size=1, max_size=12,
                    unique_by=lambda r: r.id))
    @settings(max_examples=40, deadline=None)
    def test_jsonl_and_tsv_agree(self, tmp_path_factory, records):
        tmp = tmp_path_factory.mktemp("roundtrip")
        write_dataset(records, tmp / "d.jsonl", "jsonl")
        write_dataset(records, tmp / "d.tsv", "glue_tsv")
        assert list(read_dataset(tmp / "d.jsonl", "jsonl")) == records
        assert list(read_dataset(tmp / "d.tsv", "glue_tsv")) == records
