import json

import pytest

from xids.errors import DataError, UsageError
from xids.tabular import ColumnSchema, RawTable, load_schema, load_table, validate_schema


def cols(*pairs):
    return [ColumnSchema(name=n, kind=k) for n, k in pairs]


class TestColumnSchema:
    def test_unknown_kind_rejected(self):
        with pytest.raises(UsageError):
            ColumnSchema(name="x", kind="widget")

    def test_ordinal_requires_order(self):
        with pytest.raises(UsageError):
            ColumnSchema(name="x", kind="ordinal")

    def test_ordinal_order_must_be_unique(self):
        with pytest.raises(UsageError):
            ColumnSchema(name="x", kind="ordinal", ordinal_order=("low", "low"))

    def test_order_only_for_ordinals(self):
        with pytest.raises(UsageError):
            ColumnSchema(name="x", kind="numeric", ordinal_order=("a",))

    def test_valid_ordinal(self):
        c = ColumnSchema(name="sev", kind="ordinal", ordinal_order=("low", "high"))
        assert c.ordinal_order == ("low", "high")


class TestValidateSchema:
    def test_exactly_one_label(self):
        with pytest.raises(UsageError):
            validate_schema(cols(("a", "numeric")))
        with pytest.raises(UsageError):
            validate_schema(cols(("a", "label"), ("b", "label")))

    def test_duplicate_names(self):
        with pytest.raises(UsageError):
            validate_schema(cols(("a", "numeric"), ("a", "label")))


class TestLoadSchema:
    def test_object_form(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text(json.dumps({
            "has_header": False,
            "columns": [
                {"name": "a", "kind": "numeric"},
                {"name": "sev", "kind": "ordinal", "ordinal_order": ["low", "high"]},
                {"name": "label", "kind": "label", "label_map": {"ok": "ok"},
                 "label_other": "bad"},
            ],
        }))
        columns, has_header = load_schema(p)
        assert has_header is False
        assert columns[1].ordinal_order == ("low", "high")
        assert columns[2].label_map == {"ok": "ok"}
        assert columns[2].label_other == "bad"

    def test_bare_list_form(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text(json.dumps([
            {"name": "a", "kind": "numeric"},
            {"name": "label", "kind": "label"},
        ]))
        columns, has_header = load_schema(p)
        assert has_header is True
        assert [c.name for c in columns] == ["a", "label"]

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_schema(tmp_path / "nope.json")

    def test_bad_json(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text("{not json")
        with pytest.raises(UsageError):
            load_schema(p)

    def test_missing_entry_key(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text(json.dumps([{"name": "a"}]))
        with pytest.raises(UsageError):
            load_schema(p)

    def test_builtin_schemas_parse(self):
        from xids.pipeline import resolve_schema_path

        for token in ("nsl-kdd-multiclass", "nsl-kdd-binary"):
            columns, has_header = load_schema(resolve_schema_path(token))
            assert has_header is False
            assert sum(c.kind == "label" for c in columns) == 1
            assert sum(c.kind == "drop" for c in columns) == 1
            assert len(columns) == 43


class TestLoadTable:
    def write(self, tmp_path, text, name="t.csv"):
        p = tmp_path / name
        p.write_text(text)
        return p

    def test_header_reordered_to_schema(self, tmp_path):
        p = self.write(tmp_path, "label,a\nx,1.5\n")
        t = load_table(p, cols(("a", "numeric"), ("label", "label")))
        assert t.rows == [[1.5, "x"]]

    def test_missing_tokens(self, tmp_path):
        p = self.write(tmp_path, "a,label\n,x\nNaN,y\n2,z\n")
        t = load_table(p, cols(("a", "numeric"), ("label", "label")))
        assert [r[0] for r in t.rows] == [None, None, 2.0]

    def test_unparseable_numeric_is_missing(self, tmp_path):
        p = self.write(tmp_path, "a,label\noops,x\n")
        t = load_table(p, cols(("a", "numeric"), ("label", "label")))
        assert t.rows[0][0] is None

    def test_headerless(self, tmp_path):
        p = self.write(tmp_path, "1,x\n2,y\n")
        t = load_table(p, cols(("a", "numeric"), ("label", "label")), has_header=False)
        assert t.n_rows == 2
        assert t.rows[0] == [1.0, "x"]

    def test_header_mismatch(self, tmp_path):
        p = self.write(tmp_path, "a,wrong\n1,x\n")
        with pytest.raises(DataError):
            load_table(p, cols(("a", "numeric"), ("label", "label")))

    def test_row_width_mismatch(self, tmp_path):
        p = self.write(tmp_path, "a,label\n1\n")
        with pytest.raises(DataError):
            load_table(p, cols(("a", "numeric"), ("label", "label")))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_table(tmp_path / "nope.csv", cols(("a", "numeric"), ("label", "label")))

    def test_no_data_rows(self, tmp_path):
        p = self.write(tmp_path, "a,label\n")
        with pytest.raises(DataError):
            load_table(p, cols(("a", "numeric"), ("label", "label")))

    def test_blank_lines_skipped(self, tmp_path):
        p = self.write(tmp_path, "a,label\n1,x\n\n2,y\n")
        t = load_table(p, cols(("a", "numeric"), ("label", "label")))
        assert t.n_rows == 2

    def test_merge_multiple_files(self, tmp_path):
        p1 = self.write(tmp_path, "a,label\n1,x\n", "t1.csv")
        p2 = self.write(tmp_path, "label,a\ny,2\n", "t2.csv")
        t = load_table([p1, p2], cols(("a", "numeric"), ("label", "label")))
        assert [r[0] for r in t.rows] == [1.0, 2.0]

    def test_strings_stripped(self, tmp_path):
        p = self.write(tmp_path, "a, label\n 1 , x \n")
        t = load_table(p, cols(("a", "numeric"), ("label", "label")))
        assert t.rows[0] == [1.0, "x"]


class TestRawTable:
    def test_width_checked(self):
        with pytest.raises(DataError):
            RawTable(cols(("a", "numeric"), ("label", "label")), [[1.0]])

    def test_subset_and_lookup(self):
        t = RawTable(cols(("a", "numeric"), ("label", "label")), [[1.0, "x"], [2.0, "y"]])
        assert t.label_index == 1
        assert t.column_index("a") == 0
        assert t.subset([1]).rows == [[2.0, "y"]]
        with pytest.raises(UsageError):
            t.column_index("nope")
