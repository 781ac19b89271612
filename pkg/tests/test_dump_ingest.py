"""SQL dump scanner and article reader tests, including the round-trip oracle."""

import gzip
import io
import json
import os
import tracemalloc

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xlpack.dump_ingest import (
    ArticleTally,
    LangLink,
    PageColumns,
    ParseTally,
    TruncatedDumpError,
    iter_insert_tuples,
    parse_langlinks_dump,
    parse_pages_dump,
    read_extracted_articles,
)
from xlpack.synth import sql_quote, write_langlinks_dump, write_pages_dump, write_sql_dump

from .oracles import reference_unescape_sql


def _stream(text: str) -> io.BytesIO:
    return io.BytesIO(text.encode("utf-8"))


class TestLanglinks:
    def test_basic_statement_with_filter(self):
        data = "INSERT INTO `langlinks` VALUES (12,'en','Free_software'),(25,'en','Autism');\n"
        links = list(parse_langlinks_dump(_stream(data), "en"))
        assert links == [
            LangLink(12, "en", "Free software"),
            LangLink(25, "en", "Autism"),
        ]

    def test_escaped_quote_matches_reference_unescaper(self):
        raw_inner = "O\\'Brien"
        data = f"INSERT INTO `langlinks` VALUES (7,'en','{raw_inner}');\n"
        (link,) = parse_langlinks_dump(_stream(data))
        assert link.target_title == reference_unescape_sql(raw_inner) == "O'Brien"

    def test_filter_excludes_other_languages(self):
        data = "INSERT INTO `langlinks` VALUES (9,'fr','Chat');\n"
        assert list(parse_langlinks_dump(_stream(data), "en")) == []

    def test_multiple_statements_and_preamble(self):
        data = (
            "-- MySQL dump\n"
            "DROP TABLE IF EXISTS `langlinks`;\n"
            "CREATE TABLE `langlinks` (\n  `ll_from` int(8) NOT NULL\n);\n"
            "INSERT INTO `langlinks` VALUES (1,'en','A');\n"
            "INSERT INTO `langlinks` VALUES (2,'en','B');\n"
        )
        links = list(parse_langlinks_dump(_stream(data)))
        assert [(l.from_page_id, l.target_title) for l in links] == [(1, "A"), (2, "B")]

    def test_malformed_tuple_is_skipped_and_tallied(self):
        data = "INSERT INTO `langlinks` VALUES (1,'en','A'),(nope,'en','B'),(3,'en','C');\n"
        tally = ParseTally()
        links = list(parse_langlinks_dump(_stream(data), tally=tally))
        assert [l.from_page_id for l in links] == [1, 3]
        assert tally.malformed == 1

    def test_wrong_arity_is_skipped(self):
        data = "INSERT INTO `langlinks` VALUES (1,'en'),(3,'en','C');\n"
        tally = ParseTally()
        links = list(parse_langlinks_dump(_stream(data), tally=tally))
        assert [l.from_page_id for l in links] == [3]
        assert tally.malformed == 1

    def test_truncated_file_yields_complete_tuples_then_raises(self):
        data = "INSERT INTO `langlinks` VALUES (1,'en','A'),(2,'en','Bro"
        tally = ParseTally()
        stream = parse_langlinks_dump(_stream(data), tally=tally)
        first = next(stream)
        assert first.from_page_id == 1
        with pytest.raises(TruncatedDumpError):
            list(stream)

    def test_gzip_transparent(self, tmp_path):
        path = tmp_path / "ll.sql.gz"
        with gzip.open(path, "wt", encoding="utf-8") as f:
            f.write("INSERT INTO `langlinks` VALUES (5,'en','Zeta');\n")
        (link,) = parse_langlinks_dump(path)
        assert link == LangLink(5, "en", "Zeta")

    def test_lowercases_language(self):
        data = "INSERT INTO `langlinks` VALUES (5,'EN','Zeta');\n"
        (link,) = parse_langlinks_dump(_stream(data), "en")
        assert link.target_lang == "en"


class TestPages:
    def test_modern_schema_defaults(self):
        data = (
            "INSERT INTO `page` VALUES "
            "(100,0,'Cat',0,0,0.5,'t',NULL,1,10,'wikitext',NULL),"
            "(101,14,'Category:Cats',0,0,0.5,'t',NULL,1,10,'wikitext',NULL),"
            "(102,0,'Feline',1,0,0.5,'t',NULL,1,10,'wikitext',NULL);\n"
        )
        pages = list(parse_pages_dump(_stream(data)))
        assert pages[0].page_id == 100 and pages[0].title == "Cat"
        assert not pages[0].is_redirect
        assert pages[1].namespace == 14  # passed through; alignment filters
        assert pages[2].is_redirect

    def test_configurable_columns_for_old_schema(self):
        # Old layout: (id, ns, title, restrictions, counter, is_redirect, ...)
        data = "INSERT INTO `page` VALUES (7,0,'Old_style','',3,1,0);\n"
        (page,) = parse_pages_dump(_stream(data), PageColumns(is_redirect=5))
        assert page.title == "Old style"
        assert page.is_redirect

    def test_short_tuple_tallied(self):
        data = "INSERT INTO `page` VALUES (7,0);\n"
        tally = ParseTally()
        assert list(parse_pages_dump(_stream(data), tally=tally)) == []
        assert tally.malformed == 1


# Strategy for titles: anything printable minus underscores (MediaWiki encodes
# spaces as underscores, so round-tripping a literal underscore is undefined).
_title_text = st.text(
    alphabet=st.characters(
        codec="utf-8", exclude_characters="_", exclude_categories=("Cs",)
    ),
    min_size=0,
    max_size=40,
)

_lang_text = st.text(alphabet="abcdefghij", min_size=1, max_size=3)


class TestRoundTrip:
    @given(
        rows=st.lists(
            st.tuples(st.integers(0, 2**31 - 1), _lang_text, _title_text),
            min_size=0,
            max_size=50,
        )
    )
    @settings(max_examples=75)
    def test_langlinks_round_trip(self, tmp_path_factory, rows):
        path = tmp_path_factory.mktemp("rt") / "ll.sql"
        write_langlinks_dump(path, rows)
        parsed = [(l.from_page_id, l.target_lang, l.target_title) for l in
                  parse_langlinks_dump(path)]
        assert parsed == [(pid, lang, title) for pid, lang, title in rows]

    @given(
        rows=st.lists(
            st.tuples(
                st.integers(0, 2**31 - 1),
                st.integers(0, 15),
                _title_text,
                st.booleans(),
            ),
            min_size=0,
            max_size=50,
        )
    )
    @settings(max_examples=75)
    def test_pages_round_trip(self, tmp_path_factory, rows):
        path = tmp_path_factory.mktemp("rt") / "page.sql"
        write_pages_dump(path, rows)
        parsed = [(p.page_id, p.namespace, p.title, p.is_redirect) for p in
                  parse_pages_dump(path)]
        assert parsed == list(rows)

    def test_adversarial_titles(self, tmp_path):
        rows = [
            (1, "en", "O'Brien"),
            (2, "en", 'He said "hi"'),
            (3, "en", "back\\slash"),
            (4, "en", "tab\there"),
            (5, "en", "new\nline"),
            (6, "en", "percent\\%kept"),
            (7, "en", ""),
            (8, "en", "),(fake),("),
            (9, "en", "INSERT INTO `x` VALUES (1)"),
        ]
        path = tmp_path / "ll.sql"
        write_langlinks_dump(path, rows)
        parsed = [(l.from_page_id, l.target_lang, l.target_title) for l in
                  parse_langlinks_dump(path)]
        assert parsed == rows

    def test_determinism(self, tmp_path):
        rows = [(k, "en", f"Title {k}'s \\ page") for k in range(500)]
        path = tmp_path / "ll.sql"
        write_langlinks_dump(path, rows)
        first = list(parse_langlinks_dump(path))
        second = list(parse_langlinks_dump(path))
        assert first == second


class TestStreamingMemory:
    def _dump_of_size(self, path, target_bytes):
        title = "Some Reasonably Long Article Title With Words " * 3
        rows = [(k, "en", f"{title}{k}") for k in range(2000)]
        written = 0
        with open(path, "w", encoding="utf-8") as f:
            while written < target_bytes:
                tuples = ",".join(
                    f"({pid},'en','{t.replace(' ', '_')}')" for pid, _, t in rows
                )
                stmt = f"INSERT INTO `langlinks` VALUES {tuples};\n"
                f.write(stmt)
                written += len(stmt)
        return written

    @pytest.mark.parametrize(
        "target_bytes",
        [64 * 1024 * 1024]
        + ([1024 * 1024 * 1024] if os.environ.get("XLPACK_BIG_STREAM_TEST") else []),
    )
    def test_peak_memory_bounded(self, tmp_path, target_bytes):
        path = tmp_path / "big.sql"
        self._dump_of_size(path, target_bytes)
        tracemalloc.start()
        count = 0
        for _ in iter_insert_tuples(path):
            count += 1
        _, peak = tracemalloc.get_traced_memory()
        tracemalloc.stop()
        assert count >= 2000
        # Fixed-size buffer: peak stays far below the dump size.
        assert peak < 16 * 1024 * 1024

    def test_value_spanning_chunks(self, tmp_path):
        # A single title larger than the scanner's chunk size.
        big = "word " * 120_000  # ~600 KB > the 256K chunk
        path = tmp_path / "span.sql"
        write_langlinks_dump(path, [(1, "en", big.strip())])
        (link,) = parse_langlinks_dump(path)
        assert link.target_title == big.strip()


class TestExtractedArticles:
    def test_basic_record(self, tmp_path):
        f = tmp_path / "a.jsonl"
        f.write_text('{"id":"5","title":"Cat","text":"a b\\n\\nc"}\n', encoding="utf-8")
        (art,) = read_extracted_articles(f, "en")
        assert (art.page_id, art.title, art.text, art.lang) == (5, "Cat", "a b\n\nc", "en")

    def test_empty_file(self, tmp_path):
        f = tmp_path / "a.jsonl"
        f.write_text("", encoding="utf-8")
        assert list(read_extracted_articles(f, "en")) == []

    def test_directory_order_is_lexicographic(self, tmp_path):
        (tmp_path / "b.jsonl").write_text(
            '{"id":"2","title":"B","text":"b"}\n', encoding="utf-8"
        )
        (tmp_path / "a.jsonl").write_text(
            '{"id":"1","title":"A","text":"a"}\n', encoding="utf-8"
        )
        arts = list(read_extracted_articles(tmp_path, "en"))
        assert [a.page_id for a in arts] == [1, 2]

    def test_bad_lines_tallied(self, tmp_path):
        f = tmp_path / "a.jsonl"
        f.write_text(
            "not json\n"
            '{"id":"1","title":"A"}\n'  # missing text
            '{"id":"x","title":"A","text":"t"}\n'  # non-integer id
            '{"id":"2","title":"B","text":""}\n',  # empty text still yielded
            encoding="utf-8",
        )
        tally = ArticleTally()
        arts = list(read_extracted_articles(f, "en", tally))
        assert [a.page_id for a in arts] == [2]
        assert tally.skipped == 3

    def test_empty_text_yielded(self, tmp_path):
        f = tmp_path / "a.jsonl"
        f.write_text('{"id":"9","title":"T","text":""}\n', encoding="utf-8")
        (art,) = read_extracted_articles(f, "xx")
        assert art.text == ""


def test_generic_dump_writer_values(tmp_path):
    path = tmp_path / "t.sql"
    write_sql_dump(path, "t", [(1, None, "a'b")])
    (row,) = iter_insert_tuples(path)
    assert row == ("1", None, "a'b")
    assert sql_quote("a'b") == "'a\\'b'"
