"""Command-line behavior: load/query flows, flags, exit codes, TSV shape,
and explain output stability."""

import pytest

from bitopt.cli import EXIT_IO, EXIT_OK, EXIT_REJECTED, EXIT_UNSUPPORTED, main

from conftest import EX, MOVIE_QUERY, MOVIES_NT, Q1_TEXT, SEINFELD_NT


@pytest.fixture()
def store_dir(tmp_path):
    data = tmp_path / "fixture.nt"
    data.write_text(SEINFELD_NT)
    directory = tmp_path / "store"
    assert main(["load", str(directory), str(data)]) == EXIT_OK
    return directory


def write_query(tmp_path, text, name="query.rq"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestLoad:
    def test_counts_reported(self, tmp_path, capsys):
        data = tmp_path / "d.nt"
        data.write_text(SEINFELD_NT)
        assert main(["load", str(tmp_path / "s"), str(data)]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith("8 triples, 3 predicates")

    def test_missing_file(self, tmp_path):
        assert main(["load", str(tmp_path / "s"), str(tmp_path / "nope.nt")]) == EXIT_IO

    def test_refuses_nonempty_without_force(self, tmp_path, store_dir):
        data = tmp_path / "fixture.nt"
        assert main(["load", str(store_dir), str(data)]) == EXIT_IO
        assert main(["load", str(store_dir), str(data), "--force"]) == EXIT_OK

    def test_parse_error_exit(self, tmp_path):
        bad = tmp_path / "bad.nt"
        bad.write_text("this is not a triple\n")
        assert main(["load", str(tmp_path / "s"), str(bad)]) == EXIT_IO


class TestQuery:
    def test_q1_tsv(self, tmp_path, store_dir, capsys):
        qpath = write_query(tmp_path, Q1_TEXT)
        assert main(["query", str(store_dir), qpath]) == EXIT_OK
        out = capsys.readouterr().out
        lines = out.splitlines()
        assert lines[0] == "?friend\t?sitcom"
        assert lines[1:] == [
            f"<{EX}Julia>\t<{EX}Seinfeld>",
            f"<{EX}Larry>\t",
        ]

    def test_byte_identical_across_runs(self, tmp_path, store_dir, capsys):
        qpath = write_query(tmp_path, Q1_TEXT)
        main(["query", str(store_dir), qpath])
        first = capsys.readouterr().out
        main(["query", str(store_dir), qpath])
        assert capsys.readouterr().out == first

    def test_explain_mentions_classification(self, tmp_path, store_dir, capsys):
        qpath = write_query(tmp_path, Q1_TEXT)
        assert main(["query", str(store_dir), qpath, "--explain"]) == EXIT_OK
        err = capsys.readouterr().err
        assert "nb_required=false" in err
        assert "explain-format=1" in err
        assert "T2 ⋉ T1 over {?friend}" in err

    def test_oracle_flag_matches_engine(self, tmp_path, store_dir, capsys):
        qpath = write_query(tmp_path, Q1_TEXT)
        main(["query", str(store_dir), qpath])
        engine_out = capsys.readouterr().out
        main(["query", str(store_dir), qpath, "--oracle"])
        oracle_out = capsys.readouterr().out
        assert sorted(engine_out.splitlines()) == sorted(oracle_out.splitlines())

    def test_variable_predicate_unsupported(self, tmp_path, store_dir, capsys):
        qpath = write_query(tmp_path, "SELECT ?p WHERE { :Julia ?p :Seinfeld }")
        assert main(["query", str(store_dir), qpath]) == EXIT_UNSUPPORTED
        assert "unsupported-by-index" in capsys.readouterr().err
        assert main(["query", str(store_dir), qpath, "--oracle"]) == EXIT_OK

    def test_disconnected_rejected(self, tmp_path, store_dir, capsys):
        text = "SELECT ?a ?b WHERE { :Jerry :hasFriend ?a . :Seinfeld :location ?b }"
        qpath = write_query(tmp_path, text)
        assert main(["query", str(store_dir), qpath]) == EXIT_REJECTED
        assert main(["query", str(store_dir), qpath, "--oracle"]) == EXIT_OK

    def test_syntax_error_rejected(self, tmp_path, store_dir):
        qpath = write_query(tmp_path, "SELECT ?x WHERE { ?x :p }")
        assert main(["query", str(store_dir), qpath]) == EXIT_REJECTED

    def test_unsafe_order_requires_no_prune(self, tmp_path, store_dir):
        qpath = write_query(tmp_path, Q1_TEXT)
        assert main(["query", str(store_dir), qpath, "--unsafe-order"]) == EXIT_IO

    def test_debug_flags_reproduce_unpruned_rows(self, tmp_path, store_dir, capsys):
        qpath = write_query(tmp_path, Q1_TEXT)
        args = ["query", str(store_dir), qpath, "--no-prune", "--unsafe-order",
                "--nullify", "off", "--best-match", "off"]
        assert main(args) == EXIT_OK
        out = capsys.readouterr().out
        assert len(out.strip().split("\n")) == 6  # header + Res1's five rows
        assert f"<{EX}Veep>" in out

    def test_empty_result_is_success(self, tmp_path, store_dir, capsys):
        qpath = write_query(tmp_path, "SELECT ?x WHERE { :NoSuch :hasFriend ?x }")
        assert main(["query", str(store_dir), qpath]) == EXIT_OK
        out = capsys.readouterr().out
        assert out == "?x\n"

    def test_env_var_default_store(self, tmp_path, store_dir, capsys, monkeypatch):
        monkeypatch.setenv("BITOPT_STORE", str(store_dir))
        qpath = write_query(tmp_path, Q1_TEXT)
        assert main(["query", qpath]) == EXIT_OK

    def test_output_file(self, tmp_path, store_dir):
        qpath = write_query(tmp_path, Q1_TEXT)
        target = tmp_path / "out.tsv"
        assert main(["query", str(store_dir), qpath, "-o", str(target)]) == EXIT_OK
        assert target.read_text().startswith("?friend\t?sitcom\n")

    def test_distinct_query_via_cli(self, tmp_path, capsys):
        data = tmp_path / "m.nt"
        data.write_text(MOVIES_NT)
        directory = tmp_path / "movies"
        assert main(["load", str(directory), str(data)]) == EXIT_OK
        capsys.readouterr()
        qpath = write_query(tmp_path, MOVIE_QUERY, "movies.rq")
        assert main(["query", str(directory), qpath, "--explain"]) == EXIT_OK
        captured = capsys.readouterr()
        assert captured.out.count("UmaThurman") == 1
        assert "distinct.path=bmm-bgp" in captured.err
