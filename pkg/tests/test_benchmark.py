import math

import numpy as np
import pytest
from oracles import brute_force_measures

from viewsub.benchmark import (
    ClaParseError,
    Classification,
    DistanceTable,
    default_grid,
    evaluate_measures,
    format_report,
    parse_cla,
    query_measures,
    sweep,
)
from viewsub.pose import Category
from viewsub.retrieval import preprocess_database_model, query_from_descriptor

MINIMAL = """PSB 1
2 3

cat 0 2
1
2
dog 0 1
3
"""


class TestParseCla:
    def test_minimal(self):
        c = parse_cla(MINIMAL)
        assert c.classes == {"cat": ["1", "2"], "dog": ["3"]}
        assert c.class_of("2") == "cat"
        assert c.class_of("m3") == "dog"
        assert c.class_of("9") is None

    def test_hierarchy_flattened(self):
        text = "PSB 1\n3 2\nanimal 0 0\ncat animal 1\n1\ndog animal 1\n2\n"
        c = parse_cla(text)
        assert set(c.classes) == {"cat", "dog"}

    def test_count_mismatch(self):
        with pytest.raises(ClaParseError):
            parse_cla(MINIMAL.replace("cat 0 2", "cat 0 3"))

    def test_model_total_mismatch(self):
        with pytest.raises(ClaParseError, match="declares 4"):
            parse_cla(MINIMAL.replace("2 3", "2 4"))

    @pytest.mark.parametrize("header", ["", "PSB 2\n", "XYZ 1\n"])
    def test_bad_header(self, header):
        with pytest.raises(ClaParseError, match="line 1"):
            parse_cla(header + "1 1\na 0 1\n1\n")

    def test_duplicate_model(self):
        with pytest.raises(ClaParseError, match="two classes"):
            parse_cla("PSB 1\n2 2\na 0 1\n1\nb 0 1\n1\n")


class TestQueryMeasures:
    def test_perfect(self):
        assert query_measures([True, True, True, False, False], 3) == (1.0, 1.0, 1.0, 1.0)

    def test_dcg_example(self):
        _, ft, st, dcg = query_measures([True, False, True, False], 2)
        assert dcg == pytest.approx(0.8155, abs=1e-4)
        assert ft == 0.5 and st == 1.0

    def test_nothing_in_top_2k(self):
        nn, ft, st, _ = query_measures([False] * 6 + [True], 2)
        assert (nn, ft, st) == (0.0, 0.0, 0.0)

    def test_singleton(self):
        nn, ft, st, dcg = query_measures([True, False], 0)
        assert nn == 1.0 and math.isnan(ft) and math.isnan(st) and math.isnan(dcg)


def _random_config(rng):
    n = int(rng.integers(4, 25))
    n_cls = int(rng.integers(1, 5))
    classes = {f"m{i}": f"c{rng.integers(n_cls)}" for i in range(n)}
    ranked = {}
    for q in classes:
        others = [m for m in classes if m != q]
        ranked[q] = [others[i] for i in rng.permutation(len(others))]
    return classes, ranked


class TestEvaluate:
    def test_matches_brute_force(self, rng):
        for _ in range(20):
            classes, ranked = _random_config(rng)
            if all(sum(c == classes[q] for c in classes.values()) == 1 for q in classes):
                continue
            cla = Classification.from_pairs(classes.items())
            got = evaluate_measures(ranked, cla).as_tuple()
            assert got == brute_force_measures(ranked, classes)
            assert all(0 <= x <= 1 for x in got)

    def test_singletons_nn_only(self):
        classes = {"a": "x", "b": "x", "c": "y"}
        ranked = {"a": ["b", "c"], "b": ["c", "a"], "c": ["a", "b"]}
        m = evaluate_measures(ranked, Classification.from_pairs(classes.items()))
        assert m.nn == pytest.approx(1 / 3)
        assert m.ft == pytest.approx(0.5)

    def test_unknown_query(self):
        with pytest.raises(KeyError):
            evaluate_measures({"zz": []}, Classification.from_pairs([("a", "x")]))


class TestSweep:
    def test_tf_properties(self, toy_db, toy_cla):
        rows = sweep(toy_db, None, "tf", default_grid(8), toy_cla)
        counts = [float(r.extra) for r in rows]
        assert all(a >= b for a, b in zip(counts, counts[1:]))
        assert counts[-1] == 0.0
        table = DistanceTable.build([query_from_descriptor(d) for d in toy_db], toy_db)
        baseline = np.where(table.self_mask, np.inf, table.features)
        ranked = {q: [toy_db[j].id for j in sorted(range(len(toy_db)), key=lambda j: (baseline[i, j], toy_db[j].id))
                      if not table.self_mask[i, j]]
                  for i, q in enumerate(table.query_ids)}
        assert rows[-1].measures == evaluate_measures(ranked, toy_cla)

    def test_tc_sweep(self, toy_test, toy_pca, toy_cla):
        db = [preprocess_database_model(m, toy_pca, 0.4, mid, n_views=18) for mid, _, m in toy_test[::3]]
        cla = Classification.from_pairs([(d.id, toy_cla.class_of(d.id)) for d in db])
        rows = sweep(db, None, "tc", [0.0, 0.4, 2.0], cla)
        assert rows[0].extra == f"0/{len(db)}"
        assert rows[-1].extra == f"{len(db)}/0"

    def test_tc_needs_eighteen_views(self, toy_db, toy_cla):
        assert any(d.category == Category.ELONGATED for d in toy_db)
        with pytest.raises(ValueError):
            sweep(toy_db, None, "tc", [0.0], toy_cla)

    def test_unknown_parameter(self, toy_db, toy_cla):
        with pytest.raises(ValueError):
            sweep(toy_db, None, "tx", [0.0], toy_cla)

    def test_report_format(self, toy_db, toy_cla):
        text = format_report(sweep(toy_db, None, "tf", [0.4], toy_cla))
        head, row = text.splitlines()
        assert head == "param,NN,FT,ST,DCG,extra"
        fields = row.split(",")
        assert fields[0] == "0.4000" and len(fields) == 6
        assert all(0 <= float(x) <= 100 for x in fields[1:5])
