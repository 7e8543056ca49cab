"""PSB classification files, retrieval measures and threshold sweeps."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .pose import Category
from .retrieval import (
    MAX_RATIO_DISTANCE,
    RankedEntry,
    feature_distance,
    order_entries,
    query_from_descriptor,
    ratio_distance,
    recategorize,
)

log = logging.getLogger(__name__)


class ClaParseError(ValueError):
    pass


@dataclass
class Classification:
    classes: dict[str, list[str]] = field(default_factory=dict)
    model_class: dict[str, str] = field(default_factory=dict)

    def class_of(self, model_id: str) -> str | None:
        """Leaf class of a model; mesh names like ``m123`` resolve to PSB id ``123``."""
        if model_id in self.model_class:
            return self.model_class[model_id]
        if model_id[:1] == "m" and model_id[1:].isdigit():
            return self.model_class.get(model_id[1:])
        return None

    def class_size(self, name: str) -> int:
        return len(self.classes[name])

    @classmethod
    def from_pairs(cls, pairs) -> "Classification":
        out = cls()
        for model_id, name in pairs:
            out.classes.setdefault(name, []).append(model_id)
            out.model_class[model_id] = name
        return out


def parse_cla(text: str) -> Classification:
    """Parse a PSB ``.cla`` file, flattening the hierarchy to leaf classes."""
    lines = [(n, ln.split()) for n, ln in enumerate(text.splitlines(), 1) if ln.strip()]
    if not lines or lines[0][1][:2] != ["PSB", "1"]:
        raise ClaParseError("line 1: expected header 'PSB 1'")
    if len(lines) < 2 or len(lines[1][1]) != 2:
        raise ClaParseError("line 2: expected '<numClasses> <numModels>'")
    try:
        n_classes, n_models = (int(x) for x in lines[1][1])
    except ValueError:
        raise ClaParseError("line 2: counts must be integers") from None

    out = Classification()
    pos = 2
    for _ in range(n_classes):
        if pos >= len(lines):
            raise ClaParseError(f"expected {n_classes} classes, found {len(out.classes)}")
        lineno, toks = lines[pos]
        if len(toks) != 3:
            raise ClaParseError(f"line {lineno}: expected '<name> <parent> <count>'")
        name, _parent, count = toks
        try:
            count = int(count)
        except ValueError:
            raise ClaParseError(f"line {lineno}: bad model count") from None
        pos += 1
        ids = []
        for _ in range(count):
            if pos >= len(lines) or len(lines[pos][1]) != 1:
                raise ClaParseError(f"line {lineno}: class {name!r} declares {count} models, found {len(ids)}")
            ids.append(lines[pos][1][0])
            pos += 1
        if count:
            if name in out.classes:
                raise ClaParseError(f"line {lineno}: duplicate class {name!r}")
            out.classes[name] = ids
            for i in ids:
                if i in out.model_class:
                    raise ClaParseError(f"line {lineno}: model {i} listed in two classes")
                out.model_class[i] = name
    if pos != len(lines):
        raise ClaParseError(f"line {lines[pos][0]}: unexpected trailing content")
    if len(out.model_class) != n_models:
        raise ClaParseError(f"header declares {n_models} models, found {len(out.model_class)}")
    return out


@dataclass(frozen=True)
class Measures:
    nn: float
    ft: float
    st: float
    dcg: float

    def as_tuple(self):
        return (self.nn, self.ft, self.st, self.dcg)


def _discount(pos: int) -> float:
    return 1.0 if pos == 1 else 1.0 / math.log2(pos)


def query_measures(relevant: list[bool], k: int) -> tuple[float, float, float, float]:
    """NN, FT, ST, DCG of one ranked relevance list with ``k`` relevant items.

    Sums are correctly rounded (``math.fsum``) so results do not depend on
    summation order.
    """
    rel = [bool(r) for r in relevant]
    nn = 1.0 if rel and rel[0] else 0.0
    if k == 0:
        return nn, math.nan, math.nan, math.nan
    ft = sum(rel[:k]) / k
    st = min(sum(rel[: 2 * k]) / k, 1.0)
    gain = math.fsum(_discount(p) for p, r in enumerate(rel, start=1) if r)
    ideal = math.fsum(_discount(p) for p in range(1, k + 1))
    return nn, ft, st, gain / ideal


def evaluate_measures(ranked: dict[str, list[str]], classification: Classification,
                      per_query: bool = False):
    """Average NN / FT / ST / DCG over queries.

    ``ranked`` maps each query id to its ranked database ids (query excluded).
    Queries from singleton classes count for NN only.
    """
    nn, rest = [], []
    rows = {}
    for qid, ids in ranked.items():
        cls = classification.class_of(qid)
        if cls is None:
            raise KeyError(f"query {qid!r} is not in the classification")
        k = classification.class_size(cls) - 1
        rel = [classification.class_of(i) == cls for i in ids]
        m = query_measures(rel, k)
        rows[qid] = m
        nn.append(m[0])
        if k == 0:
            log.warning("query %s is alone in class %s; skipped for FT/ST/DCG", qid, cls)
        else:
            rest.append(m[1:])
    if not nn:
        raise ValueError("no queries to evaluate")
    cols = [math.fsum(c) / len(c) for c in zip(*rest)] if rest else [math.nan] * 3
    out = Measures(math.fsum(nn) / len(nn), *cols)
    return (out, rows) if per_query else out


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass
class DistanceTable:
    """All query/database feature and ratio distances; reusable across t_f values."""

    query_ids: list[str]
    db_ids: list[str]
    features: np.ndarray  # (Q, D)
    ratios: np.ndarray  # (Q, D)
    self_mask: np.ndarray  # (Q, D) bool, query == database entry

    @classmethod
    def build(cls, queries, database) -> "DistanceTable":
        Q, D = len(queries), len(database)
        feats = np.empty((Q, D))
        ratios = np.empty((Q, D))
        mask = np.zeros((Q, D), dtype=bool)
        for a, q in enumerate(queries):
            for b, d in enumerate(database):
                ratios[a, b] = ratio_distance(q, d)
                mask[a, b] = q.id is not None and q.id == d.id
                feats[a, b] = np.inf if mask[a, b] else feature_distance(q, d)
        return cls([q.id for q in queries], [d.id for d in database], feats, ratios, mask)

    def rankings(self, t_f: float) -> tuple[dict[str, list[str]], float]:
        """Ranked ids per query (self excluded) and the mean filtered count."""
        out = {}
        filtered_counts = []
        for a, qid in enumerate(self.query_ids):
            entries = []
            n_filtered = 0
            for b, did in enumerate(self.db_ids):
                if self.self_mask[a, b]:
                    continue
                rd = float(self.ratios[a, b])
                if rd > t_f:
                    n_filtered += 1
                    entries.append(RankedEntry(did, None, rd, True))
                else:
                    entries.append(RankedEntry(did, float(self.features[a, b]), rd, False))
            out[qid] = [e.id for e in order_entries(entries)]
            filtered_counts.append(n_filtered)
        return out, float(np.mean(filtered_counts))


@dataclass(frozen=True)
class SweepRow:
    value: float
    measures: Measures
    extra: str


def default_grid(n: int = 15) -> np.ndarray:
    return np.linspace(0.0, MAX_RATIO_DISTANCE, n)


def sweep(database, queries, parameter: str, grid, classification: Classification,
          t_f: float = 0.4, t_c: float = 0.4) -> list[SweepRow]:
    """Retrieval measures over a grid of filtering or categorization thresholds.

    ``queries=None`` means leave-one-out over the database. For a t_c sweep
    every model that turns spherical somewhere on the grid must carry 18 views.
    """
    if queries is None:
        queries = [query_from_descriptor(d) for d in database]
    rows = []
    if parameter == "tf":
        table = DistanceTable.build(queries, database)
        for value in grid:
            ranked, n_filtered = table.rankings(float(value))
            rows.append(SweepRow(float(value), evaluate_measures(ranked, classification), f"{n_filtered:.1f}"))
    elif parameter == "tc":
        for value in grid:
            db = [recategorize(d, float(value)) for d in database]
            qs = [recategorize(q, float(value)) for q in queries]
            ranked, _ = DistanceTable.build(qs, db).rankings(t_f)
            n_el = sum(d.category == Category.ELONGATED for d in db)
            rows.append(SweepRow(float(value), evaluate_measures(ranked, classification), f"{n_el}/{len(db) - n_el}"))
    else:
        raise ValueError(f"unknown sweep parameter {parameter!r}; use 'tf' or 'tc'")
    return rows


def format_report(rows: list[SweepRow]) -> str:
    lines = ["param,NN,FT,ST,DCG,extra"]
    for r in rows:
        pct = ",".join(f"{100 * x:.1f}" for x in r.measures.as_tuple())
        lines.append(f"{r.value:.4f},{pct},{r.extra}")
    return "\n".join(lines) + "\n"
