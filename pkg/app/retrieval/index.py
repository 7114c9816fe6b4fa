"""Category-aware retrieval over c per-category hash tables.

A database image's j-th code enters table j only when its probability p_j is
at least the threshold; a query keeps group j under the same predicate. Each
table keeps its codes keyed by exact value (identical-code hits are a dict
lookup) plus a packed matrix for exhaustive Hamming scans.
"""
from __future__ import annotations
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from app.core.errors import RecordError, ShapeError, ValidationFailure
from app.model.hashcode import CodeBundle
from app.retrieval.hamming import code_to_hex, hamming_distances, hex_to_code, pack_bits

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.2

Ranking = List[Tuple[int, int]]  # (image id, Hamming distance)


def keeps_category(p_j: float, threshold: float) -> bool:
    return p_j >= threshold


@dataclass
class HashTable:
    bits: int
    buckets: Dict[bytes, List[Tuple[int, float]]] = field(default_factory=dict)
    ids: List[int] = field(default_factory=list)
    probs: List[float] = field(default_factory=list)
    codes: List[np.ndarray] = field(default_factory=list)
    _packed: np.ndarray | None = None

    def insert(self, image_id: int, code: np.ndarray, prob: float) -> None:
        self.buckets.setdefault(code.tobytes(), []).append((image_id, prob))
        self.ids.append(image_id)
        self.probs.append(prob)
        self.codes.append(code)
        self._packed = None

    def __len__(self) -> int:
        return len(self.ids)

    def lookup(self, code: np.ndarray) -> List[Tuple[int, float]]:
        return list(self.buckets.get(np.asarray(code, dtype=np.uint8).tobytes(), []))

    @property
    def packed(self) -> np.ndarray:
        if self._packed is None:
            words = max(1, -(-self.bits // 64))
            self._packed = pack_bits(np.stack(self.codes)) if self.codes else np.zeros((0, words), dtype=np.uint64)
        return self._packed


@dataclass
class GroupedIndex:
    categories: int
    bits: int
    threshold: float
    tables: List[HashTable]

    def entry_counts(self) -> List[int]:
        return [len(t) for t in self.tables]


@dataclass
class QueryResult:
    retained: List[int]
    groups: Dict[int, Ranking]


def rank_by_distance(ids: Sequence[int], distances: np.ndarray, topk: int | None) -> Ranking:
    ids_arr = np.asarray(ids, dtype=np.int64)
    order = np.lexsort((ids_arr, distances))
    if topk is not None:
        order = order[:topk]
    return [(int(ids_arr[i]), int(distances[i])) for i in order]


def build_index(bundles: Sequence[CodeBundle], threshold: float = DEFAULT_THRESHOLD) -> GroupedIndex:
    if not bundles:
        raise ValidationFailure("cannot build an index from zero code bundles")
    c, b = bundles[0].categories, bundles[0].bits
    tables = [HashTable(bits=b) for _ in range(c)]
    seen = set()
    for bundle in bundles:
        if bundle.categories != c or bundle.bits != b:
            raise ShapeError(f"image {bundle.image_id} has {bundle.categories}x{bundle.bits} codes, "
                             f"index expects {c}x{b}")
        if bundle.image_id in seen:
            raise ValidationFailure(f"duplicate image id {bundle.image_id}")
        seen.add(bundle.image_id)
        for j in range(c):
            if keeps_category(float(bundle.p[j]), threshold):
                tables[j].insert(bundle.image_id, np.asarray(bundle.category_codes[j], dtype=np.uint8),
                                 float(bundle.p[j]))
    log.info("Built index with table sizes %s", [len(t) for t in tables], extra={"stage": "INDEX"})
    return GroupedIndex(categories=c, bits=b, threshold=threshold, tables=tables)


def rank_table(index: GroupedIndex, j: int, code: np.ndarray, topk: int | None = None) -> Ranking:
    """Entries of table j ordered by (Hamming distance to ``code``, image id)."""
    table = index.tables[j]
    q = pack_bits(np.asarray(code, dtype=np.uint8))
    return rank_by_distance(table.ids, hamming_distances(q, table.packed), topk)


def query_category_aware(query: CodeBundle, index: GroupedIndex, threshold: float | None = None,
                         topk: int | None = 10) -> QueryResult:
    """Rank every retained group's table by Hamming distance to the query's code for that group."""
    if query.bits != index.bits or query.categories != index.categories:
        raise ShapeError(f"query has {query.categories}x{query.bits} codes, index holds "
                         f"{index.categories}x{index.bits}")
    threshold = index.threshold if threshold is None else threshold
    retained = [j for j in range(index.categories) if keeps_category(float(query.p[j]), threshold)]
    groups = {j: rank_table(index, j, query.category_codes[j], topk) for j in retained}
    return QueryResult(retained=retained, groups=groups)


def rank_semantic(query_code: np.ndarray, db_ids: Sequence[int], db_codes: np.ndarray,
                  topk: int | None = 10) -> Ranking:
    query_code = np.asarray(query_code, dtype=np.uint8)
    if len(db_ids) == 0:
        return []
    db_codes = np.asarray(db_codes, dtype=np.uint8).reshape(len(db_ids), -1)
    if db_codes.shape[1] != query_code.shape[0]:
        raise ShapeError(f"query code has {query_code.shape[0]} bits, database codes have {db_codes.shape[1]}")
    distances = hamming_distances(pack_bits(query_code), pack_bits(db_codes))
    return rank_by_distance(db_ids, distances, topk)


def write_index(path: Path, index: GroupedIndex) -> Path:
    """Header line, then ``table code id probability`` lines sorted by (table, code, id)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    counts = ",".join(str(n) for n in index.entry_counts())
    lines = [f"iah-index 1 c={index.categories} b={index.bits} threshold={index.threshold!r} counts={counts}"]
    for j, table in enumerate(index.tables):
        rows = sorted((code_to_hex(code), image_id, prob)
                      for code, image_id, prob in zip(table.codes, table.ids, table.probs))
        lines.extend(f"{j} {h} {image_id} {prob!r}" for h, image_id, prob in rows)
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def read_index(path: Path) -> GroupedIndex:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"index file not found: {path}")
    lines = path.read_text(encoding="ascii").splitlines()
    if not lines or not lines[0].startswith("iah-index 1 "):
        raise RecordError("missing index header", line=1)
    try:
        header = dict(item.split("=", 1) for item in lines[0].split()[2:])
        c, b = int(header["c"]), int(header["b"])
        threshold = float(header["threshold"])
        counts = [int(n) for n in header["counts"].split(",")]
    except (KeyError, ValueError) as e:
        raise RecordError(f"bad index header: {e}", line=1) from e
    tables = [HashTable(bits=b) for _ in range(c)]
    seen: List[set] = [set() for _ in range(c)]
    for record, line in enumerate(lines[1:]):
        try:
            j_text, h, id_text, prob_text = line.split()
            j, image_id = int(j_text), int(id_text)
            if not 0 <= j < c:
                raise ValueError(f"table {j} outside 0..{c - 1}")
            if image_id in seen[j]:
                raise ValueError(f"duplicate image id {image_id} in table {j}")
            seen[j].add(image_id)
            tables[j].insert(image_id, hex_to_code(h, b), float(prob_text))
        except (ValueError, IndexError) as e:
            raise RecordError(str(e), record=record, line=record + 2) from e
    if [len(t) for t in tables] != counts:
        raise RecordError(f"table sizes {[len(t) for t in tables]} disagree with header counts {counts}")
    return GroupedIndex(categories=c, bits=b, threshold=threshold, tables=tables)


def write_query_results(path: Path, results: Sequence[Tuple[int, QueryResult | Ranking]]) -> Path:
    """``query_id category rank image_id distance`` lines; category is ``-`` for semantic rankings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for query_id, result in results:
        if isinstance(result, QueryResult):
            for j in result.retained:
                for rank, (image_id, dist) in enumerate(result.groups[j], start=1):
                    lines.append(f"{query_id} {j} {rank} {image_id} {dist}")
        else:
            for rank, (image_id, dist) in enumerate(result, start=1):
                lines.append(f"{query_id} - {rank} {image_id} {dist}")
    path.write_text("".join(line + "\n" for line in lines), encoding="ascii")
    return path
