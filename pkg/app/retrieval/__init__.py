from app.retrieval.hamming import (
    code_to_hex,
    hamming_distance,
    hamming_distances,
    hex_to_code,
    pack_bits,
    popcount64,
    unpack_bits,
)
from app.retrieval.index import (
    GroupedIndex,
    HashTable,
    QueryResult,
    build_index,
    query_category_aware,
    rank_semantic,
    read_index,
    write_index,
    write_query_results,
)
from app.retrieval.saliency import saliency_map, write_pgm

__all__ = [
    "GroupedIndex",
    "HashTable",
    "QueryResult",
    "build_index",
    "code_to_hex",
    "hamming_distance",
    "hamming_distances",
    "hex_to_code",
    "pack_bits",
    "popcount64",
    "query_category_aware",
    "rank_semantic",
    "read_index",
    "saliency_map",
    "unpack_bits",
    "write_index",
    "write_pgm",
    "write_query_results",
]
