"""Code files: one record per image.

``id c b q <c hex codes joined by ,> <c probabilities joined by ,> <semantic hex or ->``
Hex codes put feature 0 in the most significant bit.
"""
from __future__ import annotations
from pathlib import Path
from typing import List

import numpy as np

from app.core.errors import RecordError, ValidationFailure
from app.model.hashcode import CodeBundle
from app.retrieval.hamming import code_to_hex, hex_to_code


def format_bundle(bundle: CodeBundle) -> str:
    codes = ",".join(code_to_hex(row) for row in bundle.category_codes)
    probs = ",".join(repr(float(v)) for v in bundle.p)
    semantic = "-" if bundle.semantic_code is None else code_to_hex(bundle.semantic_code)
    return f"{bundle.image_id} {bundle.categories} {bundle.bits} {bundle.semantic_bits} {codes} {probs} {semantic}"


def parse_bundle(line: str, record: int, line_no: int | None = None) -> CodeBundle:
    fields = line.split()
    if len(fields) != 7:
        raise RecordError(f"expected 7 fields, found {len(fields)}", record=record, line=line_no)
    try:
        image_id, c, b, q = (int(v) for v in fields[:4])
        hexes = fields[4].split(",")
        probs = [float(v) for v in fields[5].split(",")]
        if len(hexes) != c or len(probs) != c:
            raise ValueError(f"expected {c} codes and probabilities")
        codes = np.stack([hex_to_code(h, b) for h in hexes])
        semantic = None
        if fields[6] != "-":
            semantic = hex_to_code(fields[6], q)
        elif q:
            raise ValueError(f"q={q} but no semantic code present")
    except (ValueError, ValidationFailure) as e:
        raise RecordError(str(e), record=record, line=line_no) from e
    return CodeBundle(image_id=image_id, category_codes=codes, p=np.array(probs), semantic_code=semantic)


def write_codes(path: Path, bundles: List[CodeBundle]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="ascii", newline="\n") as f:
        for bundle in bundles:
            f.write(format_bundle(bundle) + "\n")
    return path


def read_codes(path: Path) -> List[CodeBundle]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"code file not found: {path}")
    bundles = []
    with open(path, "r", encoding="ascii") as f:
        for line_no, line in enumerate(f, start=1):
            if line.strip():
                bundles.append(parse_bundle(line, record=len(bundles), line_no=line_no))
    return bundles
