"""Dataset files: one text record per scene plus a JSON manifest.

Record fields, space separated, in fixed order::

    id c flags H W pixels objects proposals

``flags`` is the label vector as a string of 0/1, ``pixels`` the base64 of the
little-endian float32 pixel block (channels x H x W), ``objects`` is
``cat,x1,y1,x2,y2`` items joined by ``;`` and ``proposals`` is
``x1,y1,x2,y2`` items joined by ``;``. An empty list is written as ``-``.
"""
from __future__ import annotations
import base64
import binascii
import hashlib
import json
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.core.config import RunConfig, config_hash
from app.core.errors import RecordError
from app.numerics.rng import SeededRng
from app.synthdata.proposals import generate_proposals
from app.synthdata.scenes import generate_scene
from app.synthdata.types import Proposal, Scene, SceneObject, labels_from_objects


SPLITS = ("train", "database", "query")
MANIFEST_NAME = "manifest.json"
_EMPTY = "-"


class DatasetManifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    categories: int
    height: int
    width: int
    channels: int
    proposals: int
    seed: int
    split_sizes: Dict[str, int]
    content_hashes: Dict[str, str] = {}
    config_hash: str = ""


def split_path(data_dir: Path, split: str) -> Path:
    return Path(data_dir) / f"{split}.txt"


def format_record(scene: Scene) -> str:
    pixels = np.ascontiguousarray(scene.pixels, dtype="<f4")
    flags = "".join(str(int(v)) for v in scene.labels)
    objects = ";".join(f"{o.category},{o.box[0]},{o.box[1]},{o.box[2]},{o.box[3]}" for o in scene.objects)
    proposals = ";".join(f"{p.box[0]},{p.box[1]},{p.box[2]},{p.box[3]}" for p in scene.proposals)
    return " ".join([
        str(scene.id),
        str(scene.num_categories),
        flags,
        str(scene.height),
        str(scene.width),
        base64.b64encode(pixels.tobytes()).decode("ascii"),
        objects or _EMPTY,
        proposals or _EMPTY,
    ])


def _ints(text: str, count: int, what: str) -> List[int]:
    parts = text.split(",")
    if len(parts) != count:
        raise ValueError(f"{what} item '{text}' needs {count} integers")
    return [int(p) for p in parts]


def parse_record(line: str, record: int, line_no: Optional[int] = None) -> Scene:
    fields = line.rstrip("\n").split(" ")
    if len(fields) != 8:
        raise RecordError(f"expected 8 fields, found {len(fields)}", record=record, line=line_no)
    try:
        scene_id = int(fields[0])
        c = int(fields[1])
        flags = fields[2]
        H, W = int(fields[3]), int(fields[4])
        if len(flags) != c or set(flags) - {"0", "1"}:
            raise ValueError(f"label flags '{flags}' do not match c={c}")
        labels = np.array([int(ch) for ch in flags], dtype=np.uint8)
        raw = base64.b64decode(fields[5].encode("ascii"), validate=True)
        plane = H * W * 4
        if plane == 0 or len(raw) % plane != 0 or len(raw) == 0:
            raise ValueError(f"pixel block of {len(raw)} bytes does not fit {H}x{W}")
        pixels = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(len(raw) // plane, H, W)

        objects = []
        if fields[6] != _EMPTY:
            for item in fields[6].split(";"):
                cat, x1, y1, x2, y2 = _ints(item, 5, "object")
                if not 0 <= cat < c:
                    raise ValueError(f"object category {cat} outside 0..{c - 1}")
                objects.append(SceneObject(category=cat, box=(x1, y1, x2, y2)))
        proposals = []
        if fields[7] != _EMPTY:
            for item in fields[7].split(";"):
                proposals.append(Proposal.from_box(tuple(_ints(item, 4, "proposal")), W, H))
    except (ValueError, binascii.Error) as e:
        raise RecordError(str(e), record=record, line=line_no) from e

    if objects and not np.array_equal(labels_from_objects(objects, c), labels):
        raise RecordError("label flags disagree with the object list", record=record, line=line_no)
    return Scene(id=scene_id, pixels=pixels, objects=objects, labels=labels, proposals=proposals)


def write_split(data_dir: Path, split: str, scenes: List[Scene]) -> Path:
    path = split_path(data_dir, split)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="ascii", newline="\n") as f:
        for scene in scenes:
            f.write(format_record(scene))
            f.write("\n")
    return path


def read_split(data_dir: Path, split: str, expected: Optional[int] = None) -> List[Scene]:
    path = split_path(data_dir, split)
    if not path.exists():
        raise FileNotFoundError(f"dataset split not found: {path}")
    scenes: List[Scene] = []
    with open(path, "r", encoding="ascii") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            if not line.endswith("\n"):
                raise RecordError("record is truncated (no line terminator)", record=len(scenes), line=line_no)
            scenes.append(parse_record(line, record=len(scenes), line_no=line_no))
    if expected is not None and len(scenes) != expected:
        raise RecordError(f"{path.name} holds {len(scenes)} records, manifest expects {expected}",
                          record=len(scenes))
    return scenes


def content_hash(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(data_dir: Path, manifest: DatasetManifest) -> Path:
    path = Path(data_dir) / MANIFEST_NAME
    path.write_text(json.dumps(manifest.model_dump(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def read_manifest(data_dir: Path) -> DatasetManifest:
    path = Path(data_dir) / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"dataset manifest not found: {path}")
    try:
        return DatasetManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except ValueError as e:
        raise RecordError(f"{path} is not a valid manifest: {e}") from e


def load_dataset(data_dir: Path, splits=SPLITS) -> Dict[str, List[Scene]]:
    manifest = read_manifest(data_dir)
    out = {}
    for split in splits:
        scenes = read_split(data_dir, split, expected=manifest.split_sizes.get(split))
        expected_hash = manifest.content_hashes.get(split)
        if expected_hash and content_hash(split_path(data_dir, split)) != expected_hash:
            raise RecordError(f"{split_path(data_dir, split).name} content hash differs from the manifest; "
                              "the split was modified after gen-data")
        out[split] = scenes
    return out


def ingest_proposals(scenes: List[Scene], path: Path) -> List[Scene]:
    """Replace each scene's proposals with the boxes of the same-id record in ``path``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"proposal file not found: {path}")
    external: Dict[int, List[Proposal]] = {}
    with open(path, "r", encoding="ascii") as f:
        for line_no, line in enumerate(f, start=1):
            if line.strip():
                rec = parse_record(line, record=len(external), line_no=line_no)
                external[rec.id] = rec.proposals
    for i, scene in enumerate(scenes):
        boxes = external.get(scene.id)
        if not boxes:
            raise RecordError(f"no external proposals for scene id {scene.id}", record=i)
        for p in boxes:
            if p.box[2] > scene.width or p.box[3] > scene.height:
                raise RecordError(f"proposal {p.box} exceeds scene {scene.id}", record=i)
        scene.proposals = list(boxes)
    return scenes


def generate_dataset(cfg: RunConfig) -> Dict[str, List[Scene]]:
    """All three splits; scene ids run consecutively across train, database, query."""
    root = SeededRng(cfg.seed)
    sizes = {"train": cfg.scene.train_size, "database": cfg.scene.database_size, "query": cfg.scene.query_size}
    out: Dict[str, List[Scene]] = {}
    next_id = 0
    for split in SPLITS:
        scenes = []
        for i in range(sizes[split]):
            scene = generate_scene(root.child("scene", split, i), cfg.scene, scene_id=next_id)
            scene.proposals = generate_proposals(
                scene,
                cfg.scene.proposals,
                root.child("proposals", split, i),
                jitter=cfg.scene.jitter,
                copies_per_object=cfg.scene.copies_per_object,
            )
            scenes.append(scene)
            next_id += 1
        out[split] = scenes
    return out


def write_dataset(data_dir: Path, dataset: Dict[str, List[Scene]], cfg: RunConfig) -> DatasetManifest:
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for split, scenes in dataset.items():
        hashes[split] = content_hash(write_split(data_dir, split, scenes))
    proposals = max((len(s.proposals) for ss in dataset.values() for s in ss), default=cfg.scene.proposals)
    manifest = DatasetManifest(
        categories=cfg.scene.categories,
        height=cfg.scene.height,
        width=cfg.scene.width,
        channels=cfg.scene.channels,
        proposals=proposals,
        seed=cfg.seed,
        split_sizes={split: len(scenes) for split, scenes in dataset.items()},
        content_hashes=hashes,
        config_hash=config_hash(cfg),
    )
    write_manifest(data_dir, manifest)
    return manifest
