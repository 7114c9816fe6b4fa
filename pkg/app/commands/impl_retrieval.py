import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Sequence

from app.commands.base import BaseCommand, CommandResult, RunContext
from app.core.config import settings
from app.core.errors import CheckpointError, ValidationFailure
from app.core.workflow import Stage
from app.model.checkpoint import load_checkpoint
from app.model.codes_io import read_codes, write_codes
from app.model.hashcode import CodeBundle
from app.model.network import InstanceAwareNet, build_model
from app.retrieval.index import (
    build_index,
    query_category_aware,
    rank_semantic,
    read_index,
    write_index,
    write_query_results,
)
from app.retrieval.saliency import saliency_map, write_pgm
from app.synthdata.dataset_io import SPLITS, read_manifest, read_split
from app.synthdata.types import Scene

log = logging.getLogger(__name__)

ENCODED_SPLITS = ("database", "query")


def codes_file(path: Path, split: str) -> Path:
    """A code file, or the ``<split>.codes`` file inside a code directory."""
    path = Path(path)
    return path / f"{split}.codes" if path.is_dir() else path


def load_model(ckpt: Path, categories: int | None = None):
    params, header = load_checkpoint(ckpt)
    if categories is not None and params.shapes.categories != categories:
        raise CheckpointError(f"checkpoint field 'c' is {params.shapes.categories}, dataset has {categories}")
    return build_model(params), header


def encode_scenes(model, scenes: Sequence[Scene], workers: int | None = None) -> List[CodeBundle]:
    """Encode scenes in parallel; the result keeps the input order."""
    workers = max(1, workers or settings.encode_workers)
    if workers == 1:
        return [model.encode(s) for s in scenes]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(model.encode, scenes))


class EncodeCommand(BaseCommand):
    stage = Stage.ENCODE

    def run(self, ctx: RunContext) -> CommandResult:
        data = ctx.path("data")
        out = ctx.path("out_codes")
        extra = ctx.log_extra(self.stage)
        manifest = read_manifest(data)
        model, header = load_model(ctx.path("ckpt"), manifest.categories)
        out.mkdir(parents=True, exist_ok=True)
        artifacts: Dict[str, str] = {"codes": str(out)}
        for split in ENCODED_SPLITS:
            scenes = read_split(data, split, expected=manifest.split_sizes.get(split))
            bundles = encode_scenes(model, scenes)
            path = write_codes(out / f"{split}.codes", bundles)
            artifacts[f"{split}_codes"] = str(path)
            log.info("Encoded %d %s scenes with a %s model", len(bundles), split, header["kind"], extra=extra)
        return CommandResult(self.stage, True, f"codes written to {out}", artifacts)


class IndexCommand(BaseCommand):
    stage = Stage.INDEX

    def run(self, ctx: RunContext) -> CommandResult:
        bundles = read_codes(codes_file(ctx.path("codes"), "database"))
        threshold = ctx.option("threshold", ctx.cfg.retrieval.threshold)
        index = build_index(bundles, threshold)
        out = write_index(ctx.path("out"), index)
        log.info("Indexed %d images, threshold %s, table sizes %s", len(bundles), threshold,
                 index.entry_counts(), extra=ctx.log_extra(self.stage))
        return CommandResult(self.stage, True, f"index written to {out}", {"index": str(out)})


class QueryCommand(BaseCommand):
    stage = Stage.QUERY

    def _queries(self, ctx: RunContext) -> List[CodeBundle]:
        ckpt = ctx.path("ckpt", required=False)
        if ckpt is not None:
            data = ctx.path("data")
            manifest = read_manifest(data)
            model, _ = load_model(ckpt, manifest.categories)
            return encode_scenes(model, read_split(data, "query", expected=manifest.split_sizes.get("query")))
        return read_codes(codes_file(ctx.path("codes"), "query"))

    def run(self, ctx: RunContext) -> CommandResult:
        if ctx.option("ckpt") is not None and ctx.option("codes") is not None:
            raise ValidationFailure("query takes either --ckpt or --codes, not both")
        queries = self._queries(ctx)
        topk = ctx.option("topk", ctx.cfg.retrieval.topk)
        extra = ctx.log_extra(self.stage)
        results = []
        if ctx.option("semantic", False):
            db_source = ctx.path("db_codes", required=False) or ctx.path("codes")
            database = read_codes(codes_file(db_source, "database"))
            if any(b.semantic_code is None for b in database):
                raise ValidationFailure("semantic ranking needs database codes with a semantic code")
            db_ids = [b.image_id for b in database]
            db_codes = [b.semantic_code for b in database]
            for q in queries:
                if q.semantic_code is None:
                    raise ValidationFailure(f"query image {q.image_id} has no semantic code")
                results.append((q.image_id, rank_semantic(q.semantic_code, db_ids, db_codes, topk)))
        else:
            index = read_index(ctx.path("index"))
            threshold = ctx.option("threshold", index.threshold)
            for q in queries:
                results.append((q.image_id, query_category_aware(q, index, threshold, topk)))
        out = write_query_results(ctx.path("out"), results)
        log.info("Answered %d queries (top %d)", len(results), topk, extra=extra)
        return CommandResult(self.stage, True, f"results written to {out}", {"results": str(out)})


class SaliencyCommand(BaseCommand):
    stage = Stage.SALIENCY

    def run(self, ctx: RunContext) -> CommandResult:
        data = ctx.path("data")
        image_id = ctx.option("image_id")
        category = ctx.option("category")
        if image_id is None or category is None:
            raise ValidationFailure("saliency needs --image-id and --category")
        manifest = read_manifest(data)
        model, _ = load_model(ctx.path("ckpt"), manifest.categories)
        if not isinstance(model, InstanceAwareNet):
            raise ValidationFailure("saliency maps need an instance-aware checkpoint")
        scene = None
        for split in SPLITS:
            scene = next((s for s in read_split(data, split) if s.id == image_id), None)
            if scene is not None:
                break
        if scene is None:
            raise ValidationFailure(f"image id {image_id} is not in {data}")
        fp = model.forward(scene.pixels, scene.boxes_normalized())
        grid = saliency_map(scene, scene.proposals, fp.P, category)
        out = write_pgm(ctx.path("out"), grid)
        log.info("Saliency of image %d for category %d (p=%.3f) written to %s", image_id, category,
                 fp.p[category], out, extra=ctx.log_extra(self.stage))
        return CommandResult(self.stage, True, f"saliency map written to {out}", {"saliency": str(out)})
