import logging
from pathlib import Path

from app.commands.base import BaseCommand, CommandResult, RunContext
from app.core.config import RunConfig, config_hash
from app.core.errors import ValidationFailure
from app.core.workflow import Stage
from app.model.checkpoint import checkpoint_hash, save_checkpoint
from app.synthdata.dataset_io import DatasetManifest, read_manifest, read_split
from app.training.trainer import TrainResult, train, train_baseline, write_trace

log = logging.getLogger(__name__)


def check_manifest(manifest: DatasetManifest, cfg: RunConfig) -> None:
    """The dataset must have the image shape and category count the config trains for."""
    expected = {"categories": cfg.scene.categories, "channels": cfg.scene.channels}
    for name, value in expected.items():
        found = getattr(manifest, name)
        if found != value:
            raise ValidationFailure(f"dataset field '{name}' is {found}, config expects {value}")


def trace_path(ckpt: Path) -> Path:
    return ckpt.with_name(ckpt.name + ".trace.csv")


class _TrainCommand(BaseCommand):
    def fit(self, scenes, cfg: RunConfig, run_id: str) -> TrainResult:
        raise NotImplementedError

    def run(self, ctx: RunContext) -> CommandResult:
        data = ctx.path("data")
        out = ctx.path("out")
        extra = ctx.log_extra(self.stage)
        manifest = read_manifest(data)
        check_manifest(manifest, ctx.cfg)
        digest = config_hash(ctx.cfg)
        if manifest.config_hash and manifest.config_hash != digest:
            log.warning("Dataset was generated under config %s, training under %s",
                        manifest.config_hash[:12], digest[:12], extra=extra)
        scenes = read_split(data, "train", expected=manifest.split_sizes.get("train"))
        log.info("Training on %d scenes for %d iterations", len(scenes), ctx.cfg.train.iterations, extra=extra)

        result = self.fit(scenes, ctx.cfg, ctx.run_id)
        save_checkpoint(result.params, out, digest)
        trace = write_trace(ctx.path("trace", required=False) or trace_path(out), result.trace)
        log.info("Saved checkpoint %s (sha256 %s)", out, checkpoint_hash(result.params, digest)[:12], extra=extra)
        key = "ckpt" if self.stage == Stage.TRAIN else "baseline_ckpt"
        artifacts = {key: str(out), f"{key}_trace": str(trace)}
        return CommandResult(self.stage, True, f"checkpoint written to {out}", artifacts)


class TrainCommand(_TrainCommand):
    stage = Stage.TRAIN

    def fit(self, scenes, cfg, run_id):
        return train(scenes, cfg, run_id=run_id)


class TrainBaselineCommand(_TrainCommand):
    stage = Stage.TRAIN_BASELINE

    def fit(self, scenes, cfg, run_id):
        return train_baseline(scenes, cfg, run_id=run_id)
