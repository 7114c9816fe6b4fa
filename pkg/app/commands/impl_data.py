import logging

from app.commands.base import BaseCommand, CommandResult, RunContext
from app.core.config import config_hash
from app.core.workflow import Stage
from app.synthdata.dataset_io import generate_dataset, ingest_proposals, write_dataset

log = logging.getLogger(__name__)


class GenerateDataCommand(BaseCommand):
    stage = Stage.GEN_DATA

    def run(self, ctx: RunContext) -> CommandResult:
        out = ctx.path("out")
        cfg = ctx.cfg
        extra = ctx.log_extra(self.stage)
        log.info("Generating %d/%d/%d scenes of %dx%d with c=%d", cfg.scene.train_size,
                 cfg.scene.database_size, cfg.scene.query_size, cfg.scene.height, cfg.scene.width,
                 cfg.scene.categories, extra=extra)
        dataset = generate_dataset(cfg)

        external = ctx.path("external_proposals", required=False)
        if external is not None:
            log.info("Replacing proposals with boxes from %s", external, extra=extra)
            for scenes in dataset.values():
                ingest_proposals(scenes, external)

        manifest = write_dataset(out, dataset, cfg)
        log.info("Wrote dataset to %s (config %s)", out, config_hash(cfg)[:12], extra=extra)
        return CommandResult(self.stage, True, f"dataset written to {out}",
                             {"data": str(out), "split_sizes": manifest.split_sizes})
