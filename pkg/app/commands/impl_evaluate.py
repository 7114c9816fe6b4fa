import logging

from app.commands.base import BaseCommand, CommandResult, RunContext
from app.commands.impl_retrieval import codes_file
from app.core.workflow import Stage
from app.evaluation.protocol import evaluate_all
from app.evaluation.report import report_values, write_report
from app.model.codes_io import read_codes
from app.synthdata.dataset_io import read_manifest, read_split

log = logging.getLogger(__name__)


class EvaluateCommand(BaseCommand):
    """Full metric report from a code directory and the dataset's ground-truth labels."""
    stage = Stage.EVALUATE

    def run(self, ctx: RunContext) -> CommandResult:
        codes = ctx.path("codes")
        data = ctx.path("data")
        extra = ctx.log_extra(self.stage)
        queries = read_codes(codes_file(codes, "query"))
        database = read_codes(codes_file(codes, "database"))
        manifest = read_manifest(data)
        truth = {}
        for split in ("database", "query"):
            for scene in read_split(data, split, expected=manifest.split_sizes.get(split)):
                truth[scene.id] = scene.labels

        ev = ctx.cfg.evaluation
        rows = evaluate_all(queries, database, truth, ev.depths, random_control=ev.random_control,
                            seed=ctx.cfg.seed, threshold=ctx.cfg.retrieval.threshold)
        out = write_report(ctx.path("report"), rows)
        values = report_values(rows)
        log.info("Evaluated %d queries against %d images: map=%s category_map_mean=%.4f", len(queries),
                 len(database), f"{values['map']:.4f}" if "map" in values else "-",
                 values["category_map_mean"], extra=extra)
        return CommandResult(self.stage, True, f"report written to {out}", {"report": str(out)})
