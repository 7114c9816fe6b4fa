from __future__ import annotations
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List

from app.commands.base import CommandResult, RunContext
from app.commands.registry import CommandRegistry
from app.core.workflow import Stage

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineStep:
    stage: Stage
    options: Dict[str, Any] = field(default_factory=dict)


def default_pipeline(workdir: Path) -> List[PipelineStep]:
    """gen-data, both trainings, then encode, index and evaluate for the model and the baseline."""
    w = Path(workdir)
    data = w / "data"
    steps = [
        PipelineStep(Stage.GEN_DATA, {"out": data}),
        PipelineStep(Stage.TRAIN, {"data": data, "out": w / "model.ckpt"}),
        PipelineStep(Stage.TRAIN_BASELINE, {"data": data, "out": w / "baseline.ckpt"}),
    ]
    for name in ("model", "baseline"):
        codes = w / "codes" / name
        steps += [
            PipelineStep(Stage.ENCODE, {"ckpt": w / f"{name}.ckpt", "data": data, "out_codes": codes}),
            PipelineStep(Stage.INDEX, {"codes": codes, "out": w / f"{name}.index"}),
            PipelineStep(Stage.EVALUATE, {"codes": codes, "data": data, "report": w / "reports" / f"{name}.csv"}),
        ]
    return steps


class PipelineEngine:
    def __init__(self, ctx: RunContext, registry: CommandRegistry | None = None):
        self.ctx = ctx
        self.registry = registry or CommandRegistry.default()
        self.stage = Stage.GEN_DATA
        self.results: List[CommandResult] = []

    def _merge_artifacts(self, updates: dict) -> None:
        self.ctx.artifacts.update(updates)

    def run(self, steps: List[PipelineStep]) -> Dict[str, Any]:
        base_options = dict(self.ctx.options)
        for step in steps:
            self.stage = step.stage
            self.ctx.options = {**base_options, **step.options}
            log.info("Running stage", extra={"run_id": self.ctx.run_id, "stage": step.stage.value})

            result = self.registry.get(step.stage).run(self.ctx)
            self.results.append(result)
            self._merge_artifacts(result.artifacts)

            if not result.ok:
                log.error("Stage failed: %s", result.message,
                          extra={"run_id": self.ctx.run_id, "stage": step.stage.value})
                self.stage = Stage.FAILED
                raise RuntimeError(result.message)
        self.ctx.options = base_options
        self.stage = Stage.DONE
        return self.ctx.artifacts
