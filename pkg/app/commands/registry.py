from dataclasses import dataclass
from typing import Dict

from app.commands.base import BaseCommand
from app.commands.impl_data import GenerateDataCommand
from app.commands.impl_evaluate import EvaluateCommand
from app.commands.impl_retrieval import EncodeCommand, IndexCommand, QueryCommand, SaliencyCommand
from app.commands.impl_train import TrainBaselineCommand, TrainCommand
from app.core.workflow import Stage


@dataclass
class CommandRegistry:
    mapping: Dict[Stage, BaseCommand]

    def get(self, stage: Stage) -> BaseCommand:
        return self.mapping[stage]

    @staticmethod
    def default() -> "CommandRegistry":
        return CommandRegistry(mapping={
            Stage.GEN_DATA: GenerateDataCommand(),
            Stage.TRAIN: TrainCommand(),
            Stage.TRAIN_BASELINE: TrainBaselineCommand(),
            Stage.ENCODE: EncodeCommand(),
            Stage.INDEX: IndexCommand(),
            Stage.QUERY: QueryCommand(),
            Stage.EVALUATE: EvaluateCommand(),
            Stage.SALIENCY: SaliencyCommand(),
        })
