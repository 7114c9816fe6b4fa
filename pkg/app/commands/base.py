from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

from app.core.config import RunConfig
from app.core.errors import ValidationFailure
from app.core.workflow import Stage


@dataclass
class CommandResult:
    stage: Stage
    ok: bool
    message: str
    artifacts: Dict[str, Any]


@dataclass
class RunContext:
    """What a command sees: the validated config, its options and the artifacts of earlier stages."""
    cfg: RunConfig
    run_id: str = "-"
    options: Dict[str, Any] = field(default_factory=dict)
    artifacts: Dict[str, Any] = field(default_factory=dict)

    def option(self, name: str, default: Any = None) -> Any:
        value = self.options.get(name)
        return default if value is None else value

    def path(self, name: str, required: bool = True) -> Optional[Path]:
        value = self.options.get(name)
        if value is None:
            value = self.artifacts.get(name)
        if value is None:
            if required:
                raise ValidationFailure(f"missing required option --{name.replace('_', '-')}")
            return None
        return Path(value)

    def log_extra(self, stage: Stage) -> Dict[str, str]:
        return {"run_id": self.run_id, "stage": stage.value}


class BaseCommand:
    stage: Stage

    def run(self, ctx: RunContext) -> CommandResult:
        raise NotImplementedError
