from app.commands.base import BaseCommand, CommandResult, RunContext
from app.commands.registry import CommandRegistry

__all__ = ["BaseCommand", "CommandRegistry", "CommandResult", "RunContext"]
