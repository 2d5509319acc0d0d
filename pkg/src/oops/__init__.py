"""Incremental, bias-optimal program search over a small stack language."""

__version__ = "0.1.0"

from .core_state import CodeStore, Halt, TaskTape, UndoJournal
from .driver import Driver, DriverConfig, PhaseReport, parse_config
from .instructions import OpcodeTable
from .interpreter import Machine
from .search import Searcher, enumerate_tokens
from .tasks import HanoiTask, OneTwoTask, TargetTask, make_task, reference_hanoi

__all__ = [
    "CodeStore", "Driver", "DriverConfig", "Halt", "HanoiTask", "Machine", "OneTwoTask",
    "OpcodeTable", "PhaseReport", "Searcher", "TargetTask", "TaskTape", "UndoJournal",
    "enumerate_tokens", "make_task", "parse_config", "reference_hanoi",
]
