"""Slot and PRB allocation for one TDD frame."""

import json
from pathlib import Path

from .bruteforce import MAX_CANDIDATES, brute_force, search_space
from .lp import export_milp
from .model import (
    MAX_DELAY,
    MAX_QOC,
    MIN_DELAY,
    MIN_DELAY_STABLE,
    SCHEME_LABEL,
    SCHEME_NUMBER,
    SCHEMES,
    AllocationInstance,
    AllocationSolution,
    scheme_name,
)
from .solver import solve
from .validate import Violation, validate


def solution_json(solution: AllocationSolution) -> str:
    return json.dumps(solution.to_dict(), indent=2, sort_keys=True) + "\n"


def write_solution(path, solution: AllocationSolution) -> None:
    Path(path).write_text(solution_json(solution))


def read_solution(path) -> AllocationSolution:
    return AllocationSolution.from_dict(json.loads(Path(path).read_text()))


__all__ = [
    "MAX_CANDIDATES",
    "MAX_DELAY",
    "MAX_QOC",
    "MIN_DELAY",
    "MIN_DELAY_STABLE",
    "SCHEMES",
    "SCHEME_LABEL",
    "SCHEME_NUMBER",
    "AllocationInstance",
    "AllocationSolution",
    "Violation",
    "brute_force",
    "export_milp",
    "read_solution",
    "scheme_name",
    "search_space",
    "solution_json",
    "solve",
    "validate",
    "write_solution",
]
