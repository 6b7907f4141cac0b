"""Command-line front end: spec files, reports and the ``gapcert`` entry point."""

from .commands import (
    AnalyzeOptions,
    Problem,
    cmd_analyze,
    cmd_subsets,
    cmd_sweep,
    cmd_verify,
    problem_from_fixture,
    problem_from_spec,
    random_problems,
)
from .main import main
from .report import to_csv, to_json
from .specfile import ChainSpecFile, parse_chain_spec, serialize_chain_spec, subset_indices

__all__ = [
    "AnalyzeOptions",
    "ChainSpecFile",
    "Problem",
    "cmd_analyze",
    "cmd_subsets",
    "cmd_sweep",
    "cmd_verify",
    "main",
    "parse_chain_spec",
    "problem_from_fixture",
    "problem_from_spec",
    "random_problems",
    "serialize_chain_spec",
    "subset_indices",
    "to_csv",
    "to_json",
]
