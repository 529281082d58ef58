"""Scenario description language: model, parser, renderer and runner."""

from .model import (Event, KetRef, Query, ScenarioBuilder, ScenarioModel,
                    StateRef, randomize_completions)
from .parser import parse_query, parse_scenario, tokenize
from .render import render_scenario, render_state
from .runner import (EXPECT_TOL, FORCED_NOTE, QueryResult, Report, Runner,
                     format_number, run)

__all__ = [
    "Event", "KetRef", "Query", "ScenarioBuilder", "ScenarioModel", "StateRef",
    "randomize_completions",
    "parse_query", "parse_scenario", "tokenize", "render_scenario", "render_state",
    "EXPECT_TOL", "FORCED_NOTE", "QueryResult", "Report", "Runner",
    "format_number", "run",
]
