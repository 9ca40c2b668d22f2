"""Bundled example automata, terms and runs."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .automata import Automaton, Run
from .fileformat import parse_automaton, parse_hag, parse_run
from .terms import Term, parse_term
from .unranked import HedgeAutomaton, UnrankedTerm, parse_unranked

_FILES = {
    "FTT_TAB": "ftt_tab.tabg",
    "FTT_TAG": "ftt_tag.tabg",
    "MENU": "menu.tabg",
    "MENU_BTTA": "menu_btta.tabg",
    "KEYLIST": "keylist.tabg",
    "CURRY_DEMO": "curry_demo.utrm",
    "HAG_DEMO": "hag_demo.hag",
    "MENU_TERM": "menu_term.trm",
    "MENU_RUN": "menu_run.run",
}


def fixture_text(name: str) -> str:
    return (resources.files("tabg") / "fixtures" / _FILES[name]).read_text()


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("tabg") / "fixtures" / _FILES[name]))


def fixtures() -> dict[str, Path]:
    """Name -> path of every bundled file."""
    return {name: fixture_path(name) for name in _FILES}


def load_automaton(name: str) -> Automaton:
    return parse_automaton(fixture_text(name))


def load_hag(name: str) -> HedgeAutomaton:
    return parse_hag(fixture_text(name))


def menu_automaton() -> Automaton:
    return load_automaton("MENU")


def menu_term() -> Term:
    return parse_term(fixture_text("MENU_TERM"))


def menu_run() -> Run:
    return parse_run(fixture_text("MENU_RUN"), menu_automaton())


def curry_demo_term() -> UnrankedTerm:
    return parse_unranked(fixture_text("CURRY_DEMO"))
