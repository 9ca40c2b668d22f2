"""The installed console entry point, exercised as a real subprocess."""

import json
import subprocess
import sys

from tabg.fixtures import fixture_path


def run(*args):
    return subprocess.run(
        [sys.executable, "-m", "tabg.cli", *args], capture_output=True, text=True
    )


def test_member_subprocess():
    proc = run("member", str(fixture_path("MENU")), str(fixture_path("MENU_TERM")))
    assert proc.returncode == 0
    assert proc.stdout.startswith("accepted")


def test_stats_json_subprocess():
    proc = run("--json", "stats", str(fixture_path("MENU")), str(fixture_path("MENU_RUN")))
    assert proc.returncode == 0
    payload = json.loads(proc.stdout)
    assert payload["strata"]["4"] == {"H": ["3"], "checked": ["2"], "ring": ["1"]}


def test_input_error_subprocess():
    proc = run("empty", "no-such-file.tabg", "--max-height", "2")
    assert proc.returncode == 3


def test_help_lists_subcommands():
    proc = run("--help")
    for name in ("member", "check-run", "empty", "reduce", "pump", "stats",
                 "union", "intersect", "curry", "hag2tag", "emso-compile", "eqmod"):
        assert name in proc.stdout
