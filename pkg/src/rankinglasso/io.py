"""CSV ingestion and delimited-text output."""

from __future__ import annotations

import csv
import io
from importlib import resources
from pathlib import Path

import numpy as np

from .model import Outcome, Tournament

VENUES = {"home_i": 1, "neutral": 0, "home_j": -1}
OUTCOMES = {"win_i": Outcome.WIN_I, "tie": Outcome.TIE, "win_j": Outcome.WIN_J}
HEADER = ["team_i", "team_j", "venue", "outcome"]


class DataError(ValueError):
    """Malformed match file."""


def parse_tournament(text: str, ties_allowed: bool = False, source: str = "<string>") -> Tournament:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{source}: empty file")
    header = [c.strip() for c in rows[0]]
    if header[:4] != HEADER or len(header) > 5 or (len(header) == 5 and header[4] != "date"):
        raise DataError(f"{source}:1: expected header team_i,team_j,venue,outcome[,date]")
    teams: dict[str, int] = {}
    cols: list[tuple[int, int, int, int]] = []
    for lineno, row in enumerate(rows[1:], start=2):
        cells = [c.strip() for c in row]
        if cells == header:
            raise DataError(f"{source}:{lineno}: duplicate header")
        if len(cells) != len(header):
            raise DataError(f"{source}:{lineno}: expected {len(header)} fields, got {len(cells)}")
        a, b, venue, outcome = cells[:4]
        if not a or not b:
            raise DataError(f"{source}:{lineno}: empty team name")
        if a == b:
            raise DataError(f"{source}:{lineno}: team plays itself")
        if venue not in VENUES:
            raise DataError(f"{source}:{lineno}: unknown venue {venue!r}")
        if outcome not in OUTCOMES:
            raise DataError(f"{source}:{lineno}: unknown outcome {outcome!r}")
        if outcome == "tie" and not ties_allowed:
            raise DataError(f"{source}:{lineno}: tie in a tournament without ties")
        ia = teams.setdefault(a, len(teams))
        ib = teams.setdefault(b, len(teams))
        cols.append((ia, ib, VENUES[venue], int(OUTCOMES[outcome])))
    if not cols:
        raise DataError(f"{source}: no matches")
    i, j, h, y = (np.array(c) for c in zip(*cols))
    return Tournament(tuple(teams), i, j, h, y, ties_allowed)


def load_tournament(path, ties_allowed: bool = False) -> Tournament:
    """Read a match CSV with header ``team_i,team_j,venue,outcome[,date]``.

    Teams are indexed in order of first appearance.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not UTF-8 ({exc})") from exc
    return parse_tournament(text, ties_allowed, source=str(path))


def dump_tournament(t: Tournament) -> str:
    venue_names = {v: k for k, v in VENUES.items()}
    outcome_names = {int(v): k for k, v in OUTCOMES.items()}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for a, b, h, y in zip(t.i, t.j, t.venue, t.outcome):
        w.writerow([t.teams[a], t.teams[b], venue_names[int(h)], outcome_names[int(y)]])
    return buf.getvalue()


def save_tournament(t: Tournament, path) -> None:
    Path(path).write_text(dump_tournament(t), encoding="utf-8")


def fixture_path(name: str) -> Path:
    """Path of a bundled data file, e.g. ``fixture_path("nfl_2010.csv")``."""
    return Path(str(resources.files("rankinglasso") / "data" / name))


def load_nfl_2010() -> Tournament:
    """NFL 2010 regular season: 32 teams, 256 matches, every match at a home field."""
    return load_tournament(fixture_path("nfl_2010.csv"))


def write_tsv(header, rows, out) -> None:
    out.write("\t".join(header) + "\n")
    for row in rows:
        out.write("\t".join(_fmt(x) for x in row) + "\n")


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)
