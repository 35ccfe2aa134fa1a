"""Roster-to-officer matching for the party-connection flags.

Matching is exact on normalized names (NFKC fold, whitespace stripped); no
fuzzy matching, because fuzzy matching invents connections.
"""

from __future__ import annotations

import csv
from pathlib import Path
import unicodedata
from dataclasses import dataclass

import pandas as pd

from ..errors import SchemaViolation

BODIES = ("EC2016", "LegCo2016", "DC2019")
CAMPS = ("EST", "PAN")

_WS = dict.fromkeys(map(ord, " \t 　"), None)


def normalize_name(name):
    """NFKC-normalize, drop all whitespace, casefold latin letters."""
    text = unicodedata.normalize("NFKC", str(name))
    return text.translate(_WS).strip().casefold()


@dataclass(frozen=True)
class RosterMember:
    name: str  # normalized
    body: str
    camp: str


def load_roster(path):
    """Parse roster.csv (name, body, camp) into members, deduplicating later."""
    if not Path(path).exists():
        raise SchemaViolation(path, "file not found")
    members = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ("name", "body", "camp") if reader.fieldnames is None or c not in reader.fieldnames]
        if missing:
            raise SchemaViolation(path, f"missing column(s): {', '.join(missing)}")
        for lineno, row in enumerate(reader, start=2):
            body = (row.get("body") or "").strip()
            camp = (row.get("camp") or "").strip()
            name = normalize_name(row.get("name") or "")
            if not name:
                raise SchemaViolation(path, "empty member name", row=lineno)
            if body not in BODIES:
                raise SchemaViolation(path, f"body must be one of {BODIES}, got {body!r}", row=lineno)
            if camp not in CAMPS:
                raise SchemaViolation(path, f"camp must be one of {CAMPS}, got {camp!r}", row=lineno)
            members.append(RosterMember(name=name, body=body, camp=camp))
    return members


def dedupe_roster(members, path="roster.csv"):
    """Collapse multi-body members into one camp per normalized name.

    A name listed with conflicting camps is a data error, not a judgement
    call for the code.
    """
    camps = {}
    bodies = {}
    for m in members:
        if m.name in camps and camps[m.name] != m.camp:
            raise SchemaViolation(
                path, f"member {m.name!r} listed with conflicting camps"
            )
        camps[m.name] = m.camp
        bodies.setdefault(m.name, []).append(m.body)
    return camps, bodies


def load_officers(path):
    """Parse officers.csv (ticker, officer_name) into per-firm name lists."""
    if not Path(path).exists():
        raise SchemaViolation(path, "file not found")
    officers = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ("ticker", "officer_name") if reader.fieldnames is None or c not in reader.fieldnames]
        if missing:
            raise SchemaViolation(path, f"missing column(s): {', '.join(missing)}")
        for lineno, row in enumerate(reader, start=2):
            ticker = (row.get("ticker") or "").strip()
            name = (row.get("officer_name") or "").strip()
            if not ticker:
                raise SchemaViolation(path, "empty ticker", row=lineno)
            if not name:
                raise SchemaViolation(path, "empty officer name", row=lineno)
            officers.setdefault(ticker, []).append(name)
    return officers


def match_rosters(officers, members):
    """Flag firms whose officers exactly match roster members.

    Returns ``(flags, provenance)``: flags is a DataFrame indexed by ticker
    with 0/1 ``proestablish`` / ``pandemo`` columns (a firm may carry both);
    provenance records every (ticker, officer, body, camp) hit.
    """
    camps, bodies = dedupe_roster(members)
    tickers = sorted(officers)
    records = []
    flags = pd.DataFrame(
        0, index=pd.Index(tickers, name="ticker"), columns=["proestablish", "pandemo"], dtype="int8"
    )
    for ticker in tickers:
        for officer in officers[ticker]:
            key = normalize_name(officer)
            camp = camps.get(key)
            if camp is None:
                continue
            col = "proestablish" if camp == "EST" else "pandemo"
            flags.loc[ticker, col] = 1
            for body in bodies[key]:
                records.append(
                    {"ticker": ticker, "officer_name": officer, "body": body, "camp": camp}
                )
    provenance = pd.DataFrame(records, columns=["ticker", "officer_name", "body", "camp"])
    return flags, provenance
