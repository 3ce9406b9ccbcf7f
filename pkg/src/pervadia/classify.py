"""Virtual-world property classification.

Derives the nine derived properties (1T Rt 1S 1Sh A+ I nZ P Av) from base
technology facts via dependency closure, produces pass/fail verdicts with a
failure notation naming the base facts responsible, and renders comparison
tables.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, fields

BASE_FACTS = (
    "VT",            # virtual temporality
    "VS",            # virtual spatiality
    "Rt",            # real-time
    "ST",            # simulated temporality
    "shared_time",
    "shared_space",
    "one_shard",
    "has_agents",
    "has_interaction",
    "non_pausable",
    "wP",            # world persistence
    "dP",            # data persistence
    "Av",            # avatar
)

COLUMNS = ("1T", "Rt", "1S", "1Sh", "A+", "I", "nZ", "P", "Av")

# Base prerequisites of each derived column, in blame order: when a column
# fails, the first false base fact here is reported as the cause.
_COLUMN_PREREQS: dict[str, tuple[str, ...]] = {
    "1T": ("VT", "shared_time"),
    "Rt": ("Rt",),
    "1S": ("VS", "one_shard", "shared_space"),
    "1Sh": ("one_shard",),
    "A+": ("VT", "has_agents"),
    "I": ("VT", "shared_time", "one_shard", "has_agents", "has_interaction"),
    "nZ": ("Rt", "non_pausable"),
    "P": ("wP", "dP"),
    "Av": ("Av",),
}

YES = "Y"
NO = "\u2212"  # minus sign, rendered as the table's "not supported" cell


@dataclass(frozen=True)
class TechProfile:
    """Base facts about a technology; all facts are explicit booleans."""

    name: str
    VT: bool
    VS: bool
    Rt: bool
    ST: bool
    shared_time: bool
    shared_space: bool
    one_shard: bool
    has_agents: bool
    has_interaction: bool
    non_pausable: bool
    wP: bool
    dP: bool
    Av: bool

    def fact(self, name: str) -> bool:
        return bool(getattr(self, name))

    @classmethod
    def from_dict(cls, data: dict) -> TechProfile:
        known = {f.name for f in fields(cls)}
        missing = known - set(data)
        if missing:
            raise ValueError(f"profile missing facts: {sorted(missing)}")
        extra = set(data) - known
        if extra:
            raise ValueError(f"profile has unknown facts: {sorted(extra)}")
        return cls(**data)


@dataclass(frozen=True)
class DerivedProfile:
    """The nine derived columns plus the persistence sub-flags."""

    name: str
    columns: dict[str, bool]
    wP: bool
    dP: bool

    def cell(self, column: str) -> str:
        return YES if self.columns[column] else NO

    def row_cells(self) -> list[str]:
        return [self.cell(c) for c in COLUMNS]


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    failing: list[tuple[str, list[str]]]  # (base fact, columns it invalidates)

    @property
    def notation(self) -> str:
        if self.passed:
            return "Y"
        parts = [f"{base}[{','.join(cols)}]" for base, cols in self.failing]
        return "N \u22a8 " + " \u2227 ".join(parts)


def derive(profile: TechProfile) -> DerivedProfile:
    """Apply the dependency closure: no derived flag without its prerequisites."""
    p = profile
    shared_time_abstraction = p.shared_time and (p.VT or p.ST)
    agents = p.has_agents and p.VT
    columns = {
        "1T": p.VT and p.shared_time,
        "Rt": p.Rt,
        "1S": p.VS and p.one_shard and p.shared_space,
        "1Sh": p.one_shard,
        "A+": agents,
        "I": p.has_interaction and agents and p.one_shard and shared_time_abstraction,
        "nZ": p.non_pausable and p.Rt,
        "P": p.wP or p.dP,
        "Av": p.Av,
    }
    return DerivedProfile(name=p.name, columns=columns, wP=p.wP, dP=p.dP)


def classify(profile: TechProfile) -> Verdict:
    """Pass iff all nine columns hold; otherwise blame failing base facts."""
    derived = derive(profile)
    blamed: dict[str, list[str]] = {}
    for column in COLUMNS:
        if derived.columns[column]:
            continue
        cause = _blame(profile, column)
        blamed.setdefault(cause, []).append(column)
    failing = [(base, blamed[base]) for base in BASE_FACTS if base in blamed]
    return Verdict(name=profile.name, passed=not blamed, failing=failing)


def _blame(profile: TechProfile, column: str) -> str:
    for base in _COLUMN_PREREQS[column]:
        if not profile.fact(base):
            return base
    # Can only happen if the closure and the prereq table disagree.
    raise AssertionError(f"column {column} failed with all prerequisites true")


def render_table(profiles: list[TechProfile]) -> str:
    """Aligned plain-text classification table, one row per technology."""
    name_width = max([len("technology")] + [len(p.name) for p in profiles])
    header = "technology".ljust(name_width) + "  " + " ".join(COLUMNS) + " | \u2200p:\u2227"
    lines = [header]
    for profile in profiles:
        derived = derive(profile)
        verdict = classify(profile)
        cells = " ".join(derived.row_cells())
        lines.append(f"{profile.name.ljust(name_width)}  {cells} | {'Y' if verdict.passed else 'N'}")
    return "\n".join(lines) + "\n"


def render_csv(profiles: list[TechProfile]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["technology", *COLUMNS, "all", "notation"])
    for profile in profiles:
        derived = derive(profile)
        verdict = classify(profile)
        writer.writerow(
            [profile.name, *derived.row_cells(), "Y" if verdict.passed else "N", verdict.notation]
        )
    return buf.getvalue()


def load_profiles(text: str) -> list[TechProfile]:
    """Parse profiles from a JSON document: a list of fact objects."""
    data = json.loads(text)
    if not isinstance(data, list):
        raise ValueError("profiles file must contain a JSON list")
    return [TechProfile.from_dict(item) for item in data]


def bundled_profiles() -> list[TechProfile]:
    """The three reference architectures used throughout the comparison."""
    gdd = TechProfile(
        name="the GDD",
        VT=False, VS=False, Rt=True, ST=True,
        shared_time=True, shared_space=False, one_shard=True,
        has_agents=False, has_interaction=True, non_pausable=True,
        wP=True, dP=True, Av=True,
    )
    traveur = TechProfile(
        name="Traveur",
        VT=False, VS=True, Rt=True, ST=True,
        shared_time=True, shared_space=True, one_shard=True,
        has_agents=False, has_interaction=True, non_pausable=True,
        wP=True, dP=True, Av=True,
    )
    pervasive = TechProfile(
        name="pervasive engine",
        VT=True, VS=False, Rt=True, ST=True,
        shared_time=True, shared_space=True, one_shard=True,
        has_agents=True, has_interaction=True, non_pausable=True,
        wP=True, dP=True, Av=True,
    )
    return [gdd, traveur, pervasive]
