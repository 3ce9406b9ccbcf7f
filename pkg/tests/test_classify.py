from itertools import product
from pathlib import Path

import pytest

from pervadia.classify import (
    BASE_FACTS,
    COLUMNS,
    TechProfile,
    bundled_profiles,
    classify,
    derive,
    load_profiles,
    render_csv,
    render_table,
)


def _profile(name="p", **facts):
    base = {fact: False for fact in BASE_FACTS}
    base.update(facts)
    return TechProfile(name=name, **base)


def _all_true(name="all"):
    return _profile(name, **{fact: True for fact in BASE_FACTS})


def test_all_true_profile_saturates():
    derived = derive(_all_true())
    assert all(derived.columns[c] for c in COLUMNS)
    assert classify(_all_true()).passed


def test_reference_rows():
    gdd, traveur, pervasive = bundled_profiles()
    assert derive(gdd).row_cells() == ["−", "Y", "−", "Y", "−", "−", "Y", "Y", "Y"]
    assert derive(traveur).row_cells() == ["−", "Y", "Y", "Y", "−", "−", "Y", "Y", "Y"]
    assert derive(pervasive).row_cells() == ["Y", "Y", "−", "Y", "Y", "Y", "Y", "Y", "Y"]


def test_reference_notations():
    gdd, traveur, pervasive = bundled_profiles()
    assert classify(gdd).notation == "N ⊨ VT[1T,A+,I] ∧ VS[1S]"
    assert classify(traveur).notation == "N ⊨ VT[1T,A+,I]"
    assert classify(pervasive).notation == "N ⊨ VS[1S]"


def test_pass_iff_no_failures():
    for profile in (_all_true(), *bundled_profiles()):
        verdict = classify(profile)
        assert verdict.passed == (not verdict.failing)


def test_dependency_soundness_exhaustive():
    """Sweep all 2^13 base-fact profiles: no derived flag without prerequisites."""
    for bits in product([False, True], repeat=len(BASE_FACTS)):
        profile = _profile(**dict(zip(BASE_FACTS, bits)))
        derived = derive(profile)
        c = derived.columns
        if c["1T"]:
            assert profile.VT and profile.shared_time
        if c["1S"]:
            assert profile.VS and profile.one_shard and profile.shared_space
        if c["A+"]:
            assert profile.has_agents and profile.VT
        if c["I"]:
            assert profile.has_interaction and c["A+"] and profile.one_shard
            assert profile.shared_time and (profile.VT or profile.ST)
        if c["nZ"]:
            assert profile.non_pausable and profile.Rt
        if c["P"]:
            assert profile.wP or profile.dP


def test_monotonicity_exhaustive():
    """Flipping any base fact false->true never turns a column Y->minus."""
    for bits in product([False, True], repeat=len(BASE_FACTS)):
        profile = _profile(**dict(zip(BASE_FACTS, bits)))
        before = derive(profile).columns
        for i, fact in enumerate(BASE_FACTS):
            if bits[i]:
                continue
            flipped = dict(zip(BASE_FACTS, bits))
            flipped[fact] = True
            after = derive(_profile(**flipped)).columns
            for column in COLUMNS:
                assert not (before[column] and not after[column]), (fact, column)


def test_render_table_reference_rows():
    table = render_table(bundled_profiles())
    lines = table.splitlines()
    assert lines[0].endswith("1T Rt 1S 1Sh A+ I nZ P Av | ∀p:∧")
    assert lines[1] == "the GDD           − Y − Y − − Y Y Y | N"
    assert lines[2] == "Traveur           − Y Y Y − − Y Y Y | N"
    assert lines[3] == "pervasive engine  Y Y − Y Y Y Y Y Y | N"


def test_render_table_empty():
    table = render_table([])
    assert table.splitlines() == ["technology  1T Rt 1S 1Sh A+ I nZ P Av | ∀p:∧"]


def test_render_csv_matches_derive():
    csv_text = render_csv(bundled_profiles())
    rows = [line.split(",") for line in csv_text.strip().splitlines()]
    assert rows[0][:4] == ["technology", "1T", "Rt", "1S"]
    for profile, row in zip(bundled_profiles(), rows[1:]):
        assert row[1:10] == derive(profile).row_cells()


def test_load_profiles_roundtrip():
    text = (Path(__file__).parent.parent / "src/pervadia/scenarios/profiles.json").read_text()
    profiles = load_profiles(text)
    assert [p.name for p in profiles] == ["the GDD", "Traveur", "pervasive engine"]
    for loaded, bundled in zip(profiles, bundled_profiles()):
        assert loaded == bundled


def test_load_profiles_rejects_incomplete():
    with pytest.raises(ValueError):
        load_profiles('[{"name": "x", "VT": true}]')
    with pytest.raises(ValueError):
        load_profiles('{"name": "x"}')
