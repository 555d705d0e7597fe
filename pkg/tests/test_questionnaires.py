"""Usability and game-experience questionnaire scoring."""

import math
import random

import numpy as np
import pytest

from twistcoach.questionnaires import (
    GEQ_DIMENSIONS,
    geq_summary,
    load_geq_csv,
    load_geq_map,
    load_sus_csv,
    sus_score,
    sus_summary,
)

# Hand-worked SUS cases. Odd items add (score-1), even items add
# (5-score), and the 0-40 sum is scaled by 2.5.
SUS_CASES = [
    ([3] * 10, 50.0),                          # all-neutral lands exactly at midscale
    ([5, 1] * 5, 100.0),                       # ideal response
    ([1, 5] * 5, 0.0),                         # worst response
    ([4, 2] * 5, 75.0),                        # (3+3)*5 = 30 -> 75
    ([4, 2, 4, 2, 3, 1, 4, 1, 5, 2], 80.0),    # 15 odd + 17 even = 32 -> 80
    ([1] * 10, 50.0),                          # all-1: evens carry it
    ([5] * 10, 50.0),                          # all-5: odds carry it
]


def test_sus_hand_cases():
    # verify the inline arithmetic first, independent of the implementation
    for items, expected in SUS_CASES:
        total = sum(
            (s - 1) if i % 2 == 1 else (5 - s) for i, s in enumerate(items, 1)
        )
        assert total * 2.5 == expected, f"case {items} is miscomputed in the table"
        assert sus_score(items) == expected


def test_sus_all_threes_is_exactly_fifty():
    assert sus_score([3] * 10) == 50.0


def test_sus_rejects_wrong_length():
    with pytest.raises(ValueError, match="exactly 10"):
        sus_score([3] * 9)
    with pytest.raises(ValueError, match="exactly 10"):
        sus_score([3] * 11)


def test_sus_rejects_out_of_range():
    with pytest.raises(ValueError, match="item 4"):
        sus_score([3, 3, 3, 6, 3, 3, 3, 3, 3, 3])
    with pytest.raises(ValueError, match="item 1"):
        sus_score([0] + [3] * 9)
    with pytest.raises(ValueError):
        sus_score([3.5] + [3] * 9)


def test_sus_summary_matches_independent_stats():
    rng = random.Random(7)
    scores = [sus_score([rng.randint(1, 5) for _ in range(10)]) for _ in range(40)]
    s = sus_summary(scores)
    arr = np.array(scores)
    assert s["n"] == 40
    assert s["mean"] == pytest.approx(arr.mean(), abs=1e-12)
    # sample (n-1) standard deviation, computed the long way
    mean = sum(scores) / len(scores)
    var = sum((x - mean) ** 2 for x in scores) / (len(scores) - 1)
    assert s["sd"] == pytest.approx(math.sqrt(var), rel=1e-12)
    assert s["min"] == min(scores)
    assert s["max"] == max(scores)


def test_sus_summary_degenerate_inputs():
    s = sus_summary([72.5])
    assert s["sd"] == 0.0
    assert s["mean"] == 72.5
    with pytest.raises(ValueError):
        sus_summary([])


def test_load_sus_csv(tmp_path):
    p = tmp_path / "sus.csv"
    p.write_text(
        "participant,Q1,Q2,Q3,Q4,Q5,Q6,Q7,Q8,Q9,Q10\n"
        "P1,3,3,3,3,3,3,3,3,3,3\n"
        "P2,5,1,5,1,5,1,5,1,5,1\n",
        encoding="utf-8",
    )
    rows = load_sus_csv(str(p))
    assert rows == [("P1", [3] * 10), ("P2", [5, 1] * 5)]
    assert [sus_score(items) for _, items in rows] == [50.0, 100.0]


def test_load_sus_csv_names_participants_when_column_absent(tmp_path):
    p = tmp_path / "sus.csv"
    p.write_text(
        ",".join(f"Q{i}" for i in range(1, 11)) + "\n" + ",".join(["3"] * 10) + "\n",
        encoding="utf-8",
    )
    rows = load_sus_csv(str(p))
    assert rows[0][0] == "P1"


def test_load_sus_csv_rejects_missing_columns(tmp_path):
    p = tmp_path / "sus.csv"
    p.write_text("participant,Q1,Q2\nP1,3,3\n", encoding="utf-8")
    with pytest.raises(ValueError, match="missing SUS columns"):
        load_sus_csv(str(p))


def test_load_sus_csv_rejects_bad_values(tmp_path):
    p = tmp_path / "sus.csv"
    p.write_text(
        "participant,Q1,Q2,Q3,Q4,Q5,Q6,Q7,Q8,Q9,Q10\n"
        "P1,3,3,three,3,3,3,3,3,3,3\n",
        encoding="utf-8",
    )
    with pytest.raises(ValueError, match="bad row for P1"):
        load_sus_csv(str(p))


def test_load_sus_csv_rejects_empty(tmp_path):
    p = tmp_path / "sus.csv"
    p.write_text(",".join(f"Q{i}" for i in range(1, 11)) + "\n", encoding="utf-8")
    with pytest.raises(ValueError, match="no responses"):
        load_sus_csv(str(p))


MAP_TEXT = "# two-dimension toy map\nQ1=Competence\nQ2=Competence\nQ3=Tension\n"


def test_load_geq_map(tmp_path):
    p = tmp_path / "map.cfg"
    p.write_text(MAP_TEXT, encoding="utf-8")
    assert load_geq_map(str(p)) == {"Q1": "Competence", "Q2": "Competence", "Q3": "Tension"}


@pytest.mark.parametrize(
    "text,match",
    [
        ("Q1=Charisma\n", "unknown dimension"),
        ("Q1=Competence\nQ1=Tension\n", "mapped twice"),
        ("Q1 Competence\n", "expected Qn=Dimension"),
        ("# only comments\n", "empty map"),
    ],
)
def test_load_geq_map_rejects(tmp_path, text, match):
    p = tmp_path / "map.cfg"
    p.write_text(text, encoding="utf-8")
    with pytest.raises(ValueError, match=match):
        load_geq_map(str(p))


def test_geq_summary_hand_case():
    item_map = {"Q1": "Competence", "Q2": "Competence", "Q3": "Tension"}
    responses = [
        {"Q1": 4, "Q2": 2, "Q3": 1},  # Competence (4+2)/2 = 3.0
        {"Q1": 5, "Q2": 3, "Q3": 2},  # Competence (5+3)/2 = 4.0
    ]
    by_dim, by_item = geq_summary(responses, item_map)
    assert by_dim["Competence"]["mean"] == pytest.approx(3.5)
    assert by_dim["Competence"]["sd"] == pytest.approx(math.sqrt(0.5))
    assert by_dim["Tension"]["mean"] == pytest.approx(1.5)
    assert set(by_dim) == {"Competence", "Tension"}  # unused dimensions omitted
    assert by_item["Q1"]["mean"] == pytest.approx(4.5)
    assert by_item["Q3"]["mean"] == pytest.approx(1.5)
    assert list(by_item) == ["Q1", "Q2", "Q3"]


def test_geq_items_sort_numerically_not_lexically():
    item_map = {f"Q{i}": "Flow" for i in (1, 2, 10, 11)}
    responses = [{f"Q{i}": 3 for i in (1, 2, 10, 11)}]
    _, by_item = geq_summary(responses, item_map)
    assert list(by_item) == ["Q1", "Q2", "Q10", "Q11"]


def test_geq_summary_rejects_unmapped_item():
    with pytest.raises(ValueError, match="unmapped item"):
        geq_summary([{"Q9": 3}], {"Q1": "Flow"})


def test_geq_summary_rejects_out_of_range():
    with pytest.raises(ValueError, match="out of range"):
        geq_summary([{"Q1": 6}], {"Q1": "Flow"})
    with pytest.raises(ValueError, match="no responses"):
        geq_summary([], {"Q1": "Flow"})


def test_load_geq_csv(tmp_path):
    item_map = {"Q1": "Competence", "Q2": "Tension"}
    p = tmp_path / "geq.csv"
    p.write_text("participant,Q1,Q2\nP1,4,2\nP2,5,1\n", encoding="utf-8")
    rows = load_geq_csv(str(p), item_map)
    assert rows == [("P1", {"Q1": 4, "Q2": 2}), ("P2", {"Q1": 5, "Q2": 1})]


def test_load_geq_csv_rejects_missing_items(tmp_path):
    p = tmp_path / "geq.csv"
    p.write_text("participant,Q1\nP1,4\n", encoding="utf-8")
    with pytest.raises(ValueError, match="missing item columns"):
        load_geq_csv(str(p), {"Q1": "Flow", "Q2": "Flow"})


def test_dimension_names_are_the_published_six():
    assert GEQ_DIMENSIONS == (
        "Competence", "Immersion", "Flow", "PositiveAffect",
        "NegativeAffect", "Tension",
    )
