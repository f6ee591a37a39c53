"""Episode logs, questionnaires, metrics CSVs, and the results table: round
trips, checksum tamper detection, and the loader's state machine."""
import json

import pytest

from caresim.records import (
    EpisodeRecord,
    MetricsRow,
    MissingCell,
    QuestionnaireRecord,
    SchemaError,
    append_questionnaire,
    load_episodes,
    load_metrics_csv,
    load_questionnaires,
    load_table_csv,
    make_header,
    make_table,
    save_metrics_csv,
    write_episodes,
)


def make_record(steps=3, seed=1, reward=0.5, success=False):
    header = make_header("cafe0123", [seed, 0], "feeding", "armA", "pol-a",
                         "fixed", "static", steps)
    rows = [
        {"t": i, "obs": [0.0, 1.0, -2.5], "action": [0.01] * 7, "reward": reward,
         "force": 0.0,
         "events": {"captured": 0, "spilled": 0, "scratched": 0, "wiped": 0}}
        for i in range(steps)
    ]
    footer = {"cumulative_reward": reward * steps, "success": success}
    return EpisodeRecord(header, rows, footer)


# -- episode files -------------------------------------------------------------


def test_episode_round_trip(tmp_path):
    path = tmp_path / "eps.jsonl"
    recs = [make_record(seed=1), make_record(seed=2, reward=-1.25, success=True)]
    write_episodes(path, recs)
    back = load_episodes(path)
    assert len(back) == 2
    for orig, got in zip(recs, back):
        assert got.header == orig.header
        assert got.footer["success"] == orig.footer["success"]
        assert got.footer["cumulative_reward"] == orig.footer["cumulative_reward"]
        assert len(got.steps) == 3
        # loader adds the kind tag to step rows; payload fields must survive
        for a, b in zip(orig.steps, got.steps):
            for key in ("t", "obs", "action", "reward", "force", "events"):
                assert b[key] == a[key]


def test_append_accumulates_episodes(tmp_path):
    path = tmp_path / "eps.jsonl"
    write_episodes(path, [make_record(seed=1)])
    write_episodes(path, [make_record(seed=2), make_record(seed=3)], append=True)
    assert [r.header["seed"] for r in load_episodes(path)] == [[1, 0], [2, 0], [3, 0]]


def test_any_header_field_tamper_is_detected():
    rec = make_record()
    tamperable = [k for k in rec.header if k not in ("kind", "checksum")]
    assert len(tamperable) >= 8
    for key in tamperable:
        bad = EpisodeRecord(dict(rec.header), rec.steps, rec.footer)
        bad.header[key] = "tampered" if not isinstance(rec.header[key], int) else 999
        with pytest.raises(SchemaError):
            bad.validate()
    bad = EpisodeRecord(dict(rec.header), rec.steps, rec.footer)
    bad.header["checksum"] = "0" * 64
    with pytest.raises(SchemaError):
        bad.validate()


def test_footer_reward_mismatch_detected():
    rec = make_record()
    rec.footer["cumulative_reward"] += 1e-6
    with pytest.raises(SchemaError):
        rec.validate()


def test_footer_missing_success_detected():
    rec = make_record()
    del rec.footer["success"]
    with pytest.raises(SchemaError):
        rec.validate()


def test_step_count_and_order_enforced():
    rec = make_record()
    short = EpisodeRecord(rec.header, rec.steps[:-1], rec.footer)
    with pytest.raises(SchemaError):
        short.validate()
    rec.steps[1]["t"] = 5
    with pytest.raises(SchemaError):
        rec.validate()


def test_step_missing_field_detected():
    rec = make_record()
    del rec.steps[2]["force"]
    with pytest.raises(SchemaError):
        rec.validate()


def write_lines(path, lines):
    path.write_text("\n".join(json.dumps(obj) for obj in lines) + "\n")


def test_loader_rejects_malformed_files(tmp_path):
    rec = make_record(steps=1)
    step = {"kind": "step", **rec.steps[0]}
    footer = {"kind": "footer", **rec.footer}

    cases = {
        "double_header.jsonl": [rec.header, rec.header],
        "orphan_step.jsonl": [step],
        "orphan_footer.jsonl": [footer],
        "unknown_kind.jsonl": [{"kind": "banana"}],
        "unterminated.jsonl": [rec.header, step],
    }
    for name, lines in cases.items():
        path = tmp_path / name
        write_lines(path, lines)
        with pytest.raises(SchemaError):
            load_episodes(path)

    bad_json = tmp_path / "bad.jsonl"
    bad_json.write_text("{not json\n")
    with pytest.raises(SchemaError):
        load_episodes(bad_json)

    empty = tmp_path / "empty.jsonl"
    empty.write_text("\n")
    with pytest.raises(SchemaError):
        load_episodes(empty)


def test_loader_skips_blank_lines(tmp_path):
    rec = make_record(steps=1)
    path = tmp_path / "gaps.jsonl"
    path.write_text(
        json.dumps(rec.header) + "\n\n"
        + json.dumps({"kind": "step", **rec.steps[0]}) + "\n\n"
        + json.dumps({"kind": "footer", **rec.footer}) + "\n"
    )
    assert len(load_episodes(path)) == 1


# -- questionnaires ------------------------------------------------------------


def test_questionnaire_round_trip(tmp_path):
    path = tmp_path / "q.jsonl"
    a = QuestionnaireRecord("s1", "t0", {"L1": 7, "L2": 4, "L3": 1, "L4": 5})
    b = QuestionnaireRecord("s1", "t1", {"L1": 2, "L2": 2, "L3": 6, "L4": 3})
    append_questionnaire(path, a)
    append_questionnaire(path, b)
    back = load_questionnaires(path)
    assert back == [a, b]


@pytest.mark.parametrize("responses", [
    {"L1": 1, "L2": 2, "L3": 3},                            # missing key
    {"L1": 0, "L2": 2, "L3": 3, "L4": 4},                   # below scale
    {"L1": 8, "L2": 2, "L3": 3, "L4": 4},                   # above scale
    {"L1": 3.5, "L2": 2, "L3": 3, "L4": 4},                 # not an int
    {"L1": "3", "L2": 2, "L3": 3, "L4": 4},                 # string digit
    {"L1": 1, "L2": 2, "L3": 3, "L4": 4, "L5": 5},          # unknown key
])
def test_questionnaire_rejects_bad_responses(responses):
    with pytest.raises(SchemaError):
        QuestionnaireRecord("s1", "t0", responses)


# -- metrics CSV ---------------------------------------------------------------


def rows_fixture():
    return [
        MetricsRow("feeding", "armA", "pol-a", 100, -118.5703125, 0.25),
        MetricsRow("feeding", "armA", "pol-b", 100, -164.123456789012345, 0.0),
    ]


def test_metrics_round_trip_is_lossless(tmp_path):
    path = tmp_path / "m.csv"
    rows = rows_fixture()
    save_metrics_csv(path, rows)
    back = load_metrics_csv(path)
    assert back == rows  # repr() floats survive the text round trip exactly


def test_metrics_append_writes_header_once(tmp_path):
    path = tmp_path / "m.csv"
    rows = rows_fixture()
    save_metrics_csv(path, rows[:1])
    save_metrics_csv(path, rows[1:], append=True)
    assert load_metrics_csv(path) == rows
    assert path.read_text().count("mean_reward") == 1


def test_metrics_missing_column_rejected(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("task,robot_profile,policy_id\nfeeding,armA,x\n")
    with pytest.raises(SchemaError):
        load_metrics_csv(path)


# -- results table ---------------------------------------------------------------


def grid_rows():
    rows = []
    val = 0.0
    for task in ("feeding", "scratching"):
        for robot in ("armA", "armB"):
            for pol in ("orig", "revised"):
                val += 1.0
                rows.append(MetricsRow(task, robot, pol, 50, -val, val / 100.0))
    return rows


def test_table_round_trip(tmp_path):
    rows = grid_rows()
    table = make_table(rows, layout="original-vs-revised")
    assert table.conditions == ["orig", "revised"]
    assert table.row_keys() == [("feeding", "armA"), ("feeding", "armB"),
                                ("scratching", "armA"), ("scratching", "armB")]
    path = tmp_path / "table.csv"
    table.to_csv(path)
    back = load_table_csv(path)
    assert back["conditions"] == ["orig", "revised"]
    for r in rows:
        reward, success = back["cells"][(r.task, r.robot_profile, r.policy_id)]
        assert reward == r.mean_reward
        assert success == r.success_rate
    for cond in table.conditions:
        rates = [r.success_rate for r in rows if r.policy_id == cond]
        assert back["average_success"][cond] == pytest.approx(sum(rates) / 4, rel=1e-15)


def test_table_text_rendering():
    table = make_table(grid_rows())
    text = table.to_text()
    lines = text.splitlines()
    assert lines[0].startswith("task")
    assert set(lines[1]) == {"-"}
    assert "average success" in lines[-1]
    assert "(25%)" in text or "%" in text


def test_incomplete_grid_raises_missing_cell():
    rows = grid_rows()[:-1]
    with pytest.raises(MissingCell) as exc:
        make_table(rows)
    assert ("scratching", "armB", "revised") in exc.value.cells


def test_unknown_layout_rejected():
    with pytest.raises(ValueError):
        make_table(grid_rows(), layout="original-vs-original")
