"""Persistent artifacts of the lab: episode logs (JSON Lines), questionnaire
records, per-condition metrics (CSV), and the aggregate results table.

An episode file holds one or more episodes, each a header line, exactly
episode-length step lines, and a footer line. Headers embed the environment
config hash and a header checksum so stale configs and tampered metadata are
both detectable.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path


class SchemaError(ValueError):
    pass


class MissingCell(ValueError):
    def __init__(self, cells: list[tuple]):
        self.cells = cells
        super().__init__("table grid is missing cells: " + ", ".join(map(str, cells)))


# ---------------------------------------------------------------------------
# Episode records


def _header_checksum(header: dict) -> str:
    doc = {k: v for k, v in header.items() if k != "checksum"}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode("utf-8")).hexdigest()


@dataclass
class EpisodeRecord:
    header: dict
    steps: list[dict]
    footer: dict

    def validate(self) -> None:
        h = self.header
        for key in ("config_hash", "seed", "task", "robot_profile", "policy_id",
                    "biomech_mode", "human_source", "episode_steps", "checksum"):
            if key not in h:
                raise SchemaError(f"episode header missing {key!r}")
        if h["checksum"] != _header_checksum(h):
            raise SchemaError("episode header checksum mismatch")
        n = int(h["episode_steps"])
        if len(self.steps) != n:
            raise SchemaError(f"expected {n} step rows, found {len(self.steps)}")
        total = 0.0
        for i, row in enumerate(self.steps):
            for key in ("t", "obs", "action", "reward", "force", "events"):
                if key not in row:
                    raise SchemaError(f"step {i} missing {key!r}")
            if row["t"] != i:
                raise SchemaError(f"step {i} has t={row['t']}")
            total += float(row["reward"])
        if "cumulative_reward" not in self.footer or "success" not in self.footer:
            raise SchemaError("footer missing cumulative_reward or success")
        if abs(total - float(self.footer["cumulative_reward"])) > 1e-9:
            raise SchemaError("footer cumulative_reward does not equal the row sum")


def make_header(config_hash: str, seed, task: str, robot_profile: str, policy_id: str,
                biomech_mode: str, human_source: str, episode_steps: int,
                extra: dict | None = None) -> dict:
    header = {
        "kind": "header",
        "config_hash": config_hash,
        "seed": seed,
        "task": task,
        "robot_profile": robot_profile,
        "policy_id": policy_id,
        "biomech_mode": biomech_mode,
        "human_source": human_source,
        "episode_steps": episode_steps,
    }
    if extra:
        header.update(extra)
    header["checksum"] = _header_checksum(header)
    return header


def _ensure_parent(path) -> None:
    parent = Path(path).parent
    if parent != Path("."):
        parent.mkdir(parents=True, exist_ok=True)


def write_episodes(path, records: list[EpisodeRecord], append: bool = False) -> None:
    mode = "a" if append else "w"
    _ensure_parent(path)
    with open(path, mode, encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec.header) + "\n")
            for row in rec.steps:
                f.write(json.dumps({"kind": "step", **row}) + "\n")
            f.write(json.dumps({"kind": "footer", **rec.footer}) + "\n")


def load_episodes(path) -> list[EpisodeRecord]:
    """Parse and validate every episode in a JSONL file."""
    records: list[EpisodeRecord] = []
    header: dict | None = None
    steps: list[dict] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        kind = obj.get("kind")
        if kind == "header":
            if header is not None:
                raise SchemaError(f"{path}:{lineno}: header before previous footer")
            header, steps = obj, []
        elif kind == "step":
            if header is None:
                raise SchemaError(f"{path}:{lineno}: step row outside an episode")
            steps.append(obj)
        elif kind == "footer":
            if header is None:
                raise SchemaError(f"{path}:{lineno}: footer without header")
            rec = EpisodeRecord(header, steps, obj)
            rec.validate()
            records.append(rec)
            header, steps = None, []
        else:
            raise SchemaError(f"{path}:{lineno}: unknown row kind {kind!r}")
    if header is not None:
        raise SchemaError(f"{path}: unterminated episode (no footer)")
    if not records:
        raise SchemaError(f"{path}: no episodes found")
    return records


# ---------------------------------------------------------------------------
# Questionnaires

QUESTION_KEYS = ("L1", "L2", "L3", "L4")


@dataclass(frozen=True)
class QuestionnaireRecord:
    session_id: str
    trial_id: str
    responses: dict

    def __post_init__(self):
        for key in QUESTION_KEYS:
            v = self.responses.get(key)
            if not isinstance(v, int) or not (1 <= v <= 7):
                raise SchemaError(f"questionnaire response {key} must be an integer in 1..7, got {v!r}")
        extra = set(self.responses) - set(QUESTION_KEYS)
        if extra:
            raise SchemaError(f"unexpected questionnaire keys: {sorted(extra)}")


def append_questionnaire(path, rec: QuestionnaireRecord) -> None:
    _ensure_parent(path)
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(asdict(rec)) + "\n")


def load_questionnaires(path) -> list[QuestionnaireRecord]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            obj = json.loads(line)
            out.append(QuestionnaireRecord(obj["session_id"], obj["trial_id"],
                                           {k: int(v) for k, v in obj["responses"].items()}))
    return out


# ---------------------------------------------------------------------------
# Metrics rows (long-format CSV)

METRICS_FIELDS = ("task", "robot_profile", "policy_id", "episodes", "mean_reward", "success_rate")


@dataclass(frozen=True)
class MetricsRow:
    task: str
    robot_profile: str
    policy_id: str
    episodes: int
    mean_reward: float
    success_rate: float


def save_metrics_csv(path, rows: list[MetricsRow], append: bool = False) -> None:
    _ensure_parent(path)
    exists = append and Path(path).exists() and Path(path).stat().st_size > 0
    with open(path, "a" if append else "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        if not exists:
            w.writerow(METRICS_FIELDS)
        for r in rows:
            w.writerow([r.task, r.robot_profile, r.policy_id, r.episodes,
                        repr(r.mean_reward), repr(r.success_rate)])


def load_metrics_csv(path) -> list[MetricsRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        missing = set(METRICS_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise SchemaError(f"{path}: metrics CSV missing columns {sorted(missing)}")
        for rec in reader:
            rows.append(MetricsRow(rec["task"], rec["robot_profile"], rec["policy_id"],
                                   int(rec["episodes"]), float(rec["mean_reward"]),
                                   float(rec["success_rate"])))
    return rows


# ---------------------------------------------------------------------------
# Results table

LAYOUTS = ("original-vs-sim", "original-vs-revised")


@dataclass
class ResultsTable:
    layout: str
    conditions: list[str]                      # column keys (policy ids)
    cells: dict                                # (task, robot, condition) -> MetricsRow

    def row_keys(self) -> list[tuple[str, str]]:
        return sorted({(t, r) for (t, r, _) in self.cells})

    def to_csv(self, path) -> None:
        _ensure_parent(path)
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            head = ["task", "robot_profile"]
            for c in self.conditions:
                head += [f"{c}/reward", f"{c}/success"]
            w.writerow(head)
            for task, robot in self.row_keys():
                row = [task, robot]
                for c in self.conditions:
                    m = self.cells[(task, robot, c)]
                    row += [repr(m.mean_reward), repr(m.success_rate)]
                w.writerow(row)
            avg = ["average_success", ""]
            for c in self.conditions:
                rates = [self.cells[(t, r, c)].success_rate for t, r in self.row_keys()]
                avg += ["", repr(sum(rates) / len(rates))]
            w.writerow(avg)

    def to_text(self) -> str:
        conds = self.conditions
        header = ["task", "robot"] + conds
        body = []
        for task, robot in self.row_keys():
            cells = []
            for c in conds:
                m = self.cells[(task, robot, c)]
                cells.append(f"{m.mean_reward:.2f} ({m.success_rate * 100.0:.0f}%)")
            body.append([task, robot] + cells)
        avg_cells = []
        for c in conds:
            rates = [self.cells[(t, r, c)].success_rate for t, r in self.row_keys()]
            avg_cells.append(f"({100.0 * sum(rates) / len(rates):.0f}%)")
        body.append(["average success", ""] + avg_cells)
        widths = [max(len(str(row[i])) for row in [header] + body) for i in range(len(header))]
        lines = []
        for row in [header] + body:
            lines.append("  ".join(str(v).ljust(w) for v, w in zip(row, widths)).rstrip())
        lines.insert(1, "-" * len(lines[0]))
        return "\n".join(lines) + "\n"


def make_table(rows: list[MetricsRow], layout: str = "original-vs-revised") -> ResultsTable:
    """Arrange metrics rows on a (task x robot) grid with one column pair per
    policy condition. Every combination implied by the rows must be present."""
    if layout not in LAYOUTS:
        raise ValueError(f"unknown table layout: {layout!r} (expected one of {LAYOUTS})")
    conditions = sorted({r.policy_id for r in rows})
    tasks = sorted({r.task for r in rows})
    robots = sorted({r.robot_profile for r in rows})
    cells = {}
    for r in rows:
        cells[(r.task, r.robot_profile, r.policy_id)] = r
    missing = [(t, rb, c) for t in tasks for rb in robots for c in conditions
               if (t, rb, c) not in cells]
    if missing:
        raise MissingCell(missing)
    return ResultsTable(layout=layout, conditions=conditions, cells=cells)


def load_table_csv(path) -> dict:
    """Read back a table CSV into {(task, robot): {condition: (reward, success)}}
    plus the average row, losslessly (floats were written with repr)."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        head = next(reader)
        conds = []
        for name in head[2:]:
            base, _, kind = name.rpartition("/")
            if kind == "reward":
                conds.append(base)
        grid: dict = {"cells": {}, "average_success": {}, "conditions": conds}
        for row in reader:
            if row[0] == "average_success":
                for i, c in enumerate(conds):
                    grid["average_success"][c] = float(row[3 + 2 * i])
                continue
            task, robot = row[0], row[1]
            for i, c in enumerate(conds):
                grid["cells"][(task, robot, c)] = (float(row[2 + 2 * i]), float(row[3 + 2 * i]))
    return grid
