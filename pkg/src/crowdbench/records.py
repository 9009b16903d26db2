"""Line-delimited JSON step records."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .sim import ContactSet, StepRecord


def record_to_dict(rec: StepRecord) -> dict:
    x, y, th, v, w = (float(a) for a in rec.robot)
    d = {
        "t": float(rec.t),
        "robot": {"x": x, "y": y, "theta": th, "v": v, "w": w},
        "agents": [{"id": int(i), "x": float(p[0]), "y": float(p[1]), "vx": float(q[0]), "vy": float(q[1])}
                   for i, p, q in zip(rec.ids, rec.pos.tolist(), rec.vel.tolist())],
        "contacts": [{"id": int(i), "depth": float(dp), "v_rel": float(vr), "onset": bool(on)}
                     for i, dp, vr, on in zip(rec.contacts.ids, rec.contacts.depth, rec.contacts.v_rel, rec.contacts.onset)],
    }
    if rec.lidar is not None:
        d["lidar"] = rec.lidar.to_dict()
    return d


def record_from_dict(d: dict) -> StepRecord:
    r = d["robot"]
    agents = d["agents"]
    c = d["contacts"]
    contacts = ContactSet(
        np.array([e["id"] for e in c], np.int64),
        np.array([e["depth"] for e in c], float),
        np.zeros((len(c), 2)),
        np.array([e["v_rel"] for e in c], float),
        np.array([e["onset"] for e in c], bool),
    )
    return StepRecord(
        d["t"], (r["x"], r["y"], r["theta"], r["v"], r["w"]),
        np.array([a["id"] for a in agents], np.int64),
        np.array([[a["x"], a["y"]] for a in agents], float).reshape(-1, 2),
        np.array([[a["vx"], a["vy"]] for a in agents], float).reshape(-1, 2),
        contacts, d.get("lidar"),
    )


def dumps(rec: StepRecord) -> str:
    # json emits floats via repr, i.e. the shortest round-trip decimal
    return json.dumps(record_to_dict(rec), separators=(",", ":"))


def write_jsonl(records, path) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        for rec in records:
            fh.write(dumps(rec))
            fh.write("\n")
    return path


def read_jsonl(path) -> list:
    with Path(path).open() as fh:
        return [record_from_dict(json.loads(line)) for line in fh if line.strip()]
