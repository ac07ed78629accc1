#!/usr/bin/env python3
"""Regenerates tests/fixtures: a 12-turn event stream with CLCE embeddings.

Run from the repository root: python3 tools/make_fixtures.py
"""

import json
import math
import random
import struct
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
FRAME_DIM = 4
SEMANTIC_DIM = 6
HYP_DIM = 8


def write_clce(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = len(rows[0]) if rows else 0
    with open(path, "wb") as f:
        f.write(b"CLCE")
        f.write(struct.pack("<III", 1, len(rows), cols))
        for r in rows:
            f.write(struct.pack("<%df" % cols, *r))


def gaussian_rows(rng, n, dim):
    return [[rng.gauss(0.0, 1.0) for _ in range(dim)] for _ in range(n)]


def unit(v):
    n = math.sqrt(sum(x * x for x in v))
    return [x / n for x in v]


def cosine(a, b):
    return sum(x * y for x, y in zip(unit(a), unit(b)))


# (session offset, [(speaker, dt, transcript, [hypotheses] or None)])
DIALOGUES = [
    (0.0, [
        ("user", 0.0, "Turn on the kitchen lights.",
         ["turn on the kitchen lights", "turn on the kitchen light", "turn off the kitchen lights"]),
        ("agent", 4.0, "The kitchen lights are on.", None),
        ("user", 11.0, "Set a timer for ten minutes.",
         ["set a timer for ten minutes", "set a timer for two minutes", "set the timer for ten minutes"]),
        ("agent", 15.0, "Timer set for ten minutes.", None),
    ]),
    (300.0, [
        ("user", 0.0, "Are there any Italian restaurants nearby?",
         ["are there any italian restaurant near by", "are there any italian restaurants nearby",
          "are there many italian restaurants nearby"]),
        ("agent", 6.0, "Here are three options close to you.", None),
        ("user", 12.0, "Book a table for two at seven tonight.",
         ["book a table for two at seven tonight", "book a table for to at seven tonight",
          "book the table for two at seven tonight"]),
        ("agent", 19.0, "Your table is booked.", None),
    ]),
    (700.0, [
        ("user", 0.0, "What is the weather like tomorrow in Boston?",
         ["what is the weather like tomorrow in austin", "what is the weather like tomorrow in boston",
          "what's the weather like tomorrow in boston"]),
        ("agent", 5.0, "Tomorrow will be sunny and mild.", None),
        ("user", 10.0, "Play some jazz music.",
         ["play some jazz music", "play some jazz musik", "play sum jazz music"]),
        ("agent", 14.0, "Playing jazz.", None),
    ]),
]


def main():
    rng = random.Random(20231016)
    lines = []
    index = 0
    semantic = {}
    for offset, turns in DIALOGUES:
        for speaker, dt, text, hyps in turns:
            eid = "e%02d" % index
            frames = gaussian_rows(rng, 2 + index % 3, FRAME_DIM)
            write_clce(ROOT / "frames" / (eid + ".clce"), frames)
            rec = {
                "event_id": eid,
                "speaker": speaker,
                "timestamp_s": offset + dt,
                "transcript": text,
                "embedding_ref": "frames/%s.clce" % eid,
            }
            if speaker == "user":
                vec = gaussian_rows(rng, 1, SEMANTIC_DIM)
                semantic[eid] = vec[0]
                write_clce(ROOT / "semantic" / (eid + ".clce"), vec)
                write_clce(ROOT / "hyps" / (eid + ".clce"), gaussian_rows(rng, len(hyps), HYP_DIM))
                rec["semantic_ref"] = "semantic/%s.clce" % eid
                rec["hyp_embedding_ref"] = "hyps/%s.clce" % eid
                rec["hyp_transcripts"] = [{"text": h, "score": -float(k)} for k, h in enumerate(hyps)]
            lines.append(rec)
            index += 1

    # Consecutive user turns must not look like repeats of each other.
    users = [r["event_id"] for r in lines if r["speaker"] == "user"]
    for a, b in zip(users, users[1:]):
        assert cosine(semantic[a], semantic[b]) < 0.5, (a, b)

    with open(ROOT / "events.jsonl", "w") as f:
        for rec in lines:
            f.write(json.dumps(rec, sort_keys=True) + "\n")

    config = {
        "seed": 7,
        "in": "events.jsonl",
        "similarity_threshold": 0.9,
        "injection": {"injection_rate": 1.0, "repeat_vs_rephrase_split": 1.0},
        "heads": {"out_dim": HYP_DIM, "hidden_dim": 6, "dropout_rate": 0.1},
        "chunk_size": 3,
        "l_asr": 1.5,
    }
    with open(ROOT / "fixture_config.json", "w") as f:
        json.dump(config, f, indent=2, sort_keys=True)
        f.write("\n")

    (ROOT / "empty.jsonl").write_text("")

    broken = dict(lines[0])
    del broken["timestamp_s"]
    with open(ROOT / "missing_timestamp.jsonl", "w") as f:
        f.write(json.dumps(lines[1], sort_keys=True) + "\n")
        f.write(json.dumps(broken, sort_keys=True) + "\n")
        f.write(json.dumps(lines[2], sort_keys=True) + "\n")

    # Header claims 3x4 but only 10 floats follow.
    path = ROOT / "frames" / "truncated.clce"
    with open(path, "wb") as f:
        f.write(b"CLCE")
        f.write(struct.pack("<III", 1, 3, FRAME_DIM))
        f.write(struct.pack("<10f", *[0.5] * 10))
    bad = dict(lines[0])
    bad["embedding_ref"] = "frames/truncated.clce"
    with open(ROOT / "truncated_ref.jsonl", "w") as f:
        f.write(json.dumps(lines[1], sort_keys=True) + "\n")
        f.write(json.dumps(bad, sort_keys=True) + "\n")

    missing = dict(lines[0])
    missing["embedding_ref"] = "frames/does_not_exist.clce"
    with open(ROOT / "missing_ref.jsonl", "w") as f:
        f.write(json.dumps(missing, sort_keys=True) + "\n")
        f.write(json.dumps(lines[1], sort_keys=True) + "\n")
        f.write(json.dumps(lines[2], sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
