#!/usr/bin/env python3
"""Stub evaluator for protocol tests: content-hashed Bernoulli scoring.

Reads the batch request from stdin and emits one outcome line per example.
Scores derive from a hash of the artifact content and the example id, so
byte-identical artifacts produce identical fingerprints. An artifact whose
agent.json carries {"crash_batch": true} makes the whole batch exit nonzero.
"""
import hashlib
import json
import sys
from pathlib import Path

request = json.load(sys.stdin)
spec = json.loads((Path(request["artifact_dir"]) / "agent.json").read_text())
if spec.get("crash_batch"):
    sys.stderr.write("crash requested by artifact\n")
    sys.exit(1)
content = json.dumps(spec, sort_keys=True)
for example in request["examples"]:
    digest = hashlib.sha256(f"{content}|{example['example_id']}".encode()).digest()
    draw = int.from_bytes(digest[:8], "big") / 2**64
    score = 1.0 if draw < spec["true_accuracy"] else 0.0
    print(
        json.dumps(
            {
                "example_id": example["example_id"],
                "score": score,
                "fingerprint": str(int(score)),
                "diagnostics": f"draw {draw:.6f}",
                "agent_stdout": f"checked {example['example_id']}",
            }
        )
    )
