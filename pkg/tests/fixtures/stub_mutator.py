#!/usr/bin/env python3
"""Stub mutator for protocol tests.

Create copies the session winner's artifact and nudges its accuracy up,
except for two deliberate specials keyed off the population size: the third
agent is born with a crash flag (its evaluation batches exit nonzero) and
the fourth is a byte-identical clone of the winner. Refine only appends to
reasoning.md so clone artifacts stay byte-identical through deep focus.
"""
import json
import shutil
import sys
from pathlib import Path

session = Path(sys.argv[1])
phase = sys.argv[2]

if phase == "create":
    standings = json.loads((session / "elo_standings.json").read_text())
    winner = standings["winner_id"]
    artifact = session / "artifact"
    shutil.copytree(session / "competitors" / winner, artifact)
    spec_path = artifact / "agent.json"
    spec = json.loads(spec_path.read_text())
    spec.pop("crash_batch", None)
    population = len(standings["population"])
    if population == 2:
        spec["crash_batch"] = True
    elif population == 3:
        pass  # byte-identical clone of the winner
    else:
        spec["true_accuracy"] = min(1.0, spec["true_accuracy"] + 0.01)
    spec_path.write_text(json.dumps(spec, sort_keys=True))
    (session / "reasoning.md").write_text(f"stub child of {winner} (population {population})\n")
elif phase == "refine":
    with (session / "reasoning.md").open("a") as fh:
        fh.write("focus report reviewed\n")
else:
    sys.exit(2)
