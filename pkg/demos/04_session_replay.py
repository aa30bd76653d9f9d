"""A full headless multi-operator session, recorded, replayed and reported.

Three desks work the education case at high speed: generation redispatches,
voltage support switches a capacitor in, and one desk oversteps its role
and gets flagged. The session record then replays byte-for-byte.
Run: python3 demos/04_session_replay.py
"""

import json
from pathlib import Path

from gridops.session import Session, load_scenario, replay, report_bytes

ROOT = Path(__file__).resolve().parent.parent

# shorten the shipped scenario so the demo finishes in seconds
doc = json.loads((ROOT / "scenarios" / "education.json").read_text())
doc["case"] = json.loads((ROOT / "cases" / "coastal13.json").read_text())
del doc["case_ref"]
doc["sim_span"] = 600
scenario = load_scenario(json.dumps(doc))

session = Session(scenario)
gen_desk = session.gateway.attach_client("gen-desk", "token-generation")
volt_desk = session.gateway.attach_client("volt-desk", "token-voltage")
notif = session.broker.subscribe("narrator", "notif/#")

script = {
    20: (gen_desk, {"kind": "SetGenMW", "target": 2, "value": 95.0}),
    60: (volt_desk, {"kind": "SwitchShuntOn", "target": 1}),
    120: (volt_desk, {"kind": "ShedLoadPercent", "target": 1, "value": 25.0}),  # wrong desk
    180: (gen_desk, {"kind": "CommitGen", "target": 3}),
    200: (gen_desk, {"kind": "SetGenMW", "target": 3, "value": 70.0}),
}


def operate(meas):
    entry = script.get(meas.step_index)
    if entry:
        session.gateway.submit_command(*entry)


record = session.run(pacing=False, on_step=operate)

print("notifications the whole room saw:")
for e in notif.drain():
    if e.topic == "notif/command":
        print("  ", e.payload["text"])

print("\nreport:", record.report["summary"])

path = Path("/tmp/gridops-demo-session.jsonl")
record.save(path)
print("record written to", path, f"({path.stat().st_size} bytes)")

report2, _ = replay(record)
print("replay regenerated the report byte-identically:",
      report_bytes(report2) == report_bytes(record.report))
