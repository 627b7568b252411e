"""Test double: answers every predict request with the first feature of each row.

Optional argv[1] selects a misbehaviour: "die" exits on the first predict,
"garbage" answers predict with non-JSON, "wrong-id" echoes a wrong id,
"hang" never answers predict.
"""
import json
import sys
import time

mode = sys.argv[1] if len(sys.argv) > 1 else "ok"
for line in sys.stdin:
    req = json.loads(line)
    if req["op"] == "meta":
        print(json.dumps({"id": req["id"], "feature_count": 2}), flush=True)
        continue
    if mode == "die":
        sys.exit(3)
    if mode == "garbage":
        print("this is not json {", flush=True)
        continue
    if mode == "hang":
        time.sleep(60)
    rid = req["id"] + 1 if mode == "wrong-id" else req["id"]
    preds = [row[0] for row in req["instances"]]
    print(json.dumps({"id": rid, "predictions": preds}), flush=True)
