"""Wire-protocol test double. Replies to each request line according to its dataset_path.

ok -> 0.5, range -> 1.7, error -> error response, garbage -> non-JSON,
wrong_id -> mismatched id, slow -> sleeps, crash -> exits with a message on stderr.
Every request is appended to $ECHO_LOG when set.
"""
import json
import os
import sys
import time

REQUIRED = {"id", "dataset_path", "macro", "ops", "seed", "hyperparams"}

for line in sys.stdin:
    line = line.strip()
    if not line:
        continue
    req = json.loads(line)
    if os.environ.get("ECHO_LOG"):
        with open(os.environ["ECHO_LOG"], "a") as f:
            f.write(line + "\n")
    rid = req.get("id")
    missing = REQUIRED - set(req)
    mode = os.path.basename(str(req.get("dataset_path", "")))
    if missing:
        out = {"id": rid, "error": "missing " + ",".join(sorted(missing))}
    elif mode == "range":
        out = {"id": rid, "valid_perf": 1.7, "test_perf": 0.5, "duration_s": 0.01}
    elif mode == "error":
        out = {"id": rid, "error": "training diverged"}
    elif mode == "garbage":
        print("this is not json", flush=True)
        continue
    elif mode == "wrong_id":
        out = {"id": "other", "valid_perf": 0.5}
    elif mode == "slow":
        time.sleep(30)
        continue
    elif mode == "crash":
        sys.stderr.write("fatal: out of memory\n")
        sys.stderr.flush()
        sys.exit(3)
    else:
        out = {"id": rid, "valid_perf": 0.5, "test_perf": 0.45, "duration_s": 0.01}
    print(json.dumps(out), flush=True)
