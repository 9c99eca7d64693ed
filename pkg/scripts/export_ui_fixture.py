"""Capture a real service session as a fixture for the web UI tests.

Boots the service in-process, runs a couple of queries against it, and
writes the raw SSE event log plus the scene/run responses to
frontend/fixtures/session.json so UI tests replay genuine wire payloads.
"""

import argparse
import json
import tempfile
import time
from pathlib import Path

from fastapi.testclient import TestClient

from presslab.pipeline import noiseless_profile
from presslab.service import build_app
from presslab.training import load_checkpoint
from presslab.vision import GSAM_LIKE


def capture(checkpoint, out_path: Path, seed: int):
    model, meta = load_checkpoint(checkpoint)
    app = build_app(
        model,
        t=meta["t"],
        profile=noiseless_profile(GSAM_LIKE),
        data_dir=tempfile.mkdtemp(prefix="ui-fixture-"),
        seed=seed,
        depth_noise_sigma=0.0,
        run_in_thread=False,
    )
    client = TestClient(app)

    scene = client.get("/v1/scene").json()
    # seed 44 places banana, lemon, avocado, pear, mango: the two-target
    # ripeness prompt resolves fully, the tomato prompt exercises not-found
    queries = [
        "How ripe are the banana and the lemon?",
        "How hard is the tomato?",
    ]
    runs = []
    for text in queries:
        accepted = client.post("/v1/query", json={"text": text}).json()
        record = client.get(f"/v1/runs/{accepted['run_id']}").json()
        runs.append({"accepted": accepted, "final": record})

    sse = client.get("/v1/events?idle_timeout_s=0.2")
    events = []
    for frame in sse.text.split("\n\n"):
        entry = {}
        for line in frame.splitlines():
            if line.startswith("id: "):
                entry["id"] = line[4:]
            elif line.startswith("event: "):
                entry["event"] = line[7:]
            elif line.startswith("data: "):
                entry["data"] = json.loads(line[6:])
        if entry:
            events.append(entry)

    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(
        json.dumps(
            {
                "captured_unix": int(time.time()),
                "seed": seed,
                "scene_response": scene,
                "runs": runs,
                "sse_events": events,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    print(f"wrote {len(events)} SSE frames and {len(runs)} runs to {out_path}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--checkpoint", required=True)
    ap.add_argument("--out", default="frontend/fixtures/session.json")
    ap.add_argument("--seed", type=int, default=44)
    args = ap.parse_args()
    capture(args.checkpoint, Path(args.out), args.seed)
