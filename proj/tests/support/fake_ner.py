#!/usr/bin/env python3
# NER stand-in for wire tests: every capitalized word is a mention.
import json
import re
import sys

for line in sys.stdin:
    if not line.strip():
        continue
    req = json.loads(line)
    if req["text"] == "__crash__":
        sys.exit(3)
    mentions = [{"start": m.start(), "end": m.end()} for m in re.finditer(r"\b[A-Z][\w-]+", req["text"])]
    if req["text"] == "__out_of_bounds__":
        mentions = [{"start": 0, "end": len(req["text"]) + 5}]
    sys.stdout.write(json.dumps({"doc_id": req["doc_id"], "mentions": mentions}) + "\n")
    sys.stdout.flush()
