#!/usr/bin/env python3
# Minimal process backend for tests: tokens are word indices, output echoes
# the request so the caller's parameters can be checked.
import json
import sys

for line in sys.stdin:
    req = json.loads(line)
    op = req["op"]
    if op == "id":
        out = {"id": "echo"}
    elif op == "tokenize":
        out = {"tokens": list(range(len(req["text"].split())))}
    elif op == "generate":
        if req["top_k"] == 1:
            out = {"error": "refused"}
        else:
            out = {"text": "n=%d min=%d max=%d seed=%d" % (len(req["tokens"]), req["min_tokens"],
                                                           req["max_tokens"], req["seed"] % 1000)}
    else:
        out = {"error": "bad op"}
    sys.stdout.write(json.dumps(out) + "\n")
    sys.stdout.flush()
