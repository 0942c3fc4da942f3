#!/usr/bin/env python3
"""Abstractive summary backend for `generator.kind = "process"`.

Reads one JSON request per line on stdin and writes one JSON reply per line:
  {"op": "id"}                      -> {"id": "<model name>"}
  {"op": "tokenize", "text": s}     -> {"tokens": [...]}
  {"op": "generate", "tokens": [...], "top_k": k, "top_p": p, "seed": n,
   "min_tokens": a, "max_tokens": b} -> {"text": "..."}
Errors are reported as {"error": "..."}.
"""
import json
import sys

MODEL = sys.argv[1] if len(sys.argv) > 1 else "facebook/bart-large-cnn"


def main():
    import torch
    from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

    tok = AutoTokenizer.from_pretrained(MODEL)
    model = AutoModelForSeq2SeqLM.from_pretrained(MODEL).eval()
    for line in sys.stdin:
        try:
            req = json.loads(line)
            op = req.get("op")
            if op == "id":
                reply = {"id": MODEL}
            elif op == "tokenize":
                reply = {"tokens": tok(req["text"], add_special_tokens=False)["input_ids"]}
            elif op == "generate":
                torch.manual_seed(int(req["seed"]) % (2**63))
                ids = torch.tensor([req["tokens"][: tok.model_max_length]])
                out = model.generate(ids, do_sample=True, top_k=req["top_k"], top_p=req["top_p"],
                                     min_length=req["min_tokens"], max_length=req["max_tokens"])
                reply = {"text": tok.decode(out[0], skip_special_tokens=True).strip()}
            else:
                reply = {"error": f"unknown op {op!r}"}
        except Exception as e:  # reported to the caller, which raises
            reply = {"error": str(e)}
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
