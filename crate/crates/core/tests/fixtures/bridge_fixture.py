"""Test bridge speaking the newline-delimited JSON protocol.

usage: bridge_fixture.py MODE [SPEC]
"""
import json
import sys


def send(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def linear_model(path):
    with open(path) as fh:
        spec = json.load(fh)
    game = spec.get("game", spec)
    w, b, x = game["weights"], game["bias"], game["x"]
    baseline = game.get("baseline") or [0.0] * len(x)
    groups = game.get("groups") or [[f] for f in range(len(x))]

    def logits(coalition):
        z = list(baseline)
        for i in coalition:
            for f in groups[i]:
                z[f] = x[f]
        out = list(b)
        for zf, row in zip(z, w):
            for c in range(len(out)):
                out[c] += zf * row[c]
        return out

    return logits, len(b)


def main():
    mode = sys.argv[1]
    if mode == "noready":
        return
    hello = json.loads(sys.stdin.readline())["hello"]
    d = hello.get("d") or 3
    if mode == "linear":
        logits, d = linear_model(sys.argv[2])
    else:
        logits = lambda c: [0.5, -0.2, 1.0][:d]
    send({"ready": True, "d": d})
    pending = []
    for line in sys.stdin:
        q = json.loads(line)
        qid, coalition = q["id"], q["coalition"]
        if mode == "silent":
            continue
        if mode == "garbage":
            sys.stdout.write("not json\n")
            sys.stdout.flush()
            continue
        if mode == "raise" and coalition == [0, 1]:
            send({"id": qid, "error": "model failed on [0, 1]"})
            continue
        if mode == "bernoulli":
            reply = {"id": qid, "params": {"pi": len(coalition) / hello["n"]}}
        elif mode == "short":
            reply = {"id": qid, "params": {"logits": logits(coalition)[:-1]}}
        else:
            reply = {"id": qid, "params": {"logits": logits(coalition)}}
        if mode == "reverse":
            pending.append(reply)
            if len(pending) == 2:
                for r in reversed(pending):
                    send(r)
                pending = []
            continue
        send(reply)


if __name__ == "__main__":
    main()
