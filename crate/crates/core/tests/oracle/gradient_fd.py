"""Central finite-difference gradients of random networks in 200-bit arithmetic.

Writes ../data/gradient_cases.json. Each case holds a model document, an
input, a target class and the finite-difference gradient laid out as a model
document of the same shape. The forward pass here is written independently
of the Rust crate; only the document layout is shared.

    python3 gradient_fd.py
"""

import json
import os
import random

import mpmath as mp

mp.mp.prec = 200
STEP = mp.mpf("1e-5")
SHAPES = [[1], [3, 1], [4, 3, 2]]


def processing(kind, w, b, x):
    if kind == "sigmoid":
        return 1 / (1 + mp.exp(-w * (x - b)))
    prod = mp.mpf(1)
    for wm, bm in zip(w, b):
        prod *= mp.tanh(wm * (x - bm))
    return (prod + 1) / 2


def loss(doc, x, target):
    kind = doc["kind"]
    inputs = [mp.mpf(v) for v in x]
    layers = doc["layers"]
    for layer in layers:
        sums = []
        for j, (wj, bj) in enumerate(zip(layer["w"], layer["b"])):
            s = mp.mpf(0)
            for i, (w, b) in enumerate(zip(wj, bj)):
                h = processing(kind, w, b, inputs[i])
                s += layer["alpha"][j][i] * h if "alpha" in layer else h
            if "out_bias" in layer:
                s -= layer["out_bias"][j]
            sums.append(s)
        inputs = sums
    if doc["head"] == "sigmoid":
        p = 1 / (1 + mp.exp(-inputs[0]))
        return -mp.log(p if target == 1 else 1 - p)
    m = max(inputs)
    lse = m + mp.log(sum(mp.exp(z - m) for z in inputs))
    return lse - inputs[target]


def slots(doc):
    """Yields (container, key) for every parameter, in any fixed order."""
    for layer in doc["layers"]:
        for name in ("w", "b"):
            for row in layer[name]:
                for i, cell in enumerate(row):
                    if isinstance(cell, list):
                        for m in range(len(cell)):
                            yield cell, m
                    else:
                        yield row, i
        if "alpha" in layer:
            for row in layer["alpha"]:
                for i in range(len(row)):
                    yield row, i
            for i in range(len(layer["out_bias"])):
                yield layer["out_bias"], i


def mp_doc(doc):
    return json.loads(json.dumps(doc), parse_float=mp.mpf, parse_int=mp.mpf) | {
        "kind": doc["kind"], "head": doc["head"]}


def fd_gradient(doc, x, target):
    work = mp_doc(doc)
    grad = json.loads(json.dumps(doc))
    for (c, k), (gc, gk) in zip(slots(work), slots(grad)):
        base = c[k]
        c[k] = base + STEP
        up = loss(work, x, target)
        c[k] = base - STEP
        down = loss(work, x, target)
        c[k] = base
        gc[gk] = float((up - down) / (2 * STEP))
    return grad


def random_doc(rng, kind, shape, n_in):
    m = 2 if kind == "tanh_prod" else 1

    def cell(lo, hi):
        if kind == "tanh_prod":
            return [rng.uniform(lo, hi) for _ in range(m)]
        return rng.uniform(lo, hi)

    layers = []
    arity = n_in
    for l, width in enumerate(shape):
        b_lo, b_hi = (-1.0, 1.0) if l == 0 else (0.0, float(arity))
        layer = {
            "w": [[cell(-1.5, 1.5) for _ in range(arity)] for _ in range(width)],
            "b": [[cell(b_lo, b_hi) for _ in range(arity)] for _ in range(width)],
        }
        if l == len(shape) - 1:
            layer["alpha"] = [[rng.uniform(-1.5, 1.5) for _ in range(arity)] for _ in range(width)]
            layer["out_bias"] = [rng.uniform(-1.0, 1.0) for _ in range(width)]
        layers.append(layer)
        arity = width
    head = "sigmoid" if shape[-1] == 1 else "softmax"
    return {"kind": kind, "m": m, "input_dim": n_in, "head": head, "layers": layers}


def main():
    rng = random.Random(20240611)
    cases = []
    for kind in ("sigmoid", "tanh_prod"):
        for n in range(20):
            shape = SHAPES[n % len(SHAPES)]
            n_in = rng.randint(1, 4)
            doc = random_doc(rng, kind, shape, n_in)
            x = [rng.uniform(-1.0, 1.0) for _ in range(n_in)]
            n_classes = 2 if shape[-1] == 1 else shape[-1]
            target = rng.randrange(n_classes)
            cases.append({"model": doc, "x": x, "target": target, "fd_gradient": fd_gradient(doc, x, target)})
    out = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data", "gradient_cases.json")
    with open(out, "w") as f:
        json.dump({"step": 1e-5, "cases": cases}, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
