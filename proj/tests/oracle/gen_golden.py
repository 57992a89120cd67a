#!/usr/bin/env python3
"""Reference evaluator for the variable transformations and basic functions.

Implements the definitions directly with scalar python floats (IEEE doubles)
and explicit left-to-right loops, independent of the C++ code, and freezes
inputs/outputs into tests/data/golden_transforms.json.

Run from the repository root:  python3 tests/oracle/gen_golden.py
"""

import json
import math
import os
import random

OUT = os.path.join(os.path.dirname(__file__), "..", "data", "golden_transforms.json")


def t_osz(z):
    out = []
    for zi in z:
        if zi == 0.0:
            out.append(0.0)
            continue
        zhat = math.log(abs(zi))
        c1 = 10.0 if zi > 0 else 5.5
        c2 = 7.9 if zi > 0 else 3.1
        sgn = 1.0 if zi > 0 else -1.0
        out.append(sgn * math.exp(zhat + 0.049 * (math.sin(c1 * zhat) + math.sin(c2 * zhat))))
    return out


def frac(i, d):
    return i / (d - 1) if d > 1 else 0.0


def t_asy(z, beta=0.2):
    d = len(z)
    out = []
    for i, zi in enumerate(z):
        if zi > 0:
            out.append(zi ** (1.0 + beta * frac(i, d) * math.sqrt(zi)))
        else:
            out.append(zi)
    return out


def t_lambda(z, alpha=10.0):
    d = len(z)
    return [alpha ** (0.5 * frac(i, d)) * zi for i, zi in enumerate(z)]


def round_half_away(v):
    if abs(v) >= 2.0 ** 52:
        return v
    return math.floor(v + 0.5) if v >= 0 else math.ceil(v - 0.5)


def f_sphere(z):
    c = 0.0
    for zi in z:
        c += zi * zi
    return c


def f_elliptic(z):
    d = len(z)
    c = 0.0
    for i, zi in enumerate(z):
        c += 10.0 ** (6.0 * frac(i, d)) * zi * zi
    return c


def f_rastrigin(z):
    c = 0.0
    for zi in z:
        c += zi * zi - 10.0 * math.cos(2.0 * math.pi * zi) + 10.0
    return c


def f_ackley(z):
    d = len(z)
    sum_sq = 0.0
    sum_cos = 0.0
    for zi in z:
        sum_sq += zi * zi
        sum_cos += math.cos(2.0 * math.pi * zi)
    return (-20.0 * math.exp(-0.2 * math.sqrt(sum_sq / d))
            - math.exp(sum_cos / d) + 20.0 + math.e)


def f_schwefel12(z):
    c = 0.0
    prefix = 0.0
    for zi in z:
        prefix += zi
        c += prefix * prefix
    return c


def f_katsuura(z):
    d = len(z)
    expo = 10.0 / (float(d) ** 1.2)
    prod = 1.0
    for i, zi in enumerate(z):
        term = 0.0
        pow2 = 1.0
        for _ in range(32):
            pow2 *= 2.0
            v = pow2 * zi
            term += abs(v - round_half_away(v)) / pow2
        prod *= (1.0 + (i + 1) * term) ** expo
    return prod - 1.0


def f_attractive_sector(z):
    c = 0.0
    for zi in z:
        sq = zi * zi
        c += 100.0 * sq + sq * sq if zi > 0 else sq + 100.0 * sq * sq
    return c


FUNCS = {
    1: (f_sphere, ("osz", "asy", "lambda")),
    2: (f_elliptic, ("osz",)),
    3: (f_rastrigin, ("osz", "asy", "lambda")),
    4: (f_ackley, ("osz", "asy", "lambda")),
    5: (f_schwefel12, ("osz", "asy")),
    6: (f_katsuura, ("osz", "asy", "lambda")),
    7: (f_attractive_sector, ("osz", "asy", "lambda")),
}


def composed(fid, x):
    fn, chain = FUNCS[fid]
    z = list(x)
    if "osz" in chain:
        z = t_osz(z)
    if "asy" in chain:
        z = t_asy(z)
    if "lambda" in chain:
        z = t_lambda(z)
    return fn(z)


def rand_vec(rng, lo=-80.0, hi=80.0):
    d = rng.randint(1, 12)
    return [rng.uniform(lo, hi) for _ in range(d)]


def main():
    rng = random.Random(987654321)
    doc = {"osz": [], "asy": [], "lambda": [], "basic": [], "composed": []}

    for _ in range(50):
        z = rand_vec(rng)
        doc["osz"].append({"z": z, "expect": t_osz(z)})
    for _ in range(50):
        z = rand_vec(rng)
        doc["asy"].append({"z": z, "beta": 0.2, "expect": t_asy(z, 0.2)})
    for _ in range(50):
        z = rand_vec(rng)
        doc["lambda"].append({"z": z, "alpha": 10.0, "expect": t_lambda(z, 10.0)})
    for fid in range(1, 8):
        fn, _ = FUNCS[fid]
        for _ in range(50):
            z = rand_vec(rng, -5.0, 5.0)
            doc["basic"].append({"fn": fid, "z": z, "expect": fn(z)})
        for _ in range(50):
            x = rand_vec(rng)
            doc["composed"].append({"fn": fid, "x": x, "expect": composed(fid, x)})

    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "w") as f:
        json.dump(doc, f)
        f.write("\n")
    print("wrote", OUT)


if __name__ == "__main__":
    main()
