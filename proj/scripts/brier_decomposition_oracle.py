#!/usr/bin/env python3
"""Brute-force Brier decomposition, independent of the C++ implementation.

Reads {"forecasts": [...], "outcomes": [...], "bins": K} as JSON on stdin
(or from a file given as argv[1]) and prints the decomposition as JSON.
Everything is computed with plain Python loops over Fraction-free floats so
the arithmetic path shares nothing with the library under test.
"""
import json
import sys


def decompose(forecasts, outcomes, bins):
    n = len(forecasts)
    assert n == len(outcomes) and n > 0
    brier = sum((p - o) ** 2 for p, o in zip(forecasts, outcomes)) / n

    members = [[] for _ in range(bins)]
    for p, o in zip(forecasts, outcomes):
        k = int(p * bins)
        if k >= bins:
            k = bins - 1  # last bin closed at 1
        members[k].append((p, o))

    obar = sum(outcomes) / n
    cal = 0.0
    ref = 0.0
    for rows in members:
        if not rows:
            continue
        nk = len(rows)
        fk = sum(p for p, _ in rows) / nk
        ok = sum(o for _, o in rows) / nk
        cal += nk * (fk - ok) ** 2
        ref += nk * (ok - obar) ** 2
    return {
        "brier": brier,
        "calibration": cal / n,
        "refinement": ref / n,
        "uncertainty": obar * (1.0 - obar),
    }


def main():
    raw = open(sys.argv[1]).read() if len(sys.argv) > 1 else sys.stdin.read()
    request = json.loads(raw)
    result = decompose(request["forecasts"], request["outcomes"],
                       request.get("bins", 10))
    print(json.dumps(result))


if __name__ == "__main__":
    main()
