"""Regenerate the vendored CSV fixtures.

Both datasets are synthetic stand-ins with the shape of the originals:

* banana.csv: two interleaved noisy crescents in 2-D, labels in {-1, +1},
  500 training and 500 test rows marked in the `split` column.
* solar.csv: yearly total solar irradiance 1610-2011 with a drifting
  11-year cycle, an 88-year amplitude modulation, a Maunder-type minimum
  (1645-1715) and observation noise. The test intervals live in
  solar_split.json.

Run from this directory: python3 make_fixtures.py
"""

import json

import numpy as np


def banana(rng, n):
    y = rng.integers(0, 2, n)
    t = rng.uniform(0.0, np.pi, n)
    x1 = np.where(y == 0, np.cos(t), 1.0 - np.cos(t))
    x2 = np.where(y == 0, np.sin(t), 0.5 - np.sin(t))
    x = np.stack([x1, x2], axis=1) + rng.normal(0.0, 0.25, (n, 2))
    return x, np.where(y == 0, -1, 1)


def write_banana(rng):
    xtr, ytr = banana(rng, 500)
    xte, yte = banana(rng, 500)
    with open("banana.csv", "w") as f:
        f.write("x1,x2,label,split\n")
        for split, xs, ys in (("train", xtr, ytr), ("test", xte, yte)):
            for (a, b), c in zip(xs, ys):
                f.write(f"{a:.6f},{b:.6f},{c},{split}\n")


def write_solar(rng):
    years = np.arange(1610, 2012)
    period = 11.0 + 0.8 * np.sin(2 * np.pi * (years - 1610) / 150.0)
    phase = 2 * np.pi * np.cumsum(1.0 / period)
    amp = 0.55 * (0.6 + 0.4 * np.cos(2 * np.pi * (years - 1640) / 88.0))
    maunder = (years >= 1645) & (years <= 1715)
    amp = np.where(maunder, 0.08, amp)
    base = 1360.4 + 0.25 * np.clip((years - 1700) / 300.0, 0.0, None) - np.where(maunder, 0.25, 0.0)
    tsi = base + amp * (0.5 + 0.5 * np.sin(phase)) + rng.normal(0.0, 0.04, years.size)
    with open("solar.csv", "w") as f:
        f.write("year,irradiance\n")
        for t, v in zip(years, tsi):
            f.write(f"{t},{v:.5f}\n")
    intervals = [[1630, 1650], [1700, 1720], [1780, 1800], [1850, 1870], [1930, 1950]]
    test = sum(((years >= a) & (years <= b)).sum() for a, b in intervals)
    split = {
        "column": "year",
        "test_intervals": intervals,
        "expected_train": int(years.size - test),
        "expected_test": int(test),
    }
    with open("solar_split.json", "w") as f:
        json.dump(split, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    rng = np.random.default_rng(20190416)
    write_banana(rng)
    write_solar(rng)
