#!/usr/bin/env python3
"""Frozen 2-D sine-cosine positional entries (the standard detection-
transformer table: normalized coordinates scaled by 2*pi, temperature 10000,
y frequencies in the first half of the channel axis, x in the second,
sin/cos interleaved)."""

import math


def entry(i, j, gh, gw, d, ch):
    half = d // 2
    ye = (i + 1) / gh * 2 * math.pi
    xe = (j + 1) / gw * 2 * math.pi
    axis, c = (ye, ch) if ch < half else (xe, ch - half)
    t = 10000.0 ** (2 * (c // 2) / half)
    return math.sin(axis / t) if c % 2 == 0 else math.cos(axis / t)


def main():
    gh = gw = 2
    d = 8
    for (i, j, ch) in [(0, 0, 0), (0, 0, 1), (0, 1, 4), (1, 1, 5), (0, 0, 2), (1, 0, 7)]:
        row = i * gw + j
        print(f"  row {row} ch {ch} = {entry(i, j, gh, gw, d, ch)!r}")


if __name__ == "__main__":
    main()
