#!/usr/bin/env python3
"""Frozen forward values for the tensor ops, computed with mpmath/numpy.

Each block prints values the unit tests embed as literals. GELU uses the
exact erf form, layer norm the biased variance with eps inside the sqrt,
cross entropy the weighted mean with log-sum-exp stabilization -- the
published definitions, recomputed here independently of the C++ code.
"""

import math

import numpy as np


def gelu(x):
    return 0.5 * x * (1.0 + math.erf(x / math.sqrt(2.0)))


def main():
    pts = [-3.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.5]
    print("gelu:")
    for x in pts:
        print(f"  gelu({x}) = {gelu(x)!r}")

    print("softmax row [1, 2, 4, 0.5]:")
    row = np.array([1.0, 2.0, 4.0, 0.5])
    e = np.exp(row - row.max())
    print(" ", [repr(v) for v in (e / e.sum()).tolist()])

    print("layer_norm row [1, 2, 3, 4], gain [1,1,2,1], bias [0,0,0,0.5], eps=1e-5:")
    x = np.array([1.0, 2.0, 3.0, 4.0])
    mean = x.mean()
    var = ((x - mean) ** 2).mean()
    y = (x - mean) / math.sqrt(var + 1e-5)
    y = y * np.array([1.0, 1.0, 2.0, 1.0]) + np.array([0.0, 0.0, 0.0, 0.5])
    print(" ", [repr(v) for v in y.tolist()])

    print("cross_entropy rows [[2,1,0],[0,1,3]] targets [0,2]:")
    logits = np.array([[2.0, 1.0, 0.0], [0.0, 1.0, 3.0]])
    targets = [0, 2]
    losses = []
    for r, t in zip(logits, targets):
        mx = r.max()
        losses.append(math.log(np.exp(r - mx).sum()) + mx - r[t])
    print("  unweighted mean =", repr(sum(losses) / 2))
    w = [1.0, 1.0, 0.1]
    row_w = [w[t] for t in targets]
    print("  class weights [1,1,0.1]  ->",
          repr(sum(rw * l for rw, l in zip(row_w, losses)) / sum(row_w)))

    print("iou / giou, a=[0.1,0.1,0.5,0.5] b=[0.3,0.3,0.7,0.8]:")
    a = (0.1, 0.1, 0.5, 0.5)
    b = (0.3, 0.3, 0.7, 0.8)

    def area(r):
        return max(0.0, r[2] - r[1]) * max(0.0, r[3] - r[0])

    inter = max(0.0, min(a[2], b[2]) - max(a[1], b[1])) * max(0.0, min(a[3], b[3]) - max(a[0], b[0]))
    union = area(a) + area(b) - inter
    hull = (max(0.0, max(a[2], b[2]) - min(a[1], b[1]))
            * max(0.0, max(a[3], b[3]) - min(a[0], b[0])))
    i = inter / union
    print("  iou  =", repr(i))
    print("  giou =", repr(i - (hull - union) / hull))
    print("  disjoint giou a=[0,0,0.2,0.2] b=[0.8,0.8,1,1]:")
    a = (0.0, 0.0, 0.2, 0.2)
    b = (0.8, 0.8, 1.0, 1.0)
    union = area(a) + area(b)
    print("   ", repr(0.0 - (1.0 - union) / 1.0))

    print("conv2d 3x3/stride2/pad1 on 4x4 ramp, kernel of ones, bias 0.5:")
    x = np.arange(16, dtype=float).reshape(4, 4)
    out = np.zeros((2, 2))
    for oy in range(2):
        for ox in range(2):
            s = 0.0
            for ky in range(3):
                for kx in range(3):
                    iy, ix = oy * 2 + ky - 1, ox * 2 + kx - 1
                    if 0 <= iy < 4 and 0 <= ix < 4:
                        s += x[iy, ix]
            out[oy, ox] = s + 0.5
    print(" ", out.tolist())


if __name__ == "__main__":
    main()
