#!/usr/bin/env python3
"""Reference values for the ISP on a fixed 4x4 mosaic probe.

Written as plain loops in f64 with no shared code, so it can be read line by
line against the pipeline description: white balance, bilinear demosaic with
mirrored borders, colour matrix, clamp, gamma 1/2.2.

Prints the [3][4][4] output as a Rust array literal.
"""

# Packed probe, planes R, G1, G2, B, each 2x2.
PACKED = [
    [[0.10, 0.20], [0.30, 0.05]],
    [[0.40, 0.35], [0.25, 0.15]],
    [[0.30, 0.45], [0.20, 0.50]],
    [[0.20, 0.10], [0.60, 0.30]],
]
GAINS = {"R": 2.0, "G": 1.0, "B": 1.5}
CCM = [[1.6, -0.4, -0.2], [-0.3, 1.5, -0.2], [0.0, -0.5, 1.5]]
H = W = 4


def colour(y, x):
    if y % 2 == 0 and x % 2 == 0:
        return "R"
    if y % 2 == 1 and x % 2 == 1:
        return "B"
    return "G"


def plane(y, x):
    return 2 * (y % 2) + (x % 2)


def reflect(i, n):
    if i < 0:
        return -i
    if i >= n:
        return 2 * (n - 1) - i
    return i


mosaic = [[0.0] * W for _ in range(H)]
for y in range(H):
    for x in range(W):
        raw = PACKED[plane(y, x)][y // 2][x // 2]
        mosaic[y][x] = raw * GAINS[colour(y, x)]

weights = [[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]]
out = [[[0.0] * W for _ in range(H)] for _ in range(3)]
for y in range(H):
    for x in range(W):
        num = {"R": 0.0, "G": 0.0, "B": 0.0}
        den = {"R": 0.0, "G": 0.0, "B": 0.0}
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                yy = reflect(y + dy, H)
                xx = reflect(x + dx, W)
                wgt = weights[dy + 1][dx + 1]
                num[colour(yy, xx)] += wgt * mosaic[yy][xx]
                den[colour(yy, xx)] += wgt
        cam = [num["R"] / den["R"], num["G"] / den["G"], num["B"] / den["B"]]
        for c in range(3):
            lin = CCM[c][0] * cam[0] + CCM[c][1] * cam[1] + CCM[c][2] * cam[2]
            lin = min(max(lin, 0.0), 1.0)
            out[c][y][x] = lin ** (1.0 / 2.2)

print("[")
for c in range(3):
    print("    [")
    for y in range(H):
        print("        [" + ", ".join(f"{v:.12f}" for v in out[c][y]) + "],")
    print("    ],")
print("]")
