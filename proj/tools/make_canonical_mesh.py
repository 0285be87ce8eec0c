#!/usr/bin/env python3
"""Generate the synthetic canonical 468-point face mesh fixture.

The mesh follows the index topology of the MediaPipe face mesh for the
features the estimators read (eye contours, nose ridge, lips, eyebrows,
face oval). Remaining vertices are spread over the face surface with a
sunflower pattern. Coordinates are in centimetres: x towards the subject's
left, y up, z towards the camera.
"""

import json
import math
import sys

N = 468

RIGHT_EYE = [33, 7, 163, 144, 145, 153, 154, 155, 133, 173, 157, 158, 159, 160, 161, 246]
LEFT_EYE = [263, 249, 390, 373, 374, 380, 381, 382, 362, 398, 384, 385, 386, 387, 388, 466]
FACE_OVAL = [10, 338, 297, 332, 284, 251, 389, 356, 454, 323, 361, 288, 397, 365, 379, 378,
             400, 377, 152, 148, 176, 149, 150, 136, 172, 58, 132, 93, 234, 127, 162, 21,
             54, 103, 67, 109]
LIPS_OUTER = [61, 146, 91, 181, 84, 17, 314, 405, 321, 375, 291, 409, 270, 269, 267, 0,
              37, 39, 40, 185]
LIPS_INNER = [78, 95, 88, 178, 87, 14, 317, 402, 318, 324, 308, 415, 310, 311, 312, 13,
              82, 81, 80, 191]
RIGHT_BROW = [46, 53, 52, 65, 55, 70, 63, 105, 66, 107]
LEFT_BROW = [276, 283, 282, 295, 285, 300, 293, 334, 296, 336]
NOSE_RIDGE = [168, 6, 197, 195, 5, 4, 1]  # bridge top to tip
NOSE_BASE = [19, 94, 2]
NOSE_ALAR_RIGHT = [98, 64, 48, 115, 220, 45]
NOSE_ALAR_LEFT = [327, 294, 278, 344, 440, 275]


def surface_z(x, y):
    r = 1.0 - (x / 8.0) ** 2 - (y / 10.5) ** 2
    return 3.5 * math.sqrt(max(r, 0.0))


def place_eye(pts, ring, cx, cy, outer_sign):
    # ring: outer corner, 7 lower-lid points, inner corner, 7 upper-lid points
    half_w, up, low = 1.5, 0.55, 0.45
    z = surface_z(cx, cy) - 0.6
    for k, idx in enumerate(ring):
        t = math.pi * k / 8.0  # 0 at outer corner, pi at inner corner
        dx = outer_sign * half_w * math.cos(t)
        dy = -low * math.sin(t) if k <= 8 else up * abs(math.sin(t))
        pts[idx] = (cx + dx, cy + dy, z)


def main(out_path):
    pts = [None] * N

    place_eye(pts, RIGHT_EYE, -3.2, 2.6, -1.0)
    place_eye(pts, LEFT_EYE, 3.2, 2.6, 1.0)

    for k, idx in enumerate(FACE_OVAL):
        t = 2.0 * math.pi * k / len(FACE_OVAL)
        x, y = 7.2 * math.sin(t), -0.8 + 8.3 * math.cos(t)
        pts[idx] = (x, y, surface_z(x, y) * 0.5)

    for k, idx in enumerate(LIPS_OUTER):
        t = 2.0 * math.pi * k / len(LIPS_OUTER)
        x, y = -2.4 * math.cos(t), -4.6 - 0.8 * math.sin(t)
        pts[idx] = (x, y, surface_z(x, y) + 0.4)
    for k, idx in enumerate(LIPS_INNER):
        t = 2.0 * math.pi * k / len(LIPS_INNER)
        x, y = -1.9 * math.cos(t), -4.6 - 0.15 * math.sin(t)
        pts[idx] = (x, y, surface_z(x, y) + 0.2)

    for brow, sign in ((RIGHT_BROW, -1.0), (LEFT_BROW, 1.0)):
        for k, idx in enumerate(brow):
            row, col = divmod(k, 5)
            x = sign * (5.0 - 0.8 * col)
            y = 4.0 + 0.25 * row + 0.3 * math.sin(math.pi * col / 4.0)
            pts[idx] = (x, y, surface_z(x, y) + 0.1)

    # Nose: bridge top at (0, 2.6), tip at (0, -1.4) protruding 2 cm further.
    top_z = surface_z(0.0, 2.6) + 0.3
    for k, idx in enumerate(NOSE_RIDGE):
        f = k / (len(NOSE_RIDGE) - 1)
        pts[idx] = (0.0, 2.6 - 4.0 * f, top_z + 2.0 * f)
    for k, idx in enumerate(NOSE_BASE):
        f = (k + 1) / len(NOSE_BASE)
        pts[idx] = (0.0, -1.4 - 0.7 * f, top_z + 2.0 - 1.2 * f)
    for alar, sign in ((NOSE_ALAR_RIGHT, -1.0), (NOSE_ALAR_LEFT, 1.0)):
        for k, idx in enumerate(alar):
            t = math.pi * k / (len(alar) - 1)
            x = sign * (1.0 + 0.3 * math.sin(t))
            y = -1.8 + 1.6 * (1.0 - math.cos(t)) / 2.0
            pts[idx] = (x, y, top_z + 0.6 - 0.3 * k / len(alar))

    free = [i for i in range(N) if pts[i] is None]
    golden = math.pi * (3.0 - math.sqrt(5.0))
    for k, idx in enumerate(free):
        r = math.sqrt((k + 0.5) / len(free))
        t = golden * k
        x, y = 6.6 * r * math.cos(t), -0.8 + 7.6 * r * math.sin(t)
        pts[idx] = (x, y, surface_z(x, y))

    doc = {
        "schema": "agile-head-mesh/1",
        "units": "cm",
        "axes": "x toward subject's left, y up, z toward camera",
        "points": [[round(c, 12) for c in p] for p in pts],
    }
    with open(out_path, "w") as f:
        json.dump(doc, f, indent=None, separators=(",", ":"))
        f.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/canonical_face_mesh.json")
