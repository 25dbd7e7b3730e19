"""Matrix export formats for alignment inspection.

CSV: T rows of T comma-separated values at 9 significant digits.
PGM: plain-text P2 grayscale; alignment scores in (0,1) map through
round(255*v), cosine values in [-1,1] through round(255*(v+1)/2).
"""

import numpy as np


def matrix_to_csv(m):
    rows = [",".join(f"{v:.9g}" for v in row) for row in np.asarray(m)]
    return "".join(r + "\n" for r in rows)


def csv_to_matrix(text):
    rows = [line for line in text.splitlines() if line.strip()]
    return np.array([[float(v) for v in row.split(",")] for row in rows])


def matrix_to_pgm(m, lo, hi):
    """Plain PGM with values linearly mapped from [lo, hi] to 0..255."""
    a = np.asarray(m)
    levels = np.rint(255.0 * (a - lo) / (hi - lo)).astype(int)
    levels = np.clip(levels, 0, 255)
    head = f"P2\n{a.shape[1]} {a.shape[0]}\n255\n"
    body = "".join(" ".join(str(v) for v in row) + "\n" for row in levels)
    return head + body


def alignment_pgm(p):
    return matrix_to_pgm(p, 0.0, 1.0)


def cosine_pgm(s):
    return matrix_to_pgm(s, -1.0, 1.0)
