"""Published values for the levitation example, kept for comparison only.

Nothing here feeds a computation. The design reports diff computed values
against this table and list every entry that is off by more than 1 %.
"""

import numpy as np

DISCREPANCY_THRESHOLD = 0.01

# Values exactly as printed, typos included.
PUBLISHED = {
    "equilibrium": [0.06, 0.0, 0.8],
    "A": [[0, 1, 0], [296.29, 0, -22.2], [0, 0, -1.2]],
    "B": [[0], [0], [0.12]],
    "ctrb": [[0, 0, -2.6640], [0, -2.6640, 3.1968], [0.1200, -0.1440, 0.1728]],
    "obsv": [[1, 0, 0], [0, 1, 0], [296.29, 0, -22.20]],
    "phi": [1, 1.2, -296.29, -355.548],
    "A_c": [[0, 1, 0], [0, 0, 1], [355.548, 296.29, -1.2]],
    # printed expansion of (s+5)(s+10)(s+20); the signs of the last two
    # terms are misprinted
    "phi_bar": [1, 35, -350, -1000],
    "T_c": [[-2.6640, 0, 0], [0, -2.664, 0], [-35.5548, 0, 0.12]],
    "K_c": [[-1355.5, -646.3, -33.8]],
    # third entry printed as -28.17; K_c T_c^-1 gives about -281.7
    "K": [[4268.1, 242.6, -28.17]],
    # printed without the display scale factors (1e5 for S, 1e3 for K)
    "S": [[4.8731, 0.2831, -0.3413],
          [0.2831, 0.0164, -0.0198],
          [-0.3413, -0.0198, 0.0239]],
    "K_lqr": [[-4.0959, -0.2380, 0.2869]],
}


def _label(key, idx, shape):
    if len(shape) == 1:
        return f"{key}[{idx[0] + 1}]"
    if shape[0] == 1:
        return f"{key}[{idx[1] + 1}]"
    return f"{key}({idx[0] + 1},{idx[1] + 1})"


def discrepancies(computed, threshold=DISCREPANCY_THRESHOLD):
    """Entries of ``computed`` (dict key -> array) that differ from the table.

    Relative error is taken against the published entry; published zeros
    are compared against the largest published magnitude in that array.

    Returns a list of dicts with ``name``, ``published``, ``computed``,
    ``rel_error`` and ``ratio`` (computed / published, None for zeros).
    """
    found = []
    for key in sorted(computed):
        if key not in PUBLISHED:
            continue
        ref = np.asarray(PUBLISHED[key], dtype=float)
        val = np.asarray(computed[key], dtype=float).reshape(ref.shape)
        scale = float(np.max(np.abs(ref))) or 1.0
        for idx in np.ndindex(ref.shape):
            p, c = float(ref[idx]), float(val[idx])
            if p != 0.0:
                rel = abs(c - p) / abs(p)
                ratio = c / p
            else:
                rel = abs(c) / scale
                ratio = None
            if rel > threshold:
                found.append({"name": _label(key, idx, ref.shape),
                              "published": p, "computed": c,
                              "rel_error": rel, "ratio": ratio})
    return found


def scale_factors(found):
    """Arrays whose flagged entries all differ by one common power of ten.

    Returns ``{key: exponent}``; a match suggests the published numbers lost
    a display multiplier rather than being wrong.
    """
    groups = {}
    for d in found:
        key = d["name"].split("[")[0].split("(")[0]
        groups.setdefault(key, []).append(d["ratio"])
    out = {}
    for key, ratios in sorted(groups.items()):
        if key not in PUBLISHED or any(r is None or r <= 0 for r in ratios):
            continue
        nonzero = int(np.count_nonzero(PUBLISHED[key]))
        if len(ratios) != nonzero:
            continue
        logs = np.log10(ratios)
        exp = int(np.round(logs[0]))
        if exp != 0 and np.all(np.abs(logs - exp) < 0.01):
            out[key] = exp
    return out
