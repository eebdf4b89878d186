"""Published critical couplings g_c(K, E=0) used as regression targets.

``None`` marks a cell with no published value: for method D that means
the defining equation has no root, for method C the case was not run.
"""
from __future__ import annotations

K_VALUES = (2, 3, 4, 5, 6, 8, 12)

UNIFORM = {
    "A": (0.150, 0.187, 0.207, 0.220, 0.230, 0.243, 0.261),
    "B": (0.153, 0.188, 0.208, 0.220, 0.231, 0.243, 0.261),
    "C": (0.154, 0.189, 0.204, 0.219, 0.227, None, None),
    "D": (0.154, 0.194, 0.213, 0.225, 0.234, 0.247, 0.263),
    "E": (0.149, 0.187, 0.207, 0.220, 0.230, 0.243, 0.260),
}

CAUCHY = {
    "A": (0.317, 0.364, 0.389, 0.406, 0.419, 0.436, 0.456),
    "B": (0.334, 0.372, 0.394, 0.410, 0.421, 0.437, 0.457),
    "C": (0.334, 0.370, 0.394, 0.404, 0.422, None, None),
    "D": (None, 0.418, 0.423, 0.432, 0.440, 0.453, 0.470),
    "E": (0.367, 0.384, 0.403, 0.417, 0.428, 0.444, 0.463),
}

TABLES = {"uniform": UNIFORM, "cauchy": CAUCHY}

TOLERANCE = {"A": 0.001, "B": 0.001, "D": 0.001, "E": 0.001}
TOLERANCE_C = {"uniform": 0.005, "cauchy": 0.01}


def reference(disorder: str, method: str, K: int):
    """``(value, tolerance, known)``; ``known`` is False outside the tables."""
    table = TABLES.get(disorder)
    if table is None or method not in table or K not in K_VALUES:
        return None, None, False
    value = table[method][K_VALUES.index(K)]
    tol = TOLERANCE_C[disorder] if method == "C" else TOLERANCE[method]
    # method C blanks are cases that were not run
    known = not (method == "C" and value is None)
    return value, tol, known
