"""CSV renderings of coefficient tables and the printed reference tables."""
from __future__ import annotations

import csv
import io
from importlib import resources

import numpy as np

from .game import InfoSpace
from .series import AlphaTable

REFERENCE_TABLES = ("table1", "table2", "table3", "table4", "table5")


def fmt(x: float, digits: int | None = None) -> str:
    """Locale-free number text; ``digits=None`` keeps full round-trip precision."""
    x = float(x)
    if digits is None:
        return repr(x)
    return f"{x:.{digits}f}"


def zeta_labels(space: InfoSpace) -> list[str]:
    return [space.label(i) for i in range(space.size)]


def emit_table(table: AlphaTable, layout: str = "paper", digits: int | None = None) -> str:
    """Render a coefficient table as CSV.

    ``paper`` lists ``alpha[0,1]`` and ``alpha[1,0]`` with the information
    states split into two side-by-side halves, like the printed tables;
    ``flat`` has one row per ``(k, l, index)``.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    labels = zeta_labels(table.space)
    n = table.space.size
    if layout == "flat":
        w.writerow(["k", "l", "index", "zeta", "value"])
        for k, l in table.orders():
            for i, v in enumerate(table[k, l]):
                w.writerow([k, l, i, labels[i], fmt(v, digits)])
    elif layout == "paper":
        if (0, 1) not in table or (1, 0) not in table:
            raise ValueError("paper layout needs alpha[0,1] and alpha[1,0] (K >= 1)")
        a01, a10 = table.alpha01, table.alpha10
        half = n // 2 if n % 2 == 0 else n
        header = ["zeta", "alpha01", "alpha10"]
        w.writerow(header + header if half < n else header)
        for i in range(half):
            row = [labels[i], fmt(a01[i], digits), fmt(a10[i], digits)]
            if half < n:
                j = i + half
                row += [labels[j], fmt(a01[j], digits), fmt(a10[j], digits)]
            w.writerow(row)
    else:
        raise ValueError(f"unknown layout {layout!r}")
    return buf.getvalue()


def parse_flat_table(text: str) -> dict:
    """Inverse of the flat layout: ``{(k, l): vector}``."""
    rows = list(csv.DictReader(io.StringIO(text)))
    out: dict = {}
    for r in rows:
        out.setdefault((int(r["k"]), int(r["l"])), {})[int(r["index"])] = float(r["value"])
    return {kl: np.array([d[i] for i in range(len(d))]) for kl, d in out.items()}


def load_reference(name: str) -> dict:
    """Printed coefficient columns of a reference table, indexed by information state."""
    if name not in REFERENCE_TABLES:
        raise KeyError(f"unknown reference table {name!r}")
    text = resources.files("vodi").joinpath("data", f"reference_{name}.csv").read_text()
    rows = list(csv.DictReader(io.StringIO(text)))
    cols = [c for c in rows[0] if c not in ("index", "zeta")]
    return {c: np.array([float(r[c]) for r in rows]) for c in cols}


def sign_agreement(computed: np.ndarray, printed: np.ndarray, digits: int = 2) -> float:
    """Percentage of entries whose sign matches after rounding to the printed precision."""
    c = np.sign(np.round(computed, digits))
    return 100.0 * float(np.mean(c == np.sign(printed)))
