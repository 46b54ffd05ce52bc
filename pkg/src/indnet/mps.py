"""Free-format MPS export and import.

Column names are the model's variable keys; rows are named ``R<index>`` and
preceded by a comment line carrying the row tag.  The reader ignores
comments and accepts the usual bound types; RANGES are not supported.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .formulation import MilpModel
from .lp import LpProblem


class MpsError(ValueError):
    pass


def _fmt(v: float) -> str:
    return repr(float(v)) if v != int(v) or abs(v) >= 1e15 else str(int(v))


def mps_text(model: MilpModel) -> str:
    out = io.StringIO()
    w = out.write
    w(f"NAME {model.name}\n")
    w("OBJSENSE\n    MAX\n" if model.maximize else "OBJSENSE\n    MIN\n")
    w("ROWS\n N obj\n")
    for i, tag in enumerate(model.tags):
        w(f"* R{i} {tag}\n")
        w(f" {model.senses[i]} R{i}\n")
    w("COLUMNS\n")
    A = model.A.tocsc()
    names = [str(k) for k in model.keys]
    in_int = False
    for j in range(model.n):
        if model.integer[j] != in_int:
            w(f"    M{j} 'MARKER' '{'INTORG' if model.integer[j] else 'INTEND'}'\n")
            in_int = bool(model.integer[j])
        if model.obj[j] != 0:
            w(f"    {names[j]} obj {_fmt(model.obj[j])}\n")
        lo, hi = A.indptr[j], A.indptr[j + 1]
        for i, v in zip(A.indices[lo:hi], A.data[lo:hi]):
            w(f"    {names[j]} R{i} {_fmt(v)}\n")
        if lo == hi and model.obj[j] == 0:
            w(f"    {names[j]} obj 0\n")
    if in_int:
        w(f"    M{model.n} 'MARKER' 'INTEND'\n")
    w("RHS\n")
    for i, r in enumerate(model.rhs):
        if r != 0:
            w(f"    rhs R{i} {_fmt(r)}\n")
    w("BOUNDS\n")
    for j in range(model.n):
        lo, hi = model.lb[j], model.ub[j]
        name = names[j]
        if lo == hi:
            w(f" FX bnd {name} {_fmt(lo)}\n")
            continue
        if model.integer[j] and lo == 0 and hi == 1:
            w(f" BV bnd {name}\n")
            continue
        if not np.isfinite(lo) and not np.isfinite(hi):
            w(f" FR bnd {name}\n")
            continue
        if not np.isfinite(lo):
            w(f" MI bnd {name}\n")
        elif lo != 0:
            w(f" LO bnd {name} {_fmt(lo)}\n")
        if np.isfinite(hi):
            w(f" UP bnd {name} {_fmt(hi)}\n")
    w("ENDATA\n")
    return out.getvalue()


def write_mps(model: MilpModel, path: str | Path) -> None:
    Path(path).write_text(mps_text(model))


@dataclass
class MpsModel:
    name: str
    problem: LpProblem
    integer: np.ndarray
    col_names: list[str]
    row_names: list[str]


def parse_mps(text: str) -> MpsModel:
    name = ""
    section = None
    maximize = False
    obj_row = None
    rows: dict[str, int] = {}
    senses: list[str] = []
    cols: dict[str, int] = {}
    integer: list[bool] = []
    entries: list[tuple[int, int, float]] = []
    cost: dict[int, float] = {}
    rhs: dict[int, float] = {}
    bounds: dict[int, list[float]] = {}
    in_int = False

    def col(cname: str) -> int:
        if cname not in cols:
            cols[cname] = len(cols)
            integer.append(in_int)
        return cols[cname]

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip()
        if not line or line.lstrip().startswith("*"):
            continue
        tok = line.split()
        if not raw[0].isspace():
            section = tok[0].upper()
            if section == "NAME":
                name = tok[1] if len(tok) > 1 else ""
            elif section == "OBJSENSE" and len(tok) > 1:
                maximize = tok[1].upper() in ("MAX", "MAXIMIZE")
            elif section == "RANGES":
                raise MpsError(f"line {lineno}: RANGES section is not supported")
            elif section == "ENDATA":
                break
            continue
        try:
            if section == "OBJSENSE":
                maximize = tok[0].upper() in ("MAX", "MAXIMIZE")
            elif section == "ROWS":
                kind, rname = tok[0].upper(), tok[1]
                if kind == "N":
                    if obj_row is None:
                        obj_row = rname
                    continue
                if kind not in ("L", "G", "E"):
                    raise MpsError(f"line {lineno}: unknown row type {kind}")
                rows[rname] = len(senses)
                senses.append(kind)
            elif section == "COLUMNS":
                if len(tok) >= 3 and tok[1].strip("'").upper() == "MARKER":
                    in_int = tok[2].strip("'").upper() == "INTORG"
                    continue
                j = col(tok[0])
                for rname, val in zip(tok[1::2], tok[2::2]):
                    if rname == obj_row:
                        cost[j] = cost.get(j, 0.0) + float(val)
                    elif rname in rows:
                        entries.append((rows[rname], j, float(val)))
                    else:
                        raise MpsError(f"line {lineno}: unknown row {rname}")
            elif section == "RHS":
                pairs = tok[1:] if len(tok) % 2 == 1 else tok
                for rname, val in zip(pairs[::2], pairs[1::2]):
                    if rname == obj_row:
                        continue
                    if rname not in rows:
                        raise MpsError(f"line {lineno}: unknown row {rname}")
                    rhs[rows[rname]] = float(val)
            elif section == "BOUNDS":
                kind, cname = tok[0].upper(), tok[2]
                if cname not in cols:
                    raise MpsError(f"line {lineno}: bound on unknown column {cname}")
                j = cols[cname]
                b = bounds.setdefault(j, [0.0, np.inf])
                val = float(tok[3]) if len(tok) > 3 else None
                if kind == "UP":
                    b[1] = val
                    if val < 0 and b[0] == 0:
                        b[0] = -np.inf
                elif kind == "LO":
                    b[0] = val
                elif kind == "FX":
                    b[0] = b[1] = val
                elif kind == "FR":
                    b[0], b[1] = -np.inf, np.inf
                elif kind == "MI":
                    b[0] = -np.inf
                elif kind == "PL":
                    b[1] = np.inf
                elif kind == "BV":
                    b[0], b[1] = 0.0, 1.0
                    integer[j] = True
                elif kind in ("LI", "UI"):
                    b[0 if kind == "LI" else 1] = val
                    integer[j] = True
                else:
                    raise MpsError(f"line {lineno}: unknown bound type {kind}")
            else:
                raise MpsError(f"line {lineno}: data outside a known section")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, MpsError):
                raise
            raise MpsError(f"line {lineno}: malformed record {line.strip()!r}") from exc

    m, n = len(senses), len(cols)
    if entries:
        r, c, v = zip(*entries)
        A = sp.csr_matrix((v, (r, c)), shape=(m, n))
    else:
        A = sp.csr_matrix((m, n))
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    for j, (lo, hi) in bounds.items():
        lb[j], ub[j] = lo, hi
    c = np.zeros(n)
    for j, v in cost.items():
        c[j] = v
    b = np.zeros(m)
    for i, v in rhs.items():
        b[i] = v
    problem = LpProblem(A, np.array(senses, dtype="<U1"), b, c, lb, ub, maximize)
    return MpsModel(name, problem, np.array(integer, dtype=bool), list(cols), list(rows))


def read_mps(path: str | Path) -> MpsModel:
    return parse_mps(Path(path).read_text())
