"""CSV loaders and exporters for the bundled dataset schemas.

Schemas (header row mandatory, plain decimal fields):

    logistic  group,smoke,age,y
    poisson   patient,base,trt,age,visit,y
    mmnl      resp,scenario,alt,at,td,fee,li,res,chosen

The mmnl file is in long format, one row per (respondent, scenario,
alternative); `alt` is an index 0..2 or one of FSP/PSP/PUP and `chosen`
is a 0/1 indicator with exactly one 1 per scenario.
"""

from __future__ import annotations

import csv
from collections import OrderedDict
from pathlib import Path

import numpy as np

from .logistic import LongitudinalBinaryData
from .mmnl import ALTERNATIVES, PanelChoiceData
from .poisson import LongitudinalCountData


class SchemaError(ValueError):
    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


_HEADERS = {
    "logistic": ["group", "smoke", "age", "y"],
    "poisson": ["patient", "base", "trt", "age", "visit", "y"],
    "mmnl": ["resp", "scenario", "alt", "at", "td", "fee", "li", "res", "chosen"],
}


def _read_rows(path, kind):
    if kind not in _HEADERS:
        raise ValueError(f"unknown model kind {kind!r}")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("file is empty, expected a header row")
        expected = _HEADERS[kind]
        if [h.strip() for h in header] != expected:
            raise SchemaError(f"expected header {','.join(expected)}", row=1)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise SchemaError(f"expected {len(expected)} fields", row=lineno)
            rows.append((lineno, row))
    if not rows:
        raise SchemaError("no data rows after the header")
    return rows


def _number(value, field, lineno):
    try:
        return float(value)
    except ValueError:
        raise SchemaError(f"field {field!r} is not numeric: {value!r}", row=lineno)


def load_csv(path, kind):
    """Parse a dataset file; validates schema and group structure."""
    rows = _read_rows(path, kind)
    if kind == "logistic":
        groups = OrderedDict()
        for lineno, row in rows:
            g = row[0].strip()
            smoke = _number(row[1], "smoke", lineno)
            age = _number(row[2], "age", lineno)
            y = _number(row[3], "y", lineno)
            if y not in (0.0, 1.0):
                raise SchemaError("y must be 0 or 1", row=lineno)
            groups.setdefault(g, []).append((1.0, smoke, age, smoke * age, y))
        xs = [np.array([r[:4] for r in rs]) for rs in groups.values()]
        ys = [np.array([r[4] for r in rs]) for rs in groups.values()]
        return LongitudinalBinaryData(x=xs, y=ys)

    if kind == "poisson":
        groups = OrderedDict()
        for lineno, row in rows:
            g = row[0].strip()
            base = _number(row[1], "base", lineno)
            trt = _number(row[2], "trt", lineno)
            age = _number(row[3], "age", lineno)
            visit = _number(row[4], "visit", lineno)
            y = _number(row[5], "y", lineno)
            if y < 0 or y != round(y):
                raise SchemaError("y must be a non-negative integer", row=lineno)
            groups.setdefault(g, []).append(
                ((1.0, base, trt, base * trt, age, visit), (1.0, visit), y)
            )
        xs = [np.array([r[0] for r in rs]) for rs in groups.values()]
        zs = [np.array([r[1] for r in rs]) for rs in groups.values()]
        ys = [np.array([r[2] for r in rs]) for rs in groups.values()]
        return LongitudinalCountData(x=xs, z=zs, y=ys)

    # mmnl long format
    resp = OrderedDict()
    for lineno, row in rows:
        r_id = row[0].strip()
        scen = row[1].strip()
        alt_raw = row[2].strip()
        if alt_raw in ALTERNATIVES:
            alt = ALTERNATIVES.index(alt_raw)
        else:
            alt = int(_number(alt_raw, "alt", lineno))
            if alt not in (0, 1, 2):
                raise SchemaError("alt must be 0..2 or FSP/PSP/PUP", row=lineno)
        record = resp.setdefault(r_id, {"li": None, "res": None, "scen": OrderedDict()})
        li = _number(row[6], "li", lineno)
        res = _number(row[7], "res", lineno)
        for name, val, prev in (("li", li, record["li"]), ("res", res, record["res"])):
            if prev is not None and prev != val:
                raise SchemaError(f"{name} differs within respondent", row=lineno)
        record["li"], record["res"] = li, res
        cell = record["scen"].setdefault(scen, {})
        if alt in cell:
            raise SchemaError("duplicate (scenario, alt) row", row=lineno)
        cell[alt] = (
            _number(row[3], "at", lineno),
            _number(row[4], "td", lineno),
            _number(row[5], "fee", lineno),
            _number(row[8], "chosen", lineno),
            lineno,
        )
    ats, tds, fees, lis, ress, chs = [], [], [], [], [], []
    for r_id, record in resp.items():
        at_r, td_r, fee_r, ch_r = [], [], [], []
        for scen, cell in record["scen"].items():
            if sorted(cell) != [0, 1, 2]:
                raise SchemaError(
                    f"respondent {r_id} scenario {scen}: need all 3 alternatives"
                )
            chosen = [alt for alt in (0, 1, 2) if cell[alt][3] == 1.0]
            if len(chosen) != 1:
                raise SchemaError(
                    f"respondent {r_id} scenario {scen}: exactly one chosen "
                    "alternative required"
                )
            at_r.append([cell[alt][0] for alt in (0, 1, 2)])
            td_r.append([cell[alt][1] for alt in (0, 1, 2)])
            fee_r.append([cell[alt][2] for alt in (0, 1, 2)])
            ch_r.append(chosen[0])
        ats.append(np.array(at_r))
        tds.append(np.array(td_r))
        fees.append(np.array(fee_r))
        lis.append(record["li"])
        ress.append(record["res"])
        chs.append(np.array(ch_r))
    return PanelChoiceData(at=ats, td=tds, fee=fees, li=lis, res=ress, chosen=chs)


def export_csv(dataset, path):
    """Write a dataset back out in its schema; inverse of load_csv."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        if isinstance(dataset, LongitudinalBinaryData):
            writer.writerow(_HEADERS["logistic"])
            for g, (x, y) in enumerate(zip(dataset.x, dataset.y)):
                for row, yv in zip(x, y):
                    writer.writerow([g, row[1], row[2], int(yv)])
        elif isinstance(dataset, LongitudinalCountData):
            writer.writerow(_HEADERS["poisson"])
            for g, (x, y) in enumerate(zip(dataset.x, dataset.y)):
                for row, yv in zip(x, y):
                    writer.writerow([g, row[1], row[2], row[4], row[5], int(yv)])
        elif isinstance(dataset, PanelChoiceData):
            writer.writerow(_HEADERS["mmnl"])
            for r in range(dataset.n):
                for j in range(dataset.at[r].shape[0]):
                    for alt in (0, 1, 2):
                        writer.writerow(
                            [
                                r,
                                j,
                                alt,
                                dataset.at[r][j, alt],
                                dataset.td[r][j, alt],
                                dataset.fee[r][j, alt],
                                int(dataset.li[r]),
                                int(dataset.res[r]),
                                int(dataset.chosen[r][j] == alt),
                            ]
                        )
        else:
            raise ValueError(f"cannot export {type(dataset).__name__}")
