"""File formats: problem CSVs, allocation files and the JSON result documents."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

from .allocore import BoxProblem, Partition
from .popgen import default_lower, default_upper, sample_size

__all__ = [
    "ProblemData",
    "dump_document",
    "read_allocation",
    "read_problem_csv",
    "solve_document",
    "strata_csv",
]


class FormatError(ValueError):
    """Input file could not be parsed."""


@dataclass(frozen=True)
class ProblemData:
    labels: tuple
    A: tuple
    m: tuple
    M: tuple
    schema: str
    N: tuple | None = None
    S: tuple | None = None

    @property
    def N_total(self):
        return None if self.N is None else sum(self.N)

    @property
    def B(self):
        if self.N is None:
            return None
        return math.fsum(Nh * Sh * Sh for Nh, Sh in zip(self.N, self.S))

    def resolve_n(self, n=None, fraction=None) -> float:
        if n is not None and fraction is not None:
            raise FormatError("give either --n or --fraction, not both")
        if n is not None:
            return float(n)
        if fraction is None:
            raise FormatError("a total sample size (--n or --fraction) is required")
        if self.N is None:
            raise FormatError("--fraction needs stratum sizes N in the input")
        return float(sample_size(fraction, self.N_total))

    def problem(self, n) -> BoxProblem:
        return BoxProblem(self.labels, self.A, self.m, self.M, n)


_SCHEMAS = {
    ("A", "m", "M"): "box",
    ("N", "S", "m", "M"): "stsi",
    ("N", "S"): "population",
}


def _num(row, key, lineno):
    try:
        return float(row[key])
    except (TypeError, ValueError):
        raise FormatError(f"line {lineno}: column {key!r} is not a number: {row.get(key)!r}") from None


def read_problem_csv(path, stsi: bool = False) -> ProblemData:
    """Parse a strata CSV; the schema is picked from the header.

    ``stratum,A,m,M`` gives the coefficients directly; ``stratum,N,S,m,M``
    and ``label,N,S`` (population files) are converted with ``A_h = N_h S_h``,
    the latter using the default bound policies.
    """
    try:
        with open(path, newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise FormatError(str(exc)) from exc
    reader = csv.DictReader(io.StringIO(text))
    header = [c.strip() for c in (reader.fieldnames or [])]
    if not header:
        raise FormatError(f"{path}: empty file")
    if header[0] not in ("stratum", "label"):
        raise FormatError(f"{path}: first column must be 'stratum' or 'label'")
    schema = _SCHEMAS.get(tuple(header[1:]))
    if schema is None:
        raise FormatError(f"{path}: unrecognised header {','.join(header)}")
    if stsi and schema == "box":
        raise FormatError("--stsi needs N and S columns")
    reader.fieldnames = header
    rows = list(reader)
    if not rows:
        raise FormatError(f"{path}: no strata rows")
    key = header[0]
    labels, A, m, M, Ns, Ss = [], [], [], [], [], []
    for lineno, row in enumerate(rows, start=2):
        if None in row or any(v is None for v in row.values()):
            raise FormatError(f"line {lineno}: wrong number of fields")
        labels.append(row[key].strip())
        if schema == "box":
            A.append(_num(row, "A", lineno))
            m.append(_num(row, "m", lineno))
            M.append(_num(row, "M", lineno))
            continue
        N_h, S_h = _num(row, "N", lineno), _num(row, "S", lineno)
        if N_h != int(N_h) or N_h < 1:
            raise FormatError(f"line {lineno}: N must be a positive integer")
        N_h = int(N_h)
        Ns.append(N_h)
        Ss.append(S_h)
        A.append(N_h * S_h)
        if schema == "stsi":
            m.append(_num(row, "m", lineno))
            M.append(_num(row, "M", lineno))
        else:
            m.append(default_lower(N_h, S_h))
            M.append(default_upper(N_h, S_h))
    if schema == "box":
        return ProblemData(tuple(labels), tuple(A), tuple(m), tuple(M), schema)
    return ProblemData(tuple(labels), tuple(A), tuple(m), tuple(M), schema, tuple(Ns), tuple(Ss))


def read_allocation(path) -> dict:
    """Read a solve document (JSON) or a ``label,x[,role]`` CSV.

    Returns ``{"labels", "x", "roles" (or None), "n" (or None), "algorithm" (or None)}``.
    """
    try:
        with open(path, newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise FormatError(str(exc)) from exc
    if not text.strip():
        raise FormatError(f"{path}: empty file")
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
            strata = doc["strata"]
            labels = [str(r["label"]) for r in strata]
            x = [float(r["x"]) for r in strata]
            roles = [r.get("role") for r in strata]
        except (ValueError, KeyError, TypeError) as exc:
            raise FormatError(f"{path}: malformed allocation document ({exc})") from exc
        return {
            "labels": labels,
            "x": x,
            "roles": roles if all(roles) else None,
            "n": doc.get("n"),
            "algorithm": doc.get("algorithm"),
        }
    reader = csv.DictReader(io.StringIO(text))
    fields = [c.strip() for c in (reader.fieldnames or [])]
    reader.fieldnames = fields
    if len(fields) < 2 or fields[0] not in ("stratum", "label") or fields[1] != "x":
        raise FormatError(f"{path}: expected header label,x[,role]")
    labels, x, roles = [], [], []
    for lineno, row in enumerate(reader, start=2):
        labels.append(row[fields[0]].strip())
        x.append(_num(row, "x", lineno))
        roles.append(row.get("role"))
    if not labels:
        raise FormatError(f"{path}: no allocation rows")
    return {
        "labels": labels,
        "x": x,
        "roles": roles if "role" in fields else None,
        "n": None,
        "algorithm": None,
    }


def partition_from_roles(labels, roles) -> Partition:
    bad = set(roles) - {"min", "max", "neyman"}
    if bad:
        raise FormatError(f"unknown roles: {sorted(bad)}")
    return Partition(
        {h for h, r in zip(labels, roles) if r == "min"},
        {h for h, r in zip(labels, roles) if r == "max"},
    )


def solve_document(algorithm, n, status, labels, x, roles, objective, kind,
                   trace=None, extra=None, timings=None) -> dict:
    """Result document; key order is fixed so identical inputs give identical files."""
    doc = {
        "algorithm": algorithm,
        "n": n,
        "status": status,
        "objective": objective,
        "kind": kind,
        "strata": [
            {"label": h, "x": v, "role": r}
            for h, v, r in zip(labels, x if x is not None else [None] * len(labels), roles)
        ],
    }
    if trace is not None:
        doc["trace"] = [
            {"r": rec.r, "L": sorted(rec.L, key=labels.index), "U": sorted(rec.U, key=labels.index),
             "s": rec.s, "rna_iterations": rec.rna_inner_iters}
            for rec in trace.iterations
        ]
    doc["extra"] = extra or {}
    doc["timings"] = timings or {}
    return doc


def _clean(obj):
    # JSON has no inf / nan
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dump_document(doc) -> str:
    # float repr is the shortest string that round-trips exactly
    return json.dumps(_clean(doc), indent=2) + "\n"


def strata_csv(doc) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "x", "role"])
    for row in doc["strata"]:
        x = row["x"]
        w.writerow([row["label"], "" if x is None else repr(float(x)), row["role"] or ""])
    return buf.getvalue()
