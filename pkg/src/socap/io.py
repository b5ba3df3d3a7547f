"""Delimited-file readers and writers with sidecar schema descriptors."""

from __future__ import annotations

import csv
import json
import logging
import math
from datetime import date
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .graph import IngestError, SocialGraph, from_index_arrays
from .procurement import AwardCriteria, ContractRecord, ProcedureKind

log = logging.getLogger(__name__)

CONTRACT_COLUMNS = (
    "contract_id", "settlement_id", "cpv_code", "n_bidders", "procedure_kind", "call_published",
    "call_date", "submission_deadline", "decision_date", "eligibility_criteria_len",
    "award_criteria", "call_modified",
)
CONTRACT_TYPES = {
    "contract_id": "string", "settlement_id": "string", "cpv_code": "string", "n_bidders": "integer",
    "procedure_kind": "enum:open_call|direct_award|invite_only", "call_published": "boolean",
    "call_date": "date", "submission_deadline": "date", "decision_date": "date",
    "eligibility_criteria_len": "integer", "award_criteria": "enum:price_only|non_price",
    "call_modified": "boolean",
}


class MalformedRow(ValueError):
    pass


class TooManyErrors(IngestError):
    pass


def fmt(x) -> str:
    """Canonical cell text: empty for missing, shortest round-trip for floats."""
    if x is None:
        return ""
    if isinstance(x, bool) or isinstance(x, np.bool_):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return ""
        return repr(x)
    if isinstance(x, date):
        return x.isoformat()
    if hasattr(x, "value"):
        return str(x.value)
    return str(x)


def write_table(path, columns: Sequence[str], rows: Iterable[Sequence], types: Optional[dict] = None,
                delimiter: str = ",") -> Path:
    """Write a delimited table plus ``<path>.schema.json`` describing its columns."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(x) for x in r])
            n += 1
    types = types or {}
    schema = {"file": path.name, "delimiter": delimiter, "header": True, "rows": n,
              "columns": [{"name": c, "type": types.get(c, "string")} for c in columns]}
    Path(str(path) + ".schema.json").write_text(json.dumps(schema, indent=2) + "\n", encoding="utf-8")
    return path


def read_table(path, delimiter: str = ",") -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh, delimiter=delimiter))


def _check_error_rate(errors: list, total: int, max_rate: float, what: str) -> None:
    if total and len(errors) / total > max_rate:
        raise TooManyErrors(f"{what}: {len(errors)} malformed rows out of {total} exceeds {max_rate:.1%}")


def read_pairs(path, delimiter: str = ",", header: bool = False, max_error_rate: float = 0.01,
               what: str = "edges"):
    """Two-column rows; returns (pairs, errors) where errors are (line, reason, text)."""
    pairs, errors, total = [], [], 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            total += 1
            cells = [c.strip() for c in row]
            if len(cells) != 2 or not cells[0] or not cells[1]:
                errors.append((lineno, "MALFORMED_ROW", delimiter.join(row)))
                log.warning("MALFORMED_ROW %s:%d %r", path, lineno, row)
                continue
            pairs.append((cells[0], cells[1]))
    _check_error_rate(errors, total, max_error_rate, f"{what} file {path}")
    return pairs, errors


def graph_from_pairs(edges: list, attribution: dict) -> SocialGraph:
    """Fast path of :func:`socap.graph.build_graph` for string identifiers."""
    node_ids = list(attribution)
    index = {n: i for i, n in enumerate(node_ids)}
    settlements = list(dict.fromkeys(attribution.values()))
    s_index = {s: i for i, s in enumerate(settlements)}
    codes = np.fromiter((s_index[attribution[n]] for n in node_ids), np.int64, len(node_ids))
    try:
        u = np.fromiter((index[a] for a, _ in edges), np.int64, len(edges))
        v = np.fromiter((index[b] for _, b in edges), np.int64, len(edges))
    except KeyError as exc:
        raise IngestError(f"node {exc.args[0]!r} appears in edges but has no settlement attribution") from None
    return from_index_arrays(u, v, node_ids, codes, settlements)


def write_graph(g: SocialGraph, edges_path, attribution_path) -> None:
    ids = g.node_ids
    write_table(edges_path, ["node_u", "node_v"], ((ids[u], ids[v]) for u, v in g.edge_array()))
    write_table(attribution_path, ["node_id", "settlement_id"],
                ((n, g.settlement_ids[c]) for n, c in zip(ids, g.settlement_codes)))


# -- contracts ----------------------------------------------------------------

def _opt(cell: str):
    cell = cell.strip() if cell is not None else ""
    return cell or None


def _bool(cell):
    c = _opt(cell)
    if c is None:
        return None
    lc = c.lower()
    if lc in ("1", "true", "yes", "y", "t"):
        return True
    if lc in ("0", "false", "no", "n", "f"):
        return False
    raise MalformedRow(f"not a boolean: {c!r}")


def _int(cell):
    c = _opt(cell)
    if c is None:
        return None
    try:
        return int(c)
    except ValueError:
        raise MalformedRow(f"not an integer: {c!r}") from None


def _date(cell):
    c = _opt(cell)
    if c is None:
        return None
    try:
        return date.fromisoformat(c)
    except ValueError:
        raise MalformedRow(f"not an ISO date: {c!r}") from None


def _enum(cls, cell):
    c = _opt(cell)
    if c is None:
        return None
    try:
        return cls(c)
    except ValueError:
        raise MalformedRow(f"not a {cls.__name__}: {c!r}") from None


def parse_contract(row: dict) -> ContractRecord:
    cid, sid = _opt(row.get("contract_id")), _opt(row.get("settlement_id"))
    if cid is None or sid is None:
        raise MalformedRow("contract_id and settlement_id are required")
    return ContractRecord(
        contract_id=cid, settlement_id=sid, cpv_code=_opt(row.get("cpv_code")),
        n_bidders=_int(row.get("n_bidders")), procedure_kind=_enum(ProcedureKind, row.get("procedure_kind")),
        call_published=_bool(row.get("call_published")), call_date=_date(row.get("call_date")),
        submission_deadline=_date(row.get("submission_deadline")), decision_date=_date(row.get("decision_date")),
        eligibility_criteria_len=_int(row.get("eligibility_criteria_len")),
        award_criteria=_enum(AwardCriteria, row.get("award_criteria")),
        call_modified=_bool(row.get("call_modified")),
    )


def read_contracts(path, delimiter: str = ",", max_error_rate: float = 0.01):
    """Contracts and per-row errors ``(line, reason, message)``."""
    out, errors = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        missing = set(CONTRACT_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise IngestError(f"contract file {path} lacks columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(parse_contract(row))
            except MalformedRow as exc:
                log.warning("MALFORMED_ROW %s:%d %s", path, lineno, exc)
                errors.append((lineno, "MALFORMED_ROW", str(exc)))
    _check_error_rate(errors, len(out) + len(errors), max_error_rate, f"contract file {path}")
    return out, errors


def write_contracts(path, contracts: Iterable[ContractRecord]) -> Path:
    return write_table(path, CONTRACT_COLUMNS,
                       ([getattr(c, k) for k in CONTRACT_COLUMNS] for c in contracts), CONTRACT_TYPES)


def read_numeric_table(path, key: str = "settlement_id", delimiter: str = ","):
    """``{key: {column: float}}`` with empty cells as NaN."""
    out = {}
    for row in read_table(path, delimiter):
        k = row.pop(key)
        out[k] = {c: (float(v) if v not in ("", None) else math.nan) for c, v in row.items()}
    return out
