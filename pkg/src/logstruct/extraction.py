"""Apply a discovered plan to a full corpus and emit relational output.

Each record type gets one root table; every array node gets a child table
linked by a ``_parent_id`` foreign key (nested arrays chain grandchild
tables).  Each field placeholder maps to exactly one column.  Unmatched
lines go to a noise sidecar, so records plus noise reconstruct the corpus.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, TextView
from .pipeline import ExtractionPlan
from .scoring import candidate_lines
from .templates import (
    Array,
    Field,
    Node,
    Struct,
    canonical_string,
    compile_template,
    field_count,
    iter_arrays,
    render_record,
)


class OutputError(Exception):
    pass


@dataclass
class TableSchema:
    name: str
    columns: list[str]
    parent: str | None  # parent table name for child tables


@dataclass
class TemplateSchema:
    type_index: int
    template: Node
    tables: list[TableSchema]  # index 0 is the root table
    leaf_table: list[int]  # leaf index -> table position
    leaf_col: list[int]  # leaf index -> column position in its table
    array_table: list[int]  # array index -> its child-table position


def build_schema(type_index: int, template: Node) -> TemplateSchema:
    n_leaves = field_count(template)
    arrays = list(iter_arrays(template))
    root = TableSchema(f"t{type_index}", ["_id"], None)
    tables = [root]
    array_table = [0] * len(arrays)
    leaf_table = [0] * n_leaves
    leaf_col = [0] * n_leaves
    leaf_counter = [0]
    arr_counter = [0]

    def walk(node: Node, table_pos: int) -> None:
        if isinstance(node, Field):
            idx = leaf_counter[0]
            leaf_counter[0] += 1
            leaf_table[idx] = table_pos
            leaf_col[idx] = len(tables[table_pos].columns)
            tables[table_pos].columns.append(f"f{idx}")
        elif isinstance(node, Struct):
            for c in node.children:
                walk(c, table_pos)
        elif isinstance(node, Array):
            aidx = arr_counter[0]
            arr_counter[0] += 1
            child = TableSchema(
                f"t{type_index}_a{aidx}", ["_id", "_parent_id"],
                tables[table_pos].name,
            )
            tables.append(child)
            array_table[aidx] = len(tables) - 1
            walk(node.body, len(tables) - 1)

    walk(template, 0)
    return TemplateSchema(type_index, template, tables, leaf_table, leaf_col,
                          array_table)


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list[str]]


@dataclass
class RecordMeta:
    type_index: int
    row_id: int
    start_line: int
    end_line: int
    start_byte: int
    end_byte: int


@dataclass
class RelationalOutput:
    tables: list[Table]
    foreign_keys: dict[tuple[str, str], str]
    denormalized: list[dict]
    noise: list[tuple[int, bytes]]
    records: list[RecordMeta]
    schemas: list[TemplateSchema]
    source_len: int = 0

    def table(self, name: str) -> Table:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)


def emit_record(schema: TemplateSchema, tables: list[Table],
                values: list[list[bytes]], arities: list[list[int]]) -> tuple[int, dict]:
    """Append one record's rows; returns (root row id, nested form)."""
    leaf_pos = [0] * len(values)
    arr_pos = [0] * len(arities)
    leaf_counter = [0]
    arr_counter = [0]

    def new_row(tpos: int, parent_id: int | None) -> tuple[int, list[str]]:
        t = tables[tpos]
        rid = len(t.rows)
        row = [""] * len(t.columns)
        row[0] = str(rid)
        if parent_id is not None:
            row[1] = str(parent_id)
        t.rows.append(row)
        return rid, row

    def walk(node: Node, row: list[str], obj: dict) -> None:
        if isinstance(node, Field):
            idx = leaf_counter[0]
            leaf_counter[0] += 1
            v = values[idx][leaf_pos[idx]].decode("latin-1")
            leaf_pos[idx] += 1
            row[schema.leaf_col[idx]] = v
            obj[f"f{idx}"] = v
        elif isinstance(node, Struct):
            for c in node.children:
                walk(c, row, obj)
        elif isinstance(node, Array):
            aidx = arr_counter[0]
            arr_counter[0] += 1
            reps = arities[aidx][arr_pos[aidx]]
            arr_pos[aidx] += 1
            tpos = schema.array_table[aidx]
            parent_id = int(row[0])
            leaf_mark = leaf_counter[0]
            arr_mark = arr_counter[0]
            items = []
            single = isinstance(node.body, Field)
            for _ in range(reps):
                leaf_counter[0] = leaf_mark
                arr_counter[0] = arr_mark
                rid, child_row = new_row(tpos, parent_id)
                child_obj: dict = {}
                walk(node.body, child_row, child_obj)
                items.append(next(iter(child_obj.values())) if single else child_obj)
            obj[f"a{aidx}"] = items

    root_id, root_row = new_row(0, None)
    nested: dict = {"_type": schema.tables[0].name, "_row": root_id}
    walk(schema.template, root_row, nested)
    return root_id, nested


def extract_all(corpus: Corpus, plan: ExtractionPlan) -> RelationalOutput:
    """Single pass over the full corpus; templates tried in discovery order."""
    if not plan.templates:
        raise ValueError("empty extraction plan")
    tv = corpus.view()
    buf = tv.data
    offsets = tv.offsets
    n = tv.n_lines
    L = plan.max_span_lines
    compiled = [compile_template(t) for t in plan.template_nodes]
    schemas = [build_schema(i, c.template) for i, c in enumerate(compiled)]
    tables_per_type = [
        [Table(ts.name, list(ts.columns), []) for ts in sc.tables]
        for sc in schemas
    ]
    cand = [candidate_lines(tv, c) for c in compiled]
    denormalized: list[dict] = []
    noise: list[tuple[int, bytes]] = []
    records: list[RecordMeta] = []

    i = 0
    while i < n:
        pos = int(offsets[i])
        hit = None
        for k, comp in enumerate(compiled):
            if not cand[k][i]:
                continue
            endpos = int(offsets[min(i + L, n)])
            hit = comp.match_at(buf, pos, endpos)
            if hit is not None:
                break
        if hit is None:
            end = int(offsets[i + 1])
            noise.append((pos, buf[pos:end]))
            i += 1
            continue
        end, values, arities = hit
        rid, nested = emit_record(schemas[k], tables_per_type[k], values, arities)
        j = int(np.searchsorted(offsets, end, side="left"))
        nested["_span"] = [i, j]
        records.append(RecordMeta(k, rid, i, j, pos, end))
        denormalized.append(nested)
        i = j

    tables = [t for group in tables_per_type for t in group]
    fks: dict[tuple[str, str], str] = {}
    for sc in schemas:
        for ts in sc.tables:
            if ts.parent is not None:
                fks[(ts.name, "_parent_id")] = ts.parent
    return RelationalOutput(tables, fks, denormalized, noise, records,
                            schemas, source_len=len(buf))


# ---------------------------------------------------------------------------
# Record re-serialization (conservation checks)


def record_values(out: RelationalOutput, meta: RecordMeta,
                  children_index: dict | None = None):
    """Recover (values, arities) for one record from the tables via FK joins."""
    schema = out.schemas[meta.type_index]
    if children_index is None:
        children_index = build_children_index(out)
    values: list[list[bytes]] = [[] for _ in range(len(schema.leaf_table))]
    arities: list[list[int]] = [[] for _ in range(len(schema.array_table))]
    leaf_counter = [0]
    arr_counter = [0]

    def walk(node: Node, tpos: int, row: list[str]) -> None:
        if isinstance(node, Field):
            idx = leaf_counter[0]
            leaf_counter[0] += 1
            values[idx].append(row[schema.leaf_col[idx]].encode("latin-1"))
        elif isinstance(node, Struct):
            for c in node.children:
                walk(c, tpos, row)
        elif isinstance(node, Array):
            aidx = arr_counter[0]
            arr_counter[0] += 1
            child_pos = schema.array_table[aidx]
            child_name = schema.tables[child_pos].name
            rows = children_index.get((child_name, int(row[0])), [])
            arities[aidx].append(len(rows))
            leaf_mark = leaf_counter[0]
            arr_mark = arr_counter[0]
            for child_row in rows:
                leaf_counter[0] = leaf_mark
                arr_counter[0] = arr_mark
                walk(node.body, child_pos, child_row)

    root = out.table(schema.tables[0].name).rows[meta.row_id]
    walk(schema.template, 0, root)
    return values, arities


def build_children_index(out: RelationalOutput) -> dict:
    index: dict = {}
    for t in out.tables:
        if len(t.columns) > 1 and t.columns[1] == "_parent_id":
            for row in t.rows:
                index.setdefault((t.name, int(row[1])), []).append(row)
    return index


def reconstruct(out: RelationalOutput) -> bytes:
    """Re-serialize records from the tables plus noise; byte-identical to the
    normalized corpus (modulo a final newline absent at EOF)."""
    pieces: list[tuple[int, bytes]] = list(out.noise)
    idx = build_children_index(out)
    for meta in out.records:
        values, arities = record_values(out, meta, idx)
        schema = out.schemas[meta.type_index]
        rendered = render_record(schema.template, values, arities)
        if meta.end_byte - meta.start_byte == len(rendered) - 1:
            rendered = rendered[:-1]  # record at EOF without trailing newline
        pieces.append((meta.start_byte, rendered))
    pieces.sort(key=lambda p: p[0])
    return b"".join(p[1] for p in pieces)


# ---------------------------------------------------------------------------
# Writers / readers


def write_output(out: RelationalOutput, directory, fmt: str = "both") -> list[str]:
    """Write CSV tables, denormalized NDJSON, noise sidecar, and manifest."""
    if fmt not in ("csv", "json", "both"):
        raise ValueError("format must be csv, json, or both")
    os.makedirs(directory, exist_ok=True)
    written = []

    def path(name: str) -> str:
        return os.path.join(directory, name)

    try:
        if fmt in ("csv", "both"):
            for t in out.tables:
                fname = path(f"{t.name}.csv")
                with open(fname, "w", encoding="latin-1", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(t.columns)
                    w.writerows(t.rows)
                written.append(fname)
        if fmt in ("json", "both"):
            fname = path("records.ndjson")
            with open(fname, "w", encoding="latin-1") as fh:
                for obj in out.denormalized:
                    fh.write(json.dumps(obj, sort_keys=True))
                    fh.write("\n")
            written.append(fname)
        fname = path("_noise.txt")
        with open(fname, "wb") as fh:
            for offset, line in out.noise:
                fh.write(b"%d\t%s\n" % (offset, line.rstrip(b"\n")))
        written.append(fname)
        fname = path("_manifest.json")
        manifest = {
            "source_len": out.source_len,
            "templates": [
                canonical_string(sc.template).decode("latin-1")
                for sc in out.schemas
            ],
            "tables": [
                {"name": ts.name, "columns": ts.columns, "parent": ts.parent}
                for sc in out.schemas for ts in sc.tables
            ],
            "records": [
                {"type": m.type_index, "row": m.row_id,
                 "start_line": m.start_line, "end_line": m.end_line,
                 "start_byte": m.start_byte, "end_byte": m.end_byte}
                for m in out.records
            ],
        }
        with open(fname, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
            fh.write("\n")
        written.append(fname)
    except OSError as exc:
        raise OutputError(f"cannot write {directory}: {exc}") from exc
    return written


def read_extracted(directory) -> RelationalOutput:
    """Load a written extraction back (tables + records; noise is not kept)."""
    from .templates import parse_canonical

    mpath = os.path.join(directory, "_manifest.json")
    try:
        with open(mpath, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise OutputError(f"cannot read {mpath}: {exc}") from exc
    schemas = [build_schema(i, parse_canonical(t.encode("latin-1")))
               for i, t in enumerate(manifest["templates"])]
    tables = []
    fks: dict[tuple[str, str], str] = {}
    for spec in manifest["tables"]:
        fname = os.path.join(directory, f"{spec['name']}.csv")
        with open(fname, encoding="latin-1", newline="") as fh:
            rows = list(csv.reader(fh))
        tables.append(Table(spec["name"], rows[0], rows[1:]))
        if spec["parent"]:
            fks[(spec["name"], "_parent_id")] = spec["parent"]
    records = [RecordMeta(r["type"], r["row"], r["start_line"], r["end_line"],
                          r["start_byte"], r["end_byte"])
               for r in manifest["records"]]
    return RelationalOutput(tables, fks, [], [], records, schemas,
                            manifest.get("source_len", 0))
