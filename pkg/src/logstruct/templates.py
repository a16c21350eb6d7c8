"""Record and structure templates.

A record template is a byte string over a set of formatting bytes plus the
placeholder byte ``F`` standing for one field value.  A structure template is
a tree of Struct / Array / Field nodes describing a restricted regular
expression over record templates: an array ``(body sep)* body term`` repeats
one unit with a single-byte separator and a distinct single-byte terminator.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass
from typing import Iterator, Union

FIELD_BYTE = ord("F")
NEWLINE = ord("\n")

# Formatting bytes are drawn from ASCII punctuation plus space and tab.
# '\n' separates blocks and is therefore always a formatting byte; it is not
# part of the enumerable candidate set used by the charset searches.
ENUMERABLE_CANDIDATE_BYTES = frozenset(ord(c) for c in string.punctuation + " \t")
CANDIDATE_BYTES = ENUMERABLE_CANDIDATE_BYTES | {NEWLINE}

# Array reduction knobs: a run must contain at least MIN_ARRAY_UNITS copies of
# the unit ("UxUxUy"), and a unit may serialize to at most MAX_UNIT_BYTES.
MIN_ARRAY_UNITS = 3
MAX_UNIT_BYTES = 32


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class Field:
    """A single field placeholder."""


@dataclass(frozen=True)
class Array:
    """``(body sep)* body term`` with single-byte sep != term."""

    body: "Node"
    sep: int
    term: int

    def __post_init__(self):
        if not (0 <= self.sep < 256 and 0 <= self.term < 256):
            raise TemplateError("array separator/terminator must be single bytes")
        if self.sep == self.term:
            raise TemplateError("array separator and terminator must differ")


@dataclass(frozen=True)
class Struct:
    """A fixed sequence of nodes and literal byte runs."""

    children: tuple["Node", ...]


Node = Union[Field, Array, Struct, bytes]


def struct_of(elements) -> Node:
    """Normalize a sequence of nodes/literals into canonical tree form.

    Nested structs are flattened, adjacent literals merged, and a singleton
    sequence collapses to its only element.
    """
    flat: list[Node] = []

    def push(e: Node) -> None:
        if isinstance(e, Struct):
            for c in e.children:
                push(c)
        elif isinstance(e, (bytes, bytearray)):
            if len(e) == 0:
                return
            if flat and isinstance(flat[-1], bytes):
                flat[-1] = flat[-1] + bytes(e)
            else:
                flat.append(bytes(e))
        elif isinstance(e, int):
            push(bytes([e]))
        else:
            flat.append(e)

    for e in elements:
        push(e)
    if not flat:
        raise TemplateError("empty template")
    if len(flat) == 1:
        return flat[0]
    return Struct(tuple(flat))


def _elements(node: Node) -> tuple[Node, ...]:
    if isinstance(node, Struct):
        return node.children
    return (node,)


def iter_fields(node: Node) -> Iterator[Field]:
    """Pre-order iteration over field leaves."""
    if isinstance(node, Field):
        yield node
    elif isinstance(node, Array):
        yield from iter_fields(node.body)
    elif isinstance(node, Struct):
        for c in node.children:
            yield from iter_fields(c)


def iter_arrays(node: Node) -> Iterator[Array]:
    """Pre-order iteration over array nodes."""
    if isinstance(node, Array):
        yield node
        yield from iter_arrays(node.body)
    elif isinstance(node, Struct):
        for c in node.children:
            yield from iter_arrays(c)


def field_count(node: Node) -> int:
    return sum(1 for _ in iter_fields(node))


def template_charset(node: Node) -> frozenset[int]:
    """All formatting bytes used by the template (literals, seps, terms)."""
    out: set[int] = set()

    def walk(n: Node) -> None:
        if isinstance(n, bytes):
            out.update(n)
        elif isinstance(n, Array):
            out.add(n.sep)
            out.add(n.term)
            walk(n.body)
        elif isinstance(n, Struct):
            for c in n.children:
                walk(c)

    walk(node)
    return frozenset(out)


# ---------------------------------------------------------------------------
# Record template extraction


@dataclass(frozen=True)
class RecordTemplate:
    """Extraction result: template text plus the replaced field byte total."""

    text: bytes
    field_bytes: int

    @property
    def valid(self) -> bool:
        # A record template must contain at least one placeholder.
        return FIELD_BYTE in self.text


def extract_record_template(record: bytes, charset: frozenset[int]) -> RecordTemplate:
    """Replace each maximal run of non-charset bytes with one placeholder."""
    if not record:
        raise TemplateError("empty record")
    out = bytearray()
    field_bytes = 0
    in_field = False
    for b in record:
        if b in charset:
            out.append(b)
            in_field = False
        else:
            field_bytes += 1
            if not in_field:
                out.append(FIELD_BYTE)
                in_field = True
    return RecordTemplate(bytes(out), field_bytes)


# ---------------------------------------------------------------------------
# Canonical serialization

_META = frozenset(b"()*F\\")
_PRINTABLE = frozenset(range(0x20, 0x7F)) | {NEWLINE, ord("\t")}


def _escape_byte(b: int) -> bytes:
    if b in _META:
        return b"\\" + bytes([b])
    if b in _PRINTABLE:
        return bytes([b])
    return b"\\x%02x" % b


def canonical_string(node: Node) -> bytes:
    """Deterministic serialization; equal templates iff equal strings."""
    out = bytearray()

    def walk(n: Node) -> None:
        if isinstance(n, Field):
            out.append(FIELD_BYTE)
        elif isinstance(n, bytes):
            for b in n:
                out.extend(_escape_byte(b))
        elif isinstance(n, Array):
            out.extend(b"(")
            walk(n.body)
            out.extend(_escape_byte(n.sep))
            out.extend(b")*")
            walk(n.body)
            out.extend(_escape_byte(n.term))
        else:
            for c in n.children:
                walk(c)

    walk(node)
    return bytes(out)


def template_key(node: Node) -> int:
    """64-bit FNV-1a hash of the canonical string."""
    h = 0xCBF29CE484222325
    for b in canonical_string(node):
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


class _CanonicalParser:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _error(self, msg: str):
        raise TemplateError(f"bad template string at byte {self.pos}: {msg}")

    def _literal_byte(self) -> int:
        data = self.data
        if self.pos >= len(data):
            self._error("unexpected end")
        b = data[self.pos]
        if b == ord("\\"):
            self.pos += 1
            if self.pos >= len(data):
                self._error("dangling escape")
            e = data[self.pos]
            if e == ord("x"):
                hexpart = data[self.pos + 1 : self.pos + 3]
                if len(hexpart) != 2:
                    self._error("bad \\x escape")
                try:
                    value = int(hexpart, 16)
                except ValueError:
                    self._error("bad \\x escape")
                self.pos += 3
                return value
            self.pos += 1
            return e
        self.pos += 1
        return b

    def parse_elements(self, stop_at_paren: bool) -> list[Node]:
        out: list[Node] = []
        data = self.data
        while self.pos < len(data):
            b = data[self.pos]
            if b == ord(")"):
                if stop_at_paren:
                    return out
                self._error("unbalanced ')'")
            if b == FIELD_BYTE:
                self.pos += 1
                out.append(Field())
            elif b == ord("("):
                self.pos += 1
                out.append(self._parse_array())
            elif b == ord("*"):
                self._error("stray '*'")
            else:
                out.append(bytes([self._literal_byte()]))
        if stop_at_paren:
            self._error("missing ')'")
        return out

    def _parse_array(self) -> Array:
        inner = self.parse_elements(stop_at_paren=True)
        self.pos += 1  # consume ')'
        if self.pos >= len(self.data) or self.data[self.pos] != ord("*"):
            self._error("array missing '*'")
        self.pos += 1
        if not inner:
            self._error("empty array")
        last = inner[-1]
        if not (isinstance(last, bytes) and len(last) == 1):
            self._error("array separator must be one byte")
        sep = last[0]
        body_elems = inner[:-1]
        if not body_elems:
            self._error("empty array body")
        body = struct_of(body_elems)
        # The body repeats verbatim after '*'.
        expected = canonical_string(body)
        if self.data[self.pos : self.pos + len(expected)] != expected:
            self._error("array body mismatch after '*'")
        self.pos += len(expected)
        term = self._literal_byte()
        if term == sep:
            self._error("array separator equals terminator")
        return Array(body, sep, term)


def parse_canonical(data: bytes) -> Node:
    """Inverse of :func:`canonical_string`."""
    parser = _CanonicalParser(bytes(data))
    elems = parser.parse_elements(stop_at_paren=False)
    return struct_of(elems)


# ---------------------------------------------------------------------------
# Reduction of record templates to minimal structure templates

# Leftmost candidate run detector over one symbol per sequence element.
# Array nodes are interned into the private-use plane; separators and
# terminators must be ordinary single-byte literals.
_RUN_RX = re.compile(
    "(.{1,%d}?)([^F-])(?:\\1\\2)+\\1(?!\\2)[^F-]"
    % MAX_UNIT_BYTES,
    re.DOTALL,
)


def _is_literal_sym(ch: str) -> bool:
    return ch != "F" and ch < ""


def _longest_run_at(s: str, start: int, slen) -> tuple[int, int] | None:
    """Longest run ``(Ux){k} U y`` anchored at start in the symbol string.

    ``slen(i, j)`` gives the serialized byte length of symbols [i, j).
    Returns (unit_len, k).
    """
    n = len(s)
    best: tuple[int, int] | None = None
    best_span = 0
    max_unit = min(MAX_UNIT_BYTES, (n - start - 2) // 2)
    for ulen in range(1, max_unit + 1):
        if slen(start, start + ulen) > MAX_UNIT_BYTES:
            break
        unit = s[start : start + ulen]
        sep = s[start + ulen]
        if not _is_literal_sym(sep):
            continue
        step = ulen + 1
        k = 0
        while (
            start + (k + 1) * step + ulen <= n
            and s[start + (k + 1) * step : start + (k + 1) * step + ulen] == unit
            and s[start + k * step + ulen] == sep
        ):
            k += 1
        # need k reps of (U sep), then a final U and a distinct terminator
        while k + 1 >= MIN_ARRAY_UNITS:
            pos = start + k * step
            if s[pos : pos + ulen] == unit and pos + ulen < n:
                term = s[pos + ulen]
                if _is_literal_sym(term) and term != sep:
                    span = k * step + ulen + 1
                    if span > best_span:
                        best_span = span
                        best = (ulen, k)
                    break
            k -= 1
    return best


_ESC_TABLE = [_escape_byte(b) for b in range(256)]


class _SymbolPool:
    """Interns array nodes as private-use codepoints for the run scanner."""

    def __init__(self):
        self.by_key: dict[bytes, str] = {}
        self.node_by_sym: dict[str, Array] = {}
        self.canon_by_sym: dict[str, bytes] = {}

    def symbol(self, node: Array) -> str:
        key = canonical_string(node)
        sym = self.by_key.get(key)
        if sym is None:
            sym = chr(0xE000 + len(self.by_key))
            self.by_key[key] = sym
            self.node_by_sym[sym] = node
            self.canon_by_sym[sym] = key
        return sym

    def canonical_of(self, syms: str) -> bytes:
        out = []
        for ch in syms:
            if ch == "F":
                out.append(b"F")
            elif ch >= "":
                out.append(self.canon_by_sym[ch])
            else:
                out.append(_ESC_TABLE[ord(ch)])
        return b"".join(out)


def _symbols(seq: list[Node], pool: _SymbolPool) -> list[str]:
    out = []
    for e in seq:
        if isinstance(e, bytes):
            out.append(chr(e[0]))
        elif isinstance(e, Field):
            out.append("F")
        else:
            out.append(pool.symbol(e))
    return out


def _reduce_seq(seq: list[Node], pool: _SymbolPool,
                syms: list[str] | None = None) -> tuple[list[Node], list[str]]:
    if syms is None:
        syms = _symbols(seq, pool)

    def slen(i: int, j: int) -> int:
        total = 0
        for ch in s[i:j]:
            if ch >= "":
                total += len(pool.canon_by_sym[ch])
            else:
                total += 1 if ch == "F" else len(_ESC_TABLE[ord(ch)])
        return total

    while True:
        s = "".join(syms)
        pos = 0
        found = None
        while True:
            m = _RUN_RX.search(s, pos)
            if m is None:
                break
            found = _longest_run_at(s, m.start(), slen)
            if found is not None:
                pos = m.start()
                break
            pos = m.start() + 1
        if found is None:
            return seq, syms
        ulen, k = found
        unit = seq[pos : pos + ulen]
        sep = seq[pos + ulen]
        term_pos = pos + k * (ulen + 1) + ulen
        term = seq[term_pos]
        body_seq, _ = _reduce_seq(list(unit), pool, syms[pos : pos + ulen])
        node = Array(struct_of(body_seq), sep[0], term[0])
        seq = seq[:pos] + [node] + seq[term_pos + 1 :]
        syms = syms[:pos] + [pool.symbol(node)] + syms[term_pos + 1 :]


def _flat_elements(text: bytes) -> list[Node]:
    # No repeated runs: alternate literal bytes and placeholders.
    return [Field() if b == FIELD_BYTE else bytes([b]) for b in text]


def reduce_line(text: bytes, pool: _SymbolPool) -> tuple[list[Node], list[str]]:
    """Phase one of reduction: fold runs within one line."""
    if _RUN_RX.search(text.decode("latin-1")) is None:
        return _flat_elements(text), list(text.decode("latin-1"))
    return _reduce_seq(_flat_elements(text), pool)


def reduce_elements(seqs: list[tuple[list[Node], list[str]]],
                    pool: _SymbolPool) -> tuple[list[Node], list[str]]:
    """Phase two: fold runs across the concatenated line sequences."""
    seq = [e for s, _ in seqs for e in s]
    syms = [c for _, sy in seqs for c in sy]
    if _RUN_RX.search("".join(syms)) is None:
        return seq, syms
    return _reduce_seq(seq, pool, syms)


def _split_lines(text: bytes) -> list[bytes]:
    lines = text.split(b"\n")
    if lines[-1] == b"":
        return [l + b"\n" for l in lines[:-1]]
    return [l + b"\n" for l in lines[:-1]] + [lines[-1]]


def reduce_to_structure_template(rt: RecordTemplate | bytes) -> Node:
    """Fold repeated ``U x ... U y`` runs into arrays until a fixed point.

    Runs are folded within each line first, then across lines; conflicting
    rewrites resolve leftmost-first, longest run first.
    """
    text = rt.text if isinstance(rt, RecordTemplate) else rt
    if not text:
        raise TemplateError("empty record template")
    pool = _SymbolPool()
    parts = [reduce_line(l, pool) for l in _split_lines(text)]
    if len(parts) == 1:
        return struct_of(parts[0][0])
    seq, _ = reduce_elements(parts, pool)
    return struct_of(seq)


def reduce_node(node: Node) -> Node:
    """Re-run reduction over an existing template's element sequences."""
    elems: list[Node] = []
    for e in _elements(node):
        if isinstance(e, bytes):
            elems.extend(bytes([b]) for b in e)
        elif isinstance(e, Array):
            elems.append(Array(reduce_node(e.body), e.sep, e.term))
        else:
            elems.append(e)
    seq, _ = _reduce_seq(elems, _SymbolPool())
    return struct_of(seq)


# ---------------------------------------------------------------------------
# Matching record templates against structure templates


def matches(st: Node, rt: RecordTemplate | bytes) -> bool:
    """True iff the record template is in the language of the template."""
    text = rt.text if isinstance(rt, RecordTemplate) else bytes(rt)

    def match(node: Node, pos: int) -> int:
        # Returns the end position, or -1 on failure.
        if isinstance(node, Field):
            if pos < len(text) and text[pos] == FIELD_BYTE:
                return pos + 1
            return -1
        if isinstance(node, bytes):
            end = pos + len(node)
            if text[pos:end] == node:
                return end
            return -1
        if isinstance(node, Struct):
            for c in node.children:
                pos = match(c, pos)
                if pos < 0:
                    return -1
            return pos
        # Array
        pos = match(node.body, pos)
        if pos < 0:
            return -1
        while True:
            if pos >= len(text):
                return -1
            b = text[pos]
            if b == node.term:
                return pos + 1
            if b != node.sep:
                return -1
            pos = match(node.body, pos + 1)
            if pos < 0:
                return -1

    end = match(st, 0)
    return end == len(text)


# ---------------------------------------------------------------------------
# Compiled matcher over raw text


def _regex_field(charset: frozenset[int]) -> bytes:
    cls = b"".join(re.escape(bytes([b])) for b in sorted(charset))
    return b"[^" + cls + b"]+"


@dataclass
class _TopElement:
    kind: str  # "field" | "lit" | "array"
    index: int  # leaf or array index, -1 for literals
    group: int  # regex group number, -1 for literals


class CompiledTemplate:
    """Deterministic matcher for one structure template over raw bytes.

    Field values may contain any byte outside the template's own formatting
    charset.  The final newline of the template is optional at end of input.
    """

    def __init__(self, st: Node):
        self.template = st
        self.canonical = canonical_string(st)
        self.charset = template_charset(st)
        if NEWLINE not in self.charset:
            # Every block is newline-terminated; templates built by the
            # pipeline always end with one.
            self.charset = self.charset | frozenset([NEWLINE])
        self.n_fields = field_count(st)
        self.arrays = list(iter_arrays(st))
        self._field_re = _regex_field(self.charset)
        self._group_count = 0
        self._top: list[_TopElement] = []
        self._array_meta: dict[int, "_ArrayMeta"] = {}
        pattern = self._compile_top(st)
        self._rx = re.compile(pattern)
        self._first_pred = self._first_byte_predicate(st)

    # -- compilation ------------------------------------------------------

    def _compile_top(self, st: Node) -> bytes:
        parts = []
        leaf_idx = 0
        array_idx = 0
        elems = _elements(st)
        for i, e in enumerate(elems):
            last = i == len(elems) - 1
            if isinstance(e, Field):
                self._group_count += 1
                self._top.append(_TopElement("field", leaf_idx, self._group_count))
                parts.append(b"(" + self._field_re + b")")
                leaf_idx += 1
            elif isinstance(e, bytes):
                parts.append(self._literal_regex(e, eof_ok=last))
                self._top.append(_TopElement("lit", -1, -1))
            else:
                sub_leaves = field_count(e)
                sub_arrays = 1 + sum(1 for _ in iter_arrays(e.body))
                self._group_count += 1
                group = self._group_count
                self._top.append(_TopElement("array", array_idx, group))
                parts.append(
                    b"(" + self._array_regex(e, eof_ok=last) + b")"
                )
                self._array_meta[array_idx] = _ArrayMeta(
                    e, array_idx, leaf_idx, self._field_re, self.charset
                )
                leaf_idx += sub_leaves
                array_idx += sub_arrays
        return b"".join(parts)

    def _literal_regex(self, lit: bytes, eof_ok: bool) -> bytes:
        if eof_ok and lit.endswith(b"\n"):
            return re.escape(lit[:-1]) + b"(?:\\n|\\Z)"
        return re.escape(lit)

    def _groupless(self, node: Node) -> bytes:
        if isinstance(node, Field):
            return b"(?:" + self._field_re + b")"
        if isinstance(node, bytes):
            return re.escape(node)
        if isinstance(node, Struct):
            return b"".join(self._groupless(c) for c in node.children)
        return self._array_regex(node, eof_ok=False)

    def _array_regex(self, a: Array, eof_ok: bool) -> bytes:
        body = self._groupless(a.body)
        sep = re.escape(bytes([a.sep]))
        term = re.escape(bytes([a.term]))
        if eof_ok and a.term == NEWLINE:
            term = b"(?:\\n|\\Z)"
        return b"(?:" + body + sep + b")*" + body + term

    def _first_byte_predicate(self, node: Node):
        """(kind, payload): 'byte' -> exact first byte, 'field' -> non-charset."""
        e = _elements(node)[0]
        if isinstance(e, bytes):
            return ("byte", e[0])
        if isinstance(e, Field):
            return ("field", self.charset)
        return self._first_byte_predicate(e.body)

    @property
    def first_pred(self):
        return self._first_pred

    # -- matching ---------------------------------------------------------

    def match_at(self, buf: bytes, pos: int, endpos: int):
        """Match at pos; returns (end, values_per_leaf, arities_per_array)."""
        m = self._rx.match(buf, pos, endpos)
        if m is None:
            return None
        values: list[list[bytes]] = [[] for _ in range(self.n_fields)]
        arities: list[list[int]] = [[] for _ in range(len(self.arrays))]
        for el in self._top:
            if el.kind == "field":
                values[el.index].append(m.group(el.group))
            elif el.kind == "array":
                meta = self._array_meta[el.index]
                meta.decompose(m.group(el.group), values, arities)
        return m.end(), values, arities

    def match_end(self, buf: bytes, pos: int, endpos: int) -> int:
        m = self._rx.match(buf, pos, endpos)
        return -1 if m is None else m.end()


class _ArrayMeta:
    """Splits a matched array region into per-repetition values."""

    def __init__(self, node: Array, array_idx: int, leaf_base: int,
                 field_re: bytes, charset: frozenset[int]):
        self.node = node
        self.array_idx = array_idx
        self.leaf_base = leaf_base
        self.sep_b = bytes([node.sep])
        self.term = node.term
        body = node.body
        self.body_is_field = isinstance(body, Field)
        self.fast_split = node.sep not in template_charset(body) if not self.body_is_field else True
        self.sub_leaves = field_count(body)
        self.inner: list[tuple[str, int, int, _ArrayMeta | None]] = []
        if not self.body_is_field:
            parts = []
            group = 0
            leaf = leaf_base
            arr = array_idx + 1
            for e in _elements(body):
                if isinstance(e, Field):
                    group += 1
                    parts.append(b"(" + field_re + b")")
                    self.inner.append(("field", leaf, group, None))
                    leaf += 1
                elif isinstance(e, bytes):
                    parts.append(re.escape(e))
                else:
                    group += 1
                    sub = _ArrayMeta(e, arr, leaf, field_re, charset)
                    parts.append(b"(" + _groupless_regex(e, field_re) + b")")
                    self.inner.append(("array", leaf, group, sub))
                    leaf += field_count(e)
                    arr += 1 + sum(1 for _ in iter_arrays(e.body))
            self._body_rx = re.compile(b"".join(parts))
        else:
            self._body_rx = None

    def decompose(self, region: bytes, values: list[list[bytes]],
                  arities: list[list[int]]) -> None:
        # region includes the terminator byte unless cut short at EOF.
        if region.endswith(bytes([self.term])):
            region = region[:-1]
        if self.fast_split:
            parts = region.split(self.sep_b)
        else:
            parts = self._iter_split(region)
        arities[self.array_idx].append(len(parts))
        if self.body_is_field:
            values_list = values[self.leaf_base]
            for p in parts:
                values_list.append(p)
            return
        for p in parts:
            m = self._body_rx.fullmatch(p)
            for kind, leaf, group, sub in self.inner:
                if kind == "field":
                    values[leaf].append(m.group(group))
                else:
                    sub.decompose(m.group(group), values, arities)

    def _iter_split(self, region: bytes) -> list[bytes]:
        # Body literals contain the separator byte: walk instance by instance.
        parts = []
        pos = 0
        while True:
            m = self._body_rx.match(region, pos)
            end = m.end()
            parts.append(region[pos:end])
            if end >= len(region):
                return parts
            pos = end + 1  # skip separator


def _groupless_regex(node: Node, field_re: bytes) -> bytes:
    if isinstance(node, Field):
        return b"(?:" + field_re + b")"
    if isinstance(node, bytes):
        return re.escape(node)
    if isinstance(node, Struct):
        return b"".join(_groupless_regex(c, field_re) for c in node.children)
    body = _groupless_regex(node.body, field_re)
    sep = re.escape(bytes([node.sep]))
    term = re.escape(bytes([node.term]))
    return b"(?:" + body + sep + b")*" + body + term


def compile_template(st: Node) -> CompiledTemplate:
    return CompiledTemplate(st)


def render_record(st: Node, values: list[list[bytes]], arities: list[list[int]]) -> bytes:
    """Rebuild the exact record bytes from per-leaf values and array arities."""
    leaf_pos = [0] * len(values)
    arr_pos = [0] * len(arities)
    leaf_counter = [0]
    arr_counter = [0]
    out = bytearray()

    def walk(node: Node) -> None:
        if isinstance(node, Field):
            idx = leaf_counter[0]
            leaf_counter[0] += 1
            out.extend(values[idx][leaf_pos[idx]])
            leaf_pos[idx] += 1
        elif isinstance(node, bytes):
            out.extend(node)
        elif isinstance(node, Struct):
            for c in node.children:
                walk(c)
        else:
            aidx = arr_counter[0]
            arr_counter[0] += 1
            reps = arities[aidx][arr_pos[aidx]]
            arr_pos[aidx] += 1
            leaf_mark = leaf_counter[0]
            arr_mark = arr_counter[0]
            for r in range(reps):
                leaf_counter[0] = leaf_mark
                arr_counter[0] = arr_mark
                walk(node.body)
                out.append(node.sep if r < reps - 1 else node.term)

    walk(st)
    return bytes(out)
