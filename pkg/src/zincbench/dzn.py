"""Reader and writer for the DZN data-file subset used by the corpus and harness.

Supported constructs: int/float/bool/string scalars, 1-D bracket arrays,
2-D ``[| ... |]`` arrays, and integer sets (``{...}`` and ``a..b``).
Anything else (enums, 3-D+ literals, comprehensions) is rejected with a
positioned diagnostic rather than silently skipped.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator, Union


class DznParseError(Exception):
    """Positioned parse failure; line/column are 1-based."""

    def __init__(self, line: int, column: int, message: str):
        self.line = line
        self.column = column
        self.message = message
        super().__init__(f"{line}:{column}: {message}")


class DuplicateBinding(Exception):
    def __init__(self, symbol: str):
        self.symbol = symbol
        super().__init__(f"symbol {symbol!r} bound more than once")


@dataclass(frozen=True)
class IntScalar:
    value: int


@dataclass(frozen=True)
class FloatScalar:
    value: float


@dataclass(frozen=True)
class BoolScalar:
    value: bool


@dataclass(frozen=True)
class StringScalar:
    value: str


@dataclass(frozen=True)
class ArrayValue:
    """dims are inclusive (lo, hi) index ranges; elements are stored row-major."""

    dims: tuple[tuple[int, int], ...]
    elements: tuple["Scalar", ...]

    def __post_init__(self):
        count = 1
        for lo, hi in self.dims:
            count *= max(0, hi - lo + 1)
        if count != len(self.elements):
            raise ValueError(
                f"array has {len(self.elements)} elements but dims imply {count}"
            )

    @property
    def rank(self) -> int:
        return len(self.dims)


@dataclass(frozen=True)
class SetOfInt:
    members: tuple[int, ...]

    def __post_init__(self):
        if any(a >= b for a, b in zip(self.members, self.members[1:])):
            raise ValueError("set members must be strictly increasing")


Scalar = Union[IntScalar, FloatScalar, BoolScalar, StringScalar]
Value = Union[Scalar, ArrayValue, SetOfInt]

#: Ordered symbol -> Value environment parsed from a data file.
Bindings = dict[str, Value]

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def is_identifier(name: str) -> bool:
    return bool(IDENT_RE.match(name))


# --- tokenizer -------------------------------------------------------------

_PUNCT = ("..", "[|", "|]", "[", "]", "{", "}", "(", ")", ",", ";", "=", "|", "-")


@dataclass(frozen=True)
class _Tok:
    kind: str  # int | float | string | ident | punct | eof
    text: str
    line: int
    col: int


def _tokenize(text: str) -> Iterator[_Tok]:
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if ch in " \t\r":
            i, col = i + 1, col + 1
            continue
        if ch == "%":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch == '"':
            j = i + 1
            buf = []
            while True:
                if j >= n or text[j] == "\n":
                    raise DznParseError(start_line, start_col, "unterminated string literal")
                c = text[j]
                if c == '"':
                    break
                if c == "\\":
                    if j + 1 >= n:
                        raise DznParseError(start_line, start_col, "unterminated string literal")
                    esc = text[j + 1]
                    mapped = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}.get(esc)
                    if mapped is None:
                        raise DznParseError(line, col + (j - i), f"unsupported escape \\{esc}")
                    buf.append(mapped)
                    j += 2
                    continue
                buf.append(c)
                j += 1
            yield _Tok("string", "".join(buf), start_line, start_col)
            col += j + 1 - i
            i = j + 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            is_float = False
            # a single '.' followed by a digit starts the fraction; '..' is a range
            if j + 1 < n and text[j] == "." and text[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            tok_text = text[i:j]
            yield _Tok("float" if is_float else "int", tok_text, start_line, start_col)
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            yield _Tok("ident", text[i:j], start_line, start_col)
            col += j - i
            i = j
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                yield _Tok("punct", p, start_line, start_col)
                i += len(p)
                col += len(p)
                break
        else:
            raise DznParseError(line, col, f"unexpected character {ch!r}")
    yield _Tok("eof", "", line, col)


class _Parser:
    def __init__(self, text: str):
        self.toks = list(_tokenize(text))
        self.pos = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.pos]

    def advance(self) -> _Tok:
        tok = self.cur
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def fail(self, message: str) -> DznParseError:
        return DznParseError(self.cur.line, self.cur.col, message)

    def expect_punct(self, text: str) -> None:
        if self.cur.kind != "punct" or self.cur.text != text:
            raise self.fail(f"expected {text!r}, found {self._describe(self.cur)}")
        self.advance()

    @staticmethod
    def _describe(tok: _Tok) -> str:
        return "end of input" if tok.kind == "eof" else repr(tok.text)

    def at_punct(self, text: str) -> bool:
        return self.cur.kind == "punct" and self.cur.text == text

    def parse_file(self) -> Bindings:
        out: Bindings = {}
        while self.cur.kind != "eof":
            if self.cur.kind != "ident":
                raise self.fail(f"expected identifier, found {self._describe(self.cur)}")
            if self.cur.text in ("true", "false"):
                raise self.fail(f"{self.cur.text!r} is not a valid binding name")
            name_tok = self.advance()
            self.expect_punct("=")
            value = self.parse_value()
            self.expect_punct(";")
            if name_tok.text in out:
                raise DuplicateBinding(name_tok.text)
            out[name_tok.text] = value
        return out

    def parse_value(self) -> Value:
        if self.at_punct("[|"):
            self.advance()
            return self.parse_array_2d()
        if self.at_punct("["):
            return self.parse_array()
        if self.at_punct("{"):
            return self.parse_set()
        first = self.parse_scalar()
        if self.at_punct("..") and isinstance(first, IntScalar):
            self.advance()
            hi = self.parse_scalar()
            if not isinstance(hi, IntScalar):
                raise self.fail("range endpoints must be integers")
            return SetOfInt(tuple(range(first.value, hi.value + 1)))
        return first

    def parse_scalar(self) -> Scalar:
        tok = self.cur
        negate = False
        if self.at_punct("-"):
            self.advance()
            negate = True
            tok = self.cur
        if tok.kind == "int":
            self.advance()
            v = int(tok.text)
            return IntScalar(-v if negate else v)
        if tok.kind == "float":
            self.advance()
            v = float(tok.text)
            if not math.isfinite(v):
                raise DznParseError(tok.line, tok.col, f"float literal {tok.text} overflows")
            return FloatScalar(-v if negate else v)
        if negate:
            raise self.fail("expected a number after '-'")
        if tok.kind == "string":
            self.advance()
            return StringScalar(tok.text)
        if tok.kind == "ident" and tok.text in ("true", "false"):
            self.advance()
            return BoolScalar(tok.text == "true")
        if tok.kind == "ident":
            raise self.fail(
                f"unsupported construct {tok.text!r} (enums and calls are outside the data subset)"
            )
        raise self.fail(f"expected a value, found {self._describe(tok)}")

    def parse_array(self) -> ArrayValue:
        self.expect_punct("[")
        if self.at_punct("|"):  # "[ |" written with a space
            self.advance()
            return self.parse_array_2d()
        elements: list[Scalar] = []
        if not self.at_punct("]"):
            while True:
                if self.at_punct("[") or self.at_punct("{"):
                    raise self.fail("nested arrays/sets in array literals are outside the data subset")
                elements.append(self.parse_scalar())
                if self.at_punct(","):
                    self.advance()
                    if self.at_punct("]"):  # tolerate trailing comma
                        break
                    continue
                break
        self.expect_punct("]")
        return ArrayValue(((1, len(elements)),), tuple(elements))

    def parse_array_2d(self) -> ArrayValue:
        # caller has already consumed "[|" (or "[" plus "|")
        rows: list[list[Scalar]] = []
        while True:
            if self.at_punct("]") or self.at_punct("|]"):
                raise self.fail("empty 2-D array literal is outside the data subset")
            row: list[Scalar] = []
            while True:
                row.append(self.parse_scalar())
                if self.at_punct(","):
                    self.advance()
                    continue
                break
            rows.append(row)
            if self.at_punct("|]"):
                self.advance()
                break
            if self.at_punct("|"):
                self.advance()
                # `... | ]` is how `|]` tokenizes when split by whitespace
                if self.at_punct("]"):
                    self.advance()
                    break
                continue
            raise self.fail(f"expected '|' or '|]', found {self._describe(self.cur)}")
        width = len(rows[0])
        for idx, row in enumerate(rows):
            if len(row) != width:
                raise self.fail(f"row {idx + 1} has {len(row)} elements, expected {width}")
        flat = tuple(x for row in rows for x in row)
        return ArrayValue(((1, len(rows)), (1, width)), flat)

    def parse_set(self) -> SetOfInt:
        self.expect_punct("{")
        members: set[int] = set()
        if not self.at_punct("}"):
            while True:
                elem = self.parse_scalar()
                if not isinstance(elem, IntScalar):
                    raise self.fail("only integer sets are in the data subset")
                members.add(elem.value)
                if self.at_punct(","):
                    self.advance()
                    continue
                break
        self.expect_punct("}")
        return SetOfInt(tuple(sorted(members)))


def parse_dzn(text: str) -> Bindings:
    """Parse DZN text into Bindings.

    Empty or comment-only input yields empty Bindings.  Raises DznParseError
    with a 1-based position on any construct outside the supported subset,
    and DuplicateBinding when a symbol is assigned twice.
    """
    return _Parser(text).parse_file()


def _format_scalar(v: Scalar) -> str:
    if isinstance(v, IntScalar):
        return str(v.value)
    if isinstance(v, FloatScalar):
        if not math.isfinite(v.value):
            raise ValueError("non-finite floats cannot be serialized")
        text = repr(v.value)
        # repr of integral floats already carries '.0'; exponents parse as-is
        return text
    if isinstance(v, BoolScalar):
        return "true" if v.value else "false"
    if isinstance(v, StringScalar):
        escaped = (
            v.value.replace("\\", "\\\\")
            .replace('"', '\\"')
            .replace("\n", "\\n")
            .replace("\t", "\\t")
            .replace("\r", "\\r")
        )
        return f'"{escaped}"'
    raise TypeError(f"not a scalar: {v!r}")


def format_value(v: Value) -> str:
    if isinstance(v, ArrayValue):
        if v.rank == 1:
            return "[" + ", ".join(_format_scalar(e) for e in v.elements) + "]"
        if v.rank == 2:
            (r_lo, r_hi), (c_lo, c_hi) = v.dims
            width = c_hi - c_lo + 1
            rows = []
            for r in range(r_hi - r_lo + 1):
                row = v.elements[r * width : (r + 1) * width]
                rows.append(", ".join(_format_scalar(e) for e in row))
            return "[| " + " | ".join(rows) + " |]"
        raise ValueError(f"rank-{v.rank} arrays are outside the data subset")
    if isinstance(v, SetOfInt):
        return "{" + ", ".join(str(m) for m in v.members) + "}"
    return _format_scalar(v)


def serialize(bindings: Bindings) -> str:
    """Render Bindings as DZN text such that parse_dzn(serialize(b)) == b."""
    lines = []
    for name, value in bindings.items():
        if not is_identifier(name):
            raise ValueError(f"invalid binding name {name!r}")
        lines.append(f"{name} = {format_value(value)};\n")
    return "".join(lines)


def value_rank(v: Value) -> int:
    """0 for scalars and sets, otherwise the array rank."""
    return v.rank if isinstance(v, ArrayValue) else 0
