"""Loadable grammar and syntactic checker for MiniZinc model text.

The grammar ships as a data asset in a small BNF exchange format and is
compiled into an Earley recognizer.  validate_syntax splits a model into
items at top-level semicolons so one bad item yields one diagnostic and
checking resumes at the next item.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional

#: token classes the lexer supplies; grammars reference them like nonterminals
TOKEN_CLASSES = ("ident", "int-literal", "float-literal", "string-literal")

MAX_DIAGNOSTICS = 25


class GrammarSpecError(Exception):
    pass


# symbol kinds inside productions
T = "t"  # exact terminal text
C = "c"  # token class
N = "n"  # nonterminal

Symbol = tuple[str, str]
Production = tuple[Symbol, ...]


@dataclass(frozen=True)
class GrammarSpec:
    rules: dict[str, tuple[Production, ...]]
    start: str
    keywords: frozenset[str]
    operators: frozenset[str]

    def __post_init__(self):
        if self.start not in self.rules:
            raise GrammarSpecError(f"start symbol <{self.start}> is not defined")
        for name, prods in self.rules.items():
            for prod in prods:
                for kind, text in prod:
                    if kind == N and text not in self.rules:
                        raise GrammarSpecError(
                            f"rule <{name}> references undefined nonterminal <{text}>"
                        )


@dataclass(frozen=True)
class SyntaxDiagnostic:
    line: int
    column: int
    found: str
    expected: tuple[str, ...]
    rule: str
    message: str


# --- grammar exchange format ----------------------------------------------

_BNF_TOKEN = re.compile(
    r"""\s*(?:
        (?P<nt><[A-Za-z][A-Za-z0-9-]*>) |
        (?P<term>"(?:[^"\\]|\\.)*") |
        (?P<sep>\|) |
        (?P<def>::=)
    )""",
    re.VERBOSE,
)

_WORD = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def _unquote(raw: str) -> str:
    body = raw[1:-1]
    return body.replace('\\"', '"').replace("\\\\", "\\")


def load_grammar(spec_text: str) -> GrammarSpec:
    """Parse the BNF exchange format; the first rule is the start symbol."""
    # join continuation lines (those starting with '|' or not containing ::=)
    logical: list[str] = []
    for raw_line in spec_text.splitlines():
        line = raw_line.rstrip()
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "::=" in line or not logical:
            logical.append(line)
        else:
            logical[-1] += " " + line.strip()

    rules: dict[str, list[Production]] = {}
    order: list[str] = []
    for line in logical:
        head, sep, body = line.partition("::=")
        if not sep:
            raise GrammarSpecError(f"malformed production (no ::=): {line.strip()!r}")
        head = head.strip()
        if not (head.startswith("<") and head.endswith(">")):
            raise GrammarSpecError(f"rule head must be a <nonterminal>: {head!r}")
        name = head[1:-1]
        if name in TOKEN_CLASSES:
            raise GrammarSpecError(f"<{name}> is a built-in token class and cannot be redefined")
        alternatives: list[Production] = []
        current: list[Symbol] = []
        pos = 0
        while pos < len(body):
            m = _BNF_TOKEN.match(body, pos)
            if not m:
                if body[pos:].strip():
                    raise GrammarSpecError(
                        f"malformed production for <{name}>: {body[pos:].strip()!r}"
                    )
                break
            pos = m.end()
            if m.lastgroup == "sep":
                alternatives.append(tuple(current))
                current = []
            elif m.lastgroup == "nt":
                ref = m.group("nt")[1:-1]
                current.append((C, ref) if ref in TOKEN_CLASSES else (N, ref))
            elif m.lastgroup == "term":
                text = _unquote(m.group("term"))
                if text:  # "" denotes the empty production
                    current.append((T, text))
            elif m.lastgroup == "def":
                raise GrammarSpecError(f"unexpected ::= inside production for <{name}>")
        alternatives.append(tuple(current))
        if name not in rules:
            rules[name] = []
            order.append(name)
        rules[name].extend(alternatives)

    if not order:
        raise GrammarSpecError("empty grammar: no start symbol")
    keywords = set()
    operators = set()
    for prods in rules.values():
        for prod in prods:
            for kind, text in prod:
                if kind == T:
                    (keywords if _WORD.match(text) else operators).add(text)
    return GrammarSpec(
        rules={k: tuple(v) for k, v in rules.items()},
        start=order[0],
        keywords=frozenset(keywords),
        operators=frozenset(operators),
    )


def render_grammar_for_prompt(grammar: GrammarSpec) -> str:
    """Deterministic rendering in the exchange format (reload-equivalent)."""

    def sym(s: Symbol) -> str:
        kind, text = s
        if kind == T:
            return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'
        return f"<{text}>"

    lines = []
    for name, prods in grammar.rules.items():
        alts = [" ".join(sym(s) for s in prod) if prod else '""' for prod in prods]
        lines.append(f"<{name}> ::= " + " | ".join(alts))
    return "\n".join(lines) + "\n"


def load_default_grammar() -> GrammarSpec:
    text = resources.files("zincbench.assets").joinpath("minizinc.bnf").read_text("utf-8")
    return load_grammar(text)


# --- model lexer -----------------------------------------------------------

@dataclass(frozen=True)
class Token:
    kind: str  # ident | int | float | string | op | keyword
    text: str
    line: int
    col: int

    def describe(self) -> str:
        return f"'{self.text}'"


_MZN_OPS = (
    "<->", "->", "<-", "\\/", "/\\", "<=", ">=", "==", "!=", "..", "++",
    "::", "<>", "[|", "|]",
    "<", ">", "=", "+", "-", "*", "/", ";", ":", ",", "(", ")",
    "[", "]", "{", "}", "|", ".",
)


@dataclass
class _LexResult:
    tokens: list[Token] = field(default_factory=list)
    diagnostics: list[SyntaxDiagnostic] = field(default_factory=list)


def _lex_model(text: str, keywords: frozenset[str]) -> _LexResult:
    out = _LexResult()
    i, line, col = 0, 1, 1
    n = len(text)

    def diag(l, c, found, message):
        out.diagnostics.append(
            SyntaxDiagnostic(l, c, found, (), "lexical", message)
        )

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
        if text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end == -1:
                diag(line, col, "/*", "unterminated block comment")
                break
            skipped = text[i : end + 2]
            newlines = skipped.count("\n")
            if newlines:
                line += newlines
                col = len(skipped) - skipped.rfind("\n")
            else:
                col += len(skipped)
            i = end + 2
            continue
        start_line, start_col = line, col
        if ch == '"':
            j = i + 1
            while j < n:
                if text[j] == "\\" and j + 1 < n:
                    j += 2
                    continue
                if text[j] == '"':
                    break
                if text[j] == "\n":
                    break
                j += 1
            if j >= n or text[j] != '"':
                diag(start_line, start_col, '"', "unterminated string literal")
                col += j - i
                i = j
                continue
            out.tokens.append(Token("string", text[i : j + 1], start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if ch == "'":
            j = text.find("'", i + 1)
            if j == -1 or "\n" in text[i:j]:
                diag(start_line, start_col, "'", "unterminated quoted identifier")
                i += 1
                col += 1
                continue
            out.tokens.append(Token("ident", text[i : j + 1], start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if ch.isdigit():
            j = i
            if text.startswith(("0x", "0X"), i):
                j = i + 2
                while j < n and text[j] in "0123456789abcdefABCDEF":
                    j += 1
                out.tokens.append(Token("int", text[i:j], start_line, start_col))
            elif text.startswith(("0o", "0O"), i):
                j = i + 2
                while j < n and text[j] in "01234567":
                    j += 1
                out.tokens.append(Token("int", text[i:j], start_line, start_col))
            else:
                while j < n and text[j].isdigit():
                    j += 1
                is_float = False
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
                out.tokens.append(
                    Token("float" if is_float else "int", text[i:j], start_line, start_col)
                )
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            if word in keywords:
                out.tokens.append(Token("keyword", word, start_line, start_col))
            else:
                if word.lower() in keywords:
                    # almost always a casing typo for a keyword in generated code
                    diag(
                        start_line,
                        start_col,
                        word,
                        f"syntax error, '{word}' is not a keyword "
                        f"(did you mean '{word.lower()}'?)",
                    )
                out.tokens.append(Token("ident", word, start_line, start_col))
            col += j - i
            i = j
            continue
        for op in _MZN_OPS:
            if text.startswith(op, i):
                out.tokens.append(Token("op", op, start_line, start_col))
                i += len(op)
                col += len(op)
                break
        else:
            diag(start_line, start_col, ch, f"syntax error, unexpected character {ch!r}")
            i += 1
            col += 1
    return out


# --- Earley recognizer -----------------------------------------------------

def _nullable_set(rules: dict[str, tuple[Production, ...]]) -> frozenset[str]:
    nullable: set[str] = set()
    changed = True
    while changed:
        changed = False
        for name, prods in rules.items():
            if name in nullable:
                continue
            for prod in prods:
                if all(kind == N and text in nullable for kind, text in prod):
                    nullable.add(name)
                    changed = True
                    break
    return frozenset(nullable)


class _Recognizer:
    def __init__(self, grammar: GrammarSpec):
        self.rules = grammar.rules
        self.nullable = _nullable_set(grammar.rules)

    @staticmethod
    def _matches(sym: Symbol, tok: Token) -> bool:
        kind, text = sym
        if kind == T:
            return tok.text == text and tok.kind in ("op", "keyword")
        class_kind = {"ident": "ident", "int-literal": "int",
                      "float-literal": "float", "string-literal": "string"}[text]
        return tok.kind == class_kind

    def run(self, tokens: list[Token], start: str):
        """Returns (accepted, farthest index, expected symbols, rule context)."""
        # item = (nonterminal, production, dot, origin)
        chart: list[set] = [set() for _ in range(len(tokens) + 1)]

        def push(i, item):
            if item not in chart[i]:
                chart[i].add(item)
                work.append(item)

        farthest = 0
        for prod in self.rules[start]:
            chart[0].add((start, prod, 0, 0))
        for i in range(len(tokens) + 1):
            work = list(chart[i])
            while work:
                nt, prod, dot, origin = work.pop()
                if dot < len(prod):
                    kind, text = prod[dot]
                    if kind == N:
                        for p in self.rules[text]:
                            push(i, (text, p, 0, i))
                        if text in self.nullable:
                            push(i, (nt, prod, dot + 1, origin))
                    elif i < len(tokens) and self._matches(prod[dot], tokens[i]):
                        nxt = (nt, prod, dot + 1, origin)
                        if nxt not in chart[i + 1]:
                            chart[i + 1].add(nxt)
                else:
                    # completion: advance everything waiting on nt at origin
                    for parent in list(chart[origin]):
                        pnt, pprod, pdot, porigin = parent
                        if pdot < len(pprod) and pprod[pdot] == (N, nt):
                            push(i, (pnt, pprod, pdot + 1, porigin))
            if chart[i]:
                farthest = i
            if i < len(tokens) and not chart[i + 1]:
                break  # no token could be scanned; the parse is dead here

        accepted = any(
            nt == start and dot == len(prod) and origin == 0
            for (nt, prod, dot, origin) in chart[len(tokens)]
        )
        expected: set[str] = set()
        context = start
        best_dot = -1
        for nt, prod, dot, origin in chart[farthest]:
            if dot < len(prod):
                kind, text = prod[dot]
                if kind == T:
                    expected.add(f"'{text}'")
                elif kind == C:
                    expected.add(f"<{text}>")
                if dot > best_dot:
                    best_dot = dot
                    context = nt
        return accepted, farthest, expected, context


# --- validation ------------------------------------------------------------

_OPEN = {"(": ")", "[": "]", "{": "}", "[|": "|]"}
_CLOSE = set(_OPEN.values())


def _split_items(tokens: list[Token]) -> list[list[Token]]:
    segments: list[list[Token]] = []
    current: list[Token] = []
    depth = 0
    for tok in tokens:
        if tok.kind == "op":
            if tok.text in _OPEN:
                depth += 1
            elif tok.text in _CLOSE:
                depth = max(0, depth - 1)
            elif tok.text == ";" and depth == 0:
                if current:
                    segments.append(current)
                    current = []
                continue
        current.append(tok)
    if current:
        segments.append(current)
    return segments


class SyntaxChecker:
    """Reusable validator; compile the grammar once, check many models."""

    def __init__(self, grammar: Optional[GrammarSpec] = None):
        self.grammar = grammar or load_default_grammar()
        self._recognizer = _Recognizer(self.grammar)
        self._item_start = "item" if "item" in self.grammar.rules else self.grammar.start

    def validate(self, model_text: str) -> list[SyntaxDiagnostic]:
        lexed = _lex_model(model_text, self.grammar.keywords)
        diagnostics = list(lexed.diagnostics)
        for segment in _split_items(lexed.tokens):
            if len(diagnostics) >= MAX_DIAGNOSTICS:
                break
            accepted, farthest, expected, context = self._recognizer.run(
                segment, self._item_start
            )
            if accepted:
                continue
            if farthest < len(segment):
                bad = segment[farthest]
                found = bad.describe()
                line, column = bad.line, bad.col
            else:
                last = segment[-1]
                found = "end of item"
                line, column = last.line, last.col + len(last.text)
            shown = sorted(expected)[:8]
            message = f"syntax error, unexpected {found}"
            if shown:
                message += ", expecting " + " or ".join(shown)
            diagnostics.append(
                SyntaxDiagnostic(
                    line=line,
                    column=column,
                    found=found,
                    expected=tuple(shown),
                    rule=context,
                    message=message,
                )
            )
        return diagnostics[:MAX_DIAGNOSTICS]


def validate_syntax(
    model_text: str, grammar: Optional[GrammarSpec] = None
) -> list[SyntaxDiagnostic]:
    """Empty list iff model_text is syntactically acceptable."""
    return SyntaxChecker(grammar).validate(model_text)
