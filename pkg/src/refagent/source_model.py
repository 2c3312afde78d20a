"""Java-subset parsing into a navigable design model.

The parser covers declarations (package, imports, classes, interfaces,
enums, fields, methods) structurally and scans method bodies as token
streams to collect the statement-shape facts the metrics need: decision
points, accessed fields, invoked types, and numeric literals. Generics
are erased, annotations are skipped, and anonymous classes fold into the
enclosing method's body statistics.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .errors import DuplicateType, ParseError, UnknownType

logger = logging.getLogger(__name__)

KEYWORD_MODIFIERS = {
    "public", "private", "protected", "static", "abstract", "final",
    "synchronized", "native", "transient", "volatile", "strictfp", "default",
}
TYPE_KINDS = {"class", "interface", "enum"}
DECISION_KEYWORDS = {"if", "for", "while", "case", "catch"}
PRIMITIVES = {
    "void", "boolean", "byte", "char", "short", "int", "long", "float", "double",
}

MULTI_CHAR_OPS = [
    ">>>=", "<<=", ">>=", ">>>", "...", "&&", "||", "==", "!=", "<=", ">=",
    "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "->", "::",
    "<<", ">>",
]


@dataclass
class Token:
    kind: str  # ident | number | string | char | op
    text: str
    line: int


def tokenize(text: str) -> list[Token]:
    """Lex Java source into tokens, dropping comments and whitespace."""
    tokens: list[Token] = []
    i = 0
    line = 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            i += 1
            continue
        if c in " \t\r\f":
            i += 1
            continue
        if text.startswith("//", i):
            j = text.find("\n", i)
            i = n if j < 0 else j
            continue
        if text.startswith("/*", i):
            j = text.find("*/", i + 2)
            if j < 0:
                raise ParseError(line, "unterminated block comment")
            line += text.count("\n", i, j)
            i = j + 2
            continue
        if c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                if text[j] == "\\":
                    j += 1
                elif text[j] == "\n":
                    raise ParseError(line, "unterminated string literal")
                j += 1
            if j >= n:
                raise ParseError(line, "unterminated string literal")
            tokens.append(Token("string", text[i : j + 1], line))
            i = j + 1
            continue
        if c == "'":
            j = i + 1
            while j < n and text[j] != "'":
                if text[j] == "\\":
                    j += 1
                j += 1
            if j >= n:
                raise ParseError(line, "unterminated char literal")
            tokens.append(Token("char", text[i : j + 1], line))
            i = j + 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            if text.startswith(("0x", "0X"), i):
                j = i + 2
                while j < n and (text[j] in "0123456789abcdefABCDEF_"):
                    j += 1
            else:
                while j < n and (text[j].isdigit() or text[j] in "._eE"):
                    if text[j] in "eE" and j + 1 < n and text[j + 1] in "+-":
                        j += 2
                        continue
                    j += 1
            while j < n and text[j] in "fFdDlL":
                j += 1
            tokens.append(Token("number", text[i:j], line))
            i = j
            continue
        if c.isalpha() or c == "_" or c == "$":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "_$"):
                j += 1
            tokens.append(Token("ident", text[i:j], line))
            i = j
            continue
        matched = False
        for op in MULTI_CHAR_OPS:
            if text.startswith(op, i):
                tokens.append(Token("op", op, line))
                i += len(op)
                matched = True
                break
        if matched:
            continue
        if c in "{}()[];,.<>=+-*/%!&|^~?:@":
            tokens.append(Token("op", c, line))
            i += 1
            continue
        raise ParseError(line, f"unexpected character {c!r}")
    return tokens


def numeric_value(literal: str) -> float:
    """Best-effort numeric value of a Java literal (suffixes stripped)."""
    body = literal.rstrip("fFdDlL").replace("_", "")
    try:
        if body.lower().startswith("0x"):
            return float(int(body, 16))
        return float(body)
    except ValueError:
        return float("nan")


@dataclass
class TypeRef:
    name: str  # as written, generics erased, arrays stripped
    fqn: Optional[str] = None  # filled during model build
    external: bool = False

    @property
    def resolved(self) -> bool:
        return self.fqn is not None


@dataclass
class BodyStats:
    loc: int = 0
    decision_points: int = 0
    accessed_fields: set[str] = field(default_factory=set)
    invoked_types: list[TypeRef] = field(default_factory=list)
    numeric_literals: list[tuple[float, int]] = field(default_factory=list)


@dataclass
class MethodDecl:
    name: str
    params: list[tuple[str, TypeRef]]
    return_type: Optional[TypeRef]
    modifiers: set[str]
    is_constructor: bool
    body_stats: BodyStats
    line_range: tuple[int, int]

    @property
    def signature(self) -> str:
        return f"{self.name}({','.join(t.name for _, t in self.params)})"

    @property
    def is_abstract(self) -> bool:
        return "abstract" in self.modifiers


@dataclass
class FieldDecl:
    name: str
    type: TypeRef
    modifiers: set[str]
    line: int
    initializer_literals: list[tuple[float, int]] = field(default_factory=list)

    @property
    def is_constant(self) -> bool:
        return "static" in self.modifiers and "final" in self.modifiers


@dataclass
class TypeDecl:
    fqn: str
    kind: str  # class | interface | enum
    supertype: Optional[TypeRef]
    interfaces: list[TypeRef]
    fields: list[FieldDecl]
    methods: list[MethodDecl]
    modifiers: set[str]
    line_range: tuple[int, int]

    @property
    def simple_name(self) -> str:
        return self.fqn.rsplit(".", 1)[-1]

    @property
    def loc(self) -> int:
        return self.line_range[1] - self.line_range[0] + 1

    def method_by_signature(self, signature: str) -> Optional[MethodDecl]:
        for m in self.methods:
            if m.signature == signature:
                return m
        return None


@dataclass
class SourceUnit:
    path: str
    package: str
    imports: list[str]
    types: list[TypeDecl]
    raw_text: str

    @property
    def line_count(self) -> int:
        return self.raw_text.count("\n") + (1 if self.raw_text else 0)


class _Parser:
    def __init__(self, tokens: list[Token], path: str, raw_text: str):
        self.tokens = tokens
        self.pos = 0
        self.path = path
        self.raw_text = raw_text

    # -- token helpers -------------------------------------------------

    def peek(self, offset: int = 0) -> Optional[Token]:
        idx = self.pos + offset
        return self.tokens[idx] if idx < len(self.tokens) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1].line if self.tokens else 1
            raise ParseError(last, "unexpected end of input")
        self.pos += 1
        return tok

    def expect(self, text: str) -> Token:
        tok = self.next()
        if tok.text != text:
            raise ParseError(tok.line, f"expected {text!r}, found {tok.text!r}")
        return tok

    def accept(self, text: str) -> bool:
        tok = self.peek()
        if tok is not None and tok.text == text:
            self.pos += 1
            return True
        return False

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.text == text

    def line(self) -> int:
        tok = self.peek()
        if tok is not None:
            return tok.line
        return self.tokens[-1].line if self.tokens else 1

    # -- small grammar pieces ------------------------------------------

    def qualified_name(self) -> str:
        tok = self.next()
        if tok.kind != "ident":
            raise ParseError(tok.line, f"expected identifier, found {tok.text!r}")
        parts = [tok.text]
        while self.at(".") and self.peek(1) is not None and self.peek(1).kind == "ident":
            self.next()
            parts.append(self.next().text)
        return ".".join(parts)

    def skip_generics(self) -> None:
        if not self.at("<"):
            return
        depth = 0
        while True:
            tok = self.next()
            if tok.text in ("<", "<<"):
                depth += 2 if tok.text == "<<" else 1
            elif tok.text in (">", ">>", ">>>"):
                depth -= len(tok.text)
            if depth <= 0:
                return

    def skip_annotations_and_modifiers(self) -> set[str]:
        mods: set[str] = set()
        while True:
            tok = self.peek()
            if tok is None:
                return mods
            if tok.text == "@":
                self.next()
                nxt = self.peek()
                if nxt is not None and nxt.kind == "ident" and nxt.text == "interface":
                    # annotation type declaration: put back the '@' marker by
                    # treating it as an unsupported construct
                    raise ParseError(tok.line, "annotation declarations unsupported")
                self.qualified_name()
                if self.at("("):
                    self.skip_balanced("(", ")")
                continue
            if tok.kind == "ident" and tok.text in KEYWORD_MODIFIERS:
                # 'static { ... }' initializer: leave 'static' to caller
                nxt = self.peek(1)
                if tok.text == "static" and nxt is not None and nxt.text == "{":
                    return mods
                mods.add(tok.text)
                self.next()
                continue
            return mods

    def skip_balanced(self, open_tok: str, close_tok: str) -> tuple[int, int]:
        """Consume a balanced region; returns (first_line, last_line)."""
        tok = self.expect(open_tok)
        first = tok.line
        depth = 1
        last = tok.line
        while depth > 0:
            tok = self.next()
            last = tok.line
            if tok.text == open_tok:
                depth += 1
            elif tok.text == close_tok:
                depth -= 1
        return first, last

    def type_ref(self) -> TypeRef:
        name = self.qualified_name()
        self.skip_generics()
        while self.at("[") :
            self.next()
            self.expect("]")
        return TypeRef(name=name)

    # -- declarations ---------------------------------------------------

    def parse_unit(self) -> SourceUnit:
        package = ""
        if self.at("package"):
            self.next()
            package = self.qualified_name()
            self.expect(";")
        imports: list[str] = []
        while self.at("import"):
            self.next()
            if self.at("static"):
                self.next()
            name = self.qualified_name()
            if self.accept("."):
                self.expect("*")
                name += ".*"
            self.expect(";")
            imports.append(name)
        types: list[TypeDecl] = []
        while self.peek() is not None:
            if self.accept(";"):
                continue
            self.parse_type(package, None, types)
        return SourceUnit(
            path=self.path,
            package=package,
            imports=imports,
            types=types,
            raw_text=self.raw_text,
        )

    def parse_type(
        self, package: str, outer: Optional[str], sink: list[TypeDecl]
    ) -> TypeDecl:
        start_tok = self.peek()
        start_line = start_tok.line if start_tok else 1
        mods = self.skip_annotations_and_modifiers()
        kind_tok = self.next()
        if kind_tok.text not in TYPE_KINDS:
            raise ParseError(kind_tok.line, f"expected type declaration, found {kind_tok.text!r}")
        name_tok = self.next()
        if name_tok.kind != "ident":
            raise ParseError(name_tok.line, f"expected type name, found {name_tok.text!r}")
        self.skip_generics()

        supertype: Optional[TypeRef] = None
        interfaces: list[TypeRef] = []
        if self.accept("extends"):
            if kind_tok.text == "interface":
                interfaces.append(self.type_ref())
                while self.accept(","):
                    interfaces.append(self.type_ref())
            else:
                supertype = self.type_ref()
        if self.accept("implements"):
            interfaces.append(self.type_ref())
            while self.accept(","):
                interfaces.append(self.type_ref())

        simple = name_tok.text if outer is None else f"{outer}.{name_tok.text}"
        fqn = f"{package}.{simple}" if package else simple

        decl = TypeDecl(
            fqn=fqn,
            kind=kind_tok.text,
            supertype=supertype,
            interfaces=interfaces,
            fields=[],
            methods=[],
            modifiers=mods & {"public", "abstract", "final"},
            line_range=(start_line, start_line),
        )
        sink.append(decl)
        end_line = self.parse_type_body(decl, package, simple, sink)
        decl.line_range = (start_line, end_line)
        return decl

    def parse_type_body(
        self, decl: TypeDecl, package: str, simple: str, sink: list[TypeDecl]
    ) -> int:
        self.expect("{")
        if decl.kind == "enum":
            self.parse_enum_constants(decl)
        while True:
            tok = self.peek()
            if tok is None:
                raise ParseError(self.tokens[-1].line, "unexpected end of type body")
            if tok.text == "}":
                return self.next().line
            if tok.text == ";":
                self.next()
                continue
            self.parse_member(decl, package, simple, sink)

    def parse_enum_constants(self, decl: TypeDecl) -> None:
        while True:
            tok = self.peek()
            if tok is None:
                raise ParseError(self.tokens[-1].line, "unterminated enum body")
            if tok.text in (";", "}"):
                if tok.text == ";":
                    self.next()
                return
            const = self.next()
            if const.kind != "ident":
                raise ParseError(const.line, f"expected enum constant, found {const.text!r}")
            if self.at("("):
                self.skip_balanced("(", ")")
            if self.at("{"):
                self.skip_balanced("{", "}")
            if not self.accept(","):
                if self.at(";"):
                    self.next()
                return

    def parse_member(
        self, decl: TypeDecl, package: str, simple: str, sink: list[TypeDecl]
    ) -> None:
        start_line = self.line()
        mods = self.skip_annotations_and_modifiers()

        tok = self.peek()
        if tok is None:
            raise ParseError(self.tokens[-1].line, "unexpected end of member")
        if tok.text in TYPE_KINDS:
            # nested type; rewind is unnecessary because modifiers are consumed
            self.parse_nested(decl, package, simple, sink, mods, start_line)
            return
        if tok.text == "static" and self.peek(1) is not None and self.peek(1).text == "{":
            self.next()
            self.skip_balanced("{", "}")
            return
        if tok.text == "{":
            self.skip_balanced("{", "}")
            return

        # constructor: SimpleName '('
        simple_name = simple.rsplit(".", 1)[-1]
        if (
            tok.kind == "ident"
            and tok.text == simple_name
            and self.peek(1) is not None
            and self.peek(1).text == "("
        ):
            self.next()
            self.parse_method(decl, None, tok.text, mods, start_line, constructor=True)
            return

        self.skip_generics()  # method type parameters
        ret = self.type_ref()
        name_tok = self.next()
        if name_tok.kind != "ident":
            raise ParseError(name_tok.line, f"expected member name, found {name_tok.text!r}")
        if self.at("("):
            self.parse_method(decl, ret, name_tok.text, mods, start_line, constructor=False)
        else:
            self.parse_field(decl, ret, name_tok.text, mods, start_line)

    def parse_nested(
        self,
        decl: TypeDecl,
        package: str,
        simple: str,
        sink: list[TypeDecl],
        mods: set[str],
        start_line: int,
    ) -> None:
        kind_tok = self.next()
        name_tok = self.next()
        if name_tok.kind != "ident":
            raise ParseError(name_tok.line, f"expected type name, found {name_tok.text!r}")
        self.skip_generics()
        supertype: Optional[TypeRef] = None
        interfaces: list[TypeRef] = []
        if self.accept("extends"):
            if kind_tok.text == "interface":
                interfaces.append(self.type_ref())
                while self.accept(","):
                    interfaces.append(self.type_ref())
            else:
                supertype = self.type_ref()
        if self.accept("implements"):
            interfaces.append(self.type_ref())
            while self.accept(","):
                interfaces.append(self.type_ref())
        nested_simple = f"{simple}.{name_tok.text}"
        fqn = f"{package}.{nested_simple}" if package else nested_simple
        nested = TypeDecl(
            fqn=fqn,
            kind=kind_tok.text,
            supertype=supertype,
            interfaces=interfaces,
            fields=[],
            methods=[],
            modifiers=mods & {"public", "abstract", "final"},
            line_range=(start_line, start_line),
        )
        sink.append(nested)
        end_line = self.parse_type_body(nested, package, nested_simple, sink)
        nested.line_range = (start_line, end_line)

    def parse_method(
        self,
        decl: TypeDecl,
        ret: Optional[TypeRef],
        name: str,
        mods: set[str],
        start_line: int,
        constructor: bool,
    ) -> None:
        self.expect("(")
        params: list[tuple[str, TypeRef]] = []
        if not self.at(")"):
            while True:
                self.skip_annotations_and_modifiers()
                ptype = self.type_ref()
                if self.accept("..."):
                    pass
                pname = self.next()
                if pname.kind != "ident":
                    raise ParseError(pname.line, f"expected parameter name, found {pname.text!r}")
                while self.accept("["):
                    self.expect("]")
                params.append((pname.text, ptype))
                if not self.accept(","):
                    break
        self.expect(")")
        if self.accept("throws"):
            self.type_ref()
            while self.accept(","):
                self.type_ref()

        stats = BodyStats()
        if self.at("{"):
            end_line = self.scan_body(stats)
        else:
            end_line = self.expect(";").line
        stats.loc = end_line - start_line + 1
        decl.methods.append(
            MethodDecl(
                name=name,
                params=params,
                return_type=ret,
                modifiers=mods,
                is_constructor=constructor,
                body_stats=stats,
                line_range=(start_line, end_line),
            )
        )

    def parse_field(
        self,
        decl: TypeDecl,
        ftype: TypeRef,
        first_name: str,
        mods: set[str],
        start_line: int,
    ) -> None:
        names = [(first_name, start_line)]
        while self.accept("["):
            self.expect("]")
        literals: list[tuple[float, int]] = []
        while True:
            if self.accept("="):
                self.scan_initializer(literals)
            if self.accept(","):
                tok = self.next()
                if tok.kind != "ident":
                    raise ParseError(tok.line, f"expected field name, found {tok.text!r}")
                names.append((tok.text, tok.line))
                while self.accept("["):
                    self.expect("]")
                continue
            self.expect(";")
            break
        for name, line in names:
            if any(f.name == name for f in decl.fields):
                raise ParseError(line, f"duplicate field name {name!r}")
            decl.fields.append(
                FieldDecl(
                    name=name,
                    type=ftype,
                    modifiers=set(mods),
                    line=line,
                    initializer_literals=list(literals),
                )
            )

    def scan_initializer(self, literals: list[tuple[float, int]]) -> None:
        """Consume an initializer expression up to ',' or ';' at depth 0."""
        depth = 0
        prev: Optional[Token] = None
        while True:
            tok = self.peek()
            if tok is None:
                raise ParseError(self.tokens[-1].line, "unterminated field initializer")
            if depth == 0 and tok.text in (",", ";"):
                return
            self.next()
            if tok.text in ("(", "{", "["):
                depth += 1
            elif tok.text in (")", "}", "]"):
                depth -= 1
            elif tok.kind == "number":
                value = numeric_value(tok.text)
                if prev is not None and prev.text == "-":
                    value = -value
                literals.append((value, tok.line))
            prev = tok

    def scan_body(self, stats: BodyStats) -> int:
        """Token-scan a brace-balanced body, collecting statement shape."""
        self.expect("{")
        depth = 1
        prev: Optional[Token] = None
        prev2: Optional[Token] = None
        field_candidates: list[tuple[str, Optional[str], Optional[str], Optional[str]]] = []
        last_line = self.line()
        while depth > 0:
            tok = self.next()
            last_line = tok.line
            nxt = self.peek()
            if tok.text == "{":
                depth += 1
            elif tok.text == "}":
                depth -= 1
            elif tok.kind == "ident" and tok.text in DECISION_KEYWORDS:
                # 'do' loops contribute through their trailing 'while'
                stats.decision_points += 1
                if tok.text == "catch" and nxt is not None and nxt.text == "(":
                    caught = self.peek(1)
                    if caught is not None and caught.kind == "ident":
                        stats.invoked_types.append(TypeRef(name=caught.text))
            elif tok.text in ("&&", "||"):
                stats.decision_points += 1
            elif tok.text == "?":
                if prev is not None and (
                    prev.kind in ("ident", "number", "string", "char")
                    or prev.text in (")", "]")
                ):
                    stats.decision_points += 1
            elif tok.kind == "ident" and tok.text == "new":
                if nxt is not None and nxt.kind == "ident":
                    parts = [nxt.text]
                    k = 1
                    while (
                        self.peek(k) is not None
                        and self.peek(k).text == "."
                        and self.peek(k + 1) is not None
                        and self.peek(k + 1).kind == "ident"
                    ):
                        parts.append(self.peek(k + 1).text)
                        k += 2
                    stats.invoked_types.append(TypeRef(name=".".join(parts)))
            elif tok.kind == "number":
                value = numeric_value(tok.text)
                if prev is not None and prev.text == "-" and (
                    prev2 is None
                    or prev2.kind == "op"
                    and prev2.text not in (")", "]")
                ):
                    value = -value
                stats.numeric_literals.append((value, tok.line))
            elif tok.kind == "ident":
                # static invocation 'Type.member(...)' on an uppercase name
                if (
                    tok.text[0].isupper()
                    and nxt is not None
                    and nxt.text == "."
                    and (prev is None or prev.text != ".")
                ):
                    after = self.peek(2)
                    if after is not None and after.text == "(":
                        stats.invoked_types.append(TypeRef(name=tok.text))
                field_candidates.append(
                    (
                        tok.text,
                        prev.text if prev is not None else None,
                        prev2.text if prev2 is not None else None,
                        nxt.text if nxt is not None else None,
                    )
                )
            prev2 = prev
            prev = tok
        stats._field_candidates = field_candidates  # resolved in finalize
        return last_line


def _finalize_field_access(decl: TypeDecl) -> None:
    field_names = {f.name for f in decl.fields}
    for method in decl.methods:
        stats = method.body_stats
        candidates = getattr(stats, "_field_candidates", [])
        for name, prev, prev2, nxt in candidates:
            if name not in field_names:
                continue
            if nxt == "(":
                continue  # method call, not field access
            if prev == "." and prev2 != "this":
                continue  # access on some other object
            stats.accessed_fields.add(name)
        if hasattr(stats, "_field_candidates"):
            del stats._field_candidates


def parse_source(text: str, path: str = "<memory>") -> SourceUnit:
    """Parse one Java compilation unit of the supported subset."""
    tokens = tokenize(text)
    if not tokens:
        return SourceUnit(path=path, package="", imports=[], types=[], raw_text=text)
    unit = _Parser(tokens, path, text).parse_unit()
    seen: set[str] = set()
    for decl in unit.types:
        if decl.fqn in seen:
            raise ParseError(decl.line_range[0], f"duplicate type {decl.fqn}")
        seen.add(decl.fqn)
        _finalize_field_access(decl)
    return unit


@dataclass
class DesignModel:
    types: dict[str, TypeDecl]
    units: list[SourceUnit]
    hierarchy: dict[str, str]  # child fqn -> parent fqn (project-internal only)
    unit_of: dict[str, SourceUnit] = field(default_factory=dict)

    def type_of(self, fqn: str) -> TypeDecl:
        if fqn not in self.types:
            raise UnknownType(fqn)
        return self.types[fqn]

    def children_of(self, fqn: str) -> list[str]:
        return sorted(c for c, p in self.hierarchy.items() if p == fqn)


def _resolve(name: str, unit: SourceUnit, known: dict[str, TypeDecl]) -> Optional[str]:
    """Resolve a type name to a project FQN, or None when external."""
    if name in known:
        return name
    simple = name.rsplit(".", 1)[-1] if "." in name else name
    for imp in unit.imports:
        if imp.endswith("." + simple) and imp in known:
            return imp
        if imp.endswith(".*"):
            candidate = imp[:-2] + "." + simple
            if candidate in known:
                return candidate
    if unit.package:
        candidate = f"{unit.package}.{name}"
        if candidate in known:
            return candidate
    # nested sibling: p.Outer.Inner referenced as Inner from within p.Outer
    for fqn in known:
        if fqn.endswith("." + name):
            head = fqn[: -len(name) - 1]
            if head == unit.package or head.startswith(unit.package + "."):
                return fqn
    return None


def build_design_model(units: Iterable[SourceUnit]) -> DesignModel:
    """Assemble parsed units into one model with resolved references."""
    units = list(units)
    types: dict[str, TypeDecl] = {}
    unit_of: dict[str, SourceUnit] = {}
    for unit in units:
        for decl in unit.types:
            if decl.fqn in types:
                raise DuplicateType(decl.fqn)
            types[decl.fqn] = decl
            unit_of[decl.fqn] = unit

    hierarchy: dict[str, str] = {}
    for unit in units:
        for decl in unit.types:
            refs: list[TypeRef] = []
            if decl.supertype is not None:
                refs.append(decl.supertype)
            refs.extend(decl.interfaces)
            for f in decl.fields:
                refs.append(f.type)
            for m in decl.methods:
                if m.return_type is not None:
                    refs.append(m.return_type)
                refs.extend(t for _, t in m.params)
                refs.extend(m.body_stats.invoked_types)
            for ref in refs:
                resolved = _resolve(ref.name, unit, types)
                if resolved is not None:
                    ref.fqn = resolved
                    ref.external = False
                else:
                    ref.fqn = None
                    ref.external = True
            if decl.supertype is not None and decl.supertype.fqn is not None:
                hierarchy[decl.fqn] = decl.supertype.fqn

    _check_acyclic(hierarchy)
    return DesignModel(types=types, units=units, hierarchy=hierarchy, unit_of=unit_of)


def _check_acyclic(hierarchy: dict[str, str]) -> None:
    for start in hierarchy:
        seen = {start}
        node = start
        while node in hierarchy:
            node = hierarchy[node]
            if node in seen:
                raise ParseError(0, f"inheritance cycle through {node}")
            seen.add(node)


def ancestors(model: DesignModel, fqn: str) -> list[str]:
    """Transitive project-internal supertype chain, nearest first."""
    model.type_of(fqn)
    chain: list[str] = []
    node = fqn
    while node in model.hierarchy:
        node = model.hierarchy[node]
        chain.append(node)
    return chain


DEFAULT_SOURCE_ROOTS = ["src/main/java"]
DEFAULT_TEST_ROOTS = ["src/test/java"]


def discover_sources(root: Path, source_roots: list[str]) -> list[Path]:
    found: list[Path] = []
    for rel in source_roots:
        base = root / rel
        if base.is_dir():
            found.extend(sorted(base.rglob("*.java")))
    return found


def load_project(
    root: Path | str,
    source_roots: Optional[list[str]] = None,
    test_roots: Optional[list[str]] = None,
) -> tuple[DesignModel, set[str]]:
    """Parse a project tree; returns the model and the set of test-root FQNs."""
    root = Path(root)
    source_roots = source_roots or DEFAULT_SOURCE_ROOTS
    test_roots = test_roots if test_roots is not None else DEFAULT_TEST_ROOTS
    units: list[SourceUnit] = []
    test_fqns: set[str] = set()
    for path in discover_sources(root, source_roots):
        units.append(parse_source(path.read_text(encoding="utf-8"), str(path)))
    for path in discover_sources(root, test_roots):
        unit = parse_source(path.read_text(encoding="utf-8"), str(path))
        units.append(unit)
        test_fqns.update(t.fqn for t in unit.types)
    model = build_design_model(units)
    return model, test_fqns
