"""Recursive-descent parser for .ntcc model files.

The normative grammar lives in ``docs/grammar.ebnf``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import ast as A

KEYWORDS = frozenset("""
    tell when do unless next par sum over in star bang local skip def system
    var set persistent const output oracle true false and bool alphabet
""".split())

RELOPS = {"=": "=", "!=": "!=", "<>": "!=", "<": "<", "<=": "<=", ">": ">", ">=": ">="}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>--[^\n]*)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\.\.|\|\||/\\|<=|>=|!=|<>|[=<>+\-*!(){}\[\],;:.])
""", re.VERBOSE)


class ParseError(Exception):
    def __init__(self, line: int, column: int, expected: str, found: str):
        super().__init__(f"{line}:{column}: expected {expected}, found {found}")
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found
        self.code = "ParseError"


@dataclass(frozen=True)
class Token:
    kind: str  # 'int', 'name', 'kw', 'op', 'eof'
    text: str
    line: int
    col: int

    def describe(self) -> str:
        return "end of input" if self.kind == "eof" else repr(self.text)


def tokenize(source: str) -> list[Token]:
    tokens = []
    line, line_start = 1, 0
    pos = 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(line, pos - line_start + 1, "a token", repr(source[pos]))
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "name":
            tokens.append(Token("kw" if text in KEYWORDS else "name", text, line, col))
        elif kind in ("int", "op"):
            tokens.append(Token(kind, text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Fail(Exception):
    pass


class Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0
        self._far = -1
        self._far_expected: list[str] = []

    # token helpers -------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.text == text and t.kind in ("op", "kw")

    def fail(self, expected: str):
        if self.i > self._far:
            self._far = self.i
            self._far_expected = [expected]
        elif self.i == self._far and expected not in self._far_expected:
            self._far_expected.append(expected)
        raise _Fail()

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(repr(text))
        t = self.tok
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def name(self) -> Token:
        if self.tok.kind != "name":
            self.fail("identifier")
        t = self.tok
        self.i += 1
        return t

    def integer(self) -> int:
        sign = -1 if self.accept("-") else 1
        if self.tok.kind != "int":
            self.fail("integer")
        v = int(self.tok.text)
        self.i += 1
        return sign * v

    def error(self) -> ParseError:
        t = self.toks[max(self._far, 0)]
        return ParseError(t.line, t.col, " or ".join(self._far_expected) or "input",
                          t.describe())

    def run(self, rule):
        try:
            out = rule()
            if self.tok.kind != "eof":
                self.fail("end of input")
            return out
        except _Fail:
            raise self.error() from None

    # model ---------------------------------------------------------------

    def model(self) -> A.ModelAst:
        decls, consts, defs, outputs = [], [], [], []
        system = system_pos = alphabet = None
        while self.tok.kind != "eof":
            t = self.tok
            if self.at("var") or self.at("set") or self.at("persistent"):
                decls.append(self.declaration())
                self.expect(";")
            elif self.accept("const"):
                nm = self.name()
                self.expect("=")
                consts.append(A.ConstDecl(nm.text, self.integer(), pos=(nm.line, nm.col)))
                self.expect(";")
            elif self.accept("output"):
                outputs.append(self.outref())
                while self.accept(","):
                    outputs.append(self.outref())
                self.expect(";")
            elif self.accept("oracle"):
                self.expect("alphabet")
                self.accept(":")
                lo = self.integer()
                self.expect("..")
                alphabet = (lo, self.integer())
                self.expect(";")
            elif self.accept("def"):
                nm = self.name()
                self.expect("(")
                params = []
                if not self.at(")"):
                    params.append(self.name().text)
                    while self.accept(","):
                        params.append(self.name().text)
                self.expect(")")
                self.expect("=")
                body = self.proc()
                self.accept(";")
                defs.append(A.Definition(nm.text, tuple(params), body, pos=(nm.line, nm.col)))
            elif self.at("system"):
                if system is not None:
                    self.fail("a single system entry")
                self.i += 1
                self.expect("=")
                system_pos = (t.line, t.col)
                system = self.proc()
                self.accept(";")
            else:
                self.fail("declaration, def or system")
        return A.ModelAst(tuple(decls), tuple(consts), tuple(defs), system,
                          tuple(outputs), alphabet, system_pos=system_pos)

    def declaration(self) -> A.Decl:
        persistent = self.accept("persistent")
        if self.accept("var"):
            nm = self.name()
            indexed = self._brackets()
            self.expect(":")
            if self.accept("bool"):
                lo, hi = 0, 1
            else:
                lo = self.integer()
                self.expect("..")
                hi = self.integer()
            return A.Decl("var", nm.text, indexed, persistent, lo, hi, pos=(nm.line, nm.col))
        if self.accept("set"):
            nm = self.name()
            indexed = self._brackets()
            return A.Decl("set", nm.text, indexed, persistent, pos=(nm.line, nm.col))
        self.fail("'var' or 'set'")

    def _brackets(self) -> bool:
        if self.accept("["):
            self.expect("]")
            return True
        return False

    def outref(self):
        if self.at("oracle"):
            return self.oracle_ref()
        nm = self.name()
        if self.accept("["):
            idx = self.exprlist()
            self.expect("]")
            return A.Cell(nm.text, idx, pos=(nm.line, nm.col))
        return A.Name(nm.text, pos=(nm.line, nm.col))

    # processes -----------------------------------------------------------

    def proc(self) -> A.Proc:
        items = self.chain()
        return items[0] if len(items) == 1 else A.Par(tuple(items))

    def chain(self) -> list:
        items = [self.choice()]
        while self.accept("||"):
            items.append(self.choice())
        return items

    def choice(self) -> A.Proc:
        first = self.unary()
        if not self.at("+"):
            return first
        operands = [first]
        while self.accept("+"):
            operands.append(self.unary())
        branches = []
        for p in operands:
            if isinstance(p, A.When):
                branches.append(A.Branch(p.c, p.body))
            else:
                branches.append(A.Branch(A.TrueC(), p))
        return A.Sum(tuple(branches))

    def unary(self) -> A.Proc:
        t = self.tok
        if self.accept("tell"):
            self.expect("(")
            c = self.constraint()
            self.expect(")")
            return A.Tell(c)
        if self.accept("when"):
            c = self.constraint()
            self.expect("do")
            return A.When(c, self.unary())
        if self.accept("unless"):
            c = self.constraint()
            self.expect("next")
            return A.Unless(c, self.unary())
        if self.accept("next"):
            return A.Next(self.unary())
        if self.accept("star") or self.accept("*"):
            return A.Star(self.unary())
        if self.accept("bang") or self.accept("!"):
            return A.Bang(self.unary())
        if self.accept("local"):
            vs = [self.local_var()]
            while self.accept(","):
                vs.append(self.local_var())
            self.expect("in")
            return A.Local(tuple(vs), self.unary())
        if self.accept("sum"):
            if self.accept("over"):
                nm = self.name()
                self.expect("in")
                rng = self.range_()
                self.expect(":")
                if self.accept("when"):
                    g = self.constraint()
                    self.expect("do")
                else:
                    g = A.TrueC()
                return A.SumOver(nm.text, rng, g, self.unary(), pos=(t.line, t.col))
            self.expect("{")
            branches = [self.branch()]
            while self.accept(";"):
                if self.at("}"):
                    break
                branches.append(self.branch())
            self.expect("}")
            return A.Sum(tuple(branches))
        if self.accept("par"):
            if self.accept("over"):
                nm = self.name()
                self.expect("in")
                rng = self.range_()
                self.expect(":")
                return A.ParOver(nm.text, rng, self.unary(), pos=(t.line, t.col))
            self.expect("{")
            items = self.chain()
            self.expect("}")
            return A.Par(tuple(items))
        if self.accept("skip"):
            return A.Skip()
        if self.accept("oracle"):
            self.expect(".")
            nm = self.name()
            self.expect("(")
            args = self.exprlist() if not self.at(")") else ()
            self.expect(")")
            return A.NativeCall("oracle." + nm.text, args, pos=(t.line, t.col))
        if self.accept("("):
            p = self.proc()
            self.expect(")")
            return p
        if t.kind == "name":
            self.i += 1
            self.expect("(")
            args = self.exprlist() if not self.at(")") else ()
            self.expect(")")
            return A.Call(t.text, args, pos=(t.line, t.col))
        self.fail("process")

    def branch(self) -> A.Branch:
        self.expect("when")
        g = self.constraint()
        self.expect("do")
        return A.Branch(g, self.unary())

    def local_var(self) -> A.LocalVar:
        nm = self.name()
        if self.accept(":"):
            lo = self.integer()
            self.expect("..")
            return A.LocalVar(nm.text, lo, self.integer())
        return A.LocalVar(nm.text)

    def range_(self):
        if self.accept("{"):
            items = self.exprlist() if not self.at("}") else ()
            self.expect("}")
            return A.SetLit(items)
        lo = self.expr()
        self.expect("..")
        return A.Range(lo, self.expr())

    # constraints ---------------------------------------------------------

    def constraint(self) -> A.Constraint:
        parts = []
        self._conj_part(parts)
        while self.accept("/\\") or self.accept("and"):
            self._conj_part(parts)
        return parts[0] if len(parts) == 1 else A.Conj(tuple(parts))

    def _conj_part(self, parts: list) -> None:
        c = self.catom()
        if isinstance(c, A.Conj):
            parts.extend(c.parts)
        else:
            parts.append(c)

    def catom(self) -> A.Constraint:
        start = self.i
        try:
            return self.relation()
        except _Fail:
            if self.toks[start].text == "true" and self.toks[start].kind == "kw":
                self.i = start + 1
                return A.TrueC()
            if self.toks[start].text == "(":
                self.i = start + 1
                c = self.constraint()
                self.expect(")")
                return c
            raise

    def relation(self) -> A.Constraint:
        lhs = self.expr()
        if self.accept("in"):
            return A.Member(lhs, self.setref())
        op = RELOPS.get(self.tok.text) if self.tok.kind == "op" else None
        if op is None:
            self.fail("relation")
        self.i += 1
        rhs = self.expr()
        rels = [A.Rel(op, lhs, rhs)]
        while self.tok.kind == "op" and self.tok.text in RELOPS:
            op = RELOPS[self.tok.text]
            self.i += 1
            nxt = self.expr()
            rels.append(A.Rel(op, rhs, nxt))
            rhs = nxt
        return rels[0] if len(rels) == 1 else A.Conj(tuple(rels))

    def setref(self):
        if self.at("oracle"):
            return self.oracle_ref()
        nm = self.name()
        if self.accept("["):
            idx = self.exprlist()
            self.expect("]")
            return A.Cell(nm.text, idx, pos=(nm.line, nm.col))
        return A.Name(nm.text, pos=(nm.line, nm.col))

    # expressions ---------------------------------------------------------

    def exprlist(self) -> tuple:
        items = [self.expr()]
        while self.accept(","):
            items.append(self.expr())
        return tuple(items)

    def expr(self) -> A.Expr:
        e = self.term()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            e = A.BinOp(op, e, self.term())
        return e

    def term(self) -> A.Expr:
        e = self.factor()
        while self.at("*"):
            self.i += 1
            e = A.BinOp("*", e, self.factor())
        return e

    def factor(self) -> A.Expr:
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return A.Num(int(t.text))
        if self.accept("-"):
            inner = self.factor()
            if isinstance(inner, A.Num):
                return A.Num(-inner.value)
            return A.Neg(inner)
        if self.accept("true"):
            return A.Num(1)
        if self.accept("false"):
            return A.Num(0)
        if self.at("oracle"):
            return self.oracle_ref()
        if t.kind == "name":
            self.i += 1
            if self.accept("["):
                idx = self.exprlist()
                self.expect("]")
                return A.Cell(t.text, idx, pos=(t.line, t.col))
            return A.Name(t.text, pos=(t.line, t.col))
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        self.fail("expression")

    def oracle_ref(self) -> A.OracleRef:
        t = self.expect("oracle")
        self.expect(".")
        fam = self.name()
        self.expect("[")
        idx = self.exprlist()
        self.expect("]")
        return A.OracleRef(fam.text, idx, pos=(t.line, t.col))


def parse(source: str) -> A.ModelAst:
    """Parse a whole model file."""
    p = Parser(source)
    return p.run(p.model)


def parse_process(source: str) -> A.Proc:
    p = Parser(source)
    return p.run(p.proc)


def parse_constraint(source: str) -> A.Constraint:
    p = Parser(source)
    return p.run(p.constraint)


def parse_constraint_list(source: str) -> list:
    """Comma-separated constraints, as typed at the REPL; blank means none."""
    p = Parser(source)
    if p.tok.kind == "eof":
        return []

    def rule():
        items = [p.constraint()]
        while p.accept(","):
            items.append(p.constraint())
        return items

    return p.run(rule)
