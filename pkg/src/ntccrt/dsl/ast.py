"""Syntax tree for .ntcc models.

Nodes are frozen dataclasses compared structurally; source positions ride
along in ``pos`` fields that are excluded from equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

Pos = Optional[tuple]


def _pos():
    return field(default=None, compare=False, repr=False)


# -- expressions -------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Name:
    id: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class Cell:
    """``name[i, ...]`` on an indexed variable or set family."""

    name: str
    index: tuple
    pos: Pos = _pos()


@dataclass(frozen=True)
class OracleRef:
    """``oracle.<family>[...]``: S, sigma, delta (integers) or from (set)."""

    family: str
    index: tuple
    pos: Pos = _pos()


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


Expr = Union[Num, Name, Cell, OracleRef, BinOp, Neg]


# -- constraints -------------------------------------------------------------

@dataclass(frozen=True)
class Rel:
    op: str
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Member:
    elem: Expr
    target: Union[Name, Cell, OracleRef]


@dataclass(frozen=True)
class Conj:
    parts: tuple


@dataclass(frozen=True)
class TrueC:
    pass


Constraint = Union[Rel, Member, Conj, TrueC]


# -- ranges for sum/par over ---------------------------------------------------

@dataclass(frozen=True)
class Range:
    lo: Expr
    hi: Expr


@dataclass(frozen=True)
class SetLit:
    items: tuple


# -- processes ---------------------------------------------------------------

@dataclass(frozen=True)
class Tell:
    c: Constraint


@dataclass(frozen=True)
class When:
    c: Constraint
    body: "Proc"


@dataclass(frozen=True)
class Unless:
    c: Constraint
    body: "Proc"


@dataclass(frozen=True)
class Par:
    items: tuple


@dataclass(frozen=True)
class Next:
    body: "Proc"


@dataclass(frozen=True)
class Branch:
    guard: Constraint
    body: "Proc"


@dataclass(frozen=True)
class Sum:
    branches: tuple


@dataclass(frozen=True)
class SumOver:
    var: str
    rng: Union[Range, SetLit]
    guard: Constraint
    body: "Proc"
    pos: Pos = _pos()


@dataclass(frozen=True)
class ParOver:
    var: str
    rng: Union[Range, SetLit]
    body: "Proc"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Star:
    body: "Proc"


@dataclass(frozen=True)
class Bang:
    body: "Proc"


@dataclass(frozen=True)
class LocalVar:
    name: str
    lo: Optional[int] = None
    hi: Optional[int] = None


@dataclass(frozen=True)
class Local:
    vars: tuple
    body: "Proc"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple
    pos: Pos = _pos()


@dataclass(frozen=True)
class NativeCall:
    name: str
    args: tuple
    pos: Pos = _pos()


@dataclass(frozen=True)
class Skip:
    pass


Proc = Union[Tell, When, Unless, Par, Next, Sum, SumOver, ParOver, Star, Bang,
             Local, Call, NativeCall, Skip]


# -- model -------------------------------------------------------------------

@dataclass(frozen=True)
class Decl:
    """``var``/``set`` declaration; ``indexed`` marks a ``name[]`` family."""

    kind: str  # 'var' or 'set'
    name: str
    indexed: bool = False
    persistent: bool = False
    lo: Optional[int] = None
    hi: Optional[int] = None
    pos: Pos = _pos()


@dataclass(frozen=True)
class ConstDecl:
    name: str
    value: int
    pos: Pos = _pos()


@dataclass(frozen=True)
class Definition:
    name: str
    params: tuple
    body: Proc
    pos: Pos = _pos()


@dataclass(frozen=True)
class ModelAst:
    declarations: tuple = ()
    consts: tuple = ()
    definitions: tuple = ()
    system: Optional[Proc] = None
    outputs: tuple = ()
    alphabet: Optional[tuple] = None
    system_pos: Pos = _pos()

    def definition(self, name: str) -> Optional[Definition]:
        for d in self.definitions:
            if d.name == name:
                return d
        return None

    def declaration(self, name: str) -> Optional[Decl]:
        for d in self.declarations:
            if d.name == name:
                return d
        return None
