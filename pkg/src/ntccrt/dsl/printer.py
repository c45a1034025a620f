"""Pretty-printer producing source that parses back to an equal AST."""

from __future__ import annotations

from . import ast as A

_PREC = {"+": 1, "-": 1, "*": 2}


def expr_str(e: A.Expr) -> str:
    if isinstance(e, A.Num):
        return str(e.value)
    if isinstance(e, A.Name):
        return e.id
    if isinstance(e, A.Cell):
        return f"{e.name}[{', '.join(expr_str(i) for i in e.index)}]"
    if isinstance(e, A.OracleRef):
        return f"oracle.{e.family}[{', '.join(expr_str(i) for i in e.index)}]"
    if isinstance(e, A.Neg):
        inner = expr_str(e.operand)
        if isinstance(e.operand, (A.BinOp, A.Neg)):
            inner = f"({inner})"
        return "-" + inner
    if isinstance(e, A.BinOp):
        p = _PREC[e.op]
        left = expr_str(e.left)
        if isinstance(e.left, A.BinOp) and _PREC[e.left.op] < p:
            left = f"({left})"
        right = expr_str(e.right)
        if isinstance(e.right, A.BinOp) and _PREC[e.right.op] <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression: {e!r}")


def constraint_str(c: A.Constraint) -> str:
    if isinstance(c, A.Rel):
        return f"{expr_str(c.lhs)} {c.op} {expr_str(c.rhs)}"
    if isinstance(c, A.Member):
        return f"{expr_str(c.elem)} in {expr_str(c.target)}"
    if isinstance(c, A.Conj):
        return " /\\ ".join(
            f"({constraint_str(p)})" if isinstance(p, A.Conj) else constraint_str(p)
            for p in c.parts)
    if isinstance(c, A.TrueC):
        return "true"
    raise TypeError(f"not a constraint: {c!r}")


def range_str(r) -> str:
    if isinstance(r, A.Range):
        return f"{expr_str(r.lo)}..{expr_str(r.hi)}"
    return "{" + ", ".join(expr_str(i) for i in r.items) + "}"


def proc_str(p: A.Proc) -> str:
    if isinstance(p, A.Tell):
        return f"tell({constraint_str(p.c)})"
    if isinstance(p, A.When):
        return f"when {constraint_str(p.c)} do {proc_str(p.body)}"
    if isinstance(p, A.Unless):
        return f"unless {constraint_str(p.c)} next {proc_str(p.body)}"
    if isinstance(p, A.Par):
        return "par { " + " || ".join(proc_str(i) for i in p.items) + " }"
    if isinstance(p, A.Next):
        return f"next {proc_str(p.body)}"
    if isinstance(p, A.Sum):
        return "sum { " + " ; ".join(
            f"when {constraint_str(b.guard)} do {proc_str(b.body)}" for b in p.branches) + " }"
    if isinstance(p, A.SumOver):
        return (f"sum over {p.var} in {range_str(p.rng)} : "
                f"when {constraint_str(p.guard)} do {proc_str(p.body)}")
    if isinstance(p, A.ParOver):
        return f"par over {p.var} in {range_str(p.rng)} : {proc_str(p.body)}"
    if isinstance(p, A.Star):
        return f"star {proc_str(p.body)}"
    if isinstance(p, A.Bang):
        return f"bang {proc_str(p.body)}"
    if isinstance(p, A.Local):
        vs = ", ".join(v.name if v.lo is None else f"{v.name}: {v.lo}..{v.hi}" for v in p.vars)
        return f"local {vs} in {proc_str(p.body)}"
    if isinstance(p, (A.Call, A.NativeCall)):
        return f"{p.name}({', '.join(expr_str(a) for a in p.args)})"
    if isinstance(p, A.Skip):
        return "skip"
    raise TypeError(f"not a process: {p!r}")


def model_str(m: A.ModelAst) -> str:
    lines = []
    if m.alphabet is not None:
        lines.append(f"oracle alphabet {m.alphabet[0]}..{m.alphabet[1]};")
    for c in m.consts:
        lines.append(f"const {c.name} = {c.value};")
    for d in m.declarations:
        head = ("persistent " if d.persistent else "") + d.kind + " " + d.name
        if d.indexed:
            head += "[]"
        if d.kind == "var":
            head += f": {d.lo}..{d.hi}"
        lines.append(head + ";")
    if m.outputs:
        lines.append("output " + ", ".join(expr_str(o) for o in m.outputs) + ";")
    for d in m.definitions:
        lines.append(f"def {d.name}({', '.join(d.params)}) = {proc_str(d.body)};")
    if m.system is not None:
        lines.append(f"system = {proc_str(m.system)};")
    return "\n".join(lines) + "\n"
