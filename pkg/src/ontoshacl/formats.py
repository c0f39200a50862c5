"""Text formats: four line-oriented file kinds plus the JSON report.

Ontology files (`.tbox`), data files (`.abox`), shape files (`.shacl`)
and target files (`.targets`) share one lexical style: `#` starts a
comment, blank lines are skipped, uppercase-initial identifiers are
concepts, lowercase-initial are roles, `$x` is a shape, `@x` is an
individual, `^r` is the inverse of r. Serializers round-trip: parsing
their output reproduces the value.
"""
from __future__ import annotations

import json
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .core import (
    BOT,
    TOP,
    ABox,
    Anon,
    AtMostOne,
    Axiom,
    ConjInclusion,
    ExistsInclusion,
    Individual,
    Interpretation,
    Node,
    Role,
    RoleInclusion,
    TBox,
    ValueRestriction,
    node_key,
    type_key,
)
from .paths import parse_regex, RegexError, regex_str
from .shapes import (
    RESERVED_PREFIX,
    And,
    ConceptRef,
    Constraint,
    ExistsPath,
    ExistsRoles,
    GuardedDisj,
    GuardedEq,
    IndividualRef,
    NegShapeRef,
    Not,
    Or,
    ShapeBody,
    ShapeRef,
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int, source: str = "<input>"):
        super().__init__(f"{source}:{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.source = source


def _ident_end(text: str, i: int) -> int:
    j = i
    while j < len(text) and (text[j].isalnum() or text[j] == "_"):
        j += 1
    return j


class _Cursor:
    """Single-line scanner with 1-based column reporting."""

    def __init__(self, text: str, line: int, source: str):
        self.text = text
        self.i = 0
        self.line = line
        self.source = source

    def error(self, msg: str) -> ParseError:
        return ParseError(msg, self.line, self.i + 1, self.source)

    def skip_ws(self) -> None:
        while self.i < len(self.text) and self.text[self.i] in " \t":
            self.i += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.i] if self.i < len(self.text) else ""

    def eat(self, token: str) -> None:
        self.skip_ws()
        if not self.text.startswith(token, self.i):
            raise self.error(f"expected {token!r}")
        self.i += len(token)

    def try_eat(self, token: str) -> bool:
        self.skip_ws()
        if self.text.startswith(token, self.i):
            self.i += len(token)
            return True
        return False

    def ident(self, what: str) -> str:
        self.skip_ws()
        j = _ident_end(self.text, self.i)
        if j == self.i:
            raise self.error(f"expected {what}")
        word = self.text[self.i : j]
        self.i = j
        return word

    def done(self) -> bool:
        self.skip_ws()
        return self.i >= len(self.text)

    def expect_done(self) -> None:
        if not self.done():
            raise self.error(f"unexpected trailing input {self.text[self.i:]!r}")


def _lines(text: str) -> List[Tuple[int, str]]:
    out = []
    for k, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            out.append((k, body))
    return out


# ---------------------------------------------------------------------------
# concepts and roles


def _concept(cur: _Cursor) -> str:
    word = cur.ident("a concept name")
    if word in (TOP, BOT):
        return word
    if not word[0].isupper():
        raise cur.error(f"concept names start uppercase, got {word!r}")
    return word


def _role(cur: _Cursor) -> Role:
    inverted = cur.try_eat("^")
    word = cur.ident("a role name")
    if not word[0].islower() or word in (TOP, BOT):
        raise cur.error(f"role names start lowercase, got {word!r}")
    return Role(word, inverted)


# ---------------------------------------------------------------------------
# .tbox


def _peek_word(cur: _Cursor) -> str:
    cur.skip_ws()
    return cur.text[cur.i : _ident_end(cur.text, cur.i)]


def parse_tbox(text: str, source: str = "<tbox>") -> TBox:
    axioms: List[Axiom] = []
    for line_no, body in _lines(text):
        cur = _Cursor(body, line_no, source)
        first = _peek_word(cur)
        if cur.peek() == "^" or (
            first and first[0].islower() and first not in (TOP, BOT)
        ):
            sub = _role(cur)
            cur.eat("<=")
            sup = _role(cur)
            cur.expect_done()
            axioms.append(RoleInclusion(sub, sup))
            continue
        lhs = [_concept(cur)]
        while cur.try_eat("&"):
            lhs.append(_concept(cur))
        cur.eat("<=")
        kind = _peek_word(cur)
        if kind in ("some", "only", "max1"):
            cur.ident("a keyword")
            if len(lhs) != 1:
                raise cur.error("restrictions take a single concept on the left")
            role = _role(cur)
            cur.eat(".")
            if cur.peek() == "(":
                raise cur.error("compound fillers are not allowed; name the conjunction")
            filler = _concept(cur)
            cur.expect_done()
            ctor = {"some": ExistsInclusion, "only": ValueRestriction, "max1": AtMostOne}[kind]
            axioms.append(ctor(lhs[0], role, filler))
        else:
            rhs = _concept(cur)
            cur.expect_done()
            axioms.append(ConjInclusion(frozenset(lhs), rhs))
    return TBox.of(axioms)


def serialize_tbox(tbox: TBox) -> str:
    return "".join(str(ax) + "\n" for ax in tbox.axioms())


# ---------------------------------------------------------------------------
# .abox


def parse_abox(text: str, source: str = "<abox>") -> ABox:
    concepts: List[Tuple[str, str]] = []
    roles: List[Tuple[Role, str, str]] = []
    for line_no, body in _lines(text):
        cur = _Cursor(body, line_no, source)
        if cur.peek() == "^" or cur.peek().islower():
            role = _role(cur)
            cur.eat("(")
            a = cur.ident("an individual")
            cur.eat(",")
            b = cur.ident("an individual")
            cur.eat(")")
            cur.expect_done()
            roles.append((role, a, b))
        else:
            c = _concept(cur)
            if c in (TOP, BOT):
                raise cur.error(f"{c!r} cannot be asserted")
            cur.eat("(")
            a = cur.ident("an individual")
            cur.eat(")")
            cur.expect_done()
            concepts.append((c, a))
    return ABox.of(concepts=concepts, roles=roles)


def serialize_abox(abox: ABox) -> str:
    out = [f"{c}({a})" for c, a in sorted(abox.concept_atoms)]
    out += [f"{r}({a},{b})" for r, a, b in sorted(abox.role_atoms)]
    return "".join(s + "\n" for s in out)


# ---------------------------------------------------------------------------
# .shacl


def _shape_name(cur: _Cursor) -> str:
    cur.eat("$")
    name = cur.ident("a shape name")
    return name


def _angle_regex(cur: _Cursor):
    cur.eat("<")
    j = cur.text.find(">", cur.i)
    if j < 0:
        raise cur.error("unterminated path expression, expected '>'")
    raw = cur.text[cur.i : j]
    try:
        expr = parse_regex(raw)
    except RegexError as e:
        raise ParseError(str(e), cur.line, cur.i + 1 + e.pos, cur.source) from e
    cur.i = j + 1
    return expr


def _comparison(cur: _Cursor, kind: str) -> ShapeBody:
    cur.eat("(")
    left = _angle_regex(cur)
    cur.eat(",")
    right = _angle_regex(cur)
    cur.eat(")")
    ctor = GuardedEq if kind == "eq" else GuardedDisj
    return ctor(None, left, right)


def _body_atom(cur: _Cursor) -> ShapeBody:
    ch = cur.peek()
    if ch == "(":
        cur.eat("(")
        inner = _body_alt(cur)
        cur.eat(")")
        return inner
    if ch == "@":
        cur.eat("@")
        return IndividualRef(cur.ident("an individual"))
    if ch == "$":
        return ShapeRef(_shape_name(cur))
    if ch == "!":
        cur.eat("!")
        nxt = cur.peek()
        if nxt == "$":
            return NegShapeRef(_shape_name(cur))
        if nxt == "(":
            cur.eat("(")
            inner = _body_alt(cur)
            cur.eat(")")
            return Not(inner)
        raise cur.error("'!' must be followed by a shape ref or a parenthesized body")
    mark = cur.i
    word = cur.ident("a concept, 'some', 'eq' or 'disj'")
    if word == "some":
        if cur.peek() == "[":
            cur.eat("[")
            roles = [_role(cur)]
            while cur.try_eat(","):
                roles.append(_role(cur))
            cur.eat("]")
            cur.eat(".")
            return ExistsRoles(frozenset(roles), _body_unary(cur))
        if cur.peek() == "<":
            path = _angle_regex(cur)
            cur.eat(".")
            return ExistsPath(path, _body_unary(cur))
        raise cur.error("'some' takes '[roles]' or '<path>'")
    if word in ("eq", "disj") and cur.peek() == "(":
        return _comparison(cur, word)
    if word in (TOP, BOT) or word[0].isupper():
        return ConceptRef(word)
    cur.i = mark
    raise cur.error(f"cannot read a shape body at {word!r}")


def _body_unary(cur: _Cursor) -> ShapeBody:
    return _body_atom(cur)


def _guard_fuse(left: ShapeBody, right: ShapeBody) -> ShapeBody:
    for a, b in ((left, right), (right, left)):
        if isinstance(a, IndividualRef) and isinstance(b, (GuardedEq, GuardedDisj)):
            if b.guard is None:
                return type(b)(a.name, b.left, b.right)
    return And(left, right)


def _body_conj(cur: _Cursor) -> ShapeBody:
    out = _body_unary(cur)
    while cur.try_eat("&"):
        out = _guard_fuse(out, _body_unary(cur))
    return out


def _body_alt(cur: _Cursor) -> ShapeBody:
    out = _body_conj(cur)
    while cur.try_eat("|"):
        out = Or(out, _body_conj(cur))
    return out


def parse_shape_body(text: str, line: int = 1, source: str = "<shacl>") -> ShapeBody:
    cur = _Cursor(text, line, source)
    body = _body_alt(cur)
    cur.expect_done()
    return body


def parse_constraints(text: str, source: str = "<shacl>") -> List[Constraint]:
    out: List[Constraint] = []
    for line_no, body in _lines(text):
        cur = _Cursor(body, line_no, source)
        head = _shape_name(cur)
        if head.startswith(RESERVED_PREFIX):
            raise cur.error(
                f"shape names starting with {RESERVED_PREFIX!r} are reserved"
            )
        cur.eat("<-")
        expr = _body_alt(cur)
        cur.expect_done()
        out.append(Constraint(head, expr))
    return out


def serialize_constraints(constraints: Iterable[Constraint]) -> str:
    return "".join(str(c) + "\n" for c in constraints)


# ---------------------------------------------------------------------------
# .targets


def parse_targets(text: str, source: str = "<targets>") -> List[Tuple[str, str]]:
    out: List[Tuple[str, str]] = []
    for line_no, body in _lines(text):
        cur = _Cursor(body, line_no, source)
        shape = _shape_name(cur)
        cur.eat("(")
        cur.eat("@")
        ind = cur.ident("an individual")
        cur.eat(")")
        cur.expect_done()
        out.append((shape, ind))
    return out


def serialize_targets(targets: Iterable[Tuple[str, str]]) -> str:
    return "".join(f"${s}(@{a})\n" for s, a in targets)


# ---------------------------------------------------------------------------
# interpretation dumps


def node_label(n: Node, numbering: Dict[Node, str]) -> str:
    if isinstance(n, Individual):
        return n.name
    return numbering[n]


def _number_anonymous(interp: Interpretation) -> Dict[Node, str]:
    """Stable `_:base.k1.k2` labels: k is the child's 1-based rank among
    siblings that share the same prefix, ordered by letter."""
    anons = [n for n in interp.nodes if isinstance(n, Anon)]
    labels: Dict[Node, str] = {}
    by_prefix: Dict[Tuple[str, Tuple], List] = {}
    for n in anons:
        for d in range(1, n.depth + 1):
            key = (n.base, n.path[: d - 1])
            by_prefix.setdefault(key, [])
            letter = n.path[d - 1]
            if letter not in by_prefix[key]:
                by_prefix[key].append(letter)
    for key in by_prefix:
        by_prefix[key].sort(key=type_key)
    for n in anons:
        parts = []
        for d in range(1, n.depth + 1):
            sibs = by_prefix[(n.base, n.path[: d - 1])]
            parts.append(str(sibs.index(n.path[d - 1]) + 1))
        labels[n] = "_:" + n.base + "." + ".".join(parts)
    out: Dict[Node, str] = dict(labels)
    rest = sorted(
        (n for n in interp.nodes if not isinstance(n, (Individual, Anon))),
        key=node_key,
    )
    for k, n in enumerate(rest, start=1):
        out[n] = f"_:n{k}"
    return out


def serialize_interpretation(interp: Interpretation) -> str:
    numbering = _number_anonymous(interp)
    atoms: List[str] = []
    for c, n in interp.concepts:
        atoms.append(f"{c}({node_label(n, numbering)})")
    for r, x, y in interp.edges:
        atoms.append(f"{r}({node_label(x, numbering)},{node_label(y, numbering)})")
    lonely = [
        n
        for n in interp.nodes
        if not any(n in (x, y) for _, x, y in interp.edges)
        and not any(n == x for _, x in interp.concepts)
    ]
    for n in sorted(lonely, key=node_key):
        atoms.append(f"top({node_label(n, numbering)})")
    return "".join(s + "\n" for s in sorted(atoms))


# ---------------------------------------------------------------------------
# JSON report


def report_to_json(
    consistent: bool,
    mode: str,
    targets: Sequence[Tuple[str, str, bool]],
    stats: Dict[str, int],
) -> str:
    doc = {
        "consistent": consistent,
        "mode": mode,
        "targets": [
            {"shape": s, "node": n, "valid": v} for s, n, v in targets
        ],
        "stats": {k: stats[k] for k in sorted(stats)},
    }
    return json.dumps(doc, indent=2) + "\n"
