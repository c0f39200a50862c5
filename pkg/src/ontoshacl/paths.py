"""Role-path regular expressions and their automata.

Surface syntax: role names, ``^r`` for the inverse of r, ``/`` for
concatenation, ``|`` for union, ``*`` for iteration, parentheses.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, List, Sequence, Set, Tuple, Union

from .core import Role


class RegexError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at offset {pos})")
        self.pos = pos


@dataclass(frozen=True)
class RSym:
    role: Role


@dataclass(frozen=True)
class RSeq:
    parts: Tuple["Regex", ...]


@dataclass(frozen=True)
class RAlt:
    options: Tuple["Regex", ...]


@dataclass(frozen=True)
class RStar:
    inner: "Regex"


Regex = Union[RSym, RSeq, RAlt, RStar]


def regex_str(e: Regex) -> str:
    if isinstance(e, RSym):
        return str(e.role)
    if isinstance(e, RSeq):
        return "/".join(_wrap(p, top=False) for p in e.parts)
    if isinstance(e, RAlt):
        return "|".join(regex_str(o) for o in e.options)
    return _wrap(e.inner, top=False) + "*"


def _wrap(e: Regex, top: bool) -> str:
    s = regex_str(e)
    if isinstance(e, (RAlt, RSeq)) and not top:
        return "(" + s + ")"
    return s


# ---------------------------------------------------------------------------
# parsing


def parse_regex(text: str) -> Regex:
    toks = _tokenize(text)
    expr, i = _parse_alt(toks, 0)
    if i != len(toks):
        raise RegexError(f"unexpected {toks[i][0]!r}", toks[i][1])
    return expr


def _tokenize(text: str) -> List[Tuple[str, int]]:
    out: List[Tuple[str, int]] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "|/*()^":
            out.append((ch, i))
            i += 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            out.append((text[i:j], i))
            i = j
            continue
        raise RegexError(f"bad character {ch!r}", i)
    if not out:
        raise RegexError("empty path expression", 0)
    return out


def _parse_alt(toks, i) -> Tuple[Regex, int]:
    opts = []
    expr, i = _parse_seq(toks, i)
    opts.append(expr)
    while i < len(toks) and toks[i][0] == "|":
        expr, i = _parse_seq(toks, i + 1)
        opts.append(expr)
    return (opts[0] if len(opts) == 1 else RAlt(tuple(opts))), i


def _parse_seq(toks, i) -> Tuple[Regex, int]:
    parts = []
    expr, i = _parse_atom(toks, i)
    parts.append(expr)
    while i < len(toks) and toks[i][0] == "/":
        expr, i = _parse_atom(toks, i + 1)
        parts.append(expr)
    return (parts[0] if len(parts) == 1 else RSeq(tuple(parts))), i


def _parse_atom(toks, i) -> Tuple[Regex, int]:
    if i >= len(toks):
        raise RegexError("unexpected end of path expression", toks[-1][1] + 1)
    tok, pos = toks[i]
    if tok == "(":
        expr, i = _parse_alt(toks, i + 1)
        if i >= len(toks) or toks[i][0] != ")":
            raise RegexError("missing ')'", pos)
        i += 1
    elif tok == "^":
        if i + 1 >= len(toks) or not toks[i + 1][0][0].isalpha():
            raise RegexError("'^' must be followed by a role name", pos)
        expr = RSym(Role(toks[i + 1][0], True))
        i += 2
    elif tok[0].isalpha() or tok[0] == "_":
        expr = RSym(Role(tok))
        i += 1
    else:
        raise RegexError(f"unexpected {tok!r}", pos)
    while i < len(toks) and toks[i][0] == "*":
        expr = RStar(expr)
        i += 1
    return expr, i


# ---------------------------------------------------------------------------
# automata


@dataclass(frozen=True)
class NFA:
    """Nondeterministic automaton over roles, single initial and final state."""

    n_states: int
    initial: int
    final: int
    transitions: Tuple[Tuple[int, Role, int], ...]
    eps: Tuple[Tuple[int, int], ...]

    def alphabet(self) -> FrozenSet[Role]:
        return frozenset(r for _, r, _ in self.transitions)

    def eps_closure(self, states: Set[int]) -> FrozenSet[int]:
        out = set(states)
        work = list(states)
        while work:
            q = work.pop()
            for a, b in self.eps:
                if a == q and b not in out:
                    out.add(b)
                    work.append(b)
        return frozenset(out)

    def accepts(self, word: Sequence[Role]) -> bool:
        current = self.eps_closure({self.initial})
        for letter in word:
            nxt = {b for a, r, b in self.transitions if a in current and r == letter}
            current = self.eps_closure(nxt)
            if not current:
                return False
        return self.final in current


def regex_to_nfa(e: Regex) -> NFA:
    transitions: List[Tuple[int, Role, int]] = []
    eps: List[Tuple[int, int]] = []
    counter = [0]

    def fresh() -> int:
        counter[0] += 1
        return counter[0] - 1

    def build(x: Regex) -> Tuple[int, int]:
        if isinstance(x, RSym):
            i, f = fresh(), fresh()
            transitions.append((i, x.role, f))
            return i, f
        if isinstance(x, RSeq):
            first_i, prev_f = build(x.parts[0])
            for part in x.parts[1:]:
                i, f = build(part)
                eps.append((prev_f, i))
                prev_f = f
            return first_i, prev_f
        if isinstance(x, RAlt):
            i, f = fresh(), fresh()
            for opt in x.options:
                oi, of = build(opt)
                eps.append((i, oi))
                eps.append((of, f))
            return i, f
        i, f = fresh(), fresh()
        ii, ff = build(x.inner)
        eps.append((i, f))
        eps.append((i, ii))
        eps.append((ff, f))
        eps.append((ff, ii))
        return i, f

    init, final = build(e)
    return NFA(counter[0], init, final, tuple(transitions), tuple(eps))
