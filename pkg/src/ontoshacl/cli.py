"""Command-line frontend.

Subcommands: ``validate`` runs one of five validation pipelines over a
knowledge base and a shapes graph, ``build-model`` materializes a finite
approximation of the canonical model, ``chase`` dumps the rounds of the
core chase, and ``selftest`` cross-checks the pipelines against each
other on random inputs.

Exit codes: 0 all targets valid, 1 violations, 2 inconsistent KB,
3 input error, 4 constraints not stratified, 5 depth or round budget hit
where a verdict would need the missing part.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .chase import NotTerminated, SizeGuardExceeded, run_core_chase
from .core import ABox, Individual, Interpretation, Role, TBox
from .evaluate import (
    BinConstraint,
    TruncationRefused,
    perfect_assignment_b,
    validate,
)
from .formats import (
    ParseError,
    parse_abox,
    parse_constraints,
    parse_targets,
    parse_tbox,
    report_to_json,
    serialize_interpretation,
)
from .model import InconsistentKB, build_can, complete_abox
from .paths import RAlt, RSeq, RStar, RSym, Regex
from .rewrite import pure_rewrite_alchi, pure_rewrite_shaclb, rewrite
from .shapes import (
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
    NotStratified,
    Or,
    ShapeBody,
    ShapeRef,
    ShapesGraph,
    UnguardedComparison,
    compute_stratification,
    normalize,
)
from .tbox import SaturatedTBox, UnsupportedPattern, collapse_role_cycles

EXIT_VALID = 0
EXIT_VIOLATIONS = 1
EXIT_INCONSISTENT = 2
EXIT_INPUT = 3
EXIT_NOT_STRATIFIED = 4
EXIT_DEPTH = 5

MODES = ("direct", "rewrite", "pure-alchi", "pure-shaclb", "chase")


@dataclass
class RunConfig:
    tbox: str
    abox: str
    shapes: Optional[str] = None
    targets: Optional[str] = None
    mode: str = "direct"
    depth: int = 32
    fmt: str = "text"
    seed: int = 0
    cases: int = 100
    emit: bool = False
    show_rewrite: bool = False
    inject_bug: bool = False


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# role renaming after cycle collapse


def _fix_role(r: Role, renaming: Dict[str, Role]) -> Role:
    rep = renaming.get(r.name)
    if rep is None:
        return r
    return rep.invert() if r.inverted else rep


def rename_regex(e: Regex, renaming: Dict[str, Role]) -> Regex:
    if isinstance(e, RSym):
        return RSym(_fix_role(e.role, renaming))
    if isinstance(e, RSeq):
        return RSeq(tuple(rename_regex(p, renaming) for p in e.parts))
    if isinstance(e, RAlt):
        return RAlt(tuple(rename_regex(p, renaming) for p in e.options))
    return RStar(rename_regex(e.inner, renaming))


def rename_body(b: ShapeBody, renaming: Dict[str, Role]) -> ShapeBody:
    if isinstance(b, (IndividualRef, ShapeRef, NegShapeRef, ConceptRef)):
        return b
    if isinstance(b, And):
        return And(rename_body(b.left, renaming), rename_body(b.right, renaming))
    if isinstance(b, Or):
        return Or(rename_body(b.left, renaming), rename_body(b.right, renaming))
    if isinstance(b, Not):
        return Not(rename_body(b.body, renaming))
    if isinstance(b, ExistsRoles):
        roles = frozenset(_fix_role(r, renaming) for r in b.roles)
        return ExistsRoles(roles, rename_body(b.body, renaming))
    if isinstance(b, ExistsPath):
        return ExistsPath(rename_regex(b.path, renaming), rename_body(b.body, renaming))
    if isinstance(b, (GuardedEq, GuardedDisj)):
        return type(b)(
            b.guard,
            rename_regex(b.left, renaming),
            rename_regex(b.right, renaming),
        )
    raise TypeError(f"unknown body {b!r}")


def rename_abox(abox: ABox, renaming: Dict[str, Role]) -> ABox:
    if not renaming:
        return abox
    roles = [
        (renaming.get(r, Role(r)), a, b) for r, a, b in abox.role_atoms
    ]
    return ABox.of(abox.concept_atoms, roles)


def rename_constraints(
    cons: Sequence[Constraint], renaming: Dict[str, Role]
) -> Tuple[Constraint, ...]:
    if not renaming:
        return tuple(cons)
    return tuple(Constraint(c.head, rename_body(c.body, renaming)) for c in cons)


# ---------------------------------------------------------------------------
# input loading


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}")


def load_kb(cfg: RunConfig) -> Tuple[TBox, ABox, Dict[str, Role]]:
    """Parse TBox and ABox and collapse role-inclusion cycles."""
    try:
        tbox0 = parse_tbox(_read(cfg.tbox), source=cfg.tbox)
        abox0 = parse_abox(_read(cfg.abox), source=cfg.abox)
        tbox, renaming = collapse_role_cycles(tbox0)
    except (ParseError, UnsupportedPattern) as exc:
        raise InputError(str(exc))
    return tbox, rename_abox(abox0, renaming), renaming


def load_shapes(cfg: RunConfig, renaming: Dict[str, Role]) -> ShapesGraph:
    if cfg.shapes is None:
        raise InputError("validate needs --shapes")
    try:
        cons = parse_constraints(_read(cfg.shapes), source=cfg.shapes)
        targets = (
            parse_targets(_read(cfg.targets), source=cfg.targets)
            if cfg.targets
            else []
        )
    except ParseError as exc:
        raise InputError(str(exc))
    return ShapesGraph.of(rename_constraints(cons, renaming), targets)


# ---------------------------------------------------------------------------
# validation pipelines


def _validate_b(
    interp: Interpretation,
    items: Sequence[Union[Constraint, BinConstraint]],
    targets: Sequence[Tuple[str, str]],
) -> List[Tuple[str, str, bool]]:
    asg = perfect_assignment_b(interp, items)
    out = []
    for shape, ind in targets:
        node = Individual(ind)
        out.append((shape, ind, node in interp.nodes and (shape, node) in asg.unary))
    return out


def _emit_report(
    cfg: RunConfig,
    consistent: bool,
    triples: Sequence[Tuple[str, str, bool]],
    stats: Dict[str, int],
) -> None:
    if cfg.fmt == "json":
        sys.stdout.write(report_to_json(consistent, cfg.mode, triples, stats))
        return
    lines = [f"consistent: {'true' if consistent else 'false'}", f"mode: {cfg.mode}"]
    for shape, ind, ok in triples:
        lines.append(f"${shape}(@{ind}): {'VALID' if ok else 'VIOLATION'}")
    pairs = " ".join(f"{k}={stats[k]}" for k in sorted(stats))
    lines.append(f"stats: {pairs}")
    sys.stdout.write("\n".join(lines) + "\n")


def run(cfg: RunConfig) -> int:
    """The validate pipeline; returns the process exit code."""
    try:
        tbox, abox, renaming = load_kb(cfg)
        sg = load_shapes(cfg, renaming)
        if cfg.mode == "pure-alchi" and tbox.atmost:
            raise InputError(
                "mode pure-alchi cannot handle max1 axioms; use pure-shaclb"
            )
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    sat = SaturatedTBox(tbox)
    stats = {"quadruples": 0, "model_nodes": 0, "rounds": 0}
    try:
        completed = complete_abox(tbox, abox, sat)
    except InconsistentKB as exc:
        print(f"inconsistent: {exc}", file=sys.stderr)
        _emit_report(cfg, False, [], stats)
        return EXIT_INCONSISTENT

    try:
        compute_stratification(sg.constraints)
    except NotStratified as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_STRATIFIED

    try:
        if cfg.mode == "direct":
            interp = build_can(tbox, abox, depth=cfg.depth, sat=sat)
            res = validate(interp, sg)
            triples = [(r.shape, r.node, r.valid) for r in res.targets]
        elif cfg.mode == "chase":
            trace: List[Tuple[Interpretation, Interpretation]] = []
            interp = run_core_chase(sat, abox, max_rounds=cfg.depth, trace=trace)
            stats["rounds"] = len(trace)
            res = validate(interp, sg)
            triples = [(r.shape, r.node, r.valid) for r in res.targets]
        else:
            nsg, _ = normalize(sg)
            nstrat = compute_stratification(nsg.constraints)
            c_t = rewrite(sat, nstrat, stats=stats)
            if cfg.mode == "rewrite":
                items: Sequence[Union[Constraint, BinConstraint]] = c_t
                interp = Interpretation.from_abox(completed, complete=True)
                res = validate(interp, ShapesGraph.of(c_t, sg.targets))
                triples = [(r.shape, r.node, r.valid) for r in res.targets]
            elif cfg.mode == "pure-alchi":
                items = pure_rewrite_alchi(sat, c_t)
                interp = Interpretation.from_abox(abox, complete=True)
                res = validate(interp, ShapesGraph.of(items, sg.targets))
                triples = [(r.shape, r.node, r.valid) for r in res.targets]
            else:
                items = pure_rewrite_shaclb(sat, c_t)
                interp = Interpretation.from_abox(abox, complete=True)
                triples = _validate_b(interp, items, sg.targets)
            if cfg.show_rewrite:
                for it in items:
                    print(it)
    except (UnguardedComparison, UnsupportedPattern) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TruncationRefused as exc:
        print(f"error: {exc} (raise --depth)", file=sys.stderr)
        return EXIT_DEPTH
    except NotTerminated as exc:
        print(f"error: {exc} (raise --depth)", file=sys.stderr)
        return EXIT_DEPTH

    stats["model_nodes"] = len(interp.nodes)
    _emit_report(cfg, True, triples, stats)
    return EXIT_VALID if all(ok for _, _, ok in triples) else EXIT_VIOLATIONS


def cmd_build_model(cfg: RunConfig) -> int:
    try:
        tbox, abox, _ = load_kb(cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    sat = SaturatedTBox(tbox)
    try:
        interp = build_can(tbox, abox, depth=cfg.depth, sat=sat)
    except InconsistentKB as exc:
        print(f"inconsistent: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    if cfg.emit:
        sys.stdout.write(serialize_interpretation(interp))
    else:
        named = sum(1 for n in interp.nodes if isinstance(n, Individual))
        print(
            f"nodes={len(interp.nodes)} named={named} edges={len(interp.edges)} "
            f"complete={'true' if interp.complete else 'false'} depth={cfg.depth}"
        )
    return EXIT_VALID


def cmd_chase(cfg: RunConfig) -> int:
    try:
        tbox, abox, _ = load_kb(cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    sat = SaturatedTBox(tbox)
    try:
        complete_abox(tbox, abox, sat)
    except InconsistentKB as exc:
        print(f"inconsistent: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT

    trace: List[Tuple[Interpretation, Interpretation]] = []
    try:
        final = run_core_chase(sat, abox, max_rounds=cfg.depth, trace=trace)
    except NotTerminated as exc:
        for k, (fired, cored) in enumerate(trace, start=1):
            print(f"# round {k}: fired ({len(fired.nodes)} nodes)")
            sys.stdout.write(serialize_interpretation(fired))
            print(f"# round {k}: cored ({len(cored.nodes)} nodes)")
            sys.stdout.write(serialize_interpretation(cored))
        print(f"# {exc}")
        return EXIT_DEPTH
    except SizeGuardExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEPTH

    for k, (fired, cored) in enumerate(trace, start=1):
        print(f"# round {k}: fired ({len(fired.nodes)} nodes)")
        sys.stdout.write(serialize_interpretation(fired))
        print(f"# round {k}: cored ({len(cored.nodes)} nodes)")
        sys.stdout.write(serialize_interpretation(cored))
    print(f"# fixpoint after {len(trace)} rounds")
    sys.stdout.write(serialize_interpretation(final))
    return EXIT_VALID


def cmd_selftest(cfg: RunConfig) -> int:
    from .harness import run_selftest

    report = run_selftest(cfg.seed, cfg.cases, inject_bug=cfg.inject_bug)
    sys.stdout.write(report.render())
    return EXIT_VALID if report.passed else EXIT_VIOLATIONS


# ---------------------------------------------------------------------------
# argument parsing


def _add_kb_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tbox", required=True, help="axiom file (.tbox)")
    p.add_argument("--abox", required=True, help="assertion file (.abox)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ontoshacl")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="validate targets against shapes")
    _add_kb_args(v)
    v.add_argument("--shapes", required=True, help="constraint file (.shacl)")
    v.add_argument("--targets", help="target file (.targets)")
    v.add_argument("--mode", choices=MODES, default="direct")
    v.add_argument(
        "--depth",
        type=int,
        default=32,
        help="tree depth (direct) or round budget (chase)",
    )
    v.add_argument("--format", dest="fmt", choices=("text", "json"), default="text")
    v.add_argument(
        "--show-rewrite",
        action="store_true",
        help="print the rewritten constraints before the report",
    )

    b = sub.add_parser("build-model", help="materialize a canonical-model prefix")
    _add_kb_args(b)
    b.add_argument("--depth", type=int, default=32)
    b.add_argument("--emit", action="store_true", help="dump atoms instead of a summary")

    c = sub.add_parser("chase", help="dump core-chase rounds")
    _add_kb_args(c)
    c.add_argument("--depth", type=int, default=10, help="round budget")

    s = sub.add_parser("selftest", help="randomized cross-checks of the pipelines")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--cases", type=int, default=100)
    s.add_argument(
        "--inject-bug",
        action="store_true",
        help="flip a known rule to prove the harness can catch it",
    )
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        tbox=getattr(args, "tbox", ""),
        abox=getattr(args, "abox", ""),
        shapes=getattr(args, "shapes", None),
        targets=getattr(args, "targets", None),
        mode=getattr(args, "mode", "direct"),
        depth=getattr(args, "depth", 32),
        fmt=getattr(args, "fmt", "text"),
        seed=getattr(args, "seed", 0),
        cases=getattr(args, "cases", 100),
        emit=getattr(args, "emit", False),
        show_rewrite=getattr(args, "show_rewrite", False),
        inject_bug=getattr(args, "inject_bug", False),
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = config_from_args(args)
    if cfg.depth < 0:
        print("error: --depth must be non-negative", file=sys.stderr)
        return EXIT_INPUT
    if args.command == "validate":
        return run(cfg)
    if args.command == "build-model":
        return cmd_build_model(cfg)
    if args.command == "chase":
        return cmd_chase(cfg)
    return cmd_selftest(cfg)


if __name__ == "__main__":
    sys.exit(main())
