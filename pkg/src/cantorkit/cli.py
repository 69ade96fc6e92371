"""Command line front end: ``cantorkit`` for generic schedules, ``littlewood`` for the witnesses.

Exit codes:

====  ==============================================================
0     success
1     file could not be read or written
2     usage or input parse error
3     a removal exceeded its budget
4     an empty level (construction, extraction or measure)
5     frames do not match (roots, branching, level lengths)
6     a comparison or floor could not be decided at the precision cap
7     the Littlewood sieve failed (no survivor, budget, node cap)
8     verification found violations
====  ==============================================================
"""

from __future__ import annotations

import argparse
import random
import sys
from fractions import Fraction

from . import files
from .cantor_core import (
    BudgetExceeded,
    CantorSchedule,
    LevelMismatch,
    MismatchedFrame,
    build,
    greedy_adversary,
    intersect_builds,
    intersect_schedules,
    middle_rule,
    no_removal,
    offset_rule,
    random_rule,
)
from .certify import certify_nonempty, check_condition13
from .local_extract import (
    EmptyExtraction,
    EmptyLevel,
    build_measure,
    check_conditions,
    dyadic_intervals,
    extract_local,
    random_intervals,
    validate_local,
    verify_mdp_bound,
)
from .rigor import ClosedInterval, UndecidableComparison, UndecidableFloor, parse_rational

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_BUDGET, EXIT_EMPTY, EXIT_FRAME, EXIT_UNDECIDABLE, EXIT_SIEVE, EXIT_VIOLATION = range(9)


class UsageError(ValueError):
    pass


def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not an exact rational: {text!r}") from None


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return value


def _nonnegative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative: {text}")
    return value


def _say(msg: str):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# generic schedules


def _script_rule(path: str):
    doc = files.read_json(path)
    plan: dict[int, list[tuple[int, int]]] = {}
    try:
        for item in doc["removals"]:
            plan.setdefault(int(item["n"]), []).append((int(item["index"]), int(item.get("m", item["n"]))))
    except (KeyError, TypeError, ValueError) as exc:
        raise files.InputError(path, "removals", str(exc)) from None

    def rule(n, candidates, history, schedule):
        where = {idx: pos for pos, idx in enumerate(candidates.indices)}
        for idx, m in plan.get(n, []):
            if idx in where:
                yield where[idx], m

    return rule


def make_rule(spec: str, seed: int):
    """``none``, ``middle``/``middle-K``, ``offsets:0,2``, ``greedy-ORDER``, ``random`` or ``script:FILE``."""
    if spec == "none":
        return no_removal
    if spec == "middle":
        return middle_rule(1)
    if spec.startswith("middle-"):
        return middle_rule(int(spec.split("-", 1)[1]))
    if spec.startswith("offsets:"):
        return offset_rule(int(x) for x in spec.split(":", 1)[1].split(","))
    if spec.startswith("greedy-"):
        order = spec.split("-", 1)[1]
        if order not in ("left", "right", "random", "cluster"):
            raise UsageError(f"unknown greedy order {order!r}")
        return greedy_adversary(order, random.Random(seed))
    if spec == "random":
        return random_rule(random.Random(seed))
    if spec.startswith("script:"):
        return _script_rule(spec.split(":", 1)[1])
    raise UsageError(f"unknown removal rule {spec!r}")


def cmd_build(args) -> int:
    if args.rule == "littlewood":
        return _build_littlewood(args)
    if not args.schedule:
        raise UsageError("build needs --schedule (or --rule littlewood with --instance)")
    schedule = files.read_schedule(args.schedule)
    if schedule.horizon is not None and args.depth > schedule.horizon:
        raise UsageError(f"depth {args.depth} exceeds the schedule's {schedule.horizon} levels")
    b = build(schedule, make_rule(args.rule, args.seed), args.depth)
    files.write_json(files.build_document(b), args.out)
    _say(f"built {args.depth} levels; counts {b.counts()}")
    if b.empty_at is not None:
        _say(f"level {b.empty_at} is empty")
        return EXIT_EMPTY
    return EXIT_OK


def _build_littlewood(args) -> int:
    from .littlewood.instance import InstanceParams
    from .littlewood.sieve import build_full

    if not args.instance:
        raise UsageError("--rule littlewood needs --instance")
    obj = files.read_json(args.instance)
    params = files._field(args.instance, "instance", InstanceParams.from_json, obj.get("params", obj))
    levels, ledgers = build_full(params, args.depth, node_cap=args.node_cap, uncertified=args.uncertified)
    files.write_json({
        "kind": "littlewood-levels",
        "params": params.to_json(),
        "counts": [len(level) for level in levels],
        "levels": [level.to_json() for level in levels],
        "ledgers": [lg.to_json() for lg in ledgers],
    }, args.out)
    _say(f"built {len(levels) - 1} levels; counts {[len(level) for level in levels]}")
    return EXIT_OK if levels[-1].indices else EXIT_EMPTY


def _schedule_for_certify(args):
    if args.instance:
        from .littlewood.instance import InstanceParams, littlewood_schedule

        obj = files.read_json(args.instance)
        params = files._field(args.instance, "instance", InstanceParams.from_json, obj.get("params", obj))
        return littlewood_schedule(params)
    if args.schedule:
        return files.read_schedule(args.schedule)
    raise UsageError("certify needs --schedule or --instance")


def cmd_certify(args) -> int:
    schedule = _schedule_for_certify(args)
    depth = args.depth
    if depth is None:
        if schedule.horizon is None:
            raise UsageError("an unbounded schedule needs --depth")
        depth = schedule.horizon
    nonempty = certify_nonempty(schedule, depth)
    dimension = check_condition13(schedule, depth)
    doc = {"kind": "certificates", "nonempty": nonempty.to_json(), "dimension": dimension.to_json()}
    if args.out:
        files.write_json(doc, args.out)
    if args.report:
        print(nonempty.report())
        print(dimension.report())
    elif not args.out:
        files.write_json(doc, None)
    return EXIT_OK


def cmd_extract(args) -> int:
    schedule, levels, _ = files.read_levels(args.levels)
    local, table = extract_local(levels, schedule)
    violations = check_conditions(table, levels, schedule)
    doc = {
        "kind": "extraction",
        "schedule": schedule.to_json(),
        "table": table.to_json(),
        "levels": [level.to_json() for level in local],
        "counts": [len(level) for level in local],
        "condition_violations": violations,
        "valid_local": validate_local(local, schedule),
    }
    files.write_json(doc, args.out)
    _say(f"extracted counts {doc['counts']}; {len(violations)} condition violations")
    return EXIT_OK if not violations else EXIT_VIOLATION


def cmd_measure(args) -> int:
    schedule, levels, _ = files.read_levels(args.levels)
    if not args.no_extract:
        levels, _ = extract_local(levels, schedule)
    measure = build_measure(levels)
    finest = levels[-1]
    family = list(dyadic_intervals(schedule.root, finest.length))
    for level in levels:
        family.extend(level.intervals)
    report = verify_mdp_bound(measure, schedule, args.s, args.n0, family)
    doc = {"kind": "measure", "measure": measure.to_json(), "additive": measure.check_additivity(),
           "mdp": report.to_json()}
    if args.random:
        rng = random.Random(args.seed)
        delta = schedule.root.length / schedule.R(0)
        extra = random_intervals(schedule.root, args.random, rng, finest.length, delta)
        doc["mdp_random"] = verify_mdp_bound(measure, schedule, args.s, args.n0, extra).to_json()
    files.write_json(doc, args.out)
    _say(f"mass bound {'holds' if report.passed else 'FAILS'} on {report.checked} intervals; "
         f"max ratio {report.max_ratio:.6g}")
    return EXIT_OK if report.passed else EXIT_VIOLATION


def cmd_intersect(args) -> int:
    if args.levels:
        loaded = [files.read_levels(p) for p in args.levels]
        schedule = intersect_schedules([s for s, _, _ in loaded])
        levels = intersect_builds(*[lv for _, lv, _ in loaded])
        files.write_json(files.levels_document(schedule, levels), args.out)
        _say(f"intersection counts {[len(level) for level in levels]}")
        return EXIT_OK
    if not args.schedule or len(args.schedule) < 2:
        raise UsageError("intersect needs at least two --schedule (or --levels) files")
    schedules = [files.read_schedule(p) for p in args.schedule]
    joint = intersect_schedules(schedules)
    files.write_json(joint.to_json(), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Littlewood witnesses


def _instances(args):
    from .littlewood.dsequence import DSequence
    from .littlewood.instance import VARIANTS, InstanceParams

    root = None
    if args.root_left is not None:
        root = ClosedInterval(args.root_left, args.root_left + args.c1)
    out = []
    for text in args.d:
        try:
            D = DSequence.parse(text)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        out.append(InstanceParams(args.R, args.c1, args.c, VARIANTS[args.variant], D, root))
    return out


def cmd_witness(args) -> int:
    from .littlewood.sieve import joint_witness

    params = _instances(args)
    certs = joint_witness(params, args.depth, uncertified=args.uncertified)
    if len(certs) == 1:
        doc = certs[0].to_json()
    else:
        doc = {"kind": "littlewood-joint", "certificates": [c.to_json() for c in certs]}
    files.write_json(doc, args.out)
    for step in certs[0].steps:
        _say(f"step {step.n}: candidates {step.candidates}, removed {step.combined_kills}, "
             f"budgets {[round(b, 3) for b in step.budgets]}")
    tag = "certified" if certs[0].certified else "uncertified"
    _say(f"{tag} chain to depth {args.depth}; heights below {certs[0].height_bound} excluded")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .littlewood.sieve import WitnessCertificate
    from .littlewood.verify import sieve_soundness, verify_witness

    obj = files.read_json(args.cert)
    docs = obj["certificates"] if obj.get("kind") == "littlewood-joint" else [obj]
    reports = []
    ok = True
    for i, d in enumerate(docs):
        cert = files._field(args.cert, f"certificates[{i}]", WitnessCertificate.from_json, d)
        rep = verify_witness(cert, args.qmax)
        entry = {"D": cert.params.D.describe(), "witness": rep.to_json()}
        ok &= rep.passed
        print(f"[{cert.params.D.describe()}] {rep.report()}")
        if args.soundness:
            sound = sieve_soundness(cert)
            entry["soundness"] = sound.to_json()
            ok &= sound.passed
            print(f"[{cert.params.D.describe()}] soundness: {'pass' if sound.passed else 'fail'} "
                  f"({sound.checked} denominators, {len(sound.inner_hits)} inner hits)")
        reports.append(entry)
    if args.out:
        files.write_json({"kind": "verification", "verdict": "pass" if ok else "fail", "reports": reports},
                         args.out)
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_validate(args) -> int:
    from .littlewood.instance import VARIANTS, validate_params

    cert = validate_params(args.R, args.c1, args.c, VARIANTS[args.variant])
    print(cert.report())
    if args.out:
        files.write_json(cert.to_json(), args.out)
    return EXIT_OK if cert.passed else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# parsers


def _add_littlewood(sub):
    w = sub.add_parser("witness", help="build a witness chain for one or more D sequences")
    w.add_argument("--d", action="append", required=True,
                   help="D sequence: const:2, list:[2,3], list:[2,3]:last or doubling (repeat for a joint witness)")
    w.add_argument("--variant", choices=("prop1", "prop2"), default="prop1")
    w.add_argument("--R", type=_positive_int, required=True)
    w.add_argument("--c1", type=_rational, required=True)
    w.add_argument("--c", type=_rational, required=True)
    w.add_argument("--root-left", type=_rational, default=None)
    w.add_argument("--depth", type=_nonnegative_int, required=True)
    w.add_argument("--uncertified", action="store_true", help="allow constants that fail validation")
    w.add_argument("--out", default="-")
    w.set_defaults(func=cmd_witness)

    v = sub.add_parser("verify", help="independently check a witness certificate")
    v.add_argument("--cert", required=True)
    v.add_argument("--qmax", type=_positive_int, required=True)
    v.add_argument("--soundness", action="store_true", help="also enumerate every q below the height bound")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("validate", help="check the constants R, c1, c")
    c.add_argument("--R", type=_positive_int, required=True)
    c.add_argument("--c1", type=_rational, required=True)
    c.add_argument("--c", type=_rational, required=True)
    c.add_argument("--variant", choices=("prop1", "prop2"), default="prop1")
    c.add_argument("--out")
    c.set_defaults(func=cmd_validate)


def make_parser(prog: str = "cantorkit") -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=prog, description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    if prog == "littlewood":
        _add_littlewood(sub)
        return parser

    b = sub.add_parser("build", help="build levels from a schedule and a removal rule")
    b.add_argument("--schedule")
    b.add_argument("--rule", default="none",
                   help="none, middle, middle-K, offsets:0,2, greedy-left|right|random|cluster, random, "
                        "script:FILE or littlewood")
    b.add_argument("--instance", help="Littlewood parameters (JSON) for --rule littlewood")
    b.add_argument("--depth", type=_nonnegative_int, required=True)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--node-cap", type=_positive_int, default=10 ** 7)
    b.add_argument("--uncertified", action="store_true")
    b.add_argument("--out", default="-")
    b.set_defaults(func=cmd_build)

    c = sub.add_parser("certify", help="non-emptiness and dimension certificates")
    c.add_argument("--schedule")
    c.add_argument("--instance", help="certify the schedule of a Littlewood instance")
    c.add_argument("--depth", type=_nonnegative_int)
    c.add_argument("--report", action="store_true", help="print human-readable tables")
    c.add_argument("--out")
    c.set_defaults(func=cmd_certify)

    e = sub.add_parser("extract", help="local sub-family of a built level file")
    e.add_argument("--levels", required=True)
    e.add_argument("--out", default="-")
    e.set_defaults(func=cmd_extract)

    m = sub.add_parser("measure", help="uniform measure and the mass bound mu(B) <= a|B|^s")
    m.add_argument("--levels", required=True)
    m.add_argument("--s", type=_rational, required=True)
    m.add_argument("--n0", type=_nonnegative_int, default=0)
    m.add_argument("--no-extract", action="store_true", help="use the levels as given")
    m.add_argument("--random", type=_nonnegative_int, default=0, help="extra random intervals (reported only)")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", default="-")
    m.set_defaults(func=cmd_measure)

    i = sub.add_parser("intersect", help="summed-budget schedule or level-wise intersection")
    i.add_argument("--schedule", action="append")
    i.add_argument("--levels", action="append")
    i.add_argument("--out", default="-")
    i.set_defaults(func=cmd_intersect)

    _add_littlewood(sub)
    return parser


def main(argv=None, prog: str = "cantorkit") -> int:
    from .littlewood.sieve import BudgetViolation, InvalidParams, NodeCapExceeded, NoSurvivor

    parser = make_parser(prog)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except files.InputError as exc:
        _say(f"error: {exc}")
        return EXIT_USAGE
    except (UsageError, InvalidParams) as exc:
        _say(f"error: {exc}")
        return EXIT_USAGE
    except OSError as exc:
        _say(f"error: {exc}")
        return EXIT_IO
    except BudgetExceeded as exc:
        _say(f"budget exceeded: {exc}")
        return EXIT_BUDGET
    except (EmptyLevel, EmptyExtraction) as exc:
        _say(f"empty: {exc}")
        return EXIT_EMPTY
    except (MismatchedFrame, LevelMismatch) as exc:
        _say(f"frame mismatch: {exc}")
        return EXIT_FRAME
    except (UndecidableComparison, UndecidableFloor) as exc:
        _say(f"undecidable: {exc}")
        return EXIT_UNDECIDABLE
    except (NoSurvivor, BudgetViolation, NodeCapExceeded) as exc:
        _say(f"sieve failure: {exc}")
        return EXIT_SIEVE
    except (ValueError, KeyError) as exc:
        _say(f"error: {exc}")
        return EXIT_USAGE


def littlewood_main(argv=None) -> int:
    return main(argv, prog="littlewood")


def entry() -> None:
    sys.exit(main())


def littlewood_entry() -> None:
    sys.exit(littlewood_main())


if __name__ == "__main__":
    entry()
