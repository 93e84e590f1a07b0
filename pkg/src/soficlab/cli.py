"""soficlab command line: verify, census, profile, construct, survey, replay."""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import re
import shlex
import sys
from typing import Sequence

from . import __version__
from . import census as _census
from . import construct as _construct
from . import modelio
from . import stats as _stats
from .groups import (
    AmalgamatedProduct,
    FiniteTable,
    FreeProduct,
    Group,
    GroupError,
    GroupSpecParseError,
    IntegerGroup,
    parse_group_file,
    resolve_group,
)
from .permcore import PartialPerm, Perm
from .seeding import fresh_seed
from .verify import ActionModel, SoficAssignment, ga_check, ha_check, sa_check

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


# argument helpers


def positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def parse_int_list(text: str) -> list[int]:
    """Comma list with inclusive ranges: '4,6,8', '2..8' or '2..12:2'."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        m = re.fullmatch(r"(-?\d+)\.\.(-?\d+)(?::(\d+))?", part)
        if m:
            a, b, step = int(m.group(1)), int(m.group(2)), int(m.group(3) or 1)
            out.extend(range(a, b + 1, step))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def parse_float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _words(text: str | None) -> list[str]:
    if text is None:
        return []
    return [w for w in re.split(r"[,\s]+", text.strip()) if w]


def _registry(args) -> dict[str, Group] | None:
    path = getattr(args, "groups", None)
    if not path:
        return None
    return parse_group_file(path)


def _group(args, name: str | None = None) -> Group:
    name = name or args.group
    if name is None:
        raise UsageError("--group is required")
    return resolve_group(name, _registry(args))


def _load_model(path: str, args) -> SoficAssignment | ActionModel:
    return modelio.load(path, _registry(args))


def _base(model) -> SoficAssignment:
    return model.base if isinstance(model, ActionModel) else model


def _regular_at(G: Group, d: int, n: int) -> SoficAssignment:
    if isinstance(G, IntegerGroup):
        return _construct.shift_model(G, d, n)
    if not isinstance(G, FiniteTable):
        raise UsageError(f"no built-in exact model for {G.name}; pass a model file")
    if d % G.order():
        raise UsageError(f"d={d} is not a multiple of |{G.name}|={G.order()}")
    return _construct.regular_model(G, d // G.order(), n)


def _json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=False) + "\n"


# commands: each returns (exit code, stdout text, structured outputs)


def cmd_verify(args):
    model = _load_model(args.model, args)
    base = _base(model)
    g = base.group
    F = [g.parse_element(w) for w in _words(args.F)] or list(base.generators)
    n = args.n if args.n is not None else base.n
    check = args.check or ("ha" if isinstance(model, ActionModel) else "ga")
    if check == "ga":
        rep = ga_check(base, F, n, args.delta)
    elif check in ("ha", "sa"):
        if not isinstance(model, ActionModel):
            raise UsageError(f"{check} check needs an action model")
        rep = ha_check(model, F, n, args.delta) if check == "ha" else sa_check(model, F, n, args.delta)
    else:
        raise UsageError(f"unknown check {check!r}")
    if args.json:
        text = _json(rep.to_json())
    else:
        text = rep.table() + "\n"
    return (EXIT_OK if rep.passed else EXIT_FAIL), text, [rep.to_json()]


def _census_records(args, d_list, want_witnesses=False):
    G = _group(args)
    F = _words(args.F)
    E = _words(args.E) if args.E is not None else F
    mode = "orbit" if args.orbit_mode else "exhaustive"
    recs, wits = [], []
    for d in d_list:
        rec, w = _census.enumerate_ga(G, F, E, args.n, args.delta, d, mode=mode, witnesses=want_witnesses, node_cap=args.node_cap)
        recs.append(rec)
        if w:
            wits.extend(w)
    return recs, wits


def cmd_census(args):
    if args.d_list is None and args.d is None:
        raise UsageError("give --d or --d-list")
    d_list = args.d_list or [args.d]
    if args.witnesses and args.orbit_mode:
        raise UsageError("--witnesses needs exhaustive mode")
    recs, wits = _census_records(args, d_list, args.witnesses)
    outputs = [r.to_json() for r in recs]
    if args.witnesses:
        payload = _json([modelio.model_to_dict(w) for w in wits])
        with open(args.witness_out, "w", encoding="utf-8") as fh:
            fh.write(payload)
        outputs.append({"witness_file": args.witness_out, "witnesses": len(wits)})
    return EXIT_OK, _census.records_to_csv(recs), outputs


def cmd_profile(args):
    recs, _ = _census_records(args, args.d_list)
    text = _census.records_to_csv(recs)
    # parity summary goes to stderr so stdout stays plain CSV
    for parity, rs in _census.split_parity(recs).items():
        if rs:
            vals = ", ".join(f"d={r.d}:{'-inf' if r.count == 0 else f'{r.rate:.4f}'}" for r in rs)
            print(f"{parity}: {vals}", file=sys.stderr)
    return EXIT_OK, text, [r.to_json() for r in recs]


# construct


def _input_model(args) -> SoficAssignment:
    if getattr(args, "model", None):
        m = _load_model(args.model, args)
        return _base(m)
    if args.group is None or args.d is None:
        raise UsageError("pass a model file or --group with --d")
    return _regular_at(_group(args), args.d, args.n)


def cmd_construct(args):
    kind = args.kind
    seed = args.seed
    extra = None
    if kind == "regular":
        G = _group(args)
        if isinstance(G, IntegerGroup):
            if args.d is None:
                raise UsageError("Z needs --d")
            model = _construct.shift_model(G, args.d, args.n)
        elif isinstance(G, FiniteTable):
            model = _construct.regular_model(G, args.copies, args.n)
        else:
            raise UsageError(f"{G.name} has no exact regular model")
    elif kind == "amplify":
        model = _construct.amplify(_input_model(args), args.copies)
    elif kind == "induce":
        sigma = _input_model(args)
        G = _group(args, args.ambient)
        if isinstance(G, IntegerGroup):
            if args.index is None:
                raise UsageError("inducing to Z needs --index m (subgroup mZ)")
            sub = _construct.SubgroupData.multiples(G, args.index, sigma.group if isinstance(sigma.group, IntegerGroup) else None)
        elif isinstance(G, FiniteTable):
            if args.embedding is None:
                raise UsageError("--embedding is required for finite groups")
            sub = _construct.SubgroupData.finite(G, sigma.group, parse_int_list(args.embedding))
        else:
            raise UsageError("induction supports finite groups and Z")
        R = None
        if args.transversal:
            R = [G.parse_element(w) for w in _words(args.transversal)]
        model = _construct.induce_from_subgroup(sigma, sub, R, n=args.n)
    elif kind == "quasitile":
        if args.shift is not None:
            Z = IntegerGroup("Z")
            sigma = _construct.shift_model(Z, args.shift, max(args.n, _tile_radius(args.tile)))
        else:
            sigma = _input_model(args)
        tiles = [_parse_tile(sigma.group, t) for t in args.tile]
        res = _construct.quasitile(sigma, tiles, args.eps)
        out = res.to_json()
        out["certificate_holds"] = res.certificate_holds()
        out["d"] = sigma.d
        return EXIT_OK, _json(out), [out]
    elif kind in ("freejoin", "amalgamjoin"):
        n = args.n
        if kind == "freejoin":
            left = _group(args, args.left)
            right = _group(args, args.right)
            if args.d is None:
                raise UsageError("--d is required")
            a = _regular_at(left, args.d, n) if not args.left_model else _base(_load_model(args.left_model, args))
            b = _regular_at(right, args.d, n) if not args.right_model else _base(_load_model(args.right_model, args))
            group = FreeProduct(f"{a.group.name}*{b.group.name}", [a.group, b.group])
            model = _construct.free_join(a, b, group, seed=seed, n=n)
        else:
            group = _group(args)
            if not isinstance(group, AmalgamatedProduct):
                raise UsageError(f"{group.name} is not an amalgamated product")
            if args.d is None:
                raise UsageError("--d is required")
            G1, G2 = group.factors
            a = _regular_at(G1, args.d, n) if not args.left_model else _base(_load_model(args.left_model, args))
            b = _regular_at(G2, args.d, n) if not args.right_model else _base(_load_model(args.right_model, args))
            res = _construct.amalgamated_join(a, b, group, seed, n=n, eps=args.eps, align=not args.no_align)
            model = res.model
            extra = res.to_json()
            model.provenance.update({"join": extra})
    elif kind == "conjugator":
        a = _base(_load_model(args.model, args))
        b = _base(_load_model(args.other, args))
        gamma, resid = _construct.approx_conjugator(a, b, budget=args.budget)
        out = {"gamma": [int(v) + 1 for v in gamma.array], "residual": resid}
        return EXIT_OK, _json(out), [out]
    elif kind == "bernoulli":
        sigma = _input_model(args)
        nu = parse_float_list(args.nu)
        model = _construct.bernoulli_model(sigma, nu, seed)
    else:
        raise UsageError(f"unknown construction {kind!r}")
    text = modelio.dumps(model)
    return EXIT_OK, text, [{"model_bytes": len(text), **({"join": extra} if extra else {})}]


def _tile_radius(tiles: Sequence[str]) -> int:
    r = 1
    for t in tiles:
        for a in re.findall(r"-?\d+", t):
            r = max(r, abs(int(a)))
    return r


def _parse_tile(G: Group, text: str) -> list:
    """'a..b' is the half-open integer interval [a, b); otherwise a comma list of words."""
    m = re.fullmatch(r"\s*(-?\d+)\.\.(-?\d+)\s*", text)
    if m:
        if not isinstance(G, IntegerGroup):
            raise UsageError("interval tiles need the group Z")
        return _construct.interval_tile(G, int(m.group(1)), int(m.group(2)))
    return [G.parse_element(w) for w in _words(text)]


# surveys


def _named_partial(name: str, d: int) -> PartialPerm:
    if name == "identity":
        return Perm.identity(d)
    if name == "empty":
        return PartialPerm.empty(d)
    if name == "fpf":
        if d % 2:
            raise UsageError("fpf needs even d")
        return Perm.from_cycles([(2 * i + 1, 2 * i + 2) for i in range(d // 2)], d)
    if name == "shift":
        return Perm.from_images(list(range(2, d + 1)) + [1])
    raise UsageError(f"unknown partial permutation {name!r} (identity, empty, fpf, shift)")


def cmd_survey(args):
    kind = args.kind
    seed = args.seed
    results = []
    if kind == "trace":
        for d in args.d_list or [args.d or 10]:
            A = _named_partial(args.A, d)
            results.append(_stats.trace_survey(A, args.eps, args.trials, seed, exhaustive=args.exhaustive))
            if not args.exhaustive:
                results[-1].params["exact"] = _stats.derangement_fraction(d, math.ceil(args.eps * d) - 1) if args.A == "identity" else None
    elif kind == "alt":
        rho = parse_int_list(args.rho)
        for d in args.d_list or [args.d or 30]:
            As = [_named_partial(args.A, d)] * len(rho)
            results.append(_stats.alternating_trace_mean(As, rho, args.trials, seed))
    elif kind == "conc":
        rho = parse_int_list(args.rho)
        d_list = args.d_list or [10, 20, 40]
        results = _stats.concentration_profile(lambda d: [_named_partial(args.A, d)] * len(rho), rho, args.eps, d_list, args.trials, seed, args.c_n)
    elif kind == "join":
        d_list = args.d_list or [20, 50, 100]
        if args.amalgam:
            group = _group(args, args.amalgam)
            if not isinstance(group, AmalgamatedProduct):
                raise UsageError(f"{group.name} is not an amalgamated product")
            build = _stats.amalgam_join_builder(group, n=args.n)
        else:
            left = _group(args, args.left)
            right = _group(args, args.right)
            build = _stats.free_join_builder(left, right, U_identity=args.identity_U, n=args.n)
        results = _stats.join_success_survey(build, args.n, args.delta, d_list, args.trials, seed)
    else:
        raise UsageError(f"unknown survey {kind!r}")
    outputs = [r.to_json() for r in results]
    text = _json(outputs) if args.json else _stats.results_to_csv(results)
    return EXIT_OK, text, outputs


def cmd_replay(args):
    with open(args.record, encoding="utf-8") as fh:
        rec = json.load(fh)
    argv = list(rec["argv"])
    if "--seed" not in argv:
        argv += ["--seed", str(rec["seed"])]
    argv = _strip_record(argv)
    code, text, _ = _dispatch(argv)
    same = stable_text(text) == stable_text(rec["stdout"]) and code == rec["exit_code"]
    print("replay: identical" if same else "replay: DIFFERENT", file=sys.stderr)
    return (EXIT_OK if same else EXIT_FAIL), text, []


def stable_text(text: str) -> str:
    """Output with the wallclock column of census CSVs blanked."""
    lines = text.splitlines(keepends=True)
    if not lines or not lines[0].startswith("group,") or "seconds" not in lines[0]:
        return text
    idx = lines[0].rstrip("\n").split(",").index("seconds")
    out = [lines[0]]
    for ln in lines[1:]:
        cells = ln.rstrip("\n").split(",")
        if len(cells) > idx:
            cells[idx] = ""
        out.append(",".join(cells) + "\n")
    return "".join(out)


def _strip_record(argv: list[str]) -> list[str]:
    out = []
    skip = False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--record":
            skip = True
            continue
        if a.startswith("--record="):
            continue
        out.append(a)
    return out


# parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="master seed (printed to stderr; fresh when omitted)")
    p.add_argument("--out", default=None, help="write the main output here instead of stdout")
    p.add_argument("--record", default=None, help="write a run record JSON here")
    p.add_argument("--groups", default=None, help="group-spec text file with extra declarations")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="soficlab", description="Finite models of groups and actions by permutations.")
    ap.add_argument("--version", action="version", version=f"soficlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check a model file")
    _common(p)
    p.add_argument("model")
    p.add_argument("--F", default=None, help="words, comma or space separated (default: model generators)")
    p.add_argument("--n", type=positive_int, default=None)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--check", choices=["ga", "ha", "sa"], default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)

    for name, fn in (("census", cmd_census), ("profile", cmd_profile)):
        p = sub.add_parser(name, help="exact strict-regime counts" if name == "census" else "rates over a d-list")
        _common(p)
        p.add_argument("--group", required=True)
        p.add_argument("--F", required=True)
        p.add_argument("--E", default=None, help="restriction set (default F)")
        p.add_argument("--n", type=positive_int, required=True)
        p.add_argument("--delta", type=float, required=True)
        if name == "census":
            p.add_argument("--d", type=positive_int, default=None)
            p.add_argument("--d-list", type=parse_int_list, default=None)
            p.add_argument("--witnesses", action="store_true")
            p.add_argument("--witness-out", default="witnesses.json")
        else:
            p.add_argument("--d-list", type=parse_int_list, required=True)
        p.add_argument("--orbit-mode", action="store_true")
        p.add_argument("--node-cap", type=positive_int, default=_census.DEFAULT_NODE_CAP)
        p.set_defaults(func=fn)

    p = sub.add_parser("construct", help="build a model")
    _common(p)
    p.add_argument("kind", choices=["regular", "amplify", "induce", "quasitile", "freejoin", "amalgamjoin", "conjugator", "bernoulli"])
    p.add_argument("model", nargs="?", default=None, help="input model file")
    p.add_argument("other", nargs="?", default=None, help="second model file (conjugator)")
    p.add_argument("--group", default=None)
    p.add_argument("--d", type=positive_int, default=None)
    p.add_argument("--n", type=positive_int, default=3)
    p.add_argument("--copies", type=positive_int, default=1)
    p.add_argument("--ambient", default=None, help="target group for induce")
    p.add_argument("--embedding", default=None, help="H -> G element indices for induce")
    p.add_argument("--index", type=positive_int, default=None, help="m for the subgroup mZ")
    p.add_argument("--transversal", default=None)
    p.add_argument("--tile", action="append", default=[], help="tile: 'a..b' interval [a,b) or word list")
    p.add_argument("--shift", type=positive_int, default=None, help="tile a cyclic shift model of Z at this d")
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--left", default=None)
    p.add_argument("--right", default=None)
    p.add_argument("--left-model", default=None)
    p.add_argument("--right-model", default=None)
    p.add_argument("--no-align", action="store_true")
    p.add_argument("--budget", type=positive_int, default=20000)
    p.add_argument("--nu", default="0.5,0.5")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("survey", help="Monte Carlo surveys")
    _common(p)
    p.add_argument("kind", choices=["trace", "alt", "conc", "join"])
    p.add_argument("--trials", type=positive_int, default=1000)
    p.add_argument("--d", type=positive_int, default=None)
    p.add_argument("--d-list", type=parse_int_list, default=None)
    p.add_argument("--eps", type=float, default=0.15)
    p.add_argument("--A", default="identity", help="identity, empty, fpf or shift")
    p.add_argument("--exhaustive", action="store_true")
    p.add_argument("--rho", default="1,1")
    p.add_argument("--c-n", type=float, default=1.0)
    p.add_argument("--left", default="z2")
    p.add_argument("--right", default="z2")
    p.add_argument("--amalgam", default=None)
    p.add_argument("--identity-U", action="store_true")
    p.add_argument("--n", type=positive_int, default=4)
    p.add_argument("--delta", type=float, default=0.3)
    p.add_argument("--group", default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_survey)

    p = sub.add_parser("replay", help="re-run a run record and compare outputs")
    p.add_argument("record")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_replay, record_path=None)
    return ap


def _dispatch(argv: Sequence[str]):
    ap = build_parser()
    args = ap.parse_args(list(argv))
    if args.command != "replay":
        if args.seed is None:
            args.seed = fresh_seed()
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.func(args)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    start = _dt.datetime.now(_dt.timezone.utc).isoformat()
    try:
        ap = build_parser()
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command != "replay" and args.seed is None:
        args.seed = fresh_seed()
    if args.command != "replay":
        print(f"seed: {args.seed}", file=sys.stderr)
    try:
        code, text, outputs = args.func(args)
    except (UsageError, modelio.ModelFormatError, GroupSpecParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GroupError, _census.UnsupportedRegimeError, _census.RestrictionError, _construct.ConstructionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _census.WorkCapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if getattr(args, "record", None) and args.command != "replay":
        argv_rec = _strip_record(argv)
        if "--seed" not in argv_rec:
            argv_rec += ["--seed", str(args.seed)]
        record = {
            "command": "soficlab " + " ".join(shlex.quote(a) for a in argv),
            "argv": argv_rec,
            "config": {k: v for k, v in vars(args).items() if k != "func" and not callable(v)},
            "seed": str(args.seed),
            "start": start,
            "end": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "version": __version__,
            "exit_code": code,
            "stdout": text,
            "outputs": outputs,
        }
        with open(args.record, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(record, indent=1, default=str) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
