"""Command-line entry point: ``ostbc <subcommand> ...``.

Exit status is 0 on success, 1 when a check or equivalence fails and 2 on
usage errors.  Every subcommand that takes ``--seed`` is byte-reproducible.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import codes, complexity, decode, lattice, sim

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
FORMULA_VARIANTS = ("2MN", "2MT")


def _g(v) -> str:
    return f"{float(v):.12g}"


def _cplx(z) -> str:
    z = complex(z)
    sign = "-" if z.imag < 0 or (z.imag == 0 and math.copysign(1, z.imag) < 0) else "+"
    return f"{_g(z.real)}{sign}{_g(abs(z.imag))}j"


def _vec(values) -> str:
    return "[" + ", ".join(_cplx(v) for v in values) + "]"


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _snr(text: str) -> float:
    v = float(text)
    if math.isnan(v) or v == -math.inf:
        raise argparse.ArgumentTypeError("SNR must be finite or inf")
    return v


class _UsageError(Exception):
    pass


def _load(name: str) -> codes.CodeSpec:
    try:
        return codes.load_code(name)
    except (KeyError, FileNotFoundError, ValueError) as exc:
        raise _UsageError(f"cannot load code {name!r}: {exc}") from exc


def _random_trial(spec, M, L, snr_db, rng):
    s = decode.Constellation(L).random_symbols(rng, spec.K)
    H = sim.draw_channel(rng, spec.N, M)
    Y = sim.transmit(spec, H, s, sim.noise_variance(snr_db, L), rng)
    return s, H, Y


# ---------------------------------------------------------------- commands


def cmd_codes_list(args) -> int:
    print("name N T K c rate")
    for name in codes.BUILTIN_NAMES:
        spec = codes.builtin(name)
        print(f"{name} {spec.N} {spec.T} {spec.K} {spec.c} {_g(spec.K / spec.T)}")
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        spec = codes.load_code(args.code)
    except (KeyError, FileNotFoundError) as exc:
        raise _UsageError(str(exc)) from exc
    except ValueError as exc:
        print(f"invalid code: {exc}", file=sys.stderr)
        return EXIT_FAIL
    try:
        c = codes.validate(spec, trials=args.trials, tol=args.tol, rng=np.random.default_rng(args.seed))
    except codes.CodeValidationError as exc:
        print(f"{spec.name}: FAILED: {exc}")
        return EXIT_FAIL
    print(f"c = {c}")
    return EXIT_OK


def cmd_lattice(args) -> int:
    spec = _load(args.code)
    for row in lattice.symbolic_check_H(spec, args.m):
        print(" ".join(lattice.format_symbolic(f) for f in row))
    return EXIT_OK


def _read_input(path: str, spec):
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)

    def mat(key):
        return np.array(obj[key]["re"], dtype=float) + 1j * np.array(obj[key]["im"], dtype=float)

    try:
        H, Y = mat("H"), mat("Y")
    except (KeyError, TypeError) as exc:
        raise _UsageError('input JSON needs {"H": {"re", "im"}, "Y": {"re", "im"}}') from exc
    s = mat("s") if "s" in obj else None
    return s, H, Y


def cmd_decode(args) -> int:
    spec = _load(args.code)
    if args.input:
        s, H, Y = _read_input(args.input, spec)
    else:
        s, H, Y = _random_trial(spec, args.m, args.l, args.snr_db, np.random.default_rng(args.seed))
    try:
        system = lattice.build_check_H(spec, H)
        out = decode.decode(system, Y, args.l)
    except (ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if args.json:
        doc = {"code": spec.name, "L": args.l,
               "soft": {"re": out.soft.real.tolist(), "im": out.soft.imag.tolist()},
               "hard": {"re": out.hard.real.tolist(), "im": out.hard.imag.tolist()}}
        if s is not None:
            doc["sent"] = {"re": np.real(s).tolist(), "im": np.imag(s).tolist()}
        print(json.dumps(doc))
        return EXIT_OK
    if s is not None:
        print(f"sent: {_vec(s)}")
    print(f"soft: {_vec(out.soft)}")
    print(f"hard: {_vec(out.hard)}")
    return EXIT_OK


def cmd_compare(args) -> int:
    spec = _load(args.code)
    rng = np.random.default_rng(args.seed)
    snr = math.inf if args.noiseless else args.snr_db
    worst = 0.0
    ties = 0
    for t in range(args.trials):
        s, H, Y = _random_trial(spec, args.m, args.l, snr, rng)
        cmp = decode.compare_decoders(spec, H, Y, args.l, run_oracle=not args.no_oracle)
        worst = max(worst, cmp.max_rel_diff)
        if cmp.oracle is not None and not cmp.oracle.unique:
            ties += 1
        soft_bad = cmp.max_rel_diff > args.tol
        hard_bad = cmp.oracle_agrees is False
        noiseless_bad = args.noiseless and not np.array_equal(cmp.hard, s)
        if args.noiseless and t < args.show:
            print(f"trial {t}: sent {_vec(s)} recovered {_vec(cmp.hard)}")
        if soft_bad or hard_bad or noiseless_bad:
            print(f"DISAGREEMENT at trial {t}")
            print(f"  sent: {_vec(s)}")
            for name, v in cmp.soft.items():
                print(f"  {name}: {_vec(v)}")
            print(f"  hard: {_vec(cmp.hard)}")
            if cmp.oracle is not None:
                print(f"  oracle: {_vec(cmp.oracle.symbols)} unique={cmp.oracle.unique}")
            print(f"  max relative soft difference: {_g(cmp.max_rel_diff)}")
            return EXIT_FAIL
    print(f"{spec.name} M={args.m} L={args.l} trials={args.trials}: all decoders agree "
          f"(max relative difference {_g(worst)}, oracle ties {ties})")
    return EXIT_OK


def count_report(spec, M: int, levels, model, include_c_mult: bool) -> dict:
    counts = {lvl.value: complexity.count_decode(spec, M, lvl, model, include_c_mult) for lvl in levels}
    forms = {v: complexity.formula(spec.K, M, spec.T, spec.N, spec.c, v, model) for v in FORMULA_VARIANTS}
    return {
        "code": spec.name, "M": M, "division_policy": model.division_policy.value,
        "include_c_mult": include_c_mult,
        "levels": {k: v.as_dict() for k, v in counts.items()},
        "formula": {k: v.as_dict() for k, v in forms.items()},
        "delta": {lvl: {v: (counts[lvl] - forms[v]).as_dict() for v in FORMULA_VARIANTS} for lvl in counts},
        "formula_variants_differ": forms["2MN"] != forms["2MT"],
    }


def cmd_count(args) -> int:
    spec = _load(args.code)
    levels = list(complexity.ScheduleLevel) if args.level == "all" else [complexity.ScheduleLevel(args.level)]
    model = complexity.CostModel(complexity.DivisionPolicy(args.div_policy))
    rep = count_report(spec, args.m, levels, model, args.include_c_mult)
    if args.json:
        print(json.dumps(rep))
        return EXIT_OK
    keys = ("R_D", "R_M", "R_A")
    print(f"# {spec.name} M={args.m} division={model.division_policy.value} include_c_mult={args.include_c_mult}")
    print(f"{'level':<12}" + "".join(f"{k:>8}" for k in keys))
    for lvl, d in rep["levels"].items():
        print(f"{lvl:<12}" + "".join(f"{d[k]:>8}" for k in keys))
    for v, d in rep["formula"].items():
        print(f"{'formula ' + v:<12}" + "".join(f"{d[k]:>8}" for k in keys))
    for lvl, per in rep["delta"].items():
        parts = ", ".join(f"vs {v}: {per[v]['R_M']:+d} R_M {per[v]['R_A']:+d} R_A" for v in FORMULA_VARIANTS)
        print(f"delta {lvl}: {parts}")
    if rep["formula_variants_differ"]:
        print("note: the sigma term of the closed form is ambiguous; 2MN (squares of all channel "
              "components) and 2MT give different totals for this code")
    print("note: for L=2 the division and the sigma computation can be skipped, since only signs matter")
    return EXIT_OK


def cmd_formula(args) -> int:
    if args.code:
        spec = _load(args.code)
        K, T, N, c = spec.K, spec.T, spec.N, spec.c
    else:
        if None in (args.k, args.t, args.n):
            raise _UsageError("give a code or all of --k, --t, --n")
        K, T, N, c = args.k, args.t, args.n, 1
    model = complexity.CostModel(complexity.DivisionPolicy(args.div_policy))
    res = {v: complexity.formula(K, args.m, T, N, c, v, model) for v in FORMULA_VARIANTS}
    if args.json:
        print(json.dumps({"K": K, "M": args.m, "T": T, "N": N,
                          "variants": {v: r.as_dict() for v, r in res.items()},
                          "variants_differ": res["2MN"] != res["2MT"]}))
        return EXIT_OK
    print(f"# K={K} M={args.m} T={T} N={N} division={model.division_policy.value}")
    for v, r in res.items():
        print(f"{v}: {r}")
    if res["2MN"] != res["2MT"]:
        print("note: sigma-term variants differ")
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _load(args.code)
    cfg = sim.SimConfig(code=spec.name, M=args.m, L=args.l, snr_db=tuple(args.snr_db), trials=args.trials,
                        seed=args.seed, decoder=args.decoder, crosscheck_fraction=args.crosscheck,
                        workers=args.workers)
    records = sim.run_monte_carlo(cfg, spec)
    text = sim.records_to_csv(cfg, records)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    bad = [r for r in records if r.disagreements]
    for r in bad:
        print(f"crosscheck disagreement at {_g(r.snr_db)} dB: {r.first_disagreement}", file=sys.stderr)
    return EXIT_FAIL if bad else EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ostbc", description="Orthogonal space-time block code toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("codes-list", help="list built-in codes").set_defaults(func=cmd_codes_list)

    v = sub.add_parser("verify", help="check orthogonality and report c")
    v.add_argument("code")
    v.add_argument("--trials", type=_positive_int, default=20)
    v.add_argument("--tol", type=float, default=1e-9)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    lt = sub.add_parser("lattice", help="print the symbolic real lattice matrix")
    lt.add_argument("code")
    lt.add_argument("--m", type=_positive_int, default=1)
    lt.set_defaults(func=cmd_lattice)

    def trial_flags(sp, trials: bool):
        sp.add_argument("code")
        sp.add_argument("--m", type=_positive_int, default=1)
        sp.add_argument("--l", type=_positive_int, default=2)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--snr-db", type=_snr, default=10.0)
        if trials:
            sp.add_argument("--trials", type=_positive_int, default=100)

    d = sub.add_parser("decode", help="decode one seeded random trial or a JSON input")
    trial_flags(d, trials=False)
    d.add_argument("--input", help='JSON file {"H": {"re","im"}, "Y": {"re","im"}, optional "s"}')
    d.add_argument("--json", action="store_true")
    d.set_defaults(func=cmd_decode)

    c = sub.add_parser("compare", help="check that all decoders and the oracle agree")
    trial_flags(c, trials=True)
    c.add_argument("--tol", type=float, default=1e-9)
    c.add_argument("--noiseless", action="store_true")
    c.add_argument("--show", type=int, default=5, help="noiseless trials to print")
    c.add_argument("--no-oracle", action="store_true")
    c.set_defaults(func=cmd_compare)

    policies = [pol.value for pol in complexity.DivisionPolicy]
    n = sub.add_parser("count", help="operation counts per schedule level")
    n.add_argument("code")
    n.add_argument("--m", type=_positive_int, default=1)
    n.add_argument("--level", choices=["all"] + [lv.value for lv in complexity.ScheduleLevel], default="all")
    n.add_argument("--div-policy", choices=policies, default=complexity.DivisionPolicy.FOUR_MULTIPLICATIONS.value)
    n.add_argument("--include-c-mult", action=argparse.BooleanOptionalAction, default=True)
    n.add_argument("--json", action="store_true")
    n.set_defaults(func=cmd_count)

    f = sub.add_parser("formula", help="closed-form operation count")
    f.add_argument("code", nargs="?")
    f.add_argument("--k", type=_positive_int)
    f.add_argument("--t", type=_positive_int)
    f.add_argument("--n", type=_positive_int)
    f.add_argument("--m", type=_positive_int, default=1)
    f.add_argument("--div-policy", choices=policies, default=complexity.DivisionPolicy.FOUR_MULTIPLICATIONS.value)
    f.add_argument("--json", action="store_true")
    f.set_defaults(func=cmd_formula)

    s = sub.add_parser("simulate", help="Monte Carlo symbol error rate, CSV output")
    s.add_argument("code")
    s.add_argument("--m", type=_positive_int, default=1)
    s.add_argument("--l", type=_positive_int, default=2)
    s.add_argument("--snr-db", type=_snr, nargs="+", default=[10.0, 20.0, 30.0])
    s.add_argument("--trials", type=_positive_int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--decoder", choices=sim.DECODERS, default="lattice")
    s.add_argument("--crosscheck", type=float, default=0.0, help="fraction of trials checked against the oracle")
    s.add_argument("--workers", type=_positive_int, default=1)
    s.add_argument("--output", "-o")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.error(str(exc))
    except decode.SearchSpaceTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
