"""Batch front end: construction, verification and query subcommands.

All reports are deterministic byte for byte for identical inputs; exit
code 0 on success, 1 on domain errors (invalid towers, integrability
failures, rejected spectral parameters), 2 on usage errors.  Rationals
are serialized as "n/d" strings throughout.
"""

from __future__ import annotations

import argparse
import json
import random
import re
import sys
from fractions import Fraction

from . import a_spaces as asp
from . import corner_spaces as cs
from . import densities as dn
from . import index_algebra as ia
from . import model_symbols as ms
from . import op_calculus as oc
from .a_spaces import Tower

USAGE_ERROR = 2
DOMAIN_ERROR = 1


def _load_tower(path: str) -> Tower:
    with open(path) as fh:
        return Tower.from_json(json.load(fh))


def _emit(args, text: str):
    if getattr(args, "output", None):
        with open(args.output, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _fmt_weights(w) -> dict:
    return ia.weights_to_json(w)


def cmd_tower_validate(args) -> int:
    t = _load_tower(args.config)
    report = {"k": t.k, "a": list(t.orders), "b": t.b, "f": list(t.f),
              "dim": t.dim, "valid": True}
    if args.format == "json":
        _emit(args, json.dumps(report, indent=2, sort_keys=True))
    else:
        _emit(args, f"tower depth {t.k}, orders {t.orders}, "
                    f"dims (b={t.b}, f={t.f}), total dim {t.dim}: valid")
    return 0


def cmd_space_double(args) -> int:
    t = _load_tower(args.config)
    d = asp.double_space(t)
    pl, pr = d.proj_l, d.proj_r
    faces = d.faces
    if args.format == "dot":
        _emit(args, cs.export_dot(d.space, "double space"))
        return 0
    data = {"faces": list(faces),
            "e_left": list(asp.exponent_vector(pl, faces)),
            "e_right": list(asp.exponent_vector(pr, faces)),
            "b_fibrations": bool(cs.is_b_fibration(pl)
                                 and cs.is_b_fibration(pr)),
            "diagonal_meets": sorted(d.space.psub_meets("diag"))}
    if args.format == "json":
        _emit(args, json.dumps(data, indent=2, sort_keys=True))
    else:
        lines = [f"double space faces: {', '.join(faces)}",
                 f"left projection exponents:  {data['e_left']}",
                 f"right projection exponents: {data['e_right']}",
                 f"projections are b-fibrations: {data['b_fibrations']}",
                 f"lifted diagonal meets: {', '.join(data['diagonal_meets'])}"]
        _emit(args, "\n".join(lines))
    return 0


def cmd_space_triple(args) -> int:
    t = _load_tower(args.config)
    if t.k != 2:
        print("triple space construction needs tower depth 2",
              file=sys.stderr)
        return DOMAIN_ERROR
    trip = asp.triple_space(t)
    if args.format == "dot":
        _emit(args, cs.export_dot(trip.space, "triple space"))
        return 0
    bij = asp.triple_constructions_isomorphic(t)
    data = {"faces": list(trip.space.face_names),
            "face_count": len(trip.space.faces),
            "projections_b_fibrations": [
                bool(cs.is_b_fibration(p)) for p in trip.projections],
            "constructions_isomorphic": bij is not None}
    if args.format == "json":
        _emit(args, json.dumps(data, indent=2, sort_keys=True))
    else:
        lines = [f"triple space: {data['face_count']} boundary hypersurfaces",
                 "projections are b-fibrations: "
                 + str(all(data["projections_b_fibrations"])),
                 "symmetric and commuted constructions isomorphic: "
                 + str(data["constructions_isomorphic"])]
        _emit(args, "\n".join(lines))
    return 0


def cmd_facemap_verify(args) -> int:
    t = _load_tower(args.config)
    rep = asp.verify_facemaps(t)
    if args.format == "json":
        _emit(args, json.dumps(rep, indent=2, sort_keys=True, default=list))
    else:
        _emit(args, f"{rep['tables']} tables, {len(rep['mismatches'])} "
                    f"mismatches")
        for m in rep["mismatches"]:
            _emit(args, f"  stage {m['stage']} projection {m['projection']} "
                        f"face {m['face']}: got {m['got']}, want {m['want']}")
    return 0 if not rep["mismatches"] else DOMAIN_ERROR


def cmd_weights(args) -> int:
    t = _load_tower(args.config)
    if t.k != 2:
        print("weight tables need tower depth 2", file=sys.stderr)
        return DOMAIN_ERROR
    gam = dn.gamma(t)
    dw = dn.double_weights(t)
    tw = dn.triple_weights(t)
    rng = random.Random(args.seed)
    sweep = _weight_sweep(t, rng, args.sweep)
    data = {"gamma": [str(g) for g in gam],
            "double": {"w_a0": _fmt_weights(dw.w_a0),
                       "w_a": _fmt_weights(dw.w_a),
                       "w_tilde": _fmt_weights(dw.w_tilde)},
            "triple": {"W_a0": _fmt_weights(tw.W_a0),
                       "W_a_adopted": _fmt_weights(tw.W_a),
                       "W_a_displayed":
                           _fmt_weights(dn.displayed_w_a(t))},
            "sign_discrepancy_note":
                "the adopted W_a follows the intermediate pullback-sum "
                "arithmetic and the closed-form composition cross-check; "
                "the usually displayed value differs in the V_z and F_z "
                "signs",
            "composition_sweep": sweep}
    if args.format == "json":
        _emit(args, json.dumps(data, indent=2, sort_keys=True))
    else:
        lines = [f"gamma weights: {', '.join(data['gamma'])}",
                 f"double space w_a0:    {data['double']['w_a0']}",
                 f"double space w_a:     {data['double']['w_a']}",
                 f"double space w_tilde: {data['double']['w_tilde']}",
                 f"triple space W_a0: {data['triple']['W_a0']}",
                 dn.weight_discrepancy_report(t),
                 f"composition sweep: {sweep['checked']} random families, "
                 f"{sweep['failures']} closed-form mismatches "
                 f"(seed {args.seed})"]
        _emit(args, "\n".join(lines))
    return 0


def _weight_sweep(t: Tower, rng: random.Random, count: int) -> dict:
    def rand_set():
        n = rng.randint(0, 2)
        return ia.normalize([
            ia.term(Fraction(rng.randint(1, 5), rng.choice([1, 2])), 0,
                    rng.randint(0, 2)) for _ in range(n)])

    checked = failures = 0
    for _ in range(count):
        P = oc.op_class(t, 0, rf=rand_set(), lf=rand_set(),
                        ff_zx=rand_set(), ff_zy=rand_set(), ff_z=rand_set())
        Q = oc.op_class(t, 0, rf=rand_set(), lf=rand_set(),
                        ff_zx=rand_set(), ff_zy=rand_set(), ff_z=rand_set())
        try:
            R = oc.compose(P, Q)
        except oc.NonIntegrable:
            continue
        checked += 1
        if not ia.windowed_eq(R.family["ff_z"], oc.ffz_closed_form(P, Q),
                              Fraction(12), 8):
            failures += 1
    return {"checked": checked, "failures": failures}


def _load_class(t: Tower, path: str) -> oc.OperatorClass:
    with open(path) as fh:
        return oc.class_from_json(t, json.load(fh))


def cmd_compose(args) -> int:
    t = _load_tower(args.config)
    P = _load_class(t, args.P)
    Q = _load_class(t, args.Q)
    try:
        R = oc.compose(P, Q)
    except oc.NonIntegrable as e:
        print(f"composition not integrable at: {', '.join(e.faces)}",
              file=sys.stderr)
        return DOMAIN_ERROR
    out = oc.class_to_json(R)
    out["ff_z_closed_form"] = ia.indexset_to_json(oc.ffz_closed_form(P, Q))
    _emit(args, json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_act(args) -> int:
    t = _load_tower(args.config)
    P = _load_class(t, args.P)
    with open(args.I) as fh:
        I = ia.indexset_from_json(json.load(fh)["set"])
    try:
        out = oc.act(P, I)
    except oc.NonIntegrable as e:
        print(f"action not integrable at: {', '.join(e.faces)}",
              file=sys.stderr)
        return DOMAIN_ERROR
    _emit(args, json.dumps({"set": ia.indexset_to_json(out)}, indent=2))
    return 0


def cmd_parametrix(args) -> int:
    t = _load_tower(args.config)
    led = oc.parametrix_ledger(t, Fraction(args.m))
    ok = led.verify()
    data = {"order": str(Fraction(args.m)), "verified": ok,
            "steps": oc.ledger_to_json(led)}
    if args.format == "json":
        _emit(args, json.dumps(data, indent=2, sort_keys=True))
    else:
        lines = [f"parametrix ledger for order {args.m}: "
                 f"{'verified' if ok else 'FAILED'}"]
        for i, st in enumerate(led.steps, 1):
            lines.append(f"  step {i}: {st.description}")
            lines.append(f"    rule: {st.rule}; output: {st.output}")
            for okc, what in st.checks:
                lines.append(f"    check [{'ok' if okc else 'FAIL'}] {what}")
        _emit(args, "\n".join(lines))
    return 0 if ok else DOMAIN_ERROR


def _load_operator(t: Tower, path: str) -> ms.ADiffOp:
    with open(path) as fh:
        data = json.load(fh)
    nm = t.b + sum(t.f)
    terms = {}
    for item in data["terms"]:
        mu = (int(item.get("alpha", 0)),
              tuple(item.get("I", [0] * t.b)),
              tuple(item.get("J", [0] * t.f[0])),
              tuple(item.get("K", [0] * t.f[1])))
        spec = item.get("coeff", {})
        xp = spec.get("x_poly", [[0, "1", "0"]])
        trig = spec.get("trig", [{"modes": [0] * nm, "re": "1", "im": "0"}])
        c = ms.Coeff()
        for n, restr, imstr in xp:
            base = ms.Coeff({(int(n), (0,) * nm, 0):
                             ia.cx(Fraction(restr), Fraction(imstr))})
            for tg in trig:
                tc = ms.Coeff({(0, tuple(tg["modes"]), 0):
                               ia.cx(Fraction(tg.get("re", 1)),
                                     Fraction(tg.get("im", 0)))})
                c = c + base * tc
        terms[mu] = terms.get(mu, ms.Coeff()) + c
    return ms.make_op(t, terms)


def cmd_normal_family(args) -> int:
    t = _load_tower(args.config)
    if args.operator:
        P = _load_operator(t, args.operator)
    else:
        P = ms.model_laplacian(t)
    point = tuple(Fraction(x) for x in (args.point.split(",") if args.point
                                        else ["0"] * (t.b + t.f[0])))
    mu = tuple(Fraction(x) for x in (args.mu.split(",") if args.mu
                                     else ["0"] * (1 + t.b + t.f[0])))
    M = ms.normal_family_matrix(P, point, mu, args.N)
    entries = {}
    for (r, c), v in sorted(M.entries.items(), key=repr):
        key = f"{list(r)}|{list(c)}"
        if isinstance(v, ms.PiPoly):
            entries[key] = {str(k): [ia._frac_str(vv.re), ia._frac_str(vv.im)]
                            for k, vv in sorted(v.items())}
        else:
            entries[key] = [f"{v.real:.17g}", f"{v.imag:.17g}"]
    data = {"dim": M.dim(), "exact": M.exact, "diagonal": M.is_diagonal(),
            "entries": entries}
    _emit(args, json.dumps(data, indent=2, sort_keys=True))
    return 0


def parse_lambda(text: str):
    """Spectral parameter: rational, rational i, and rational pi^2 parts.

    Accepts forms like -1, i, -3+2i, 4pi^2, 1/2-3/4i, 1+2pi^2.
    """
    s = text.strip().replace(" ", "")
    if not s:
        raise ValueError("empty spectral parameter")
    re0 = im = re2 = Fraction(0)

    def frac(txt):
        if txt in ("", "+"):
            return Fraction(1)
        if txt == "-":
            return Fraction(-1)
        return Fraction(txt)

    for tok in re.findall(r"[+-]?[^+-]+", s):
        if tok.endswith("pi^2"):
            re2 += frac(tok[:-4])
        elif tok.endswith("i"):
            im += frac(tok[:-1])
        else:
            re0 += Fraction(tok)
    return re0, re2, im


def cmd_resolvent_check(args) -> int:
    t = _load_tower(args.config)
    try:
        re0, re2, im = parse_lambda(args.lam)
    except ValueError as e:
        print(str(e), file=sys.stderr)
        return USAGE_ERROR
    r = ms.resolvent_model_check(t, re0, re2, im, N=args.N,
                                 radius=Fraction(args.radius),
                                 step=Fraction(args.step))
    if r["invertible"]:
        _emit(args, f"fully elliptic; margin {r['margin']:.12g}")
        return 0
    w = r["witness"]
    _emit(args, "rejected: spectral parameter on the model spectrum; "
                f"witness |mu|^2 = {w['mu_norm_sq']}, "
                f"|k|^2 = {w['k_norm_sq']}" if w else
                "rejected: margin below spectral distance")
    return DOMAIN_ERROR


def cmd_export_dot(args) -> int:
    t = _load_tower(args.config)
    if args.space == "double":
        space = asp.double_space(t).space
    else:
        if t.k != 2:
            print("triple space needs tower depth 2", file=sys.stderr)
            return DOMAIN_ERROR
        space = asp.triple_space(t).space
    _emit(args, cs.export_dot(space, f"{args.space} space"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qhcalc",
        description="bookkeeping calculus for quasihomogeneous blowups "
                    "and multi-fibred boundary operator classes")
    sub = ap.add_subparsers(dest="command")

    def common(p, config=True):
        if config:
            p.add_argument("-c", "--config", required=True,
                           help="tower config JSON")
        p.add_argument("--format", choices=["text", "json", "dot"],
                       default="text")
        p.add_argument("-o", "--output", help="write the report here")

    p = sub.add_parser("tower", help="tower configuration commands")
    tsub = p.add_subparsers(dest="tower_cmd")
    pv = tsub.add_parser("validate")
    common(pv)
    pv.set_defaults(func=cmd_tower_validate)

    p = sub.add_parser("space", help="space constructions")
    ssub = p.add_subparsers(dest="space_cmd")
    pd = ssub.add_parser("double")
    common(pd)
    pd.set_defaults(func=cmd_space_double)
    pt = ssub.add_parser("triple")
    common(pt)
    pt.set_defaults(func=cmd_space_triple)

    p = sub.add_parser("facemap", help="face table verification")
    fsub = p.add_subparsers(dest="facemap_cmd")
    pf = fsub.add_parser("verify")
    common(pf)
    pf.set_defaults(func=cmd_facemap_verify)

    p = sub.add_parser("weights", help="density weight tables and sweep")
    common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sweep", type=int, default=25)
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("compose", help="compose two operator classes")
    common(p)
    p.add_argument("-P", required=True)
    p.add_argument("-Q", required=True)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("act", help="apply a class to an index set")
    common(p)
    p.add_argument("-P", required=True)
    p.add_argument("-I", required=True)
    p.set_defaults(func=cmd_act)

    p = sub.add_parser("parametrix", help="remainder ledger")
    common(p)
    p.add_argument("-m", default="2")
    p.set_defaults(func=cmd_parametrix)

    p = sub.add_parser("normal-family", help="truncated fibre-mode matrix")
    common(p)
    p.add_argument("-O", "--operator")
    p.add_argument("--point")
    p.add_argument("--mu")
    p.add_argument("--N", type=int, default=8)
    p.set_defaults(func=cmd_normal_family)

    p = sub.add_parser("resolvent-check", help="model invertibility margin")
    common(p)
    p.add_argument("--lambda", dest="lam", required=True)
    p.add_argument("--N", type=int, default=8)
    p.add_argument("--radius", default="10")
    p.add_argument("--step", default="1/2")
    p.set_defaults(func=cmd_resolvent_check)

    p = sub.add_parser("export-dot", help="face lattice graph")
    common(p)
    p.add_argument("--space", choices=["double", "triple"], default="double")
    p.set_defaults(func=cmd_export_dot)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    func = getattr(args, "func", None)
    if func is None:
        ap.print_help()
        return USAGE_ERROR
    try:
        return func(args)
    except FileNotFoundError as e:
        print(f"cannot read {e.filename}", file=sys.stderr)
        return USAGE_ERROR
    except (ValueError, cs.BlowupError, cs.RewriteError) as e:
        print(str(e), file=sys.stderr)
        return DOMAIN_ERROR


if __name__ == "__main__":
    sys.exit(main())
