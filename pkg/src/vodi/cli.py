"""Command-line interface.

Exit codes: 0 success, 1 invalid input or failed check, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
import numpy as np

from . import analysis, policies
from .game import Channel, InfoSpace, build_channel_matrix, default_sigma
from .oracle import SimConfig, exact_value, horizon_for, simulate_value
from .series import compute_alpha_table, evaluate_series
from .specfile import BUNDLED, SpecError, load_spec
from .tables import REFERENCE_TABLES, emit_table, fmt, load_reference, sign_agreement


class CliError(Exception):
    pass


def _writer(out):
    return csv.writer(out, lineterminator="\n")


def _load(args):
    doc = load_spec(args.spec)
    game = doc.game
    if getattr(args, "beta", None) is not None:
        if not 0.0 <= args.beta < 1.0:
            raise CliError(f"discount factor out of range: beta={args.beta}")
        game = game.with_beta(args.beta)
    return doc, game


def _profile(doc, game, name: str):
    if name == "optimal":
        return policies.solve_joint_best_response(game)[1]
    if name == "myopic":
        return policies.myopic_policy(game)
    if name.startswith("kstep:"):
        try:
            k = int(name.split(":", 1)[1])
        except ValueError:
            raise CliError(f"bad policy {name!r}; use kstep:<k>") from None
        return policies.k_step_policy(game, k=k)
    if name.startswith("mix:"):
        # mix:<lambda>:<k> blends the k-step rule (lambda 0) with the optimal rule
        parts = name.split(":")
        lam = float(parts[1])
        k = int(parts[2]) if len(parts) > 2 else 3
        return policies.mix_policies(policies.k_step_policy(game, k=k),
                                     policies.solve_joint_best_response(game)[1], lam)
    if name in doc.policies:
        return doc.policies[name]
    raise CliError(f"unknown policy {name!r}; use optimal, myopic, kstep:<k>, mix:<lambda>[:<k>]"
                   + (f" or one of {', '.join(doc.policies)}" if doc.policies else ""))


def _default_policy(doc):
    return next(iter(doc.policies)) if doc.policies else "optimal"


def cmd_validate(args, out):
    doc = load_spec(args.spec)
    g = doc.game
    out.write(f"ok: {g.n_states} states, {g.n_actions} joint actions, "
              f"{InfoSpace(g).size} information states, beta={g.beta}\n")
    return 0


def cmd_solve(args, out):
    doc, game = _load(args)
    name = args.policy or _default_policy(doc)
    prof = _profile(doc, game, name)
    w = _writer(out)
    w.writerow(["follower", "first", "second", "sF", "action"])
    for label, rule in (("F1", prof.follower1), ("F2", prof.follower2)):
        for idx in np.ndindex(rule.shape[:-1]):
            probs = rule[idx]
            act = str(int(probs.argmax())) if probs.max() == 1 else ";".join(fmt(p, 6) for p in probs)
            w.writerow([label, *idx, act])
    if name == "optimal":
        v, _ = policies.solve_joint_best_response(game)
        out.write("\n")
        w.writerow(["state", "s1", "s2", "sF", "follower_value"])
        for s, val in enumerate(v):
            w.writerow([s, *game.state_tuple(s), fmt(val, args.digits)])
    return 0


def cmd_alpha(args, out):
    doc, game = _load(args)
    prof = _profile(doc, game, args.policy or _default_policy(doc))
    table = compute_alpha_table(game, prof, args.K, args.agent)
    layout = args.layout or ("paper" if args.K >= 1 else "flat")
    out.write(emit_table(table, layout, args.digits))
    return 0


def cmd_value(args, out):
    doc, game = _load(args)
    prof = _profile(doc, game, args.policy or _default_policy(doc))
    space = InfoSpace(game)
    w = _writer(out)
    if args.method == "mc":
        M = float(np.abs(game.reward(args.agent)).max())
        horizon = args.horizon or horizon_for(game.beta, M, 1e-3)
        initial = None
        if args.start is not None:
            initial = np.zeros(space.size)
            initial[args.start] = 1.0
        res = simulate_value(game, prof, args.eps1, args.eps2, args.agent,
                             SimConfig(horizon, args.episodes, args.seed, initial))
        w.writerow(["estimate", "stderr", "bias_bound", "episodes", "horizon"])
        w.writerow([fmt(res.estimate, args.digits), fmt(res.stderr, args.digits),
                    fmt(res.bias_bound, args.digits), res.episodes, horizon])
        return 0
    if args.method == "exact":
        g = exact_value(game, prof, args.eps1, args.eps2, args.agent)
        tail = None
    else:
        table = compute_alpha_table(game, prof, args.K, args.agent)
        res = evaluate_series(table, args.eps1, args.eps2)
        g, tail = res.value, res.tail_bound
    w.writerow(["index", "zeta", "value"])
    for i, v in enumerate(g):
        w.writerow([i, space.label(i), fmt(v, args.digits)])
    if tail is not None:
        out.write(f"# truncation tail bound: {fmt(tail)}\n")
    return 0


def cmd_classify(args, out):
    doc, game = _load(args)
    prof = _profile(doc, game, args.policy or _default_policy(doc))
    c = analysis.classify_vodi(compute_alpha_table(game, prof, 1, args.agent), args.tol)
    w = _writer(out)
    w.writerow(["channel", "verdict", "negative", "zero", "positive"])
    for name, v in (("1", c.channel1), ("2", c.channel2)):
        w.writerow([name, v.label, v.n_negative, v.n_zero, v.n_positive])
    return 0


def cmd_check(args, out):
    w = _writer(out)
    if args.what == "garbling":
        n = args.size
        q = build_channel_matrix(Channel(args.eps, default_sigma(n)))
        qp = build_channel_matrix(Channel(args.eps_prime, default_sigma(n)))
        res = analysis.check_garbling(q, qp, args.tol)
        out.write(f"status: {res.status}\n")
        if res.R is not None:
            out.write(f"residual: {fmt(res.residual)}\nmin_entry: {fmt(res.min_entry)}\n")
            for row in res.R:
                w.writerow([fmt(x, args.digits) for x in row])
        return 0 if res.exists else 1
    if args.spec is None:
        raise CliError(f"check {args.what} needs a spec")
    doc, game = _load(args)
    if args.what == "isotone":
        prof = _profile(doc, game, args.policy or _default_policy(doc))
        ordering = None
        if args.order:
            ordering = analysis.Ordering.from_sequence([int(x) for x in args.order.split(",")])
        rep = analysis.check_isotonicity_conditions(game, prof, ordering, args.agent)
        w.writerow(["condition", "passed", "counterexample", "detail"])
        for name, c in rep.conditions.items():
            w.writerow([name, c.passed, "" if c.counterexample is None else
                        " ".join(map(str, c.counterexample)), c.detail])
        out.write(f"# ordering (low to high): {' '.join(map(str, rep.ordering.sequence))}\n")
        if rep.all_passed:
            out.write(f"# alpha10 <= alpha01 componentwise: {rep.conclusion_holds}\n")
        return 0 if rep.all_passed else 1
    if args.what == "deviation":
        nominal = _profile(doc, game, args.policy or "optimal")
        cand = _profile(doc, game, args.candidate)
        table = compute_alpha_table(game, nominal, 1)
        cand_table = compute_alpha_table(game, cand, 1)
        rep = analysis.check_deviation_zero_memory(game, nominal, cand, table, cand_table[0, 0])
        w.writerow(["channel", "eta", "h", "lhs", "rhs", "verdict", "candidate_max_alpha"])
        for i, a in ((1, cand_table.alpha10), (2, cand_table.alpha01)):
            w.writerow([i, fmt(rep.eta[i - 1], args.digits), fmt(rep.h[i - 1], args.digits),
                        fmt(rep.lhs[i - 1], args.digits), fmt(rep.rhs[i - 1], args.digits),
                        rep.verdict(i), fmt(a.max(), args.digits)])
        return 0
    if args.what == "stability":
        prof = _profile(doc, game, args.policy or "optimal")
        w.writerow(["follower", "c", "b", "M", "mode", "candidates", "upper_bound"])
        for f in ("F1", "F2"):
            r = policies.stability_threshold(game, prof, f, args.mode)
            w.writerow([f, fmt(r.c), fmt(r.b), fmt(r.M), r.mode, r.candidates, r.upper_bound])
        return 0
    raise CliError(f"unknown check {args.what!r}")


def _grid(args):
    if args.grid:
        return [float(x) for x in args.grid.split(",")]
    return list(np.linspace(0.0, 1.0, args.steps))


def cmd_sweep(args, out):
    doc, game = _load(args)
    recs = analysis.sweep_lambda(game, args.kind, _grid(args), args.target, args.k, args.tol)
    w = _writer(out)
    w.writerow(["lambda", "percent_positive_alpha10", "percent_positive_alpha01",
                "verdict_alpha10", "verdict_alpha01"])
    for r in recs:
        w.writerow([fmt(r.lam), fmt(r.percent_positive10, 4), fmt(r.percent_positive01, 4),
                    r.verdict10, r.verdict01])
    return 0


def _ranges(text: str, n: int):
    parts = text.split(",")
    if len(parts) != n:
        raise CliError(f"expected {n} comma-separated ranges, got {text!r}")
    out = []
    for p in parts:
        lo, _, hi = p.partition("-")
        out.append((int(lo), int(hi or lo)))
    return tuple(out)


def cmd_study(args, out):
    sizes = _ranges(args.sizes, 5)
    cfg = analysis.StudyConfig(args.count, args.structure, args.seed, args.beta,
                               sizes[:3], sizes[3:], tuple(int(x) for x in args.rewards.split(":")))
    rep = analysis.random_study(cfg)
    w = _writer(out)
    if args.details:
        w.writerow(["game", "seed", "sizes", "flavour", "pos_alpha10", "neg_alpha10",
                    "pos_alpha01", "neg_alpha01", "violation"])
        for r in rep.records:
            w.writerow([r.index, f"{cfg.seed}:{r.index}", "x".join(map(str, r.sizes)), r.flavour,
                        r.positive10, r.negative10, r.positive01, r.negative01, int(r.violation)])
        out.write("\n")
    w.writerow(["structure", "count", "seed", "violations", "fraction"])
    w.writerow([cfg.structure, cfg.count, cfg.seed, rep.violations, fmt(rep.fraction, 6)])
    return 0


_REPRO = {
    "table1": [("example1_game1", "optimal", "game1"), ("example1_game2", "optimal", "game2")],
    "table2": [("example2_game1", "optimal", "game1"), ("example2_game2", "optimal", "game2")],
    "table3": [("example3", "optimal", "optimal"), ("example3", "myopic", "myopic")],
    "table4": [("example4", "optimal", "optimal"), ("example4", "kstep:3", "kstep3")],
    "table5": [("example_table5", "table5", "")],
}


def reproduce(name: str, beta: float, digits: int = 2):
    """Computed columns and the printed reference for one of the printed reference tables."""
    ref = load_reference(name)
    cols = {}
    space = None
    for spec_name, pol, prefix in _REPRO[name]:
        doc = load_spec(spec_name)
        game = doc.game.with_beta(beta)
        table = compute_alpha_table(game, _profile(doc, game, pol), 1)
        space = table.space
        p = f"{prefix}_" if prefix else ""
        cols[p + "alpha01"] = table.alpha01
        cols[p + "alpha10"] = table.alpha10
    return space, cols, ref


def cmd_reproduce(args, out):
    if not 0.0 <= args.beta < 1.0:
        raise CliError(f"discount factor out of range: beta={args.beta}")
    space, cols, ref = reproduce(args.table, args.beta)
    w = _writer(out)
    n = space.size
    half = n // 2
    w.writerow(["block", "index", "zeta"] + list(cols))
    for i in range(n):
        w.writerow([1 + i // half, i, space.label(i)] + [fmt(c[i], args.digits) for c in cols.values()])
    out.write("\n")
    w.writerow(["column", "sign_agreement_percent", "max_abs_diff"])
    for c, v in cols.items():
        w.writerow([c, fmt(sign_agreement(v, ref[c]), 1),
                    fmt(np.abs(np.round(v, 2) - ref[c]).max(), 4)])
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vodi", description=(
        "Value of distorted information for a leader facing two communicating followers."))
    sub = p.add_subparsers(dest="command", required=True)

    def spec_cmd(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("spec", help=f"spec file or bundled name ({', '.join(BUNDLED)})")
        return sp

    def common(sp, policy=True):
        if policy:
            sp.add_argument("--policy", default=None,
                            help="optimal, myopic, kstep:<k>, mix:<lambda>[:<k>] or a named "
                                 "policy from the spec (default: first named policy, else optimal)")
        sp.add_argument("--beta", type=float, default=None, help="override the discount factor")
        sp.add_argument("--agent", default="L", choices=["L", "F1", "F2"])
        sp.add_argument("--digits", type=int, default=None,
                        help="fixed decimals in output (default: full precision)")

    spec_cmd("validate", "check a spec file")
    sp = spec_cmd("solve", "follower response rules")
    common(sp)
    sp = spec_cmd("alpha", "series coefficients")
    common(sp)
    sp.add_argument("--K", type=int, default=1)
    sp.add_argument("--layout", choices=["paper", "flat"], default=None)
    sp = spec_cmd("value", "leader value at given error rates")
    common(sp)
    sp.add_argument("--eps1", type=float, default=0.0)
    sp.add_argument("--eps2", type=float, default=0.0)
    sp.add_argument("--method", choices=["series", "exact", "mc"], default="exact")
    sp.add_argument("--K", type=int, default=2)
    sp.add_argument("--episodes", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--horizon", type=int, default=None)
    sp.add_argument("--start", type=int, default=None, help="start information state (mc)")
    sp = spec_cmd("classify", "sign verdicts of the first-order coefficients")
    common(sp)
    sp.add_argument("--tol", type=float, default=0.0)

    sp = sub.add_parser("check", help="sufficient-condition checks")
    sp.add_argument("what", choices=["deviation", "isotone", "garbling", "stability"])
    sp.add_argument("spec", nargs="?", default=None)
    common(sp)
    sp.add_argument("--candidate", default="kstep:3", help="candidate profile (deviation)")
    sp.add_argument("--order", default=None, help="comma-separated states, low to high (isotone)")
    sp.add_argument("--mode", choices=[policies.FULL, policies.SINGLE_DEVIATION], default=None)
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--eps-prime", dest="eps_prime", type=float, default=0.2)
    sp.add_argument("--size", type=int, default=2, help="channel alphabet size (garbling)")
    sp.add_argument("--tol", type=float, default=1e-9)

    sp = spec_cmd("sweep", "first-order signs along a reward or policy mixture")
    common(sp, policy=False)
    sp.add_argument("--kind", choices=["reward", "policy"], required=True)
    sp.add_argument("--grid", default=None, help="comma-separated lambda values")
    sp.add_argument("--steps", type=int, default=11)
    sp.add_argument("--target", choices=["cooperative", "zero-sum"], default="cooperative")
    sp.add_argument("--k", type=int, default=3, help="lookahead of the policy-mix start")
    sp.add_argument("--tol", type=float, default=0.0)

    sp = sub.add_parser("study", help="random-game study of sign violations")
    sp.add_argument("--count", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--structure", choices=["cooperative", "zero-sum", "general"], default="general")
    sp.add_argument("--sizes", default="2-3,2-3,1-3,2-3,2-3",
                    help="ranges for |S1|,|S2|,|SF|,|AF1|,|AF2|")
    sp.add_argument("--rewards", default="-50:50", help="integer reward range lo:hi")
    sp.add_argument("--beta", type=float, default=0.9)
    sp.add_argument("--details", action="store_true", help="one row per game")

    sp = sub.add_parser("reproduce", help="recompute a printed table and compare signs")
    sp.add_argument("table", choices=REFERENCE_TABLES)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--digits", type=int, default=2)
    return p


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "alpha": cmd_alpha, "value": cmd_value,
            "classify": cmd_classify, "check": cmd_check, "sweep": cmd_sweep, "study": cmd_study,
            "reproduce": cmd_reproduce}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except SpecError as exc:
        sys.stderr.write(f"{exc}\n")
        return 1
    except (CliError, ValueError, KeyError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


def run(argv) -> tuple[int, str]:
    """Run the CLI in-process and capture stdout; usage errors return 2."""
    buf = io.StringIO()
    try:
        code = main(argv, buf)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 2
    return code, buf.getvalue()


if __name__ == "__main__":
    sys.exit(main())
