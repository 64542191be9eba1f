"""Command line interface: ``flatdimers <command> ...``.

Output is JSON (default) or CSV, written to ``--out`` or stdout. Nothing time
or host dependent is printed, so repeated runs are byte-identical. Exit code is
0 when every invariant gate of the command passes, 1 when a gate fails and 2 on
bad input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import warnings

import numpy as np

from . import experiments as ex
from .graph import DimerGraph, build_graph
from .height import sector_distribution
from .hodge import PeriodMatrix, period_matrix
from .kasteleyn import build_K, signed_partition_functions
from .sampler import McmcConfig, initial_cover, sample_histogram
from .surface import SurfaceError, cut_system, homology_basis, load_surface
from .cff import DegenerateOmegaError, predicted_ratios
from .theta import theta


class InputError(ValueError):
    pass


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, default=_default) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def _emit(args, text: str):
    out = getattr(args, "out", None)
    if out and out != "-":
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(args, default="json"):
    return args.fmt or default


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _load_graph(path) -> DimerGraph:
    try:
        return DimerGraph.from_dict(_read_json(path))
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _load_omega(path) -> np.ndarray:
    d = _read_json(path)
    try:
        return PeriodMatrix.omega_from_dict(d)
    except KeyError as exc:
        raise InputError(f"{path}: missing {exc}") from exc


def _vector(text) -> np.ndarray:
    """Comma separated numbers, inline or from a file."""
    if os.path.exists(text):
        with open(text) as fh:
            text = fh.read()
    toks = [t for t in text.replace("\n", ",").replace(" ", "").split(",") if t]
    try:
        return np.array([complex(t.replace("i", "j")) for t in toks])
    except ValueError as exc:
        raise InputError(f"cannot parse vector {text!r}") from exc


def _real(v) -> np.ndarray:
    if np.any(np.abs(np.imag(v)) > 0):
        raise InputError("characteristics must be real")
    return np.real(v).astype(float)


def _load_q0(path):
    d = _read_json(path)
    if isinstance(d, dict) and "q0_chars" in d:
        d = d["q0_chars"]
    if isinstance(d, dict):
        d = [d.get("a0"), d.get("b0")]
    try:
        a0, b0 = (np.asarray(x, dtype=float) for x in d)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: expected [a0, b0] or {{'a0':..,'b0':..}}") from exc
    return a0, b0


def _surface(name):
    try:
        return load_surface(name)
    except OSError as exc:
        raise InputError(f"no bundled surface or file named {name!r}") from exc


# -- commands ---------------------------------------------------------------------

def cmd_surface_info(args) -> int:
    s = _surface(args.spec)
    info = s.info()
    ok = not info["violations"]
    try:
        hb = homology_basis(s)
        J = hb.intersection_matrix()
        g = hb.genus
        Jstd = np.block([[np.zeros((g, g)), np.eye(g)], [-np.eye(g), np.zeros((g, g))]])
        info["basis"] = {"paths": [None if p is None else [int(h) for h in p] for p in hb.paths()],
                         "intersection_matrix": J.tolist()}
        ok &= bool(np.array_equal(J, Jstd))
        cs = cut_system(s)
        info["cuts"] = {"paths": [list(map(int, p)) for p in cs.paths],
                        "pairs": [list(map(int, p)) for p in cs.pairs]}
        info["q0_values"] = [int(x) for x in hb.q0_values(cs)]
    except SurfaceError as exc:
        info["error"] = str(exc)
        ok = False
    info["passed"] = bool(ok)
    _emit(args, dumps(info))
    return 0 if ok else 1


def cmd_graph_build(args) -> int:
    s = _surface(args.spec) if args.spec else None
    g = build_graph(args.family, args.n, s)
    ok = g.n_white == g.n_black and g.euler_characteristic() == 2 - 2 * g.genus
    ok &= bool(np.all(np.bincount(g.edge_w, minlength=g.n_white) > 0))
    text = g.to_json() + "\n"
    _emit(args, text)
    if args.out and args.out != "-":
        summary = {"file": os.path.basename(args.out), "n_white": g.n_white, "n_edges": g.n_edges,
                   "genus": g.genus, "passed": bool(ok)}
        sys.stdout.write(dumps(summary))
    return 0 if ok else 1


def cmd_z_table(args) -> int:
    g = _load_graph(args.graph)
    K = build_K(g)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sp = signed_partition_functions(K)
    gg = g.genus
    total = float(np.sum(sp.signed_ratios) / 2 ** gg)
    ok = abs(total - 1) < 1e-9 and sp.imag_residual < 1e-8
    rows = []
    for l, s, r, (ph, la) in zip(sp.twists, sp.arf_signs, sp.ratios, sp.dets):
        rows.append({"l_a": list(l.a), "l_b": list(l.b), "arf_sign": int(s),
                     "det_phase_re": float(np.round(np.real(ph), 12)),
                     "det_phase_im": float(np.round(np.imag(ph), 12)),
                     "log_abs_det": float(np.round(la, 10)),
                     "ratio": float(np.round(np.real(r), 12)),
                     "signed_ratio": float(np.round(s * np.real(r), 12))})
    if _fmt(args, "csv") == "csv":
        header = [f"l_a{i+1}" for i in range(gg)] + [f"l_b{i+1}" for i in range(gg)] + \
            ["arf_sign", "det_phase_re", "det_phase_im", "log_abs_det", "ratio", "signed_ratio",
             "log_Z", "eps_re", "eps_im"]
        data = [r["l_a"] + r["l_b"] + [r["arf_sign"], r["det_phase_re"], r["det_phase_im"],
                                       r["log_abs_det"], r["ratio"], r["signed_ratio"],
                                       float(np.round(sp.log_Z, 10)), float(np.round(sp.eps.real, 12)),
                                       float(np.round(sp.eps.imag, 12))] for r in rows]
        _emit(args, _csv(header, data))
    else:
        _emit(args, dumps({"rows": rows, "log_Z": float(np.round(sp.log_Z, 10)),
                           "eps": [float(np.round(sp.eps.real, 12)), float(np.round(sp.eps.imag, 12))],
                           "q0": [list(map(float, x)) for x in sp.q0], "sum_rule": round(total, 12),
                           "passed": bool(ok)}))
    return 0 if ok else 1


def cmd_sectors(args) -> int:
    g = _load_graph(args.graph)
    K = build_K(g)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            st = sector_distribution(K, M=args.M, tol=args.tol)
    except ValueError as exc:
        sys.stderr.write(f"sectors: {exc}\n")
        return 1
    gg = g.genus
    ok = abs(float(st.probs.sum()) - 1) < 1e-8
    if _fmt(args, "csv") == "csv":
        header = [f"m_A{i+1}" for i in range(gg)] + [f"m_B{i+1}" for i in range(gg)] + ["probability", "q0"]
        data = [list(map(int, m)) + [float(np.round(p, 14)), int(q)]
                for m, p, q in zip(st.periods, st.probs, st.q0_values)]
        _emit(args, _csv(header, data))
    else:
        _emit(args, dumps({"M": st.M, "boundary_mass": float(f"{st.boundary_mass:.3e}"),
                           "sectors": [{"m": list(map(int, m)), "probability": float(np.round(p, 14)),
                                        "q0": int(q)} for m, p, q in zip(st.periods, st.probs, st.q0_values)],
                           "passed": bool(ok)}))
    return 0 if ok else 1


def cmd_sample(args) -> int:
    g = _load_graph(args.graph)
    steps = int(float(args.steps))
    burn = args.burn_in if args.burn_in is not None else min(10_000, steps // 10)
    cfg = McmcConfig(steps=steps, burn_in=burn, seed=args.seed, loop_prob=args.loop_prob,
                     chains=args.chains)
    K = build_K(g)
    start = initial_cover(g, args.seed)
    h = sample_histogram(g, cfg, K.alpha_G, start=start)
    ok = h.n > 0 and start.is_valid(g)
    gg = g.genus
    if _fmt(args, "csv") == "csv":
        header = [f"m_A{i+1}" for i in range(gg)] + [f"m_B{i+1}" for i in range(gg)] + ["count", "frequency"]
        data = [list(k) + [v, v / h.n] for k, v in sorted(h.counts.items())]
        _emit(args, _csv(header, data))
    else:
        _emit(args, dumps({"config": {"steps": steps, "burn_in": burn, "seed": args.seed,
                                      "loop_prob": args.loop_prob, "chains": args.chains},
                           "samples": h.n,
                           "histogram": [{"m": list(k), "count": v} for k, v in sorted(h.counts.items())],
                           "passed": bool(ok)}))
    return 0 if ok else 1


def cmd_period_matrix(args) -> int:
    s = _surface(args.spec)
    P = period_matrix(s, args.mesh, richardson=not args.no_richardson)
    d = P.to_dict()
    d["richardson"] = not args.no_richardson
    ok = P.cholesky_ok and P.symmetry_residual < 1e-4 and P.bilinear_residual < 1e-3
    d["passed"] = bool(ok)
    _emit(args, dumps(d))
    return 0 if ok else 1


def cmd_theta(args) -> int:
    Om = _load_omega(args.omega)
    g = len(Om)
    a, b = _real(_vector(args.char[0])), _real(_vector(args.char[1]))
    z = _vector(args.z)
    if len(z) == 1:
        z = np.full(g, z[0])
    if len(a) != g or len(b) != g or len(z) != g:
        raise InputError(f"characteristics and z must have length g = {g}")
    v = theta(a, b, z, Om)
    _emit(args, dumps({"a": a.tolist(), "b": b.tolist(), "z": [[x.real, x.imag] for x in z],
                       "theta": [v.real, v.imag], "passed": bool(np.isfinite(v))}))
    return 0


def cmd_predict_ratios(args) -> int:
    Om = _load_omega(args.omega)
    q0 = _load_q0(args.q0)
    try:
        pred = predicted_ratios(Om, q0)
    except DegenerateOmegaError as exc:
        sys.stderr.write(f"predict-ratios: {exc}\n")
        return 1
    g = len(Om)
    total = sum(pred.values()) / 2 ** g
    ok = abs(total - 1) < 1e-12
    if _fmt(args, "csv") == "csv":
        header = [f"l_a{i+1}" for i in range(g)] + [f"l_b{i+1}" for i in range(g)] + ["prediction"]
        data = [list(la) + list(lb) + [float(np.round(v, 14))] for (la, lb), v in sorted(pred.items())]
        _emit(args, _csv(header, data))
    else:
        _emit(args, dumps({"predictions": [{"l_a": list(la), "l_b": list(lb), "value": float(np.round(v, 14))}
                                           for (la, lb), v in sorted(pred.items())],
                           "passed": bool(ok)}))
    return 0 if ok else 1


def _report_exit(args, rep) -> int:
    _emit(args, dumps(rep))
    return 0 if rep["passed"] else 1


def cmd_bosonization(args) -> int:
    omegas = None
    if args.omega:
        Om = _load_omega(args.omega)
        omegas = {os.path.basename(args.omega): (Om, args.tol)}
    return _report_exit(args, ex.run_bosonization_suite(omegas, R=args.R, seed=args.seed, trials=args.trials))


def cmd_ratio_study(args) -> int:
    return _report_exit(args, ex.run_ratio_study(args.spec, tuple(args.n), args.mesh, args.tol))


def cmd_oracle_suite(args) -> int:
    return _report_exit(args, ex.run_oracle_suite(tol=args.tol, corrupt_edge=args.corrupt_edge))


def cmd_hex_control(args) -> int:
    return _report_exit(args, ex.run_hex_control(args.N, args.mesh, args.tol))


def cmd_sector_validation(args) -> int:
    return _report_exit(args, ex.run_sector_validation(args.N, int(float(args.steps)), args.seed, args.tol))


# -- parser ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flatdimers", description=__doc__.splitlines()[0])
    fmt = argparse.ArgumentParser(add_help=False)
    grp = fmt.add_mutually_exclusive_group()
    grp.add_argument("--json", dest="fmt", action="store_const", const="json", help="JSON output")
    grp.add_argument("--csv", dest="fmt", action="store_const", const="csv", help="CSV output")
    fmt.add_argument("--out", default=None, help="output file (default stdout)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("surface", help="surface documents")
    ss = s.add_subparsers(dest="action", required=True)
    si = ss.add_parser("info", parents=[fmt], help="genus, cones, basis and cuts")
    si.add_argument("spec", nargs="?", default=None)
    si.add_argument("--spec", dest="spec_opt", default=None)
    si.set_defaults(func=cmd_surface_info)

    gp = sub.add_parser("graph", help="dimer graphs")
    gs = gp.add_subparsers(dest="action", required=True)
    gb = gs.add_parser("build", parents=[fmt], help="build a graph and write its JSON")
    gb.add_argument("--spec", default=None, help="surface (bundled name or file); unused for hex-torus")
    gb.add_argument("--family", required=True, choices=["hex-torus", "square-pillow"])
    gb.add_argument("--n", type=int, required=True)
    gb.set_defaults(func=cmd_graph_build)

    z = sub.add_parser("z-table", parents=[fmt], help="twisted determinants and signed ratios")
    z.add_argument("--graph", required=True)
    z.set_defaults(func=cmd_z_table)

    se = sub.add_parser("sectors", parents=[fmt], help="exact law of the height periods")
    se.add_argument("--graph", required=True)
    se.add_argument("--M", type=int, default=None, help="Fourier box radius (default adaptive)")
    se.add_argument("--tol", type=float, default=1e-9)
    se.set_defaults(func=cmd_sectors)

    sa = sub.add_parser("sample", parents=[fmt], help="MCMC histogram of the height periods")
    sa.add_argument("--graph", required=True)
    sa.add_argument("--steps", default="1e5")
    sa.add_argument("--burn-in", type=int, default=None)
    sa.add_argument("--seed", type=int, default=0)
    sa.add_argument("--loop-prob", type=float, default=0.2)
    sa.add_argument("--chains", type=int, default=1)
    sa.set_defaults(func=cmd_sample)

    pm = sub.add_parser("period-matrix", parents=[fmt], help="discrete Hodge period matrix")
    pm.add_argument("--spec", required=True)
    pm.add_argument("--mesh", type=int, default=32)
    pm.add_argument("--no-richardson", action="store_true")
    pm.set_defaults(func=cmd_period_matrix)

    th = sub.add_parser("theta", parents=[fmt], help="theta function with characteristics")
    th.add_argument("--omega", required=True)
    th.add_argument("--char", nargs=2, required=True, metavar=("A", "B"))
    th.add_argument("--z", default="0")
    th.set_defaults(func=cmd_theta)

    pr = sub.add_parser("predict-ratios", parents=[fmt], help="theta predictions of signed ratios")
    pr.add_argument("--omega", required=True)
    pr.add_argument("--q0", required=True, help="JSON [a0, b0], {a0, b0} or a graph file")
    pr.set_defaults(func=cmd_predict_ratios)

    bo = sub.add_parser("bosonization-check", parents=[fmt], help="lattice sum vs theta side")
    bo.add_argument("--omega", default=None, help="omega JSON (default: the built-in set)")
    bo.add_argument("--R", type=int, default=10)
    bo.add_argument("--seed", type=int, default=0)
    bo.add_argument("--trials", type=int, default=4)
    bo.add_argument("--tol", type=float, default=1e-5)
    bo.set_defaults(func=cmd_bosonization)

    rs = sub.add_parser("ratio-study", parents=[fmt], help="signed ratios on refinements vs predictions")
    rs.add_argument("--spec", default="pillow_g2")
    rs.add_argument("--n", type=int, nargs="+", default=[1, 2, 4, 8])
    rs.add_argument("--mesh", type=int, default=32)
    rs.add_argument("--tol", type=float, default=0.05)
    rs.set_defaults(func=cmd_ratio_study)

    os_ = sub.add_parser("oracle-suite", parents=[fmt], help="Kasteleyn expansion against enumeration")
    os_.add_argument("--tol", type=float, default=1e-10)
    os_.add_argument("--corrupt-edge", type=int, default=None, help="flip one sign (self-test)")
    os_.set_defaults(func=cmd_oracle_suite)

    hc = sub.add_parser("hex-control", parents=[fmt], help="genus one control on the hexagonal torus")
    hc.add_argument("--N", type=int, default=24)
    hc.add_argument("--mesh", type=int, default=8)
    hc.add_argument("--tol", type=float, default=0.02)
    hc.set_defaults(func=cmd_hex_control)

    sv = sub.add_parser("sector-validation", parents=[fmt], help="exact sector law vs MCMC")
    sv.add_argument("--N", type=int, default=6)
    sv.add_argument("--steps", default="1e6")
    sv.add_argument("--seed", type=int, default=7)
    sv.add_argument("--tol", type=float, default=0.05)
    sv.set_defaults(func=cmd_sector_validation)
    return p


def main(argv=None) -> int:
    p = build_parser()
    args = p.parse_args(argv)
    if args.command == "surface":
        args.spec = args.spec_opt or args.spec
        if not args.spec:
            p.error("surface info needs a spec")
    try:
        return args.func(args)
    except (InputError, SurfaceError, ValueError) as exc:
        sys.stderr.write(f"flatdimers {args.command}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
