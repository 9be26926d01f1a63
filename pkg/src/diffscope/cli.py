"""Command line interface.

    diffscope classify --model bessel3 --horizon both
    diffscope simulate --model bessel3 --mode smd --T 1 --paths 100000 --seed 7
    diffscope catalog [--model NAME | --table]
    diffscope validate --config model.json

Exit codes: 0 when every requested verdict (or simulation run) is
conclusive, 2 when something is inconclusive, 1 on errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .catalog import CATALOG, CATALOG_ORDER, UnknownModel, catalog_lookup
from .classifier import VERDICT_KEYS, Truth, classify
from .config import ConfigError, SchemaError, ValidationError, config_hash, parse_model_config
from .expr import ExpressionParseError

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2

HORIZON_KEYS = {
    "finite": ("nupbr_finite", "nflvr_finite", "emm_finite"),
    "infinite": ("nupbr_infinite", "nflvr_infinite", "emm_infinite"),
    "both": VERDICT_KEYS,
}


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps(doc):
    return json.dumps(_clean(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _load_document(args):
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            return json.load(fh)
    return catalog_lookup(args.model)


def _emit(text, args):
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _apply_threads():
    n = os.environ.get("DIFFSCOPE_THREADS")
    if not n:
        return
    try:
        import numba

        from . import simulator  # noqa: F401  (installs the threading-layer warning filter)

        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
    except (ValueError, ImportError):
        pass


# --- classify -----------------------------------------------------------------


def classification_report(document, horizon=None):
    """Report document for a configuration document."""
    parsed = parse_model_config(document)
    horizon = horizon or parsed.horizon
    report = classify(parsed.spec, parsed.quadrature)
    full = report.to_dict()
    keys = HORIZON_KEYS[horizon]
    doc = {
        "tool_version": __version__,
        "config_hash": config_hash(document),
        "spec_echo": document,
        "horizon": horizon,
        "natural_scale": full["natural_scale"],
        "regularity": full["regularity"],
        "boundary_reports": full["boundary_reports"],
        "verdicts": {k: full["verdicts"][k] for k in keys},
        "lemma_audit": full["lemma_audit"],
        "warnings": full["warnings"],
    }
    conclusive = all(report.verdicts[k].value is not Truth.INCONCLUSIVE for k in keys)
    return doc, conclusive


def _outcome(d):
    if d.get("reason") in ("boundary finite", "boundary infinite"):
        return "n/a"
    return d["outcome"]


def render_report_text(doc):
    lines = []
    name = doc["spec_echo"].get("name", "<config>")
    lines.append(f"model: {name}  (config {doc['config_hash'][:12]}, diffscope {doc['tool_version']})")
    lines.append(f"natural scale: {'yes' if doc['natural_scale'] else 'no'}; regularity condition: {doc['regularity']['value']}")
    for side, r in doc["boundary_reports"].items():
        lines.append(
            f"  {side:5s} b={r['b']}: {r['accessibility']}, {r['behavior']}; "
            f"beta integral {_outcome(r['beta_integral'])}, scale-speed integral {_outcome(r['scale_speed_integral'])}, "
            f"Kotani {_outcome(r['kotani_integral'])}"
        )
    lines.append("verdicts:")
    for key, v in doc["verdicts"].items():
        lines.append(f"  {key:15s} {v['value'].upper()}")
        for e in v["trace"]:
            if e["clause"] == "2.3":
                continue
            side = e["side"] or "-"
            lines.append(f"      {e['clause']:11s} {side:5s} {e['value']:12s} {e['detail']}")
    audit = ", ".join(f"{s}: {a if isinstance(a, str) else (', '.join(a) or 'consistent')}" for s, a in doc["lemma_audit"].items())
    lines.append(f"boundary consistency audit: {audit}")
    for w in doc["warnings"]:
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"


def cmd_classify(args):
    document = _load_document(args)
    doc, conclusive = classification_report(document, args.horizon)
    _emit(dumps(doc) if args.format == "json" else render_report_text(doc), args)
    return EXIT_OK if conclusive else EXIT_INCONCLUSIVE


# --- simulate -----------------------------------------------------------------


def _parse_interval(text):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}") from None
    return a, b


def simulation_document(document, mode, T=None, n_paths=None, seed=None, h=None, interval=None, exponential=False):
    from . import simulator as sim

    parsed = parse_model_config(document)
    s = parsed.simulation.merged(T=T, n_paths=n_paths, seed=seed, h=h)
    T = s.T if s.T is not None else 1.0
    n_paths = s.n_paths if s.n_paths is not None else 10000
    seed = s.seed if s.seed is not None else 0
    h = s.h if s.h is not None else 0.01
    exponential = exponential or s.exponential_holding
    spec = parsed.spec
    trunc = interval if interval is not None else s.truncation
    if mode == "exit":
        if interval is None:
            raise ValueError("--mode exit needs --interval a,b")
        grid = sim.build_grid(spec, h, interval, exit_interval=True)
        stats = sim.estimate_exit(grid, n_paths, seed, exponential=exponential).to_dict()
        valid = stats["frac_unfinished"] == 0.0
    elif mode == "smd":
        grid = sim.build_grid(spec, h, trunc)
        stats = sim.estimate_smd(grid, T, n_paths, seed, exponential=exponential).to_dict()
        valid = stats["valid"]
    elif mode == "gap":
        stats = sim.estimate_candidate_martingale_gap(spec, T, n_paths, seed, h=h, truncation=trunc, exponential=exponential).to_dict()
        valid = stats["valid"]
    else:
        grid = sim.build_grid(spec, h, trunc)
        ps = sim.simulate_paths(grid, T, n_paths, seed, exponential=exponential)
        fx = ps.final_x
        stats = {
            "n_paths": ps.n_paths,
            "T": T,
            "seed": seed,
            "mean_X_T": float(np.mean(fx)),
            "endpoint_quantiles": {str(q): float(np.quantile(fx, q)) for q in (0.01, 0.1, 0.5, 0.9, 0.99)},
            "frac_absorbed": float(np.mean(ps.end_kind == sim.ABSORBING)),
            "frac_contaminated": ps.contamination,
            "mean_steps": float(np.mean(ps.n_steps)),
            "endpoint_samples": fx[:20],
            "grid": grid.metadata(),
        }
        valid = ps.contamination <= sim.MAX_CONTAMINATION
    doc = {
        "tool_version": __version__,
        "config_hash": config_hash(document),
        "model": document.get("name"),
        "mode": mode,
        "settings": {"T": T, "n_paths": n_paths, "seed": seed, "h": h, "truncation": trunc, "exponential_holding": exponential},
        "valid": bool(valid),
        "stats": stats,
    }
    return doc, bool(valid)


def render_simulation_text(doc):
    lines = [f"model: {doc['model']}  mode: {doc['mode']}  settings: {json.dumps(_clean(doc['settings']), sort_keys=True)}"]
    st = doc["stats"]
    for key in ("mean_Z_T", "std_err_Z_T", "mean_exit_time", "std_err", "frac_upper", "gap", "mean_X_T",
                "frac_absorbed", "frac_contaminated", "frac_Z_below", "mean_quadratic_term"):
        if key in st:
            lines.append(f"  {key:20s} {st[key]}")
    lines.append(f"  valid: {doc['valid']}")
    return "\n".join(lines) + "\n"


def cmd_simulate(args):
    _apply_threads()
    document = _load_document(args)
    doc, valid = simulation_document(document, args.mode, args.T, args.paths, args.seed, args.h, args.interval, args.exponential)
    _emit(dumps(doc) if args.format == "json" else render_simulation_text(doc), args)
    return EXIT_OK if valid else EXIT_INCONCLUSIVE


# --- catalog / validate -------------------------------------------------------


def catalog_table():
    rows = []
    for name in CATALOG_ORDER:
        document = catalog_lookup(name)
        doc, _ = classification_report(document, "both")
        rows.append({"model": name, **{k: v["value"] for k, v in doc["verdicts"].items()}})
    return rows


def cmd_catalog(args):
    if args.model:
        _emit(dumps(catalog_lookup(args.model)), args)
        return EXIT_OK
    if args.table:
        rows = catalog_table()
        if args.format == "json":
            _emit(dumps({"tool_version": __version__, "table": rows}), args)
        else:
            head = f"{'model':24s}" + "".join(f"{k:>16s}" for k in VERDICT_KEYS)
            body = [f"{r['model']:24s}" + "".join(f"{r[k]:>16s}" for k in VERDICT_KEYS) for r in rows]
            _emit("\n".join([head] + body) + "\n", args)
        inconclusive = any(r[k] == Truth.INCONCLUSIVE.value for r in rows for k in VERDICT_KEYS)
        return EXIT_INCONCLUSIVE if inconclusive else EXIT_OK
    names = {n: " ".join((CATALOG[n].__doc__ or "").split("\n\n")[0].split()) for n in CATALOG}
    if args.format == "json":
        _emit(dumps({"models": names}), args)
    else:
        _emit("".join(f"{n:18s} {d}\n" for n, d in names.items()), args)
    return EXIT_OK


def cmd_validate(args):
    document = _load_document(args)
    try:
        parse_model_config(document)
        violations = []
    except (SchemaError, ValidationError) as exc:
        violations = [{"pointer": p, "message": m} for p, m in exc.errors]
    except ExpressionParseError as exc:
        violations = [{"pointer": exc.pointer or "", "message": str(exc), "position": exc.position}]
    doc = {"valid": not violations, "errors": violations, "config_hash": config_hash(document)}
    if args.format == "json":
        _emit(dumps(doc), args)
    else:
        text = "valid\n" if not violations else "".join(f"{v['pointer'] or '/'}: {v['message']}\n" for v in violations)
        _emit(text, args)
    return EXIT_OK if not violations else EXIT_ERROR


# --- entry point ----------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="diffscope", description="No-arbitrage diagnostics for diffusion price models.")
    p.add_argument("--version", action="version", version=f"diffscope {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, source_required=True):
        src = sp.add_mutually_exclusive_group(required=source_required)
        src.add_argument("--model", help="catalog model, e.g. 'gbm(mu=0.05,sigma=0.2)'")
        src.add_argument("--config", metavar="PATH", help="model configuration JSON file")
        sp.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
        sp.add_argument("--format", choices=("json", "text"), default="json")

    c = sub.add_parser("classify", help="decide NUPBR / NFLVR / EMM")
    common(c)
    c.add_argument("--horizon", choices=("finite", "infinite", "both"), default=None)
    c.set_defaults(func=cmd_classify)

    s = sub.add_parser("simulate", help="Monte Carlo cross-checks")
    common(s)
    s.add_argument("--mode", choices=("smd", "exit", "paths", "gap"), default="smd")
    s.add_argument("--T", type=float, default=None)
    s.add_argument("--paths", type=int, default=None)
    s.add_argument("--h", type=float, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--interval", type=_parse_interval, default=None, help="a,b: exit interval (exit mode) or truncation")
    s.add_argument("--exponential", action="store_true", help="exponential instead of deterministic holding times")
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("catalog", help="list catalog models, dump one, or print the verdict table")
    common(g, source_required=False)
    g.add_argument("--table", action="store_true")
    g.set_defaults(func=cmd_catalog)

    v = sub.add_parser("validate", help="check a model configuration")
    common(v)
    v.set_defaults(func=cmd_validate)
    return p


def _join_interval(argv):
    """Let ``--interval -1,1`` through argparse, which would read ``-1,1`` as a flag."""
    out = list(argv)
    for i, a in enumerate(out[:-1]):
        if a == "--interval":
            out[i:i + 2] = [f"--interval={out[i + 1]}"]
            break
    return out


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(_join_interval(sys.argv[1:] if argv is None else argv))
    try:
        return args.func(args)
    except UnknownModel as exc:
        print(f"error: {exc}", file=sys.stderr)
    except ExpressionParseError as exc:
        where = f"{exc.pointer}: " if exc.pointer else ""
        print(f"error: {where}{exc}", file=sys.stderr)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
