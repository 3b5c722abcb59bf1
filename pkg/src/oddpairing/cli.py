"""Command-line entry point: ``oddpairing {localize,sweep,verify,models,export}``.

Exit codes: 0 success or oracle match, 1 other error, 2 oracle mismatch or a
certified row deviating in a sweep, 3 localizer gap closed, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import scipy
import scipy.io

from . import __version__
from .checks import SUITES
from .clifford import build_clifford
from .errors import GapBoundViolated, GapClosed, NotAnIndex, OracleDisagreement, PairingError
from .inertia import DEFAULT_TOLERANCE, eig_inertia
from .lattice import ball_projection, build_dirac, hardy_projection, restrict, write_matrix_market
from .localizer import (CSV_COLUMNS, ambient_box, assemble, check_regime, constancy_violations, localize, sweep,
                        write_csv)
from .models import GALLERY, get_model, index_from_winding, resolve_norms, winding_oracle_1d, winding_oracle_3d
from .toeplitz import IndexReport, consensus

EXIT_OK, EXIT_ERROR, EXIT_MISMATCH, EXIT_GAP, EXIT_USAGE = 0, 1, 2, 3, 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    if isinstance(text, list):
        return text
    return [float(eval_fraction(t)) for t in str(text).replace(" ", "").split(",") if t]


def eval_fraction(t: str) -> float:
    """Parse '0.5', '1/12' or '1e-3'."""
    if "/" in t:
        num, den = t.split("/", 1)
        return float(num) / float(den)
    return float(t)


def _model_args(p):
    p.add_argument("--model", help="gallery model name (see 'models')")
    p.add_argument("--m", type=int, help="shift power for the shift model")
    p.add_argument("--mu", type=float, help="mass parameter for chiral_3d")


def read_config(path) -> dict:
    """key = value lines; '#' starts a comment; keys use flag names without dashes."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line without '=': {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="oddpairing", description="Odd index pairings from the spectral localizer.")
    ap.add_argument("--version", action="version", version=f"oddpairing {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--config", help="key=value file; command-line flags take precedence")
    common.add_argument("--manifest", help="write a JSON run manifest here ('-' for stdout)")

    p = sub.add_parser("localize", parents=[common], help="half-signature of one localizer")
    _model_args(p)
    p.add_argument("--kappa", type=eval_fraction)
    p.add_argument("--rho", type=float)
    p.add_argument("--mode", choices=("ball", "cube"), default="ball")
    p.add_argument("--oracle", choices=("consensus", "symbol", "none"), default="consensus",
                   help="index oracle to compare against (symbol = winding or degree only)")
    p.add_argument("--single-precision", action="store_true", help="complex64 sparse factorization")

    p = sub.add_parser("sweep", parents=[common], help="localizer over a kappa x rho grid, CSV output")
    _model_args(p)
    p.add_argument("--kappas", type=_floats)
    p.add_argument("--rhos", type=_floats)
    p.add_argument("--modes", default="ball", help="comma list of ball,cube")
    p.add_argument("--oracle", choices=("consensus", "symbol", "none"), default="consensus")
    p.add_argument("--csv", help="CSV output path (default stdout)")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("verify", parents=[common], help="property suites")
    p.add_argument("suite", choices=("taper", "axioms", "proofchain", "all"))
    _model_args(p)
    p.add_argument("--kappa", type=eval_fraction, default=1 / 12)
    p.add_argument("--rho", type=float, default=25.0)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rhos", type=_floats, default=[8.0, 16.0, 32.0])

    sub.add_parser("models", parents=[common], help="list the model gallery")

    p = sub.add_parser("export", parents=[common], help="Matrix Market dump of A, D, Pi and L")
    _model_args(p)
    p.add_argument("--kappa", type=eval_fraction)
    p.add_argument("--rho", type=float)
    p.add_argument("--mode", choices=("ball", "cube"), default="ball")
    p.add_argument("--out", default=".")
    return ap


def parse_args(argv=None) -> argparse.Namespace:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "config", None):
        cfg = read_config(args.config)
        sub = ap._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known
        if unknown:
            ap.error(f"unknown config keys: {', '.join(sorted(unknown))}")
        sub.set_defaults(**cfg)
        args = ap.parse_args(argv)
    return args


# --- helpers -----------------------------------------------------------------------

def _model(args):
    if not args.model:
        raise ValueError("--model is required")
    params = {}
    if args.m is not None:
        params["m"] = args.m
    if args.mu is not None:
        params["mu"] = args.mu
    return get_model(args.model, **params)


def _oracle(model, kind) -> IndexReport | None:
    if kind == "none":
        return None
    if kind == "symbol":
        if model.d == 1:
            w = winding_oracle_1d(model)
            return IndexReport("winding_1d", index_from_winding(1, w), {"winding": w})
        return IndexReport("degree_3d", winding_oracle_3d(model), {"grid": 24})
    return consensus(model)


def _versions() -> dict:
    return {"oddpairing": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _manifest(args, argv, **fields) -> dict:
    base = {"command_line": ["oddpairing", *argv], "command": args.command, "versions": _versions(),
            "tolerances": {"inertia_relative": DEFAULT_TOLERANCE, "zero_threshold_certified": "g/4",
                           "zero_threshold_heuristic": "1e-10 * ||L||_1", "heuristic_gap_floor": "max(g/2, 10 u dim)"}}
    base.update(fields)
    return base


def _emit_manifest(path, manifest):
    if not path:
        return
    text = json.dumps(manifest, sort_keys=True, indent=2, default=_jsonable) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "as_dict"):
        return obj.as_dict()
    return str(obj)


def _result_dict(res) -> dict:
    reg = res.regime
    return {"mode": res.mode, "dimension": res.dimension, "seconds": res.seconds, "row": res.row(),
            "regime": {"label": reg.label, "kappa0": reg.kappa0, "g": reg.g, "certified": reg.certified,
                       "heuristic": reg.heuristic, "gap": reg.gap_measured},
            "inertia": res.inertia.as_dict() | {"certificate": res.inertia.certificate}}


def _model_dict(model) -> dict:
    return {"name": model.name, "params": dict(model.params), "d": model.d, "range": model.b,
            "fiber": model.fiber, "declared_norms": model.declared.as_dict()}


# --- commands ----------------------------------------------------------------------

def _kappa_zero(model, rho, mode):
    """kappa = 0: report the signature of [[0, A], [A*, 0]] without calling it an index."""
    A = model.build(ambient_box(model, rho, mode))
    D = build_dirac(A.box, build_clifford(A.box.d))
    proj = ball_projection(D, rho, mode)
    L = assemble(restrict(A, proj), restrict(D, proj), 0.0).matrix
    res = eig_inertia(L, zero_threshold=DEFAULT_TOLERANCE * max(1.0, np.abs(L).sum(axis=0).max()))
    warnings.warn("kappa = 0 drops the Dirac term (it forces rho = infinity); the signature is not an index",
                  NotAnIndex, stacklevel=2)
    return res


def cmd_localize(args, argv) -> int:
    model = _model(args)
    if args.kappa is None or args.rho is None:
        raise ValueError("--kappa and --rho are required")
    t0 = time.perf_counter()
    if args.kappa == 0:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            res = _kappa_zero(model, args.rho, args.mode)
        for w in caught:
            print(f"warning: {w.category.__name__}: {w.message}", file=sys.stderr)
        print(f"signature {res.signature} (n+={res.n_plus}, n-={res.n_minus}, n0={res.n_zero}); not an index")
        _emit_manifest(args.manifest, _manifest(args, argv, model=_model_dict(model), kappa=0.0, rho=args.rho,
                                                result={"inertia": res.as_dict(), "warning": "NotAnIndex"},
                                                seconds=time.perf_counter() - t0))
        return EXIT_OK
    oracle = _oracle(model, args.oracle)
    res = localize(model, args.kappa, args.rho, mode=args.mode, dtype=np.complex64 if args.single_precision else None,
                   oracle_index=None if oracle is None else oracle.value)
    reg = res.regime
    print(f"model {model.name} {dict(model.params)} kappa={args.kappa:g} rho={args.rho:g} mode={args.mode} "
          f"dim={res.dimension}")
    print(f"half-signature {res.half_signature}  regime {reg.label}  gap {reg.gap_measured:.6g}  "
          f"(kappa0={reg.kappa0:.6g}, g={reg.g:g})")
    if oracle is not None:
        print(f"oracle {oracle.method} {oracle.value}  {'match' if res.match else 'MISMATCH'}")
    _emit_manifest(args.manifest, _manifest(args, argv, model=_model_dict(model), kappa=args.kappa, rho=args.rho,
                                            result=_result_dict(res), oracle=oracle,
                                            seconds=time.perf_counter() - t0))
    return EXIT_MISMATCH if res.match is False else EXIT_OK


def cmd_sweep(args, argv) -> int:
    model = _model(args)
    if not args.kappas or not args.rhos:
        raise ValueError("--kappas and --rhos must be nonempty")
    modes = tuple(m for m in str(args.modes).split(",") if m)
    t0 = time.perf_counter()
    oracle = _oracle(model, args.oracle)
    results = sweep(model, args.kappas, args.rhos, modes, oracle_index=None if oracle is None else oracle.value,
                    workers=args.workers)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            write_csv(results, fh)
    else:
        sys.stdout.write(write_csv(results))
    certified = [r for r in results if r.regime.certified]
    deviating = constancy_violations(results) + [r for r in certified if r.match is False]
    if not certified:
        print("warning: no certified (kappa, rho) pair in the grid; rows are heuristic or unverified",
              file=sys.stderr)
    ints = sorted({r.half_signature for r in results})
    print(f"rows {len(results)}  certified {len(certified)}  half-signatures {ints}  deviations {len(deviating)}",
          file=sys.stderr)
    _emit_manifest(args.manifest, _manifest(args, argv, model=_model_dict(model), kappas=args.kappas, rhos=args.rhos,
                                            modes=list(modes), oracle=oracle, csv_columns=list(CSV_COLUMNS),
                                            results=[_result_dict(r) for r in results],
                                            seconds=time.perf_counter() - t0))
    return EXIT_MISMATCH if deviating else EXIT_OK


def cmd_verify(args, argv) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    checks = {}
    t0 = time.perf_counter()
    for name in names:
        if name == "taper":
            out = SUITES[name](rhos=tuple(args.rhos))
        elif name == "axioms":
            out = SUITES[name](instances=args.instances, seed=args.seed)
        else:
            model = _model(args) if args.model else None
            out = SUITES[name](model, args.kappa, args.rho)
        for c in out:
            print(f"[{name}] {c.line()}")
        checks[name] = out
    ok = all(c.passed for out in checks.values() for c in out)
    _emit_manifest(args.manifest, _manifest(args, argv, seed=args.seed, instances=args.instances,
                                            checks={k: [c.__dict__ for c in v] for k, v in checks.items()},
                                            seconds=time.perf_counter() - t0))
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_models(args, argv) -> int:
    for name, (factory, desc) in GALLERY.items():
        print(f"{name:10s} {desc}")
    return EXIT_OK


def cmd_export(args, argv) -> int:
    model = _model(args)
    if args.kappa is None or args.rho is None:
        raise ValueError("--kappa and --rho are required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    A = model.build(ambient_box(model, args.rho, args.mode))
    D = build_dirac(A.box, build_clifford(A.box.d))
    proj = ball_projection(D, args.rho, args.mode)
    norms = resolve_norms(A, D, proj)
    write_matrix_market(A, out / "A.mtx")
    write_matrix_market(D, out / "D.mtx")
    write_matrix_market(hardy_projection(D), out / "Pi.mtx")
    L = assemble(restrict(A, proj, dense=False), restrict(D, proj, dense=False), args.kappa).matrix
    reg = check_regime(args.kappa, args.rho, norms)
    meta = {"kappa": args.kappa, "rho": args.rho, "mode": args.mode, "rows": proj.rows.tolist(),
            "regime": reg.label}
    scipy.io.mmwrite(out / "L.mtx", L.tocoo(), comment="oddpairing " + json.dumps(meta, sort_keys=True),
                     field="complex", symmetry="hermitian")
    print(f"wrote A.mtx D.mtx Pi.mtx L.mtx to {out} (L dimension {L.shape[0]}, regime {reg.label})")
    _emit_manifest(args.manifest, _manifest(args, argv, model=_model_dict(model), kappa=args.kappa, rho=args.rho,
                                            files=["A.mtx", "D.mtx", "Pi.mtx", "L.mtx"], dimension=L.shape[0]))
    return EXIT_OK


COMMANDS = {"localize": cmd_localize, "sweep": cmd_sweep, "verify": cmd_verify, "models": cmd_models,
            "export": cmd_export}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parse_args(argv)
    try:
        return COMMANDS[args.command](args, argv)
    except GapClosed as exc:
        print(f"error: GapClosed: {exc}", file=sys.stderr)
        return EXIT_GAP
    except OracleDisagreement as exc:
        print(f"error: OracleDisagreement: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except GapBoundViolated as exc:
        print(f"error: GapBoundViolated: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (PairingError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
