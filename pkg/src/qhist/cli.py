"""Command-line driver: ``qhist run CONFIG``, ``qhist list``."""
from __future__ import annotations

import argparse
import json
import math
import os
import shutil
import sys
import tempfile
from pathlib import Path

from . import __version__
from ._accel import backend_name, set_workers
from .config import KINDS, ConfigError, load, shipped_configs
from .experiments import BudgetExceeded, RunResult, run_experiment
from .hilbert import SizeCapError
from .phasespace import TruncationError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_CAP = 3

DESCRIPTIONS = {
    "consistency": "decoherence matrix, additivity defects and axiom sweeps for projector histories",
    "berry": "Pancharatnam phase of a Bloch circle against the step count",
    "coherent-action": "coherent-history decoherence versus the discretised action",
    "wigner-identities": "phase-space trace identities and Moyal/Poisson agreement",
    "multi-time-additivity": "marginalising a multi-time Wigner pseudo-distribution",
    "ctp-correlators": "closed-time-path correlators by chains and by finite differences",
    "stochastic-limit": "Gaussian-smeared histories and the onset of classicality",
}


def _fmt(v) -> str:
    if hasattr(v, "item") and not hasattr(v, "__len__"):
        v = v.item()  # numpy scalar -> python scalar
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _header(cfg, result: RunResult, backend: str) -> list[str]:
    tols = {"tol": 1e-9, "eps": 1e-6}
    tols.update(cfg.raw.get("tolerances", {}))
    return [
        f"# config_sha256: {cfg.digest}",
        f"# kind: {cfg.kind}",
        f"# tolerances: {json.dumps(tols, sort_keys=True)}",
        f"# truncation: {json.dumps(result.truncation, sort_keys=True)}",
        f"# seed: {cfg.seed if cfg.seed is not None else 'none'}",
        f"# backend: {backend}",
    ]


def write_outputs(cfg, result: RunResult, out_dir: Path, backend: str) -> list[Path]:
    """Write every table and ``summary.json`` atomically into ``out_dir``.

    Files go to a sibling temp directory that is renamed into place, so a
    failed run never leaves partial output behind.
    """
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.", dir=out_dir.parent))
    try:
        head = _header(cfg, result, backend)
        names = []
        for t in result.tables:
            lines = head + [",".join(t.columns)]
            lines += [",".join(_fmt(v) for v in row) for row in t.rows]
            (tmp / f"{t.name}.csv").write_text("\n".join(lines) + "\n")
            names.append(f"{t.name}.csv")
        summary = {
            "config_sha256": cfg.digest,
            "kind": cfg.kind,
            "seed": cfg.seed,
            "backend": backend,
            "tolerances": cfg.raw.get("tolerances", {}),
            "truncation": result.truncation,
            "tables": names,
            "results": result.summary,
        }
        (tmp / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2, default=_json_default)
                                          + "\n")
        if out_dir.exists():
            shutil.rmtree(out_dir)
        os.replace(tmp, out_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return [out_dir / n for n in names + ["summary.json"]]


def _json_default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _default_out(cfg, path: str) -> Path:
    out = cfg.raw.get("output", {})
    if isinstance(out, dict) and isinstance(out.get("dir"), str):
        return Path(out["dir"])
    return Path("qhist-out") / Path(path).stem


def cmd_run(args) -> int:
    path = args.config
    if not Path(path).exists() and path in shipped_configs():
        path = str(shipped_configs()[path])
    try:
        cfg = load(path)
        set_workers(cfg.workers)
        result = run_experiment(cfg)
        out = Path(args.out) if args.out else _default_out(cfg, path)
        files = write_outputs(cfg, result, out, backend_name())
    except ConfigError as exc:
        print(f"qhist: invalid config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SizeCapError, TruncationError, BudgetExceeded) as exc:
        print(f"qhist: runtime cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except Exception as exc:  # noqa: BLE001 - report and map to a status
        print(f"qhist: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    if not args.quiet:
        for f in files:
            print(f)
    return EXIT_OK


def cmd_list(args) -> int:
    configs = shipped_configs() if args.configs else {}
    width = max(map(len, [*KINDS, *configs]))
    for k in KINDS:
        print(f"{k:<{width}}  {DESCRIPTIONS[k]}")
    if configs:
        print()
        for name, p in configs.items():
            print(f"{name:<{width}}  {p}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qhist", description="Discrete quantum-histories experiments.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config", help="path to a JSON config, or the name of a shipped one")
    r.add_argument("--out", help="output directory (default: qhist-out/<config name>)")
    r.add_argument("-q", "--quiet", action="store_true", help="do not list written files")
    r.set_defaults(func=cmd_run)
    ls = sub.add_parser("list", help="list experiment kinds")
    ls.add_argument("--configs", action="store_true", help="also list shipped configs")
    ls.set_defaults(func=cmd_list)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
