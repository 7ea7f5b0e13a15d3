"""Command-line surface: synth / verify / simulate / export.

Exit codes: 0 success, 1 usage or I/O error, 2 synthesis or verification
failure.  All commands are deterministic under a fixed seed; a config
file (--config run.json) may supply any flag, with explicit flags taking
precedence.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .criterion import derive_constraints
from .poly import format_fraction, parse_fraction
from .sets import ModelError, TemplateSet, parse_model, parse_templates
from .synth import (SynthOptions, controller_from_json, parse_controller,
                    recheck_certificate, serialize_controller, synthesize)
from .verify import (boundary_sample_check, export_qepcad, export_smtlib2,
                     falsify_report, simulate, trajectory_csv)
from .sets import progress_region


@dataclass
class RunConfig:
    command: str
    model: str | None = None
    templates: str | None = None
    controller: str | None = None
    backend: str = "cegis"
    seed: int = 0
    samples: int = 2000
    rounds: int = 12
    horizon: float = 100.0
    dt: float = 1e-3
    runs: int = 1
    fmt: str = "smtlib2"
    out: str | None = None
    threads: int = 1


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cisynth",
        description="switching controller synthesis via continuous "
                    "invariant generation")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("synth", "verify", "simulate", "export"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None)
        p.add_argument("--model", default=None)
        p.add_argument("--templates", default=None)
        p.add_argument("--controller", default=None)
        p.add_argument("--backend", default=None,
                       choices=["cegis", "polyhedra", "dsos"])
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--samples", type=int, default=None)
        p.add_argument("--rounds", type=int, default=None)
        p.add_argument("--horizon", type=float, default=None)
        p.add_argument("--dt", type=float, default=None)
        p.add_argument("--runs", type=int, default=None)
        p.add_argument("--format", dest="fmt", default=None,
                       choices=["smtlib2", "qepcad"])
        p.add_argument("--out", default=None)
    return ap


_DEFAULTS = RunConfig(command="")


def _merge_config(args) -> RunConfig:
    file_cfg = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            file_cfg = json.load(fh)
    cfg = RunConfig(command=args.command)
    for name in ("model", "templates", "controller", "backend", "seed",
                 "samples", "rounds", "horizon", "dt", "runs", "fmt", "out"):
        val = getattr(args, name, None)
        if val is None:
            val = file_cfg.get(name, getattr(_DEFAULTS, name))
        setattr(cfg, name, val)
    try:
        cfg.threads = max(1, int(os.environ.get("CISYNTH_THREADS", "1")))
    except ValueError:
        cfg.threads = 1
    return cfg


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _write(path: str | None, text: str, default_name: str):
    target = path or default_name
    Path(target).write_text(text, encoding="utf-8")
    return target


def _load_templates(cfg: RunConfig):
    """TemplateSet for cegis, raw design document for other backends."""
    text = _read(cfg.templates)
    if cfg.backend == "cegis":
        return parse_templates(text)
    return json.loads(text)


def cmd_synth(cfg: RunConfig) -> int:
    if not cfg.model or not cfg.templates:
        print("synth needs --model and --templates", file=sys.stderr)
        return 1
    h = parse_model(_read(cfg.model))
    templates = _load_templates(cfg)
    options = SynthOptions(seed=cfg.seed, max_rounds=cfg.rounds,
                           samples_per_round=cfg.samples)
    ra, report = synthesize(h, templates, cfg.backend, options)
    if ra is None:
        print(f"synthesis failed: {report.diagnostics_dict()}",
              file=sys.stderr)
        return 2
    target = _write(cfg.out, serialize_controller(ra, report, cfg.seed),
                    "controller.json")
    print(f"wrote {target} (backend={report.backend}, "
          f"status={report.status})")
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    if not cfg.controller:
        print("verify needs --controller", file=sys.stderr)
        return 1
    ra, _, _ = parse_controller(_read(cfg.controller))
    h = ra.base
    problems = []
    for mid, _ in ra.certificates:
        problems.extend(recheck_certificate(ra, mid))
    constraint = derive_constraints(
        h, TemplateSet((), ra.refined_domains))
    cex, stats = falsify_report(constraint, {}, cfg.samples, cfg.seed)
    if cex is not None:
        problems.append("constraint counterexample at "
                        + ", ".join(f"{v}={format_fraction(Fraction(x))}"
                                    for v, x in sorted(cex.items())))
    guards = dict(ra.refined_guards)
    boundary = {}
    n_bnd = max(100, cfg.samples // 20)
    for mid, dprime in ra.refined_domains:
        m = h.mode(mid)
        region = progress_region(guards, h, mid)
        rep = boundary_sample_check(dprime, m.flow, region, n_bnd,
                                    cfg.seed)
        boundary[mid] = {"holds": rep.holds, "vacuous": rep.vacuous,
                         "fails": rep.fails}
        if rep.fails:
            problems.append(
                f"boundary check failed for mode {mid} at "
                f"{rep.witnesses[0]}")
    doc = {
        "certificateProblems": problems,
        "falsification": stats,
        "boundary": boundary,
        "ok": not problems,
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if cfg.out:
        _write(cfg.out, text, "verify_report.json")
    print(text, end="")
    return 0 if not problems else 2


def cmd_simulate(cfg: RunConfig) -> int:
    if not cfg.controller:
        print("simulate needs --controller", file=sys.stderr)
        return 1
    ra, _, _ = parse_controller(_read(cfg.controller))
    mode0, point0 = ra.witness
    summaries = []
    ok = True
    outdir = Path(cfg.out) if cfg.out else None
    if outdir:
        outdir.mkdir(parents=True, exist_ok=True)
    for i in range(cfg.runs):
        traj, outcome = simulate(ra, mode0, point0, cfg.horizon, cfg.dt,
                                 seed=cfg.seed + i)
        lo = min(min(s) for path in traj.state_seq for _, s in path)
        summaries.append({"run": i, "status": outcome.status,
                          "jumps": outcome.jumps,
                          "suspectedZeno": outcome.suspected_zeno})
        del lo
        if outcome.status != "ranToHorizon":
            ok = False
        if outdir:
            (outdir / f"run_{i}.csv").write_text(trajectory_csv(traj),
                                                 encoding="utf-8")
    doc = {"runs": summaries, "ok": ok}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if outdir:
        (outdir / "summary.json").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0 if ok else 2


def cmd_export(cfg: RunConfig) -> int:
    if not cfg.model or not cfg.templates:
        print("export needs --model and --templates", file=sys.stderr)
        return 1
    h = parse_model(_read(cfg.model))
    templates = parse_templates(_read(cfg.templates))
    constraint = derive_constraints(h, templates)
    params = None
    if cfg.controller:
        _, report, _ = parse_controller(_read(cfg.controller))
        params = {k: parse_fraction(v)
                  for k, v in report.get("paramValues", {}).items()}
    if cfg.fmt == "qepcad":
        text = export_qepcad(constraint)
        suffix = "qepcad"
    else:
        text = export_smtlib2(constraint, params)
        suffix = "smt2"
    target = _write(cfg.out, text, f"constraint.{suffix}")
    print(f"wrote {target}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _merge_config(args)
        if cfg.command == "synth":
            return cmd_synth(cfg)
        if cfg.command == "verify":
            return cmd_verify(cfg)
        if cfg.command == "simulate":
            return cmd_simulate(cfg)
        return cmd_export(cfg)
    except (OSError, json.JSONDecodeError, ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
