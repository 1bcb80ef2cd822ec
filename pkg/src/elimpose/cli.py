"""Command-line entry point: ``elimpose <subcommand> [problem] [options]``.

Exit codes (stable):

====  ==========================================
0     success
2     usage error, unknown problem, wrong row count
3     Groebner resource cap exceeded
4     verification mismatch
5     degenerate or ill-conditioned input
6     malformed correspondence CSV
7     missing template or other I/O failure
====  ==========================================
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import IntEnum

import numpy as np

from . import __version__, kernels
from .elimderive import (
    PROBLEMS,
    derive_generators,
    format_generator_file,
    load_generators,
    verify_reference,
)
from .groebner import Caps, ResourceCapExceeded
from .solvers import (
    ConditioningError,
    DegenerateInputError,
    InputCountError,
    Tolerances,
    compiled_problem,
    solve_minimal,
)
from .synth import METRIC_COLUMNS, SceneConfig, add_noise, evaluate, random_scene
from .templates import (
    TemplateError,
    TemplateFormatError,
    build_template,
    load_template,
    save_template,
)

__all__ = ["main", "ExitCode", "RunConfig", "read_correspondences", "write_correspondences", "TABLE1"]


class ExitCode(IntEnum):
    OK = 0
    USAGE = 2
    CAP = 3
    MISMATCH = 4
    DEGENERATE = 5
    MALFORMED = 6
    IO = 7


# Published elimination-template sizes and non-zero ratios (other solvers / ours).
TABLE1 = {
    "FEF": {"ours": (21, 36), "previous": (31, 46), "nz_ratio": 3.0},
    "EF": {"ours": (6, 15), "previous": (21, 30), "nz_ratio": 5.2},
    "EFK": {"ours": (51, 70), "previous": (200, 231), "nz_ratio": 2.8},
}

CSV_HEADER = ("x1", "y1", "x2", "y2")
EXTRA_COLUMNS = ("f_est", "lambda_est", "error")
TOL_FIELDS = ("rank", "pivot", "imag", "generator", "chart", "extraction", "sylvester")
PIXEL = SceneConfig().pixel


class CliError(Exception):
    def __init__(self, code: ExitCode, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    """Everything needed to reproduce a run; embedded in every report."""

    subcommand: str
    problem: str
    seed: int = 0
    n: int = 1
    sigmas: list = field(default_factory=lambda: [0.0])  # pixels
    lam: float | None = None
    tolerances: dict = field(default_factory=dict)
    polish: bool = False
    input: str | None = None
    out: str | None = None
    template: str | None = None
    jobs: int = 1
    pixel: float = PIXEL
    version: str = __version__

    def validate(self) -> "RunConfig":
        if self.problem not in PROBLEMS:
            raise CliError(ExitCode.USAGE, f"unknown problem {self.problem!r}")
        if self.n < 1:
            raise CliError(ExitCode.USAGE, "-n must be at least 1")
        if self.jobs < 1:
            raise CliError(ExitCode.USAGE, "--jobs must be at least 1")
        if any(s < 0 or not math.isfinite(s) for s in self.sigmas):
            raise CliError(ExitCode.USAGE, "--sigma must be finite and non-negative")
        if self.lam is not None and not (-10 < self.lam <= 0):
            raise CliError(ExitCode.USAGE, "--lambda must lie in (-10, 0]")
        return self

    def tol(self) -> Tolerances:
        return Tolerances().override(**self.tolerances)

    def to_json(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# correspondence CSV
# ---------------------------------------------------------------------------


def read_correspondences(text: str) -> np.ndarray:
    """Parse a ``x1,y1,x2,y2`` CSV; raises CliError(MALFORMED) on bad input."""
    rows = [r for r in csv.reader(io.StringIO(text)) if any(c.strip() for c in r)]
    if not rows:
        raise CliError(ExitCode.MALFORMED, "empty correspondence file")
    header = tuple(c.strip().lower() for c in rows[0])
    if header != CSV_HEADER:
        raise CliError(ExitCode.MALFORMED, f"header must be {','.join(CSV_HEADER)}, got {','.join(header)}")
    out = []
    for k, r in enumerate(rows[1:], start=2):
        if len(r) != 4:
            raise CliError(ExitCode.MALFORMED, f"line {k}: expected 4 fields, got {len(r)}")
        try:
            vals = [float(c) for c in r]
        except ValueError:
            raise CliError(ExitCode.MALFORMED, f"line {k}: non-numeric field") from None
        if not all(math.isfinite(v) for v in vals):
            raise CliError(ExitCode.MALFORMED, f"line {k}: non-finite value")
        out.append(vals)
    return np.array(out, dtype=np.float64).reshape(-1, 4)


def write_correspondences(corrs: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in np.asarray(corrs):
        w.writerow([repr(float(v)) for v in r])
    return buf.getvalue()


def _read_text(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(ExitCode.IO, f"cannot read {path}: {exc.strerror}") from None


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(ExitCode.IO, f"cannot write {path}: {exc.strerror}") from None


def _load_template(cfg: RunConfig):
    try:
        tpl = load_template(cfg.template) if cfg.template else load_template(cfg.problem)
    except FileNotFoundError as exc:
        raise CliError(ExitCode.IO, f"template not found: {exc.filename or cfg.template}") from None
    except OSError as exc:
        raise CliError(ExitCode.IO, f"cannot read template: {exc}") from None
    except TemplateFormatError as exc:
        raise CliError(ExitCode.IO, f"unusable template: {exc}") from None
    if tpl.problem != cfg.problem:
        raise CliError(ExitCode.USAGE, f"template is for {tpl.problem}, not {cfg.problem}")
    return tpl


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _census_line(gens: list) -> str:
    degs = ", ".join(f"degree {g.degree()}" for g in gens)
    return f"{len(gens)} generator{'s' if len(gens) != 1 else ''}: {degs}"


def cmd_derive(cfg: RunConfig, args) -> int:
    caps = Caps(max_pairs=args.max_pairs, max_coefficient_bits=args.max_bits)
    try:
        basis = derive_generators(cfg.problem, saturate_first=not args.no_saturate, caps=caps)
    except ResourceCapExceeded as exc:
        print(f"error: resource cap exceeded: {exc}", file=sys.stderr)
        print(json.dumps({"stats": exc.stats.as_dict()}), file=sys.stderr)
        return ExitCode.CAP
    gens = basis.generators
    text = format_generator_file(cfg.problem, gens)
    if cfg.out:
        _write_text(cfg.out, text)
    else:
        sys.stdout.write(text)
    print(_census_line(gens))
    print(f"# {basis.stats.summary()} elapsed={basis.elapsed:.2f}s")
    if args.verify:
        rep = verify_reference(cfg.problem, gens)
        print(rep.to_text())
        if not rep.ok:
            return ExitCode.MISMATCH
    return ExitCode.OK


def cmd_verify(cfg: RunConfig, args) -> int:
    if cfg.input:
        try:
            gens = load_generators(cfg.problem, cfg.input)
        except OSError as exc:
            raise CliError(ExitCode.IO, f"cannot read {cfg.input}: {exc}") from None
        except (ValueError, KeyError) as exc:
            raise CliError(ExitCode.IO, f"unusable generator file: {exc}") from None
    else:
        gens = load_generators(cfg.problem)
    rep = verify_reference(cfg.problem, gens)
    ok = rep.ok
    if args.derive:
        fresh = derive_generators(cfg.problem).generators
        same = len(fresh) == len(gens) and all(any(f.is_scalar_multiple(g) for g in gens) for f in fresh)
        rep.add("fresh derivation equals stored generators", same)
        ok = ok and same
    print(_census_line(gens))
    print(rep.to_text())
    return ExitCode.OK if ok else ExitCode.MISMATCH


def _template_report(tpl) -> dict:
    cp = compiled_problem(tpl.problem, tpl)
    nnz = len(set(zip(cp.fill_rows.tolist(), cp.fill_cols.tolist())))
    rep = {
        "problem": tpl.problem,
        "rows": tpl.rows,
        "cols": tpl.cols,
        "nonzeros": nnz,
        "density": nnz / (tpl.rows * tpl.cols),
        "basis_size": len(tpl.basis),
        "excessive": tpl.n_excessive,
        "reducible": tpl.n_reducible,
        "action": tpl.action,
    }
    ref = TABLE1.get(tpl.problem)
    if ref:
        rep["reference_rows"], rep["reference_cols"] = ref["ours"]
        rep["previous_rows"], rep["previous_cols"] = ref["previous"]
        rep["reference_nz_ratio"] = ref["nz_ratio"]
    return rep


def _template_line(rep: dict) -> str:
    line = f"template {rep['problem']}: {rep['rows']}x{rep['cols']}, {rep['nonzeros']} non-zeros"
    if "reference_rows" in rep:
        line += (
            f" (published: {rep['reference_rows']}x{rep['reference_cols']};"
            f" earlier solver {rep['previous_rows']}x{rep['previous_cols']},"
            f" nz ratio {rep['reference_nz_ratio']})"
        )
    else:
        line += " (no published reference)"
    return line


def cmd_template(cfg: RunConfig, args) -> int:
    if args.build:
        try:
            tpl = build_template(cfg.problem, action=args.action, seed=cfg.seed, cap=args.cap, prune=not args.no_prune)
        except TemplateError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return ExitCode.MISMATCH
        except ResourceCapExceeded as exc:
            print(f"error: resource cap exceeded: {exc}", file=sys.stderr)
            return ExitCode.CAP
        if cfg.out:
            try:
                save_template(tpl, cfg.out)
            except OSError as exc:
                raise CliError(ExitCode.IO, f"cannot write {cfg.out}: {exc.strerror}") from None
    else:
        tpl = _load_template(cfg)
    rep = _template_report(tpl)
    print(_template_line(rep))
    print(json.dumps({"config": cfg.to_json(), "template": rep}, indent=1))
    return ExitCode.OK


def cmd_solve(cfg: RunConfig, args) -> int:
    if not cfg.input:
        raise CliError(ExitCode.USAGE, "solve needs --input CSV")
    corrs = read_correspondences(_read_text(cfg.input))
    tpl = _load_template(cfg) if cfg.template else None
    try:
        sols = solve_minimal(cfg.problem, corrs, template=tpl, polish=cfg.polish, tol=cfg.tol())
    except InputCountError as exc:
        raise CliError(ExitCode.USAGE, str(exc)) from None
    except (DegenerateInputError, ConditioningError) as exc:
        raise CliError(ExitCode.DEGENERATE, f"degenerate configuration: {exc}") from None
    payload = [s.to_json() for s in sols]
    if cfg.out:
        _write_text(cfg.out, json.dumps(payload, indent=1) + "\n")
    print(json.dumps({"config": cfg.to_json(), "count": len(sols), "solutions": payload}, indent=1))
    return ExitCode.OK


def cmd_synth(cfg: RunConfig, args) -> int:
    scfg = SceneConfig(lam=cfg.lam)
    scene = random_scene(cfg.problem, scfg, cfg.seed)
    sigma = cfg.sigmas[0]
    corrs = add_noise(scene.correspondences, sigma * cfg.pixel, _noise_seed(cfg.seed), image_only=cfg.problem == "HF")
    _write_text(cfg.out, write_correspondences(corrs))
    if args.scene:
        d = scene.to_json()
        d["config"] = cfg.to_json()
        _write_text(args.scene, json.dumps(d, indent=1) + "\n")
    return ExitCode.OK


# --- bench ------------------------------------------------------------------


def _noise_seed(seed: int) -> int:
    return 2**32 + seed


def _bench_one(job: tuple) -> tuple:
    pid, seed, sigma, lam, pixel, tol_kw, polish, template = job
    scene = random_scene(pid, SceneConfig(lam=lam), seed)
    corrs = add_noise(scene.correspondences, sigma * pixel, _noise_seed(seed), image_only=pid == "HF")
    tpl = load_template(template) if template else None
    err = ""
    t0 = time.perf_counter()
    try:
        sols = solve_minimal(pid, corrs, template=tpl, polish=polish, tol=Tolerances().override(**tol_kw))
    except (DegenerateInputError, ConditioningError) as exc:
        sols, err = [], type(exc).__name__
    dt = time.perf_counter() - t0
    rec = evaluate(sols, scene, sigma)
    rec["error"] = err
    return rec, dt


def _quantiles(vals) -> dict:
    a = np.asarray([v for v in vals if math.isfinite(v)], dtype=np.float64)
    if a.size == 0:
        return {}
    qs = (0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0)
    return {f"q{int(q * 100):02d}": float(v) for q, v in zip(qs, np.quantile(a, qs))}


def _summarize(cfg: RunConfig, records: list, times: list, tpl_rep: dict | None) -> dict:
    levels = []
    for sigma in cfg.sigmas:
        recs = [r for r in records if r["sigma"] == sigma]
        fails = sum(r["failure"] for r in recs)
        lf = [r["log10_rel_f"] for r in recs]
        level = {
            "sigma_px": sigma,
            "count": len(recs),
            "failures": fails,
            "failure_rate": fails / len(recs) if recs else float("nan"),
            "median_log10_rel_f": _quantiles(lf).get("q50", float("nan")),
            "log10_rel_f": _quantiles(lf),
            "median_solutions": float(np.median([r["n_solutions"] for r in recs])) if recs else float("nan"),
        }
        if cfg.problem == "EFK":
            ll = [r["log10_rel_lambda"] for r in recs]
            level["median_log10_rel_lambda"] = _quantiles(ll).get("q50", float("nan"))
            level["log10_rel_lambda"] = _quantiles(ll)
            level["lambda_est"] = _quantiles([r["lambda_est"] for r in recs])
        levels.append(level)
    t = np.asarray(times)
    return {
        "config": cfg.to_json(),
        "backend": kernels.BACKEND,
        "levels": levels,
        "time_ms": {"median": float(np.median(t) * 1e3), "q95": float(np.quantile(t, 0.95) * 1e3)},
        "template": tpl_rep,
    }


def _summary_text(summary: dict) -> str:
    cfg = summary["config"]
    lines = [f"bench {cfg['problem']}: n={cfg['n']} seed={cfg['seed']} backend={summary['backend']}"]
    for lv in summary["levels"]:
        q = lv["log10_rel_f"]
        lines.append(
            f"  sigma={lv['sigma_px']:g}px  median_log10_rel_f={lv['median_log10_rel_f']:.2f}"
            f"  q05={q.get('q05', float('nan')):.2f} q95={q.get('q95', float('nan')):.2f}"
            f"  failure_rate={lv['failure_rate']:.4f} ({lv['failures']}/{lv['count']})"
        )
        if "lambda_est" in lv:
            lq = lv["lambda_est"]
            lines.append(
                f"    median_log10_rel_lambda={lv['median_log10_rel_lambda']:.2f}  lambda quantiles: "
                + " ".join(f"{k}={v:.4f}" for k, v in lq.items())
            )
    lines.append(f"  time per instance: median {summary['time_ms']['median']:.2f} ms")
    if summary["template"]:
        lines.append("  " + _template_line(summary["template"]))
    return "\n".join(lines)


def run_bench(cfg: RunConfig) -> tuple:
    """Per-instance metric records (ordered by sigma, then seed) and the summary."""
    tpl = _load_template(cfg)
    tpl_rep = _template_report(tpl)
    jobs = [
        (cfg.problem, s, sigma, cfg.lam, cfg.pixel, cfg.tolerances, cfg.polish, cfg.template)
        for sigma in cfg.sigmas
        for s in range(cfg.seed, cfg.seed + cfg.n)
    ]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as ex:
            results = list(ex.map(_bench_one, jobs, chunksize=max(1, len(jobs) // (4 * cfg.jobs))))
    else:
        results = [_bench_one(j) for j in jobs]
    records = [r for r, _ in results]
    times = [t for _, t in results]
    return records, _summarize(cfg, records, times, tpl_rep)


def metrics_csv(records: list) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(METRIC_COLUMNS) + list(EXTRA_COLUMNS), lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: (int(v) if isinstance(v, bool) else v) for k, v in r.items()})
    return buf.getvalue()


def cmd_bench(cfg: RunConfig, args) -> int:
    records, summary = run_bench(cfg)
    if cfg.out:
        _write_text(cfg.out, metrics_csv(records))
    summary_path = args.summary or (cfg.out + ".summary.json" if cfg.out else None)
    if summary_path:
        _write_text(summary_path, json.dumps(summary, indent=1) + "\n")
    print(_summary_text(summary))
    return ExitCode.OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

COMMANDS = {
    "derive": cmd_derive,
    "verify": cmd_verify,
    "template": cmd_template,
    "solve": cmd_solve,
    "bench": cmd_bench,
    "synth": cmd_synth,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(ExitCode.USAGE, message)


def _sigma_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid sigma list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="elimpose", description="Elimination-based minimal solvers for partially calibrated relative pose.")
    ap.add_argument("--version", action="version", version=f"elimpose {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    problems = [p.lower() for p in PROBLEMS]

    def common(p, seed=True):
        p.add_argument("problem_pos", nargs="?", metavar="problem", choices=problems + [p.upper() for p in problems])
        p.add_argument("--problem", dest="problem_opt", choices=problems, help="problem id (alternative to the positional)")
        if seed:
            p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output path (default: stdout where applicable)")
        return p

    d = common(sub.add_parser("derive", help="derive elimination generators"), seed=False)
    d.add_argument("--verify", action="store_true", help="check against the published polynomials")
    d.add_argument("--no-saturate", action="store_true")
    d.add_argument("--max-pairs", type=int, default=Caps.max_pairs)
    d.add_argument("--max-bits", type=int, default=Caps.max_coefficient_bits)

    v = common(sub.add_parser("verify", help="verify stored generators"), seed=False)
    v.add_argument("--input", help="generator file (default: bundled)")
    v.add_argument("--derive", action="store_true", help="also re-derive and compare")

    t = common(sub.add_parser("template", help="report or build an elimination template"))
    t.add_argument("--template", help="template JSON to report on (default: bundled)")
    t.add_argument("--build", action="store_true", help="construct a fresh template")
    t.add_argument("--action", help="action variable (default: first unknown)")
    t.add_argument("--cap", type=int, help="maximal multiplier degree")
    t.add_argument("--no-prune", action="store_true")

    def numeric(p):
        p.add_argument("--template", help="template JSON (default: bundled)")
        p.add_argument("--polish", action="store_true", help="one Newton step per root")
        for name in TOL_FIELDS:
            p.add_argument(f"--tol-{name}", type=float, dest=f"tol_{name}")
        return p

    s = numeric(common(sub.add_parser("solve", help="solve one minimal sample"), seed=False))
    s.add_argument("--input", "-i", help="correspondence CSV with header x1,y1,x2,y2")

    b = numeric(common(sub.add_parser("bench", help="synthetic benchmark")))
    b.add_argument("-n", type=int, default=1000, help="instances per noise level")
    b.add_argument("--sigma", type=_sigma_list, default=[0.0], help="noise levels in pixels, comma separated")
    b.add_argument("--lambda", dest="lam", type=float, help="fixed distortion (EFK)")
    b.add_argument("--summary", help="summary JSON path (default: <out>.summary.json)")
    b.add_argument("--jobs", type=int, default=1)

    y = common(sub.add_parser("synth", help="generate a synthetic minimal sample"))
    y.add_argument("--sigma", type=float, default=0.0, help="noise in pixels")
    y.add_argument("--lambda", dest="lam", type=float)
    y.add_argument("--scene", help="also write the ground-truth scene JSON here")
    return ap


def _config(args) -> RunConfig:
    pid = args.problem_opt or args.problem_pos
    if args.problem_opt and args.problem_pos and args.problem_opt.lower() != args.problem_pos.lower():
        raise CliError(ExitCode.USAGE, "conflicting problem ids")
    if not pid:
        raise CliError(ExitCode.USAGE, "a problem id is required (fef, ef, efk, hf)")
    sig = getattr(args, "sigma", 0.0)
    cfg = RunConfig(
        subcommand=args.command,
        problem=pid.upper(),
        seed=getattr(args, "seed", 0),
        n=getattr(args, "n", 1),
        sigmas=list(sig) if isinstance(sig, list) else [sig],
        lam=getattr(args, "lam", None),
        tolerances={k: getattr(args, f"tol_{k}") for k in TOL_FIELDS if getattr(args, f"tol_{k}", None) is not None},
        polish=getattr(args, "polish", False),
        input=getattr(args, "input", None),
        out=args.out,
        template=getattr(args, "template", None),
        jobs=getattr(args, "jobs", 1),
    )
    return cfg.validate()


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = _config(args)
        return int(COMMANDS[args.command](cfg, args))
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return int(exc.code)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)


if __name__ == "__main__":
    raise SystemExit(main())
