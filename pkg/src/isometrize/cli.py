"""Batch command line front end.

Usage:
    isometrize analyze-operator T.json [--mode isometry|unitary|expansive]
    isometrize unitarize-rep rep.json
    isometrize isometrize-semigroup rep.json
    isometrize folner-report --group Z^2 --nmax 16 --format csv
    isometrize derivation-report deriv.json

Exit codes: 0 certified, 2 a hypothesis failed, 1 any other error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .cesaro import (
    DEFAULT_TOL,
    BoundsEstimate,
    GramLimit,
    _distances,
    cesaro_scan,
    default_horizon,
    expansive_isometrize,
    isometrize,
    sznagy_unitarize,
)
from .derivations import derivation_bound_values, extract_inner, leibniz_check
from .errors import (
    Diverged,
    DoublingFailed,
    HypothesisFailed,
    IsometrizeError,
    LeibnizFailed,
    NotConverged,
    NotExpansive,
    NotInnerAtTolerance,
    PowerUnbounded,
)
from .folner import (
    Heisenberg3,
    MAX_PAIRS,
    doubling_check,
    parse_group,
    sfc_ratio,
    standard_family,
    tempelman_ratio,
)
from .io import (
    Report,
    parse_derivation_file,
    parse_matrix_file,
    parse_representation_file,
    render,
    to_jsonable,
)
from .representations import (
    bound_scan,
    cert_uniform_bound,
    default_family,
    default_rep_horizon,
    isometrize_semigroup_rep,
    translated_bound_check,
    unitarize_rep,
)

COMMANDS = ("analyze-operator", "unitarize-rep", "isometrize-semigroup", "folner-report", "derivation-report")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would collide with HypothesisFailed
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    input_path: str | None = None
    n_max: int | None = None
    tol: float = DEFAULT_TOL
    output_path: str | None = None
    format: str = "text"
    decay_tol: float | None = None
    group: str | None = None
    p: int = 2
    kappa: float | None = None
    mode: str = "isometry"
    figure: str | None = None

    def validate(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.n_max is not None and self.n_max < 4:
            raise UsageError("--nmax must be at least 4")
        if not self.tol > 0:
            raise UsageError("--tol must be positive")
        if self.decay_tol is not None and not self.decay_tol > 0:
            raise UsageError("--decay-tol must be positive")
        if self.p < 1:
            raise UsageError("--p must be a positive integer")
        if self.command == "folner-report" and not self.group:
            raise UsageError("folner-report needs --group")
        if self.command != "folner-report" and not self.input_path:
            raise UsageError(f"{self.command} needs an input file")


def _dyadic(n_max):
    out, n = [], 1
    while n <= n_max:
        out.append(n)
        n *= 2
    return out


def _flatten(prefix, value, out):
    if isinstance(value, BoundsEstimate):
        value = value.as_dict()
    elif isinstance(value, GramLimit):
        value = {"converged": value.converged, "method": value.method,
                 "fixed_point_residual": value.fixed_point_residual,
                 "evidence_tail": value.evidence_tail, "evidence_ratio": value.evidence_ratio}
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    else:
        out.append([prefix, to_jsonable(value)])
    return out


def _failure(command, reasons, message="", diagnostics=None, table=None) -> Report:
    return Report(command, "HypothesisFailed", list(reasons), message, None,
                  _flatten("", diagnostics or {}, []), table or [])


def _cert_dict(cert, keys) -> dict:
    return {k: to_jsonable(getattr(cert, k)) for k in keys}


# -- commands ------------------------------------------------------------------


def _operator_table(t, n_max, gram=None):
    scan = cesaro_scan(t, n_max)
    rows = []
    dist = _distances(scan.averages, gram) if gram is not None else None
    for n in _dyadic(scan.n):
        rows.append([n, "lambda_min", float(scan.lam_min[n - 1])])
        rows.append([n, "lambda_max", float(scan.lam_max[n - 1])])
        if dist is not None:
            rows.append([n, "distance_to_limit", float(dist[n - 1])])
    return rows


def run_analyze_operator(cfg: RunConfig) -> Report:
    t = parse_matrix_file(cfg.input_path)
    la.as_matrix(t, square=True)
    n_max = cfg.n_max or default_horizon(t.shape[0])
    try:
        if cfg.mode == "unitary":
            cert = sznagy_unitarize(t, n_max=n_max, tol=cfg.tol)
        elif cfg.mode == "expansive":
            cert = expansive_isometrize(t, n_max=n_max, tol=max(cfg.tol, 1e-9))
        else:
            cert = isometrize(t, tol=cfg.tol, n_max=n_max)
    except HypothesisFailed as exc:
        return _failure(cfg.command, exc.reasons, str(exc), exc.diagnostics, _operator_table(t, n_max))
    except (Diverged, PowerUnbounded, NotConverged, NotExpansive) as exc:
        tag = {Diverged: "divergent", NotConverged: "notConverged", NotExpansive: "notExpansive"}.get(type(exc))
        if isinstance(exc, PowerUnbounded):
            tag = f"powerUnbounded:{exc.direction}"
        diag = {"bounds": getattr(exc, "bounds", None)} if getattr(exc, "bounds", None) else {}
        return _failure(cfg.command, [tag], str(exc), diag, _operator_table(t, n_max))
    certificate = _cert_dict(cert, ["kind", "residual", "condition_number", "transform", "conjugated", "gram",
                                    "gram_fixed_point_residual", "evidence_ratio"])
    certificate["mode"] = cfg.mode
    diags = _flatten("bounds", cert.bounds, [])
    diags += _flatten("", cert.extra, [])
    return Report(cfg.command, "Certified", [], "", certificate, diags, _operator_table(t, n_max, cert.gram))


def _rep_table(rep, family, n_max, decay_report):
    scan = bound_scan(rep, family, n_max)
    rows = []
    for n in _dyadic(n_max):
        rows.append([n, "gram_lambda_min", float(scan.lam_min[n - 1])])
        rows.append([n, "gram_lambda_max", float(scan.lam_max[n - 1])])
    for label, series in (decay_report or {}).items():
        for n, v in series:
            rows.append([n, f"decay[{label}]", float(v)])
    return rows, scan


def _run_rep(cfg: RunConfig, semigroup: bool) -> Report:
    rep = parse_representation_file(cfg.input_path)
    family = default_family(rep.descriptor)
    n_max = cfg.n_max or default_rep_horizon(rep.descriptor)
    fn = isometrize_semigroup_rep if semigroup else unitarize_rep
    try:
        cert = fn(rep, family, tol=cfg.tol, n_max=n_max, decay_tol=cfg.decay_tol)
    except HypothesisFailed as exc:
        table, _ = _rep_table(rep, family, n_max, None)
        return _failure(cfg.command, exc.reasons, str(exc), exc.diagnostics, table)
    table, _ = _rep_table(rep, family, n_max, cert.decay_report)
    certificate = _cert_dict(cert, ["kind", "residual", "condition_number", "transform", "family",
                                    "evidence_ratio"])
    certificate["per_generator_residuals"] = to_jsonable(cert.per_generator_residuals)
    diags = _flatten("bounds", cert.bounds, [])
    diags.append(["decay_tol", cert.extra["decay_tol"]])
    diags.append(["gram_fixed_point_residual", cert.extra["gram_fixed_point_residual"]])
    if rep.descriptor.is_group:
        c_tr, uniform = translated_bound_check(rep, family, n_max=n_max)
        diags += [["translated_c_est", c_tr], ["translated_uniform_ok", uniform]]
        if cfg.kappa is not None:
            n = max(1, n_max // cfg.p)
            try:
                holds, worst = cert_uniform_bound(rep, family, cfg.p, cfg.kappa, cert.bounds["c_est"], n)
                diags += [["uniform_bound_N", n], ["uniform_bound_holds", holds], ["uniform_bound_worst_norm", worst]]
            except DoublingFailed as exc:
                diags.append(["uniform_bound_doubling", str(exc)])
    return Report(cfg.command, "Certified", [], "", certificate, diags, table)


def run_folner_report(cfg: RunConfig) -> Report:
    g = parse_group(cfg.group)
    n_max = cfg.n_max or (16 if isinstance(g, Heisenberg3) else 64)
    family = standard_family(g)
    ns = sorted(set(_dyadic(n_max)) | {n_max})
    rows = []
    defect = 0
    decreasing = True
    previous = {}
    for n in ns:
        size = family.set_at(n).shape[0]
        rows.append([n, "size", size])
        for name in g.generators:
            r = sfc_ratio(family, n, name)
            c = r.counts
            defect = max(defect, abs((c.f_minus_fs - c.fs_minus_f) - (c.size_f - c.size_fs)))
            ratio = r.strong + r.weak
            if name in previous and ratio > previous[name]:
                decreasing = False
            previous[name] = ratio
            rows.append([n, f"ratio[{name}]", ratio])
            rows.append([n, f"sfc[{name}]", r.strong])
        if g.is_group and size * size <= MAX_PAIRS // 10:
            rows.append([n, "tempelman", tempelman_ratio(family, n)])
            try:
                ok, ratio = doubling_check(family, n, cfg.p)
                rows.append([n, f"doubling_ratio[p={cfg.p}]", ratio])
                rows.append([n, "doubling_contained", ok])
                if cfg.kappa is not None:
                    rows.append([n, "doubling_ok", bool(ok and ratio <= cfg.kappa)])
            except IsometrizeError:
                pass
    certificate = {"kind": "folner", "family": family.name, "residual": float(defect),
                   "ratios_non_increasing": decreasing}
    status = "Certified" if defect == 0 and decreasing else "HypothesisFailed"
    reasons = [] if status == "Certified" else ["folner"]
    return Report(cfg.command, status, reasons, "", certificate if status == "Certified" else None,
                  [["group", g.name], ["n_max", n_max]], rows)


def run_derivation_report(cfg: RunConfig) -> Report:
    d = parse_derivation_file(cfg.input_path)
    family = default_family(d.rep.descriptor)
    n_max = cfg.n_max or default_rep_horizon(d.rep.descriptor)
    ok, worst = leibniz_check(d)
    diags = [["leibniz_ok", ok], ["leibniz_defect", worst]]
    table = [[n, "derivation_bound_sq", float(v)]
             for n, v in sorted(derivation_bound_values(d, family, n_max).items())]
    try:
        cert = extract_inner(d, family, tol=cfg.tol, n_max=n_max)
    except LeibnizFailed as exc:
        return _failure(cfg.command, ["leibniz"], str(exc), dict(diags), table)
    except HypothesisFailed as exc:
        return _failure(cfg.command, exc.reasons, str(exc), {**dict(diags), **exc.diagnostics}, table)
    except NotInnerAtTolerance as exc:
        diag = {**dict(diags), "residual": exc.residual, "tol": exc.tol}
        return _failure(cfg.command, ["notInnerAtTolerance"], str(exc), diag, table)
    certificate = {"kind": "inner", "method": cert.method, "residual": cert.residual, "T": to_jsonable(cert.T),
                   "c_est": cert.bound}
    corr = cert.corroboration
    diags.append(["corroboration_ok", bool(corr.get("ok"))])
    if corr.get("ok"):
        diags += [["corroboration_method", corr["method"]], ["corroboration_residual", corr["residual"]],
                  ["corroboration_unitarization_residual", corr["unitarization_residual"]]]
    else:
        diags.append(["corroboration_reason", corr.get("reason", "")])
    return Report(cfg.command, "Certified", [], "", certificate, diags, table)


RUNNERS = {
    "analyze-operator": run_analyze_operator,
    "unitarize-rep": lambda cfg: _run_rep(cfg, semigroup=False),
    "isometrize-semigroup": lambda cfg: _run_rep(cfg, semigroup=True),
    "folner-report": run_folner_report,
    "derivation-report": run_derivation_report,
}


def run(cfg: RunConfig) -> Report:
    """Run one command; every outcome becomes a :class:`Report`."""
    try:
        cfg.validate()
        with np.errstate(all="ignore"):
            return RUNNERS[cfg.command](cfg)
    except (IsometrizeError, UsageError, OSError, ValueError, np.linalg.LinAlgError) as exc:
        return Report(cfg.command, "Error", [type(exc).__name__], str(exc))


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--nmax", type=int, default=None, help="averaging horizon")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL, help="residual tolerance")
    common.add_argument("--decay-tol", type=float, default=None, help="threshold for translate decay")
    common.add_argument("--format", choices=["text", "csv", "json"], default="text")
    common.add_argument("--output", "-o", default=None, help="write the report here instead of stdout")
    common.add_argument("--figure", default=None, help="also save a plot of the report table (PNG/PDF)")
    common.add_argument("--p", type=int, default=2, help="doubling factor")
    common.add_argument("--kappa", type=float, default=None, help="doubling constant")
    common.add_argument("--group", default=None, help="group descriptor, e.g. Z^2, N^1, heisenberg3")

    parser = _Parser(prog="isometrize", description="Similarity to isometries and unitaries via averaging.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("analyze-operator", parents=[common], help="single operator from a matrix file")
    p.add_argument("input")
    p.add_argument("--mode", choices=["isometry", "unitary", "expansive"], default="isometry")
    for name, text in (("unitarize-rep", "group representation file"),
                       ("isometrize-semigroup", "semigroup representation file"),
                       ("derivation-report", "derivation file")):
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("input")
    sub.add_parser("folner-report", parents=[common], help="Folner statistics of a built-in group")
    return parser


def config_from_args(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    return RunConfig(
        command=args.command,
        input_path=getattr(args, "input", None),
        n_max=args.nmax,
        tol=args.tol,
        output_path=args.output,
        format=args.format,
        decay_tol=args.decay_tol,
        group=args.group,
        p=args.p,
        kappa=args.kappa,
        mode=getattr(args, "mode", "isometry"),
        figure=args.figure,
    )


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except UsageError as exc:
        print(f"isometrize: error: {exc}", file=sys.stderr)
        return 1
    report = run(cfg)
    text = render(report, cfg.format)
    try:
        if cfg.figure and report.table:
            from .plotting import plot_report

            plot_report(report, cfg.figure)
        if cfg.output_path:
            with open(cfg.output_path, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"isometrize: error: {exc}", file=sys.stderr)
        return 1
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
