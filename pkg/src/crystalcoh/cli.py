"""Command-line front end.

Jobs are JSON documents; every command writes one JSON report (sorted keys,
two-space indent, trailing newline) and a short human summary on stderr.

Exit codes: 0 pass, 1 mathematical failure, 2 input error, 3 inconclusive.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .cechalex import ca_complex
from .compare import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    ComparisonReport,
    CrystalSpec,
    ExperimentSpec,
    base_change_check,
    compare_derham_ca,
    _sig_doc,
)
from .crystal import CrystalData, check_integrability, check_quasi_nilpotent, de_rham_complex, torsion_horizontal
from .envelope import EnvelopeError, SchemePresentation, build_envelope
from .pdpoly import ParseError, format_element
from .ring import PrecisionError, cohomology, derived_mod_p

EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_INCONCLUSIVE = 0, 1, 2, 3
OUT_DIR_ENV = "CRYSTALCOH_OUT_DIR"
COMMANDS = ("envelope", "derham", "cech", "compare", "torsion", "selftest")
_STATUS_EXIT = {PASS: EXIT_PASS, FAIL: EXIT_FAIL, INCONCLUSIVE: EXIT_INCONCLUSIVE}


class JobError(ValueError):
    """Schema or semantic problem with a job document."""


# ---------------------------------------------------------------------------
# job documents
# ---------------------------------------------------------------------------

_KEYS = {
    "command": str,
    "prime": int,
    "precision": int,
    "nilpotency": int,
    "variables": list,
    "generators": list,
    "truncation": int,
    "crystal": dict,
    "level": int,
    "output": str,
    "checks": list,
    "e_prime": int,
    "stability_margin": int,
}
_REQUIRED = ("prime", "variables", "generators")
_CHECKS = ("derham_ca", "base_change")


@dataclass
class JobDocument:
    command: str | None
    prime: int
    precision: int
    nilpotency: int
    variables: list[str]
    generators: list[str]
    truncation: int = 8
    crystal: dict | None = None
    level: int = 2
    output: str | None = None
    checks: list[str] = field(default_factory=lambda: ["derham_ca"])
    e_prime: int = 1
    stability_margin: int = 2

    @classmethod
    def from_dict(cls, doc: Any) -> "JobDocument":
        if not isinstance(doc, dict):
            raise JobError("job document must be a JSON object")
        unknown = sorted(set(doc) - set(_KEYS))
        if unknown:
            raise JobError(f"unknown key(s): {', '.join(unknown)}")
        for k in _REQUIRED:
            if k not in doc:
                raise JobError(f"missing required key {k!r}")
        for k, v in doc.items():
            t = _KEYS[k]
            if t is int and (isinstance(v, bool) or not isinstance(v, int)):
                raise JobError(f"key {k!r} must be an integer")
            if t is not int and not isinstance(v, t):
                raise JobError(f"key {k!r} must be of type {t.__name__}")
        for k in ("variables", "generators", "checks"):
            if k in doc and not all(isinstance(s, str) for s in doc[k]):
                raise JobError(f"key {k!r} must be a list of strings")
        p = doc["prime"]
        if p < 2 or any(p % q == 0 for q in range(2, int(p**0.5) + 1)):
            raise JobError(f"prime {p} is not a prime")
        N = doc.get("nilpotency", 1)
        e = doc.get("precision", N)
        if N < 1 or e < N:
            raise JobError("need 1 <= nilpotency <= precision")
        if len(set(doc["variables"])) != len(doc["variables"]):
            raise JobError("variable names must be distinct")
        checks = doc.get("checks", ["derham_ca"])
        bad = [c for c in checks if c not in _CHECKS]
        if bad or not checks:
            raise JobError(f"checks must be a non-empty subset of {list(_CHECKS)}")
        if "command" in doc and doc["command"] not in COMMANDS:
            raise JobError(f"unknown command {doc['command']!r}")
        if "crystal" in doc:
            _validate_crystal(doc["crystal"])
        return cls(
            command=doc.get("command"),
            prime=p,
            precision=e,
            nilpotency=N,
            variables=list(doc["variables"]),
            generators=list(doc["generators"]),
            truncation=doc.get("truncation", 8),
            crystal=doc.get("crystal"),
            level=doc.get("level", 2),
            output=doc.get("output"),
            checks=list(checks),
            e_prime=doc.get("e_prime", 1),
            stability_margin=doc.get("stability_margin", 2),
        )

    @classmethod
    def load(cls, path: str | Path) -> "JobDocument":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise JobError(f"cannot read job file: {exc}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise JobError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(doc)

    def presentation(self) -> SchemePresentation:
        return SchemePresentation.from_strings(self.prime, self.nilpotency, self.variables, self.generators)

    def crystal_spec(self) -> CrystalSpec:
        if not self.crystal:
            return CrystalSpec()
        return CrystalSpec(self.crystal.get("rank", 1), self.crystal.get("connection", {}))

    def experiment(self) -> ExperimentSpec:
        return ExperimentSpec(self.presentation(), self.precision, self.truncation, self.level,
                              self.crystal_spec(), self.stability_margin)


def _validate_crystal(block: dict):
    extra = sorted(set(block) - {"rank", "connection"})
    if extra:
        raise JobError(f"unknown key(s) in crystal: {', '.join(extra)}")
    r = block.get("rank", 1)
    if isinstance(r, bool) or not isinstance(r, int) or r < 1:
        raise JobError("crystal rank must be a positive integer")
    conn = block.get("connection", {})
    if not isinstance(conn, dict):
        raise JobError("crystal connection must map variable names to matrices")
    for v, m in conn.items():
        if not (isinstance(m, list) and len(m) == r and all(isinstance(row, list) and len(row) == r for row in m)):
            raise JobError(f"connection matrix for {v!r} must be {r}x{r}")
        if not all(isinstance(x, str) for row in m for x in row):
            raise JobError(f"connection matrix entries for {v!r} must be strings")


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def render(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _job_doc(job: JobDocument) -> dict:
    out = {
        "prime": job.prime,
        "precision": job.precision,
        "nilpotency": job.nilpotency,
        "variables": job.variables,
        "generators": job.generators,
        "truncation": job.truncation,
        "level": job.level,
    }
    if job.crystal:
        out["crystal"] = job.crystal
    return out


def _form_label(env, I) -> str:
    names = env.omega_names
    return "^".join("d" + names[i] for i in I) if I else ""


def _vector_label(env, v) -> str:
    parts = [format_element(a) for a in v]
    return parts[0] if len(parts) == 1 else "[" + ", ".join(parts) + "]"


def _derham_rep(dr, deg, rep: dict[int, int]) -> str:
    vec = np.zeros(dr.complex.ranks[dr.complex.term(deg)], dtype=np.int64)
    for k, v in rep.items():
        vec[k] = v
    terms = []
    for I, v in dr.element(deg, vec):
        lab = _vector_label(dr.crystal.env, v)
        f = _form_label(dr.crystal.env, I)
        terms.append(f"({lab})*{f}" if f else lab)
    return " + ".join(terms) or "0"


def _table_doc(tab, max_weight, rep_label=None) -> dict:
    out = {}
    for deg in sorted(tab.groups):
        items = []
        for s in tab.groups[deg]:
            if max_weight is not None and s.weight is not None and s.weight > max_weight:
                continue
            item = {"exponent": s.exponent, "weight": s.weight}
            if rep_label is not None:
                item["representative"] = rep_label(deg, s.rep)
            items.append(item)
        items.sort(key=lambda it: (-1 if it["weight"] is None else it["weight"], it["exponent"], it.get("representative", "")))
        out[str(deg)] = items
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


@dataclass
class Outcome:
    document: dict
    exit_code: int
    summary: str


def cmd_envelope(job: JobDocument) -> Outcome:
    env = build_envelope(job.presentation(), job.precision, job.truncation)
    env.check_consistent()
    doc = {
        "command": "envelope",
        "job": _job_doc(job),
        "kind": env.kind.value,
        "variables": list(env.ambient.names),
        "weights": list(env.ambient.weights),
        "basis": [{"label": env.basis_label(i), "weight": b.weight, "order": b.order} for i, b in enumerate(env.basis)],
        "length": sum(b.order for b in env.basis),
        "normal_form": env.dump().splitlines(),
    }
    summary = f"envelope ({env.kind.value}): {len(env.basis)} generators, length {doc['length']} over Z/{env.p}^{env.e}"
    return Outcome(doc, EXIT_PASS, summary)


def _crystal(job: JobDocument, d: int | None = None) -> CrystalData:
    env = build_envelope(job.presentation(), job.precision, job.truncation if d is None else d)
    return job.crystal_spec().build(env)


def cmd_derham(job: JobDocument) -> Outcome:
    c = _crystal(job)
    integ = check_integrability(c)
    qn = check_quasi_nilpotent(c)
    doc = {"command": "derham", "job": _job_doc(job), "integrable": integ.ok, "quasi_nilpotent": qn.ok}
    if not integ.ok:
        doc["detail"] = integ.detail
        return Outcome(doc, EXIT_FAIL, f"connection is not integrable: {integ.detail}")
    dr = de_rham_complex(c)
    tab = cohomology(dr.complex)
    mw = job.truncation if c.is_constant else None
    doc.update({
        "ranks": list(dr.complex.ranks),
        "cohomology": _table_doc(tab, mw, lambda deg, rep: _derham_rep(dr, deg, rep)),
        "stable_weights": mw,
    })
    lines = [f"H^{k} = {tab.describe(k, mw)}" for k in sorted(tab.groups)]
    return Outcome(doc, EXIT_PASS, "; ".join(lines))


def cmd_cech(job: JobDocument) -> Outcome:
    c = _crystal(job)
    L = job.level
    cx = ca_complex(c, L)
    degs = list(range(0, L))
    tab = cohomology(cx, degrees=degs)
    mw = job.truncation if c.is_constant else None
    doc = {
        "command": "cech",
        "job": _job_doc(job),
        "ranks": list(cx.ranks),
        "lengths": [cx.length(k) for k in cx.degrees],
        "cohomology": _table_doc(tab, mw),
        "degrees_reported": degs,
    }
    return Outcome(doc, EXIT_PASS, "; ".join(f"H^{k} = {tab.describe(k, mw)}" for k in degs))


def _report_outcome(reports: list[ComparisonReport], doc: dict) -> Outcome:
    states = [r.status for r in reports]
    status = FAIL if FAIL in states else INCONCLUSIVE if INCONCLUSIVE in states else PASS
    doc["status"] = status
    return Outcome(doc, _STATUS_EXIT[status], "\n".join(r.summary() for r in reports))


def cmd_compare(job: JobDocument) -> Outcome:
    spec = job.experiment()
    reports = []
    if "derham_ca" in job.checks:
        reports.append(compare_derham_ca(spec))
    if "base_change" in job.checks:
        reports.append(base_change_check(spec, job.e_prime))
    doc = {"command": "compare", "job": _job_doc(job), "reports": [r.to_document() for r in reports]}
    return _report_outcome(reports, doc)


def cmd_torsion(job: JobDocument) -> Outcome:
    spec = job.experiment()
    if spec.e < 2:
        raise JobError("torsion search needs precision >= 2")
    rep = ComparisonReport("torsion", spec.describe())
    found = {}
    for dd in spec.truncations():
        c = spec.crystal.build(spec.envelope(dd))
        taus = torsion_horizontal(c)
        env = c.env
        found[dd] = sorted(
            ({"weight": min(env.ambient.weight(m) for a in t for m in a.terms), "tau": _vector_label(env, t)} for t in taus),
            key=lambda x: (x["weight"], x["tau"]),
        )
        rep.add(f"p-torsion horizontal element exists (d={dd})", bool(taus), f"{len(taus)} class(es)")
        der = derived_mod_p(de_rham_complex(c).complex, 1)
        h1 = der.by_weight(-1, dd if c.is_constant else None)
        rep.add(f"H^-1 of the derived reduction is nonzero (d={dd})", bool(h1), str(_sig_doc({-1: h1})["-1"]))
    d = spec.d
    lo = [t for t in found[d]]
    hi = [t for t in found[d + spec.margin] if t["weight"] <= d]
    rep.add("torsion classes stable between d and d+margin", lo == hi if lo else None)
    rep.extra["tau"] = {f"d={dd}": v for dd, v in found.items()}
    rep.stable_range = {"max_weight": d, "truncations": list(spec.truncations())}
    doc = {"command": "torsion", "job": _job_doc(job), "reports": [rep.to_document()]}
    return _report_outcome([rep], doc)


def cmd_selftest(job: JobDocument | None = None) -> Outcome:
    from .selftest import run_selftest

    results = run_selftest()
    ok = all(r["ok"] for r in results)
    doc = {"command": "selftest", "version": __version__, "checks": results, "status": PASS if ok else FAIL}
    summary = "\n".join(f"[{'pass' if r['ok'] else 'FAIL'}] {r['name']}" for r in results)
    return Outcome(doc, EXIT_PASS if ok else EXIT_FAIL, summary)


HANDLERS = {
    "envelope": cmd_envelope,
    "derham": cmd_derham,
    "cech": cmd_cech,
    "compare": cmd_compare,
    "torsion": cmd_torsion,
    "selftest": cmd_selftest,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crystalcoh", description=__doc__.splitlines()[0])
    ap.add_argument("command", nargs="?", choices=COMMANDS, help="command (defaults to the job's 'command' key)")
    ap.add_argument("--job", help="path to a JSON job document")
    ap.add_argument("--out", help="write the JSON report here (default: stdout, or $%s/<command>.json)" % OUT_DIR_ENV)
    ap.add_argument("--degree", type=int, help="override the truncation degree d")
    ap.add_argument("--level", type=int, help="override the level cap L")
    ap.add_argument("--stability-margin", type=int, default=None, help="recompute at d + k (default 2)")
    ap.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    ap.add_argument("--quiet", action="store_true", help="suppress the summary on stderr")
    ap.add_argument("--version", action="version", version=f"crystalcoh {__version__}")
    return ap


def _apply_overrides(job: JobDocument, args) -> JobDocument:
    if args.degree is not None:
        job.truncation = args.degree
    if args.level is not None:
        job.level = args.level
    if args.stability_margin is not None:
        job.stability_margin = args.stability_margin
    if job.truncation < 0 or job.level < 1 or job.stability_margin < 1:
        raise JobError("need truncation >= 0, level >= 1 and stability margin >= 1")
    return job


def _output_path(args, job: JobDocument | None, command: str) -> Path | None:
    if args.out:
        return Path(args.out)
    if job is not None and job.output:
        return Path(job.output)
    env_dir = os.environ.get(OUT_DIR_ENV)
    if env_dir:
        return Path(env_dir) / f"{command}.json"
    return None


def run(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise JobError("--threads must be positive")
        job = JobDocument.load(args.job) if args.job else None
        command = args.command or (job.command if job else None)
        if command is None:
            raise JobError("no command given (positional argument or the job's 'command' key)")
        if job is not None and job.command and args.command and job.command != args.command:
            raise JobError(f"command {args.command!r} contradicts the job's command {job.command!r}")
        if command != "selftest":
            if job is None:
                raise JobError(f"command {command!r} needs --job")
            _apply_overrides(job, args)
        t0 = time.perf_counter()
        outcome = HANDLERS[command](job)
        elapsed = time.perf_counter() - t0
    except (JobError, ParseError, EnvelopeError, PrecisionError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INPUT
    text = render(outcome.document)
    path = _output_path(args, job, command)
    if path is None:
        stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    if not args.quiet:
        print(outcome.summary, file=stderr)
        print(f"({elapsed:.2f} s, exit {outcome.exit_code})", file=stderr)
    return outcome.exit_code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
