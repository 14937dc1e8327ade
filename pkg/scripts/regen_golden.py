"""Regenerate tests/golden/*.json from jobs/*.json.

    python3 scripts/regen_golden.py            # rewrite every golden file
    python3 scripts/regen_golden.py --check    # only report differences
"""
from __future__ import annotations

import argparse
import io
import sys
from pathlib import Path

from crystalcoh.cli import run

ROOT = Path(__file__).resolve().parents[1]
JOBS = ROOT / "jobs"
GOLDEN = ROOT / "tests" / "golden"


def produce(job: Path) -> tuple[int, str]:
    out, err = io.StringIO(), io.StringIO()
    code = run(["--job", str(job), "--quiet"], stdout=out, stderr=err)
    return code, out.getvalue()


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args()
    GOLDEN.mkdir(parents=True, exist_ok=True)
    stale = 0
    for job in sorted(JOBS.glob("*.json")):
        code, text = produce(job)
        target = GOLDEN / job.name
        old = target.read_text(encoding="utf-8") if target.exists() else None
        if old != text:
            stale += 1
            print(f"{'differs' if args.check else 'wrote'}: {target.relative_to(ROOT)} (exit {code})")
            if not args.check:
                target.write_text(text, encoding="utf-8")
        else:
            print(f"unchanged: {target.relative_to(ROOT)} (exit {code})")
    return 1 if (args.check and stale) else 0


if __name__ == "__main__":
    sys.exit(main())
