#!/usr/bin/env python3
"""Recompute run_report.json aggregates from days.jsonl and compare.

Usage: audit_report.py <run dir>
Exit 0 when every aggregate and every compact row matches, 1 otherwise.
"""

import json
import math
import sys
from pathlib import Path


SHED_TOL = 1e-6  # MWh; a day counts as shed above this


def close(a, b, tol=1e-9):
    if isinstance(a, bool) or isinstance(b, bool) or isinstance(a, int) and isinstance(b, int):
        return a == b
    return math.isclose(a, b, rel_tol=tol, abs_tol=tol)


def aggregates(days):
    n = len(days)
    agg = {
        "days": n,
        "clean_shed_days": sum(d["clean_shed"] for d in days),
        "topology_shed_days": sum(d["topology"]["shed"] for d in days),
        "blind_shed_days": sum(d["blind"]["shed"] for d in days),
        "topology_changed_days": sum(d["topology"]["schedule_changed"] for d in days),
        "mean_clean_mape": sum(d["clean_mape"] for d in days) / n if n else 0.0,
        "mean_attacked_mape": sum(d["attacked_mape"] for d in days) / n if n else 0.0,
        "topology_shed_mwh": sum(d["topology"]["shed_mwh"] for d in days),
        "blind_shed_mwh": sum(d["blind"]["shed_mwh"] for d in days),
        "queries": sum(d["topology"]["queries"] + d["blind"]["queries"] for d in days),
    }
    return agg


def mismatches(run_dir):
    days = [json.loads(l) for l in (run_dir / "days.jsonl").read_text().splitlines() if l.strip()]
    report = json.loads((run_dir / "run_report.json").read_text())
    bad = []
    for key, value in aggregates(days).items():
        if key not in report["aggregates"] or not close(value, report["aggregates"][key]):
            bad.append({"field": key, "recomputed": value, "reported": report["aggregates"].get(key)})
    if len(report["rows"]) != len(days):
        bad.append({"field": "rows", "recomputed": len(days), "reported": len(report["rows"])})
    for d, r in zip(days, report["rows"]):
        for key in ("clean_shed", "clean_shed_mwh", "clean_cost", "clean_mape", "attacked_mape"):
            if not close(d[key], r[key]):
                bad.append({"field": f"{d['date']}.{key}", "recomputed": d[key], "reported": r[key]})
        for plan in ("topology", "blind"):
            for key in ("shed", "shed_mwh", "cost", "schedule_changed", "queries"):
                if not close(d[plan][key], r[plan][key]):
                    bad.append({"field": f"{d['date']}.{plan}.{key}", "recomputed": d[plan][key],
                                "reported": r[plan][key]})
        if any(d[p]["shed"] != (d[p]["shed_mwh"] > SHED_TOL) for p in ("topology", "blind")):
            bad.append({"field": f"{d['date']}.shed_flag", "recomputed": None, "reported": None})
    return bad


def main():
    if len(sys.argv) != 2:
        print(__doc__, file=sys.stderr)
        return 2
    run_dir = Path(sys.argv[1])
    for name in ("days.jsonl", "run_report.json"):
        if not (run_dir / name).exists():
            print(json.dumps({"error": "MissingArtifacts", "message": f"{name} not in {run_dir}"}), file=sys.stderr)
            return 1
    bad = mismatches(run_dir)
    print(json.dumps({"ok": not bad, "mismatches": bad}))
    return 0 if not bad else 1


if __name__ == "__main__":
    sys.exit(main())
