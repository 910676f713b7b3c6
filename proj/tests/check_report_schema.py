"""Run the pdx CLI over every bundled config and validate each emitted report.

usage: check_report_schema.py <pdx executable> <configs dir> <schema json> <work dir>
"""

import csv
import json
import os
import pathlib
import shutil
import subprocess
import sys

import jsonschema

CSV_HEADERS = {
    "crossing": ["t1", "t2", "p_cross", "p_never", "deviation"],
    "zeno": ["K", "delta_t", "frobenius_error", "empirical_order"],
}


def run(exe, args, out_dir):
    env = dict(os.environ, PDX_OUTPUT_DIR=str(out_dir))
    proc = subprocess.run([exe, *args], env=env, capture_output=True, text=True)
    if proc.returncode not in (0, 2):
        sys.exit(f"pdx {' '.join(args)} exited {proc.returncode}\n{proc.stdout}\n{proc.stderr}")
    return proc.returncode


def check_outputs(out_dir, validator, label):
    reports = sorted(out_dir.glob("*.json"))
    if not reports:
        sys.exit(f"{label}: no JSON report written")
    for path in reports:
        report = json.loads(path.read_text())
        errors = sorted(validator.iter_errors(report), key=lambda e: list(e.path))
        if errors:
            lines = [f"  {'/'.join(map(str, e.path))}: {e.message}" for e in errors[:10]]
            sys.exit(f"{label}: {path.name} does not match the schema\n" + "\n".join(lines))
        summary = report["summary"]
        gates = [g for e in report["experiments"] for g in e["gates"]]
        if summary["gates_total"] != len(gates) or summary["gates_passed"] != sum(g["passed"] for g in gates):
            sys.exit(f"{label}: summary counts disagree with the gate list")
    for path in out_dir.glob("*.csv"):
        with path.open(newline="") as fh:
            header = next(csv.reader(fh))
        for suffix, expected in CSV_HEADERS.items():
            if path.stem.endswith("_" + suffix) and header != expected:
                sys.exit(f"{label}: {path.name} header {header} != {expected}")


def main():
    exe, configs, schema_path, work = sys.argv[1:5]
    schema = json.loads(pathlib.Path(schema_path).read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    work = pathlib.Path(work)
    shutil.rmtree(work, ignore_errors=True)

    runs = [(f"verify-{p.stem}", ["verify", "--config", str(p)]) for p in sorted(pathlib.Path(configs).glob("*.yaml"))]
    zeno = str(pathlib.Path(configs) / "zeno_free.yaml")
    crossing = str(pathlib.Path(configs) / "crossing_at_surface.yaml")
    runs += [
        ("sweep", ["sweep", "--config", zeno, "--vary", "model.grid.n_points=64,128", "--threads", "2"]),
        ("crossing", ["crossing", "--config", crossing, "--set", "numeric.crossing.windows=4"]),
        ("oracle", ["oracle"]),
    ]
    for label, args in runs:
        out_dir = work / label
        code = run(exe, args, out_dir)
        check_outputs(out_dir, validator, label)
        print(f"{label}: exit {code}, schema ok")

    check_exit_codes(exe, configs, work, validator)


def check_exit_codes(exe, configs, work, validator):
    ident = str(pathlib.Path(configs) / "resolution_identity_free.yaml")
    bad = subprocess.run([exe, "verify", "--config", ident, "--set", "model.params.mass=-1"],
                         capture_output=True, text=True)
    if bad.returncode != 1 or "params.mass" not in bad.stderr:
        sys.exit(f"invalid config: expected exit 1 naming params.mass, got {bad.returncode}\n{bad.stderr}")

    blocker = work / "blocker"
    blocker.write_text("a file, not a directory")
    env = dict(os.environ, PDX_OUTPUT_DIR=str(blocker / "out"))
    proc = subprocess.run([exe, "verify", "--config", ident], env=env, capture_output=True, text=True)
    if proc.returncode != 1:
        sys.exit(f"unwritable output: expected exit 1, got {proc.returncode}")
    report = json.loads(proc.stdout[proc.stdout.index("{"):])
    if list(validator.iter_errors(report)):
        sys.exit("unwritable output: the report printed as a fallback does not match the schema")
    print("exit codes ok")


if __name__ == "__main__":
    main()
