"""Acceptance gate: one PASS/FAIL line per criterion.

Run with ``pytest -v tests/test_acceptance.py`` or directly with
``python tests/test_acceptance.py``.  Monte Carlo criteria use the desk
scale (500 runs, B = 500) with fixed seeds and take a few minutes on one core.
"""
import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
import oracle  # noqa: E402
from rmfanova import (FunctionalDataset, SimulationSpec, estimate_covariance,  # noqa: E402
                      estimate_fwer, estimate_rejection_rates, f_pointwise, ssa_pointwise,
                      ssr_pointwise, statistic_C, statistic_D, write_dataset_csv)
from rmfanova.posthoc import bonferroni  # noqa: E402
from rmfanova.simulation import dti_standin  # noqa: E402

N_RUNS = 500
B = 500
WORKERS = os.cpu_count() or 1
ALPHA = 0.05


def report(number, ok, detail, capsys=None):
    line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)
    return ok


def pct(x):
    return f"{100 * x:.1f}%"


def rate(summary, stat, method):
    return {(k.value, m.value): v for (k, m), v in summary.rejection_rate.items()}[(stat, method)]


# ---------------------------------------------------------------------------
# 1. hand-derived examples against brute-force oracles
# ---------------------------------------------------------------------------

def check_oracles():
    start = time.perf_counter()
    failures = []

    def close(name, got, want):
        got, want = np.atleast_1d(got).astype(float), np.atleast_1d(want).astype(float)
        if not np.allclose(got, want, rtol=1e-10, atol=0):
            failures.append(f"{name}: {got} vs {want}")

    def table(values, p=5):
        v = np.asarray(values, dtype=float)
        return FunctionalDataset(np.repeat(v[:, :, None], p, axis=2))

    four = table([[0, 2], [0, 2]])
    close("SSA=4", ssa_pointwise(four).values, oracle.ssa(four.values))
    close("SSA=4 value", ssa_pointwise(four).values, 4.0)
    one = table([[0, 2], [1, 1]])
    close("SSR=1", ssr_pointwise(one).values, oracle.ssr(one.values))
    close("SSR=1 value", ssr_pointwise(one).values, 1.0)
    close("F=1", f_pointwise(one).values, oracle.f_point(one.values))
    close("F=1 value", f_pointwise(one).values, 1.0)
    t = four.grid.points.tolist()
    close("C=4", statistic_C(four), oracle.stat_C(four.values, t))
    close("D=1", statistic_D(one), oracle.stat_D(one.values, t))
    f = np.array([[1.0, -2.0, 0.5], [3.0, 0.25, -1.0]])
    pair = FunctionalDataset(np.stack([f, -f]))
    v = f.reshape(-1)
    close("cov=2ff'", estimate_covariance(pair).matrix, oracle.covariance(pair.values))
    close("cov=2ff' value", estimate_covariance(pair).matrix, 2 * np.outer(v, v))
    close("Bonferroni 0.01 x6", bonferroni([0.01] * 6, ALPHA)[0], oracle.bonferroni([0.01] * 6))
    close("Bonferroni 0.01 x6 value", bonferroni([0.01] * 6, ALPHA)[0][0], 0.06)
    close("Bonferroni cap", bonferroni([0.30] * 6, ALPHA)[0], 1.0)
    elapsed = time.perf_counter() - start
    return failures, elapsed


def criterion_1():
    failures, elapsed = check_oracles()
    ok = not failures and elapsed < 1.0
    detail = f"13 hand examples vs loop oracles at 1e-10 rel, {elapsed:.3f}s (< 1s)"
    if failures:
        detail += "; mismatches: " + "; ".join(failures)
    return ok, detail


# ---------------------------------------------------------------------------
# 2. empirical size under M1
# ---------------------------------------------------------------------------

def size_summaries():
    out = {}
    for rho in (0.0, 0.75):
        spec = SimulationSpec(model="M1", distribution="normal", rho=rho, n=35, B=B,
                              n_runs=N_RUNS, alpha=ALPHA, seed=101)
        out[rho] = estimate_rejection_rates(spec, "CDE", ["P1", "P2"], threads=WORKERS)
    return out


def criterion_2():
    s = size_summaries()
    d0, d75 = rate(s[0.0], "D", "P1"), rate(s[0.75], "D", "P1")
    c_p2 = rate(s[0.75], "C", "P2")
    e75 = rate(s[0.75], "E", "P1")
    checks = [
        0.026 <= d0 <= 0.076,
        0.026 <= d75 <= 0.076,
        c_p2 <= 0.01,
        0.05 <= e75 <= 0.12,
    ]
    detail = (f"P1+D rho=0 {pct(d0)} and rho=0.75 {pct(d75)} (target 5.1 +/- 2.5); "
              f"P2+C rho=0.75 {pct(c_p2)} (<= 1.0); P1+E rho=0.75 {pct(e75)} (in [5, 12])")
    return all(checks), detail


# ---------------------------------------------------------------------------
# 3. empirical power under M2
# ---------------------------------------------------------------------------

def criterion_3():
    runs = {}
    for rho in (0.0, 0.75):
        spec = SimulationSpec(model="M2", distribution="normal", rho=rho, n=35, B=B,
                              n_runs=N_RUNS, alpha=ALPHA, seed=202)
        runs[rho] = estimate_rejection_rates(spec, "CDE", ["P1"], threads=WORKERS)
    e75, c75 = rate(runs[0.75], "E", "P1"), rate(runs[0.75], "C", "P1")
    d0, d75 = rate(runs[0.0], "D", "P1"), rate(runs[0.75], "D", "P1")
    checks = [e75 >= 0.99, 0.93 <= c75 <= 1.0, d75 - d0 >= 0.30]
    detail = (f"P1+E rho=0.75 {pct(e75)} (>= 99); P1+C rho=0.75 {pct(c75)} (in [93, 100]); "
              f"P1+D rho=0.75 {pct(d75)} minus rho=0 {pct(d0)} = {100 * (d75 - d0):.1f} pp (>= 30)")
    return all(checks), detail


# ---------------------------------------------------------------------------
# 4. family-wise error under M1
# ---------------------------------------------------------------------------

def criterion_4():
    spec = SimulationSpec(model="M1", distribution="normal", rho=0.0, n=35, B=B,
                          n_runs=N_RUNS, alpha=ALPHA, seed=303)
    s = estimate_fwer(spec, "CDE", ["P1", "P2", "B1", "B2", "B3"], threads=WORKERS)
    bound = ALPHA + 3 * math.sqrt(ALPHA * (1 - ALPHA) / N_RUNS)
    cells = {f"{k.value}-{m.value}": v for (k, m), v in s.fwer.items()}
    worst = max(cells, key=cells.get)
    ok = all(v <= bound for v in cells.values())
    detail = (f"15 cells, max {worst} {pct(cells[worst])} (bound {pct(bound)}); "
              + ", ".join(f"{c} {100 * v:.1f}" for c, v in cells.items()))
    return ok, detail


# ---------------------------------------------------------------------------
# 5. property suite
# ---------------------------------------------------------------------------

def criterion_5():
    path = Path(__file__).with_name("test_properties.py")
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           str(path)], capture_output=True, text=True, cwd=path.parent.parent)
    elapsed = time.perf_counter() - start
    ok = proc.returncode == 0 and elapsed < 30.0
    last = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    return ok, f"property suite: {last.strip()} in {elapsed:.1f}s (< 30s)"


# ---------------------------------------------------------------------------
# 6. four-visit workflow on a synthetic stand-in
# ---------------------------------------------------------------------------

def _cli(args):
    return subprocess.run([sys.executable, "-m", "rmfanova", *map(str, args)],
                          capture_output=True, text=True)


def criterion_6(tmp_path):
    data = dti_standin(seed=17)
    src = tmp_path / "fa_profiles.csv"
    write_dataset_csv(data, src)
    outputs, problems = [], []
    for rep in range(2):
        test_json = tmp_path / f"test{rep}.json"
        post_json = tmp_path / f"posthoc{rep}.json"
        post_csv = tmp_path / f"posthoc{rep}.csv"
        a = _cli(["test", "--input", src, "--B", 1000, "--seed", 2024, "--out", test_json])
        b = _cli(["posthoc", "--input", src, "--B", 1000, "--seed", 2024, "--out", post_json,
                  "--table", post_csv])
        if a.returncode or b.returncode:
            problems.append(f"exit codes {a.returncode}/{b.returncode}: {a.stderr}{b.stderr}")
            break
        outputs.append((test_json.read_bytes(), post_json.read_bytes(), post_csv.read_bytes()))
    if not problems:
        post = json.loads(outputs[0][1])
        if data.shape != (17, 4, 93):
            problems.append(f"stand-in shape {data.shape}")
        if len(json.loads(outputs[0][0])["results"]) != 15:
            problems.append("test report does not hold 15 statistic-method results")
        if any(r["m"] != 6 or len(r["pairs"]) != 6 for r in post["reports"]):
            problems.append("post hoc reports are not 6-pair reports")
        rows = outputs[0][2].decode().splitlines()
        if [r.split(",")[0] for r in rows[1:]] != ["1-2", "1-3", "1-4", "2-3", "2-4", "3-4"]:
            problems.append("post hoc table rows are not the 6 pairs")
        if outputs[0] != outputs[1]:
            problems.append("repeated runs differ")
    detail = ("n=17, ell=4, p=93 stand-in: test (15 results) + posthoc (15 x 6-pair reports), "
              "byte-identical on repeat") if not problems else "; ".join(problems)
    return not problems, detail


# ---------------------------------------------------------------------------
# pytest entry points
# ---------------------------------------------------------------------------

def _gate(number, outcome, capsys):
    ok, detail = outcome
    assert report(number, ok, detail, capsys)


def test_criterion_1_oracles(capsys):
    _gate(1, criterion_1(), capsys)


def test_criterion_2_size(capsys):
    _gate(2, criterion_2(), capsys)


def test_criterion_3_power(capsys):
    _gate(3, criterion_3(), capsys)


def test_criterion_4_fwer(capsys):
    _gate(4, criterion_4(), capsys)


def test_criterion_5_properties(capsys):
    _gate(5, criterion_5(), capsys)


def test_criterion_6_workflow(tmp_path, capsys):
    _gate(6, criterion_6(tmp_path), capsys)


if __name__ == "__main__":
    import tempfile
    checks = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
              lambda: criterion_6(Path(tempfile.mkdtemp()))]
    passed = [report(k, *check()) for k, check in enumerate(checks, start=1)]
    sys.exit(0 if all(passed) else 1)
