"""Smoke test for the fbl_lab extension module.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml`
or `maturin build -m crates/py/Cargo.toml` followed by `pip install`.
"""

import math
import sys

import fbl_lab


def close(a, b, tol=1e-6):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    checks = []

    est = fbl_lab.norm("abs(d0)+abs(d1)", [[1, 0], [0, 1]], r=2)
    checks.append(("moduli sum over the Euclidean plane", close(est["lower"], 2.0)))

    est = fbl_lab.norm("abs(d0)-abs(d1)", [[1, 0], [0, 1]], r=2)
    checks.append(("moduli difference", close(est["lower"], math.sqrt(2), 1e-3)))

    est = fbl_lab.norm("d0", [[1, 0, 0]], r="inf", p="inf")
    checks.append(("single unit generator", close(est["lower"], 1.0) and close(est["upper"], 1.0)))

    a = [0.5, -1.0, 2.0, 0.25]
    haar = [[4.0 if i == 2 * k else -4.0 if i == 2 * k + 1 else 0.0 for i in range(8)] for k in range(4)]
    est = fbl_lab.moduli_norm(haar, [abs(t) for t in a], r=1, weights=[1 / 8] * 8)
    checks.append(("haar level moduli", close(est["lower"], sum(map(abs, a)), 1e-9)))

    est = fbl_lab.summing_norm([[1, -2], [0.5, 1]], domain_r="inf", codomain_r=1, p=1)
    checks.append(("π_1 on a sup-norm domain", close(est["lower"], 4.5, 1e-12)))

    est = fbl_lab.extension_constant(3, [[1, 1, 0], [0, 1, -1]], [[1, 0.5], [-0.3, 2]], p="inf")
    checks.append(("extension into ℓ_∞", close(est["upper"], 1.0, 1e-9)))

    rep = fbl_lab.run_experiment("haar-level", {"n": "2", "a": "1,2,3,4"})
    checks.append(("haar-level experiment", rep["passed"] and any(r["value"] == 10 for r in rep["records"])))

    try:
        fbl_lab.norm("abs(d0", [[1.0]], r=1)
        checks.append(("parse errors raise ValueError", False))
    except ValueError:
        checks.append(("parse errors raise ValueError", True))

    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return 0 if all(ok for _, ok in checks) else 1


if __name__ == "__main__":
    sys.exit(main())
