"""Quick end-to-end check of the cytorus Python bindings."""

import math
import sys
import tempfile

import cytorus_py as ct


def main() -> int:
    f = ct.Field.from_expression("0.1*cos(2*pi*x) + 0.05*sin(2*pi*(x+y))", 32)
    assert f.shape == (32, 32)
    assert abs(f.integrate()) < 1e-12

    g, shift = f.normalize_rhs()
    assert abs(sum(math.exp(v) for row in g.rows() for v in row) / 32**2 - 1.0) < 1e-12
    assert shift < 0.0

    q = f.laplacian()
    assert (q.poisson_solve().laplacian().max_abs() - q.max_abs()) < 1e-9

    for geometry in ["kt-xy", "nil4", "nil3-yt"]:
        sol = ct.solve(geometry, f)
        failed = [c for c in sol.checks() if not c[5]]
        assert sol.passed, (geometry, failed)
        print(f"{geometry:10s} passed  shift={sol.shift:+.3e}  checks={len(sol.checks())}")

    zero = ct.Field.from_rows([[0.0] * 8 for _ in range(8)])
    assert ct.solve("sol-foliation", zero).omega_change() == 0.0

    try:
        ct.solve("nil4", ct.Field.from_expression("0.3", 8), strict=True)
    except ValueError:
        pass
    else:
        raise AssertionError("strict mode accepted an unnormalized F")

    res = ct.solve_gma(1.0, 2.0, ct.Field.from_expression("0.1*sin(2*pi*x)*cos(2*pi*y)", 16), c=0.5, renormalize=True)
    assert res.passed and res.min_eigen_margin > 0.0
    print(f"gma        passed  residual={res.final_residual:.2e}")

    with tempfile.TemporaryDirectory() as tmp:
        code = ct.run_cli(["solve", "--geometry", "nil4", "--F", "0.1*cos(2*pi*y)", "--grid", "16", "--out", tmp + "/run"])
        assert code == 0, code
        ct.verify(tmp + "/run")
        assert ct.run_cli(["solve", "--geometry", "nil5", "--F", "0"]) == 2

    print("smoke test OK")
    return 0


if __name__ == "__main__":
    sys.exit(main())
