"""Smoke test for the walkdim extension module.

Build first:  pip install maturin && maturin develop -m crates/python/Cargo.toml
"""

import sys
import tempfile

import walkdim


def close(a, b, tol):
    return abs(a - b) <= tol * abs(b)


def main():
    line = walkdim.euclidean("interval", 961, 1.2)
    mu = walkdim.Measure.uniform(len(line))
    centre = line.nearest_to([0.0])
    field = walkdim.exit_times(line, mu, 0.05, centre, 1.0)
    assert close(field.value_at(centre), 1200.0, 0.05), field.value_at(centre)

    assert abs(walkdim.koch_alpha(0.0, 5.0, 80.0) - 1.001) < 5e-4
    assert abs(walkdim.koch_alpha(1.0, 5.0, 80.0) - 1.625) < 5e-4

    gasket = walkdim.gasket(0.5, 0.5, 7)
    assert len(gasket) > 1000 and gasket.dim == 2

    graph = walkdim.WalkGraph(line, 0.01)
    assert graph.is_connected()

    op = walkdim.KilledOperator(line, mu, 0.1, centre, 0.5, [2.0] * len(line))
    assert op.spectral_radius() < 1.0
    lam, vec = op.bottom_eigenvalue()
    assert lam > 0 and len(vec) == len(op)

    try:
        walkdim.Measure([1.0, -1.0])
    except walkdim.ValidationError:
        pass
    else:
        raise AssertionError("negative weight accepted")

    with tempfile.TemporaryDirectory() as out:
        ok, rows = walkdim.reproduce_paper("euclid", 0, out)
    failed = [r for r in rows if not r[5]]
    assert ok, failed

    print(f"walkdim smoke test passed ({len(rows)} reference rows, lambda_1 = {lam:.4f})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
