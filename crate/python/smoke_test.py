"""Smoke test for the gglt Python module.

Build and install first:
    maturin build --release -m crates/py/Cargo.toml -o dist && pip install dist/gglt-*.whl
"""

import math
import os
import tempfile

import gglt


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    # Line graph with a single self-loop at the first vertex gives DST-7.
    line = gglt.Ggl.line_with_end_loops("c", "0", 8, 1.0)
    dst7 = gglt.closed_form("DST7", 8)
    gbt = gglt.gbt(line)
    for k in range(8):
        col_a = [row[k] for row in gbt.basis()]
        col_b = [row[k] for row in dst7.basis()]
        sign = 1.0 if sum(x * y for x, y in zip(col_a, col_b)) >= 0 else -1.0
        assert max(abs(x - sign * y) for x, y in zip(col_a, col_b)) < 1e-8
    assert max(row[5] for row in gglt.verify_dctdst()) < 1e-8

    x = [float(i % 5) for i in range(8)]
    assert all(close(a, b, 1e-9) for a, b in zip(gbt.inverse(gbt.forward(x)), x))

    # Learn a grid GGL from samples of a known one.
    truth = gglt.residual_precision("intra", 3)
    samples = gglt.sample_gmrf(truth, 500, 7)
    s = gglt.sample_covariance(samples)
    learned, objective, iterations, kkt = gglt.estimate_ggl(s, "grid")
    assert kkt < 1e-6 and iterations > 0 and math.isfinite(objective)
    assert learned.n == 9 and all(learned.edge_weight(0, j) >= 0 for j in range(1, 9))
    assert close(learned.quadratic_form([1.0] * 9), sum(learned.self_loops()), 1e-9)

    # Edge detection on a vertical step.
    block = [[0.0] * 4 + [100.0] * 4 for _ in range(8)]
    h_cut, v_cut, bits = gglt.detect_edges(block)
    assert sum(h_cut) == 8 and not any(v_cut) and bits > 0
    assert gglt.eagbt_transform(block).n == 64

    sse, rate, recon = gglt.encode_block(block, 22)
    assert sse >= 0 and rate > 0 and len(recon) == 8

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "d.bin")
        assert gglt.generate_dataset(path, "inter", 4, 10, 3, class_id=2) == 10
        n, blocks = gglt.load_dataset(path)
        assert n == 4 and len(blocks) == 10 and blocks[0][0] == 2

    curve = [(0.5, 30.0), (1.0, 33.0), (2.0, 36.5), (4.0, 40.0)]
    assert close(gglt.bd_rate(curve, curve), 0.0, 1e-9)
    assert close(gglt.bd_rate(curve, [(2 * r, p) for r, p in curve]), 100.0, 1e-6)
    assert gglt.waterfill([4.0, 1.0], 1.0) == (1.0, 2.0)
    assert gglt.edge_coding_gain(16, 1.0) > 0 > gglt.edge_coding_gain(16, 40.0)

    try:
        gglt.estimate_ggl([[1.0, 0.0], [0.0, 1.0]], "ring")
    except ValueError:
        pass
    else:
        raise AssertionError("bad connectivity accepted")

    print("gglt smoke test passed")


if __name__ == "__main__":
    main()
