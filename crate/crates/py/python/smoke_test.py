"""Quick checks against the compiled extension: python python/smoke_test.py"""

import math
import os
import tempfile

import qdiscord


def main():
    bell = qdiscord.DensityMatrix.named("bell")
    assert bell.dims == [2, 2]
    r = qdiscord.discord(bell, "qd", "A|B")
    assert abs(r.value - 1.0) < 1e-4, r
    assert r.certified

    cx = qdiscord.DensityMatrix.named("paper_cx_1p11")
    g = qdiscord.discord(cx, "gqd", "A|B|C")
    assert 0.199 <= g.value <= 0.209, g
    rep = qdiscord.check_discorrelated(cx, "gqd", "A|B|C", "A|B")
    assert rep["equality"] and not rep["dis_correlated"], rep

    checks = qdiscord.check_proposition(qdiscord.DensityMatrix.random([2, 2, 2], 2, 1), "prop1.item1")
    assert checks[0]["verdict"] == "holds", checks

    assert sorted(qdiscord.xi_set("A|B|C", "A|B")) == ["A|C", "B|C"]
    assert qdiscord.is_coarser("A|B|C", "AB|C")
    assert qdiscord.is_coarser("A|BC", "A|B") and not qdiscord.is_coarser("A|BC", "A|B", "gqd")

    alpha, eq = qdiscord.monogamy_alpha(1.0, [0.6, 0.6, 0.0])
    assert abs(alpha - math.log(2) / math.log(1 / 0.6)) < 1e-6 and not eq

    rows = [[complex(0.5), 0j], [0j, complex(0.5)]]
    mixed = qdiscord.DensityMatrix([2], rows)
    assert abs(mixed.entropy() - 1.0) < 1e-12

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "cx.state")
        cx.save(path)
        back = qdiscord.DensityMatrix.load(path)
        assert back.to_lists() == cx.to_lists()

    try:
        qdiscord.discord(bell, "qd", "A|X")
    except ValueError:
        pass
    else:
        raise AssertionError("bad partition accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
