"""Smoke test for the ellstat Python extension.

Uses an installed `ellstat` module if there is one (e.g. a wheel built with
maturin), otherwise loads target/release/libellstat.so or the path in
$ELLSTAT_LIB after `cargo build --release -p ellstat-py`.
"""

import importlib.machinery
import importlib.util
import math
import os
import pathlib
import sys
from fractions import Fraction

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import ellstat

        return ellstat
    except ImportError:
        pass
    candidates = [os.environ.get("ELLSTAT_LIB")] + [
        str(ROOT / "target" / profile / name)
        for profile in ("release", "debug")
        for name in ("libellstat.so", "libellstat.dylib", "ellstat.dll")
    ]
    for path in filter(None, candidates):
        if os.path.exists(path):
            loader = importlib.machinery.ExtensionFileLoader("ellstat", path)
            spec = importlib.util.spec_from_loader("ellstat", loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    sys.exit("ellstat extension not found; run `cargo build --release -p ellstat-py`")


def main():
    es = load()

    shape = es.GroupShape(2, 3)
    assert shape.order() == 12 and shape.exponent() == 6 and not shape.is_cyclic()
    assert shape.stat("s") == es.subgroup_count(2, 6)
    assert es.subgroup_count(2, 2) == 5 and es.cyclic_subgroup_count(2, 2) == 4

    tally = es.tally_structures(101)
    assert sum(tally.values()) == 101 * 100
    assert es.weighted_average(5, "one") == 1.0

    g = es.g_density(7, 0, 0, 3, 3)
    assert isinstance(g, Fraction)
    value, level = es.f_ell(2, 2, 1, 7)
    assert value == Fraction(1, 3) and level >= 1
    assert 0 < es.probability_product(101, 1, 102, 100) < 1

    cyc = es.cyclicity_probability(101)
    assert 0.8 < float(cyc) < 0.85
    assert es.main_term(101, "s", "A", "half") > 0
    assert abs(es.delta(10.0, 0, 1) - 2.4298) < 1e-3
    lhs, env, ratio = es.mean_square_experiment(1e6, 1e6 + 500, 16)
    assert math.isclose(ratio, lhs / env)

    rows = es.run_sweep(50)
    assert [r["p"] for r in rows][:3] == [5, 7, 11] and len(rows) == 13
    slope, rms = es.fit_through_origin([r["x"] for r in rows], [r["avg_s_corrected"] for r in rows])
    assert slope > 0 and rms >= 0

    try:
        es.tally_structures(4)
    except ValueError:
        pass
    else:
        raise AssertionError("p = 4 accepted")

    print("python smoke test OK")


if __name__ == "__main__":
    main()
