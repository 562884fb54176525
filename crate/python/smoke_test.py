"""Smoke test for the pylpvq extension module.

Build first with `cargo build -p pylpvq --release`, then run
`python3 python/smoke_test.py`. The script copies the built library next to
a temporary import path so no install step is needed.
"""

import importlib
import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libpylpvq.so"
        if lib.exists():
            tmp = pathlib.Path(tempfile.mkdtemp())
            shutil.copy(lib, tmp / "pylpvq.so")
            sys.path.insert(0, str(tmp))
            return importlib.import_module("pylpvq")
    sys.exit("libpylpvq.so not found; run `cargo build -p pylpvq --release`")


def main():
    lp = load()

    norm = lp.Norm("euclidean", 2)
    assert math.isclose(norm.eval([3.0, 4.0]), 5.0)
    assert math.isclose(lp.Norm("q:3", 2).dual([1.0, 0.0]), 1.0)

    atoms = [(0.25, [0.0, 0.0]), (0.25, [0.2, 0.0]), (0.25, [10.0, 0.0]), (0.25, [10.2, 0.0])]
    space = lp.MeasureSpace(atoms)
    assert len(space) == 4 and space.dim == 2 and not space.infinite_mass
    assert math.isclose(space.mass(), 1.0)
    again = lp.MeasureSpace.from_json(space.to_json())
    assert again.to_json() == space.to_json()

    mean = lp.solve_pmean(space, [0, 1], norm, 2.0)
    assert all(math.isclose(a, b) for a, b in zip(mean["point"], [0.1, 0.0]))
    center = lp.solve_pmean(space, [0, 1, 2, 3], norm, math.inf)
    assert math.isclose(center["value"], 5.1)

    best, report = lp.quantize(space, norm, 2.0, 2, seed=7)
    assert math.isclose(report["cost"], 0.1)
    assert best.degree(space) == 2
    assert math.isclose(best.cost(space, norm, 2.0), report["cost"])
    assert lp.certify(space, norm, best, 2.0) == report["certificate"]

    oracle = lp.brute_force(space, norm, 2.0, 2)
    assert math.isclose(oracle["cost"], report["cost"])

    g = lp.SimpleFunction([[0.0, 0.0], [5.0, 0.0], [5.0, 0.0]], [0, 0, 1, 2])
    assert g.reduce(space).degree(space) == 2

    try:
        lp.Norm("q:1", 2)
    except ValueError:
        pass
    else:
        raise AssertionError("q:1 should be rejected")

    print("pylpvq smoke test passed")


if __name__ == "__main__":
    main()
