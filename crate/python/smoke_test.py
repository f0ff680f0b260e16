"""Smoke test for the stablefield extension module."""

import math

import stablefield as sf


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b}"


def main():
    close(sf.distance("s2", [0, 0, 1], [0, 1, 0]), math.pi / 2, 1e-12)
    close(sf.symmdiff_measure("r1", [0.3], [1.1]), 0.8, 1e-12)
    close(sf.symmdiff_measure("h2", [0.0, 0.0], [0.5, 0.0]), sf.distance("h2", [0.0, 0.0], [0.5, 0.0]), 1e-7)
    close(sf.fractional_distance("r2", [0, 0], [1, 1], 0.5), 2 ** 0.25, 1e-7)

    cells = sf.CellTable.from_cells(2, [(1, 1.0), (2, 1.0), (3, 1.0)])
    one = sf.CellTable.from_cells(1, [(1, 1.3)])
    close(sf.poisson_parity_prob(one, 0.7, [1]), (1 - math.exp(-2 * 0.7 * 1.3)) / 2, 1e-14)
    odd = [sf.poisson_parity_prob(cells, 0.7, d) for d in ([1, 0], [0, 1], [1, 1])]
    assert 0 < sum(odd) < 1
    close(sf.mubeta_mass(cells, 0.5, [1, 1]), sf.mubeta_mass(cells, 0.5, [1, 1], quadrature=True), 1e-7)

    pts = [[0.2, 0.1], [-0.4, 0.3]]
    a = sf.sample_fdd("r2", pts, 1.5, 2000, seed=9, beta=0.6)
    b = sf.sample_fdd("r2", pts, 1.5, 2000, seed=9, beta=0.6)
    assert a == b and len(a) == 2000 and len(a[0]) == 2
    g = sf.sample_fdd("r1", [[1.0]], 2.0, 20000, seed=3)
    var = sum(x[0] ** 2 for x in g) / len(g)
    close(var, 2.0, 0.15)
    assert len(sf.sample_substable("r2", pts, 1.0, 2.0, 100, seed=1)) == 100

    k = sf.KarlinConfig(0.5, 2.0, 1e4)
    close(k.m_limit(sf.CellTable.from_cells(1, [(1, 1.0)]), [1]), 2.0, 1e-9)
    assert k.b_rho() > 0
    assert len(k.simulate(cells, 5, seed=2)) == 5

    try:
        sf.sample_fdd("r2", pts, 2.5, 10, seed=1)
    except ValueError:
        pass
    else:
        raise AssertionError("alpha > 2 accepted")
    print("python smoke test passed")


if __name__ == "__main__":
    main()
