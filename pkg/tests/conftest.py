import numpy as np
import pytest

import potlab as pl


@pytest.fixture(scope="session")
def p3():
    """Path on {-2..2} with interior {-1, 0, 1}: the smallest lattice."""
    return pl.generate_graph(pl.GeometrySpec.lattice(1, 1))


@pytest.fixture(scope="session")
def p3_laplacian(p3):
    return pl.laplacian(p3)


@pytest.fixture(scope="session")
def p3_green(p3_laplacian):
    return pl.dirichlet_green(p3_laplacian)


@pytest.fixture(scope="session")
def lattice3_small():
    return pl.generate_graph(pl.GeometrySpec.lattice(3, 4))


@pytest.fixture(scope="session")
def radial_small():
    return pl.generate_graph(pl.GeometrySpec.radial(2.0, 4))


@pytest.fixture(scope="session")
def ones(p3):
    return np.ones(p3.n_vertices)
