from __future__ import annotations

import numpy as np
import pytest

from relgeo.catalog import CATALOG_NAMES, get_surface
from relgeo.chart import (
    EQUIAFFINE,
    EUCLIDEAN,
    finite_difference_jet,
    immersion_jet,
    multi_indices,
    scaled_equiaffine,
    seeded_custom_normalization,
)


def four_normalizations(chart):
    return (EUCLIDEAN, EQUIAFFINE, scaled_equiaffine(2.0),
            seeded_custom_normalization(chart.params, seed=0))


def jet_discrepancy(chart, p, order=4):
    """Largest entrywise |exact - fd| / max(1, |exact|) over all multi-indices."""
    exact = immersion_jet(chart, p, order)
    fd = finite_difference_jet(chart, p, order)
    worst = 0.0
    for idx in multi_indices(chart.n, order):
        a = np.asarray(exact[idx], dtype=float)
        b = np.asarray(fd[idx], dtype=float)
        worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a)))))
    return worst


@pytest.fixture(params=CATALOG_NAMES)
def catalog_chart(request):
    return get_surface(request.param).chart
