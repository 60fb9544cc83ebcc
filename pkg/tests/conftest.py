import json
from collections import namedtuple

import numpy as np
import pytest

from wce_nuclear.measure import AtomicSpace, SubAlgebra, Weight

Instance = namedtuple("Instance", "space alg u w")


def make_instance(rng, max_blocks=20, max_cells=8, zero_u_blocks=0.0, signed=True):
    """A random finite atomic space, a shuffled partition and weights u, w."""
    n_blocks = int(rng.integers(1, max_blocks + 1))
    sizes = rng.integers(1, max_cells + 1, size=n_blocks)
    total = int(sizes.sum())
    space = AtomicSpace.from_masses(rng.uniform(0.05, 3.0, size=total).tolist())

    ids = rng.permutation(np.arange(1, total + 1))
    groups = np.split(ids, np.cumsum(sizes)[:-1])
    alg = SubAlgebra.from_partition(space, [g.tolist() for g in groups])

    low = -2.0 if signed else 0.1
    u = rng.uniform(low, 2.0, size=total)
    w = rng.uniform(low, 2.0, size=total)
    if zero_u_blocks:
        for group in groups:
            if rng.random() < zero_u_blocks:
                u[group - 1] = 0.0
    return Instance(space, alg, Weight.from_values(space, u.tolist()), Weight.from_values(space, w.tolist()))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_instance():
    return make_instance


@pytest.fixture
def two_block_space():
    """Cells 1..4 with masses 1, 2, 1, 1 split into {1, 2} and {3, 4}."""
    space = AtomicSpace.from_masses([1.0, 2.0, 1.0, 1.0])
    alg = SubAlgebra.from_partition(space, [[1, 2], [3, 4]])
    return space, alg


@pytest.fixture
def base_config():
    return {
        "log_level": "warning",
        "space": {
            "cells": [
                {"id": 1, "mass": 1.0},
                {"id": 2, "mass": 2.0},
                {"id": 3, "mass": 1.0},
            ],
            "blocks": [[1, 2], [3]],
        },
        "weights": {
            "u": {"type": "table", "values": {"1": 1.0, "2": 2.0, "3": 3.0}},
            "w": {"type": "expr", "formula": "1/n"},
            "f": {"type": "table", "values": [3.0, 6.0, 1.0]},
        },
        "analysis": {"p": 3, "q": 2},
    }


@pytest.fixture
def write_config(tmp_path):
    def write(data, name="wce_config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return path

    return write
