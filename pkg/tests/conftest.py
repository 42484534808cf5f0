import numpy as np
import pytest

from hetdr.networks import EntityIdMap, Network


@pytest.fixture
def drug_map():
    return EntityIdMap.from_names("drug", ["D1", "D2", "D3"])


@pytest.fixture
def protein_map():
    return EntityIdMap.from_names("protein", ["P1", "P2", "P3", "P4", "P5"])


def network_from_dense(dense, row_kind="drug", col_kind="protein", symmetric=False):
    """Build a Network from a dense array, storing every nonzero cell."""
    dense = np.asarray(dense, dtype=float)
    ri, ci = np.nonzero(dense)
    return Network(
        row_kind=row_kind,
        col_kind=col_kind,
        shape=dense.shape,
        row_idx=ri,
        col_idx=ci,
        weights=dense[ri, ci],
        symmetric=symmetric,
    )
