import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from singular_em.errors import ConfigurationError, CouplingError
from singular_em.randomness import (
    LATTICE_BITS,
    BrownianTable,
    GridSpec,
    coarsen,
    coarsen_increments,
    generate_increments,
    generate_table,
    normal_entry,
    standard_normals,
)

seeds = st.integers(0, 2**64 - 1)
paths = st.integers(0, 2**40)


@pytest.mark.parametrize("T, n", [(0.0, 4), (-1.0, 4), (math.inf, 4), (1.0, 0), (1.0, 2.5), (1.0, True)])
def test_gridspec_rejects_bad_input(T, n):
    with pytest.raises(ConfigurationError):
        GridSpec(T, n)


def test_gridspec_times_and_dt():
    g = GridSpec(2.0, 8)
    assert g.dt == 0.25
    t = g.times()
    assert t[0] == 0.0 and t[-1] == 2.0 and t.size == 9
    assert g.coarsened(4) == GridSpec(2.0, 2)
    assert g.refined(2) == GridSpec(2.0, 16)


def test_table_is_read_only_and_shaped():
    table = generate_table(1, 2, GridSpec(1.0, 16), 2)
    assert table.increments.shape == (16, 2)
    with pytest.raises(ValueError):
        table.increments[0, 0] = 1.0
    with pytest.raises(ConfigurationError):
        BrownianTable(GridSpec(1.0, 4), 1, np.zeros((3, 1)), 0, 0)


def test_streams_are_keyed_by_seed_and_path():
    a = standard_normals(5, 9, 32, 2)
    assert np.array_equal(a, standard_normals(5, 9, 32, 2))
    assert not np.array_equal(a, standard_normals(5, 10, 32, 2))
    assert not np.array_equal(a, standard_normals(6, 9, 32, 2))


@given(seeds, paths, st.integers(0, 63), st.integers(1, 3), st.data())
def test_normal_entry_addresses_single_draw(seed, path, step, m, data):
    coord = data.draw(st.integers(0, m - 1))
    full = standard_normals(seed, path, step + 1, m)
    assert normal_entry(seed, path, step, coord, m) == full[step, coord]


@given(seeds, paths, st.integers(1, 40), st.integers(1, 40))
def test_longer_streams_extend_shorter_ones(seed, path, n, extra):
    short = standard_normals(seed, path, n, 1)
    long = standard_normals(seed, path, n + extra, 1)
    assert np.array_equal(short, long[:n])


def test_normals_have_unit_moments():
    z = np.concatenate([standard_normals(3, k, 1000, 1).ravel() for k in range(100)])
    assert abs(z.mean()) < 4 / math.sqrt(z.size)
    assert abs(z.var() - 1) < 4 * math.sqrt(2 / z.size)


@given(seeds, paths, st.sampled_from([1, 2, 3]))
def test_increments_live_on_dyadic_lattice(seed, path, m):
    inc = generate_table(seed, path, GridSpec(1.0, 32), m).increments
    scaled = inc * 2.0**LATTICE_BITS
    assert np.array_equal(scaled, np.rint(scaled))


def test_generate_increments_matches_tables():
    grid = GridSpec(1.0, 16)
    stack = generate_increments(4, [3, 0, 7], grid, 2)
    for row, k in enumerate([3, 0, 7]):
        assert np.array_equal(stack[row], generate_table(4, k, grid, 2).increments)


@given(seeds, paths, st.sampled_from([1, 2, 4, 8, 16]), st.integers(1, 3))
def test_coarse_increment_is_exact_block_sum(seed, path, factor, m):
    table = generate_table(seed, path, GridSpec(1.0, 64), m)
    coarse = coarsen(table, factor)
    assert coarse.grid.n_steps == 64 // factor
    for k in range(coarse.grid.n_steps):
        block = table.increments[k * factor : (k + 1) * factor]
        for c in range(m):
            acc = 0.0
            for v in block[:, c]:
                acc += v
            assert acc == coarse.increments[k, c]
            # lattice sums are exact, so association does not matter
            assert math.fsum(block[:, c]) == coarse.increments[k, c]


def test_nested_coarsening_commutes():
    table = generate_table(0, 0, GridSpec(1.0, 64), 1)
    assert np.array_equal(coarsen(coarsen(table, 2), 4).increments, coarsen(table, 8).increments)


def test_brownian_path_starts_at_zero():
    table = generate_table(2, 2, GridSpec(1.0, 8), 1)
    w = table.brownian_path()
    assert w.shape == (9, 1) and w[0, 0] == 0.0
    assert np.allclose(np.diff(w, axis=0), table.increments)


@pytest.mark.parametrize("factor", [3, 0, -2, 2.0])
def test_bad_factors_are_coupling_errors(factor):
    table = generate_table(0, 0, GridSpec(1.0, 16), 1)
    with pytest.raises(CouplingError):
        coarsen(table, factor)
    with pytest.raises(CouplingError):
        coarsen_increments(table.increments, factor)


def test_seed_validation():
    with pytest.raises(ConfigurationError):
        standard_normals(-1, 0, 4, 1)
    with pytest.raises(ConfigurationError):
        standard_normals(0, 2**64, 4, 1)
