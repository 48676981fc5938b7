import numpy as np
import pytest

import oracle
from rmfanova import FunctionalDataset, Grid, f_pointwise, ssa_pointwise, ssr_pointwise
from rmfanova.pointwise import PointwiseTrace, f_ratio, sums_of_squares, write_traces_csv


def at_points(table, p=3):
    v = np.asarray(table, dtype=float)
    return FunctionalDataset(np.repeat(v[:, :, None], p, axis=2))


# rows = subjects, columns = conditions
EQUAL_MEANS = [[1, 1], [3, 3]]
SSA_FOUR = [[0, 2], [0, 2]]
SSR_ONE = [[0, 2], [1, 1]]


def test_ssa_hand_examples():
    assert np.all(ssa_pointwise(at_points(EQUAL_MEANS)).values == 0.0)
    d = at_points(SSA_FOUR)
    assert np.allclose(ssa_pointwise(d).values, 4.0, rtol=1e-12)
    assert np.allclose(oracle.ssa(d.values), 4.0, rtol=1e-12)


def test_ssr_hand_example():
    d = at_points(SSR_ONE)
    assert np.allclose(ssr_pointwise(d).values, 1.0, rtol=1e-12)
    assert np.allclose(oracle.ssr(d.values), 1.0, rtol=1e-12)
    assert np.allclose(ssa_pointwise(d).values, 1.0, rtol=1e-12)


def test_f_hand_example():
    d = at_points(SSR_ONE)
    assert np.allclose(f_pointwise(d).values, 1.0, rtol=1e-12)
    assert np.allclose(oracle.f_point(d.values), 1.0, rtol=1e-12)


def test_traces_match_oracle_on_random_data():
    rng = np.random.default_rng(3)
    for n, ell, p in [(2, 2, 3), (3, 4, 5), (6, 3, 4)]:
        y = rng.normal(size=(n, ell, p))
        d = FunctionalDataset(y)
        assert np.allclose(ssa_pointwise(d).values, oracle.ssa(y), rtol=1e-10, atol=0)
        assert np.allclose(ssr_pointwise(d).values, oracle.ssr(y), rtol=1e-10, atol=0)
        assert np.allclose(f_pointwise(d).values, oracle.f_point(y), rtol=1e-10, atol=0)


def test_additive_data_has_zero_residual():
    mu = np.array([[0.0, 1.0, 2.0], [3.0, -1.0, 0.5]])          # (ell, p)
    beta = np.array([0.25, -2.0, 1.0])[:, None, None]
    d = FunctionalDataset(mu[None] + beta)
    assert np.allclose(ssr_pointwise(d).values, 0.0, atol=1e-24)


def test_subject_constants_leave_ssr_and_f_unchanged():
    rng = np.random.default_rng(4)
    y = rng.normal(size=(5, 3, 6))
    c = rng.normal(size=(5, 1, 6))
    a, b = FunctionalDataset(y), FunctionalDataset(y + c)
    assert np.allclose(ssr_pointwise(a).values, ssr_pointwise(b).values, rtol=1e-10)
    assert np.allclose(f_pointwise(a).values, f_pointwise(b).values, rtol=1e-10)


def test_ssa_quadratic_homogeneity():
    rng = np.random.default_rng(5)
    y = rng.normal(size=(4, 3, 5))
    assert np.allclose(ssa_pointwise(FunctionalDataset(3 * y)).values,
                       9 * ssa_pointwise(FunctionalDataset(y)).values, rtol=1e-12)


def test_zero_numerator_gives_zero_f():
    d = at_points([[0, 1], [1, 0], [5, 5]])
    f = f_pointwise(d)
    assert np.all(ssa_pointwise(d).values == 0)
    assert np.all(f.values == 0) and not f.has_degenerate


def test_degenerate_points():
    y = np.zeros((3, 2, 3))
    # point 0: everything equal (0/0 -> F = 0); point 1: additive with effect (SSR = 0, SSA > 0)
    y[:, 1, 1] = 1.0
    y[:, :, 2] = [[0.0, 1.0], [0.5, 0.2], [1.0, 3.0]]
    f = f_pointwise(FunctionalDataset(y))
    assert f.values[0] == 0.0
    assert f.degenerate.tolist() == [False, True, False]
    assert np.isinf(f.values[1])
    assert np.isfinite(f.values[2])


def test_f_ratio_requires_two_subjects():
    with pytest.raises(ValueError):
        f_ratio(np.ones(3), np.ones(3), 1)


def test_paired_t_identity_for_two_conditions():
    rng = np.random.default_rng(6)
    for n in (2, 3, 5):
        y = rng.normal(size=(n, 2, 4))
        f = f_pointwise(FunctionalDataset(y)).values
        t2 = [oracle.paired_t_squared(y, k) for k in range(4)]
        assert np.allclose(f, t2, rtol=1e-10)


def test_batch_sums_of_squares():
    rng = np.random.default_rng(7)
    y = rng.normal(size=(4, 5, 3, 6))
    ssa, ssr = sums_of_squares(y)
    for b in range(4):
        s1, s2 = sums_of_squares(y[b])
        assert np.allclose(ssa[b], s1) and np.allclose(ssr[b], s2)


def test_trace_validation():
    g = Grid.equispaced(3)
    with pytest.raises(ValueError):
        PointwiseTrace("SSA", [1.0, 2.0], g)
    with pytest.raises(ValueError):
        PointwiseTrace("SSA", [1.0, np.inf, 0.0], g, [False, True, False])
    with pytest.raises(ValueError):
        PointwiseTrace("F", [1.0, np.nan, 0.0], g)


def test_write_traces_csv(tmp_path):
    rng = np.random.default_rng(8)
    d = FunctionalDataset(rng.normal(size=(4, 3, 5)))
    path = tmp_path / "traces.csv"
    write_traces_csv(path, [ssa_pointwise(d), f_pointwise(d)])
    lines = path.read_text().splitlines()
    assert lines[0] == "t,SSA,F"
    assert len(lines) == 1 + 5
    row = [float(x) for x in lines[3].split(",")]
    assert row[0] == 0.5
    assert row[1] == ssa_pointwise(d).values[2]
    assert row[2] == f_pointwise(d).values[2]
