import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from strata_bounds.empirics import (
    DataError,
    ObservedDistribution,
    cell_covariance,
    estimate_studentizers,
    ingest,
    psd_sqrt,
    read_csv,
    write_counts_csv,
)
from strata_bounds.linsys import build_A, pseudo_inverse
from strata_bounds.model import Support, catalog

S2 = Support.from_sizes(2, 2, 2)


def test_from_counts_normalizes_per_instrument():
    p = ObservedDistribution.from_counts(S2, [10, 20, 30, 40, 1, 1, 1, 1])
    assert p.n == 104
    assert np.allclose(p.block(0), [0.1, 0.2, 0.3, 0.4])
    assert np.allclose(p.z_marginal, [100 / 104, 4 / 104])
    assert p.prob(1, 1, 0) == pytest.approx(0.4)
    assert p.z_counts.tolist() == [100, 4]
    assert p.scaled(3).n == 312


def test_from_counts_errors():
    with pytest.raises(DataError, match="no observations"):
        ObservedDistribution.from_counts(S2, [1, 1, 1, 1, 0, 0, 0, 0])
    with pytest.raises(DataError):
        ObservedDistribution.from_counts(S2, [1, 1, 1, 1, 1, 1, 1, -1])
    with pytest.raises(DataError):
        ObservedDistribution.from_counts(S2, [1, 2, 3])
    with pytest.raises(DataError):
        ObservedDistribution.from_probabilities(S2, np.full(8, 0.3))


def test_ingest_records():
    recs = [(0, 0, 0), (1, 1, 0), (1, 1, 0), (0, 1, 1)]
    p = ingest(S2, recs)
    assert p.counts.tolist() == [1, 0, 0, 2, 0, 0, 1, 0]
    with pytest.raises(DataError, match="record 1"):
        ingest(S2, [(0, 0, 0), (5, 0, 0)])


def test_csv_micro_and_counts(tmp_path):
    micro = tmp_path / "micro.csv"
    micro.write_text("y,d,z\n0,0,0\n1,1,0\n1,1,0\n0,1,1\n1,0,1\n")
    p = read_csv(micro)
    assert p.support.z_values == (0, 1) and p.n == 5
    out = tmp_path / "counts.csv"
    write_counts_csv(p, out)
    q = read_csv(out)
    assert np.array_equal(p.counts, q.counts)


def test_csv_string_labels(tmp_path):
    f = tmp_path / "lab.csv"
    f.write_text("y,d,z,count\nno,ctl,a,3\nyes,trt,a,1\nno,trt,b,2\nyes,ctl,b,2\n")
    p = read_csv(f)
    assert p.support.y_values == ("no", "yes")
    assert p.prob("no", "ctl", "a") == pytest.approx(0.75)


@pytest.mark.parametrize("body, msg", [
    ("y,d\n0,0\n", ":1: header"),
    ("y,d,z\n0,0\n", ":2: expected 3 fields"),
    ("y,d,z,count\n0,0,0,x\n", "not an integer"),
    ("y,d,z,count\n0,0,0,-1\n", "negative"),
    ("", "empty"),
])
def test_csv_errors_carry_line_numbers(tmp_path, body, msg):
    f = tmp_path / "bad.csv"
    f.write_text(body)
    with pytest.raises(DataError, match=msg):
        read_csv(f)


def test_csv_label_outside_support(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("y,d,z\n0,0,0\n0,0,1\n2,0,1\n")
    with pytest.raises(DataError, match=":4: y='2'"):
        read_csv(f, S2)


@given(st.integers(0, 10_000))
def test_covariance_matches_simulation_formula(seed):
    rng = np.random.default_rng(seed)
    counts = rng.integers(1, 50, size=8)
    p = ObservedDistribution.from_counts(S2, counts)
    Sig = cell_covariance(p, 10)
    assert Sig.shape == (10, 10) and np.all(Sig[8:] == 0)
    for z in range(2):
        blk = Sig[4 * z:4 * z + 4, 4 * z:4 * z + 4]
        pz = p.block(z)
        assert np.allclose(blk * p.z_marginal[z], np.diag(pz) - np.outer(pz, pz))
        assert np.allclose(blk.sum(axis=1), 0.0)
    R = psd_sqrt(Sig)
    assert np.allclose(R @ R, Sig, atol=1e-12) and np.allclose(R, R.T)


def test_studentizers():
    m = catalog("no_defier_generalized", S2)
    A = build_A(m)
    p = ObservedDistribution.from_counts(S2, [10, 20, 30, 40, 25, 25, 25, 25])
    sp = estimate_studentizers(p, A)
    P = pseudo_inverse(A).projector
    assert np.allclose(sp.omega_i @ sp.omega_i, P @ sp.sigma @ P.T, atol=1e-12)
    assert np.allclose(sp.omega_e @ sp.omega_e, sp.sigma, atol=1e-12)
    assert sp.meta["factorization"] == "symmetric_psd_root"
    with pytest.raises(DataError):
        estimate_studentizers(ObservedDistribution.from_probabilities(S2, np.full(8, 0.25)), A)
