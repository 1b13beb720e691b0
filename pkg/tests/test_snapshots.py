"""Tests for snapshot containers, CSV round trips, and empirical averages."""

import numpy as np
import pytest

from koopsos.polybasis import MONOMIAL, Poly, total_degree_dictionary
from koopsos.snapshots import (GENERATOR, KOOPMAN, SnapshotFormatError,
                               SnapshotSet, empirical_average, load_csv,
                               save_csv)


def _example(n=7, seed=0):
    rng = np.random.default_rng(seed)
    return SnapshotSet(t=np.arange(n, dtype=float),
                       X=rng.standard_normal((n, 2)),
                       Y=rng.standard_normal((n, 2)),
                       tau=0.5, kind=KOOPMAN, metadata={"seed": seed})


def test_csv_round_trip_bit_exact(tmp_path):
    s = _example()
    path = tmp_path / "snaps.csv"
    save_csv(s, path)
    again = load_csv(path)
    assert again == s
    assert again.metadata["seed"] == 0


def test_generator_kind_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    s = SnapshotSet(t=np.zeros(5), X=rng.uniform(size=(5, 1)),
                    Y=rng.uniform(size=(5, 3)), tau=1.0, kind=GENERATOR)
    path = tmp_path / "gen.csv"
    save_csv(s, path)
    assert load_csv(path) == s


def test_malformed_row_reports_line(tmp_path):
    path = tmp_path / "snaps.csv"
    save_csv(_example(), path)
    lines = path.read_text().splitlines()
    lines[5] = lines[5].rsplit(",", 1)[0]  # drop a field from data row 5
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(SnapshotFormatError, match="row 6"):
        load_csv(path)


def test_non_numeric_field(tmp_path):
    path = tmp_path / "snaps.csv"
    save_csv(_example(), path)
    text = path.read_text().replace("\n0,", "\nzero,", 1)
    path.write_text(text)
    with pytest.raises(SnapshotFormatError, match="row 2"):
        load_csv(path)


def test_missing_sidecar(tmp_path):
    path = tmp_path / "snaps.csv"
    save_csv(_example(), path)
    (tmp_path / "snaps.csv.json").unlink()
    with pytest.raises(SnapshotFormatError, match="sidecar"):
        load_csv(path)


def test_wrong_header(tmp_path):
    path = tmp_path / "snaps.csv"
    save_csv(_example(), path)
    text = path.read_text().replace("x_1", "u_1", 1)
    path.write_text(text)
    with pytest.raises(SnapshotFormatError, match="header"):
        load_csv(path)


def test_koopman_dim_mismatch_rejected():
    with pytest.raises(SnapshotFormatError):
        SnapshotSet(t=np.zeros(3), X=np.zeros((3, 2)), Y=np.zeros((3, 1)),
                    tau=1.0, kind=KOOPMAN)


def test_non_finite_rejected():
    X = np.zeros((3, 1))
    X[1] = np.nan
    with pytest.raises(SnapshotFormatError):
        SnapshotSet(t=np.zeros(3), X=X, Y=np.zeros((3, 1)), tau=1.0,
                    kind=KOOPMAN)


def test_empirical_average_linearity():
    s = _example(n=50, seed=2)
    dic = total_degree_dictionary(MONOMIAL, 2, 2)
    rng = np.random.default_rng(3)
    p = Poly(dic, rng.standard_normal(dic.size))
    q = Poly(dic, rng.standard_normal(dic.size))
    lhs = empirical_average(s, Poly(dic, 2.0 * p.coeffs + q.coeffs))
    rhs = 2.0 * empirical_average(s, p) + empirical_average(s, q)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_empirical_average_matches_direct():
    s = _example(n=40, seed=4)
    dic = total_degree_dictionary(MONOMIAL, 2, 2)
    g = Poly(dic, np.array([0.0, 0.0, 0.0, 1.0, 0.0, 1.0]))  # x1^2 + x2^2
    direct = float(np.mean(np.sum(s.X ** 2, axis=1)))
    assert empirical_average(s, g) == pytest.approx(direct, abs=1e-12)
