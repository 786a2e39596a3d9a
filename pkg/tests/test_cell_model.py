import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhcell.cell_model import (
    CellParams,
    HamiltonianTriple,
    basis_index,
    build_h0,
    build_p_omega,
    build_p_s,
    default_params,
    load_params,
    save_params,
)

finite = st.floats(-5, 5, allow_nan=False)
triples = st.tuples(finite, finite, finite)


def literal_p_omega(v1, v2, v3):
    # transcribed row by row from the published matrix
    return np.array([
        [0, v1, v2, 0, v3, 0, 0, 0],
        [v1, 0, 0, v2, 0, v3, 0, 0],
        [v2, 0, 0, v1, 0, 0, v3, 0],
        [0, v2, v1, 0, 0, 0, 0, v3],
        [v3, 0, 0, 0, 0, v1, v2, 0],
        [0, v3, 0, 0, v1, 0, 0, v2],
        [0, 0, v3, 0, v2, 0, 0, v1],
        [0, 0, 0, v3, 0, v2, v1, 0],
    ], dtype=float)


def literal_h0(d12, d23, d13, a1, a2, a3):
    return np.array([
        [0, 0, 0, 0, 0, 0, 0, 0],
        [0, a1, d12, 0, d13, 0, 0, 0],
        [0, d12, a2, 0, d23, 0, 0, 0],
        [0, 0, 0, a1 + a2, 0, d23, d13, 0],
        [0, d13, d23, 0, a3, 0, 0, 0],
        [0, 0, 0, d23, 0, a1 + a3, d12, 0],
        [0, 0, 0, d13, 0, d12, a2 + a3, 0],
        [0, 0, 0, 0, 0, 0, 0, a1 + a2 + a3],
    ], dtype=float)


def test_h0_default_entries():
    h = build_h0(default_params())
    assert h[1, 2] == 1.1
    assert h[1, 4] == 0.86
    assert h[2, 4] == 0.946
    assert np.all(np.diag(h) == 0)


def test_h0_decoupled_is_diagonal():
    p = CellParams((0, 0, 0), detunings=(0.3, 0.5, 0.7))
    np.testing.assert_allclose(build_h0(p), np.diag([0, 0.3, 0.5, 0.8, 0.7, 1.0, 1.2, 1.5]),
                               atol=1e-15)


@given(triples, triples)
def test_h0_matches_literal_and_is_hermitian(d, a):
    h = build_h0(CellParams(d, detunings=a))
    np.testing.assert_array_equal(h, h.conj().T)
    np.testing.assert_allclose(h, literal_h0(*d, *a), atol=1e-12)
    assert not np.any(h[0, 1:]) and not np.any(h[1:, 0]) and h[0, 0] == 0


def test_p_s_default_diagonal():
    p = build_p_s(default_params())
    np.testing.assert_allclose(np.diag(p).real, [0, 0.1, 0.11, 0.21, 0.312, 0.412, 0.422, 0.522],
                               atol=1e-15)
    assert np.count_nonzero(p - np.diag(np.diag(p))) == 0


def test_p_s_zero():
    assert not np.any(build_p_s(CellParams((1, 1, 1))))


@given(triples)
def test_p_s_additive_and_trace(delta):
    p = build_p_s(CellParams((0, 0, 0), stark_shifts_unit=delta))
    d = np.diag(p).real
    s1, s2, s3 = delta
    np.testing.assert_allclose(d[[3, 5, 6, 7]], [s1 + s2, s1 + s3, s2 + s3, s1 + s2 + s3],
                               atol=1e-12)
    assert np.trace(p).real == pytest.approx(4 * (s1 + s2 + s3), abs=1e-12)


def test_p_omega_default_entries():
    p = build_p_omega(default_params())
    assert p[0, 1] == 0.3 and p[0, 2] == 0.33 and p[0, 4] == 0.24 and p[3, 7] == 0.24
    assert np.trace(p) == 0


def test_p_omega_zero():
    assert not np.any(build_p_omega(CellParams((1, 1, 1))))


@given(st.tuples(*[st.floats(0.01, 5)] * 3))
def test_p_omega_pattern(v):
    p = build_p_omega(CellParams((0, 0, 0), em_couplings_unit=v))
    np.testing.assert_array_equal(p, literal_p_omega(*v))
    for x in range(8):
        row = np.nonzero(p[x])[0]
        assert len(row) == 3
        # single-photon transitions only: partners differ in exactly one bit
        assert all(bin(x ^ y).count("1") == 1 for y in row)


@pytest.mark.parametrize("bits, x", [((0, 0, 0), 0), ((1, 1, 1), 7), ((0, 1, 1), 3), ((1, 0, 0), 4)])
def test_basis_index(bits, x):
    assert basis_index(*bits) == x


def test_basis_index_rejects_non_bits():
    with pytest.raises(ValueError):
        basis_index(2, 0, 0)


def test_params_validation():
    with pytest.raises(ValueError):
        CellParams((1, 1, 1), period=0)
    with pytest.raises(ValueError):
        CellParams((1, float("inf"), 1))
    with pytest.raises(ValueError):
        CellParams((1, 1))


def test_default_tau():
    assert default_params().tau == 250 / 64


def test_param_file_roundtrip(tmp_path):
    p = default_params()
    save_params(p, tmp_path / "cell.json")
    q = load_params(tmp_path / "cell.json")
    assert q == p and q.digest() == p.digest()


def test_param_file_decimal_literals(tmp_path):
    path = tmp_path / "cell.json"
    path.write_text('{"D": [1.1, 0.946, 0.86], "A": [0, 0, 0], "Delta": [0.1, 0.11, 0.312],'
                    ' "V": [0.3, 0.33, 0.24], "T": 250}')
    assert load_params(path) == default_params()
    data = json.loads(path.read_text())
    del data["V"]
    path.write_text(json.dumps(data))
    with pytest.raises(ValueError):
        load_params(path)


def test_triple_perturbation_parity(triple):
    assert triple.perturbation(1) is triple.p_s
    assert triple.perturbation(64) is triple.p_omega
