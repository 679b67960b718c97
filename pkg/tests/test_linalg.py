import numpy as np
import pytest
import scipy.linalg

from unimix.linalg import (
    dagger,
    frobenius_norm,
    haar_random_unitary,
    hermitian_eig,
    hermitian_part,
    random_density,
    re_unitarize,
    real_inner,
    skew_part,
    unitarity_defect,
    unvec,
    validate_density,
    validate_unitary,
    vec,
)

rng = np.random.default_rng(20240901)


def crandn(*shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_real_inner_identity():
    assert real_inner(np.eye(2), np.eye(2)) == 2.0


def test_real_inner_imaginary_multiple_is_zero():
    for _ in range(5):
        a = crandn(3, 3)
        assert abs(real_inner(a, 1j * a)) < 1e-12 * np.linalg.norm(a) ** 2


def test_real_inner_matches_entrywise_sum():
    a, b = crandn(3, 3), crandn(3, 3)
    direct = sum(
        (np.conj(a[i, j]) * b[i, j]).real for i in range(3) for j in range(3)
    )
    assert abs(real_inner(a, b) - direct) < 1e-13


def test_real_inner_shape_mismatch():
    with pytest.raises(ValueError):
        real_inner(np.eye(2), np.eye(3))


def test_real_inner_bilinear_positive_definite():
    a, b, c = crandn(4, 4), crandn(4, 4), crandn(4, 4)
    lhs = real_inner(a, 2.0 * b + 0.5 * c)
    assert abs(lhs - 2.0 * real_inner(a, b) - 0.5 * real_inner(a, c)) < 1e-12
    assert real_inner(a, a) > 0


def test_hermitian_skew_orthogonality():
    for _ in range(10):
        h = hermitian_part(crandn(4, 4))
        s = skew_part(crandn(4, 4))
        assert abs(real_inner(h, s)) < 1e-13


def test_frobenius_norm_cases():
    assert frobenius_norm(np.zeros((3, 3))) == 0.0
    assert abs(frobenius_norm(np.eye(5)) - np.sqrt(5)) < 1e-14
    a = crandn(4, 3)
    direct = np.sqrt(sum(abs(a[i, j]) ** 2 for i in range(4) for j in range(3)))
    assert abs(frobenius_norm(a) - direct) < 1e-13


def test_skew_part_hermitian_input_is_zero():
    h = hermitian_part(crandn(3, 3))
    assert np.abs(skew_part(h)).max() < 1e-16


def test_skew_part_fixes_skew_input():
    s = skew_part(crandn(3, 3))
    assert np.abs(skew_part(s) - s).max() < 1e-16


def test_skew_part_is_exactly_skew():
    s = skew_part(crandn(5, 5))
    assert np.array_equal(s, -dagger(s))


def test_skew_part_decomposition_identity():
    a = crandn(4, 4)
    assert np.abs(skew_part(a) + hermitian_part(a) - a).max() < 1e-15


def test_skew_part_rejects_rectangular():
    with pytest.raises(ValueError):
        skew_part(np.ones((2, 3)))


def test_haar_unitary_is_unitary():
    for n in (1, 2, 5):
        u = haar_random_unitary(n, rng)
        assert unitarity_defect(u) < 1e-12
        assert abs(abs(np.linalg.det(u)) - 1.0) < 1e-10


def test_haar_unitary_seed_determinism():
    u1 = haar_random_unitary(4, 123)
    u2 = haar_random_unitary(4, 123)
    assert np.array_equal(u1, u2)


def test_haar_first_entry_moment():
    # E|u_11|^2 = 1/n for Haar; |u_11|^2 ~ Beta(1, n-1)
    n, samples = 4, 10_000
    local = np.random.default_rng(7)
    vals = np.empty(samples)
    for i in range(samples):
        vals[i] = abs(haar_random_unitary(n, local)[0, 0]) ** 2
    se = np.sqrt((n - 1) / (n**2 * (n + 1)) / samples)
    assert abs(vals.mean() - 1.0 / n) < 3 * se


def test_random_density_invariants():
    for n in (2, 5):
        d = random_density(n, rng)
        validate_density(d)
        assert np.linalg.eigvalsh(d).min() > 0


def test_random_density_dim_one():
    assert np.allclose(random_density(1, rng), [[1.0]])


def test_random_density_seed_determinism():
    assert np.array_equal(random_density(3, 5), random_density(3, 5))


def test_re_unitarize_idempotent_and_scale_invariant():
    u = haar_random_unitary(4, rng)
    assert np.abs(re_unitarize(u) - u).max() < 1e-14
    assert np.abs(re_unitarize(2.0 * u) - u).max() < 1e-14


def test_re_unitarize_is_nearest_unitary():
    # no unitary perturbation of the polar factor improves the distance
    a = crandn(4, 4) + 3 * np.eye(4)
    v = re_unitarize(a)
    validate_unitary(v, 1e-12)
    base = np.linalg.norm(a - v)
    for _ in range(20):
        s = skew_part(crandn(4, 4))
        for eps in (1e-3, 1e-2, 1e-1):
            trial = v @ scipy.linalg.expm(eps * s)
            assert np.linalg.norm(a - trial) >= base - 1e-12


def test_re_unitarize_singular_raises():
    a = np.zeros((3, 3), dtype=complex)
    a[0, 0] = 1.0
    with pytest.raises(np.linalg.LinAlgError):
        re_unitarize(a)


def test_hermitian_eig_diagonal():
    w, v = hermitian_eig(np.diag([3.0, 1.0, 2.0]).astype(complex))
    assert np.allclose(w, [1.0, 2.0, 3.0])
    w, _ = hermitian_eig(np.eye(4, dtype=complex))
    assert np.allclose(w, 1.0)


def test_hermitian_eig_reconstruction():
    a = hermitian_part(crandn(6, 6))
    w, v = hermitian_eig(a)
    assert np.all(np.diff(w) >= 0)
    recon = (v * w) @ dagger(v)
    assert np.linalg.norm(recon - a) < 1e-10 * np.linalg.norm(a)


def test_hermitian_eig_rejects_non_hermitian():
    with pytest.raises(ValueError):
        hermitian_eig(crandn(3, 3))


def test_vec_column_major():
    m = np.array([["a", "c"], ["b", "d"]], dtype=object)
    assert list(vec(m)) == ["a", "b", "c", "d"]
    assert np.array_equal(vec(np.eye(2)), [1.0, 0.0, 0.0, 1.0])


def test_vec_unvec_roundtrip():
    a = crandn(3, 3)
    assert np.array_equal(unvec(vec(a)), a)
    b = crandn(2, 4)
    assert np.array_equal(unvec(vec(b), shape=(2, 4)), b)
