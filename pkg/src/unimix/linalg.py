"""Dense complex linear algebra used throughout the package.

All matrices are plain ``numpy`` arrays with dtype ``complex128``. The
helpers here implement the real inner product Re(tr(A* B)) that turns
C^{n x n} into a real inner-product space, the Hermitian/skew-Hermitian
splitting, seeded random generators for unitaries and density matrices,
and the validation predicates (Hermitian, positive semidefinite, unitary)
that the channel and solver layers enforce.

Conventions:

* ``vec`` stacks columns (column-major), so ``vec(I_2) = (1, 0, 0, 1)``.
* Random generators take a ``numpy.random.Generator`` or anything
  accepted by ``numpy.random.default_rng``; the same seed yields
  bit-identical output.
"""

import numpy as np

# Default validation tolerances. These are configuration knobs, not hard
# constants: every validator accepts an override.
HERM_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-12
UNITARY_TOL = 1e-9


def dagger(a):
    """Conjugate transpose, batched over leading axes."""
    return np.conj(np.swapaxes(a, -1, -2))


def real_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Real inner product Re(tr(A* B)) of two equal-shape complex matrices."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.real(np.sum(np.conj(a) * b)))


def frobenius_norm(a: np.ndarray) -> float:
    """Frobenius norm, sqrt(real_inner(A, A))."""
    return float(np.linalg.norm(a))


def skew_part(a: np.ndarray) -> np.ndarray:
    """Skew-Hermitian part (A - A*)/2 of a square matrix.

    The construction is entrywise antisymmetric, so the result satisfies
    S* = -S exactly in floating point.
    """
    a = np.asarray(a)
    if a.shape[-1] != a.shape[-2]:
        raise ValueError(f"skew_part needs a square matrix, got {a.shape}")
    return 0.5 * (a - dagger(a))


def hermitian_part(a: np.ndarray) -> np.ndarray:
    """Hermitian part (A + A*)/2 of a square matrix."""
    a = np.asarray(a)
    if a.shape[-1] != a.shape[-2]:
        raise ValueError(f"hermitian_part needs a square matrix, got {a.shape}")
    return 0.5 * (a + dagger(a))


def haar_random_unitary(n: int, rng) -> np.ndarray:
    """Draw an n x n unitary from the Haar measure.

    QR of a complex standard-Gaussian matrix, with the R diagonal's phases
    folded back into Q. Without the phase correction QR is not
    Haar-distributed.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    rng = np.random.default_rng(rng)
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_density(n: int, rng) -> np.ndarray:
    """Random full-rank density matrix: GG*/tr(GG*) for complex Gaussian G."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    rng = np.random.default_rng(rng)
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def re_unitarize(a: np.ndarray) -> np.ndarray:
    """Nearest unitary in Frobenius norm: the unitary polar factor of A.

    Idempotent on unitaries to machine precision. Raises LinAlgError for
    (numerically) singular input, where the polar factor is not unique.
    """
    a = np.asarray(a)
    u, s, vh = np.linalg.svd(a)
    if s[..., -1].min() <= a.shape[-1] * np.finfo(float).eps * s[..., 0].max():
        raise np.linalg.LinAlgError("matrix is singular; polar factor undefined")
    return u @ vh


def hermitian_eig(a: np.ndarray, herm_tol: float = HERM_TOL):
    """Eigendecomposition of a Hermitian matrix.

    Returns (eigenvalues ascending, unitary eigenvector matrix). The input
    is validated against ``herm_tol`` and symmetrized before the solve.
    """
    a = np.asarray(a)
    validate_hermitian(a, herm_tol)
    w, v = np.linalg.eigh(hermitian_part(a))
    return w, v


def vec(a: np.ndarray) -> np.ndarray:
    """Column-major stacking of a matrix into a 1-D vector."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(v: np.ndarray, shape=None) -> np.ndarray:
    """Inverse of :func:`vec`. Square by default; pass ``shape`` otherwise."""
    v = np.asarray(v).reshape(-1)
    if shape is None:
        n = int(round(np.sqrt(v.size)))
        if n * n != v.size:
            raise ValueError(f"cannot unvec length {v.size} into a square matrix")
        shape = (n, n)
    return v.reshape(shape, order="F")


def hermiticity_defect(a: np.ndarray) -> float:
    """||A - A*||_F, absolute (not normalized)."""
    return frobenius_norm(np.asarray(a) - dagger(a))


def unitarity_defect(u: np.ndarray) -> float:
    """||U*U - I||_F; 0 for exact unitaries."""
    u = np.asarray(u)
    return frobenius_norm(dagger(u) @ u - np.eye(u.shape[-1]))


def validate_hermitian(a: np.ndarray, herm_tol: float = HERM_TOL) -> None:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(frobenius_norm(a), 1e-300)
    defect = hermiticity_defect(a)
    if defect > herm_tol * scale:
        raise ValueError(
            f"matrix is not Hermitian: ||A - A*|| = {defect:.3e} "
            f"exceeds {herm_tol:.1e} * ||A||"
        )


def validate_unitary(u: np.ndarray, unitary_tol: float = UNITARY_TOL) -> None:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {u.shape}")
    defect = unitarity_defect(u)
    if defect > unitary_tol:
        raise ValueError(
            f"matrix is not unitary: ||U*U - I|| = {defect:.3e} exceeds {unitary_tol:.1e}"
        )


def validate_density(
    rho: np.ndarray,
    psd_tol: float = PSD_TOL,
    trace_tol: float = TRACE_TOL,
    herm_tol: float = HERM_TOL,
) -> None:
    """Check the density-matrix invariants: Hermitian, PSD, unit trace."""
    rho = np.asarray(rho)
    validate_hermitian(rho, herm_tol)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace {tr!r} is not 1 within {trace_tol:.1e}")
    w = np.linalg.eigvalsh(hermitian_part(rho))
    if w[0] < -psd_tol:
        raise ValueError(
            f"density matrix has eigenvalue {w[0]:.3e} below -{psd_tol:.1e}"
        )
