"""Loss, gradients, and the projected descent field.

For data pairs (rho_j, sigma_j) and a candidate channel (p, U_1..U_r) the
loss is

    f(p, U) = 1/2 sum_j || sigma_j - sum_k p_k U_k rho_j U_k* ||_F^2 .

f is real-valued but not holomorphic, so derivatives are taken with
respect to the real and imaginary parts of each U_k (Wirtinger calculus)
and assembled into the complex gradient G_k = df/dU_k^re + i df/dU_k^im.
With the leave-one-out sum A_k = sum_{l != k} p_l U_l rho U_l* this gives,
per pair,

    G_k     = 2 p_k (A_k - sigma) U_k rho
    df/dp_k = Re<A_k - sigma, U_k rho U_k*> + p_k ||rho||_F^2 .

G_k drops the component's own self-term relative to the full ambient
residual; the dropped piece is U_k rho^2 times a scalar, whose projection
onto the tangent space of the unitary group vanishes (skew of a Hermitian
matrix), so the projected flow is unaffected. Finite-difference checks
therefore have to probe manifold-tangent directions, not ambient ones.

The constrained descent field keeps each U_k on the unitary group and the
weights on the sum-one plane:

    dU_k/dt = -U_k skew(U_k* G_k)
    dp_k/dt = -df/dp_k + (1/r) sum_l df/dp_l

where r is the number of currently active components.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import dagger, real_inner


@dataclass(frozen=True)
class ObjectiveInstance:
    """Stacked dataset defining the loss: rho, sigma of shape (m, n, n)."""

    rho: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        sigma = np.asarray(self.sigma, dtype=complex)
        if rho.ndim == 2:
            rho = rho[None]
            sigma = sigma[None]
        if rho.shape != sigma.shape or rho.ndim != 3 or rho.shape[1] != rho.shape[2]:
            raise ValueError(f"bad pair shapes: rho {rho.shape}, sigma {sigma.shape}")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "sigma", sigma)
        # sum_j ||rho_j||_F^2, a constant of the p-gradient
        object.__setattr__(self, "_rho_sq", float(np.sum(np.abs(rho) ** 2)))

    @classmethod
    def from_pairs(cls, pairs):
        return cls(np.stack([p.rho for p in pairs]), np.stack([p.sigma for p in pairs]))

    @property
    def dim(self) -> int:
        return self.rho.shape[1]

    @property
    def n_pairs(self) -> int:
        return self.rho.shape[0]


@dataclass(frozen=True)
class GradientBundle:
    """Euclidean gradient: dp (r,) real, dU (r, n, n) complex."""

    dp: np.ndarray
    dU: np.ndarray


@dataclass(frozen=True)
class FlowField:
    """Right-hand side of the descent system: dp_dt sums to zero, each
    U_k* dU_dt_k is skew-Hermitian."""

    dp_dt: np.ndarray
    dU_dt: np.ndarray


def _check_dims(p, U, inst):
    p = np.asarray(p, dtype=float)
    U = np.asarray(U, dtype=complex)
    if U.ndim != 3 or U.shape[0] != p.shape[0]:
        raise ValueError(f"{p.shape[0]} weights for unitaries of shape {U.shape}")
    if U.shape[1:] != (inst.dim, inst.dim):
        raise ValueError(f"unitaries {U.shape[1:]} do not match data dim {inst.dim}")
    return p, U


def _mix_residual(p, U, inst):
    """Shared forward pass.

    Returns (Urho, B, resid) with Urho[k,j] = U_k rho_j, B[k,j] = U_k rho_j U_k*,
    and resid[j] = sum_k p_k B[k,j] - sigma_j.
    """
    m, n = inst.n_pairs, inst.dim
    r = p.shape[0]
    # One GEMM for all (k, j) products: stack U_k vertically, rho_j horizontally.
    flat = U.reshape(r * n, n) @ inst.rho.transpose(1, 0, 2).reshape(n, m * n)
    Urho = np.ascontiguousarray(flat.reshape(r, n, m, n).transpose(0, 2, 1, 3))
    B = np.empty((r, m, n, n), dtype=complex)
    for k in range(r):
        np.matmul(Urho[k].reshape(m * n, n), np.conj(U[k]).T, out=B[k].reshape(m * n, n))
    mix = np.tensordot(p, B.reshape(r, -1), axes=1).reshape(m, n, n)
    resid = mix - inst.sigma
    return Urho, B, resid


def value(p, U, inst: ObjectiveInstance) -> float:
    """Loss 1/2 sum_j ||sigma_j - sum_k p_k U_k rho_j U_k*||_F^2.

    p need not lie exactly on the simplex and U need not be exactly
    unitary; the integrator evaluates slightly off the constraint set.
    """
    p, U = _check_dims(p, U, inst)
    _, _, resid = _mix_residual(p, U, inst)
    return 0.5 * float(np.sum(np.abs(resid) ** 2))


def leave_one_out(p, U, inst: ObjectiveInstance, pair_index: int, component_index: int):
    """A_k for one pair: the mixture with component k deleted (not renormalized)."""
    p, U = _check_dims(p, U, inst)
    if not 0 <= pair_index < inst.n_pairs:
        raise IndexError(f"pair index {pair_index} out of range")
    if not 0 <= component_index < p.shape[0]:
        raise IndexError(f"component index {component_index} out of range")
    rho = inst.rho[pair_index]
    out = np.zeros_like(rho)
    for l in range(p.shape[0]):
        if l == component_index:
            continue
        out += p[l] * (U[l] @ rho @ dagger(U[l]))
    return out


def gradient(p, U, inst: ObjectiveInstance) -> GradientBundle:
    """Euclidean gradient of the loss at (p, U), summed over pairs."""
    p, U = _check_dims(p, U, inst)
    r, (m, n) = p.shape[0], inst.rho.shape[:2]
    Urho, B, resid = _mix_residual(p, U, inst)
    # W[k,j] = A_k - sigma for pair j, reusing resid = (A_k + p_k B_k) - sigma.
    W = resid[None] - p[:, None, None, None] * B
    # dU[k] = 2 p_k sum_j W[k,j] @ Urho[k,j], contracted as one GEMM per k.
    dU = np.empty((r, n, n), dtype=complex)
    for k in range(r):
        np.matmul(
            np.ascontiguousarray(W[k].transpose(1, 0, 2)).reshape(n, m * n),
            Urho[k].reshape(m * n, n),
            out=dU[k],
        )
    dU *= 2.0 * p[:, None, None]
    dp = np.einsum("kjab,kjab->k", W.conj(), B).real + p * inst._rho_sq
    return GradientBundle(dp, dU)


def flow_field(p, U, inst: ObjectiveInstance, grad: GradientBundle | None = None) -> FlowField:
    """Projected negative gradient: tangent to the unitary group in U and
    to the sum-one plane in p."""
    p, U = _check_dims(p, U, inst)
    if grad is None:
        grad = gradient(p, U, inst)
    M = np.matmul(dagger(U), grad.dU)
    S = 0.5 * (M - dagger(M))
    dU_dt = -np.matmul(U, S)
    dp_dt = -grad.dp + grad.dp.mean()
    return FlowField(dp_dt, dU_dt)


def descent_rate(grad: GradientBundle, fld: FlowField) -> float:
    """Directional derivative of the loss along the field; <= 0 everywhere."""
    rate = float(grad.dp @ fld.dp_dt)
    rate += float(np.real(np.sum(np.conj(grad.dU) * fld.dU_dt)))
    return rate


def field_norm(fld: FlowField) -> float:
    """L2 norm of the full right-hand side (weights and unitaries)."""
    return float(np.sqrt(np.sum(fld.dp_dt**2) + np.sum(np.abs(fld.dU_dt) ** 2)))


def tangent_derivative(grad: GradientBundle, delta_p, xi) -> float:
    """Pair the gradient with a tangent direction (delta_p, xi).

    delta_p must sum to zero and each xi_k must be U_k times a
    skew-Hermitian matrix for the result to be a manifold directional
    derivative.
    """
    out = float(np.dot(grad.dp, delta_p))
    for gk, xk in zip(grad.dU, np.asarray(xi)):
        out += real_inner(gk, xk)
    return out


def gradient_check(n: int, r: int, m: int, trials: int, rng, h: float = 1e-5) -> float:
    """Max relative error of analytic vs central finite-difference
    directional derivatives over random states and tangent directions.

    The finite differences run through :func:`value` along exact manifold
    curves (p + s*delta with sum(delta) = 0, U_k expm(s*S_k) with S_k
    skew-Hermitian), so they are independent of the gradient formulas.
    """
    from .linalg import haar_random_unitary, random_density, skew_part

    rng = np.random.default_rng(rng)
    worst = 0.0
    for _ in range(trials):
        channel_targets = [random_density(n, rng) for _ in range(m)]
        U_true = [haar_random_unitary(n, rng) for _ in range(m)]
        sigma = np.stack([u @ t @ dagger(u) for u, t in zip(U_true, channel_targets)])
        inst = ObjectiveInstance(np.stack(channel_targets), sigma)
        p = rng.dirichlet(np.ones(r))
        U = np.stack([haar_random_unitary(n, rng) for _ in range(r)])

        delta = rng.standard_normal(r)
        delta -= delta.mean()
        if np.linalg.norm(delta) > 0:
            delta /= np.linalg.norm(delta)
        S = np.stack(
            [skew_part(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
             for _ in range(r)]
        )
        # unit-norm directions keep the cubic finite-difference truncation
        # term small relative to the first derivative
        S /= np.linalg.norm(S, axis=(1, 2), keepdims=True)
        xi = np.matmul(U, S)

        analytic = tangent_derivative(gradient(p, U, inst), delta, xi)
        fd = (_value_along(p, U, inst, delta, S, h) - _value_along(p, U, inst, delta, S, -h)) / (2 * h)
        err = abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-8)
        worst = max(worst, err)
    return worst


def _value_along(p, U, inst, delta, S, s):
    # Retraction-free curve: exact geodesic-like path via matrix exponential.
    Us = np.stack([uk @ _expm_skew(s * sk) for uk, sk in zip(U, S)])
    return value(p + s * delta, Us, inst)


def _expm_skew(s):
    # exp of a skew-Hermitian matrix through its Hermitian form: s = iH.
    w, v = np.linalg.eigh(-1j * s)
    return (v * np.exp(1j * w)) @ dagger(v)


class PackedFlow:
    """Descent field over a packed state vector, tuned for the integrator.

    The packed layout is ``y = [p, Re(U).ravel(), Im(U).ravel()]`` so the
    stepper sees one flat float64 vector. All large intermediates live in
    preallocated workspaces sized to (r, m, n); a single solver run drives
    one instance sequentially (this class is not thread-safe, unlike the
    pure module functions).

    Calling the instance evaluates the field in place and returns an
    internal buffer -- callers must copy if they keep it. ``last_value``
    holds the loss at the most recently evaluated state, which lets the
    run loop read the step-end loss off the final Runge-Kutta stage for
    free.

    The field agrees with :func:`flow_field` up to terms proportional to
    the unitarity defect of U: the quadratic self-terms are simplified
    through U*U = I (exactly as in the gradient formulas' derivation), so
    both right-hand sides coincide on the constraint set.
    """

    def __init__(self, inst: ObjectiveInstance, r: int):
        m, n = inst.n_pairs, inst.dim
        self.inst = inst
        self.r, self.m, self.n = r, m, n
        self.size = r + 2 * r * n * n
        # static per-instance data
        self.rho_wide = np.ascontiguousarray(inst.rho.transpose(1, 0, 2)).reshape(n, m * n)
        self.rho2_sum = np.einsum("jab,jbc->ac", inst.rho, inst.rho)
        # workspaces
        self.U = np.empty((r, n, n), dtype=complex)
        self.flat = np.empty((r * n, m * n), dtype=complex)
        self.Urho = np.empty((r, m, n, n), dtype=complex)
        self.B = np.empty((r, m, n, n), dtype=complex)
        self.mix = np.empty((m, n, n), dtype=complex)
        self.resid = np.empty((m, n, n), dtype=complex)
        self.resid_conj = np.empty((m, n, n), dtype=complex)
        self.bigR = np.empty((n, m, n), dtype=complex)
        self.G = np.empty((r, n, n), dtype=complex)
        self.scratch = np.empty((r, n, n), dtype=complex)
        self.M = np.empty((r, n, n), dtype=complex)
        self.dy = np.empty(self.size, dtype=float)
        self.last_value = np.nan

    def pack(self, p, U):
        return np.concatenate([np.asarray(p, float).ravel(),
                               np.asarray(U).real.ravel(),
                               np.asarray(U).imag.ravel()])

    def unpack(self, y):
        r, n = self.r, self.n
        half = r * n * n
        self.U.real.reshape(-1)[:] = y[r:r + half]
        self.U.imag.reshape(-1)[:] = y[r + half:]
        return y[:r], self.U

    def _forward(self, y):
        r, m, n = self.r, self.m, self.n
        p, U = self.unpack(y)
        np.matmul(U.reshape(r * n, n), self.rho_wide, out=self.flat)
        np.copyto(self.Urho, self.flat.reshape(r, n, m, n).transpose(0, 2, 1, 3))
        urho = self.Urho.reshape(r, m * n, n)
        np.matmul(urho, np.conj(U).transpose(0, 2, 1), out=self.B.reshape(r, m * n, n))
        np.matmul(p, self.B.reshape(r, m * n * n), out=self.mix.reshape(-1))
        np.subtract(self.mix, self.inst.sigma, out=self.resid)
        self.last_value = 0.5 * float(np.vdot(self.resid, self.resid).real)
        return p, U

    def value(self, y) -> float:
        self._forward(y)
        return self.last_value

    def __call__(self, t, y):
        r, m, n = self.r, self.m, self.n
        p, U = self._forward(y)
        # dp_k = sum_j Re<resid_j, B_kj>  (the p_k ||rho||^2 terms cancel
        # against the self-term of <A_k - sigma, B_k> when U*U = I)
        np.conjugate(self.resid, out=self.resid_conj)
        dp = np.einsum("jab,kjab->k", self.resid_conj, self.B.reshape(r, m, n, n)).real
        # G_k = 2 p_k sum_j resid_j Urho_kj - 2 p_k^2 U_k sum_j rho_j^2
        np.copyto(self.bigR, self.resid.transpose(1, 0, 2))
        np.matmul(self.bigR.reshape(n, m * n), self.Urho.reshape(r, m * n, n), out=self.G)
        np.matmul(U, self.rho2_sum, out=self.scratch)
        self.G *= (2.0 * p)[:, None, None]
        self.scratch *= (2.0 * p * p)[:, None, None]
        self.G -= self.scratch
        # project: dU = -U skew(U* G), dp centered on the sum-zero plane
        np.matmul(np.conj(U).transpose(0, 2, 1), self.G, out=self.M)
        np.subtract(self.M, np.conj(self.M).transpose(0, 2, 1), out=self.M)
        self.M *= 0.5
        np.matmul(U, self.M, out=self.scratch)
        dy = self.dy
        dy[:r] = dp.mean() - dp
        half = r * n * n
        dy[r:r + half] = -self.scratch.real.reshape(-1)
        dy[r + half:] = -self.scratch.imag.reshape(-1)
        return dy
