"""Mixed-unitary channel model.

A mixed-unitary channel acts on a density matrix as

    Phi(rho) = sum_k p_k U_k rho U_k*

with nonnegative weights summing to one and unitary U_k. This module
holds the channel container, its action on states, the Choi
representation used to compare channels as maps, canonical channels
(depolarizing), dataset synthesis, the fidelity diagnostic, and JSON
serialization of channels and datasets.

Channel equality is always judged in Choi space: the decomposition
(weights, unitaries) is not unique (component permutations and global
phases leave the map unchanged), the Choi matrix is.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    PSD_TOL,
    UNITARY_TOL,
    dagger,
    hermitian_part,
    random_density,
    haar_random_unitary,
    unitarity_defect,
    validate_density,
    vec,
)

WEIGHT_SUM_TOL = 1e-10

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class MixedUnitaryChannel:
    """Weights on the probability simplex plus one unitary per component.

    ``unitaries`` is stored as a single (r, n, n) complex array.
    """

    weights: np.ndarray
    unitaries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "unitaries", np.asarray(self.unitaries, dtype=complex))
        if self.unitaries.ndim != 3 or self.unitaries.shape[1] != self.unitaries.shape[2]:
            raise ValueError(f"unitaries must have shape (r, n, n), got {self.unitaries.shape}")
        if self.weights.shape != (self.unitaries.shape[0],):
            raise ValueError(
                f"{self.weights.shape[0]} weights for {self.unitaries.shape[0]} unitaries"
            )
        if self.n_components < 1:
            raise ValueError("a channel needs at least one component")

    @property
    def dim(self) -> int:
        return self.unitaries.shape[1]

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    def validate(self, unitary_tol: float = UNITARY_TOL, weight_sum_tol: float = WEIGHT_SUM_TOL):
        """Raise ValueError unless weights lie on the simplex and each U_k is unitary."""
        if np.any(self.weights < 0):
            raise ValueError(f"negative weight: min p_k = {self.weights.min():.3e}")
        total = float(self.weights.sum())
        if abs(total - 1.0) > weight_sum_tol:
            raise ValueError(f"weights sum to {total!r}, not 1 within {weight_sum_tol:.1e}")
        for k in range(self.n_components):
            defect = unitarity_defect(self.unitaries[k])
            if defect > unitary_tol:
                raise ValueError(
                    f"component {k} is not unitary: ||U*U - I|| = {defect:.3e}"
                )
        return self

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return apply(self, rho)

    def choi(self) -> np.ndarray:
        return choi(self)


@dataclass(frozen=True)
class StatePair:
    """One observation: input state rho and measured output state sigma."""

    rho: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho", np.asarray(self.rho, dtype=complex))
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=complex))
        if self.rho.shape != self.sigma.shape:
            raise ValueError(f"shape mismatch: {self.rho.shape} vs {self.sigma.shape}")


@dataclass
class Dataset:
    """State pairs plus the provenance header written to dataset files."""

    pairs: list
    seed: int | None = None
    channel_sha: str | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.pairs[0].rho.shape[0]

    def __len__(self):
        return len(self.pairs)


def apply(channel: MixedUnitaryChannel, rho: np.ndarray) -> np.ndarray:
    """Channel action sum_k p_k U_k rho U_k* on a state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (channel.dim, channel.dim):
        raise ValueError(f"state shape {rho.shape} does not match channel dim {channel.dim}")
    u = channel.unitaries
    conj = u @ rho[None, :, :] @ dagger(u)
    out = np.tensordot(channel.weights, conj, axes=1)
    # The exact map preserves Hermiticity; re-symmetrize to kill roundoff.
    return hermitian_part(out)


def choi(channel: MixedUnitaryChannel) -> np.ndarray:
    """Choi matrix sum_k p_k vec(U_k) vec(U_k)* (column-major vec), n^2 x n^2."""
    n = channel.dim
    c = np.zeros((n * n, n * n), dtype=complex)
    for pk, uk in zip(channel.weights, channel.unitaries):
        v = vec(uk)
        c += pk * np.outer(v, v.conj())
    return c


def depolarizing(p: float) -> MixedUnitaryChannel:
    """Qubit depolarizing channel (1-p) rho + p/3 (X rho X + Y rho Y + Z rho Z)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing probability must be in [0, 1], got {p!r}")
    weights = np.array([1.0 - p, p / 3.0, p / 3.0, p / 3.0])
    return MixedUnitaryChannel(weights, np.stack([PAULI_I, PAULI_X, PAULI_Y, PAULI_Z]))


def random_channel(n: int, r: int, rng) -> MixedUnitaryChannel:
    """Random channel: Haar unitaries and flat-Dirichlet weights."""
    rng = np.random.default_rng(rng)
    weights = rng.dirichlet(np.ones(r))
    unitaries = np.stack([haar_random_unitary(n, rng) for _ in range(r)])
    return MixedUnitaryChannel(weights, unitaries)


def generate_dataset(channel: MixedUnitaryChannel, m: int, rng, seed=None) -> Dataset:
    """Draw m random input states and push them through the channel."""
    if m < 1:
        raise ValueError("need at least one pair")
    rng = np.random.default_rng(rng)
    pairs = []
    for _ in range(m):
        rho = random_density(channel.dim, rng)
        pairs.append(StatePair(rho, apply(channel, rho)))
    return Dataset(pairs, seed=seed, channel_sha=channel_sha(channel))


def fidelity(sigma: np.ndarray, rho: np.ndarray, psd_tol: float = PSD_TOL) -> float:
    """State fidelity (tr sqrt(sqrt(sigma) rho sqrt(sigma)))^2, in [0, 1].

    Both square roots go through Hermitian eigendecompositions with
    negative eigenvalues clamped at zero, so slightly-off-PSD inputs from
    rounding are tolerated up to ``psd_tol``.
    """
    sigma = np.asarray(sigma, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    if sigma.shape != rho.shape:
        raise ValueError(f"shape mismatch: {sigma.shape} vs {rho.shape}")

    def _psd_sqrt(a):
        w, v = np.linalg.eigh(hermitian_part(a))
        if w[0] < -psd_tol:
            raise ValueError(f"input has eigenvalue {w[0]:.3e}, not PSD within {psd_tol:.1e}")
        return (v * np.sqrt(np.clip(w, 0.0, None))) @ dagger(v)

    s = _psd_sqrt(sigma)
    inner = _psd_sqrt(s @ rho @ s)
    return float(np.trace(inner).real ** 2)


# ----------------------------------------------------------------------
# Serialization. Channel files and dataset files are JSON; complex
# matrices are stored as {"re": [[...]], "im": [[...]]}. Floats use
# Python's repr, which round-trips float64 exactly.
# ----------------------------------------------------------------------

def _matrix_to_json(a):
    a = np.asarray(a, dtype=complex)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def _matrix_from_json(obj, what="matrix"):
    try:
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed {what}: expected re/im arrays ({exc})") from exc
    if re.shape != im.shape:
        raise ValueError(f"malformed {what}: re shape {re.shape} != im shape {im.shape}")
    return re + 1j * im


def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.write("\n")


def channel_sha(channel: MixedUnitaryChannel) -> str:
    """SHA-256 of the channel's canonical JSON serialization."""
    payload = json.dumps(_channel_to_json(channel), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def _channel_to_json(channel):
    return {
        "dim": channel.dim,
        "weights": channel.weights.tolist(),
        "unitaries": [_matrix_to_json(u) for u in channel.unitaries],
    }


def save_channel(channel: MixedUnitaryChannel, path) -> None:
    _dump_json(_channel_to_json(channel), path)


def load_channel(path, unitary_tol: float = UNITARY_TOL) -> MixedUnitaryChannel:
    """Load and validate a channel file; invalid content raises ValueError."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON at line {exc.lineno}: {exc.msg}") from exc
    for key in ("dim", "weights", "unitaries"):
        if key not in obj:
            raise ValueError(f"{path}: missing field '{key}'")
    dim = int(obj["dim"])
    weights = np.asarray(obj["weights"], dtype=float)
    unitaries = np.stack(
        [_matrix_from_json(u, f"unitaries[{k}]") for k, u in enumerate(obj["unitaries"])]
    )
    if unitaries.shape[1:] != (dim, dim):
        raise ValueError(f"{path}: unitaries have shape {unitaries.shape[1:]}, dim says {dim}")
    channel = MixedUnitaryChannel(weights, unitaries)
    channel.validate(unitary_tol=unitary_tol)
    return channel


def save_dataset(dataset: Dataset, path) -> None:
    obj = {
        "dim": dataset.dim,
        "m": len(dataset),
        "seed": dataset.seed,
        "channel_sha": dataset.channel_sha,
        "pairs": [
            {"rho": _matrix_to_json(p.rho), "sigma": _matrix_to_json(p.sigma)}
            for p in dataset.pairs
        ],
    }
    obj.update(dataset.meta)
    _dump_json(obj, path)


def load_dataset(path, validate_states: bool = True) -> Dataset:
    """Load a dataset file, optionally validating every state."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON at line {exc.lineno}: {exc.msg}") from exc
    if "pairs" not in obj or not obj["pairs"]:
        raise ValueError(f"{path}: no state pairs")
    pairs = []
    for j, rec in enumerate(obj["pairs"]):
        try:
            rho = _matrix_from_json(rec["rho"], f"pairs[{j}].rho")
            sigma = _matrix_from_json(rec["sigma"], f"pairs[{j}].sigma")
        except KeyError as exc:
            raise ValueError(f"{path}: pairs[{j}] missing {exc}") from exc
        if validate_states:
            try:
                validate_density(rho)
                validate_density(sigma)
            except ValueError as exc:
                raise ValueError(f"{path}: pairs[{j}]: {exc}") from exc
        pairs.append(StatePair(rho, sigma))
    dim = int(obj.get("dim", pairs[0].rho.shape[0]))
    if pairs[0].rho.shape[0] != dim:
        raise ValueError(f"{path}: dim field {dim} does not match states")
    if "m" in obj and int(obj["m"]) != len(pairs):
        raise ValueError(f"{path}: m field {obj['m']} does not match {len(pairs)} pairs")
    return Dataset(pairs, seed=obj.get("seed"), channel_sha=obj.get("channel_sha"))
