import json

import numpy as np
import pytest

from unimix.channels import (
    PAULI_I,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    MixedUnitaryChannel,
    apply,
    choi,
    depolarizing,
    fidelity,
    generate_dataset,
    load_channel,
    load_dataset,
    random_channel,
    save_channel,
    save_dataset,
)
from unimix.linalg import dagger, haar_random_unitary, random_density, validate_density, vec

rng = np.random.default_rng(77)


def identity_channel(n=2):
    return MixedUnitaryChannel(np.array([1.0]), np.eye(n, dtype=complex)[None])


def test_apply_identity():
    rho = random_density(2, rng)
    assert np.abs(apply(identity_channel(), rho) - rho).max() < 1e-15


def test_apply_pauli_x_flips():
    chan = MixedUnitaryChannel(np.array([1.0]), PAULI_X[None])
    out = apply(chan, np.diag([1.0, 0.0]).astype(complex))
    assert np.abs(out - np.diag([0.0, 1.0])).max() < 1e-15


def test_apply_matches_term_by_term_sum():
    chan = random_channel(4, 5, rng)
    rho = random_density(4, rng)
    direct = sum(
        p * u @ rho @ u.conj().T for p, u in zip(chan.weights, chan.unitaries)
    )
    assert np.abs(apply(chan, rho) - direct).max() < 1e-13


def test_apply_output_is_density():
    chan = random_channel(3, 4, rng)
    out = apply(chan, random_density(3, rng))
    validate_density(out)


def test_apply_dimension_mismatch():
    with pytest.raises(ValueError):
        apply(identity_channel(2), random_density(3, rng))


def test_apply_affine_in_weights():
    n, r = 3, 4
    U = np.stack([haar_random_unitary(n, rng) for _ in range(r)])
    p = rng.dirichlet(np.ones(r))
    q = rng.dirichlet(np.ones(r))
    rho = random_density(n, rng)
    alpha = 0.3
    blend = apply(MixedUnitaryChannel(alpha * p + (1 - alpha) * q, U), rho)
    parts = alpha * apply(MixedUnitaryChannel(p, U), rho) \
        + (1 - alpha) * apply(MixedUnitaryChannel(q, U), rho)
    assert np.abs(blend - parts).max() < 1e-14


def test_choi_identity_channel():
    c = choi(identity_channel())
    v = np.array([1.0, 0.0, 0.0, 1.0])
    assert np.abs(c - np.outer(v, v)).max() < 1e-15


def test_choi_trace_is_dim():
    for _ in range(5):
        chan = random_channel(2, 3, rng)
        assert abs(np.trace(choi(chan)).real - 2.0) < 1e-12
    chan5 = random_channel(5, 4, rng)
    assert abs(np.trace(choi(chan5)).real - 5.0) < 1e-12


def test_choi_depolarizing_assembly():
    p = 0.35
    c = choi(depolarizing(p))
    expected = (1 - p) * np.outer(vec(PAULI_I), vec(PAULI_I).conj())
    for pauli in (PAULI_X, PAULI_Y, PAULI_Z):
        v = vec(pauli)
        expected += p / 3.0 * np.outer(v, v.conj())
    assert np.abs(c - expected).max() < 1e-15


def test_choi_invariant_under_permutation_and_phase():
    chan = random_channel(3, 4, rng)
    perm = [2, 0, 3, 1]
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
    twin = MixedUnitaryChannel(
        chan.weights[perm], chan.unitaries[perm] * phases[:, None, None]
    )
    assert np.linalg.norm(choi(chan) - choi(twin)) < 1e-12


def test_equal_choi_implies_equal_map_on_basis():
    chan = random_channel(2, 3, rng)
    perm = [1, 2, 0]
    twin = MixedUnitaryChannel(chan.weights[perm], chan.unitaries[perm])
    assert np.linalg.norm(choi(chan) - choi(twin)) < 1e-13
    # Hermitian basis of 2x2: check the action agrees entrywise
    e = np.eye(2, dtype=complex)
    basis = [
        np.outer(e[0], e[0]), np.outer(e[1], e[1]),
        (np.outer(e[0], e[1]) + np.outer(e[1], e[0])) / np.sqrt(2),
        1j * (np.outer(e[0], e[1]) - np.outer(e[1], e[0])) / np.sqrt(2),
    ]
    for b in basis:
        lhs = sum(p * u @ b @ dagger(u) for p, u in zip(chan.weights, chan.unitaries))
        rhs = sum(p * u @ b @ dagger(u) for p, u in zip(twin.weights, twin.unitaries))
        assert np.abs(lhs - rhs).max() < 1e-13


def test_depolarizing_p_zero_is_identity():
    chan = depolarizing(0.0)
    rho = random_density(2, rng)
    assert np.abs(apply(chan, rho) - rho).max() < 1e-15


def test_depolarizing_fixes_maximally_mixed():
    rho = 0.5 * np.eye(2, dtype=complex)
    for p in (0.1, 0.5, 0.9):
        assert np.abs(apply(depolarizing(p), rho) - rho).max() < 1e-15


def test_depolarizing_three_quarters_fully_mixes():
    out = apply(depolarizing(0.75), np.diag([1.0, 0.0]).astype(complex))
    assert np.abs(out - 0.5 * np.eye(2)).max() < 1e-15


def test_depolarizing_rejects_bad_probability():
    for bad in (-0.1, 1.1):
        with pytest.raises(ValueError):
            depolarizing(bad)


def test_generate_dataset_identity_channel():
    ds = generate_dataset(identity_channel(3), 1, rng)
    pair = ds.pairs[0]
    assert np.abs(pair.sigma - pair.rho).max() < 1e-15


def test_generate_dataset_outputs_are_densities():
    chan = random_channel(3, 2, rng)
    ds = generate_dataset(chan, 20, rng)
    assert len(ds) == 20
    for pair in ds.pairs:
        validate_density(pair.sigma)


def test_generate_dataset_matches_reapplication():
    chan = random_channel(4, 3, rng)
    ds = generate_dataset(chan, 5, rng)
    for pair in ds.pairs:
        redo = sum(p * u @ pair.rho @ dagger(u)
                   for p, u in zip(chan.weights, chan.unitaries))
        assert np.abs(pair.sigma - redo).max() < 1e-14


def test_generate_dataset_seed_determinism():
    chan = random_channel(3, 2, 11)
    a = generate_dataset(chan, 3, 99)
    b = generate_dataset(chan, 3, 99)
    for x, y in zip(a.pairs, b.pairs):
        assert np.array_equal(x.rho, y.rho)
        assert np.array_equal(x.sigma, y.sigma)


def test_fidelity_self_is_one():
    rho = random_density(4, rng)
    assert abs(fidelity(rho, rho) - 1.0) < 1e-10


def test_fidelity_orthogonal_pure_states():
    a = np.diag([1.0, 0.0]).astype(complex)
    b = np.diag([0.0, 1.0]).astype(complex)
    assert fidelity(a, b) < 1e-12


def test_fidelity_commuting_closed_form():
    a = np.array([0.5, 0.3, 0.2])
    b = np.array([0.1, 0.6, 0.3])
    expected = float(np.sum(np.sqrt(a * b)) ** 2)
    got = fidelity(np.diag(a).astype(complex), np.diag(b).astype(complex))
    assert abs(got - expected) < 1e-12


def test_fidelity_range_and_symmetry():
    for _ in range(5):
        a, b = random_density(3, rng), random_density(3, rng)
        f = fidelity(a, b)
        assert -1e-12 < f < 1 + 1e-10
        assert abs(f - fidelity(b, a)) < 1e-10


def test_channel_roundtrip(tmp_path):
    chan = identity_channel()
    path = tmp_path / "chan.json"
    save_channel(chan, path)
    back = load_channel(path)
    assert np.array_equal(back.weights, chan.weights)
    assert np.abs(back.unitaries - chan.unitaries).max() < 1e-15


def test_channel_roundtrip_random_choi_exact(tmp_path):
    chan = random_channel(3, 5, rng)
    path = tmp_path / "chan.json"
    save_channel(chan, path)
    back = load_channel(path)
    assert np.array_equal(back.weights, chan.weights)
    assert np.array_equal(back.unitaries, chan.unitaries)
    assert np.linalg.norm(choi(chan) - choi(back)) < 1e-12


def test_load_channel_rejects_bad_weight_sum(tmp_path):
    chan = random_channel(2, 2, rng)
    path = tmp_path / "chan.json"
    save_channel(chan, path)
    obj = json.loads(path.read_text())
    obj["weights"] = [0.5, 0.4]
    path.write_text(json.dumps(obj))
    with pytest.raises(ValueError, match="sum"):
        load_channel(path)


def test_load_channel_rejects_non_unitary(tmp_path):
    chan = random_channel(2, 1, rng)
    path = tmp_path / "chan.json"
    save_channel(chan, path)
    obj = json.loads(path.read_text())
    obj["unitaries"][0]["re"][0][0] += 0.1
    path.write_text(json.dumps(obj))
    with pytest.raises(ValueError, match="unitary"):
        load_channel(path)


def test_load_channel_malformed_json(tmp_path):
    path = tmp_path / "chan.json"
    path.write_text("{not valid json")
    with pytest.raises(ValueError, match="line"):
        load_channel(path)


def test_load_channel_missing_field(tmp_path):
    path = tmp_path / "chan.json"
    path.write_text(json.dumps({"dim": 2, "weights": [1.0]}))
    with pytest.raises(ValueError, match="unitaries"):
        load_channel(path)


def test_dataset_roundtrip(tmp_path):
    chan = random_channel(3, 2, rng)
    ds = generate_dataset(chan, 4, rng, seed=123)
    path = tmp_path / "ds.json"
    save_dataset(ds, path)
    back = load_dataset(path)
    assert len(back) == 4
    assert back.seed == 123
    assert back.channel_sha == ds.channel_sha
    for x, y in zip(ds.pairs, back.pairs):
        assert np.array_equal(x.rho, y.rho)
        assert np.array_equal(x.sigma, y.sigma)


def test_load_dataset_rejects_invalid_states(tmp_path):
    chan = random_channel(2, 1, rng)
    ds = generate_dataset(chan, 1, rng)
    path = tmp_path / "ds.json"
    save_dataset(ds, path)
    obj = json.loads(path.read_text())
    obj["pairs"][0]["rho"]["re"][0][0] += 0.5  # breaks the unit trace
    path.write_text(json.dumps(obj))
    with pytest.raises(ValueError, match="pairs\\[0\\]"):
        load_dataset(path)
