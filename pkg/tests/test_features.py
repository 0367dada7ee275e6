import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gomoku_zero.features import (
    N_PLANES,
    NoLegalMovesError,
    NonSquareRotationError,
    SampleFileError,
    Transform,
    TrainingSample,
    augment_sample,
    compose,
    encode_state,
    inverse,
    load_samples,
    mask_and_renormalize,
    read_samples,
    save_samples,
    transform_grid,
    transform_point,
    transform_policy,
    transform_state_tensor,
    write_samples,
)
from gomoku_zero.game import GameConfig, Point, apply_move, moves_of, new_game, replay
from oracles import (
    brute_point,
    brute_transform_grid,
    brute_transform_policy,
    random_ongoing_position,
    random_position,
)


# ----------------------------------------------------------------------
# encode_state
# ----------------------------------------------------------------------


def test_new_game_encodes_all_zero():
    t = encode_state(new_game(GameConfig()))
    assert t.shape == (N_PLANES, 15, 15)
    assert not t.any()


def test_one_move_perspective():
    state = apply_move(new_game(GameConfig()), Point(7, 7))
    t = encode_state(state)
    # White to move: the black stone is the opponent's.
    assert t[0, 7, 7] == -1.0
    assert np.count_nonzero(t) == 1


def test_padding_short_history():
    rng = np.random.default_rng(5)
    state = random_position(rng, GameConfig(9, 9, 5), 7)
    t = encode_state(state)
    for k in range(len(state.history) + 1, N_PLANES):
        assert not t[k].any()


def test_deep_history_plane20():
    rng = np.random.default_rng(11)
    state = random_position(rng, GameConfig(15, 15, 5), 25)
    assert state.move_count == 25
    t = encode_state(state)
    # Plane 20 is the position after move 5; nothing is zero padded.
    for k in range(N_PLANES):
        assert t[k].any(), f"plane {k} should encode stones"
    assert np.count_nonzero(t[20]) == 5


def _assert_matches_reference(state):
    from oracles import reference_encode

    np.testing.assert_array_equal(encode_state(state), reference_encode(state))


@given(seed=st.integers(0, 2**32 - 1), n_moves=st.integers(0, 36))
@settings(max_examples=50, deadline=None)
def test_encode_matches_reference(seed, n_moves):
    rng = np.random.default_rng(seed)
    _assert_matches_reference(random_position(rng, GameConfig(6, 6, 4), n_moves))


# ----------------------------------------------------------------------
# Transforms
# ----------------------------------------------------------------------


def test_identity_keeps_tensor():
    rng = np.random.default_rng(0)
    t = rng.normal(size=(N_PLANES, 5, 5)).astype(np.float32)
    np.testing.assert_array_equal(transform_state_tensor(t, Transform.IDENTITY), t)


def test_center_stone_fixed_by_all_transforms():
    state = apply_move(new_game(GameConfig(7, 7, 5)), Point(3, 3))
    t = encode_state(state)
    for g in Transform:
        np.testing.assert_array_equal(transform_state_tensor(t, g), t)


def test_rot90_rot270_inverse_pair():
    rng = np.random.default_rng(1)
    t = rng.normal(size=(N_PLANES, 6, 6)).astype(np.float32)
    out = transform_state_tensor(transform_state_tensor(t, Transform.ROT90), Transform.ROT270)
    np.testing.assert_array_equal(out, t)


def test_group_tables():
    for g in Transform:
        assert compose(g, inverse(g)) is Transform.IDENTITY
        assert compose(inverse(g), g) is Transform.IDENTITY
    # closure is implicit: compose() would have failed to build otherwise
    assert compose(Transform.FLIP_H, Transform.ROT180) is Transform.FLIP_V


@given(
    g1=st.sampled_from(list(Transform)),
    g2=st.sampled_from(list(Transform)),
    seed=st.integers(0, 10_000),
)
@settings(max_examples=80, deadline=None)
def test_group_law_on_grids(g1, g2, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(5, 5))
    lhs = transform_grid(transform_grid(a, g1), g2)
    rhs = transform_grid(a, compose(g2, g1))
    np.testing.assert_array_equal(lhs, rhs)


@given(g=st.sampled_from(list(Transform)), seed=st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_grid_matches_brute_force_permutation(g, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(7, 7))
    np.testing.assert_array_equal(transform_grid(a, g), brute_transform_grid(a, g))


def test_point_map_matches_brute_force():
    for g in Transform:
        for x in range(5):
            for y in range(5):
                assert transform_point(Point(x, y), g, 5, 5) == brute_point(
                    Point(x, y), g, 5, 5
                )


def test_non_square_rotation_rejected():
    t = np.zeros((N_PLANES, 6, 7), dtype=np.float32)
    for g in (Transform.ROT90, Transform.ROT270, Transform.FLIP_DIAG, Transform.FLIP_ANTIDIAG):
        with pytest.raises(NonSquareRotationError):
            transform_state_tensor(t, g)
    for g in (Transform.IDENTITY, Transform.ROT180, Transform.FLIP_H, Transform.FLIP_V):
        assert transform_state_tensor(t, g).shape == t.shape


def test_policy_one_hot_corner_rot90():
    n = 7
    d = np.zeros(n * n)
    d[0] = 1.0  # cell (0, 0)
    out = transform_policy(d, Transform.ROT90, n, n)
    target = transform_point(Point(0, 0), Transform.ROT90, n, n)
    assert out[target.y * n + target.x] == 1.0
    assert out.sum() == 1.0
    np.testing.assert_array_equal(out, brute_transform_policy(d, Transform.ROT90, n, n))


@given(g=st.sampled_from(list(Transform)), seed=st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_policy_matches_brute_force_and_preserves_sum(g, seed):
    rng = np.random.default_rng(seed)
    d = rng.random(36)
    out = transform_policy(d, g, 6, 6)
    np.testing.assert_array_equal(out, brute_transform_policy(d, g, 6, 6))
    assert out.sum() == pytest.approx(d.sum(), abs=1e-12)


def test_uniform_policy_invariant():
    d = np.full(49, 1 / 49)
    for g in Transform:
        np.testing.assert_array_equal(transform_policy(d, g, 7, 7), d)


# ----------------------------------------------------------------------
# Equivariance: encode(g . state) == g . encode(state)
# ----------------------------------------------------------------------


def transformed_game(state, g):
    moved = [transform_point(p, g, state.config.board_x, state.config.board_y)
             for p in moves_of(state)]
    return replay(state.config, moved)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_encode_equivariance(seed):
    rng = np.random.default_rng(seed)
    state = random_ongoing_position(rng, GameConfig(6, 6, 4), 20)
    t = encode_state(state)
    for g in Transform:
        np.testing.assert_array_equal(
            encode_state(transformed_game(state, g)),
            transform_state_tensor(t, g),
        )


# ----------------------------------------------------------------------
# Augmentation
# ----------------------------------------------------------------------


def test_augment_returns_eight():
    state = replay(GameConfig(6, 6, 4), [Point(0, 0), Point(1, 2)])
    sample = TrainingSample(
        state=encode_state(state), policy=np.full(36, 1 / 36), z=-1
    )
    out = augment_sample(sample)
    assert len(out) == 8
    assert all(s.z == -1 for s in out)


def test_augment_asymmetric_position_distinct():
    # (0,0) and (1,2) have trivial stabilizer on 6x6.
    state = replay(GameConfig(6, 6, 4), [Point(0, 0), Point(1, 2)])
    sample = TrainingSample(state=encode_state(state), policy=np.full(36, 1 / 36), z=0)
    tensors = [s.state.tobytes() for s in augment_sample(sample)]
    assert len(set(tensors)) == 8


def test_augment_symmetric_position_equal():
    state = apply_move(new_game(GameConfig(7, 7, 5)), Point(3, 3))
    sample = TrainingSample(state=encode_state(state), policy=np.full(49, 1 / 49), z=0)
    tensors = {s.state.tobytes() for s in augment_sample(sample)}
    assert len(tensors) == 1


def test_augment_moves_policy_with_state():
    rng = np.random.default_rng(3)
    state = random_ongoing_position(rng, GameConfig(6, 6, 4), 12)
    policy = mask_and_renormalize(rng.random(36), np.arange(36), 6)
    sample = TrainingSample(state=encode_state(state), policy=policy, z=1)
    for g, aug in zip(Transform, augment_sample(sample)):
        np.testing.assert_array_equal(aug.state, transform_state_tensor(sample.state, g))
        np.testing.assert_array_equal(aug.policy, transform_policy(policy, g, 6, 6))


def test_training_sample_validates_z():
    with pytest.raises(ValueError):
        TrainingSample(state=np.zeros((N_PLANES, 6, 6)), policy=np.full(36, 1 / 36), z=2)


# ----------------------------------------------------------------------
# mask_and_renormalize
# ----------------------------------------------------------------------


def test_mask_uniform_with_one_illegal():
    raw = np.full(225, 1.0 / 225)
    legal = {Point(x, y) for x in range(15) for y in range(15)} - {Point(7, 7)}
    out = mask_and_renormalize(raw, legal, 15)
    assert out[7 * 15 + 7] == 0.0
    np.testing.assert_allclose(out[out > 0], 1 / 224)
    assert abs(out.sum() - 1.0) < 1e-9


def test_mask_all_mass_on_illegal_falls_back_to_uniform():
    raw = np.zeros(36)
    raw[0] = 1.0
    legal = np.arange(1, 36)
    out = mask_and_renormalize(raw, legal, 6)
    assert out[0] == 0.0
    np.testing.assert_allclose(out[1:], 1 / 35)


def test_mask_all_legal_renormalizes_only():
    raw = np.array([1.0, 3.0, 4.0, 2.0])
    out = mask_and_renormalize(raw, np.arange(4), 2)
    np.testing.assert_allclose(out, raw / 10.0)


def test_mask_no_legal_moves_raises():
    with pytest.raises(NoLegalMovesError):
        mask_and_renormalize(np.ones(4), np.array([], dtype=np.int64), 2)


def test_mask_rejects_negative_scores():
    with pytest.raises(ValueError):
        mask_and_renormalize(np.array([-1.0, 1.0]), np.arange(2), 2)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_mask_properties(seed):
    rng = np.random.default_rng(seed)
    n = 36
    raw = rng.random(n) * rng.choice([0.0, 1.0, 100.0], size=n)
    k = int(rng.integers(1, n + 1))
    legal = rng.choice(n, size=k, replace=False)
    legal.sort()
    out = mask_and_renormalize(raw, legal, 6)
    assert np.all(out >= 0)
    assert abs(out.sum() - 1.0) < 1e-9
    illegal = np.setdiff1d(np.arange(n), legal)
    assert not out[illegal].any()
    # idempotence
    again = mask_and_renormalize(out, legal, 6)
    np.testing.assert_allclose(again, out, rtol=0, atol=1e-12)


# ----------------------------------------------------------------------
# Sample batch files
# ----------------------------------------------------------------------


def _random_samples(rng, n, config):
    out = []
    for _ in range(n):
        state = random_ongoing_position(rng, config, 12)
        policy = mask_and_renormalize(
            rng.random(config.n_cells), np.arange(config.n_cells), config.board_x
        ).astype(np.float32)
        out.append(TrainingSample(encode_state(state), policy, int(rng.integers(-1, 2))))
    return out


def test_sample_file_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    samples = _random_samples(rng, 5, GameConfig(6, 6, 4))
    path = tmp_path / "batch.azed"
    save_samples(path, samples)
    loaded = load_samples(path)
    assert len(loaded) == 5
    for a, b in zip(samples, loaded):
        np.testing.assert_array_equal(a.state, b.state)
        np.testing.assert_array_equal(np.asarray(a.policy, dtype=np.float32), b.policy)
        assert a.z == b.z
    header = path.read_bytes()[:13]
    assert header[:4] == b"AZED"


def test_sample_file_truncated_rejected(tmp_path):
    rng = np.random.default_rng(10)
    samples = _random_samples(rng, 2, GameConfig(6, 6, 4))
    buf = io.BytesIO()
    write_samples(buf, samples)
    data = buf.getvalue()
    with pytest.raises(SampleFileError):
        read_samples(io.BytesIO(data[: len(data) - 3]))
    with pytest.raises(SampleFileError):
        read_samples(io.BytesIO(b"NOPE" + data[4:]))
