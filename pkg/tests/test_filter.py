import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from taskphase import filter as hmm

from oracles import brute_force_filter, product_of_modalities, random_instance


# --------------------------------------------------------- transition matrix

def test_transition_matrix_k5_exact():
    a = hmm.make_transition_matrix(5, 0.95)
    expected = np.full((5, 5), 0.0125)
    np.fill_diagonal(expected, 0.95)
    assert np.array_equal(a, expected)
    assert np.all(np.abs(a.sum(axis=1) - 1.0) <= 1e-12)


def test_transition_matrix_k2_half_is_uniform():
    assert np.array_equal(hmm.make_transition_matrix(2, 0.5), np.full((2, 2), 0.5))


def test_transition_matrix_k7_off_diagonal():
    a = hmm.make_transition_matrix(7, 0.95)
    off = a[~np.eye(7, dtype=bool)]
    assert np.allclose(off, 0.05 / 6, rtol=0, atol=1e-15)
    assert abs(off[0] - 0.008333333333333333) < 1e-15
    assert np.all(np.abs(a.sum(axis=1) - 1.0) <= 1e-12)


@pytest.mark.parametrize("k,p", [(1, 0.9), (0, 0.5), (3, 0.0), (3, 1.0), (3, -0.1), (3, 1.5)])
def test_transition_matrix_rejects_bad_arguments(k, p):
    with pytest.raises(hmm.InvalidArgumentError):
        hmm.make_transition_matrix(k, p)


# ------------------------------------------------------------------ predict

def test_predict_uniform_is_stationary():
    a = hmm.make_transition_matrix(5, 0.95)
    assert np.allclose(hmm.predict(hmm.uniform_belief(5), a), 0.2, atol=1e-15)


def test_predict_identity_keeps_one_hot():
    b = np.array([0.0, 1.0, 0.0])
    assert np.array_equal(hmm.predict(b, np.eye(3)), b)


def test_predict_one_hot_through_k5():
    out = hmm.predict([1, 0, 0, 0, 0], hmm.make_transition_matrix(5, 0.95))
    assert np.allclose(out, [0.95, 0.0125, 0.0125, 0.0125, 0.0125], atol=1e-15)


def test_predict_uses_rows_as_current_state():
    # a[i, j] = p(next = j | current = i); an asymmetric matrix exposes a transpose bug
    a = np.array([[0.0, 1.0], [0.5, 0.5]])
    assert np.allclose(hmm.predict([1.0, 0.0], a), [0.0, 1.0])


def test_predict_dimension_mismatch():
    with pytest.raises(hmm.InvalidArgumentError):
        hmm.predict([0.5, 0.5], np.eye(3))


# ------------------------------------------------------------------- update

def test_update_constant_likelihood_leaves_belief():
    b = np.array([0.2, 0.3, 0.5])
    assert np.allclose(hmm.update(b, [4.0, 4.0, 4.0]), b, atol=1e-15)


def test_update_hand_example():
    assert np.allclose(hmm.update([0.5, 0.5], [3.0, 1.0]), [0.75, 0.25], atol=1e-15)


def test_update_scale_invariant():
    b = np.array([0.1, 0.6, 0.3])
    l = np.array([0.2, 0.05, 1.3])
    assert np.allclose(hmm.update(b, l), hmm.update(b, 1e-7 * l), atol=1e-15)


@pytest.mark.parametrize("bad", [[0.0, 0.0], [np.nan, 1.0], [np.inf, 1.0]])
def test_update_degenerate_likelihood(bad):
    with pytest.raises(hmm.NumericDegeneracyError):
        hmm.update([0.5, 0.5], bad)


def test_update_floors_underflowed_entries():
    out = hmm.update([0.5, 0.5], [0.0, 1.0])
    assert out[0] > 0.0 and out.sum() == pytest.approx(1.0)


def test_update_rejects_wrong_length():
    with pytest.raises(hmm.InvalidArgumentError):
        hmm.update([0.5, 0.5], [1.0, 1.0, 1.0])


# ---------------------------------------------------------------- fuse_step

def test_fuse_single_modality_is_predict_then_update():
    a = hmm.make_transition_matrix(4, 0.9)
    b = np.array([0.1, 0.2, 0.3, 0.4])
    l = np.array([1.0, 2.0, 0.5, 0.25])
    assert np.array_equal(hmm.fuse_step(b, a, [l]), hmm.update(hmm.predict(b, a), l))


def test_fuse_two_modalities_equals_product():
    rng = np.random.default_rng(3)
    a = rng.dirichlet(np.ones(5), size=5)
    b = rng.dirichlet(np.ones(5))
    l1, l2 = rng.uniform(0.01, 2, 5), rng.uniform(0.01, 2, 5)
    seq = hmm.fuse_step(b, a, [l1, l2])
    once = hmm.update(hmm.predict(b, a), l1 * l2)
    assert np.max(np.abs(seq - once)) <= 1e-12


def test_fuse_requires_a_modality():
    with pytest.raises(hmm.InvalidArgumentError):
        hmm.fuse_step([0.5, 0.5], np.eye(2), [])


def test_fuse_drawer_three_steps_matches_path_enumeration():
    # drawer-sized filter with likelihoods recorded from a simulated approach
    liks = [
        [[1.0, 0.6, 2e-3, 1e-9, 1e-12], [0.9997, 1e-4, 1e-4, 1e-4, 1e-4]],
        [[1.0, 0.8, 5e-2, 1e-6, 1e-9], [1e-4, 0.9997, 1e-4, 1e-4, 1e-4]],
        [[2e-3, 0.05, 1.0, 1e-4, 1e-7], [1e-4, 1e-4, 0.49985, 0.49985, 1e-4]],
    ]
    a = hmm.make_transition_matrix(5, 0.95)
    b = hmm.uniform_belief(5)
    for step in liks:
        b = hmm.fuse_step(b, a, [np.array(l) for l in step])
    ref = brute_force_filter(hmm.uniform_belief(5), a, [product_of_modalities(np.array(s)) for s in liks])
    assert np.max(np.abs(b - ref)) <= 1e-12
    assert hmm.map_state(b) == 2


def test_map_after_push_matches_oracle_replay():
    # contact, then a push into free space, then contact again
    phases = 5
    ft = {"free": [1.0, 1.0, 1e-8, 1e-10, 1e-12], "plate": [1e-6, 1e-6, 1.0, 1e-3, 1e-8]}
    vis = {"plate": [1e-4, 1e-4, 0.49985, 0.49985, 1e-4], "free": [0.9997, 1e-4, 1e-4, 1e-4, 1e-4]}
    log = ["plate"] * 2 + ["free"] * 2 + ["plate"] * 3
    a = hmm.make_transition_matrix(phases, 0.95)
    b = hmm.uniform_belief(phases)
    seen, maps = [], []
    for obs in log:
        l = [np.array(ft[obs]), np.array(vis[obs])]
        b = hmm.fuse_step(b, a, l)
        seen.append(product_of_modalities(l))
        ref = brute_force_filter(hmm.uniform_belief(phases), a, seen)
        assert np.max(np.abs(b - np.array(ref))) <= 1e-9
        assert hmm.map_state(b) == int(np.argmax(ref))
        maps.append(hmm.map_state(b))
    assert maps == [2, 2, 0, 0, 2, 2, 2]


@pytest.mark.parametrize("seed", range(20))
def test_fuse_matches_path_enumeration_random(seed):
    rng = np.random.default_rng(seed)
    k, steps = int(rng.integers(2, 7)), int(rng.integers(1, 7))
    prior, a, liks = random_instance(rng, k, steps)
    b = prior
    for step in liks:
        b = hmm.fuse_step(b, a, step)
    ref = brute_force_filter(prior, a, [product_of_modalities(s) for s in liks])
    assert np.max(np.abs(b - np.array(ref))) <= 1e-9


# ---------------------------------------------------------------- map_state

def test_map_unique_max():
    assert hmm.map_state([0.1, 0.7, 0.2]) == 1


def test_map_tie_goes_to_lowest_index():
    assert hmm.map_state([0.5, 0.5]) == 0
    assert hmm.map_state([0.2, 0.4, 0.4]) == 1


@pytest.mark.parametrize("bad", [[0.5, 0.6], [-0.1, 1.1], [1.0]])
def test_invalid_belief_rejected(bad):
    with pytest.raises(hmm.InvalidArgumentError):
        hmm.map_state(bad)


# --------------------------------------------------------------- properties

ks = st.integers(min_value=2, max_value=8)


@st.composite
def filter_inputs(draw):
    k = draw(ks)
    b = draw(arrays(float, k, elements=st.floats(1e-6, 1.0)))
    a = draw(arrays(float, (k, k), elements=st.floats(1e-6, 1.0)))
    l = draw(arrays(float, k, elements=st.floats(1e-200, 1e200)))
    return b / b.sum(), a / a.sum(axis=1, keepdims=True), l


@settings(max_examples=200, deadline=None)
@given(filter_inputs())
def test_property_outputs_are_normalized(inp):
    b, a, l = inp
    for out in (hmm.predict(b, a), hmm.update(b, l), hmm.fuse_step(b, a, [l, l[::-1]])):
        assert abs(out.sum() - 1.0) <= 1e-9
        assert np.all(out >= 0) and np.all(out <= 1)


@settings(max_examples=200, deadline=None)
@given(ks, st.floats(min_value=1e-6, max_value=1 - 1e-6))
def test_property_transition_rows_stochastic(k, p):
    a = hmm.make_transition_matrix(k, p)
    assert np.all(np.abs(a.sum(axis=1) - 1.0) <= 1e-12)
    assert np.all(a >= 0)
    assert hmm.is_row_stochastic(a)


@settings(max_examples=200, deadline=None)
@given(filter_inputs(), st.floats(min_value=1e-100, max_value=1e100))
def test_property_map_scale_invariant(inp, c):
    b, a, l = inp
    # keep c * l clear of the likelihood floor, and skip exact or near ties where
    # the last bit of rounding picks the winner
    l = np.clip(l, 1e-100, 1e100)
    post = np.sort(hmm.fuse_step(b, a, [l]))
    assume(post[-1] - post[-2] > 1e-9)
    assert hmm.map_state(hmm.fuse_step(b, a, [l])) == hmm.map_state(hmm.fuse_step(b, a, [c * l]))


@settings(max_examples=100, deadline=None)
@given(ks, st.floats(min_value=0.05, max_value=0.99), st.floats(min_value=1e-50, max_value=1e50))
def test_property_uniform_fixed_point(k, p, c):
    a = hmm.make_transition_matrix(k, p)
    out = hmm.fuse_step(hmm.uniform_belief(k), a, [np.full(k, c)])
    assert np.allclose(out, 1.0 / k, rtol=0, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(filter_inputs())
def test_property_deterministic(inp):
    b, a, l = inp
    assert hmm.fuse_step(b, a, [l]).tobytes() == hmm.fuse_step(b.copy(), a.copy(), [l.copy()]).tobytes()


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_property_oracle_equivalence(seed):
    rng = np.random.default_rng(seed)
    k, steps = int(rng.integers(2, 7)), int(rng.integers(1, 7))
    prior, a, liks = random_instance(rng, k, steps)
    b = prior
    for step in liks:
        b = hmm.fuse_step(b, a, step)
    ref = brute_force_filter(prior, a, [product_of_modalities(s) for s in liks])
    assert np.max(np.abs(b - np.array(ref))) <= 1e-9
