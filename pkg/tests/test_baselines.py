import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cssr import CssrConfig, build_parse_tree, even_process, iid_process, run_cssr, seven_state_process
from cssr.baselines import (
    DenseHmm,
    context_count,
    cross_validate,
    em_train,
    hmm_word_distribution,
    hmm_word_probabilities,
    log_likelihood,
    machine_to_hmm,
    random_dense_hmm,
    vlmm_learn,
    vlmm_to_machine,
)
from cssr.sources import random_machine


class TestDenseHmm:
    def test_rejects_bad_rows(self):
        with pytest.raises(ValueError):
            DenseHmm([[0.5, 0.6], [0.5, 0.5]], [[1, 0], [0, 1]], [0.5, 0.5])
        with pytest.raises(ValueError):
            DenseHmm([[1.0]], [[1, 0]], [0.5, 0.5])

    def test_text_roundtrip(self):
        h = random_dense_hmm(3, 2, 0)
        back = DenseHmm.from_text(h.to_text())
        assert np.array_equal(back.transition, h.transition)
        assert np.array_equal(back.emission, h.emission)
        assert np.array_equal(back.initial, h.initial)


class TestEm:
    def test_single_state_learns_frequencies_in_one_step(self):
        x = even_process().simulate(5_000, seed=0)
        h = em_train(random_dense_hmm(1, 2, 1), x, tol=0, max_iters=1)
        assert h.emission[0, 1] == pytest.approx(x.mean(), abs=1e-12)

    def test_log_likelihood_nondecreasing(self):
        x = seven_state_process().simulate(3_000, seed=1)
        h = em_train(random_dense_hmm(4, 2, 2, noise=0.5), x, tol=0, max_iters=60)
        ll = np.array(h.log_likelihoods) / len(x)
        assert (np.diff(ll) >= -1e-9).all()
        assert len(ll) == 61

    def test_last_trace_value_is_final_likelihood(self):
        x = even_process().simulate(2_000, seed=2)
        h = em_train(random_dense_hmm(2, 2, 3, noise=0.5), x, tol=0, max_iters=20)
        # the trace ends with the likelihood of the parameters before the final update
        assert log_likelihood(h, x) >= h.log_likelihoods[-1] - 1e-9

    def test_two_states_at_least_as_good_as_one(self):
        # nested models: holds at convergence, so run the full iteration budget
        x = even_process().simulate(10_000, seed=3)
        one = em_train(random_dense_hmm(1, 2, 4), x, tol=0)
        two = em_train(random_dense_hmm(2, 2, 4), x, tol=0)
        assert two.log_likelihoods[-1] / len(x) >= one.log_likelihoods[-1] / len(x) - 1e-9

    def test_empty_sequence(self):
        with pytest.raises(ValueError):
            em_train(random_dense_hmm(2, 2, 0), np.array([], dtype=int))

    def test_impossible_data_reports_iteration(self):
        h = DenseHmm([[1.0]], [[1.0, 0.0]], [1.0])
        with pytest.raises(FloatingPointError, match="iteration 0"):
            em_train(h, np.array([0, 1]))


class TestCrossValidation:
    def test_iid_selects_one_state(self):
        m = iid_process([0.3, 0.7])
        cv = cross_validate(m.simulate(3_000, seed=0), m.simulate(3_000, seed=1), range(1, 4), restarts=2, seed=5)
        assert cv.n_states == 1
        assert set(cv.test_log_likelihood) == {1, 2, 3}

    def test_deterministic(self):
        m = even_process()
        tr, te = m.simulate(2_000, seed=2), m.simulate(2_000, seed=3)
        a = cross_validate(tr, te, range(1, 4), restarts=2, seed=9)
        b = cross_validate(tr, te, range(1, 4), restarts=2, seed=9)
        assert a.n_states == b.n_states and a.test_log_likelihood == b.test_log_likelihood

    def test_ties_go_to_smaller_model(self, monkeypatch):
        import cssr.baselines.hmm as hmm

        monkeypatch.setattr(hmm, "log_likelihood", lambda model, seq: -1.0)
        m = iid_process([0.5, 0.5])
        cv = hmm.cross_validate(m.simulate(200, seed=0), m.simulate(200, seed=1), [3, 2, 4], restarts=1)
        assert cv.n_states == 2

    def test_empty_range(self):
        with pytest.raises(ValueError):
            cross_validate([0, 1], [0, 1], [])


class TestHmmWords:
    def test_single_state_is_product_of_marginals(self):
        h = DenseHmm([[1.0]], [[0.2, 0.8]], [1.0])
        d = hmm_word_distribution(h, 2)
        assert d[("0", "1")] == pytest.approx(0.16)
        assert d[("1", "1")] == pytest.approx(0.64)

    @pytest.mark.parametrize("factory", [even_process, seven_state_process])
    def test_converted_machine_matches(self, factory):
        m = factory()
        h = machine_to_hmm(m)
        for L in range(1, 7):
            assert np.abs(hmm_word_probabilities(h, L) - m.word_probabilities(L)).max() <= 1e-10

    def test_random_machines_match(self):
        for seed in range(5):
            m = random_machine(4, 3, seed)
            h = machine_to_hmm(m)
            assert np.abs(hmm_word_probabilities(h, 4) - m.word_probabilities(4)).max() <= 1e-10

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 5), st.integers(2, 3), st.integers(0, 2**32 - 1))
    def test_marginal_and_normalization(self, M, k, seed):
        h = random_dense_hmm(M, k, seed, noise=0.9)
        p1 = hmm_word_probabilities(h, 1)
        assert np.allclose(p1, h.stationary() @ h.emission, atol=1e-12)
        for L in range(1, 5):
            p = hmm_word_probabilities(h, L)
            assert abs(p.sum() - 1) < 1e-10
            assert np.allclose(p.reshape(-1, k).sum(axis=1), hmm_word_probabilities(h, L - 1), atol=1e-10)


def quiet_tree(x, L):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_parse_tree(x, L, k=2)


class TestVlmm:
    def test_iid_single_context(self):
        x = iid_process([0.4, 0.6]).simulate(10_000, seed=0)
        ct = vlmm_learn(quiet_tree(x, 5), 5)
        assert list(ct.contexts) == [()]
        assert vlmm_to_machine(ct).n_states == 1

    def test_seven_state_contexts_are_defining_suffixes(self):
        m = seven_state_process()
        x = m.simulate(100_000, seed=1)
        ct = vlmm_learn(quiet_tree(x, 6), 6)
        assert set(ct.contexts) == {ws[0] for ws in m.suffixes}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assert context_count(ct) == run_cssr(x, CssrConfig(6), m.alphabet).machine.n_states

    def test_even_blowup(self):
        x = even_process().simulate(100_000, seed=2)
        counts = [len(vlmm_learn(quiet_tree(x, L), L)) for L in (3, 5, 7, 9)]
        assert counts == sorted(set(counts))

    def test_even_contexts_are_runs_of_B(self):
        x = even_process().simulate(100_000, seed=3)
        ct = vlmm_learn(quiet_tree(x, 4), 4)
        assert set(ct.contexts) == {(0,), (0, 1), (0, 1, 1), (0, 1, 1, 1), (1, 1, 1, 1)}

    @pytest.mark.parametrize("source,seed", [(even_process, 4), (seven_state_process, 5)])
    def test_suffix_free_and_complete(self, source, seed):
        ct = vlmm_learn(quiet_tree(source().simulate(20_000, seed=seed), 6), 6)
        assert ct.is_suffix_free() and ct.is_complete()

    def test_unobserved_children_inherit(self):
        # period B A C A: context A splits into BA and CA, and AA never occurs
        x = np.array([1, 0, 2, 0] * 400)
        tree = build_parse_tree(x, 3, k=3)
        ct = vlmm_learn(tree, 3)
        assert ct.is_complete()
        assert {(1, 0), (2, 0), (0, 0)} <= set(ct.contexts)
        assert ct.observed[(0, 0)] is False and ct.observed[(1, 0)] is True
        parent = tree.next_counts((0,))
        assert np.allclose(ct.contexts[(0, 0)], parent / parent.sum())

    def test_match_and_predict(self):
        x = even_process().simulate(50_000, seed=6)
        ct = vlmm_learn(quiet_tree(x, 3), 3)
        assert ct.match((1, 1, 0)) == (0,)
        assert ct.predict((1, 0, 1)).probs[1] == pytest.approx(1.0)

    def test_tree_too_shallow(self):
        with pytest.raises(ValueError):
            vlmm_learn(quiet_tree(np.array([0, 1] * 20), 2), 3)
