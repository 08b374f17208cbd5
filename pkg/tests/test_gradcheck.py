"""Finite-difference verification harness and the hand-written backwards."""

import numpy as np

import lanetopo as lt
from lanetopo.attention import SigmoidMaskParams, sigmoid_mask_backward, sigmoid_mask_forward
from lanetopo.gradcheck import KINK_MARGIN, build_standard_ops, grad_check, run_gradcheck
from lanetopo.nn import MlpParams, mlp_backward, mlp_forward_cached

OP_NAMES = {"mlp_forward", "sigmoid_mask", "self_attention", "masked_cross_attention"}


class NullOp:
    name = "null"

    def variables(self):
        return {}

    def forward(self):
        return np.zeros((1, 1))

    def analytic_grads(self, gy):
        return {}

    def min_kink_margin(self):
        return np.inf


class TestHarness:
    def test_all_ops_pass_on_a_small_run(self):
        results = run_gradcheck(seed=0, instances=3)
        assert len(results) == 12
        assert {r.op for r in results} == OP_NAMES
        for r in results:
            assert not r.skipped
            assert r.n_entries > 0
            assert r.max_rel_error < 1e-4

    def test_runs_are_deterministic(self):
        a = run_gradcheck(seed=5, instances=2)
        b = run_gradcheck(seed=5, instances=2)
        assert [r.max_rel_error for r in a] == [r.max_rel_error for r in b]

    def test_corruption_is_detected(self):
        results = run_gradcheck(seed=0, instances=2, corrupt="sigmoid_mask")
        bad = [r for r in results if r.op == "sigmoid_mask"]
        good = [r for r in results if r.op != "sigmoid_mask"]
        assert all(r.max_rel_error > 1e-3 for r in bad)
        assert all(r.max_rel_error < 1e-4 for r in good)

    def test_zero_entry_op_is_skipped_with_note(self):
        r = grad_check(NullOp())
        assert r.skipped
        assert r.n_entries == 0
        assert "skipped" in r.note

    def test_standard_ops_clear_the_kink_margin(self):
        for op in build_standard_ops(seed=42):
            assert op.min_kink_margin() > KINK_MARGIN


class TestHandWrittenBackwards:
    def test_mlp_bias_gradient_is_upstream_column_sum(self):
        params = MlpParams(weights=[np.zeros((3, 2))], biases=[np.zeros(2)])
        x = np.random.default_rng(0).normal(size=(4, 3))
        _, cache = mlp_forward_cached(params, x)
        gy = np.ones((4, 2))
        _, grads = mlp_backward(params, cache, gy)
        gw, gb = grads[0]
        assert np.array_equal(gb, gy.sum(axis=0))
        assert np.array_equal(gw, x.T @ gy)

    def test_mlp_input_gradient_through_zero_weights_is_zero(self):
        params = MlpParams(weights=[np.zeros((3, 2))], biases=[np.zeros(2)])
        x = np.ones((2, 3))
        _, cache = mlp_forward_cached(params, x)
        gx, _ = mlp_backward(params, cache, np.ones((2, 2)))
        assert np.array_equal(gx, np.zeros((2, 3)))

    def test_sigmoid_mask_slope_is_quarter_at_zero(self):
        # identity mask MLP: preactivation 0 -> sigmoid slope 1/4
        params = SigmoidMaskParams(mlp=MlpParams(weights=[np.array([[1.0]])],
                                                 biases=[np.array([0.0])]))
        _, cache = sigmoid_mask_forward(params, np.zeros((1, 1)))
        gd, _ = sigmoid_mask_backward(params, cache, np.ones((1, 1)))
        assert gd[0, 0] == 0.25

    def test_sigmoid_mask_clamp_floor_blocks_gradient(self):
        params = SigmoidMaskParams(mlp=MlpParams(weights=[np.array([[0.0]])],
                                                 biases=[np.array([-30.0])]))
        _, cache = sigmoid_mask_forward(params, np.zeros((1, 1)))
        gd, _ = sigmoid_mask_backward(params, cache, np.ones((1, 1)))
        assert gd[0, 0] == 0.0
