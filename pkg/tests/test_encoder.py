import numpy as np
import pytest

from clnce.encoder import (
    EncoderModel,
    OptimizerHyper,
    OptimizerState,
    add_grads,
    backward,
    forward,
    init_model,
    load_checkpoint,
    lr_at,
    save_checkpoint,
    sgd_step,
)
from clnce.errors import ParameterError, ShapeError, StateError


def straight_line_forward(model, x):
    """Independent re-implementation used as an oracle for forward()."""
    h = np.array(x, dtype=np.float64)
    for w, b in model.encoder_layers:
        h = np.maximum(h @ w + b, 0.0)
    n_proj = len(model.projection_layers)
    for li, (w, b) in enumerate(model.projection_layers):
        h = h @ w + b
        if li != n_proj - 1:
            h = np.maximum(h, 0.0)
    norms = np.sqrt((h * h).sum(axis=1))
    out = np.zeros_like(h)
    for i in range(h.shape[0]):
        if norms[i] > 0:
            out[i] = h[i] / norms[i]
    return out


def flatten_params(model):
    return np.concatenate([p.ravel() for p in model.all_params()])


def set_params(model, vec):
    offset = 0
    for p in model.all_params():
        p[...] = vec[offset : offset + p.size].reshape(p.shape)
        offset += p.size


class TestForward:
    def test_zero_model_degenerate_rows(self):
        model = init_model([3, 4], [4, 2], seed=0)
        for w, b in model.encoder_layers + model.projection_layers:
            w[...] = 0.0
            b[...] = 0.0
        enc_out, proj_out, cache = forward(model, np.ones((2, 3)))
        assert (enc_out == 0).all()
        assert (proj_out == 0).all()
        assert cache.degenerate.all()

    def test_identity_layer_positive_input(self):
        model = EncoderModel(
            encoder_layers=[(np.eye(3), np.zeros(3))],
            projection_layers=[(np.eye(3), np.zeros(3))],
        )
        x = np.abs(np.random.default_rng(0).normal(size=(4, 3))) + 0.1
        enc_out, proj_out, _ = forward(model, x)
        np.testing.assert_allclose(enc_out, x, atol=1e-15)
        np.testing.assert_allclose(
            proj_out, x / np.linalg.norm(x, axis=1, keepdims=True), atol=1e-15
        )

    def test_matches_straight_line_oracle(self):
        model = init_model([5, 8, 6], [6, 4, 3], seed=3)
        x = np.random.default_rng(1).normal(size=(7, 5))
        _, proj_out, _ = forward(model, x)
        np.testing.assert_allclose(proj_out, straight_line_forward(model, x), atol=1e-12)

    def test_projection_rows_unit_norm(self):
        model = init_model([4, 6], [6, 3], seed=2)
        x = np.random.default_rng(4).normal(size=(10, 4))
        _, proj_out, cache = forward(model, x)
        norms = np.linalg.norm(proj_out[~cache.degenerate], axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)

    def test_width_mismatch(self):
        model = init_model([4, 6], [6, 3], seed=2)
        with pytest.raises(ShapeError):
            forward(model, np.zeros((2, 5)))


class TestBackward:
    def test_zero_upstream_gradient(self):
        model = init_model([3, 5], [5, 2], seed=1)
        x = np.random.default_rng(0).normal(size=(4, 3))
        _, proj, cache = forward(model, x)
        enc_g, proj_g = backward(model, cache, np.zeros_like(proj))
        for w_g, b_g in enc_g + proj_g:
            assert (w_g == 0).all() and (b_g == 0).all()

    def test_stale_cache(self):
        m1 = init_model([3, 5], [5, 2], seed=1)
        m2 = init_model([3, 5], [5, 2], seed=2)
        _, proj, cache = forward(m1, np.ones((2, 3)))
        with pytest.raises(StateError):
            backward(m2, cache, np.zeros_like(proj))

    @pytest.mark.parametrize("seed", range(5))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        # redraw until every ReLU pre-activation and row norm sits away from
        # its kink, where central differences are meaningless
        for attempt in range(100):
            model = init_model([4, 6, 5], [5, 3], seed=1000 * seed + attempt)
            x = rng.normal(size=(6, 4))
            _, _, probe = forward(model, x)
            margins = min(np.abs(z).min() for z in probe.pre_acts)
            if margins > 1e-3 and probe.norms.min() > 1e-2:
                break
        # random linear loss over projections keeps the check exact
        coeff = rng.normal(size=(6, 3))

        def loss_at(vec):
            set_params(model, vec)
            _, proj, _ = forward(model, x)
            return float((coeff * proj).sum())

        base = flatten_params(model).copy()
        _, proj, cache = forward(model, x)
        enc_g, proj_g = backward(model, cache, coeff)
        analytic = np.concatenate(
            [g.ravel() for wg, bg in enc_g + proj_g for g in (wg, bg)]
        )
        eps = 1e-6
        idx = rng.choice(base.size, size=40, replace=False)
        for i in idx:
            vp = base.copy()
            vp[i] += eps
            vm = base.copy()
            vm[i] -= eps
            fd = (loss_at(vp) - loss_at(vm)) / (2 * eps)
            scale = max(abs(fd), abs(analytic[i]), 1e-8)
            assert abs(fd - analytic[i]) / scale < 1e-5
        set_params(model, base)

    def test_single_linear_layer_outer_product(self):
        # loss = sum of raw projections requires bypassing the normalization,
        # so use the encoder gradient of a sum over normalized outputs of a
        # 1-sample batch where the structure is still analytic: check the
        # unnormalized case via a model whose projection output is 1-D.
        model = EncoderModel(
            encoder_layers=[(np.eye(2), np.zeros(2))],
            projection_layers=[(np.array([[1.0], [1.0]]), np.zeros(1))],
        )
        x = np.array([[2.0, 3.0]])
        _, proj, cache = forward(model, x)
        # 1-D normalized output is +-1 with zero gradient through the norm
        enc_g, proj_g = backward(model, cache, np.ones_like(proj))
        assert abs(proj_g[0][0]).max() < 1e-15


class TestScheduler:
    def setup_method(self):
        self.hyper = OptimizerHyper(
            peak_lr=0.4, momentum=0.0, weight_decay=0.0,
            warmup_steps=10, total_steps=110,
        )

    def test_warmup_endpoint(self):
        assert lr_at(10, self.hyper) == pytest.approx(0.4)

    def test_final_step_zero(self):
        assert lr_at(110, self.hyper) == pytest.approx(0.0, abs=1e-15)

    def test_decay_midpoint(self):
        assert lr_at(60, self.hyper) == pytest.approx(0.2)

    def test_continuity_at_boundary(self):
        assert abs(lr_at(9, self.hyper) - lr_at(10, self.hyper)) < 0.05

    def test_linear_warmup(self):
        assert lr_at(0, self.hyper) == pytest.approx(0.04)
        assert lr_at(4, self.hyper) == pytest.approx(0.2)

    def test_out_of_range(self):
        with pytest.raises(ParameterError):
            lr_at(111, self.hyper)


class TestSgdStep:
    def make(self, **hyper_kw):
        model = init_model([2, 3], [3, 2], seed=0)
        defaults = dict(
            peak_lr=0.1, momentum=0.0, weight_decay=0.0,
            warmup_steps=0, total_steps=1000,
        )
        defaults.update(hyper_kw)
        hyper = OptimizerHyper(**defaults)
        return model, OptimizerState.for_model(model, hyper)

    def ones_grads(self, model, value=1.0):
        enc = [(np.full_like(w, value), np.full_like(b, value))
               for w, b in model.encoder_layers]
        proj = [(np.full_like(w, value), np.full_like(b, value))
                for w, b in model.projection_layers]
        return enc, proj

    def test_plain_gradient_descent(self):
        model, state = self.make()
        before = flatten_params(model).copy()
        lr = lr_at(0, state.hyper)
        sgd_step(model, self.ones_grads(model), state)
        np.testing.assert_allclose(flatten_params(model), before - lr, atol=1e-15)

    def test_zero_grad_fixed_point(self):
        model, state = self.make()
        before = flatten_params(model).copy()
        sgd_step(model, self.ones_grads(model, 0.0), state)
        np.testing.assert_array_equal(flatten_params(model), before)

    def test_momentum_recurrence(self):
        # constant grad g for two steps: updates lr0*g then lr1*(0.9g + g)
        model, state = self.make(momentum=0.9)
        before = flatten_params(model).copy()
        lr0 = lr_at(0, state.hyper)
        lr1 = lr_at(1, state.hyper)
        sgd_step(model, self.ones_grads(model), state)
        sgd_step(model, self.ones_grads(model), state)
        expected = before - lr0 * 1.0 - lr1 * (0.9 + 1.0)
        np.testing.assert_allclose(flatten_params(model), expected, atol=1e-14)

    def test_weight_decay_skips_biases(self):
        model, state = self.make(weight_decay=0.5)
        bias_before = model.encoder_layers[0][1].copy() + 1.0
        model.encoder_layers[0][1][...] = bias_before
        sgd_step(model, self.ones_grads(model, 0.0), state)
        lr = lr_at(0, state.hyper)
        np.testing.assert_allclose(
            model.encoder_layers[0][1], bias_before, atol=1e-15
        )
        # weights do decay
        assert state.momentum_buffers[0].any()

    def test_shape_mismatch(self):
        model, state = self.make()
        bad = self.ones_grads(model)
        bad[0][0] = (np.zeros((5, 5)), bad[0][0][1])
        with pytest.raises(ShapeError):
            sgd_step(model, bad, state)


class TestCheckpoint:
    def test_byte_exact_round_trip(self, tmp_path):
        model = init_model([3, 5, 4], [4, 2], seed=9)
        hyper = OptimizerHyper(peak_lr=0.17, momentum=0.95, weight_decay=1e-4,
                               warmup_steps=5, total_steps=50)
        state = OptimizerState.for_model(model, hyper)
        grads = (
            [(np.ones_like(w), np.ones_like(b)) for w, b in model.encoder_layers],
            [(np.ones_like(w), np.ones_like(b)) for w, b in model.projection_layers],
        )
        sgd_step(model, grads, state)
        p1 = str(tmp_path / "c1.bin")
        p2 = str(tmp_path / "c2.bin")
        save_checkpoint(model, state, p1)
        model2, state2 = load_checkpoint(p1)
        save_checkpoint(model2, state2, p2)
        assert open(p1, "rb").read() == open(p2, "rb").read()
        assert state2.step_count == 1
        assert state2.hyper == hyper
        for a, b in zip(model.all_params(), model2.all_params()):
            np.testing.assert_array_equal(a, b)


class TestDeterminism:
    def test_identical_trajectories(self):
        trajectories = []
        for _ in range(2):
            model = init_model([3, 4], [4, 2], seed=5)
            hyper = OptimizerHyper(warmup_steps=2, total_steps=20)
            state = OptimizerState.for_model(model, hyper)
            rng = np.random.default_rng(0)
            for _ in range(5):
                x = rng.normal(size=(4, 3))
                _, proj, cache = forward(model, x)
                g = backward(model, cache, np.ones_like(proj))
                sgd_step(model, g, state)
            trajectories.append(flatten_params(model).copy())
        np.testing.assert_array_equal(trajectories[0], trajectories[1])


def test_add_grads():
    model = init_model([2, 3], [3, 2], seed=0)
    g = (
        [(np.ones_like(w), np.ones_like(b)) for w, b in model.encoder_layers],
        [(np.ones_like(w), np.ones_like(b)) for w, b in model.projection_layers],
    )
    total = add_grads(g, g)
    assert (total[0][0][0] == 2).all()
