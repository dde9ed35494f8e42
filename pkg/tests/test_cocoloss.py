"""Erasing mask, contrastive objective, analytic gradient oracle."""

import math

import numpy as np
import pytest

from graphcoco import (
    BatchViews,
    ConfigError,
    LossConfig,
    NumericError,
    ShapeError,
    Tape,
    backward,
    build_mask,
    erase,
    finite_diff,
    infonce_batch,
    infonce_grad_analytic,
    minmax_scale,
    tensor,
)
from graphcoco import ndiff

from helpers import rel_err


def test_minmax_scale_frozen_example():
    scaled = minmax_scale(np.array([0.1, 0.5, 0.9, 0.3]))
    assert np.allclose(scaled, [0.0, 0.5, 1.0, 0.25], atol=1e-15)


def test_minmax_scale_constant_matrix_is_zero():
    assert np.array_equal(minmax_scale(np.full((3, 2), 7.5)), np.zeros((3, 2)))


def test_minmax_scale_hits_unit_interval_endpoints():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(4, 5))
    s = minmax_scale(x)
    assert s.min() == 0.0 and s.max() == 1.0
    assert s.shape == x.shape


def test_mask_frozen_example():
    mask = build_mask(minmax_scale(np.array([0.1, 0.5, 0.9, 0.3])), 0.7)
    assert np.array_equal(mask, [1.0, 1.0, 0.0, 1.0])


def test_erase_frozen_example():
    out = erase(None, tensor([2.0, 4.0, 6.0, 8.0]), np.array([1.0, 1.0, 0.0, 1.0]))
    assert np.array_equal(out.data, [2.0, 4.0, 0.0, 8.0])


def test_delta_one_keeps_everything():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(3, 4))
    # normalized max is exactly 1, and the cut is strict, so nothing is erased
    assert np.array_equal(build_mask(minmax_scale(x), 1.0), np.ones((3, 4)))


def test_delta_zero_keeps_only_the_minimum():
    x = np.array([[3.0, -1.0], [0.5, -1.0]])
    mask = build_mask(minmax_scale(x), 0.0)
    assert np.array_equal(mask, [[0.0, 1.0], [0.0, 1.0]])


def test_constant_matrix_gets_all_ones_mask():
    x = np.full((2, 3), 4.2)
    assert np.array_equal(build_mask(minmax_scale(x), 0.7), np.ones((2, 3)))


def test_mask_invariant_to_positive_affine_transforms():
    rng = np.random.default_rng(2)
    for _ in range(200):
        x = rng.normal(size=(3, 4))
        a = float(rng.uniform(0.1, 10.0))
        b = float(rng.normal())
        delta = float(rng.uniform(0.0, 1.0))
        base = build_mask(minmax_scale(x), delta)
        moved = build_mask(minmax_scale(a * x + b), delta)
        assert np.array_equal(base, moved)


def test_mask_grows_with_delta():
    rng = np.random.default_rng(3)
    for _ in range(50):
        x = rng.normal(size=(2, 6))
        d1, d2 = sorted(rng.uniform(0.0, 1.0, size=2))
        m1 = build_mask(minmax_scale(x), float(d1))
        m2 = build_mask(minmax_scale(x), float(d2))
        assert np.all(m1 <= m2)


def test_loss_config_validation():
    with pytest.raises(ConfigError):
        LossConfig(delta=1.5)
    with pytest.raises(ConfigError):
        LossConfig(delta=-0.1)
    with pytest.raises(ConfigError):
        LossConfig(tau=0.0)
    cfg = LossConfig()
    assert cfg.delta == 0.7 and cfg.tau == 0.2


def row(rng, d=5):
    return tensor(rng.normal(size=(1, d)))


def random_views(rng, b, d=5):
    return BatchViews(
        z1=[row(rng, d) for _ in range(b)],
        z2_pos=[row(rng, d) for _ in range(b)],
        z2_neg=[row(rng, d) for _ in range(b)],
    )


def test_batch_views_defaults_and_validation():
    rng = np.random.default_rng(4)
    views = random_views(rng, 2)
    assert views.z1_pos is views.z1
    with pytest.raises(ShapeError):
        BatchViews(z1=[row(rng)], z2_pos=[row(rng), row(rng)], z2_neg=[row(rng)])
    with pytest.raises(ShapeError):
        BatchViews(z1=[], z2_pos=[], z2_neg=[])


def test_single_graph_batch_scores_exactly_zero():
    views = random_views(np.random.default_rng(5), 1)
    assert infonce_batch(None, views, LossConfig()).item() == 0.0


def test_loss_is_nonnegative():
    rng = np.random.default_rng(6)
    for b in (2, 3, 5):
        views = random_views(rng, b)
        assert infonce_batch(None, views, LossConfig(tau=0.3)).item() >= 0.0


def brute_force_loss(z1, z2_pos, z2_neg, z1_pos, tau):
    """Plain-python rendering of the objective, used as an oracle."""

    def cos(a, b):
        a, b = a.reshape(-1), b.reshape(-1)
        return float(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))

    b = len(z1)
    total = 0.0
    for j in range(b):
        pos = cos(z1_pos[j], z2_pos[j])
        for k in (1, 2):
            exps = math.exp(pos / tau)
            for jp in range(b):
                if jp == j:
                    continue
                if k == 1:
                    exps += math.exp(cos(z1[j], z1[jp]) / tau)
                    exps += math.exp(cos(z1[j], z2_neg[jp]) / tau)
                else:
                    exps += math.exp(cos(z2_neg[j], z1[jp]) / tau)
                    exps += math.exp(cos(z2_neg[j], z2_neg[jp]) / tau)
            total += math.log(exps) - pos / tau
    return total / b


def test_matches_brute_force_evaluator():
    rng = np.random.default_rng(7)
    for b in (2, 4):
        views = random_views(rng, b, d=6)
        got = infonce_batch(None, views, LossConfig(tau=0.2)).item()
        want = brute_force_loss(
            [t.data for t in views.z1],
            [t.data for t in views.z2_pos],
            [t.data for t in views.z2_neg],
            [t.data for t in views.z1_pos],
            0.2,
        )
        assert abs(got - want) < 1e-10


def test_separate_positive_anchor_changes_only_positive_terms():
    rng = np.random.default_rng(8)
    b = 3
    z1 = [row(rng) for _ in range(b)]
    z2_pos = [row(rng) for _ in range(b)]
    z2_neg = [row(rng) for _ in range(b)]
    z1_pos = [row(rng) for _ in range(b)]
    got = infonce_batch(
        None, BatchViews(z1, z2_pos, z2_neg, z1_pos), LossConfig(tau=0.4)
    ).item()
    want = brute_force_loss(
        [t.data for t in z1],
        [t.data for t in z2_pos],
        [t.data for t in z2_neg],
        [t.data for t in z1_pos],
        0.4,
    )
    assert abs(got - want) < 1e-10


def test_mask_is_a_gradient_stop():
    """Tape gradients treat the mask as constant; finite differences that
    rebuild the mask from perturbed values agree, because the mask is
    piecewise constant away from the threshold."""
    rng = np.random.default_rng(9)
    d = 6
    cfg = LossConfig(delta=0.7, tau=0.5)
    r_values = {f"r{j}": rng.normal(size=(1, d)) for j in range(2)}
    fixed_z1 = [rng.normal(size=(1, d)) for _ in range(2)]
    fixed_z2n = [rng.normal(size=(1, d)) for _ in range(2)]
    for v in r_values.values():
        gap = np.abs(minmax_scale(v) - cfg.delta).min()
        assert gap > 1e-3  # keep finite differences on one side of the step

    def run(vals):
        tape = Tape()
        rs = {}
        for name, arr in vals.items():
            rs[name] = tensor(arr)
            tape.watch(name, rs[name])
        z2_pos = [
            erase(tape, rs[f"r{j}"], build_mask(minmax_scale(rs[f"r{j}"].data), cfg.delta))
            for j in range(2)
        ]
        views = BatchViews(
            z1=[tensor(a) for a in fixed_z1],
            z2_pos=z2_pos,
            z2_neg=[tensor(a) for a in fixed_z2n],
        )
        return tape, infonce_batch(tape, views, cfg)

    tape, loss = run(r_values)
    grads = backward(tape, loss)
    fd = finite_diff(lambda vals: run(vals)[1].item(), r_values)
    for name in r_values:
        assert rel_err(grads[name].data, fd[name].data) < 1e-5, name


def test_cached_and_recomputed_masks_agree():
    rng = np.random.default_rng(10)
    r = rng.normal(size=(2, 4))
    first = build_mask(minmax_scale(r), 0.7)
    again = build_mask(minmax_scale(r.copy()), 0.7)
    assert np.array_equal(first, again)


def test_analytic_oracle_no_negatives_is_exactly_zero():
    rng = np.random.default_rng(11)
    u, v = rng.normal(size=4), rng.normal(size=4)
    loss, du, dv = infonce_grad_analytic(u, v, [], tau=0.5)
    assert loss == 0.0
    assert np.array_equal(du, np.zeros(4))
    assert np.array_equal(dv, np.zeros(4))


def test_analytic_oracle_matches_finite_differences():
    rng = np.random.default_rng(12)
    u = rng.normal(size=5)
    v_pos = rng.normal(size=5)
    negs = [rng.normal(size=5) for _ in range(2)]
    tau = 0.5
    loss, du, dv = infonce_grad_analytic(u, v_pos, negs, tau)
    assert loss > 0.0

    def f(vals):
        logits = np.array(
            [float(vals["u"] @ vals["v"])] + [float(vals["u"] @ n) for n in negs]
        ) / tau
        return float(np.log(np.exp(logits).sum()) - logits[0])

    fd = finite_diff(f, {"u": u, "v": v_pos})
    assert np.max(np.abs(du - fd["u"].data)) < 1e-6
    assert np.max(np.abs(dv - fd["v"].data)) < 1e-6


def test_analytic_oracle_matches_tape_gradients():
    rng = np.random.default_rng(13)
    d = 4
    tau = 0.5
    u_val = rng.normal(size=(1, d))
    v_val = rng.normal(size=(1, d))
    negs = [rng.normal(size=(1, d)) for _ in range(3)]
    loss_ref, du_ref, dv_ref = infonce_grad_analytic(u_val, v_val, negs, tau)

    tape = Tape()
    u = tensor(u_val)
    v = tensor(v_val)
    tape.watch("u", u)
    tape.watch("v", v)

    def dot(a, b):
        return ndiff.sum_all(tape, ndiff.matmul(tape, a, ndiff.reshape(tape, b, (d, 1))))

    logits = [dot(u, v)] + [dot(u, tensor(n)) for n in negs]
    stacked = ndiff.scale(tape, ndiff.stack_scalars(tape, logits), 1.0 / tau)
    lse = ndiff.log_sum_exp(tape, stacked)
    loss = ndiff.add(tape, lse, ndiff.scale(tape, logits[0], -1.0 / tau))
    grads = backward(tape, loss)
    assert abs(loss.item() - loss_ref) < 1e-12
    assert np.max(np.abs(grads["u"].data.reshape(-1) - du_ref.reshape(-1))) < 1e-9
    assert np.max(np.abs(grads["v"].data.reshape(-1) - dv_ref.reshape(-1))) < 1e-9


def test_batch_loss_gradients_match_finite_differences():
    rng = np.random.default_rng(14)
    b, d = 3, 4
    names = []
    values = {}
    for j in range(b):
        for role in ("z1", "z2p", "z2n"):
            name = f"{role}_{j}"
            names.append(name)
            values[name] = rng.normal(size=(1, d))

    def run(vals):
        tape = Tape()
        ts = {}
        for name in names:
            ts[name] = tensor(vals[name])
            tape.watch(name, ts[name])
        views = BatchViews(
            z1=[ts[f"z1_{j}"] for j in range(b)],
            z2_pos=[ts[f"z2p_{j}"] for j in range(b)],
            z2_neg=[ts[f"z2n_{j}"] for j in range(b)],
        )
        return tape, infonce_batch(tape, views, LossConfig(tau=0.2))

    tape, loss = run(values)
    grads = backward(tape, loss)
    fd = finite_diff(lambda vals: run(vals)[1].item(), values)
    for name in names:
        assert rel_err(grads[name].data, fd[name].data) < 1e-5, name
