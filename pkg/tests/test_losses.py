import numpy as np
import pytest
import torch

import vidcolor.losses as L
from vidcolor.data import soft_masks
from vidcolor.losses import LossWeights, PerceptualNet
from vidcolor.warp import warp

from conftest import fd_check


def frames(rng, *shape):
    return torch.from_numpy(rng.uniform(-1, 1, shape))


def test_l1_examples(rng):
    z = frames(rng, 3, 4, 4)
    assert L.l1_loss(z, z).item() == 0
    assert L.l1_loss(z + 0.5, z).item() == pytest.approx(0.5, abs=1e-12)
    q = torch.full((3, 4, 4), 0.25, dtype=torch.float64)
    assert L.l1_loss(-q, q).item() == pytest.approx(0.5)
    with pytest.raises(ValueError):
        L.l1_loss(z, z[:, :2])


def test_perceptual_identity_and_frozen(rng):
    net = PerceptualNet.random(seed=0).double()
    z = frames(rng, 1, 3, 8, 8)
    assert L.perceptual_loss(z, z, net).item() == 0
    assert L.perceptual_loss(z, -z, net).item() > 0
    assert all(not p.requires_grad for p in net.parameters())
    net.train()
    assert not net.training
    with pytest.raises(ValueError):
        L.perceptual_loss(z, z[..., :4], net)


def test_perceptual_deterministic_across_instances():
    a, b = PerceptualNet.random(seed=7), PerceptualNet.random(seed=7)
    for p, q in zip(a.parameters(), b.parameters()):
        assert torch.equal(p, q)


def test_wgan_examples():
    fake = torch.full((1, 1, 2, 2), 0.3, dtype=torch.float64)
    real = torch.full((1, 1, 2, 2), 0.7, dtype=torch.float64)
    assert L.wgan_g_loss(fake).item() == pytest.approx(-0.3)
    assert L.wgan_d_loss(fake, real).item() == pytest.approx(-0.4)
    assert L.wgan_d_loss(real, real).item() == 0
    with pytest.raises(ValueError):
        L.wgan_g_loss(torch.tensor([float("nan")]))
    with pytest.raises(ValueError):
        L.wgan_d_loss(fake, torch.tensor([float("inf")]))


def test_short_term_examples(rng):
    s = frames(rng, 3, 4, 4)
    static = [s] * 4
    zeros = [torch.zeros(2, 4, 4, dtype=torch.float64)] * 3
    ones = [torch.ones(1, 4, 4, dtype=torch.float64)] * 3
    assert L.short_term_loss(static, zeros, ones).item() == 0
    noisy = [frames(rng, 3, 4, 4) for _ in range(4)]
    assert L.short_term_loss(noisy, zeros, [torch.zeros(1, 4, 4, dtype=torch.float64)] * 3).item() == 0
    flow = torch.from_numpy(rng.uniform(-1, 1, (2, 4, 4)))
    s2 = warp(s, flow) + 0.2
    assert L.short_term_loss([s, s2], [flow], ones[:1]).item() == pytest.approx(0.2, abs=1e-12)


def test_short_term_errors_and_degenerate(rng):
    s = frames(rng, 3, 4, 4)
    with pytest.warns(UserWarning):
        assert L.short_term_loss([s], [], []).item() == 0
    with pytest.raises(ValueError):
        L.short_term_loss([s, s, s], [torch.zeros(2, 4, 4)], [torch.ones(1, 4, 4)])


def _dense_inputs(rng, T, static=False):
    base = frames(rng, 3, 4, 4)
    outs = [base if static else frames(rng, 3, 4, 4) for _ in range(T)]
    pairs = L.adjacent_pairs(T) + L.dense_pairs(T)
    flows = {p: torch.zeros(2, 4, 4, dtype=torch.float64) for p in pairs}
    masks = {p: torch.ones(1, 4, 4, dtype=torch.float64) for p in pairs}
    return outs, flows, masks


def test_dense_pair_enumeration():
    # 0-based indices
    assert L.dense_pairs(5) == [(0, 2), (0, 3), (1, 3), (0, 4), (1, 4), (2, 4)]
    assert L.dense_pairs(3) == [(0, 2)]
    assert L.anchor_pairs(5) == [(0, 2), (0, 3), (0, 4)]


@pytest.mark.parametrize("T", range(3, 9))
def test_dense_pair_count_instrumented(T, rng, monkeypatch):
    seen = []
    real = L.masked_warp_l1

    def counting(s_t, s_m, flow, mask):
        seen.append(1)
        return real(s_t, s_m, flow, mask)

    monkeypatch.setattr(L, "masked_warp_l1", counting)
    L.dense_long_term_loss(*_dense_inputs(rng, T))
    assert len(seen) == (T - 1) * (T - 2) // 2


def test_dense_and_anchor_static_zero_and_t3_agree(rng):
    assert L.dense_long_term_loss(*_dense_inputs(rng, 5, static=True)).item() == 0
    assert L.long_term_first_anchor_loss(*_dense_inputs(rng, 5, static=True)).item() == 0
    args = _dense_inputs(rng, 3)
    assert L.dense_long_term_loss(*args).item() == L.long_term_first_anchor_loss(*args).item()


def test_dense_missing_pair_and_short_clip(rng):
    outs, flows, masks = _dense_inputs(rng, 5)
    del flows[(1, 4)]
    with pytest.raises((KeyError, ValueError)):
        L.dense_long_term_loss(outs, flows, masks)
    with pytest.warns(UserWarning):
        assert L.dense_long_term_loss(outs[:2], flows, masks).item() == 0


def test_normalize_pairs_flag(rng):
    args = _dense_inputs(rng, 5)
    summed = L.dense_long_term_loss(*args).item()
    assert L.dense_long_term_loss(*args, normalize_pairs=True).item() == pytest.approx(summed / 6)


def test_stage1_objective():
    one = torch.tensor(1.0, dtype=torch.float64)
    assert L.stage1_objective(one, one, LossWeights()).item() == 15
    zero = LossWeights(0, 0, 0, 0, 0)
    assert L.stage1_objective(one, one, zero).item() == 0
    assert L.stage1_objective(torch.tensor(0.7), one, LossWeights(perceptual=0)).item() == pytest.approx(7.0)
    with pytest.raises(ValueError):
        LossWeights(l1=-1)


def test_stage2_objective(rng):
    terms = {n: torch.tensor(1.0, dtype=torch.float64) for n in L.TERM_ORDER if n != "long_term"}
    assert L.stage2_objective(terms, LossWeights()).total.item() == 24
    vals = rng.uniform(-2, 2, 5)
    coeffs = rng.uniform(0, 10, 5)
    terms = {n: torch.tensor(v, dtype=torch.float64) for n, v in zip(L.TERM_ORDER, vals)}
    w = LossWeights(*coeffs)
    expected = 0.0
    for c, v in zip(coeffs, vals):
        expected = expected + c * v
    assert L.stage2_objective(terms, w).total.item() == expected
    with pytest.raises(ValueError):
        L.combine({"l1": torch.tensor(1.0)}, LossWeights())


def test_masks_are_constants(rng):
    gt = frames(rng, 3, 3, 4, 4).requires_grad_(True)
    pairs = L.adjacent_pairs(3) + L.dense_pairs(3)
    flows = {p: torch.from_numpy(rng.uniform(-1, 1, (2, 4, 4))) for p in pairs}
    masks = soft_masks(gt, flows, pairs)
    assert all(not m.requires_grad and m.grad_fn is None for m in masks.values())


def test_losses_nonnegative_and_pixel_permutation_invariant(rng):
    s, z = frames(rng, 3, 4, 4), frames(rng, 3, 4, 4)
    perm = torch.from_numpy(rng.permutation(16))
    sp, zp = s.reshape(3, 16)[:, perm].reshape(3, 4, 4), z.reshape(3, 16)[:, perm].reshape(3, 4, 4)
    assert L.l1_loss(s, z).item() >= 0
    assert L.l1_loss(sp, zp).item() == pytest.approx(L.l1_loss(s, z).item(), rel=1e-12)
    m = torch.from_numpy(rng.uniform(0, 1, (1, 4, 4)))
    mp = m.reshape(1, 16)[:, perm].reshape(1, 4, 4)
    zero = torch.zeros(2, 4, 4, dtype=torch.float64)
    a = L.masked_warp_l1(s, z, zero, m).item()
    assert a >= 0
    assert L.masked_warp_l1(sp, zp, zero, mp).item() == pytest.approx(a, rel=1e-12)


# gradient checks: every loss w.r.t. generator outputs, 4x4 frames, T=4, double

def _temporal_setup(rng, T=4):
    pairs = L.adjacent_pairs(T) + L.dense_pairs(T)
    flows = {p: torch.from_numpy(rng.uniform(-1.5, 1.5, (2, 4, 4))) for p in pairs}
    masks = {p: torch.from_numpy(rng.uniform(0, 1, (1, 4, 4))) for p in pairs}
    return flows, masks


@pytest.mark.parametrize("name", ["short_term", "dense_long_term", "long_term"])
def test_temporal_loss_gradients(name, rng):
    fn = {"short_term": L.short_term_loss, "dense_long_term": L.dense_long_term_loss,
          "long_term": L.long_term_first_anchor_loss}[name]
    flows, masks = _temporal_setup(rng)
    if name == "short_term":
        flows = [flows[p] for p in L.adjacent_pairs(4)]
        masks = [masks[p] for p in L.adjacent_pairs(4)]
    err, norm = fd_check(lambda x: fn(list(x), flows, masks), frames(rng, 4, 3, 4, 4))
    assert err < 1e-3 and norm > 0


def test_reconstruction_and_adversarial_gradients(rng):
    z = frames(rng, 4, 3, 4, 4)
    net = PerceptualNet.random(seed=0).double()
    for fn in (lambda x: L.l1_loss(x, z), lambda x: L.perceptual_loss(x, z, net),
               lambda x: L.wgan_g_loss(x.sum(1, keepdim=True) ** 2)):
        err, norm = fd_check(fn, frames(rng, 4, 3, 4, 4))
        assert err < 1e-3 and norm > 0
