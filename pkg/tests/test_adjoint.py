import numpy as np
import pytest

import jtfs.scattering as scattering
from jtfs import backend as B
from jtfs.adjoint import (
    _frequency_adjoint,
    check_compatible,
    grad_U1,
    grad_U2,
    gradcheck,
    loss_and_direction,
    scattering_loss,
)
from jtfs.errors import IncompatibleError, StateError
from jtfs.filterbank import build_plan
from jtfs.scattering import (
    Block,
    Scalogram,
    average,
    average_adjoint,
    compute_scalogram,
    frequency_scattering,
    jtfs_forward,
    unpad_block,
    unpad_block_adjoint,
)

from oracles import random_adjoint_gap


@pytest.fixture(scope="module")
def plan():
    return build_plan(5, 2, 1, 3, 1, 3, 1, 1024)


@pytest.fixture(scope="module")
def pair(plan):
    rng = np.random.default_rng(11)
    return rng.standard_normal(plan.N_input), rng.standard_normal(plan.N_input)


def test_loss_definition(plan, pair):
    x, y = pair
    Sx, Sy = jtfs_forward(x, plan), jtfs_forward(y, plan)
    rep = scattering_loss(Sx, Sy)
    expected = 0.5 * np.sum((Sx.ravel((1, 2)) - Sy.ravel((1, 2))) ** 2)
    assert rep.total == pytest.approx(expected, rel=1e-12)
    assert rep.total == pytest.approx(sum(rep.per_order.values()))
    assert 0 not in rep.per_order
    assert scattering_loss(Sx, Sx).total == 0.0


def test_loss_incompatible(plan, pair):
    x, _ = pair
    Sx = jtfs_forward(x, plan)
    other = jtfs_forward(np.zeros(512), build_plan(5, 2, 1, 3, 1, 3, 1, 512))
    with pytest.raises(IncompatibleError):
        check_compatible(Sx, other)
    other_q = jtfs_forward(x, build_plan(5, 3, 1, 3, 1, 3, 1, 1024))
    with pytest.raises(IncompatibleError):
        scattering_loss(Sx, other_q)


def test_zero_residual_gives_zero(plan, pair):
    x, _ = pair
    Sx = jtfs_forward(x, plan)
    rep, d = loss_and_direction(x, Sx, plan)
    assert rep.total == 0.0
    assert np.all(d == 0)
    Sy, trace = jtfs_forward(x, plan, return_trace=True)
    gu2 = grad_U2(Sx, Sy, plan)
    assert all(np.all(g == 0) for g in gu2.values())
    assert all(np.all(g == 0) for g in grad_U1(trace, gu2, Sx, Sy, plan))


def test_missing_trace(plan, pair):
    x, y = pair
    Sx, Sy = jtfs_forward(x, plan), jtfs_forward(y, plan)
    with pytest.raises(StateError):
        grad_U1(None, grad_U2(Sx, Sy, plan), Sx, Sy, plan)


# adjoint identities of the scattering-level stages

@pytest.mark.parametrize("strides", [(0, 0), (2, 1), (3, 0), (3, 1)])
def test_average_adjoint(plan, strides):
    s, s_fr = strides
    shape_in = (plan.N_fr_padded >> s_fr, plan.N_padded >> s)
    shape_out = (plan.N_fr_padded >> plan.log2_F, plan.N_padded >> plan.log2_T)
    gap = random_adjoint_gap(lambda u: average(u, plan, s, s_fr),
                             lambda v: average_adjoint(v, plan, s, s_fr),
                             shape_in, shape_out, np.random.default_rng(0))
    assert gap <= 1e-10


def test_unpad_block_adjoint(plan):
    rows = plan.N_fr_padded >> plan.log2_F
    shape_in = (rows, plan.N_padded >> plan.log2_T)
    n1_max = len(plan.psi1)
    shape_out = unpad_block(np.zeros(shape_in), plan, n1_max).shape
    gap = random_adjoint_gap(lambda u: unpad_block(u, plan, n1_max),
                             lambda v: unpad_block_adjoint(v, plan),
                             shape_in, shape_out, np.random.default_rng(1))
    assert gap <= 1e-10


@pytest.mark.parametrize("spinned", [False, True])
def test_frequency_scattering_adjoint(plan, spinned):
    rng = np.random.default_rng(2)
    n1_max, T = 7, 32
    probe = Block(np.zeros((n1_max, T)), n1_max, 3)
    blocks = list(frequency_scattering(probe, plan, spinned))
    for fb in blocks:
        def A(u, n_fr=fb.n_fr):
            out = frequency_scattering(Block(u, n1_max, 3), plan, spinned)
            return next(b.coef for b in out if b.n_fr == n_fr)

        def AT(v, fb=fb):
            g = _frequency_adjoint(v, fb, plan)
            return g.real if not spinned else g

        gap = random_adjoint_gap(A, AT, (n1_max, T), fb.coef.shape, rng,
                                 complex_out=True)
        assert gap <= 1e-10


def test_impulse_residual_is_localized(plan):
    key_shape = (plan.N_fr_padded >> plan.log2_F, plan.N_padded >> plan.log2_T)
    G = np.zeros(key_shape)
    t0 = key_shape[1] // 2
    G[2, t0] = 1.0
    s = plan.log2_T
    back = average_adjoint(G, plan, s, 0)
    profile = np.abs(back).sum(axis=0)
    frames = np.arange(profile.size)
    mean = np.sum(frames * profile) / profile.sum()
    width = np.sqrt(np.sum((frames - mean) ** 2 * profile) / profile.sum())
    # phi_T standard deviation, in frames at the stride of the block
    expected = 1 / (2 * np.pi * plan.phi_T.sigma) / 2 ** s
    assert expected / 2 <= width <= expected * 2


# finite-difference oracles

def _scalogram_with(plan, sc, rows):
    groups = []
    for k1, sl, Z, _, _ in sc.groups:
        U = np.stack(rows[sl])
        groups.append((k1, sl, Z, U, B.rfft(U)))
    return Scalogram(sc.j, sc.log2_stride, groups)


def test_grad_U1_finite_difference(plan, pair, monkeypatch):
    x, y = pair
    Sx = jtfs_forward(x, plan)
    Sy, trace = jtfs_forward(y, plan, return_trace=True)
    g = grad_U1(trace, grad_U2(Sx, Sy, plan), Sx, Sy, plan)
    sc = trace.scalogram
    base = [u.copy() for u in sc.U]
    rng = np.random.default_rng(3)

    def loss_at(rows):
        fake = _scalogram_with(plan, sc, rows)
        monkeypatch.setattr(scattering, "compute_scalogram", lambda *a, **k: fake)
        return scattering_loss(Sx, jtfs_forward(y, plan)).total

    errs = []
    for _ in range(10):
        v = [rng.standard_normal(u.shape) for u in base]
        scale = np.sqrt(sum(np.sum(u ** 2) for u in base))
        norm = np.sqrt(sum(np.sum(w ** 2) for w in v))
        h = 1e-5 * scale / norm
        plus = loss_at([u + h * w for u, w in zip(base, v)])
        minus = loss_at([u - h * w for u, w in zip(base, v)])
        fd = (plus - minus) / (2 * h)
        analytic = -sum(np.sum(a * w) for a, w in zip(g, v))
        errs.append(abs(fd - analytic) / max(abs(fd), abs(analytic)))
    assert max(errs) <= 1e-4
    assert all(np.isrealobj(r) for r in g)


def test_full_chain_gradcheck(plan):
    rep = gradcheck(plan, seed=5, n_directions=20)
    assert rep.pass_fraction == 1.0
    assert rep.max_error <= 1e-4


def test_descent_property(plan, pair):
    x, y = pair
    Sx = jtfs_forward(x, plan)
    rep, d = loss_and_direction(y, Sx, plan)
    for c in (1e-3, 1e-4, 1e-5):
        mu = c * np.linalg.norm(y) / np.linalg.norm(d)
        assert scattering_loss(Sx, jtfs_forward(y + mu * d, plan)).total < rep.total
