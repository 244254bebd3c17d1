"""Inverse-design engine: loss against a direct reimplementation, adjoint
gradients against central finite differences, and the optimizer contract
(projection, determinism, descent, bookkeeping)."""

import math

import numpy as np
import pytest

from ove.design import (
    DesignRun,
    LossSpec,
    OptimizerConfig,
    gradient,
    loss,
    loss_and_gradient,
    optimize,
    seeded_initial_volume,
    total_variation,
)
from ove.fields import ComplexField, Grid2D, IndexVolume, LayeredElement, MappingTask
from ove.propagation import PropagationSpec, bpm, free_space, propagate
from ove.sources import gaussian
from testutil import (
    NO_ABSORBER,
    band_limited_field,
    band_limited_phases,
    smooth_random_volume,
)

LAM = 1.55
SMALL = Grid2D(16, 16, 0.5, 0.5)


def small_task(seeds=(1, 2, 3, 4), grid=SMALL) -> MappingTask:
    ins = [band_limited_field(grid, LAM, s, k_fraction=0.5) for s in seeds[:2]]
    tgts = [band_limited_field(grid, LAM, s, k_fraction=0.5) for s in seeds[2:]]
    return MappingTask.from_fields(ins, tgts)


def small_volume(seed=5, grid=SMALL, nz=8) -> IndexVolume:
    return smooth_random_volume(grid, nz=nz, dz=1.0, seed=seed)


def small_element(seed=21, grid=SMALL) -> LayeredElement:
    phases = band_limited_phases(grid, 3, seed=seed, amplitude=0.8, k_cut=2.0)
    return LayeredElement(grid=grid, layers=tuple(phases), gaps=(4.0, 4.0, 6.0))


def fd_volume(vol, task, spec, v, h=1e-6):
    dn_p = vol.dn.copy()
    dn_p[v] += h
    dn_m = vol.dn.copy()
    dn_m[v] -= h
    mk = lambda dn: IndexVolume(grid=vol.grid, nz=vol.nz, dz=vol.dz, n0=vol.n0,
                                dn=dn, dn_min=-1.0, dn_max=1.0)
    return (loss(mk(dn_p), task, spec, NO_ABSORBER)
            - loss(mk(dn_m), task, spec, NO_ABSORBER)) / (2.0 * h)


def fd_layered(el, task, spec, v, h=1e-6):
    li, i, j = v
    plus = [p.copy() for p in el.layers]
    plus[li][i, j] += h
    minus = [p.copy() for p in el.layers]
    minus[li][i, j] -= h
    mk = lambda ls: LayeredElement(grid=el.grid, layers=tuple(ls), gaps=el.gaps,
                                   n_gap=el.n_gap)
    return (loss(mk(plus), task, spec, NO_ABSORBER)
            - loss(mk(minus), task, spec, NO_ABSORBER)) / (2.0 * h)


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------

class TestLoss:
    def test_perfect_task_is_zero(self):
        g = Grid2D(32, 32, 0.5, 0.5)
        vol = IndexVolume(grid=g, nz=8, dz=1.0, n0=1.5, dn=np.zeros((32, 32, 8)))
        src = gaussian(g, LAM, waist_um=3.0)
        tgt = free_space(src, 8.0, 1.5, NO_ABSORBER)
        task = MappingTask.from_fields([src], [tgt])
        assert loss(vol, task, LossSpec(), NO_ABSORBER) <= 1e-9

    def test_orthogonal_targets_sum_of_weights(self):
        # Even input stays even through free space; an odd target then
        # couples nothing and each pair contributes exactly its weight.
        g = Grid2D(32, 32, 0.5, 0.5)
        vol = IndexVolume(grid=g, nz=4, dz=1.0, n0=1.5, dn=np.zeros((32, 32, 4)))
        xs, _ = g.meshgrid()
        even = gaussian(g, LAM, waist_um=2.0)
        odd = ComplexField(g, LAM, xs * np.exp(-(xs**2) / 4.0) + 0j)
        task = MappingTask.from_fields([even, even], [odd, odd],
                                       weights=[0.7, 2.3])
        got = loss(vol, task, LossSpec(), NO_ABSORBER)
        assert got == pytest.approx(3.0, abs=1e-9)

    @pytest.mark.parametrize("kind", ["mode-coupling", "intensity-mse"])
    def test_matches_direct_reimplementation(self, kind):
        task = small_task()
        vol = small_volume()
        tv_weight = 0.3
        got = loss(vol, task, LossSpec(kind=kind, tv_weight=tv_weight), NO_ABSORBER)

        dA = SMALL.dx * SMALL.dy
        want = 0.0
        for inp, tgt, w in task.pairs:
            out = bpm(vol, inp, NO_ABSORBER)
            if kind == "mode-coupling":
                ov = np.sum(np.conj(out.values) * tgt.values) * dA
                want += w * (1.0 - abs(ov) ** 2)
            else:
                diff = np.abs(out.values) ** 2 - np.abs(tgt.values) ** 2
                want += w * float(np.sum(diff**2)) * dA
        eps = 1e-12
        sq = np.full(vol.dn.shape, eps**2)
        for ax in range(3):
            d = np.diff(vol.dn, axis=ax)
            pad = [(0, 1) if a == ax else (0, 0) for a in range(3)]
            sq += np.pad(d, pad) ** 2
        want += tv_weight * float(np.sum(np.sqrt(sq) - eps))

        assert got == pytest.approx(want, rel=1e-10)

    def test_grid_mismatch_rejected(self):
        vol = small_volume()
        other = small_task(grid=Grid2D(16, 16, 0.25, 0.25))
        with pytest.raises(ValueError):
            loss(vol, other, LossSpec(), NO_ABSORBER)


# ---------------------------------------------------------------------------
# gradient vs finite differences
# ---------------------------------------------------------------------------

class TestGradient:
    @pytest.mark.parametrize("kind", ["mode-coupling", "intensity-mse"])
    def test_volume_matches_fd(self, kind):
        task = small_task()
        vol = small_volume()
        spec = LossSpec(kind=kind)
        adj = gradient(vol, task, spec, NO_ABSORBER)
        rng = np.random.default_rng(0)
        for _ in range(20):
            v = tuple(int(rng.integers(0, s)) for s in adj.shape)
            fd = fd_volume(vol, task, spec, v)
            assert abs(fd - adj[v]) <= 1e-4 * max(abs(fd), abs(adj[v]))

    @pytest.mark.parametrize("kind", ["mode-coupling", "intensity-mse"])
    def test_layered_matches_fd(self, kind):
        task = small_task()
        el = small_element()
        spec = LossSpec(kind=kind)
        adj = gradient(el, task, spec, NO_ABSORBER)
        assert adj.shape == (3, SMALL.nx, SMALL.ny)
        rng = np.random.default_rng(1)
        for _ in range(20):
            v = tuple(int(rng.integers(0, s)) for s in adj.shape)
            fd = fd_layered(el, task, spec, v)
            assert abs(fd - adj[v]) <= 1e-4 * max(abs(fd), abs(adj[v]))

    def test_directional_derivative(self):
        # Projecting the gradient on a random direction agrees with the
        # FD of the whole volume moved along it; immune to single-voxel
        # cancellation noise.
        task = small_task()
        vol = small_volume()
        spec = LossSpec()
        adj = gradient(vol, task, spec, NO_ABSORBER)
        rng = np.random.default_rng(2)
        direction = rng.standard_normal(vol.dn.shape)
        direction /= np.linalg.norm(direction)
        h = 1e-6
        mk = lambda dn: IndexVolume(grid=vol.grid, nz=vol.nz, dz=vol.dz, n0=vol.n0,
                                    dn=dn, dn_min=-1.0, dn_max=1.0)
        fd = (loss(mk(vol.dn + h * direction), task, spec, NO_ABSORBER)
              - loss(mk(vol.dn - h * direction), task, spec, NO_ABSORBER)) / (2 * h)
        proj = float(np.sum(adj * direction))
        assert abs(fd - proj) <= 1e-6 * max(abs(fd), abs(proj))

    def test_stationary_at_perfect_task(self):
        g = Grid2D(32, 32, 0.5, 0.5)
        vol = IndexVolume(grid=g, nz=8, dz=1.0, n0=1.5, dn=np.zeros((32, 32, 8)))
        src = gaussian(g, LAM, waist_um=3.0)
        tgt = free_space(src, 8.0, 1.5, NO_ABSORBER)
        task = MappingTask.from_fields([src], [tgt])
        adj = gradient(vol, task, LossSpec(), NO_ABSORBER)
        assert np.max(np.abs(adj)) <= 1e-8

    def test_tv_term_matches_fd(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((6, 5, 4)) * 0.01
        _, grad = total_variation(x)
        h = 1e-5
        for v in [(0, 0, 0), (3, 2, 1), (5, 4, 3), (2, 0, 3)]:
            xp = x.copy()
            xp[v] += h
            xm = x.copy()
            xm[v] -= h
            fd = (total_variation(xp)[0] - total_variation(xm)[0]) / (2 * h)
            assert abs(fd - grad[v]) <= 1e-5 * max(1.0, abs(fd))

    def test_loss_and_gradient_consistent(self):
        task = small_task()
        vol = small_volume()
        val, grad = loss_and_gradient(vol, task, LossSpec(), NO_ABSORBER)
        assert val == pytest.approx(loss(vol, task, LossSpec(), NO_ABSORBER), rel=1e-12)
        np.testing.assert_allclose(grad, gradient(vol, task, LossSpec(), NO_ABSORBER),
                                   rtol=0, atol=1e-15)


# ---------------------------------------------------------------------------
# optimize
# ---------------------------------------------------------------------------

class TestOptimize:
    def test_zero_step_returns_initial(self):
        task = small_task()
        vol = small_volume()
        cfg = OptimizerConfig(step_size=0.0, max_iters=1)
        run = optimize(task, vol, LossSpec(), cfg, NO_ABSORBER)
        np.testing.assert_array_equal(run.result.dn, vol.dn)
        assert run.loss_history == (run.initial_loss,)

    def test_zero_iterations_evaluate_only(self):
        task = small_task()
        vol = small_volume()
        run = optimize(task, vol, LossSpec(), OptimizerConfig(max_iters=0), NO_ABSORBER)
        np.testing.assert_array_equal(run.result.dn, vol.dn)
        assert run.loss_history == ()
        assert run.initial_loss == pytest.approx(
            loss(vol, task, LossSpec(), NO_ABSORBER), rel=1e-12)

    def test_starts_at_optimum_stays_there(self):
        g = Grid2D(32, 32, 0.5, 0.5)
        vol = IndexVolume(grid=g, nz=8, dz=1.0, n0=1.5, dn=np.zeros((32, 32, 8)),
                          dn_min=-0.05, dn_max=0.05)
        src = gaussian(g, LAM, waist_um=3.0)
        tgt = free_space(src, 8.0, 1.5, NO_ABSORBER)
        task = MappingTask.from_fields([src], [tgt])
        run = optimize(task, vol, LossSpec(), OptimizerConfig(max_iters=10),
                       NO_ABSORBER)
        assert all(h <= 1e-6 for h in run.loss_history)

    def test_toy_sorter_against_fixture(self, toy_result, baselines):
        run, report = toy_result
        ref = baselines["toy_sorter"]
        assert run.loss_history[-1] <= 0.5 * run.initial_loss
        assert report.diagonal_mean > report.offdiag_mean
        assert run.initial_loss == pytest.approx(ref["initial_loss"], rel=1e-10)
        assert run.loss_history[-1] == pytest.approx(ref["final_loss"], rel=1e-10)
        np.testing.assert_allclose(report.matrix, ref["coupling_matrix"],
                                   rtol=1e-9, atol=1e-12)

    def test_projection_safety_clip(self):
        task = small_task()
        vol = small_volume()
        cfg = OptimizerConfig(step_size=0.05, max_iters=5)  # huge steps
        run = optimize(task, vol, LossSpec(), cfg, NO_ABSORBER)
        assert np.all(run.result.dn >= run.result.dn_min)
        assert np.all(run.result.dn <= run.result.dn_max)

    def test_projection_safety_sigmoid(self):
        task = small_task()
        vol = small_volume()
        cfg = OptimizerConfig(step_size=0.05, max_iters=5,
                              projection="sigmoid-reparameterization")
        run = optimize(task, vol, LossSpec(), cfg, NO_ABSORBER)
        assert np.all(run.result.dn >= run.result.dn_min)
        assert np.all(run.result.dn <= run.result.dn_max)
        assert run.loss_history[-1] <= run.initial_loss

    def test_deterministic(self):
        task = small_task()
        vol = small_volume()
        cfg = OptimizerConfig(step_size=1e-3, max_iters=6, seed=9)
        a = optimize(task, vol, LossSpec(), cfg, NO_ABSORBER)
        b = optimize(task, vol, LossSpec(), cfg, NO_ABSORBER)
        assert a.loss_history == b.loss_history
        np.testing.assert_array_equal(a.result.dn, b.result.dn)

    def test_descent_sanity(self):
        task = small_task()
        vol = small_volume()
        run = optimize(task, vol, LossSpec(),
                       OptimizerConfig(step_size=2e-3, max_iters=15), NO_ABSORBER)
        assert run.loss_history[-1] <= run.loss_history[0]
        diffs = np.diff(run.loss_history)
        assert np.all(diffs <= 1e-15)  # safeguarded: non-increasing

    def test_run_bookkeeping(self):
        task = small_task()
        vol = small_volume()
        cfg = OptimizerConfig(step_size=1e-3, max_iters=7)
        run = optimize(task, vol, LossSpec(), cfg, NO_ABSORBER)
        assert len(run.loss_history) <= cfg.max_iters
        final = loss(run.result, task, LossSpec(), NO_ABSORBER)
        assert abs(run.loss_history[-1] - final) <= 1e-9
        assert run.coupling_before.shape == (2, 2)
        assert run.coupling_after.shape == (2, 2)

    def test_permutation_equivariance(self):
        ins = [band_limited_field(SMALL, LAM, s, k_fraction=0.5) for s in (1, 2, 3)]
        tgts = [band_limited_field(SMALL, LAM, s, k_fraction=0.5) for s in (4, 5, 6)]
        weights = [0.5, 1.5, 1.0]
        fwd = MappingTask.from_fields(ins, tgts, weights=weights)
        perm = [2, 0, 1]
        rev = MappingTask.from_fields([ins[p] for p in perm],
                                      [tgts[p] for p in perm],
                                      weights=[weights[p] for p in perm])
        vol = small_volume()
        la = loss(vol, fwd, LossSpec(), NO_ABSORBER)
        lb = loss(vol, rev, LossSpec(), NO_ABSORBER)
        assert abs(la - lb) <= 1e-12
        ga = gradient(vol, fwd, LossSpec(), NO_ABSORBER)
        gb = gradient(vol, rev, LossSpec(), NO_ABSORBER)
        np.testing.assert_allclose(ga, gb, rtol=0, atol=1e-12)


# ---------------------------------------------------------------------------
# configuration objects
# ---------------------------------------------------------------------------

class TestSpecs:
    @pytest.mark.parametrize("kwargs", [
        dict(step_size=-1e-3),
        dict(step_size=math.nan),
        dict(beta1=1.0),
        dict(beta2=-0.1),
        dict(max_iters=-1),
        dict(eps=0.0),
        dict(projection="tanh"),
    ])
    def test_optimizer_config_rejects(self, kwargs):
        with pytest.raises(ValueError):
            OptimizerConfig(**kwargs)

    def test_loss_spec_rejects(self):
        with pytest.raises(ValueError):
            LossSpec(kind="l2")
        with pytest.raises(ValueError):
            LossSpec(tv_weight=-0.5)

    def test_seeded_initial_volume(self):
        a = seeded_initial_volume(SMALL, nz=4, dz=1.0, n0=1.5, seed=3)
        b = seeded_initial_volume(SMALL, nz=4, dz=1.0, n0=1.5, seed=3)
        c = seeded_initial_volume(SMALL, nz=4, dz=1.0, n0=1.5, seed=4)
        np.testing.assert_array_equal(a.dn, b.dn)
        assert not np.array_equal(a.dn, c.dn)
        assert np.all(a.dn >= a.dn_min) and np.all(a.dn <= a.dn_max)
        mid = 0.5 * (a.dn_min + a.dn_max)
        assert np.max(np.abs(a.dn - mid)) <= 1e-4 * a.dn_max
