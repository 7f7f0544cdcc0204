import numpy as np
import pytest

from speclearn import autodiff as ad
from speclearn.network import (
    LayerSpec,
    default_arch,
    forward,
    init_params,
    loss_and_grad,
    segment_loss,
)
from speclearn.residuals import (
    residual_advection,
    residual_burgers,
    residual_cde,
    residual_dre,
    residual_kse,
    residual_nse,
)
from speclearn.sampling import (
    GrfSpec,
    sample_cde_initial,
    sample_forcing_dre,
    sample_grf_periodic,
)
from speclearn.solvers import PdeProblem, cached_basis
from speclearn.spectral import idft_1d, idft_2d
from speclearn.training import build_task


def tiny_problem(family, N=8, R=2):
    kw = dict(N=N, dt=0.01, Q=1, R=R, T=0.01 * R)
    return PdeProblem.defaults(family, **kw)


def tiny_samples(family, problem, count=2, seed=0):
    if family == "diffusion_reaction":
        return [sample_forcing_dre(seed, problem.N, index=i) for i in range(count)]
    if family == "burgers":
        spec = GrfSpec(sigma=25.0, tau=5.0, gamma=2.0, dims=1, N=problem.N, seed=seed)
        return [sample_grf_periodic(spec, index=i) for i in range(count)]
    if family == "advection":
        from speclearn.sampling import sample_advection_coefficient

        spec = GrfSpec(sigma=30.0, tau=8.0, gamma=2.0, dims=1, N=problem.N, seed=seed)
        return [sample_advection_coefficient(spec, index=i) for i in range(count)]
    if family == "convection_diffusion_bl":
        basis = cached_basis(problem.N, corrector_nu=problem.nu)
        return [sample_cde_initial(seed, basis, index=i) for i in range(count)]
    if family == "kse_2d":
        spec = GrfSpec(sigma=4.0, tau=2.0, gamma=2.5, dims=2, N=problem.N, seed=seed)
        return [sample_grf_periodic(spec, index=i) for i in range(count)]
    if family == "nse_2d":
        spec = GrfSpec(sigma=9.0, tau=3.0, gamma=2.5, dims=2, N=problem.N, seed=seed)
        return [sample_grf_periodic(spec, index=i) for i in range(count)]
    raise ValueError(family)


def tiny_arch(family):
    if family in ("kse_2d", "nse_2d"):
        return (LayerSpec("dense", 16),)
    pad = "conv1d_circular" if family in ("burgers", "advection") else "conv1d_zero"
    return (LayerSpec(pad, 4, 3), LayerSpec(pad, 4, 3))


def tiny_task(family, seed=0):
    problem = tiny_problem(family)
    samples = tiny_samples(family, problem, seed=seed)
    return build_task(problem, samples, arch=tiny_arch(family))


FAMILIES = (
    "diffusion_reaction",
    "burgers",
    "advection",
    "convection_diffusion_bl",
    "kse_2d",
    "nse_2d",
)


class TestForward:
    def test_zero_params_zero_output(self):
        task = tiny_task("burgers")
        params = init_params(task.arch, task.in_shape, task.out_shape, task.out_map, 0)
        params.flat[:] = 0.0
        out = forward(params, task.net_inputs)
        assert np.max(np.abs(out)) == 0.0

    def test_identity_dense_head(self):
        # no hidden layers; the head with unit weights passes the input through
        params = init_params((), (6,), (1, 6), "identity", 0)
        w = params.tensors()[0]
        w[:] = np.eye(6)
        params.tensors()[1][:] = 0.0
        x = np.arange(6.0)[None]
        out = forward(params, x)
        assert np.array_equal(out[0, 0], x[0])

    def test_batch_equals_per_sample(self):
        task = tiny_task("diffusion_reaction")
        params = init_params(task.arch, task.in_shape, task.out_shape, task.out_map, 1)
        batch = forward(params, task.net_inputs)
        singles = np.concatenate(
            [forward(params, task.net_inputs[i:i + 1]) for i in range(task.n_samples)]
        )
        assert np.array_equal(batch, singles)

    def test_layout_roundtrip(self):
        task = tiny_task("burgers")
        params = init_params(task.arch, task.in_shape, task.out_shape, task.out_map, 2)
        total = sum(int(np.prod(s)) for _, s in params.layout)
        assert total == params.flat.size
        rebuilt = np.concatenate([t.ravel() for t in params.tensors()])
        assert np.array_equal(rebuilt, params.flat)

    def test_fourier_outputs_reconstruct_real(self):
        task = tiny_task("burgers")
        params = init_params(task.arch, task.in_shape, task.out_shape, task.out_map, 3)
        out = forward(params, task.net_inputs)
        fields = idft_1d(out)
        assert np.max(np.abs(fields.imag)) <= 1e-14 * max(1.0, np.max(np.abs(fields)))

    def test_fourier2d_outputs_reconstruct_real(self):
        task = tiny_task("nse_2d")
        params = init_params(task.arch, task.in_shape, task.out_shape, task.out_map, 4)
        out = forward(params, task.net_inputs)
        fields = idft_2d(out)
        assert np.max(np.abs(fields.imag)) <= 1e-14 * max(1.0, np.max(np.abs(fields)))

    def test_bad_layer_spec_rejected(self):
        with pytest.raises(ValueError):
            LayerSpec("conv1d_circular", 4, 4)
        with pytest.raises(ValueError):
            LayerSpec("dense", 0)
        with pytest.raises(ValueError):
            LayerSpec("mystery", 4)

    def test_default_arch_widths(self):
        arch, in_shape, out_shape, out_map = default_arch("diffusion_reaction", 50, 10)
        assert len(arch) == 5 and arch[0].width == 50
        assert in_shape == (52,) and out_shape == (10, 50) and out_map == "identity"
        arch, _, out_shape, out_map = default_arch("kse_2d", 30, 5)
        assert arch[0].kind == "dense" and arch[0].width == 900
        assert out_shape == (5, 900) and out_map == "hermitian2d"


class TestLossAndGrad:
    def test_zero_params_zero_forcing_dre(self):
        problem = tiny_problem("diffusion_reaction")
        basis = cached_basis(problem.N)
        from speclearn.sampling import InputSample

        samples = [
            InputSample(kind="forcing", grid_values=np.zeros(basis.M))
            for _ in range(2)
        ]
        task = build_task(problem, samples, arch=tiny_arch("diffusion_reaction"))
        params = init_params(task.arch, task.in_shape, task.out_shape, task.out_map, 0)
        params.flat[:] = 0.0
        value, grad = loss_and_grad(params, task.net_inputs, task.anchors0, task.defect)
        assert value == 0.0
        assert np.max(np.abs(grad)) == 0.0

    def test_matches_residual_module(self):
        for family in FAMILIES:
            task = tiny_task(family)
            params = init_params(
                task.arch, task.in_shape, task.out_shape, task.out_map, 5
            )
            value, _ = loss_and_grad(
                params, task.net_inputs, task.anchors0, task.defect
            )
            out = forward(params, task.net_inputs)
            total = 0.0
            for i in range(task.n_samples):
                steps, anchor = out[i], task.anchors0[i]
                if family == "diffusion_reaction":
                    rep = residual_dre(
                        steps, task.net_inputs[i], anchor, task.scheme
                    )
                elif family == "burgers":
                    rep = residual_burgers(steps, anchor, task.scheme)
                elif family == "advection":
                    rep = residual_advection(
                        steps, task.net_inputs[i], anchor, task.scheme
                    )
                elif family == "convection_diffusion_bl":
                    rep = residual_cde(steps, anchor, task.scheme)
                elif family == "kse_2d":
                    rep = residual_kse(steps, anchor, task.scheme)
                else:
                    rep = residual_nse(steps, anchor, task.scheme)
                total += rep.total
            assert value == pytest.approx(total, rel=1e-12)

    def test_scaled_loss_scales_gradient(self):
        # doubling the defect quadruples the loss; power-of-two scaling is
        # exact in floating point, so the gradients match bit for bit
        task = tiny_task("burgers")
        params = init_params(task.arch, task.in_shape, task.out_shape, task.out_map, 6)
        v1, g1 = loss_and_grad(params, task.net_inputs, task.anchors0, task.defect)
        scaled = lambda prev, nxt: ad.mul(task.defect(prev, nxt), 2.0)
        v2, g2 = loss_and_grad(params, task.net_inputs, task.anchors0, scaled)
        assert v2 == 4.0 * v1
        assert np.array_equal(4.0 * g1, g2)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_gradient_entries_match_finite_differences(self, family):
        # Central differences carry an irreducible rounding floor of about
        # eps * |loss| / step; entries are held to 1e-5 relative above it.
        task = tiny_task(family)
        params = init_params(task.arch, task.in_shape, task.out_shape, task.out_map, 7)
        theta = params.flat
        value, grad = loss_and_grad(params, task.net_inputs, task.anchors0, task.defect)
        rng = np.random.default_rng(42)
        idx = rng.choice(theta.size, size=min(50, theta.size), replace=False)

        from dataclasses import replace

        def loss_at(t):
            v, _ = loss_and_grad(
                replace(params, flat=t), task.net_inputs, task.anchors0, task.defect
            )
            return v

        for i in idx:
            step = 1e-6 * max(1.0, abs(theta[i]))
            tp = theta.copy()
            tp[i] += step
            tm = theta.copy()
            tm[i] -= step
            fd = (loss_at(tp) - loss_at(tm)) / (2 * step)
            noise = 8.0 * np.finfo(float).eps * value / step
            assert abs(grad[i] - fd) <= 1e-5 * max(abs(fd), abs(grad[i])) + noise, (
                f"{family} entry {i}: ad {grad[i]:.12g} vs fd {fd:.12g}"
            )

    @pytest.mark.parametrize("family", FAMILIES)
    def test_gradient_directions_match_finite_differences(self, family):
        # random unit directions probe the gradient at its own scale, where
        # central differences resolve 1e-5 relative cleanly
        task = tiny_task(family)
        params = init_params(task.arch, task.in_shape, task.out_shape, task.out_map, 9)
        theta = params.flat
        _, grad = loss_and_grad(params, task.net_inputs, task.anchors0, task.defect)
        rng = np.random.default_rng(7)

        from dataclasses import replace

        def loss_at(t):
            v, _ = loss_and_grad(
                replace(params, flat=t), task.net_inputs, task.anchors0, task.defect
            )
            return v

        for _ in range(10):
            d = rng.standard_normal(theta.size)
            d /= np.linalg.norm(d)
            step = 1e-5
            fd = (loss_at(theta + step * d) - loss_at(theta - step * d)) / (2 * step)
            assert abs(grad @ d - fd) <= 1e-5 * max(abs(fd), 1e-30), (
                f"{family}: ad {grad @ d:.12g} vs fd {fd:.12g}"
            )

    def test_nonfinite_loss_raises(self):
        task = tiny_task("burgers")
        params = init_params(task.arch, task.in_shape, task.out_shape, task.out_map, 8)
        params.flat[:] = 1e300
        with np.errstate(all="ignore"), pytest.raises(FloatingPointError):
            loss_and_grad(params, task.net_inputs, task.anchors0, task.defect)
