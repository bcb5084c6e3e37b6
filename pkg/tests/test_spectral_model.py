import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from approxctrl import (
    ControlOperatorSpec,
    GrowthEnvelope,
    MemoryKernel,
    NonlinearitySpec,
    QWienerSpec,
    SpectralModel,
    heat_memory_model,
    scalar_model,
)
from approxctrl.errors import ShapeError
from approxctrl.spectral_model import apply_A, apply_C, apply_C_adjoint, eval_nonlinearity

finite = st.floats(-1e3, 1e3, allow_nan=False)


def model_with(eig):
    return SpectralModel(eigenvalues=eig)


class TestApplyA:
    def test_two_modes(self):
        np.testing.assert_array_equal(apply_A(model_with([-1, -4]), [1, 1]), [-1, -4])

    def test_zero_vector(self):
        assert np.all(apply_A(heat_memory_model(5), np.zeros(5)) == 0)

    def test_diagonal_action(self):
        np.testing.assert_array_equal(apply_A(model_with([-1, -4, -9]), [2, 0, -1]), [-2, 0, 9])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            apply_A(model_with([-1, -4]), [1, 2, 3])

    @settings(max_examples=200, deadline=None)
    @given(arrays(float, 6, elements=finite), arrays(float, 6, elements=finite))
    def test_symmetric(self, v, w):
        model = heat_memory_model(6)
        lhs = apply_A(model, v) @ w
        rhs = v @ apply_A(model, w)
        scale = 36 * max(1.0, np.linalg.norm(v) * np.linalg.norm(w))
        assert abs(lhs - rhs) <= 1e-12 * scale


class TestControlOperator:
    def test_example_action(self):
        out = apply_C(ControlOperatorSpec("coupled"), [1.0, 0.0], 3)
        np.testing.assert_array_equal(out, [2.0, 1.0, 0.0])

    def test_zero_control(self):
        assert np.all(apply_C(ControlOperatorSpec("coupled"), np.zeros(4), 5) == 0)

    def test_identity_is_full_identity(self):
        spec = ControlOperatorSpec("identity")
        np.testing.assert_array_equal(spec.matrix(4), np.eye(4))
        assert spec.norm(4) == pytest.approx(1.0)

    def test_spot_adjoint(self):
        spec = ControlOperatorSpec("coupled")
        rng = np.random.default_rng(1)
        for x, y, z in rng.standard_normal((50, 3)):
            v = np.array([x, y, z])
            assert apply_C(spec, [1.0, 0.0], 3) @ v == pytest.approx(2 * x + y, abs=1e-14)
            assert np.array([1.0, 0.0]) @ apply_C_adjoint(spec, v, 3) == pytest.approx(2 * x + y, abs=1e-14)

    def test_adjoint_identity_random_pairs(self):
        rng = np.random.default_rng(7)
        for kind in ("coupled", "identity"):
            spec = ControlOperatorSpec(kind)
            for n in (2, 3, 8):
                k = spec.control_dim(n)
                for _ in range(1000 // 6 + 1):
                    u, v = rng.standard_normal(k), rng.standard_normal(n)
                    gap = apply_C(spec, u, n) @ v - u @ apply_C_adjoint(spec, v, n)
                    assert abs(gap) <= 1e-12 * np.linalg.norm(u) * np.linalg.norm(v)

    def test_norm_sqrt5(self):
        spec = ControlOperatorSpec("coupled")
        for n in (2, 3, 8):
            assert spec.norm(n) == pytest.approx(np.sqrt(5.0), rel=1e-12)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ControlOperatorSpec("bogus")


class TestNonlinearity:
    spec = NonlinearitySpec.bounded()

    def test_f_value(self):
        np.testing.assert_allclose(eval_nonlinearity(self.spec, "f", 1.0, np.ones(4)), 0.25)

    def test_g_odd(self):
        for s in (0.0, 0.3, 2.0):
            assert np.all(eval_nonlinearity(self.spec, "g", s, np.zeros(3)) == 0)

    def test_zeta_value(self):
        np.testing.assert_allclose(eval_nonlinearity(self.spec, "zeta", 0.5, np.zeros(3)), 0.5)

    def test_zeta_extended_at_zero(self):
        assert np.all(eval_nonlinearity(self.spec, "zeta", 0.0, np.array([0.0, 1.0, -3.0])) == 0)

    def test_trajectory_broadcast(self):
        s = np.linspace(0, 1, 11)[:, None]
        v = np.random.default_rng(0).standard_normal((11, 4))
        out = eval_nonlinearity(self.spec, "f", s, v)
        np.testing.assert_allclose(out[3], eval_nonlinearity(self.spec, "f", s[3, 0], v[3]))

    def test_callable_and_zero(self):
        spec = NonlinearitySpec(f=lambda s, v: 3.0 * v, g="zero")
        np.testing.assert_array_equal(eval_nonlinearity(spec, "f", 0.1, [1.0, 2.0]), [3.0, 6.0])
        assert spec.is_zero("g") and not spec.is_zero("f")

    def test_bad_which(self):
        with pytest.raises(ValueError):
            eval_nonlinearity(self.spec, "h", 0.0, [0.0])


class TestGrowthEnvelopes:
    """The stated estimates hold pointwise; the cosine zeta needs the model envelope."""

    def _samples(self, n, rng, count=1000):
        s = rng.uniform(0, 1, count)
        r = rng.uniform(1e-3, 10, count)
        dirs = rng.standard_normal((count, n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        v = dirs * np.sqrt(r * rng.uniform(0, 1, count))[:, None]
        return s, r, v

    def test_f_and_g_stated(self):
        env = GrowthEnvelope.stated()
        spec = NonlinearitySpec.bounded()
        rng = np.random.default_rng(11)
        s, r, v = self._samples(8, rng)
        for which, tau, omega in (("f", env.tau_f, env.omega_f), ("g", env.tau_g, env.omega_g)):
            val = np.sum(eval_nonlinearity(spec, which, s[:, None], v) ** 2, axis=1)
            assert np.all(val <= tau(s) * omega(r) * (1 + 1e-12))

    def test_zeta_model_envelope(self):
        model = heat_memory_model(8)
        env = GrowthEnvelope.for_model(model)
        rng = np.random.default_rng(12)
        s, r, v = self._samples(8, rng)
        val = np.sum(eval_nonlinearity(model.nonlinearity, "zeta", s[:, None], v) ** 2, axis=1)
        assert np.all(val <= env.tau_zeta(s) * env.omega_zeta(r) * (1 + 1e-12))

    def test_stated_zeta_envelope_fails_near_zero(self):
        # ||zeta(s, 0)||^2 = 4 N s^4 is positive while the stated envelope s^2 * ||v||^2 vanishes
        env = GrowthEnvelope.stated()
        spec = NonlinearitySpec.bounded()
        val = np.sum(eval_nonlinearity(spec, "zeta", 0.5, np.zeros(8)) ** 2)
        assert val > env.tau_zeta(0.5) * env.omega_zeta(0.0)

    def test_zero_families_give_zero_envelope(self):
        env = GrowthEnvelope.for_model(scalar_model())
        assert env.tau_f.l1_norm(1.0) == env.tau_g.l1_norm(1.0) == env.tau_zeta.l1_norm(1.0) == 0


class TestModel:
    def test_rejects_positive_eigenvalue(self):
        with pytest.raises(ValueError):
            SpectralModel(eigenvalues=[-1.0, 0.5])

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            SpectralModel(eigenvalues=[-4.0, -1.0])

    def test_noise_length(self):
        with pytest.raises((ValueError, ShapeError)):
            SpectralModel(eigenvalues=[-1.0, -4.0], noise=QWienerSpec([1.0]))

    def test_example_needs_two_modes(self):
        with pytest.raises(ValueError):
            SpectralModel(eigenvalues=[-1.0], control=ControlOperatorSpec("coupled"))

    def test_default_noise_inverse_square(self):
        model = heat_memory_model(4)
        np.testing.assert_allclose(model.noise.variances, [1, 1 / 4, 1 / 9, 1 / 16])

    def test_kernel_validation(self):
        with pytest.raises(ValueError):
            MemoryKernel.exponential(1.0, -1.0)
        k = MemoryKernel.exponential(2.0, 4.0)
        assert k(0.0) == 2.0 and k.l1_norm() == pytest.approx(0.5)
