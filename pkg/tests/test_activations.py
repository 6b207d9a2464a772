import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gntk.activations import (
    Activation,
    dual_activation,
    dual_activation_derivative,
    dual_cross,
    mc_dual_oracle,
)
from gntk.errors import ValidationError


def random_psd(rng, n, scale=1.0):
    b = rng.standard_normal((n, n + 2))
    return scale * (b @ b.T) / (n + 2)


def test_identity_dual_is_identity(rng):
    sigma = random_psd(rng, 5)
    assert np.allclose(dual_activation(Activation.identity(), sigma), sigma)
    assert np.allclose(
        dual_activation_derivative(Activation.identity(), sigma), np.ones((5, 5))
    )


def test_relu_dual_known_value():
    # unit-variance, uncorrelated pair: E[relu(u)relu(v)] = 1/(2*pi)
    sigma = np.eye(2)
    e = dual_activation(Activation.relu(), sigma)
    assert np.allclose(np.diag(e), 0.5)
    assert abs(e[0, 1] - 1.0 / (2 * np.pi)) < 1e-12
    ed = dual_activation_derivative(Activation.relu(), sigma)
    assert np.allclose(np.diag(ed), 0.5)
    assert abs(ed[0, 1] - 0.25) < 1e-12


def test_relu_dual_perfect_correlation():
    sigma = np.ones((2, 2))
    e = dual_activation(Activation.relu(), sigma)
    assert np.allclose(e, 0.5)  # relu(u)relu(u) has mean var/2
    ed = dual_activation_derivative(Activation.relu(), sigma)
    assert np.allclose(ed, 0.5)


def test_relu_positive_homogeneity(rng):
    sigma = random_psd(rng, 4)
    c = 2.7
    assert np.allclose(
        dual_activation(Activation.relu(), c * sigma),
        c * dual_activation(Activation.relu(), sigma),
        atol=1e-12,
    )
    # the derivative dual is scale-invariant for relu
    assert np.allclose(
        dual_activation_derivative(Activation.relu(), c * sigma),
        dual_activation_derivative(Activation.relu(), sigma),
        atol=1e-12,
    )


def test_leaky_relu_interpolates(rng):
    sigma = random_psd(rng, 4)
    as_relu = dual_activation(Activation.leaky_relu(0.0), sigma)
    assert np.allclose(as_relu, dual_activation(Activation.relu(), sigma), atol=1e-12)
    as_id = dual_activation(Activation.leaky_relu(1.0), sigma)
    assert np.allclose(as_id, sigma, atol=1e-12)


def test_erf_dual_diagonal():
    v = 0.8
    sigma = np.array([[v]])
    expected = (2 / np.pi) * np.arcsin(2 * v / (1 + 2 * v))
    assert abs(dual_activation(Activation.erf(), sigma)[0, 0] - expected) < 1e-12


def test_degenerate_zero_variance_row(rng):
    sigma = random_psd(rng, 4)
    sigma[0, :] = 0.0
    sigma[:, 0] = 0.0
    for act in (Activation.relu(), Activation.leaky_relu(0.2), Activation.erf()):
        e = dual_activation(act, sigma)
        ed = dual_activation_derivative(act, sigma)
        assert np.isfinite(e).all() and np.isfinite(ed).all()
        assert e[0, 0] == 0.0  # sigma(0) = 0 for every odd-at-zero activation


def test_rejects_non_square():
    with pytest.raises(ValidationError):
        dual_activation(Activation.relu(), np.ones((2, 3)))


def test_rejects_unknown_closed_form(rng):
    sigma = random_psd(rng, 3)
    with pytest.raises(ValidationError):
        dual_activation(Activation.sigmoid(), sigma)


@pytest.mark.parametrize(
    "act",
    [Activation.relu(), Activation.leaky_relu(0.2), Activation.erf(), Activation.identity()],
)
def test_closed_forms_match_mc(act, rng):
    """Spot MC check; the full 100-matrix suite lives in the acceptance tests."""
    sigma = random_psd(rng, 5)
    tol = 8e-3 * max(1.0, np.abs(sigma).max())
    mc_val = mc_dual_oracle(act, sigma, samples=400_000, seed=11)
    assert np.abs(dual_activation(act, sigma) - mc_val).max() < tol
    mc_der = mc_dual_oracle(act, sigma, samples=400_000, seed=12, derivative=True)
    assert np.abs(dual_activation_derivative(act, sigma) - mc_der).max() < tol


def test_mc_oracle_supports_sigmoid(rng):
    """Activations without closed forms still get oracle values."""
    sigma = random_psd(rng, 3)
    val = mc_dual_oracle(Activation.sigmoid(), sigma, samples=100_000, seed=4)
    assert val.shape == (3, 3)
    assert np.all(np.diag(val) > 0)


def test_mc_oracle_deterministic(rng):
    sigma = random_psd(rng, 3)
    a = mc_dual_oracle(Activation.relu(), sigma, samples=100_000, seed=9)
    b = mc_dual_oracle(Activation.relu(), sigma, samples=100_000, seed=9)
    assert np.array_equal(a, b)


def test_dual_cross_consistency(rng):
    """The rectangular moments agree with the square dual on a joint matrix."""
    act = Activation.relu()
    sigma = random_psd(rng, 6)
    full = dual_activation(act, sigma)
    var = np.diag(sigma)
    cross = dual_cross(act, var[:3], var[3:], sigma[:3, 3:])
    assert np.allclose(cross, full[:3, 3:], atol=1e-12)


@given(st.integers(min_value=0, max_value=2**31 - 1), st.integers(min_value=2, max_value=7))
@settings(max_examples=20)
def test_dual_preserves_psd(seed, n):
    rng = np.random.default_rng(seed)
    sigma = random_psd(rng, n)
    for act in (Activation.relu(), Activation.leaky_relu(0.3), Activation.erf()):
        e = dual_activation(act, sigma)
        assert np.allclose(e, e.T, atol=1e-12)
        evals = np.linalg.eigvalsh(e)
        assert evals.min() >= -1e-10 * max(1.0, evals.max())
