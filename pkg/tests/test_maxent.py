import numpy as np
import pytest

from dctc.channels import CtcSystem
from dctc.engines import consistency_residual, deutsch_cesaro, fixed_subspace
from dctc.gallery import gallery
from dctc.maxent import entropy_gradient, max_entropy_fixed_state, project_affine
from dctc.qmat import (
    DimSplit,
    maximally_mixed,
    random_density,
    von_neumann_entropy,
)

FLAT = np.diag([1 / 3, 0.0, 1 / 3, 1 / 3]).astype(complex)


def _interior(dim, seed, eps=0.05):
    return (1 - eps) * random_density(dim, seed) + eps * maximally_mixed(dim)


def test_max_entropy_bistable():
    res = max_entropy_fixed_state(gallery()["u2"].system())
    assert np.abs(res.state - FLAT).max() < 1e-4
    assert abs(res.entropy_bits - 1.58496) < 1e-4
    assert res.kkt_residual < 1e-8
    assert consistency_residual(gallery()["u2"].system(), res.state) < 1e-6


def test_max_entropy_cycling():
    # the consistent set is a single state, so there is nothing to ascend
    res = max_entropy_fixed_state(gallery()["u1"].system())
    assert np.abs(res.state - FLAT).max() < 1e-6
    assert res.iterations == 0


def test_max_entropy_identity_unitary():
    sys = CtcSystem(np.eye(4, dtype=complex), np.diag([1.0, 0.0]),
                    DimSplit(2, 2))
    res = max_entropy_fixed_state(sys)
    assert np.abs(res.state - maximally_mixed(2)).max() < 1e-6
    assert abs(res.entropy_bits - 1.0) < 1e-8


def test_max_entropy_beats_sampled_consistent_states():
    """No averaged orbit from a random start lands above the maximum."""
    sys = gallery()["u2"].system()
    best = max_entropy_fixed_state(sys).entropy_bits
    anchor = deutsch_cesaro(sys, maximally_mixed(4)).state
    assert best >= von_neumann_entropy(anchor) - 1e-9
    for seed in range(10):
        out = deutsch_cesaro(sys, random_density(4, seed))
        assert best >= von_neumann_entropy(out.state) - 1e-6


def test_max_entropy_deterministic():
    a = max_entropy_fixed_state(gallery()["u2"].system())
    b = max_entropy_fixed_state(gallery()["u2"].system())
    assert np.abs(a.state - b.state).max() < 1e-8
    assert a.iterations == b.iterations


def test_entropy_gradient_critical_at_maximally_mixed():
    g = entropy_gradient(maximally_mixed(2))
    # a multiple of the identity: zero once trace-projected
    off = g - np.trace(g) / 2 * np.eye(2)
    assert np.abs(off).max() < 1e-12


def test_entropy_gradient_matches_finite_differences():
    h_step = 1e-5
    rng = np.random.default_rng(5)
    for seed in range(20):
        rho = _interior(4, seed)
        g = entropy_gradient(rho)
        # random traceless Hermitian direction
        a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        h = 0.5 * (a + a.conj().T)
        h -= np.trace(h) / 4 * np.eye(4)
        h /= np.linalg.norm(h)
        sp = von_neumann_entropy(rho + h_step * h)
        sm = von_neumann_entropy(rho - h_step * h)
        numeric = (sp - sm) / (2 * h_step)
        analytic = float(np.real(np.trace(g.conj().T @ h)))
        assert abs(analytic - numeric) < 1e-4 * max(1.0, abs(numeric))


def test_entropy_gradient_two_level_value():
    rho = np.diag([0.75, 0.25]).astype(complex)
    g = entropy_gradient(rho)
    expect = np.diag(-(np.log2([0.75, 0.25]) + 1 / np.log(2)))
    assert np.abs(g - expect).max() < 1e-12


def test_entropy_gradient_rejects_singular_states():
    with pytest.raises(ValueError):
        entropy_gradient(np.diag([1.0, 0.0]))


def test_entropy_increases_toward_the_flat_state():
    eps = 1e-6
    rho = (1 - eps) * np.diag([0.5, 0.0, 0.25, 0.25]).astype(complex) \
        + eps * maximally_mixed(4)
    g = entropy_gradient(rho)
    direction = np.diag([-1.0, 0.0, 0.5, 0.5]).astype(complex)
    slope = float(np.real(np.trace(g.conj().T @ direction)))
    assert slope > 0.1


def test_project_affine_behaviour():
    sub = fixed_subspace(gallery()["u2"].system())
    inside = np.diag([-1.0, 0.0, 0.5, 0.5]).astype(complex)
    assert np.abs(project_affine(inside, sub) - inside).max() < 1e-8
    # orthogonal to every traceless fixed direction: level-1 population
    # alone, and a coherence the fixed family never contains
    for outside in (np.diag([0.0, 1.0, 0.0, 0.0]).astype(complex),
                    np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 0],
                              [0, 0, 0, 0]], dtype=complex)):
        assert np.abs(project_affine(outside, sub)).max() < 1e-8
    rng = np.random.default_rng(9)
    for _ in range(10):
        a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        h = 0.5 * (a + a.conj().T)
        once = project_affine(h, sub)
        assert np.abs(project_affine(once, sub) - once).max() < 1e-12
