import os

import numpy as np
import pytest

from dctc.channels import CtcSystem, cv_map
from dctc.engines import consistency_residual, fixed_subspace
from dctc.gallery import (
    DEFAULT_ORDERING,
    Ordering,
    bistable_unitary,
    cr_eps,
    cr_mixed,
    cr_pure,
    cr_swap_symmetric,
    cycling_unitary,
    discontinuity_unitary,
    gallery,
    known_states,
    limit_kraus_ops,
    resolve_three_qubit_ordering,
)
from dctc.maxent import max_entropy_fixed_state
from dctc.qmat import (
    DimSplit,
    check_density,
    check_unitary,
    maximally_mixed,
    von_neumann_entropy,
)

STABLE = np.diag([0.5, 0.0, 0.25, 0.25]).astype(complex)
FLAT = np.diag([1 / 3, 0.0, 1 / 3, 1 / 3]).astype(complex)


def test_unitarity_of_all_circuits():
    assert np.abs(cycling_unitary() @ cycling_unitary().conj().T
                  - np.eye(8)).max() < 1e-15
    assert np.abs(bistable_unitary() @ bistable_unitary().conj().T
                  - np.eye(8)).max() < 1e-12
    assert np.abs(discontinuity_unitary() @ discontinuity_unitary().conj().T
                  - np.eye(8)).max() < 1e-15


def test_cycling_unitary_is_a_permutation():
    u = cycling_unitary()
    assert set(np.unique(np.abs(u))) == {0.0, 1.0}
    assert (np.abs(u).sum(axis=0) == 1.0).all()
    assert (np.abs(u).sum(axis=1) == 1.0).all()


def test_cycling_unitary_action():
    # in the joint index cr * 4 + cv, the map reads input ket -> output ket:
    # 01->00, 02->10, 03->02, 00->03, 10->01, and 11, 12, 13 stay put
    u = cycling_unitary()
    pairs = [((0, 0), (0, 1)), ((1, 0), (0, 2)), ((0, 2), (0, 3)),
             ((0, 3), (0, 0)), ((0, 1), (1, 0)), ((1, 1), (1, 1)),
             ((1, 2), (1, 2)), ((1, 3), (1, 3))]
    for (cr_o, cv_o), (cr_i, cv_i) in pairs:
        assert u[cr_o * 4 + cv_o, cr_i * 4 + cv_i] == 1.0


def test_bistable_unitary_entry_values():
    u = bistable_unitary()
    mags = np.unique(np.round(np.abs(u), 12))
    assert set(mags) == {0.0, round(1 / np.sqrt(2), 12), 1.0}


def test_bistable_fixed_states():
    sys = gallery()["u2"].system()
    for state in (STABLE, FLAT):
        assert consistency_residual(sys, state) < 1e-12
    assert abs(von_neumann_entropy(STABLE) - 1.5) < 1e-12
    assert abs(von_neumann_entropy(FLAT) - np.log2(3)) < 1e-12


def test_discontinuity_unitary_is_a_permutation():
    u = discontinuity_unitary()
    assert set(np.unique(np.abs(u))) == {0.0, 1.0}
    assert (np.abs(u).sum(axis=0) == 1.0).all()


def test_discontinuity_fixed_sets_by_input():
    g = gallery()["u3"]
    ket0 = np.diag([1.0, 0.0]).astype(complex)
    mix = np.diag([0.9, 0.1]).astype(complex)

    # nearly-|0> alpha with exactly-|0> beta pins the CV ground state
    sys = g.system(rho_cr=np.kron(mix, ket0))
    sub = fixed_subspace(sys)
    assert sub.dim == 1
    b = sub.basis[0]
    b = b / np.trace(b)
    assert np.abs(b - ket0).max() < 1e-8

    # both CR qubits at |0>: every diagonal CV state is consistent and the
    # entropy-maximizing choice is the maximally mixed one
    sys = g.system(rho_cr=np.kron(ket0, ket0))
    res = max_entropy_fixed_state(sys)
    assert np.abs(res.state - maximally_mixed(2)).max() < 1e-6


def test_cr_mixed():
    assert np.abs(cr_mixed(0.0) - np.diag([1.0, 0.0])).max() < 1e-15
    assert np.abs(cr_mixed(1.0) - np.eye(2) / 2).max() < 1e-15
    assert np.abs(cr_mixed(0.5) - np.diag([2 / 3, 1 / 3])).max() < 1e-15
    for s in np.linspace(0.0, 1.0, 11):
        rho = cr_mixed(s)
        check_density(rho)
        purity = float(np.real(np.trace(rho @ rho)))
        assert abs(purity - (1 + s * s) / (1 + s) ** 2) < 1e-12
    with pytest.raises(ValueError):
        cr_mixed(1.2)


def test_cr_pure():
    assert np.abs(cr_pure(0.0) - np.diag([1.0, 0.0])).max() < 1e-15
    plus = np.full((2, 2), 0.5, dtype=complex)
    assert np.abs(cr_pure(1.0) - plus).max() < 1e-15
    for s in np.linspace(0.0, 1.0, 11):
        rho = cr_pure(s)
        check_density(rho)
        assert abs(np.real(np.trace(rho @ rho)) - 1.0) < 1e-12
    with pytest.raises(ValueError):
        cr_pure(-0.1)


def test_cr_eps():
    assert np.abs(cr_eps(0.0, 0.0, 0.0, 0.0)
                  - np.diag([1.0, 0.0, 0.0, 0.0])).max() < 1e-15
    # mixed family: diagonal factors
    rho = cr_eps(0.3, 0.0, 0.2, 0.0)
    assert np.abs(rho - np.kron(np.diag([0.7, 0.3]),
                                np.diag([0.8, 0.2]))).max() < 1e-12
    # pure family: off-diagonal at the positivity ceiling gives rank 1
    d = np.sqrt(0.3 * 0.7)
    rho = cr_eps(0.3, d, 0.3, d)
    w = np.linalg.eigvalsh(rho)
    assert w.max() > 1 - 1e-12
    assert np.abs(w[:-1]).max() < 1e-12
    with pytest.raises(ValueError):
        cr_eps(0.5, 0.6, 0.0, 0.0)


def test_known_states():
    states = {k.label: k.state for k in known_states()}
    assert set(states) == {"cycle-state-1", "cycle-state-2", "cycle-state-3",
                           "cesaro-limit", "stable-fixed", "max-entropy-fixed"}
    for st in states.values():
        check_density(st)
    assert abs(von_neumann_entropy(states["stable-fixed"]) - 1.5) < 1e-12
    assert np.abs(states["max-entropy-fixed"] - FLAT).max() < 1e-15
    # the three cycle states map one onto the next under the cycling circuit
    sys = gallery()["u1"].system()
    assert np.abs(cv_map(sys, states["cycle-state-1"])
                  - states["cycle-state-2"]).max() < 1e-12
    assert np.abs(cv_map(sys, states["cycle-state-2"])
                  - states["cycle-state-3"]).max() < 1e-12
    assert np.abs(cv_map(sys, states["cycle-state-3"])
                  - states["cycle-state-1"]).max() < 1e-12


def test_limit_kraus_ops_completeness():
    ops = limit_kraus_ops()
    assert len(ops) == 4
    acc = sum(e.conj().T @ e for e in ops)
    assert np.abs(acc - np.eye(4)).max() < 1e-12


def test_cr_swap_symmetric():
    assert cr_swap_symmetric(np.eye(8, dtype=complex))
    assert not cr_swap_symmetric(discontinuity_unitary())
    with pytest.raises(ValueError):
        cr_swap_symmetric(np.eye(8), split=DimSplit(2, 4))


def test_gallery_structure():
    g = gallery()
    assert set(g) == {"u1", "u2", "u3"}
    assert g["u1"].split == DimSplit(2, 4)
    assert g["u2"].split == DimSplit(2, 4)
    assert g["u3"].split == DimSplit(4, 2)
    for gs in g.values():
        check_unitary(gs.unitary)
        check_density(gs.default_cr)
        assert gs.notes
    sys = g["u2"].system(p=0.02)
    assert isinstance(sys, CtcSystem)
    assert sys.p == 0.02
    override = np.diag([0.4, 0.6]).astype(complex)
    assert np.abs(g["u2"].system(rho_cr=override).rho_cr - override).max() == 0.0


def test_ordering_resolution(tmp_path):
    """All eight slot/index readings are scored; the pinned default wins."""
    path = os.path.join(tmp_path, "ordering_report.txt")
    res = resolve_three_qubit_ordering(report_path=path)
    assert res.chosen == DEFAULT_ORDERING
    assert len(res.cases) == 8
    assert not res.exact_match  # two case labels stay swapped, documented
    chosen_case = next(c for c in res.cases if c.ordering == res.chosen)
    assert not chosen_case.rejected
    assert chosen_case.labels["C"] == "ground-only"
    assert chosen_case.labels["A"] == "maximally-mixed-only"
    assert chosen_case.labels["B"] == "diagonal-family"
    # every reading that misses the ground-state pin is rejected
    for c in res.cases:
        assert c.rejected == (c.labels["C"] != "ground-only")
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    assert text == res.report
    assert "REJECTED" in text
    assert "Discrepancy" in text
    for field in ("cv_slot", "cr_order", "rho_index"):
        assert field in text


def test_ordering_constructor_validation():
    with pytest.raises(ValueError):
        Ordering(cv_slot="middle")
    with pytest.raises(ValueError):
        Ordering(cr_order="xy")
