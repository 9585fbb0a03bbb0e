"""End-to-end acceptance checks, one test per release criterion.

Run ``pytest -v tests/test_acceptance.py`` to get a pass/fail line per
criterion.  Tolerances here are pinned; loosening any of them needs a very
good reason.
"""

import functools
import os

import numpy as np
import pytest

from dctc.channels import (
    apply_superoperator,
    channel_distance,
    choi_matrix,
    cv_map,
    kraus_completeness_defect,
    kraus_commutator_residual,
    kraus_from_choi,
    noisy_cv_map,
    superoperator,
    superoperator_from_kraus,
)
from dctc.engines import (
    EngineConfig,
    allen_cesaro,
    deutsch_cesaro,
    limit_superoperator,
    ralph_closed_form,
    ralph_iterate,
)
from dctc.experiments import (
    CONTINUITY_BUDGET,
    Fig2Config,
    Fig3Config,
    deutsch_rule_grid,
    run_fig2,
    run_fig3,
    write_csv,
)
from dctc.gallery import gallery, limit_kraus_ops
from dctc.maxent import entropy_gradient, max_entropy_fixed_state
from dctc.qmat import (
    DimSplit,
    maximally_mixed,
    partial_trace,
    random_density,
    tensor,
    trace_distance,
    von_neumann_entropy,
)

STABLE = np.diag([0.5, 0.0, 0.25, 0.25]).astype(complex)
FLAT = np.diag([1 / 3, 0.0, 1 / 3, 1 / 3]).astype(complex)
CYCLE_SET = [np.diag([0.5, 0.0, 0.25, 0.25]).astype(complex),
             np.diag([0.25, 0.0, 0.25, 0.5]).astype(complex),
             np.diag([0.25, 0.0, 0.5, 0.25]).astype(complex)]


def test_criterion_01_cycle_states():
    """Noiseless cycling circuit: period-3 orbit with the known states."""
    sys = gallery()["u1"].system()
    out = ralph_iterate(sys, maximally_mixed(4))
    assert out.status == "cycle"
    assert len(out.cycle_states) == 3
    matched = []
    for want in CYCLE_SET:
        hits = [np.abs(got - want).max() for got in out.cycle_states]
        matched.append(min(hits))
    assert max(matched) < 1e-9
    print("criterion 1: period-3 cycle, worst entrywise error "
          f"{max(matched):.2e}")


def test_criterion_02_cesaro_limit():
    """Running averages of the cycling orbit settle on the flat state."""
    sys = gallery()["u1"].system()
    out = deutsch_cesaro(sys, maximally_mixed(4))
    assert out.status == "converged"
    assert out.steps <= 10 ** 4
    dist = trace_distance(out.state, FLAT)
    assert dist < 1e-3
    print(f"criterion 2: Cesaro limit in {out.steps} steps, "
          f"distance {dist:.2e}")


def test_criterion_03_bistability_and_noise():
    """Two noiseless fixed points; a little noise leaves exactly one."""
    g = gallery()["u2"]
    out = ralph_iterate(g.system(), maximally_mixed(4))
    assert out.status == "converged"
    assert np.abs(out.state - STABLE).max() < 1e-9
    out = ralph_iterate(g.system(), FLAT)
    assert out.status == "converged"
    assert np.abs(out.state - FLAT).max() < 1e-9

    target = np.diag([0.4975, 0.0025, 0.25, 0.25]).astype(complex)
    cfg = EngineConfig(tol=1e-12)
    for tau0 in (maximally_mixed(4), FLAT):
        noisy = ralph_iterate(g.system(p=0.01), tau0, cfg)
        assert noisy.status == "converged"
        assert np.abs(noisy.state - target).max() < 1e-8
    assert trace_distance(target, STABLE) < 0.02
    print("criterion 3: bistable at p=0, unique near-stable state at p=0.01")


def test_criterion_04_entropies():
    s1 = von_neumann_entropy(STABLE)
    s2 = von_neumann_entropy(FLAT)
    assert abs(s1 - 1.5) < 1e-9
    assert abs(s2 - 1.584962) < 1e-6
    print(f"criterion 4: entropies {s1:.9f} and {s2:.9f} bits")


def test_criterion_05_max_entropy_rule():
    res = max_entropy_fixed_state(gallery()["u2"].system())
    assert abs(res.entropy_bits - 1.58496) < 1e-4
    assert np.abs(res.state - FLAT).max() < 1e-4
    print(f"criterion 5: max-entropy state at {res.entropy_bits:.6f} bits")


def test_criterion_06_kraus_refutation():
    """The iterated-map limit is a 4-operator channel whose Kraus operators
    visibly fail the claimed fixed-point commutator identity."""
    sys = gallery()["u2"].system()
    lim = limit_superoperator(sys)
    extracted = kraus_from_choi(choi_matrix(lim))
    ref = limit_kraus_ops()
    dist = channel_distance(superoperator_from_kraus(extracted),
                            superoperator_from_kraus(ref))
    assert dist < 1e-6
    res = kraus_commutator_residual(ref, maximally_mixed(4))
    assert abs(res - np.sqrt(2) / 4) < 1e-9
    print(f"criterion 6: channel distance {dist:.2e}, "
          f"commutator residual {res:.9f} (= sqrt(2)/4)")


def test_criterion_07_picture_equivalence():
    """With noise, all three solution pictures give the same answer."""
    worst = 0.0
    for name in ("u1", "u2"):
        for p in (0.1, 0.01):
            sys = gallery()[name].system(p=p)
            closed = ralph_closed_form(sys)
            for seed in range(10):
                tau0 = random_density(4, 4000 + seed)
                it = ralph_iterate(sys, tau0).state
                al = allen_cesaro(sys, tau0).state
                worst = max(worst,
                            trace_distance(it, closed),
                            trace_distance(al, closed),
                            trace_distance(it, al))
    assert worst < 1e-6
    print(f"criterion 7: worst pairwise disagreement {worst:.2e}")


@functools.lru_cache(maxsize=1)
def _sweep_rows():
    cfg = Fig2Config(s_values=(0.0, 0.5, 1.0), n_random=100, max_iter=2000,
                     master_seed=42)
    return run_fig2(cfg).rows


def _above_diagonal(rows, s):
    """Tasks whose noiseless entropy beats their noisy entropy by 0.01."""
    noisy = {r.task: r.entropy_bits for r in rows
             if r.s == s and r.p == 0.01}
    clean = {r.task: r.entropy_bits for r in rows
             if r.s == s and r.p == 0.0}
    assert len(noisy) == len(clean) == 100
    return [t for t, e in clean.items() if e > noisy[t] + 0.01]


def test_criterion_08_sweep_reproduction():
    """Scaled sweep: noisy entropies are unique per mixing parameter, and
    at s=0 some noiseless starts land strictly above the noisy value."""
    rows = _sweep_rows()
    assert len(rows) == 3 * 100 * 2
    for s in (0.0, 0.5, 1.0):
        noisy = [r.entropy_bits for r in rows if r.s == s and r.p == 0.01]
        spread = max(noisy) - min(noisy)
        assert spread < 1e-6
        print(f"criterion 8: s={s} noisy spread {spread:.2e}")
    above = _above_diagonal(rows, 0.0)
    assert above, "no noiseless run above the noisy line at s=0"
    print(f"criterion 8: {len(above)}/100 starts above the diagonal at s=0")


@pytest.mark.xfail(strict=True, reason=(
    "for s > 0 the decohered fixed point sits at or above the entropy "
    "ceiling of the whole noiseless consistent family (at s=1 it is the "
    "maximally mixed state, the global entropy maximum), so no initial "
    "state can beat it; the property is attainable only at s=0"))
def test_criterion_08_above_diagonal_for_every_s():
    rows = _sweep_rows()
    for s in (0.0, 0.5, 1.0):
        assert _above_diagonal(rows, s), \
            f"no noiseless run above the noisy line at s={s}"


def test_criterion_09_continuity_surface():
    """Revised rule varies smoothly over the preparation grid; the
    max-entropy rule does not."""
    for family in ("mixed", "pure"):
        rec = run_fig3(Fig3Config(family=family, p=0.1))
        assert rec.grid.shape == (11, 11)
        jump = rec.info["max_jump"]
        budget = CONTINUITY_BUDGET[family]
        assert jump <= budget
        print(f"criterion 9: {family} family max jump {jump:.6f} "
              f"<= budget {budget}")
    grid = deutsch_rule_grid(eps_values=(0.0, 0.1))
    cliff = abs(grid[0, 0] - grid[1, 0])
    assert cliff >= 0.9
    print(f"criterion 9: max-entropy rule jump {cliff:.6f} >= 0.9")


def test_criterion_10_invariants():
    """Structural invariants: map preservation, representation agreement,
    gradient correctness, round trips, and bitwise reproducibility."""
    rng = np.random.default_rng(10)

    # trace/Hermiticity/positivity survive every map
    for name in ("u1", "u2"):
        for p in (0.0, 0.1):
            sys = gallery()[name].system(p=p)
            for seed in range(5):
                tau = random_density(4, 100 * seed + 7)
                out = noisy_cv_map(sys, tau) if p else cv_map(sys, tau)
                assert abs(np.trace(out).real - 1.0) < 1e-12
                assert np.abs(out - out.conj().T).max() < 1e-12
                assert np.linalg.eigvalsh(out).min() > -1e-12

    # superoperator against the direct map
    for name in ("u1", "u2"):
        sys = gallery()[name].system(p=0.01)
        m = superoperator(sys, include_noise=True)
        for seed in range(10):
            tau = random_density(4, seed)
            direct = noisy_cv_map(sys, tau)
            assert np.abs(apply_superoperator(m, tau) - direct).max() < 1e-12

    # extracted Kraus sets resolve the identity
    sys = gallery()["u2"].system(p=0.1)
    ops = kraus_from_choi(choi_matrix(superoperator(sys, include_noise=True)))
    assert kraus_completeness_defect(ops) < 1e-9

    # entropy gradient against central differences
    rho = 0.9 * random_density(4, 3) + 0.1 * maximally_mixed(4)
    grad = entropy_gradient(rho)
    h = 1e-5
    for _ in range(5):
        d = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        d = 0.5 * (d + d.conj().T)
        d -= np.trace(d).real / 4 * np.eye(4)
        d /= np.linalg.norm(d)
        fd = (von_neumann_entropy(rho + h * d)
              - von_neumann_entropy(rho - h * d)) / (2 * h)
        an = float(np.real(np.trace(grad @ d)))
        assert abs(fd - an) / max(abs(fd), 1e-12) < 1e-4

    # tensor / partial-trace round trips
    split = DimSplit(2, 4)
    for seed in range(10):
        a = random_density(2, seed)
        b = random_density(4, 1000 + seed)
        joint = tensor(a, b)
        assert np.abs(partial_trace(joint, split, keep="cr") - a).max() < 1e-12
        assert np.abs(partial_trace(joint, split, keep="cv") - b).max() < 1e-12

    # bitwise-identical CSV across reruns and across worker counts
    cfg = Fig2Config(s_values=(0.0, 1.0), n_random=4, max_iter=1500,
                     master_seed=5)
    paths = []
    for tag, jobs in (("a", 1), ("b", 1), ("c", 4)):
        path = os.path.join(os.path.dirname(__file__),
                            f".acceptance_{tag}.csv")
        write_csv(run_fig2(cfg, jobs=jobs).rows, path)
        paths.append(path)
    blobs = []
    for path in paths:
        with open(path, "rb") as fh:
            blobs.append(fh.read())
        os.remove(path)
    assert blobs[0] == blobs[1] == blobs[2]
    print("criterion 10: invariants and reproducibility hold")
