import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from inelastic_kfp.lattice_toy import (
    LatticeConfig,
    LatticeState,
    diffusive_limit,
    dirichlet_reference,
    lattice_report,
    neumann_reference,
    richardson_check,
    robin_reference,
    run_lattice,
    step_lattice,
)
from inelastic_kfp.utils.helpers import DomainError, l1_gap


@pytest.fixture
def trapping():
    return LatticeConfig(h=0.01, mode="trapping")


@pytest.fixture
def nontrapping():
    return LatticeConfig(h=0.01, mode="nontrapping", lam=1.0)


def test_step_lattice_examples():
    """Test single steps of the walk next to the wall."""
    state = step_lattice(LatticeState.point_mass(1, 5), LatticeConfig(h=0.1, mode="trapping"))
    np.testing.assert_array_equal(state.occupancy, [0.5, 0.0, 0.5, 0.0, 0.0])
    assert state.k == 1

    state = step_lattice(LatticeState.point_mass(0, 5), LatticeConfig(h=0.1, mode="nontrapping", lam=1.0))
    np.testing.assert_array_equal(state.occupancy, [0.0, 1.0, 0.0, 0.0, 0.0])

    # partial trapping escapes with probability mu h
    state = step_lattice(LatticeState.point_mass(0, 5), LatticeConfig(h=0.1, mode="partial", mu=2.0))
    assert state.occupancy[0] == pytest.approx(0.8)
    assert state.occupancy[1] == pytest.approx(0.2)


def test_mass_conservation():
    """Test that every wall rule conserves mass over 1e4 steps."""
    for cfg in (
        LatticeConfig(h=0.1, mode="trapping"),
        LatticeConfig(h=0.1, mode="nontrapping", lam=0.3),
        LatticeConfig(h=0.1, mode="partial", mu=1.0),
    ):
        state = LatticeState.point_mass(3, 50)
        for _ in range(10_000):
            state = step_lattice(state, cfg)
        assert state.mass == pytest.approx(1.0, abs=1e-12)


def test_invalid_lattice():
    """Test the rejected configurations."""
    with pytest.raises(DomainError):
        LatticeConfig(h=0.0)
    with pytest.raises(DomainError):
        LatticeConfig(h=0.1, mode="nontrapping", lam=0.0)
    with pytest.raises(DomainError):
        LatticeConfig(h=0.1, mode="partial", mu=20.0)
    with pytest.raises(DomainError):
        step_lattice(LatticeState.point_mass(0, 1), LatticeConfig(h=0.1))
    # t/h^2 is not an integer
    with pytest.raises(DomainError):
        run_lattice(LatticeConfig(h=0.3), 0.5)
    with pytest.raises(DomainError):
        run_lattice(LatticeConfig(h=0.01), 0.5, x0=1.005)


def test_trapping_limit(trapping):
    """Test the trapping walk against the Dirichlet solution and its wall mass."""
    limit = diffusive_limit(trapping, 0.5)
    reference = dirichlet_reference(limit.x, 1.0, 0.5)
    assert l1_gap(limit.x, limit.density, reference) < 0.02
    assert limit.m == pytest.approx(math.erfc(1.0), abs=0.02)


def test_nontrapping_limit(nontrapping):
    """Test the nontrapping walk against the Neumann solution."""
    limit = diffusive_limit(nontrapping, 0.5)
    reference = neumann_reference(limit.x, 1.0, 0.5)
    assert l1_gap(limit.x, limit.density, reference) < 0.02
    assert limit.m < 0.02


def test_partial_wall_mass():
    """Test m = U(0, t)/(2 mu) for the partially trapping walk."""
    limit = diffusive_limit(LatticeConfig(h=0.01, mode="partial", mu=1.0), 0.5)
    assert abs(limit.m - limit.wall_value / 2.0) < 0.05 * limit.m


def test_wall_mass_monotone_in_escape_probability():
    """Test that the wall mass decreases as the escape probability grows."""
    masses = [run_lattice(LatticeConfig(h=0.05, mode="trapping"), 0.5).occupancy[0]]
    for lam in (0.25, 0.5, 1.0):
        masses.append(run_lattice(LatticeConfig(h=0.05, mode="nontrapping", lam=lam), 0.5).occupancy[0])
    assert all(a >= b for a, b in zip(masses, masses[1:]))


def test_refinement(trapping):
    """Test that the Dirichlet gap shrinks when h halves."""
    coarse = diffusive_limit(LatticeConfig(h=0.02, mode="trapping"), 0.5)
    fine = diffusive_limit(trapping, 0.5)
    gap_coarse = l1_gap(coarse.x, coarse.density, dirichlet_reference(coarse.x, 1.0, 0.5))
    gap_fine = l1_gap(fine.x, fine.density, dirichlet_reference(fine.x, 1.0, 0.5))
    assert gap_fine < gap_coarse


def test_image_references():
    """Test the image solutions: wall values and masses."""
    x = np.linspace(0.0, 8.0, 4001)
    dirichlet = dirichlet_reference(x, 1.0, 0.5)
    neumann = neumann_reference(x, 1.0, 0.5)
    assert dirichlet[0] == pytest.approx(0.0, abs=1e-15)
    assert trapezoid(neumann, x) == pytest.approx(1.0, abs=1e-6)
    assert trapezoid(dirichlet, x) == pytest.approx(1.0 - math.erfc(1.0), abs=1e-6)


def test_robin_reference():
    """Test the Robin solution: ledger, and its Dirichlet and Neumann limits."""
    robin = robin_reference(1.0, 1.0, 0.5)
    assert robin.total_mass == pytest.approx(1.0, abs=1e-10)
    assert 0 < robin.m < math.erfc(1.0)

    dirichlet = robin_reference(0.0, 1.0, 0.5)
    gap = np.sum(np.abs(dirichlet.density - dirichlet_reference(dirichlet.x, 1.0, 0.5))) * dirichlet.dx
    assert gap < 0.01
    assert dirichlet.m == pytest.approx(math.erfc(1.0), abs=0.01)

    stiff = robin_reference(1e3, 1.0, 0.5)
    gap = np.sum(np.abs(stiff.density - neumann_reference(stiff.x, 1.0, 0.5))) * stiff.dx
    assert gap < 0.01

    with pytest.raises(DomainError):
        robin_reference(-1.0, 1.0, 0.5)
    with pytest.raises(DomainError):
        robin_reference(1.0, 1.0, 0.01)


def test_richardson_check():
    """Test that the Robin reference is converged under grid refinement."""
    result = richardson_check(1.0, 1.0, 0.5)
    assert result["l1_gap"] < 1e-3
    assert result["mass_gap"] < 1e-3


def test_lattice_report():
    """Test the comparison table and summary of each wall rule."""
    table, summary = lattice_report("trapping", 0.01, 0.5)
    assert list(table.columns) == ["x", "U_h", "U_ref"]
    assert summary["mode"] == "trapping"
    assert summary["L1_gap"] < 0.02
    assert summary["m_ref"] == pytest.approx(math.erfc(1.0))
    assert summary["lattice_mass"] == pytest.approx(1.0, abs=1e-2)

    _, partial = lattice_report("partial", 0.01, 0.5, mu=1.0)
    assert partial["m_h"] == pytest.approx(partial["m_ref"], rel=0.05)
