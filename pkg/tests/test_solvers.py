import math

import numpy as np
import pytest
import scipy.sparse as sp

from poroperf.errors import ConstraintError, NonlinearSolverError, SolverError
from poroperf.fem import Assembler, LinearSolverSettings, Material, NewtonSettings, PoroProblem, apply_dirichlet, \
    linear_solve, newton_solve
from poroperf.fem.linalg import merge_constraints
from poroperf.fem.vtk import write_vtk
from poroperf.mesh import gen_disk_mesh, gen_rect_mesh
from poroperf.pipeline import outer_vertex_dofs
from poroperf.verification import (darcy_convergence, elasticity_convergence, observed_orders,
                                   quadratic_reproduction)


# -- linear algebra ---------------------------------------------------------------------

def test_identity_solve():
    b = np.arange(1.0, 6.0)
    np.testing.assert_array_equal(linear_solve(sp.identity(5), b), b)


@pytest.mark.parametrize("method", ["direct", "gmres"])
def test_spd_against_dense(rng, method):
    M = rng.normal(size=(50, 50))
    A = M @ M.T + 50 * np.eye(50)
    b = rng.normal(size=50)
    x = linear_solve(sp.csr_matrix(A), b, LinearSolverSettings(method=method))
    np.testing.assert_allclose(x, np.linalg.solve(A, b), rtol=1e-8, atol=1e-12)


def test_singular_raises():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SolverError):
        linear_solve(A, np.array([1.0, 0.0]))


def test_all_constrained_zero():
    A = sp.csr_matrix(np.array([[2.0, -1.0], [-1.0, 2.0]]))
    Ad, bd = apply_dirichlet(A, np.array([1.0, 1.0]), [0, 1], 0.0)
    np.testing.assert_array_equal(linear_solve(Ad, bd), [0.0, 0.0])


def test_two_node_laplace_with_interior():
    # 1D chain 0-1-2 with ends at 0 and 1: middle is the mean
    A = sp.csr_matrix(np.array([[1.0, -1, 0], [-1, 2, -1], [0, -1, 1]]))
    Ad, bd = apply_dirichlet(A, np.zeros(3), [0, 2], [0.0, 1.0])
    np.testing.assert_allclose(linear_solve(Ad, bd), [0.0, 0.5, 1.0])
    assert abs(Ad - Ad.T).max() == 0


def test_elimination_equals_lagrange_system(rng):
    n = 10
    M = rng.normal(size=(n, n))
    A = M @ M.T + n * np.eye(n)
    b = rng.normal(size=n)
    dofs, vals = np.array([1, 4, 7]), rng.normal(size=3)
    Ad, bd = apply_dirichlet(sp.csr_matrix(A), b, dofs, vals)
    x = linear_solve(Ad, bd)
    # enlarged saddle-point system with multipliers as the oracle
    Bc = np.zeros((3, n))
    Bc[np.arange(3), dofs] = 1.0
    big = np.block([[A, Bc.T], [Bc, np.zeros((3, 3))]])
    ref = np.linalg.solve(big, np.r_[b, vals])[:n]
    np.testing.assert_allclose(x, ref, rtol=1e-10, atol=1e-12)


def test_conflicting_constraints():
    with pytest.raises(ConstraintError):
        merge_constraints([3, 3], [0.0, 1.0])
    d, v = merge_constraints([3, 1, 3], [2.0, 5.0, 2.0])
    assert d.tolist() == [1, 3] and v.tolist() == [5.0, 2.0]


# -- Newton ------------------------------------------------------------------------------

def _disk_problem(load_scale, mesh=None, material=Material()):
    m = mesh or gen_disk_mesh(0.01, 0.001)
    asm = Assembler(m)
    xq = asm.quadrature_points()
    r2 = np.sum((xq - [0.003, 0.0]) ** 2, axis=2)
    load = asm.load_from_qp(load_scale * np.exp(-r2 / 0.002**2))
    centre = np.flatnonzero(np.linalg.norm(m.points_p2 - [-0.004, 0.0], axis=1) < 0.0015)
    return asm, PoroProblem(m, material, load, u_dofs=outer_vertex_dofs(m), u_values=0.0,
                            p_dofs=centre, p_values=0.0)


def test_converged_state_takes_zero_steps():
    asm, prob = _disk_problem(0.0)
    res = newton_solve(prob, assembler=asm)
    assert res.iterations == 0 and np.all(res.x == 0)


def test_frozen_displacement_darcy_one_step():
    asm, prob = _disk_problem(1e-3)
    prob.u_dofs = np.arange(asm.nU)
    res = newton_solve(prob, assembler=asm)
    assert res.iterations == 1


def test_quadratic_convergence_large_load():
    # strong inflow against a soft skeleton makes the problem visibly nonlinear
    asm, prob = _disk_problem(40.0)
    res = newton_solve(prob, assembler=asm, settings=NewtonSettings(atol=1e-13, rtol=1e-14))
    h = np.array(res.history)
    assert res.iterations >= 2
    # order estimate from the first three residuals above round-off
    e = h[h > 1e-12 * h[0]][:3]
    assert len(e) == 3
    assert np.log(e[2] / e[1]) / np.log(e[1] / e[0]) > 1.7


def test_newton_budget_error():
    asm, prob = _disk_problem(40.0)
    with pytest.raises(NonlinearSolverError) as exc:
        newton_solve(prob, assembler=asm, settings=NewtonSettings(max_iter=1, atol=1e-14, rtol=1e-14))
    assert len(exc.value.history) >= 1


def test_rotation_objectivity():
    th = 0.7
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    m = gen_disk_mesh(0.01, 0.001)
    asm, prob = _disk_problem(5.0, m)
    U = asm.split(newton_solve(prob, assembler=asm).x)[0]
    from poroperf.mesh import Mesh
    mr = Mesh(m.points @ R.T, m.cells, m.facets, m.facet_tags)
    asr = Assembler(mr)
    # same nodal load and constraints: the rotated problem is the same up to the frame
    pr = PoroProblem(mr, prob.material, prob.load, u_dofs=prob.u_dofs, u_values=0.0,
                     p_dofs=prob.p_dofs, p_values=0.0)
    Ur = asr.split(newton_solve(pr, assembler=asr).x)[0]
    np.testing.assert_allclose(Ur, U @ R.T, atol=1e-9 * np.abs(U).max())


# -- manufactured solutions ------------------------------------------------------------------

def test_darcy_third_order():
    h, e = darcy_convergence((4, 8, 16, 32))
    assert observed_orders(h, e).min() >= 2.9


def test_quadratic_pressure_reproduced():
    assert quadratic_reproduction() < 1e-10


def test_elasticity_second_order():
    h, e = elasticity_convergence((4, 8, 16, 32))
    assert observed_orders(h, e)[-1] >= 1.9


# -- output ----------------------------------------------------------------------------------

def test_vtk_layout(tmp_path):
    m = gen_rect_mesh(1, 1)
    write_vtk(tmp_path / "f.vtk", m, point_data={"p": np.arange(4.0), "u": np.ones((4, 2))},
              cell_data={"w": np.zeros((2, 2))})
    lines = (tmp_path / "f.vtk").read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0" and lines[3] == "DATASET UNSTRUCTURED_GRID"
    assert "POINTS 4 double" in lines and "CELLS 2 8" in lines and "CELL_TYPES 2" in lines
    assert lines[lines.index("VECTORS u double") + 1] == "1 1 0"
    assert "CELL_DATA 2" in lines
