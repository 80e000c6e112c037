import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from poroperf import coupling as cp
from poroperf.errors import BindingError, SourcePlacementError
from poroperf.fem import Assembler, Material, PoroProblem, newton_solve
from poroperf.mesh import gen_rect_mesh
from poroperf.vascular import fan_tree


def _src(center, r, q, b=3.0):
    return cp.InletSource(tuple(center), r, q, b, cp.source_amplitude(q, r, b, len(center)))


# -- amplitudes and fields ----------------------------------------------------------------

def test_amplitude_2d_example():
    g = cp.source_amplitude(16e-9, 2e-4, 3.0, 2)
    assert g == pytest.approx(1.4147e-2, rel=1e-4)
    # the bell integrated over the whole plane gives back the flow
    w = 3.0 * 2e-4
    total, _ = integrate.quad(lambda rho: g * math.exp(-rho**2 / w**2) * 2 * math.pi * rho, 0, 20 * w)
    assert total == pytest.approx(16e-9, rel=1e-10)


@pytest.mark.parametrize("q,r,b", [(1e-10, 7e-5, 3.0), (2e-7, 1e-3, 1.0), (5e-9, 3e-4, 8.0)])
def test_amplitude_3d_integral(q, r, b):
    g = cp.source_amplitude(q, r, b, 3)
    w = b * r
    total, _ = integrate.quad(lambda rho: g * math.exp(-rho**2 / w**2) * 4 * math.pi * rho**2, 0, 20 * w,
                              epsabs=0, epsrel=1e-13)
    assert total == pytest.approx(q, rel=1e-10)


def test_equal_leaves_equal_amplitudes():
    t = fan_tree((0.0, 0.0), [[1e-3, 0], [0, 1e-3], [-1e-3, 0]], q_perf=3e-9)
    srcs = cp.build_sources(t)
    assert len({s.gamma for s in srcs}) == 1
    assert sum(s.flow for s in srcs) == pytest.approx(3e-9, rel=1e-14)


def test_build_sources_one_per_leaf(small_pair):
    srcs = cp.build_sources(small_pair.supplying, b=2.0)
    assert len(srcs) == small_pair.supplying.n_leaves
    assert sum(s.flow for s in srcs) == pytest.approx(small_pair.supplying.q_perf, rel=1e-12)
    with pytest.raises(ValueError):
        cp.build_sources(small_pair.supplying, b=0.0)


def test_field_peak_and_width():
    s = _src((0.1, -0.2), 1e-3, 4e-9)
    assert cp.source_field([s], [s.center])[0] == pytest.approx(s.gamma, rel=1e-15)
    at_w = np.array([[0.1 + s.width, -0.2]])
    assert cp.source_field([s], at_w)[0] == pytest.approx(s.gamma / math.e, rel=1e-12)


coords = st.floats(-1e-2, 1e-2, allow_nan=False)


@given(st.lists(st.tuples(coords, coords, st.floats(1e-5, 1e-3), st.floats(1e-12, 1e-6)), min_size=1, max_size=5),
       st.lists(st.tuples(coords, coords), min_size=1, max_size=20))
def test_field_nonnegative_and_superposed(specs, pts):
    srcs = [_src((x, y), r, q) for x, y, r, q in specs]
    pts = np.array(pts)
    total = cp.source_field(srcs, pts)
    assert np.all(total >= 0)
    parts = sum(cp.source_field([s], pts) for s in srcs)
    np.testing.assert_allclose(total, parts, rtol=1e-13, atol=0)


# -- discrete normalization ------------------------------------------------------------------

@pytest.fixture(scope="module")
def unit_square():
    m = gen_rect_mesh(96, 96)
    return m, Assembler(m)


def test_normalization_deep_inside(unit_square):
    _, asm = unit_square
    s = _src((0.5, 0.5), 0.02, 1.0, b=2.5)
    (n,) = cp.normalize_sources([s], asm)
    assert n.gamma / s.gamma == pytest.approx(1.0, abs=1e-6)
    assert cp.discrete_integrals([n], asm)[0] == pytest.approx(1.0, rel=1e-12)


def test_normalization_on_edge_doubles(unit_square):
    _, asm = unit_square
    s = _src((0.5, 0.0), 0.02, 1.0, b=2.5)
    (n,) = cp.normalize_sources([s], asm)
    assert n.gamma / s.gamma == pytest.approx(2.0, rel=1e-5)


def test_normalization_total(unit_square):
    _, asm = unit_square
    srcs = [_src(c, 0.01, q) for c, q in [((0.2, 0.3), 1e-9), ((0.9, 0.95), 3e-9), ((0.0, 0.5), 2e-9)]]
    out = cp.normalize_sources(srcs, asm)
    assert cp.discrete_integrals(out, asm).sum() == pytest.approx(6e-9, rel=1e-10)
    assert float(np.sum(cp.source_load(out, asm))) == pytest.approx(6e-9, rel=1e-10)


def test_source_outside_mesh(unit_square):
    _, asm = unit_square
    with pytest.raises(SourcePlacementError):
        cp.normalize_sources([_src((3.0, 3.0), 0.01, 1.0)], asm)


# -- outlet ports ----------------------------------------------------------------------------

def _drain(leaves, r):
    t = fan_tree((0.5, 0.5), leaves, role="draining", q_perf=1e-9)
    return t.with_(radius=np.full(t.n_segments, r))


def test_node_at_center_captured(unit_square):
    m, _ = unit_square
    x = m.points_p2[1234]
    (p,) = cp.bind_outlets(_drain([x], 1e-9), m, s=1.0)
    assert p.dofs == (1234,)


def test_binding_error_when_nothing_close(unit_square):
    m, _ = unit_square
    x = m.points_p2[1234] + [1e-4, 1e-4]
    with pytest.raises(BindingError, match="refine"):
        cp.bind_outlets(_drain([x], 1e-5), m, s=3.0)
    assert cp.bind_outlets(_drain([x, m.points_p2[7]], 1e-5), m, s=3.0, allow_empty=True)[0].dofs == (7,)


def test_ports_disjoint_nearest_centre(unit_square):
    m, _ = unit_square
    centres = np.array([[0.30, 0.30], [0.33, 0.30], [0.31, 0.33]])
    ports = cp.bind_outlets(_drain(centres, 0.02), m, s=1.0)
    all_dofs = np.concatenate([p.dofs for p in ports])
    assert all_dofs.size == np.unique(all_dofs).size
    pts = m.points_p2
    for i, p in enumerate(ports):
        d = np.linalg.norm(pts[list(p.dofs)][:, None] - centres[None], axis=2)
        assert np.all(np.argmin(d, axis=1) == i)


def test_benchmark_capture_s3(bench_pair, bench_mesh):
    ports = cp.bind_outlets(bench_pair.draining, bench_mesh, s=3.0)
    assert len(ports) == 50
    assert min(len(p.dofs) for p in ports) >= 1


def test_facet_ports(unit_square):
    m, _ = unit_square
    tags = list(m.facet_tags)
    # tag the bottom edge facets as outflow:0
    bottom = np.flatnonzero(np.all(m.points[m.facets][:, :, 1] == 0.0, axis=1))
    for k in bottom:
        tags[k] = "outflow:0"
    mt = type(m)(m.points, m.cells, m.facets, tags)
    (p,) = cp.bind_outlets(_drain([[0.5, 0.0]], 1e-3), mt)
    assert np.allclose(mt.points_p2[list(p.dofs), 1], 0.0)
    assert len(p.dofs) == 2 * bottom.size + 1


# -- mass balance ----------------------------------------------------------------------------

def _frozen_darcy(asm, m, load, ports):
    prob = PoroProblem(m, Material(), load, u_dofs=np.arange(asm.nU), u_values=0.0,
                       p_dofs=cp.port_dofs(ports), p_values=0.0)
    return prob, newton_solve(prob, assembler=asm).x


def test_zero_inflow_zero_report(unit_square):
    m, asm = unit_square
    ports = cp.bind_outlets(_drain([[0.2, 0.2]], 0.01), m)
    prob, x = _frozen_darcy(asm, m, np.zeros(asm.nP), ports)
    mb = cp.mass_balance_report(x, prob, ports, asm)
    assert all(v == 0 for v in mb.as_dict().values())


def test_report_linear_in_inflow(unit_square):
    m, asm = unit_square
    ports = cp.bind_outlets(_drain([[0.2, 0.2], [0.8, 0.3]], 0.01), m)
    srcs = cp.normalize_sources([_src((0.6, 0.7), 0.01, 1e-9)], asm)
    out = []
    for scale in (1.0, 2.0):
        load = scale * cp.source_load(srcs, asm)
        prob, x = _frozen_darcy(asm, m, load, ports)
        out.append(cp.mass_balance_report(x, prob, ports, asm))
    for k in ("inflow", "outflow", "leakage"):
        assert getattr(out[1], k) == pytest.approx(2 * getattr(out[0], k), rel=1e-8)
    assert out[0].imbalance < 1e-8


def test_coupled_case_conserves(small_pair, coarse_disk):
    from poroperf.pipeline import solve_case
    res = solve_case(coarse_disk, small_pair.supplying, small_pair.draining, Material())
    mb = res.mass_balance
    assert mb.inflow == pytest.approx(small_pair.supplying.q_perf, rel=1e-10)
    assert mb.imbalance < 1e-6
    assert mb.max_port_pressure == 0.0


def test_export_roundtrip(tmp_path, small_pair, coarse_disk):
    import json
    srcs = cp.build_sources(small_pair.supplying)
    ports = cp.bind_outlets(small_pair.draining, coarse_disk, s=3.0)
    cp.export_coupling(srcs, ports, tmp_path / "c.json")
    data = json.loads((tmp_path / "c.json").read_text())
    assert len(data["sources"]) == len(srcs) and len(data["ports"]) == len(ports)
    assert data["ports"][0]["dofs"] == list(ports[0].dofs)
