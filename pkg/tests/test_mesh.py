import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trefftz.mesh import (
    MeshError,
    dump_mesh,
    extract_skeleton,
    generate_rect_grid,
    load_mesh,
    refine_uniform,
)

HANGING = """\
# right cell split in two: vertex 6 hangs on the left cell's right edge
vertices 8
0 0
1 0
2 0
0 1
1 1
2 1
1 0.5
2 0.5
elements 3
4 0 1 4 3
4 1 2 7 6
4 6 7 5 4
boundary 6
0 1 R
1 2 R
2 5 D
5 4 R
4 3 R
3 0 R
"""


def test_two_by_two_counts():
    m = generate_rect_grid((0, 0, 1, 1), 2, 2)
    assert len(m.vertices) == 9
    assert m.n_elements == 4
    assert len(m.facets) == 12
    assert sum(f.is_interior for f in m.facets) == 4
    assert m.h == pytest.approx(np.sqrt(0.5))


def test_single_cell():
    m = generate_rect_grid((0, 0, 2, 1), 1, 1, {"left": "D"})
    kinds = sorted(f.kind for f in m.facets)
    assert kinds == ["dirichlet", "robin", "robin", "robin"]
    assert m.metrics[0].area == pytest.approx(2.0)
    assert np.allclose(m.metrics[0].barycentre, [1.0, 0.5])


def test_all_dirichlet_rejected():
    with pytest.raises(MeshError, match="empty Robin boundary"):
        generate_rect_grid((0, 0, 1, 1), 2, 2, "D")


@pytest.mark.parametrize("args", [((0, 0, 1, 1), 0, 1), ((0, 0, -1, 1), 1, 1)])
def test_bad_grid_arguments(args):
    with pytest.raises(MeshError):
        generate_rect_grid(*args)


def test_hanging_node_skeleton():
    m = load_mesh(HANGING)
    assert len(m.facets) == 10
    assert sum(len(f.elements) for f in m.facets) == 13
    split = [f for f in m.facets if f.is_interior and 0 in f.elements]
    assert len(split) == 2
    assert sum(f.length for f in split) == pytest.approx(1.0)
    # the Dirichlet tag spans both fragments of the right side
    assert sum(f.kind == "dirichlet" for f in m.facets) == 2


def test_facet_ordering_and_normals():
    m = generate_rect_grid((0, 0, 1, 1), 3, 2)
    for f in m.facets:
        assert list(f.elements) == sorted(f.elements)
        assert np.linalg.norm(f.normal) == pytest.approx(1.0)
        if f.is_interior:
            a, b = f.elements
            assert np.allclose(f.unit_normal(a), -f.unit_normal(b))
        # outward for the first element: points away from its centroid
        c = m.metrics[f.elements[0]].barycentre
        assert (f.midpoint - c) @ f.normal > 0


def test_unit_normal_of_foreign_element():
    m = generate_rect_grid((0, 0, 1, 1), 2, 1)
    f = next(f for f in m.facets if not f.is_interior and f.elements == (0,))
    with pytest.raises(KeyError):
        f.unit_normal(1)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.floats(0.1, 10), st.floats(0.1, 10))
def test_grid_invariants(nx, ny, w, h):
    m = generate_rect_grid((0, 0, w, h), nx, ny)
    assert m.domain_area == pytest.approx(w * h, rel=1e-12)
    n_int = nx * (ny - 1) + ny * (nx - 1)
    assert sum(f.is_interior for f in m.facets) == n_int
    assert len(m.facets) == n_int + 2 * (nx + ny)
    boundary = sum(f.length for f in m.facets if not f.is_interior)
    assert boundary == pytest.approx(2 * (w + h), rel=1e-12)


def test_locate_and_boundary_loop():
    m = load_mesh(HANGING)
    assert m.locate([[0.5, 0.5], [1.5, 0.7], [1.5, 0.2], [3, 3]]).tolist() == [0, 2, 1, -1]
    loop = m.boundary_loop()
    assert len(loop) == 7
    assert m.bounding_box == (0.0, 0.0, 2.0, 1.0)


def test_dump_load_round_trip():
    m = load_mesh(HANGING)
    again = load_mesh(dump_mesh(m))
    assert np.array_equal(again.vertices, m.vertices)
    assert again.elements == m.elements
    assert [(f.vertex_ids, f.kind) for f in again.facets] == [(f.vertex_ids, f.kind) for f in m.facets]


def test_skeleton_is_deterministic():
    a = extract_skeleton(generate_rect_grid((0, 0, 1, 1), 3, 3))
    b = extract_skeleton(generate_rect_grid((0, 0, 1, 1), 3, 3))
    assert [f.vertex_ids for f in a] == [f.vertex_ids for f in b]


def test_refine_uniform_halves_h():
    meshes = refine_uniform((0, 0, 1, 1), 1, 1, "R", [1, 2, 4])
    hs = [m.h for m in meshes]
    assert hs[0] / hs[1] == pytest.approx(2.0) and hs[1] / hs[2] == pytest.approx(2.0)


@pytest.mark.parametrize(
    "text, message",
    [
        ("vertices x\n", "line 1"),
        ("vertices 3\n0 0\n1 0 5\n0 1\n", "line 3"),
        ("vertices 2\n0 0\n", "unexpected end"),
        ("vertices 3\n0 0\n1 0\n0 1\nelements 1\n3 0 2 1\nboundary 1\n0 1 R\n", "clockwise"),
        ("vertices 3\n0 0\n1 0\n0 1\nelements 1\n3 0 1 2\nboundary 1\n0 1 Q\n", "tag"),
        ("vertices 3\n0 0\n1 0\n2 0\nelements 1\n3 0 1 2\nboundary 1\n0 1 R\n", "degenerate"),
        ("vertices 3\n0 0\n1 0\n0 1\nelements 1\n3 0 1 2\nboundary 3\n0 1 R\n1 2 R\n2 0 R\nextra\n", "line 11"),
    ],
)
def test_load_errors(text, message):
    with pytest.raises(MeshError, match=message):
        load_mesh(text)
