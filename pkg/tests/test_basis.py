import math

import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from trefftz.basis import (
    BasisError,
    CircularWaves,
    CornerWaves,
    Direction,
    FundamentalSolutions,
    FunctionSpace,
    LocalSpace,
    Multipoles,
    PlaneWaves,
    WaveBased,
    build_spaces,
    circle_points,
    cylindrical_order,
    dilated_poles,
    dof_offsets,
    equispaced_directions,
    ghp_scaling,
    make_space,
    wbm_box,
)
from trefftz.mesh import generate_rect_grid, load_mesh

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def space(family, k=3.0, center=(0.5, 0.5), poly=SQUARE):
    poly = np.asarray(poly, float)
    lo = poly.min(axis=0)
    span = poly.max(axis=0) - lo
    return LocalSpace(0, np.asarray(center, float), k, family, math.sqrt(2.0), poly, (*lo, *span))


def interior_points(rng, n=25):
    return 0.1 + 0.8 * rng.random((n, 2))


FAMILIES = {
    "pw": lambda: PlaneWaves.equispaced(9),
    "pw-evanescent": lambda: PlaneWaves((Direction.evanescent(0.3, 0.8), Direction.from_angle(1.0))),
    "ghp": lambda: CircularWaves(6),
    "ghp-scaled": lambda: CircularWaves(6, scaled=True),
    "mfs": lambda: FundamentalSolutions(circle_points(8, 1.4, (0.5, 0.5))),
    "multipole": lambda: Multipoles((2.0, -0.5), 4),
    "wbm": lambda: WaveBased(1.0),
    "corner": lambda: CornerWaves((0.0, 0.0), 0.5, 4),
}


def test_direction_examples():
    d = Direction.from_angle(math.pi / 3)
    assert d.is_real and d.d @ d.d == pytest.approx(1.0)
    ev = Direction(np.array([math.sqrt(2.0), 1j]))
    assert not ev.is_real
    with pytest.raises(BasisError):
        Direction(np.array([1.0, 1.0]))


def test_equispaced_directions_exact_axes():
    dirs = np.array([d.d for d in equispaced_directions(4)])
    assert np.array_equal(dirs.real, [[1, 0], [0, 1], [-1, 0], [0, -1]])
    with pytest.raises(BasisError):
        equispaced_directions(0)


def test_duplicate_directions_rejected():
    with pytest.raises(BasisError):
        PlaneWaves((Direction.from_angle(0.0), Direction.from_angle(0.0)))


def test_plane_wave_value():
    s = space(PlaneWaves((Direction.from_angle(0.0),)), k=math.pi, center=(0, 0))
    ev = s.eval([[0.5, 0.0]])
    assert ev.values[0, 0] == pytest.approx(1j, abs=1e-15)
    assert np.allclose(ev.gradients[0, 0], [1j * math.pi * 1j, 0.0])


def test_evanescent_wave_decays():
    s = space(PlaneWaves((Direction(np.array([math.sqrt(2.0), 1j])),)), k=2.0, center=(0, 0))
    v = s.eval([[0.0, 0.0], [0.0, 1.0]]).values[:, 0]
    assert v[0] == pytest.approx(1.0)
    assert abs(v[1]) == pytest.approx(math.exp(-2.0))


def test_circular_wave_order_zero_is_j0():
    s = space(CircularWaves(3), k=4.0, center=(0, 0))
    pts = np.array([[0.3, 0.4], [0.0, 0.9]])
    ev = s.eval(pts)
    assert np.allclose(ev.values[:, 0], sp.jv(0, 4.0 * np.hypot(*pts.T)), atol=1e-15)
    assert cylindrical_order(2).tolist() == [0, 1, -1, 2, -2]


def test_circular_wave_matches_scipy_with_phase(rng):
    s = space(CircularWaves(5), k=2.5, center=(0.2, -0.1))
    pts = interior_points(rng)
    rel = pts - s.center
    r, t = np.hypot(*rel.T), np.arctan2(rel[:, 1], rel[:, 0])
    ref = np.stack([sp.jv(l, 2.5 * r) * np.exp(1j * l * t) for l in cylindrical_order(5)], axis=1)
    assert np.allclose(s.eval(pts).values, ref, atol=1e-14)


def test_scaled_ghp_is_positive_rescaling(rng):
    pts = interior_points(rng)
    a = space(CircularWaves(5)).eval(pts).values
    b = space(CircularWaves(5, scaled=True)).eval(pts).values
    ratio = a / b
    assert np.allclose(ratio.imag, 0.0, atol=1e-12)
    assert np.all(ratio.real > 0)
    assert np.allclose(ratio, ratio[0], rtol=1e-12)
    assert np.all(ghp_scaling(3.0, 1.0, 5) > 0)


def test_wbm_box_and_dimension():
    assert wbm_box([[0, 0], [2, 0], [2, 1], [0, 1]]) == (2.0, 1.0)
    m = generate_rect_grid((0, 0, 1, 1), 1, 1)
    s = make_space(m, 0, 7.0, WaveBased(1.0))
    # floor(7/pi) = 2 per direction
    assert s.dim == 4 + 2 * (2 + 2)


def test_wbm_members_are_plane_wave_averages():
    m = generate_rect_grid((0, 0, 1, 1), 1, 1)
    k = 7.0
    s = make_space(m, 0, k, WaveBased(1.0))
    pts = np.array([[0.2, 0.3], [0.8, 0.6], [0.5, 0.9]])
    vals = s.eval(pts).values
    # x-family member with a = pi: cos(pi x) e^{i s y}
    a = math.pi
    sy = math.sqrt(k * k - a * a)
    target = 0.5 * (np.exp(1j * (a * pts[:, 0] + sy * pts[:, 1])) + np.exp(1j * (-a * pts[:, 0] + sy * pts[:, 1])))
    hits = [j for j in range(s.dim) if np.allclose(vals[:, j], target, atol=1e-13)]
    assert hits


def test_wbm_atoms_reproduce_members(rng):
    m = generate_rect_grid((0, 0, 1.3, 0.7), 1, 1)
    s = make_space(m, 0, 9.0, WaveBased(1.0))
    assert s.has_atoms
    origin = np.array([0.1, 0.2])
    w, c = s.atoms(origin)
    pts = 0.05 + rng.random((12, 2)) * [1.2, 0.6]
    assert np.allclose(np.exp((pts - origin) @ w.T) @ c.T, s.eval(pts).values, atol=1e-12)


def test_pw_atoms_reproduce_members(rng):
    s = space(PlaneWaves.equispaced(7))
    origin = np.array([0.0, 1.0])
    w, c = s.atoms(origin)
    pts = interior_points(rng)
    assert np.allclose(np.exp((pts - origin) @ w.T) @ c.T, s.eval(pts).values, atol=1e-13)
    with pytest.raises(BasisError):
        space(CircularWaves(2)).atoms(origin)


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_members_solve_helmholtz(name, rng):
    k = 3.0
    s = space(FAMILIES[name](), k=k)
    pts = interior_points(rng, 50)
    step = 1e-4 * 2 * math.pi / k
    ex, ey = np.array([step, 0]), np.array([0, step])
    f = lambda p: s.eval(p).values  # noqa: E731
    lap = (f(pts + ex) + f(pts - ex) + f(pts + ey) + f(pts - ey) - 4 * f(pts)) / step**2
    ev = s.eval(pts)
    # absolute rounding in the values is amplified by 1/step^2; floor the scale
    eps = 1e-3 * k * k * np.abs(ev.values).max()
    scale = k * k * np.abs(ev.values) + np.linalg.norm(ev.gradients, axis=-1) / k + eps
    assert (np.abs(lap + k * k * ev.values) / scale).max() < 1e-5


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_gradients_match_finite_differences(name, rng):
    s = space(FAMILIES[name](), k=3.0)
    pts = interior_points(rng, 10)
    step = 1e-6
    grad = s.eval(pts).gradients
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = step
        fd = (s.eval(pts + e).values - s.eval(pts - e).values) / (2 * step)
        scale = np.abs(grad[..., axis]).max() + 1.0
        assert np.abs(fd - grad[..., axis]).max() < 1e-6 * scale


def test_poles_inside_element_rejected():
    with pytest.raises(BasisError):
        space(FundamentalSolutions(np.array([[0.5, 0.5]])))
    with pytest.raises(BasisError):
        space(Multipoles((0.2, 0.2), 2))


def test_family_parameter_validation():
    for bad in (lambda: CircularWaves(-1), lambda: WaveBased(0.0), lambda: CornerWaves((0, 0), 2.0, 3)):
        with pytest.raises(BasisError):
            bad()


def test_build_spaces_and_offsets():
    m = load_mesh(
        "vertices 6\n0 0\n1 0\n2 0\n0 1\n1 1\n2 1\nelements 2\n4 0 1 4 3\n4 1 2 5 4\n"
        "boundary 6\n0 1 R\n1 2 R\n2 5 R\n5 4 R\n4 3 R\n3 0 R\n"
    )
    spaces = build_spaces(m, 2.0, [PlaneWaves.equispaced(5), CircularWaves(2)])
    assert dof_offsets(spaces).tolist() == [0, 5, 10]
    assert np.allclose(spaces[1].center, [1.5, 0.5])
    with pytest.raises(BasisError):
        build_spaces(m, 2.0, [CircularWaves(1)])


def test_dilated_poles_scale_about_centre():
    poles = dilated_poles(SQUARE, 8, 2.0)
    assert np.allclose(poles.mean(axis=0), [0.5, 0.5])
    assert np.allclose(np.abs(poles - 0.5).max(axis=1), 1.0)
    assert np.allclose(np.hypot(*circle_points(6, 2.0).T), 2.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(0, 3))
def test_evanescent_direction_normalised(theta, decay):
    d = Direction.evanescent(theta, decay).d
    assert abs(d @ d - 1.0) < 1e-12


def test_function_space_wraps_field():
    fs = FunctionSpace(lambda p: (np.exp(1j * p[:, 0]), np.stack([1j * np.exp(1j * p[:, 0]), 0 * p[:, 0]], 1)), 1.0)
    ev = fs.eval([[0.0, 0.0], [1.0, 2.0]])
    assert ev.values.shape == (2, 1) and ev.gradients.shape == (2, 1, 2)
