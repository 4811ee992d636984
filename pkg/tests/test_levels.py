import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cstsim.levels import (
    MU_B,
    SPIN_PROJECTIONS,
    HamiltonianParams,
    LabelingError,
    ZfsTemperatureModel,
    build_hamiltonian,
    d_e_of_temperature,
    eigenlevels,
    jacobi_eigh,
    level_path,
    pair_frequency,
    resonance_fields,
    spin_matrices,
    transitions,
)

Y = (0.0, 1.0, 0.0)

# Resonance fields from an independent route: numpy eigvalsh on a separately
# built Hamiltonian, sorted levels, brentq root solve to 1e-13 mT.
GS_ROOTS = {(-1.5, 0.5): 15.790274370251826, (-0.5, 1.5): 17.040631615178953}
ES_125K_ROOTS = {(-1.5, 0.5): 3.760746787396675, (-0.5, 1.5): 18.005888256387813}
# eigvalsh of H(d=35, b=(0, 10, 0))
EIG_D35_B10 = [-438.92054322, -124.20473345, 159.00054322, 404.12473345]


def _charpoly_roots(h):
    # Faddeev-LeVerrier coefficients, then polynomial roots
    n = h.shape[0]
    coeffs = [1.0 + 0j]
    m = np.zeros_like(h)
    for k in range(1, n + 1):
        m = h @ m + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(h @ m) / k)
    return np.sort(np.roots(coeffs).real)


# -- spin matrices --------------------------------------------------------


def test_sz_is_diagonal_in_projection_order():
    s = spin_matrices()
    assert np.allclose(s.sz, np.diag([1.5, 0.5, -0.5, -1.5]))


def test_commutators_are_cyclic():
    s = spin_matrices()
    comm = lambda a, b: a @ b - b @ a
    assert np.max(np.abs(comm(s.sx, s.sy) - 1j * s.sz)) < 1e-12
    assert np.max(np.abs(comm(s.sy, s.sz) - 1j * s.sx)) < 1e-12
    assert np.max(np.abs(comm(s.sz, s.sx) - 1j * s.sy)) < 1e-12


def test_casimir_and_hermiticity():
    s = spin_matrices()
    tot = s.sx @ s.sx + s.sy @ s.sy + s.sz @ s.sz
    assert np.max(np.abs(tot - 3.75 * np.eye(4))) < 1e-12
    for m in (s.sx, s.sy, s.sz):
        assert np.max(np.abs(m - m.conj().T)) < 1e-15


# -- Hamiltonian ----------------------------------------------------------


def test_zero_field_hamiltonian_is_doublet_diagonal():
    h = build_hamiltonian(HamiltonianParams(35.0))
    assert np.allclose(h, np.diag([35.0, -35.0, -35.0, 35.0]))


def test_pure_zeeman_along_y():
    w, _ = jacobi_eigh(build_hamiltonian(HamiltonianParams(0.0, 2.0, (0, 10, 0))))
    assert np.allclose(w, [-419.88, -139.96, 139.96, 419.88], atol=1e-9)


def test_eigenvalues_match_characteristic_polynomial():
    h = build_hamiltonian(HamiltonianParams(35.0, 2.0, (0, 10, 0)))
    w, _ = jacobi_eigh(h)
    assert np.allclose(w, _charpoly_roots(h), atol=1e-8)
    assert np.allclose(w, EIG_D35_B10, atol=1e-7)


def test_negative_g_factor_rejected():
    with pytest.raises(ValueError):
        HamiltonianParams(35.0, -2.0)


vec = st.tuples(*[st.floats(-30, 30) for _ in range(3)])


@settings(max_examples=60, deadline=None)
@given(d=st.floats(-500, 500), b=vec)
def test_trace_zero_and_hermitian(d, b):
    h = build_hamiltonian(HamiltonianParams(d, 2.0, b))
    assert abs(np.trace(h)) < 1e-9
    assert np.max(np.abs(h - h.conj().T)) == 0.0


@settings(max_examples=60, deadline=None)
@given(d=st.floats(-500, 500), b=vec)
def test_jacobi_matches_lapack(d, b):
    h = build_hamiltonian(HamiltonianParams(d, 2.0, b))
    w, v = jacobi_eigh(h)
    assert np.all(np.diff(w) >= 0)
    scale = max(1.0, np.max(np.abs(h)))
    assert np.allclose(w, np.linalg.eigvalsh(h), atol=1e-10 * scale)
    assert np.allclose(h @ v, v * w, atol=1e-9 * scale)
    assert np.allclose(v.conj().T @ v, np.eye(4), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(d=st.floats(-300, 300), bmag=st.floats(0.1, 30), phi=st.floats(0, 2 * np.pi))
def test_spectrum_invariant_under_rotation_about_z(d, bmag, phi):
    p0 = HamiltonianParams(d, 2.0, (bmag, 0.0, 0.0))
    p1 = HamiltonianParams(d, 2.0, (bmag * np.cos(phi), bmag * np.sin(phi), 0.0))
    w0, _ = jacobi_eigh(build_hamiltonian(p0))
    w1, _ = jacobi_eigh(build_hamiltonian(p1))
    assert np.allclose(w0, w1, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(d=st.floats(-300, 300), bz=st.floats(0.01, 40))
def test_field_along_z_closed_form(d, bz):
    ls = eigenlevels(HamiltonianParams(d, 2.0, (0, 0, bz)))
    for m in SPIN_PROJECTIONS:
        assert abs(ls.energy(m) - (d * (m * m - 1.25) + m * 2.0 * MU_B * bz)) < 1e-9


# -- eigenlevels ----------------------------------------------------------


@pytest.mark.parametrize("d, split", [(35.0, 70.0), (215.0, 430.0)])
def test_zero_field_doublet_splitting(d, split):
    ls = eigenlevels(HamiltonianParams(d))
    assert np.allclose(ls.energies, [-d, -d, d, d])
    assert ls.energy(1.5) - ls.energy(0.5) == pytest.approx(split)


def test_strong_field_limit_orders_by_projection():
    b = 2000.0
    ls = eigenlevels(HamiltonianParams(35.0, 2.0, (0, b, 0)))
    for m in SPIN_PROJECTIONS:
        # first-order shift of the uniaxial term for a perpendicular field is O(D)
        assert abs(ls.energy(m) - m * 2.0 * MU_B * b) < 2 * 35.0


@settings(max_examples=40, deadline=None)
@given(d=st.floats(-400, 400), b=vec)
def test_levelset_invariants(d, b):
    ls = eigenlevels(HamiltonianParams(d, 2.0, b))
    assert abs(np.sum(ls.energies)) < 1e-9
    assert sorted(ls.labels) == sorted(SPIN_PROJECTIONS)


def test_label_continuity_along_path():
    p = HamiltonianParams(35.0)
    fields = np.arange(0.5, 25.0, 0.01)
    path = level_path(p, Y, fields)
    for a, b in zip(path, path[1:]):
        # the eigenvector carrying a label barely moves over 0.01 mT
        for m in SPIN_PROJECTIONS:
            va = a.vectors[:, a.labels.index(m)]
            vb = b.vectors[:, b.labels.index(m)]
            assert abs(np.vdot(va, vb)) > 0.99


def test_level_path_matches_pointwise_eigenlevels():
    p = HamiltonianParams(35.0)
    fields = [3.0, 16.0, 17.0]
    path = level_path(p, Y, fields)
    for b, ls in zip(fields, path):
        single = eigenlevels(p.with_field((0.0, b, 0.0)))
        assert single.labels == ls.labels
        assert np.allclose(single.energies, ls.energies, atol=1e-12)


def test_labeling_error_is_a_runtime_error():
    assert issubclass(LabelingError, RuntimeError)


# -- temperature model ----------------------------------------------------


def test_de_room_temperature():
    assert d_e_of_temperature(ZfsTemperatureModel(), 300.0) == pytest.approx(215.0)


def test_de_one_mhz_up():
    assert 2 * d_e_of_temperature(ZfsTemperatureModel(), 300.0 - 1 / 2.1) == pytest.approx(431.0)


def test_de_125k():
    assert d_e_of_temperature(ZfsTemperatureModel(), 125.0) == pytest.approx(398.75)


@pytest.mark.parametrize("t", [0.0, -5.0, 600.0, 1e4])
def test_de_out_of_range(t):
    with pytest.raises(ValueError):
        d_e_of_temperature(ZfsTemperatureModel(), t)


@settings(max_examples=30, deadline=None)
@given(t1=st.floats(1, 599), t2=st.floats(1, 599))
def test_de_linear_in_t(t1, t2):
    m = ZfsTemperatureModel()
    d1, d2 = d_e_of_temperature(m, t1), d_e_of_temperature(m, t2)
    assert 2 * (d1 - d2) == pytest.approx(-2.1 * (t1 - t2), abs=1e-9)


# -- transitions ----------------------------------------------------------


def test_zero_field_dm2_transition_is_doublet_splitting():
    trs = transitions(HamiltonianParams(35.0), 2)
    pair = next(t for t in trs if set(t.pair) == {-1.5, 0.5})
    assert pair.frequency == pytest.approx(70.0)
    assert all(abs(t.delta_m) == 2 for t in trs)


def test_kramers_degeneracy_at_zero_field():
    for d in (35.0, 215.0, -80.0):
        trs = transitions(HamiltonianParams(d))
        t = next(t for t in trs if set(t.pair) == {-0.5, 0.5})
        assert t.frequency == pytest.approx(0.0, abs=1e-12)


def test_six_transitions_with_positive_frequencies():
    trs = transitions(HamiltonianParams(35.0, 2.0, (0, 7.0, 0)))
    assert len(trs) == 6
    for t in trs:
        assert t.frequency > 0
        assert t.delta_m == round(t.to_label - t.from_label)


def test_dm2_frequency_near_16mT():
    trs = transitions(HamiltonianParams(35.0, 2.0, (0, 16.4, 0)), 2)
    f = next(t.frequency for t in trs if set(t.pair) == {-1.5, 0.5})
    w = np.linalg.eigvalsh(build_hamiltonian(HamiltonianParams(35.0, 2.0, (0, 16.4, 0))))
    assert f == pytest.approx(w[2] - w[0], abs=1e-9)
    # 16.4 mT sits 0.6 mT above the exact 921 MHz resonance
    assert f == pytest.approx(921.0, rel=0.05)


# -- resonance fields -----------------------------------------------------


def test_resonance_fields_pure_zeeman():
    roots = resonance_fields(921.0, HamiltonianParams(0.0), Y, (0.0, 25.0), 2)
    fields = {round(b, 6) for b, _ in roots}
    assert len(fields) == 1
    assert roots[0][0] == pytest.approx(921.0 / (2 * 2 * MU_B), abs=1e-4)


def test_resonance_fields_ground_state():
    roots = resonance_fields(921.0, HamiltonianParams(35.0), Y, (0.0, 25.0), 2)
    assert len(roots) == 2
    for b, tr in roots:
        assert b == pytest.approx(GS_ROOTS[tuple(sorted(tr.pair))], abs=1e-4)
    assert 15.0 < roots[0][0] < 16.5 < roots[1][0] < 17.5


def test_resonance_fields_excited_state_125k():
    d_e = d_e_of_temperature(ZfsTemperatureModel(), 125.0)
    roots = resonance_fields(921.0, HamiltonianParams(d_e), Y, (0.0, 25.0), 2)
    assert len(roots) == 2
    for b, tr in roots:
        assert b == pytest.approx(ES_125K_ROOTS[tuple(sorted(tr.pair))], abs=1e-4)


def test_resonance_frequencies_reevaluate_to_drive():
    for d in (35.0, 398.75, 215.0):
        for b, tr in resonance_fields(921.0, HamiltonianParams(d), Y, (0.0, 25.0), 2):
            ls = eigenlevels(HamiltonianParams(d, 2.0, (0, b, 0)))
            assert abs(pair_frequency(ls, tr.pair) - 921.0) < 1e-3
            assert abs(tr.frequency - 921.0) < 1e-3


def test_resonance_fields_empty_range():
    assert resonance_fields(921.0, HamiltonianParams(35.0), Y, (5.0, 5.0), 2) == []
    assert resonance_fields(921.0, HamiltonianParams(35.0), Y, (0.0, 1.0), 2) == []


def test_resonance_fields_rejects_bad_input():
    with pytest.raises(ValueError):
        resonance_fields(0.0, HamiltonianParams(35.0), Y, (0.0, 5.0), 2)
    with pytest.raises(ValueError):
        resonance_fields(921.0, HamiltonianParams(35.0), Y, (0.0, np.inf), 2)
