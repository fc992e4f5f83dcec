import numpy as np
import pytest

from mohardy.corpus import (FAMILIES, atom_function, band_limit, generate_corpus,
                            shipped_atom_descriptors, shipped_atom_functions, shipped_atoms)
from mohardy.errors import DomainError, ResolutionError
from mohardy.grid import Grid
from mohardy.growth import builtin_family
from mohardy.atoms import validate_atom

SPEC = {"bumps": 3, "spikes": 3, "sawtooth": 2, "random_smooth": {"count": 2, "cutoff": 2.0},
        "atoms": 2}


def test_corpus_is_deterministic(grid1):
    a = generate_corpus(7, SPEC, grid1)
    b = generate_corpus(7, SPEC, grid1)
    assert [x.function.to_bytes() for x in a] == [x.function.to_bytes() for x in b]
    assert [x.tag for x in a] == [x.tag for x in b]


def test_seed_changes_corpus(grid1):
    a = generate_corpus(7, {"bumps": 2}, grid1)
    b = generate_corpus(8, {"bumps": 2}, grid1)
    assert a[0].function.to_bytes() != b[0].function.to_bytes()


def test_empty_spec(grid1):
    assert generate_corpus(7, {}, grid1) == []
    assert generate_corpus(7, {"bumps": 0}, grid1) == []


def test_families_and_counts(grid1):
    items = generate_corpus(1, SPEC, grid1)
    assert [x.family for x in items] == ["bumps"] * 3 + ["spikes"] * 3 + ["sawtooth"] * 2 + \
        ["random_smooth"] * 2 + ["atoms"] * 2
    assert set(x.family for x in items) <= set(FAMILIES)


def test_prefix_stability(grid1):
    small = generate_corpus(3, SPEC, grid1)
    big = generate_corpus(3, {k: ({"count": 2 * v["count"], "cutoff": v["cutoff"]}
                                  if isinstance(v, dict) else 2 * v) for k, v in SPEC.items()}, grid1)
    for fam in FAMILIES:
        s = [x.function.to_bytes() for x in small if x.family == fam]
        b = [x.function.to_bytes() for x in big if x.family == fam]
        assert b[:len(s)] == s


def test_hyphenated_name(grid1):
    a = generate_corpus(2, {"random-smooth": 1}, grid1)
    b = generate_corpus(2, {"random_smooth": 1}, grid1)
    assert a[0].function.to_bytes() == b[0].function.to_bytes()


def test_bad_specs(grid1):
    with pytest.raises(DomainError):
        generate_corpus(1, {"noise": 2}, grid1)
    with pytest.raises(DomainError):
        generate_corpus(1, {"bumps": -1}, grid1)


def test_random_smooth_is_band_limited(grid1):
    (item,) = generate_corpus(5, {"random_smooth": {"count": 1, "cutoff": 1.5}}, grid1)
    v = item.function.values
    assert np.max(np.abs(v)) == pytest.approx(1.0)
    F = np.fft.fft(v)
    xi = np.abs(np.fft.fftfreq(len(v), grid1.spacing))
    assert np.max(np.abs(F[xi > 1.5])) < 1e-10 * np.max(np.abs(F))


def test_band_limit_keeps_low_modes():
    x = np.arange(64) / 64.0
    v = np.sin(2 * np.pi * 2 * x) + np.sin(2 * np.pi * 20 * x)
    out = band_limit(v, 1 / 64, 5.0)
    assert np.allclose(out, np.sin(2 * np.pi * 2 * x), atol=1e-12)


def test_spikes_and_bumps_shapes(grid1):
    for item in generate_corpus(11, {"spikes": 4}, grid1):
        v = item.function.values
        assert np.count_nonzero(v) == item.params["cells"]
        assert np.max(v) == pytest.approx(item.params["height"])
    for item in generate_corpus(11, {"bumps": 4}, grid1):
        assert np.max(np.abs(item.function.values)) <= abs(item.params["amplitude"]) + 1e-12


def test_shipped_atoms_have_exact_moments(grid1):
    descs = shipped_atom_descriptors()
    items = shipped_atom_functions(grid1)
    assert len(items) == len(descs)
    x = grid1.coordinates()[..., 0]
    for f, cube, order in items:
        v = f.values
        assert np.max(np.abs(v)) == pytest.approx(1.0)
        inside = np.zeros(v.shape, bool)
        inside[grid1.index_box(cube)] = True
        assert np.all(v[~inside] == 0)
        for d in range(order + 1):
            assert abs(np.sum(v * (x - cube.center[0]) ** d)) < 1e-12 * np.sum(np.abs(v))


def test_shipped_atoms_validate(grid1):
    for name in ("power", "theta"):
        phi = builtin_family(name)
        for a in shipped_atoms(grid1, phi):
            assert validate_atom(a, phi).valid


def test_coarse_grid_skips_small_atoms():
    coarse = Grid.box(-4.0, 4.0, 64)
    assert len(shipped_atom_functions(coarse)) < len(shipped_atom_descriptors())
    with pytest.raises(ResolutionError):
        atom_function(coarse, [0.0], 0.125, 0)
    with pytest.raises(DomainError):
        atom_function(Grid.box(-4.0, 4.0, 512), [3.9], 0.5, 0)


def test_shipped_atoms_2d(grid2):
    items = shipped_atom_functions(grid2)
    assert items
    for f, cube, order in items:
        assert f.values.shape == grid2.shape
        assert cube.dimension == 2
