import math

import numpy as np
import pytest

import qdgf


@pytest.fixture(scope="module")
def point():
    grid = qdgf.build_grid(1, [3.0], [61], 1, qdgf.FieldKind.complex)
    kernel = qdgf.gaussian_kernel(1.0)
    cov = qdgf.CovarianceOperator(grid, kernel)
    spec = qdgf.build_m_spectrum(cov, qdgf.point_intensity_form(grid))
    return grid, kernel, cov, spec


def test_point_spectrum(point):
    grid, kernel, cov, spec = point
    assert spec.g_plus == 1
    assert abs(spec.leading(1) - 1.0) < 1e-6
    lam, profile = qdgf.point_prediction(kernel, grid)
    beta = qdgf.fundamental_profile_field(spec, cov)
    cos = abs(qdgf.inner_product(profile, beta)) / (profile.norm() * beta.norm())
    assert lam == 1.0
    assert cos > 0.999


def test_sampler_roundtrip(point):
    grid, _, cov, spec = point
    sampler = qdgf.SpectralSampler(cov, spec)
    rng = qdgf.RngStream(3, 0)
    t = sampler.draw(rng)
    phi = sampler.reconstruct(t)
    assert phi.values.shape == (61,)
    # point intensity at the origin equals the spectral quadratic value
    assert abs(phi.values[grid.origin_node]) ** 2 == pytest.approx(sampler.quadratic_value(t), rel=1e-8)
    geo = sampler.geometry(t, 1)
    assert 0.0 <= geo.distance <= 2.0


def test_conditional_ensemble_is_reproducible(point):
    _, _, cov, spec = point
    sampler = qdgf.SpectralSampler(cov, spec)
    a = qdgf.conditional_ensemble(sampler, 1, 3.0, qdgf.SamplingMethod.rejection, 200, seed=5)
    b = qdgf.conditional_ensemble(sampler, 1, 3.0, qdgf.SamplingMethod.rejection, 200, seed=5)
    assert [s.q for s in a.samples] == [s.q for s in b.samples]
    assert min(s.q for s in a.samples) > 3.0
    assert abs(a.tail_probability - math.exp(-3.0)) < 4 * a.tail_error


def test_tails():
    p = qdgf.EigenvalueProfile.from_values(qdgf.FieldKind.complex, [2.0, 1.0])
    assert qdgf.tail_probability(p, 1.0).value == pytest.approx(0.845181878254, abs=1e-10)
    closed = qdgf.tail_probability(p, 1.0, qdgf.TailMethod.closed_form).value
    assert closed == pytest.approx(0.845181878254, abs=1e-10)
    r = qdgf.EigenvalueProfile.from_values(qdgf.FieldKind.real, [1.0])
    assert qdgf.tail_probability(r, 4.0).value == pytest.approx(math.erfc(math.sqrt(2.0)), abs=1e-12)
    onset = qdgf.asymptotic_onset(p)
    assert onset.found


def test_helicity_constants():
    plus, minus, g = qdgf.helicity_eigenvalues(3.0, 1.0)
    assert plus == pytest.approx(math.sqrt(5.0))
    assert minus == -plus and g == 3
    rep = qdgf.curl_curl_identity_check(qdgf.flow_kernel(3.0, 1.0), 1, [0.2, 0.1])
    assert rep.limit == pytest.approx(10.0)
    assert rep.order[0] > 1.9


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        qdgf.build_grid(1, [1.0], [4], 1, qdgf.FieldKind.real)


def test_cli_entry(tmp_path):
    rc = qdgf.run("tail", "--kind", "complex", "--eigs", "1", "--u", "0.5", "--output-dir", tmp_path / "out")
    assert rc == 0
    rows = (tmp_path / "out" / "tail.csv").read_text().splitlines()
    header = rows[0].split(",")
    value = float(rows[1].split(",")[header.index("closed_form")])
    assert value == pytest.approx(np.exp(-0.5), rel=1e-12)
