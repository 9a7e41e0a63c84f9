import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from resbasis import (
    AnnulusStressBasis,
    FEMStressBasis,
    StressFieldNodal,
    construct_hypothetical,
    fit,
    fit_nodal,
    generate_rect_mesh,
)
from resbasis.fields import family_example1


@pytest.fixture(scope="module")
def fem_est():
    return FEMStressBasis(mesh=generate_rect_mesh(1, 1, 6, 6), n_modes=8).fit()


@pytest.fixture(scope="module")
def ann_est():
    return AnnulusStressBasis(m=3, n_modes=8).fit()


def test_params_and_clone():
    est = FEMStressBasis(n_modes=4, method="dense")
    assert est.get_params() == {"mesh": None, "n_modes": 4, "method": "dense"}
    assert clone(est).get_params() == est.get_params()


def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        AnnulusStressBasis().transform(np.zeros((1, 3)))


def test_fem_requires_mesh():
    with pytest.raises(TypeError):
        FEMStressBasis().fit()


def test_fem_components_orthonormal(fem_est):
    G = fem_est._inner(fem_est.components_, fem_est.components_)
    assert np.allclose(G, np.eye(8), atol=1e-10)


def test_fem_round_trip(fem_est, rng):
    A = rng.normal(size=(3, 8))
    X = fem_est.inverse_transform(A)
    assert np.allclose(fem_est.transform(X), A, atol=1e-10)
    assert fem_est.score(X) == pytest.approx(1.0, abs=1e-10)


def test_fem_matches_fit_nodal(fem_est, rng):
    mesh = fem_est.mesh
    vals = rng.normal(size=(mesh.n_nodes, 3))
    direct = fit_nodal(StressFieldNodal(mesh, vals), fem_est.basis_)
    X = vals.reshape(1, -1)
    assert np.allclose(fem_est.transform(X)[0], direct.coefficients, rtol=1e-10)
    assert np.allclose(fem_est.error_curve(X)[0], direct.errors, rtol=1e-9)


def test_feature_count_checked(fem_est):
    with pytest.raises(ValueError, match="features"):
        fem_est.transform(np.zeros((1, 5)))


def test_too_many_coefficients(fem_est):
    with pytest.raises(ValueError):
        fem_est.inverse_transform(np.zeros((1, 9)))


def test_annulus_matches_fit(ann_est):
    target = construct_hypothetical(family_example1)
    X = ann_est.sample(target)
    direct = fit(target, ann_est.basis_)
    assert np.allclose(ann_est.transform(X)[0], direct.coefficients, rtol=1e-10)
    assert ann_est.error_curve(X)[0, 4] == pytest.approx(direct.error(5), rel=1e-9)


def test_annulus_sample_rejects_other_wavenumber(ann_est):
    from resbasis import shrink_fit

    with pytest.raises(ValueError):
        ann_est.sample(shrink_fit())


def test_fit_transform(rng):
    est = AnnulusStressBasis(m=2, n_modes=3)
    est.fit()
    X = est.inverse_transform(rng.normal(size=(2, 3)))
    assert np.allclose(clone(est).fit_transform(X), est.transform(X), atol=1e-12)
