import re

import numpy as np
import pytest

from resbasis import SpectralBasisFEM, StressFieldNodal, generate_rect_mesh
from resbasis.cli import OUTPUT_ENV, main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def printed(out, name):
    return {int(k): float(v) for k, v in re.findall(rf"{name}_(\d+) = ([-+0-9.eE]+)", out)}


# -- basis-fem ----------------------------------------------------------------------


def test_basis_fem_square(tmp_path, capsys):
    code, out, _ = run(capsys, "basis-fem", "--square", 1, "--nx", 20, "--ny", 20, "-k", 10, "--out", tmp_path)
    assert code == 0
    lam = printed(out, "lambda")
    assert len(lam) == 10
    assert abs(lam[1] / 59.12 - 1) < 5e-3
    for name in ("eigenvalues.csv", "mode_0.csv", "mode_0.vtk", "mesh.json"):
        assert (tmp_path / name).is_file()


def test_basis_fem_annulus_degenerate_pair(tmp_path, capsys):
    code, out, _ = run(
        capsys, "basis-fem", "--annulus", 0.1, 0.3, "--nr", 8, "--nt", 48, "-k", 3, "--no-vtk", "--out", tmp_path
    )
    assert code == 0
    lam = printed(out, "lambda")
    assert abs(lam[2] / lam[3] - 1) < 5e-3
    assert not list(tmp_path.glob("*.vtk"))


def test_basis_fem_missing_mesh(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    code, _, err = run(capsys, "basis-fem", "--mesh", missing, "--out", tmp_path / "o")
    assert code == 2
    assert "nope.json" in err


def test_basis_fem_needs_one_geometry(capsys):
    code, _, _ = run(capsys, "basis-fem", "--square", 1, "--annulus", 0.1, 0.3)
    assert code == 2


# -- basis-annulus and verify -------------------------------------------------------


@pytest.fixture(scope="module")
def m3_bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("m3")
    assert main(["basis-annulus", "-m", "3", "-k", "50", "--out", str(out)]) == 0
    return out


def test_basis_annulus_zero_crossings(m3_bundle, capsys):
    # rerun into a scratch dir to capture output; the bundle fixture is reused below
    code, out, _ = run(capsys, "basis-annulus", "-m", 3, "-k", 5, "--out", m3_bundle.parent / "m3_small")
    assert code == 0
    zc = [int(z) for z in re.findall(r"zero_crossings = (\d+)", out)]
    assert zc == [2, 3, 4, 5, 6]
    assert len(list(m3_bundle.glob("mode_*.csv"))) == 50
    import json

    man = json.loads((m3_bundle / "manifest.json").read_text())
    assert man["count"] == 50


def test_basis_annulus_m0_shear_free(tmp_path, capsys):
    code, _, _ = run(capsys, "basis-annulus", "-m", 0, "-k", 100, "--out", tmp_path)
    assert code == 0
    for k in range(100):
        data = np.loadtxt(tmp_path / f"mode_{k}.csv", delimiter=",", skiprows=1)
        assert np.abs(data[:, 2]).max() <= 1e-10 * np.abs(data[:, [1, 3]]).max()


@pytest.mark.parametrize("argv", [["-m", "3", "-k", "0"], ["-m", "-1", "-k", "3"]])
def test_basis_annulus_usage_errors(capsys, tmp_path, argv):
    code, _, _ = run(capsys, "basis-annulus", *argv, "--out", tmp_path)
    assert code == 2


def test_verify_fresh_annulus(m3_bundle, capsys):
    code, out, _ = run(capsys, "verify", m3_bundle)
    assert code == 0
    assert "FAIL" not in out
    assert out.count("PASS") >= 5


def test_verify_detects_scaled_mode(m3_bundle, tmp_path, capsys):
    import shutil

    bad = tmp_path / "bad"
    shutil.copytree(m3_bundle, bad)
    path = bad / "mode_4.csv"
    header = path.read_text().splitlines()[0]
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    data[:, 1:] *= 2
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.16e")
    code, out, err = run(capsys, "verify", bad)
    assert code == 1
    assert "FAIL  gram" in out
    assert "(4, 4)" in err


def test_verify_fem_with_compare(tmp_path, capsys):
    coarse, fine = tmp_path / "c", tmp_path / "f"
    assert main(["basis-fem", "--square", "1", "--nx", "5", "--ny", "5", "-k", "10", "--no-vtk", "--out", str(coarse)]) == 0
    assert main(["basis-fem", "--square", "1", "--nx", "40", "--ny", "40", "-k", "10", "--no-vtk", "--out", str(fine)]) == 0
    capsys.readouterr()
    code, out, _ = run(capsys, "verify", fine, "--compare", coarse, "--mean-tol", 1e-4)
    assert "eigenvalue drift" in out
    drifts = [float(d) for d in re.findall(r"\(([-+0-9.]+)%\)", out)]
    assert len(drifts) == 10
    # the coarse mesh underestimates the converged spectrum
    assert drifts[0] < 0
    assert code == 0


def test_verify_not_a_bundle(tmp_path, capsys):
    code, _, err = run(capsys, "verify", tmp_path)
    assert code == 2
    assert "not a basis bundle" in err


# -- fit ----------------------------------------------------------------------------


def test_fit_example2(tmp_path, capsys):
    code, out, _ = run(capsys, "fit", "--target", "example2", "-m", 3, "-N", 50, "--out", tmp_path)
    assert code == 0
    E = printed(out, "E")
    assert E[17] < 0.01
    conv = np.loadtxt(tmp_path / "convergence.csv", delimiter=",", skiprows=1)
    ratios = conv[1:, 1] / conv[:-1, 1]
    assert int(conv[1 + np.argmin(ratios), 0]) == 13  # sharpest single-step drop
    for n in (5, 13, 50):
        assert (tmp_path / f"reconstruction_N{n}.csv").is_file()


def test_fit_thermo(tmp_path, capsys):
    code, out, _ = run(capsys, "fit", "--target", "thermo", "-m", 3, "-N", 50, "--out", tmp_path)
    assert code == 0
    assert printed(out, "E")[7] < 0.01


def test_fit_imported_missing(capsys):
    code, _, err = run(capsys, "fit", "--target", "imported:missing.csv")
    assert code == 2
    assert "missing.csv" in err


def test_fit_wrong_wavenumber(capsys, tmp_path):
    code, _, _ = run(capsys, "fit", "--target", "shrink", "-m", 3, "--out", tmp_path)
    assert code == 2


def test_fit_unknown_target(capsys, tmp_path):
    code, _, _ = run(capsys, "fit", "--target", "example9", "--out", tmp_path)
    assert code == 2


def test_fit_imported_field(tmp_path, capsys, rng):
    mesh = generate_rect_mesh(1, 1, 4, 4)
    mesh.to_json(tmp_path / "mesh.json")
    assert main(["basis-fem", "--mesh", str(tmp_path / "mesh.json"), "-k", "12", "--no-vtk", "--out", str(tmp_path / "b")]) == 0
    basis = SpectralBasisFEM.load(tmp_path / "b", mesh)
    vals = np.tensordot(rng.normal(size=10), basis.stress[:10], axes=1)
    StressFieldNodal(mesh, vals).to_csv(tmp_path / "field.csv")
    capsys.readouterr()
    code, out, _ = run(
        capsys, "fit", "--target", f"imported:{tmp_path / 'field.csv'}", "--mesh", tmp_path / "mesh.json",
        "--basis", tmp_path / "b", "-N", 12, "--out", tmp_path / "fit",
    )  # fmt: skip
    assert code == 0
    assert printed(out, "E")[10] < 1e-8
    assert (tmp_path / "fit" / "reconstruction_N10.csv").is_file()


def test_fit_imported_caps_mode_count(tmp_path, capsys):
    mesh = generate_rect_mesh(1, 1, 2, 2)
    mesh.to_json(tmp_path / "mesh.json")
    StressFieldNodal(mesh, np.ones((mesh.n_nodes, 3))).to_csv(tmp_path / "field.csv")
    code, _, _ = run(
        capsys, "fit", "--target", f"imported:{tmp_path / 'field.csv'}", "--mesh", tmp_path / "mesh.json",
        "--out", tmp_path / "fit",
    )  # fmt: skip
    assert code == 0
    conv = np.loadtxt(tmp_path / "fit" / "convergence.csv", delimiter=",", skiprows=1)
    assert 1 <= len(conv) < 1000


# -- determinism and output directory -----------------------------------------------


def test_deterministic_outputs(tmp_path, capsys):
    for d in ("a", "b"):
        assert main(["fit", "--target", "example1", "-N", "20", "--out", str(tmp_path / d)]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_output_dir_from_environment(tmp_path, monkeypatch, capsys):
    target = tmp_path / "from-env"
    monkeypatch.setenv(OUTPUT_ENV, str(target))
    code, _, _ = run(capsys, "basis-annulus", "-m", 2, "-k", 2)
    assert code == 0
    assert (target / "manifest.json").is_file()


def test_no_command(capsys):
    code, _, _ = run(capsys)
    assert code == 2
