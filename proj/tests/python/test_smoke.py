import json
import math

import numpy as np
import pytest

import semirec


@pytest.fixture(scope="module")
def mesh():
    return semirec.disk_mesh(h=0.25, gamma_end=math.pi)


def test_mesh_shapes(mesh):
    assert mesh.vertices.shape == (mesh.num_vertices, 2)
    assert mesh.triangles.shape == (mesh.num_triangles, 3)
    assert mesh.total_area() == pytest.approx(math.pi, rel=0.05)
    assert len(mesh.gamma_nodes) > 0


def test_linear_solve_preserves_constants():
    mesh = semirec.disk_mesh(h=0.25)
    sigma = [1.0] * mesh.num_triangles
    f = np.full(len(mesh.gamma_nodes), 0.3)
    u, iterations = semirec.solve_semilinear(mesh, sigma, {}, f)
    assert np.allclose(u, 0.3, atol=1e-10)
    assert iterations <= 1


def test_first_order_derivative_is_linear_map(mesh):
    sigma = [1.0] * mesh.num_triangles
    a = {2: [1.0] * mesh.num_triangles}
    f1 = semirec.trig_trace(mesh, 1, False, 1.0)
    f2 = semirec.trig_trace(mesh, 1, True, 1.0)
    d1 = semirec.dn_derivative(mesh, sigma, a, f1, f2, 1, 0)
    d2 = semirec.dn_derivative(mesh, sigma, a, 2.0 * f1, f2, 1, 0)
    assert np.allclose(d2, 2.0 * d1)


def test_second_order_matches_finite_differences(mesh):
    sigma = [1.0] * mesh.num_triangles
    a = {2: [1.0] * mesh.num_triangles}
    f1 = semirec.trig_trace(mesh, 1, False, 1.0)
    f2 = semirec.trig_trace(mesh, 2, True, 1.0)
    exact = semirec.dn_derivative(mesh, sigma, a, f1, f2, 2, 0)
    fd = semirec.fd_dn_derivative(mesh, sigma, a, f1, f2, 2, 0, step=1e-2)
    assert np.max(np.abs(exact - fd)) <= 1e-2 * np.max(np.abs(exact))


def test_chain_rule_counts():
    # partitions of a 3-element set into at least two blocks: 3 + 1
    counts = sorted(c for _, c in semirec.chain_rule_terms(3, 0))
    assert counts == [1, 3]


def test_localized_potentials_sequence(mesh):
    sigma = [1.0] * mesh.num_triangles
    d1 = semirec.triangles_in_disk(mesh, 0.0, 0.6, 0.3)
    d2 = semirec.triangles_in_disk(mesh, 0.0, -0.5, 0.3)
    steps = semirec.localized_potentials(mesh, sigma, d1, d2, 6)
    assert len(steps) == 6
    ratios = [s["energy_d1"] / s["energy_d2"] for s in steps]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))


def test_run_scenario_from_dict(tmp_path):
    config = {"scenario": "linearization_check", "mesh": {"h": 0.25},
              "linearization": {"configurations": 2, "max_order": 2, "series_order": 2}}
    summary = semirec.run_scenario(config, jobs=2, out=str(tmp_path))
    assert summary["scenario"] == "linearization_check"
    assert summary["schema_version"] == 1
    assert json.loads((tmp_path / "summary.json").read_text()) == summary


def test_config_errors_raise():
    with pytest.raises(semirec.SemirecError):
        semirec.validate_config("scenario: unknown\n")


def test_generate_synthetic_data():
    data = semirec.generate_synthetic_data(
        "scenario: recover_coefficients\nmesh: {h: 0.25}\nphantom: {a: {2: 1.0}}\n")
    assert data["schema_version"] == 1
    assert len(data["experiments"]) > 0
