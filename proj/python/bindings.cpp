#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "semirec/scenarios.hpp"

namespace py = pybind11;
using namespace semirec;

namespace {

using Nonlinearity = std::map<int, std::vector<double>>;

NonlinearitySeries series_from(const Mesh& mesh, const Nonlinearity& a) {
  int order = 2;
  for (const auto& [k, v] : a) order = std::max(order, k);
  NonlinearitySeries s(mesh.num_triangles(), order);
  for (const auto& [k, v] : a) s = s.with_coefficient(k, v);
  return s;
}

std::optional<Disk> disk_from(const std::optional<std::tuple<double, double, double>>& d) {
  if (!d) return std::nullopt;
  return Disk{{std::get<0>(*d), std::get<1>(*d)}, std::get<2>(*d)};
}

Eigen::MatrixXd vertices_of(const Mesh& m) {
  Eigen::MatrixXd v(m.num_vertices(), 2);
  for (std::size_t i = 0; i < m.num_vertices(); ++i) v.row(static_cast<Eigen::Index>(i)) << m.vertices()[i].x, m.vertices()[i].y;
  return v;
}

Eigen::MatrixXi triangles_of(const Mesh& m) {
  Eigen::MatrixXi t(m.num_triangles(), 3);
  for (std::size_t i = 0; i < m.num_triangles(); ++i)
    for (int k = 0; k < 3; ++k) t(static_cast<Eigen::Index>(i), k) = m.triangles()[i][k];
  return t;
}

}  // namespace

PYBIND11_MODULE(_semirec, m) {
  m.doc() = "Semilinear partial-data forward solver, linearization and recovery";

  py::register_exception<Error>(m, "SemirecError", PyExc_RuntimeError);

  py::class_<Mesh>(m, "Mesh")
      .def_property_readonly("vertices", &vertices_of)
      .def_property_readonly("triangles", &triangles_of)
      .def_property_readonly("gamma_nodes", &Mesh::gamma_nodes)
      .def_property_readonly("num_vertices", &Mesh::num_vertices)
      .def_property_readonly("num_triangles", &Mesh::num_triangles)
      .def_property_readonly("has_cavity", &Mesh::has_cavity)
      .def("total_area", &Mesh::total_area)
      .def("max_edge_length", &Mesh::max_edge_length);

  m.def(
      "disk_mesh",
      [](double radius, double h, std::optional<std::tuple<double, double, double>> cavity, double gamma_start,
         double gamma_end) { return tag_gamma(build_disk_mesh(radius, disk_from(cavity), h), {gamma_start, gamma_end}); },
      py::arg("radius") = 1.0, py::arg("h") = 0.1, py::arg("cavity") = py::none(), py::arg("gamma_start") = 0.0,
      py::arg("gamma_end") = 2.0 * 3.14159265358979323846,
      "Disk (or disk minus a cavity (x, y, r)) mesh with Gamma = [gamma_start, gamma_end] in radians.");

  m.def("trig_trace", [](const Mesh& mesh, int mode, bool sine, double amp) {
    return trig_trace(mesh, mode, sine, amp).values();
  });
  m.def("bump_trace", [](const Mesh& mesh, double center, double half_width, double amp) {
    return bump_trace(mesh, center, half_width, amp).values();
  });
  m.def("window_trace", [](const Mesh& mesh, double amp) { return window_trace(mesh, amp).values(); });

  m.def(
      "solve_semilinear",
      [](const Mesh& mesh, const std::vector<double>& sigma, const Nonlinearity& a, const Eigen::VectorXd& f) {
        NewtonOptions o;
        o.small_data_threshold = std::numeric_limits<double>::infinity();
        auto [u, rep] = solve_semilinear(mesh, PiecewiseCoefficient(sigma), series_from(mesh, a), BoundaryData(f), o);
        return std::pair{u, rep.iterations};
      },
      py::arg("mesh"), py::arg("sigma"), py::arg("a"), py::arg("f"),
      "Newton solve; returns (nodal solution, iterations). `a` maps k to per-triangle a_k.");

  m.def(
      "dn_derivative",
      [](const Mesh& mesh, const std::vector<double>& sigma, const Nonlinearity& a, const Eigen::VectorXd& f1,
         const Eigen::VectorXd& f2, int p, int q) {
        const LinearSolver lin(mesh, PiecewiseCoefficient(sigma));
        const auto series = series_from(mesh, a);
        const auto lat = build_lattice(lin, series, BoundaryData(f1), BoundaryData(f2), p + q);
        return dn_derivative(lin, series, lat, p, q).values;
      },
      py::arg("mesh"), py::arg("sigma"), py::arg("a"), py::arg("f1"), py::arg("f2"), py::arg("p"), py::arg("q"));

  m.def(
      "fd_dn_derivative",
      [](const Mesh& mesh, const std::vector<double>& sigma, const Nonlinearity& a, const Eigen::VectorXd& f1,
         const Eigen::VectorXd& f2, int p, int q, double step) {
        FdOptions o;
        o.step = step;
        return fd_dn_derivative(mesh, PiecewiseCoefficient(sigma), series_from(mesh, a), BoundaryData(f1),
                                BoundaryData(f2), p, q, o)
            .values;
      },
      py::arg("mesh"), py::arg("sigma"), py::arg("a"), py::arg("f1"), py::arg("f2"), py::arg("p"), py::arg("q"),
      py::arg("step") = 1e-2);

  m.def("chain_rule_terms", [](int p, int q) {
    std::vector<std::pair<std::vector<std::pair<int, int>>, long long>> out;
    for (const auto& t : chain_rule_terms(p, q)) {
      std::vector<std::pair<int, int>> blocks;
      for (const auto& b : t.blocks) blocks.emplace_back(b.p, b.q);
      out.emplace_back(std::move(blocks), t.count);
    }
    return out;
  });

  m.def(
      "localized_potentials",
      [](const Mesh& mesh, const std::vector<double>& sigma, std::vector<int> d1, std::vector<int> d2, int steps,
         double delta0) {
        const auto pair = build_energy_operators(mesh, PiecewiseCoefficient(sigma), RegionMask(mesh, std::move(d1)),
                                                 RegionMask(mesh, std::move(d2)));
        std::vector<py::dict> out;
        for (const auto& s : localized_potential_sequence(pair, steps, delta0).steps) {
          py::dict d;
          d["delta"] = s.delta;
          d["eigenvalue"] = s.eigenvalue;
          d["energy_d1"] = s.energy_d1;
          d["energy_d2"] = s.energy_d2;
          d["phi"] = s.phi.values();
          out.push_back(std::move(d));
        }
        return out;
      },
      py::arg("mesh"), py::arg("sigma"), py::arg("d1"), py::arg("d2"), py::arg("steps"), py::arg("delta0") = 1e-2);

  m.def("triangles_in_disk", [](const Mesh& mesh, double x, double y, double r) {
    return region_mask_from_disk(mesh, {{x, y}, r}).triangles();
  });

  m.def(
      "run_scenario",
      [](const std::string& config, int jobs, const std::optional<std::string>& out) {
        const ScenarioConfig c = parse_config(config);
        RunReport r;
        {
          py::gil_scoped_release release;
          r = run_scenario(c, jobs);
          if (out) write_outputs(r, c, *out);
        }
        return r.summary(c).dump();
      },
      py::arg("config"), py::arg("jobs") = 1, py::arg("out") = py::none(),
      "Runs a YAML scenario config; returns summary.json as a string.");

  m.def("validate_config", [](const std::string& config) { return parse_config(config).scenario; });

  m.def("generate_synthetic_data", [](const std::string& config) { return generate_synthetic_data(parse_config(config)).dump(); });
}
