#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rmtcluster/clt.hpp"
#include "rmtcluster/clustering.hpp"
#include "rmtcluster/distance.hpp"
#include "rmtcluster/error.hpp"
#include "rmtcluster/io.hpp"
#include "rmtcluster/sampling.hpp"
#include "rmtcluster/scenario.hpp"

namespace py = pybind11;
using namespace rmtcluster;

namespace {

CovarianceModel model_from_matrix(const CMat& R) {
    CovarianceModel m;
    m.matrix = hermitian_part(R);
    auto [lam, E] = eig_hermitian(m.matrix);
    m.eigenvalues = std::move(lam);
    m.eigenvectors = std::move(E);
    return m;
}

py::dict row_to_dict(const SweepRow& r) {
    py::dict d;
    d["axis_value"] = r.axis_value;
    d["p_theory"] = r.theory.p;
    d["se_theory"] = r.theory.se;
    d["p_emp_consistent"] = r.consistent.p;
    d["se_emp_consistent"] = r.consistent.se;
    d["p_emp_plugin"] = r.plugin.p;
    d["se_emp_plugin"] = r.plugin.se;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Consistent log-Euclidean distances between sample covariance matrices";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);

    py::class_<SpectralDecomposition>(m, "SpectralDecomposition")
        .def_readonly("eigenvalues", &SpectralDecomposition::eigenvalues)
        .def_readonly("eigenvectors", &SpectralDecomposition::eigenvectors)
        .def_readonly("mu_roots", &SpectralDecomposition::mu_roots)
        .def_readonly("N", &SpectralDecomposition::N);

    m.def("pathloss_db", [](double d) { return pathloss_db(d); }, py::arg("distance_3d_m"));
    m.def("steering_vector", &steering_vector, py::arg("theta"), py::arg("M"));
    m.def(
        "ula_covariance",
        [](double theta_bar, int M, double beta_db, double angular_std_rad, double noise_power_dbm,
           int quadrature_order) {
            ScenarioConfig c;
            c.M = M;
            c.angular_std_rad = angular_std_rad;
            c.noise_power_dbm = noise_power_dbm;
            c.quadrature_order = quadrature_order;
            UserModel u;
            u.theta_bar = theta_bar;
            u.beta_db = beta_db;
            return user_covariance(u, c).matrix;
        },
        py::arg("theta_bar"), py::arg("M"), py::arg("beta_db") = -94.0,
        py::arg("angular_std_rad") = 30.0 * M_PI / 180.0, py::arg("noise_power_dbm") = -94.0,
        py::arg("quadrature_order") = 2048);

    m.def(
        "draw_scm",
        [](const CMat& R, int N, std::uint64_t seed) {
            Rng rng(seed);
            return scm(draw_channels(matrix_sqrt_hermitian(R), N, rng));
        },
        py::arg("R"), py::arg("N"), py::arg("seed"));
    m.def("spectral_decomposition", &spectral_decomposition, py::arg("scm"), py::arg("N"));
    m.def("mu_roots", &mu_roots, py::arg("eigenvalues"), py::arg("N"));
    m.def("dilog", &dilog, py::arg("x"));
    m.def("phi2", &phi2, py::arg("x"));
    m.def("log_hermitian", &log_hermitian, py::arg("R"));
    m.def("true_distance", &true_distance, py::arg("R1"), py::arg("R2"));
    m.def("plugin_distance", &plugin_distance, py::arg("scm1"), py::arg("scm2"));
    m.def("beta_coeffs", &beta_coeffs, py::arg("spec"));
    m.def("alpha_term", &alpha_term, py::arg("spec"));
    m.def("consistent_distance", &consistent_distance, py::arg("spec1"), py::arg("spec2"));

    m.def(
        "asymptotic_covariance",
        [](const std::vector<CMat>& covariances, const std::vector<int>& N, const PairList& pairs,
           int contour_nodes) {
            std::vector<CovarianceModel> models;
            for (const auto& R : covariances) models.push_back(model_from_matrix(R));
            CltOptions opt;
            opt.contour_nodes = contour_nodes;
            return asymptotic_covariance(models, N, pairs, opt).sigma_bar;
        },
        py::arg("covariances"), py::arg("N"), py::arg("pairs"), py::arg("contour_nodes") = 24);

    m.def(
        "build_scenario",
        [](const std::string& config_json) {
            const auto cfg = scenario_config_from_json(nlohmann::json::parse(config_json));
            return dump_json(scenario_to_json(build_scenario(cfg)));
        },
        py::arg("config_json"), "Returns the scenario document as a JSON string.");

    m.def(
        "sweep",
        [](const std::string& config_json, const std::string& axis, const std::vector<double>& grid,
           long long trials, long long mc_samples, int contour_nodes) {
            const auto cfg = scenario_config_from_json(nlohmann::json::parse(config_json));
            SweepOptions opt;
            opt.trials = trials;
            opt.mc_samples = mc_samples;
            opt.empirical = trials > 0;
            opt.clt.contour_nodes = contour_nodes;
            if (axis != "tau" && axis != "N") throw ConfigError("axis must be 'tau' or 'N'");
            const auto rows =
                sweep(cfg, axis == "tau" ? SweepAxis::tau : SweepAxis::samples, grid, opt);
            py::list out;
            for (const auto& r : rows) out.append(row_to_dict(r));
            return out;
        },
        py::arg("config_json"), py::arg("axis"), py::arg("grid"), py::arg("trials") = 1000,
        py::arg("mc_samples") = 100000, py::arg("contour_nodes") = 24);
}
