#pragma once

#include <array>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hcap/cfsbridge.hpp"
#include "hcap/core.hpp"
#include "hcap/elverify.hpp"
#include "hcap/krein.hpp"
#include "hcap/measure.hpp"
#include "hcap/minimize.hpp"
#include "hcap/pointwise.hpp"

// Documents are JSON; doubles are written in shortest round-trip form, so reading back is bit-exact.
namespace hcap::io {

using Json = nlohmann::json;

inline constexpr int format_version = 1;

namespace detail {

inline Json vec4(const Eigen::Vector4d& v) { return Json::array({v(0), v(1), v(2), v(3)}); }

inline Eigen::Vector4d vec4(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw InvalidInput("expected a 4-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

/** \brief Row-major list of [re, im] pairs. */
inline Json matrix(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) out.push_back(Json::array({m(i, k).real(), m(i, k).imag()}));
  return out;
}

inline Matrix matrix(const Json& j, Eigen::Index dim) {
  if (!j.is_array() || j.size() != static_cast<size_t>(dim * dim)) throw InvalidInput("matrix has wrong size");
  Matrix m(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index k = 0; k < dim; ++k) {
      const Json& z = j[static_cast<size_t>(i * dim + k)];
      if (!z.is_array() || z.size() != 2) throw InvalidInput("matrix entries must be [re, im] pairs");
      m(i, k) = Complex(z[0].get<double>(), z[1].get<double>());
    }
  return m;
}

inline void expect_format(const Json& j, const char* format) {
  if (!j.is_object() || j.value("format", "") != format)
    throw InvalidInput(std::string("document is not of format ") + format);
  if (j.value("version", 0) != format_version) throw InvalidInput("unsupported document version");
}

}  // namespace detail

inline Json to_json(const MomentumBox& box) {
  return {{"lower", detail::vec4(box.lower)}, {"upper", detail::vec4(box.upper)}, {"grid_shape", box.grid_shape}};
}

inline MomentumBox box_from_json(const Json& j) {
  MomentumBox box;
  box.lower = detail::vec4(j.at("lower"));
  box.upper = detail::vec4(j.at("upper"));
  if (j.contains("grid_shape")) box.grid_shape = j.at("grid_shape").get<std::array<int, 4>>();
  box.validate();
  return box;
}

inline Json to_json(const OperatorMeasure& nu) {
  Json atoms = Json::array();
  for (const Atom& atom : nu.atoms()) atoms.push_back({{"p", detail::vec4(atom.p)}, {"A", detail::matrix(atom.a.matrix())}});
  return {{"format", "hcap-measure"},
          {"version", format_version},
          {"n", nu.space().spin_dimension()},
          {"box", to_json(nu.box())},
          {"atoms", atoms}};
}

inline OperatorMeasure measure_from_json(const Json& j, const Tolerances& tol = {}) {
  try {
    detail::expect_format(j, "hcap-measure");
    const SignatureSpace space(j.at("n").get<int>());
    std::vector<Atom> atoms;
    for (const Json& a : j.at("atoms"))
      atoms.push_back({detail::vec4(a.at("p")), KreinOperator(space, detail::matrix(a.at("A"), space.dimension()))});
    return {space, box_from_json(j.at("box")), std::move(atoms), tol};
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("malformed measure document: ") + e.what());
  }
}

inline Json to_json(const KreinOperator& q) {
  return {{"format", "hcap-operator"},
          {"version", format_version},
          {"n", q.space().spin_dimension()},
          {"matrix", detail::matrix(q.matrix())}};
}

inline KreinOperator operator_from_json(const Json& j) {
  try {
    detail::expect_format(j, "hcap-operator");
    const SignatureSpace space(j.at("n").get<int>());
    return {space, detail::matrix(j.at("matrix"), space.dimension())};
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("malformed operator document: ") + e.what());
  }
}

inline Json to_json(const ELReport& r) {
  Json probes = Json::array();
  for (const auto& p : r.probes) probes.push_back({{"p", detail::vec4(p.p)}, {"psd_margin", p.psd_margin}, {"g", p.gap}});
  Json residuals = Json::array();
  for (const auto& s : r.residuals)
    residuals.push_back({{"atom", s.atom},
                         {"p", detail::vec4(s.p)},
                         {"left", s.left},
                         {"right", s.right},
                         {"relative", s.relative},
                         {"g", s.gap}});
  return {{"format", "hcap-el-report"},
          {"version", ELReport::version},
          {"alpha", r.alpha},
          {"beta", r.beta},
          {"case", to_string(r.which)},
          {"c", r.c},
          {"f", r.f},
          {"constraints", {{"trace", r.constraints.trace}, {"dim_sum", r.constraints.dim_sum}, {"mod_dim", r.constraints.mod_dim}}},
          {"action", r.action},
          {"tail_ratio", r.tail_ratio},
          {"qhat_scale", r.qhat_scale},
          {"summary",
           {{"min_relative_margin", r.min_relative_margin()},
            {"max_relative_residual", r.max_relative_residual()},
            {"min_gap", r.min_gap()},
            {"max_support_gap", r.max_support_gap()},
            {"beta_sign_ok", beta_sign_check(r)}}},
          {"probes", probes},
          {"residuals", residuals}};
}

inline Json to_json(const PointwiseSolution& s) {
  return {{"format", "hcap-pointwise-solution"},
          {"version", format_version},
          {"alpha", s.alpha},
          {"beta", s.beta},
          {"objective", s.objective},
          {"branch", to_string(s.branch)},
          {"annihilation_residual", s.annihilation_residual},
          {"A", to_json(s.a)}};
}

inline Json to_json(const std::vector<LocalCorrelation>& rho) {
  Json items = Json::array();
  for (const auto& f : rho) {
    Json ev = Json::array();
    for (double e : f.eigenvalues) ev.push_back(e);
    items.push_back({{"x", detail::vec4(f.x)},
                     {"weight", f.weight},
                     {"rank", f.rank},
                     {"reduced", f.reduced},
                     {"positive", f.positive_count},
                     {"negative", f.negative_count},
                     {"eigenvalues", ev}});
  }
  return {{"format", "hcap-correlations"}, {"version", format_version}, {"items", items}};
}

inline Json to_json(const MinimizeConfig& c) {
  return {{"format", "hcap-minimize-config"},
          {"version", format_version},
          {"n", c.spin_dimension},
          {"box", to_json(c.box)},
          {"position_radius", c.position_radius},
          {"position_counts", c.position_counts},
          {"c", c.c},
          {"f", c.f},
          {"smoothing", c.smoothing},
          {"initial_step", c.initial_step},
          {"armijo", c.armijo},
          {"backtrack", c.backtrack},
          {"max_backtracks", c.max_backtracks},
          {"max_iterations", c.max_iterations},
          {"gradient_tolerance", c.gradient_tolerance},
          {"stall_tolerance", c.stall_tolerance},
          {"seed", c.seed},
          {"gradient_mode", c.gradient_mode == GradientMode::analytic ? "analytic" : "finite_difference"},
          {"tolerances",
           {{"psd", c.tol.psd},
            {"herm", c.tol.herm},
            {"zero", c.tol.zero},
            {"gap", c.tol.gap},
            {"recon", c.tol.recon},
            {"constraint", c.tol.constraint},
            {"el", c.tol.el}}}};
}

/** \brief Reads a config; absent keys keep their defaults. */
inline MinimizeConfig config_from_json(const Json& j) {
  try {
    if (!j.is_object()) throw InvalidInput("config must be an object");
    MinimizeConfig c;
    c.spin_dimension = j.value("n", c.spin_dimension);
    if (j.contains("box")) c.box = box_from_json(j.at("box"));
    c.position_radius = j.value("position_radius", c.position_radius);
    c.position_counts = j.value("position_counts", c.position_counts);
    c.c = j.value("c", c.c);
    c.f = j.value("f", c.f);
    c.smoothing = j.value("smoothing", c.smoothing);
    c.initial_step = j.value("initial_step", c.initial_step);
    c.armijo = j.value("armijo", c.armijo);
    c.backtrack = j.value("backtrack", c.backtrack);
    c.max_backtracks = j.value("max_backtracks", c.max_backtracks);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.gradient_tolerance = j.value("gradient_tolerance", c.gradient_tolerance);
    c.stall_tolerance = j.value("stall_tolerance", c.stall_tolerance);
    c.seed = j.value("seed", c.seed);
    const std::string mode = j.value("gradient_mode", std::string("analytic"));
    if (mode != "analytic" && mode != "finite_difference") throw InvalidInput("unknown gradient_mode " + mode);
    c.gradient_mode = mode == "analytic" ? GradientMode::analytic : GradientMode::finite_difference;
    if (j.contains("tolerances")) {
      const Json& t = j.at("tolerances");
      c.tol.psd = t.value("psd", c.tol.psd);
      c.tol.herm = t.value("herm", c.tol.herm);
      c.tol.zero = t.value("zero", c.tol.zero);
      c.tol.gap = t.value("gap", c.tol.gap);
      c.tol.recon = t.value("recon", c.tol.recon);
      c.tol.constraint = t.value("constraint", c.tol.constraint);
      c.tol.el = t.value("el", c.tol.el);
    }
    return c;
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("malformed config: ") + e.what());
  }
}

inline Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw InvalidInput("cannot parse " + path + ": " + e.what());
  }
}

inline void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw InvalidInput("write failed for " + path);
}

}  // namespace hcap::io
