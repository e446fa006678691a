#pragma once

// Versioned binary (CBOR) model archive. Everything prediction needs is
// stored; training rows are not.

#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "spwarp/error.hpp"
#include "spwarp/estimator.hpp"

namespace spwarp {

inline constexpr int kArchiveVersion = 1;
inline constexpr const char* kArchiveFormat = "spwarp-model";

namespace archive_detail {

using json = nlohmann::json;

inline json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd vec(const json& j) {
  const auto d = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
}

inline json mat(const Eigen::MatrixXd& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()},
          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

inline Eigen::MatrixXd mat(const json& j) {
  const auto d = j.at("data").get<std::vector<double>>();
  const auto r = j.at("rows").get<Eigen::Index>(), c = j.at("cols").get<Eigen::Index>();
  if (static_cast<Eigen::Index>(d.size()) != r * c) throw version_error("corrupt matrix in model archive");
  return Eigen::Map<const Eigen::MatrixXd>(d.data(), r, c);
}

inline json chain_to_json(const TransformChain& chain) {
  json out = json::array();
  for (const auto& layer : chain.layers()) {
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, BoxCoxLayer>) {
            out.push_back({{"type", "boxcox"}, {"lambda", l.lambda}});
          } else if constexpr (std::is_same_v<T, CountLogLayer>) {
            out.push_back({{"type", "countlog"}, {"delta", l.delta}});
          } else if constexpr (std::is_same_v<T, StandardizeLayer>) {
            out.push_back({{"type", "standardize"}, {"mean", l.mean}, {"sd", l.sd}});
          } else {
            out.push_back({{"type", "sal"},
                           {"theta", {l.params.theta1, l.params.theta2, l.params.theta3, l.params.theta4}},
                           {"fixed_affine", l.fixed_affine}});
          }
        },
        layer);
  }
  return out;
}

inline TransformChain chain_from_json(const json& j) {
  TransformChain chain;
  for (const auto& l : j) {
    const auto type = l.at("type").get<std::string>();
    if (type == "boxcox") {
      chain.push_back(BoxCoxLayer{l.at("lambda").get<double>()});
    } else if (type == "countlog") {
      chain.push_back(CountLogLayer{l.at("delta").get<double>()});
    } else if (type == "standardize") {
      chain.push_back(StandardizeLayer{l.at("mean").get<double>(), l.at("sd").get<double>()});
    } else if (type == "sal") {
      const auto t = l.at("theta").get<std::vector<double>>();
      if (t.size() != 4) throw version_error("corrupt SAL layer in model archive");
      chain.push_back(SALLayer{{t[0], t[1], t[2], t[3]}, l.at("fixed_affine").get<bool>()});
    } else {
      throw version_error("unknown transform layer '" + type + "' in model archive");
    }
  }
  return chain;
}

inline BlockKind block_kind(const std::string& s) {
  if (s == "spatial") return BlockKind::spatial;
  if (s == "nvc") return BlockKind::nvc;
  if (s == "group") return BlockKind::group;
  throw version_error("unknown block kind '" + s + "' in model archive");
}

}  // namespace archive_detail

/// Serialized model; `meta` carries caller data (column names, data fingerprint).
inline std::vector<std::uint8_t> encode_model(const FittedModel& m, const nlohmann::json& meta = {}) {
  using namespace archive_detail;
  json j;
  j["format"] = kArchiveFormat;
  j["version"] = kArchiveVersion;
  j["meta"] = meta;

  j["spec"] = {{"varying", m.spec.varying},
               {"nvc", m.spec.nvc},
               {"y_type", m.spec.transform.is_count() ? "count" : "continuous"},
               {"y_nonneg", m.spec.transform.y_nonneg},
               {"tr_num", m.spec.transform.tr_num},
               {"count_delta", m.spec.count_delta},
               {"select_processes", m.spec.select_processes},
               {"spatial", m.spec.spatial}};
  j["names"] = {{"x", m.data.x_names}, {"xconst", m.data.xconst_names}, {"group", m.data.group_name},
                {"has_offset", !m.data.offset.empty()}};

  const auto& lay = m.layout;
  json blocks = json::array();
  for (const auto& b : lay.blocks)
    blocks.push_back({{"kind", to_string(b.kind)}, {"label", b.label}, {"covariate", b.covariate},
                      {"offset", b.offset}, {"size", b.size}, {"eigenvalues", vec(b.eigenvalues)}});
  json splines = json::array();
  for (const auto& s : lay.splines) {
    const auto st = s.state();
    splines.push_back({{"knots", st.knots}, {"lo", st.lo}, {"hi", st.hi}, {"mean", st.mean},
                       {"sd", st.sd}, {"keep", st.keep}});
  }
  j["layout"] = {{"fixed_names", lay.fixed_names}, {"blocks", blocks}, {"splines", splines},
                 {"group_levels", lay.group_levels}, {"n_x", lay.n_x}};

  j["active"] = std::vector<int>(m.active.begin(), m.active.end());
  j["theta"] = vec(m.theta);
  j["chain"] = chain_to_json(m.chain);
  j["coef"] = vec(m.coef);
  j["cov"] = mat(m.cov);
  j["sigma2"] = m.sigma2;
  j["scales"] = vec(m.scales);

  const auto& b = m.basis;
  std::vector<double> xy;
  for (const auto& p : b.coords) {
    xy.push_back(p.x);
    xy.push_back(p.y);
  }
  j["basis"] = {{"vectors", mat(b.vectors)}, {"values", vec(b.values)}, {"kind", to_string(b.kind)},
                {"range", b.range}, {"coords", xy}, {"column_means", vec(b.column_means)},
                {"site_ids", b.site_ids}, {"proximity_sum", b.proximity_sum}};

  j["criteria"] = {{"rloglik", m.criteria.rloglik}, {"aic", m.criteria.aic}, {"bic", m.criteria.bic},
                   {"p", m.criteria.p}, {"n", m.criteria.n_eff}};
  j["stats"] = {{"resid_se", m.stats.resid_se}, {"adj_r2_cond", m.stats.adj_r2_cond},
                {"dispersion", m.stats.dispersion}, {"deviance_explained", m.stats.deviance_explained}};
  j["converged"] = m.converged;
  j["grad_norm"] = m.grad_norm;
  return json::to_cbor(j);
}

inline FittedModel decode_model(const std::vector<std::uint8_t>& bytes, nlohmann::json* meta = nullptr) {
  using namespace archive_detail;
  json j;
  try {
    j = json::from_cbor(bytes);
  } catch (const json::exception& e) {
    throw version_error(std::string("not a model archive: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != kArchiveFormat)
    throw version_error("not a model archive");
  const int version = j.value("version", -1);
  if (version != kArchiveVersion)
    throw version_error("model archive version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kArchiveVersion) + ")");

  try {
    FittedModel m;
    if (meta) *meta = j.at("meta");
    const auto& s = j.at("spec");
    m.spec.varying = s.at("varying").get<bool>();
    m.spec.nvc = s.at("nvc").get<bool>();
    m.spec.transform.y_type = s.at("y_type").get<std::string>() == "count" ? YType::count : YType::continuous;
    m.spec.transform.y_nonneg = s.at("y_nonneg").get<bool>();
    m.spec.transform.tr_num = s.at("tr_num").get<int>();
    m.spec.count_delta = s.at("count_delta").get<double>();
    m.spec.select_processes = s.at("select_processes").get<bool>();
    m.spec.spatial = s.at("spatial").get<bool>();

    const auto& n = j.at("names");
    m.data.x_names = n.at("x").get<std::vector<std::string>>();
    m.data.xconst_names = n.at("xconst").get<std::vector<std::string>>();
    m.data.group_name = n.at("group").get<std::string>();

    const auto& l = j.at("layout");
    auto& lay = m.layout;
    lay.fixed_names = l.at("fixed_names").get<std::vector<std::string>>();
    for (const auto& b : l.at("blocks")) {
      RandomBlock rb;
      rb.kind = block_kind(b.at("kind").get<std::string>());
      rb.label = b.at("label").get<std::string>();
      rb.covariate = b.at("covariate").get<int>();
      rb.offset = b.at("offset").get<Eigen::Index>();
      rb.size = b.at("size").get<Eigen::Index>();
      rb.eigenvalues = vec(b.at("eigenvalues"));
      lay.blocks.push_back(std::move(rb));
    }
    for (const auto& sp : l.at("splines")) {
      NaturalSplineBasis::State st;
      st.knots = sp.at("knots").get<std::vector<double>>();
      st.lo = sp.at("lo").get<double>();
      st.hi = sp.at("hi").get<double>();
      st.mean = sp.at("mean").get<std::vector<double>>();
      st.sd = sp.at("sd").get<std::vector<double>>();
      st.keep = sp.at("keep").get<std::vector<Eigen::Index>>();
      lay.splines.push_back(NaturalSplineBasis::from_state(st));
    }
    lay.group_levels = l.at("group_levels").get<std::vector<std::string>>();
    lay.n_x = l.at("n_x").get<Eigen::Index>();

    for (int a : j.at("active").get<std::vector<int>>()) m.active.push_back(static_cast<char>(a));
    m.theta = vec(j.at("theta"));
    m.chain = chain_from_json(j.at("chain"));
    m.coef = vec(j.at("coef"));
    m.cov = mat(j.at("cov"));
    m.sigma2 = j.at("sigma2").get<double>();
    m.scales = vec(j.at("scales"));

    const auto& b = j.at("basis");
    m.basis.vectors = mat(b.at("vectors"));
    m.basis.values = vec(b.at("values"));
    m.basis.kind = proximity_kind_from_string(b.at("kind").get<std::string>());
    m.basis.range = b.at("range").get<double>();
    const auto xy = b.at("coords").get<std::vector<double>>();
    for (std::size_t i = 0; i + 1 < xy.size(); i += 2) m.basis.coords.push_back({xy[i], xy[i + 1]});
    m.basis.column_means = vec(b.at("column_means"));
    m.basis.site_ids = b.at("site_ids").get<std::vector<std::string>>();
    m.basis.proximity_sum = b.at("proximity_sum").get<double>();

    const auto& c = j.at("criteria");
    m.criteria.rloglik = c.at("rloglik").get<double>();
    m.criteria.aic = c.at("aic").get<double>();
    m.criteria.bic = c.at("bic").get<double>();
    m.criteria.p = c.at("p").get<int>();
    m.criteria.n_eff = c.at("n").get<Eigen::Index>();
    const auto& st = j.at("stats");
    auto num = [](const json& v) { return v.is_null() ? kNaN : v.get<double>(); };
    m.stats.resid_se = num(st.at("resid_se"));
    m.stats.adj_r2_cond = num(st.at("adj_r2_cond"));
    m.stats.dispersion = num(st.at("dispersion"));
    m.stats.deviance_explained = num(st.at("deviance_explained"));
    m.converged = j.at("converged").get<bool>();
    m.grad_norm = j.at("grad_norm").get<double>();
    if (m.coef.size() != static_cast<Eigen::Index>(lay.fixed_names.size()) + lay.random_size())
      throw version_error("model archive is inconsistent: coefficient count");
    return m;
  } catch (const json::exception& e) {
    throw version_error(std::string("malformed model archive: ") + e.what());
  }
}

inline void save_model(const std::string& path, const FittedModel& m, const nlohmann::json& meta = {}) {
  const auto bytes = encode_model(m, meta);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline FittedModel load_model(const std::string& path, nlohmann::json* meta = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open model '" + path + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_model(bytes, meta);
}

}  // namespace spwarp
