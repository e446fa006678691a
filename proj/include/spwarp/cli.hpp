#pragma once

// Subcommand bodies behind the command-line front end. Argument parsing lives
// in tools/; everything here takes a RunConfig.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "spwarp/archive.hpp"
#include "spwarp/estimator.hpp"
#include "spwarp/gaussianize.hpp"
#include "spwarp/inference.hpp"
#include "spwarp/io.hpp"
#include "spwarp/predictor.hpp"
#include "spwarp/proximity_basis.hpp"
#include "spwarp/quantiles.hpp"

namespace spwarp::cli {

inline std::string num(double v, int digits = 8) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

/// Right-aligned text table with a row-label column.
inline void print_table(std::ostream& os, const std::vector<std::string>& cols,
                        const std::vector<std::string>& rows,
                        const std::vector<std::vector<std::string>>& cells) {
  std::size_t w0 = 0;
  for (const auto& r : rows) w0 = std::max(w0, r.size());
  std::vector<std::size_t> w(cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    w[c] = cols[c].size();
    for (const auto& r : cells) w[c] = std::max(w[c], r[c].size());
  }
  auto pad = [&](const std::string& s, std::size_t n, bool left) {
    const std::string fill(n > s.size() ? n - s.size() : 0, ' ');
    return left ? s + fill : fill + s;
  };
  os << pad("", w0, true);
  for (std::size_t c = 0; c < cols.size(); ++c) os << "  " << pad(cols[c], w[c], false);
  os << '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    os << pad(rows[r], w0, true);
    for (std::size_t c = 0; c < cols.size(); ++c) os << "  " << pad(cells[r][c], w[c], false);
    os << '\n';
  }
}

inline void summary_table(std::ostream& os, const std::vector<std::string>& names,
                          const std::vector<stats::Summary>& s) {
  const std::vector<std::string> rows{"Min.", "1st Qu.", "Median", "Mean", "3rd Qu.", "Max."};
  std::vector<std::vector<std::string>> cells(rows.size(), std::vector<std::string>(names.size()));
  for (std::size_t c = 0; c < names.size(); ++c) {
    const double v[6] = {s[c].min, s[c].q1, s[c].median, s[c].mean, s[c].q3, s[c].max};
    for (std::size_t r = 0; r < rows.size(); ++r) cells[r][c] = num(v[r], 6);
  }
  print_table(os, names, rows, cells);
}

// ------------------------------------------------------------------ report

struct ReportInputs {
  const RunConfig* cfg = nullptr;
  stats::Moments moments;
  const MarginalEffects* marginal = nullptr;
};

inline std::string call_line(const RunConfig& c) {
  std::ostringstream os;
  auto list = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + v[i];
    return s;
  };
  os << (c.varying ? "resf_vc" : "resf") << "(y = " << c.response;
  if (!c.x.empty()) os << ", x = " << list(c.x);
  if (!c.xconst.empty()) os << ", xconst = " << list(c.xconst);
  if (!c.group.empty()) os << ", xgroup = " << c.group;
  if (!c.offset.empty()) os << ", offset = " << c.offset;
  if (c.varying && c.nvc) os << ", x_nvc = TRUE";
  os << ", nongauss = (y_type = " << (c.transform.is_count() ? "count" : "continuous")
     << ", y_nonneg = " << (c.transform.y_nonneg ? "TRUE" : "FALSE") << ", tr_num = " << c.transform.tr_num << "))";
  return os.str();
}

inline void write_report(std::ostream& os, const FittedModel& m, const ReportInputs& in) {
  const auto& lay = m.layout;
  const bool count = m.spec.transform.is_count();
  if (in.cfg) os << "Call:\n" << call_line(*in.cfg) << "\n\n";

  // ---- coefficients
  auto coef_table = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::string> rows;
    std::vector<std::vector<std::string>> cells;
    for (auto k : idx) {
      const auto& c = m.coefficients[k];
      rows.push_back(c.name);
      cells.push_back({num(c.estimate), num(c.se), num(c.t), num(c.p, 7)});
    }
    print_table(os, {"Estimate", "SE", "t_value", "p_value"}, rows, cells);
  };
  if (!m.spec.varying) {
    os << "----Coefficients-----\n";
    std::vector<std::size_t> all(m.coefficients.size());
    for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
    coef_table(all);
  } else {
    os << (m.spec.nvc ? "----Spatially and non-spatially varying coefficients on x (summary)----\n"
                      : "----Spatially varying coefficients on x (summary)----\n");
    os << "\nCoefficient estimates:\n";
    std::vector<stats::Summary> s;
    for (Eigen::Index c = 0; c < m.svc_estimate.cols(); ++c) {
      const auto col = m.svc_estimate.col(c);
      s.push_back(stats::summarize(std::vector<double>(col.data(), col.data() + col.size())));
    }
    summary_table(os, m.varying_names, s);
    os << "\nStatistical significance:\n";
    const auto sig = significance_summary(m);
    std::vector<std::string> names;
    for (std::size_t c = 0; c < sig.size(); ++c) names.push_back(c == 0 ? "Intercept" : sig[c].name);
    const std::vector<std::string> rows{"Not significant", "Significant (10% level)", "Significant (5% level)",
                                        "Significant (1% level)"};
    std::vector<std::vector<std::string>> cells(4, std::vector<std::string>(sig.size()));
    for (std::size_t c = 0; c < sig.size(); ++c)
      for (std::size_t r = 0; r < 4; ++r) cells[r][c] = std::to_string(sig[c].counts[r]);
    print_table(os, names, rows, cells);
    if (!m.data.xconst_names.empty()) {
      os << "\n----Constant coefficients on xconst-----\n";
      std::vector<std::size_t> idx;
      for (std::size_t k = static_cast<std::size_t>(1 + lay.n_x); k < m.coefficients.size(); ++k) idx.push_back(k);
      coef_table(idx);
    }
  }

  // ---- variance parameters
  os << (m.spec.varying ? "\n----Variance parameters-----\n" : "\n----Variance parameter-----\n");
  auto process_table = [&](BlockKind kind, bool moran) {
    std::vector<std::string> names;
    std::vector<std::vector<std::string>> cells(moran ? 2 : 1);
    for (const auto& p : m.processes) {
      if (p.kind != kind) continue;
      names.push_back(p.label);
      cells[0].push_back(num(p.active ? p.random_se : 0.0));
      if (moran) cells[1].push_back(num(p.active ? p.moran_ratio : kNaN));
    }
    if (names.empty()) return false;
    std::vector<std::string> rows{"random_SE"};
    if (moran) rows.emplace_back("Moran.I/max(Moran.I)");
    print_table(os, names, rows, cells);
    return true;
  };
  os << (m.spec.varying ? "\nSpatial effects (coefficients on x):\n" : "\nSpatial effects (residuals):\n");
  if (!process_table(BlockKind::spatial, true)) os << "(none)\n";
  if (m.spec.nvc) {
    os << "\nNon-spatial effects (coefficients on x):\n";
    process_table(BlockKind::nvc, false);
  }
  if (!m.group_effects.empty()) {
    os << "\nGroup effects:\n";
    process_table(BlockKind::group, false);
  }

  // ---- distribution of y
  if (m.spec.transform.regime() != 'g') {
    os << "\n----Estimated probability distribution of y-----\n";
    print_table(os, {"Estimates"}, {"skewness", "excess kurtosis"},
                {{num(in.moments.skewness, 7)}, {num(in.moments.excess_kurtosis, 7)}});
    if (const auto* bc = m.chain.boxcox()) os << "(Box-Cox parameter: " << num(bc->lambda, 7) << ")\n";
  }

  // ---- error statistics
  os << "\n----Error statistics-----\n";
  const auto& c = m.criteria;
  if (count) {
    print_table(os, {"stat"},
                {"dispersion parameter", "deviance explained (%)", "Gaussian rlogLik approximating the model", "AIC",
                 "BIC"},
                {{num(m.stats.dispersion, 9)}, {num(m.stats.deviance_explained, 9)}, {num(c.rloglik, 9)},
                 {num(c.aic, 9)}, {num(c.bic, 9)}});
  } else {
    print_table(os, {"stat"}, {"resid_SE", "adjR2(cond)", "rlogLik", "AIC", "BIC"},
                {{num(m.stats.resid_se, 9)}, {num(m.stats.adj_r2_cond, 9)}, {num(c.rloglik, 10)},
                 {num(c.aic, 10)}, {num(c.bic, 10)}});
  }
  const auto& nm = m.null_model;
  os << "\nNULL model: " << nm.label << '\n';
  if (count)
    os << "  Gaussian (r)loglik approximating the model: " << num(nm.loglik, 6) << "\n  ( AIC: " << num(nm.aic, 7)
       << ", BIC: " << num(nm.bic, 7) << " )\n";
  else
    os << "(r)loglik: " << num(nm.loglik, 7) << " ( AIC: " << num(nm.aic, 7) << ", BIC: " << num(nm.bic, 7)
       << " )\n";

  // ---- marginal effects
  if (in.marginal) {
    os << "\n----Marginal effects from x (dy_i/dx_i) (summary)----\n";
    std::vector<std::string> names(in.marginal->names.begin() + 1, in.marginal->names.end());
    std::vector<stats::Summary> s(in.marginal->summary.begin() + 1, in.marginal->summary.end());
    if (!names.empty()) summary_table(os, names, s);
    os << "\nNote: Medians are recommended summary statistics\n";
  }
  for (const auto& w : m.warnings) os << "\nWarning: " << w << '\n';
}

// ------------------------------------------------------------------ helpers

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw data_error("cannot create output directory '" + dir + "': " + ec.message());
}

inline EigenBasis basis_for(const Ingested& in, const RunConfig& cfg) {
  if (cfg.uses_coordinates()) return extract_basis(build_kernel_proximity(in.coords), cfg.threshold);
  return extract_basis(build_contiguity_proximity(in.adjacency.matrix, in.adjacency.ids), cfg.threshold);
}

inline ModelSpec model_spec(const RunConfig& cfg) {
  ModelSpec s;
  s.varying = cfg.varying;
  s.nvc = cfg.nvc;
  s.transform = cfg.transform;
  s.count_delta = cfg.count_delta;
  s.select_processes = cfg.select;
  return s;
}

inline FitOptions fit_options(const RunConfig& cfg) {
  FitOptions o;
  o.optimizer.max_iter = cfg.max_iter;
  o.optimizer.rel_tol = cfg.rel_tol;
  return o;
}

inline std::vector<std::string> prediction_header() {
  std::vector<std::string> h{"pred", "pred_transG", "pred_transG_se", "xb", "sf_residual"};
  for (const auto& q : quantile_headers(kQuantileProbs)) h.push_back(q);
  h.emplace_back("len95");
  return h;
}

inline std::vector<std::vector<std::string>> prediction_rows(const Eigen::VectorXd& pred, const Eigen::VectorXd& tg,
                                                             const Eigen::VectorXd& se, const Eigen::VectorXd& xb,
                                                             const Eigen::VectorXd& sf, const Eigen::MatrixXd& q) {
  std::vector<std::vector<std::string>> rows;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    std::vector<std::string> r{format_number(pred(i)), format_number(tg(i)), format_number(se(i)),
                               format_number(xb(i)), format_number(sf(i))};
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(kQuantileProbs.size()); ++k)
      r.push_back(q.cols() ? format_number(q(i, k)) : "NA");
    r.push_back(q.cols() ? format_number(q(i, 13) - q(i, 1)) : "NA");
    rows.push_back(std::move(r));
  }
  return rows;
}

// -------------------------------------------------------------------- fit

struct FitRun {
  FittedModel model;
  stats::Moments moments;
  std::string report;
};

inline FitRun run_fit(const RunConfig& cfg) {
  cfg.validate_fit();
  const CsvTable table = read_csv(cfg.data);
  const Ingested in = ingest(table, cfg);
  const EigenBasis basis = basis_for(in, cfg);

  FitRun run;
  run.model = fit_model(in.data, basis, model_spec(cfg), fit_options(cfg));
  const FittedModel& m = run.model;
  run.moments = distribution_moments(m, cfg.seed);
  const MarginalEffects me = marginal_effects(m);

  std::ostringstream rep;
  write_report(rep, m, {&cfg, run.moments, &me});
  run.report = rep.str();

  const std::string& out = cfg.out;
  ensure_dir(out);
  {
    std::ofstream f(out + "/report.txt", std::ios::binary);
    f << run.report;
  }

  std::vector<std::vector<std::string>> rows;
  for (const auto& c : m.coefficients)
    rows.push_back({c.name, format_number(c.estimate), format_number(c.se), format_number(c.t), format_number(c.p)});
  write_csv(out + "/coefficients.csv", {"name", "Estimate", "SE", "t_value", "p_value"}, rows);

  rows.clear();
  for (const auto& p : m.processes)
    rows.push_back({p.label, to_string(p.kind), p.active ? "1" : "0", format_number(p.active ? p.random_se : 0.0),
                    format_number(p.active ? p.alpha : kNaN), format_number(p.active ? p.moran_ratio : kNaN)});
  write_csv(out + "/variance.csv", {"process", "kind", "active", "random_SE", "alpha", "moran_ratio"}, rows);

  rows.clear();
  auto stat = [&](const std::string& k, double v) { rows.push_back({k, format_number(v)}); };
  stat("resid_SE", m.stats.resid_se);
  stat("adjR2(cond)", m.stats.adj_r2_cond);
  stat("rlogLik", m.criteria.rloglik);
  stat("AIC", m.criteria.aic);
  stat("BIC", m.criteria.bic);
  stat("p", m.criteria.p);
  stat("n", static_cast<double>(m.criteria.n_eff));
  stat("dispersion", m.stats.dispersion);
  stat("deviance_explained", m.stats.deviance_explained);
  stat("skewness", run.moments.skewness);
  stat("excess_kurtosis", run.moments.excess_kurtosis);
  if (const auto* bc = m.chain.boxcox()) stat("boxcox_lambda", bc->lambda);
  stat("null_loglik", m.null_model.loglik);
  stat("null_AIC", m.null_model.aic);
  stat("null_BIC", m.null_model.bic);
  write_csv(out + "/error_stats.csv", {"stat", "value"}, rows);

  if (!m.group_effects.empty()) {
    rows.clear();
    for (const auto& g : m.group_effects)
      rows.push_back({m.data.group_name + "_" + g.level, format_number(g.estimate), format_number(g.se),
                      format_number(g.t)});
    write_csv(out + "/group_effects.csv", {"level", "Estimate", "SE", "t_value"}, rows);
  }

  if (m.spec.varying) {
    std::vector<std::string> h;
    for (const auto& v : m.varying_names) {
      h.push_back("b_" + v);
      h.push_back("se_" + v);
      h.push_back("p_" + v);
    }
    rows.clear();
    for (Eigen::Index i = 0; i < m.svc_estimate.rows(); ++i) {
      std::vector<std::string> r;
      for (Eigen::Index c = 0; c < m.svc_estimate.cols(); ++c) {
        r.push_back(format_number(m.svc_estimate(i, c)));
        r.push_back(format_number(m.svc_se(i, c)));
        r.push_back(format_number(m.svc_p(i, c)));
      }
      rows.push_back(std::move(r));
    }
    write_csv(out + "/svc.csv", h, rows);
  }

  {
    const std::vector<std::string> h(me.names.begin() + 1, me.names.end());
    rows.clear();
    for (Eigen::Index i = 0; i < me.effects.rows(); ++i) {
      std::vector<std::string> r;
      for (Eigen::Index c = 1; c < me.effects.cols(); ++c) r.push_back(format_number(me.effects(i, c)));
      rows.push_back(std::move(r));
    }
    write_csv(out + "/marginal.csv", h, rows);
  }

  const Eigen::VectorXd sf = m.fitted_z - m.xb;
  Eigen::VectorXd tg = m.fitted_z;
  write_csv(out + "/pred.csv", prediction_header(),
            prediction_rows(m.pred, tg, m.se_z, m.xb, sf, m.pred_quantile));

  {
    const auto d = estimated_density(m);
    rows.clear();
    for (std::size_t k = 0; k < d.y.size(); ++k) rows.push_back({format_number(d.y[k]), format_number(d.density[k])});
    write_csv(out + "/density.csv", {"y", "density"}, rows);
  }

  if (cfg.geojson && cfg.uses_coordinates()) {
    Eigen::MatrixXd v(m.pred.size(), 3);
    v << m.pred, m.fitted_z, m.se_z;
    write_geojson(out + "/pred.geojson", in.coords, {"pred", "pred_transG", "pred_transG_se"}, v);
  }

  nlohmann::json meta{{"response", cfg.response}, {"x", cfg.x},           {"xconst", cfg.xconst},
                      {"group", cfg.group},       {"offset", cfg.offset}, {"coord_x", cfg.coord_x},
                      {"coord_y", cfg.coord_y},   {"zone", cfg.zone},     {"fingerprint", file_fingerprint(cfg.data)}};
  save_model(out + "/model.spwarp", m, meta);
  return run;
}

// ---------------------------------------------------------------- predict

struct PredictRun {
  PredictionResult result;
  Eigen::Index rows = 0;
};

inline PredictRun run_predict(const RunConfig& cfg) {
  if (cfg.model.empty()) throw config_error("missing 'model' path");
  if (cfg.predict_data.empty()) throw config_error("missing 'data0' path (prediction sites)");
  nlohmann::json meta;
  const FittedModel m = load_model(cfg.model, &meta);
  const CsvTable t = read_csv(cfg.predict_data);
  ensure_dir(cfg.out);
  const std::string path = cfg.out + "/prediction.csv";

  PredictRun run;
  run.rows = static_cast<Eigen::Index>(t.size());
  if (t.rows.empty()) {
    write_csv(path, prediction_header(), {});
    return run;
  }
  if (m.basis.kind != ProximityKind::exponential_kernel) throw config_error("extension requires kernel basis");

  const auto n = static_cast<Eigen::Index>(t.size());
  auto matrix = [&](const std::vector<std::string>& cols) {
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto v = t.numeric(cols[k]);
      x.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXd>(v.data(), n);
    }
    return x;
  };
  PredictionInput pin;
  pin.x = matrix(m.data.x_names);
  pin.xconst = matrix(m.data.xconst_names);
  const auto group = meta.value("group", std::string());
  if (!group.empty() && t.has(group)) pin.group = t.text(group);
  const auto offset = meta.value("offset", std::string());
  if (!offset.empty()) {
    pin.offset = t.numeric(offset);
    for (std::size_t i = 0; i < pin.offset.size(); ++i)
      if (!(pin.offset[i] > 0.0))
        throw data_error("non-positive offset at row " + std::to_string(i + 1) + ", column '" + offset + "'");
  }
  const auto cx = meta.value("coord_x", std::string()), cy = meta.value("coord_y", std::string());
  if (cx.empty() || cy.empty()) throw config_error("extension requires kernel basis");
  const auto xs = t.numeric(cx), ys = t.numeric(cy);
  std::vector<Point> pts;
  for (std::size_t i = 0; i < xs.size(); ++i) pts.push_back({xs[i], ys[i]});
  const CoordinateSet coords0(std::move(pts));

  PredictOptions opt;
  opt.compute_quantile = cfg.compute_quantile;
  opt.include_noise = cfg.include_noise;
  run.result = predict_oos(m, pin, extend_basis(m.basis, coords0), opt);
  const auto& r = run.result;
  write_csv(path, prediction_header(), prediction_rows(r.pred, r.pred_transG, r.pred_transG_se, r.xb, r.sf_residual,
                                                       r.quantiles));
  if (cfg.geojson) {
    const auto h = prediction_header();
    Eigen::MatrixXd v(n, static_cast<Eigen::Index>(h.size()));
    v.col(0) = r.pred;
    v.col(1) = r.pred_transG;
    v.col(2) = r.pred_transG_se;
    v.col(3) = r.xb;
    v.col(4) = r.sf_residual;
    for (Eigen::Index k = 0; k < 15; ++k) v.col(5 + k) = r.quantiles.cols() ? Eigen::VectorXd(r.quantiles.col(k))
                                                                           : Eigen::VectorXd::Constant(n, kNaN);
    v.col(20) = r.len95;
    write_geojson(cfg.out + "/prediction.geojson", coords0, h, v);
  }
  return run;
}

// ------------------------------------------------------------------ basis

inline EigenBasis run_basis(const RunConfig& cfg, std::ostream& os) {
  cfg.validate_geometry();
  EigenBasis b;
  if (cfg.uses_adjacency()) {
    const auto a = read_adjacency(cfg.adjacency, cfg.adjacency_format);
    b = extract_basis(build_contiguity_proximity(a.matrix, a.ids), cfg.threshold);
  } else {
    if (cfg.data.empty()) throw config_error("missing 'data' path");
    const CsvTable t = read_csv(cfg.data);
    if (t.rows.empty()) throw data_error("no data rows in " + t.source);
    const auto xs = t.numeric(cfg.coord_x), ys = t.numeric(cfg.coord_y);
    std::vector<Point> pts;
    for (std::size_t i = 0; i < xs.size(); ++i) pts.push_back({xs[i], ys[i]});
    b = extract_basis(build_kernel_proximity(CoordinateSet(std::move(pts))), cfg.threshold);
  }
  os << b.rank() << "/" << b.sites() << " eigen-pairs are extracted\n";
  ensure_dir(cfg.out);
  write_basis(cfg.out, b);
  return b;
}

// -------------------------------------------------------- transform-check

struct TransformCheckRow {
  int depth = 0;
  double skewness = 0, excess_kurtosis = 0, loglik = 0;
  std::vector<std::string> names;
  Eigen::VectorXd theta;
};

inline constexpr int kMinCheckRows = 30;

/// Chains of depth 0..max_depth fitted to one column; moments of the
/// standardized transformed sample.
inline std::vector<TransformCheckRow> transform_check(const std::vector<double>& y, bool y_nonneg, int max_depth = 3,
                                                      const OptimizerOptions& opt = {}) {
  if (static_cast<int>(y.size()) < kMinCheckRows) throw data_error("insufficient data");
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(y.size()), 1);
  TransformSpec spec;
  spec.y_nonneg = y_nonneg;
  spec.tr_num = max_depth;
  FitChainOptions fo;
  fo.optimizer = opt;
  const auto fit = fit_chain(y, spec, x, {}, kDefaultCountDelta, fo);
  std::vector<TransformCheckRow> out;
  for (const auto& st : fit.stages) {
    std::vector<double> z(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) z[i] = st.chain.forward(y[i]);
    const auto mo = stats::moments(z);
    TransformSpec stage = spec;
    stage.tr_num = st.tr_num;
    out.push_back({st.tr_num, mo.skewness, mo.excess_kurtosis, st.loglik, ChainParameterization(stage).names(),
                   st.theta});
  }
  return out;
}

inline std::vector<TransformCheckRow> run_transform_check(const RunConfig& cfg, std::ostream& os) {
  if (cfg.data.empty()) throw config_error("missing 'data' path");
  const std::string col = cfg.column.empty() ? cfg.response : cfg.column;
  if (col.empty()) throw config_error("missing 'column' to check");
  const CsvTable t = read_csv(cfg.data);
  const auto y = t.numeric(col);
  OptimizerOptions opt;
  opt.max_iter = cfg.max_iter;
  opt.rel_tol = cfg.rel_tol;
  const auto rows = transform_check(y, cfg.transform.y_nonneg, 3, opt);

  std::vector<std::string> labels;
  std::vector<std::vector<std::string>> cells;
  std::vector<std::vector<std::string>> csv;
  for (const auto& r : rows) {
    labels.push_back("D=" + std::to_string(r.depth));
    cells.push_back({num(r.skewness, 6), num(r.excess_kurtosis, 6), num(r.loglik, 9)});
    std::string params;
    for (Eigen::Index k = 0; k < r.theta.size(); ++k)
      params += (k ? ";" : "") + r.names[static_cast<std::size_t>(k)] + "=" + format_number(r.theta(k));
    csv.push_back({std::to_string(r.depth), format_number(r.skewness), format_number(r.excess_kurtosis),
                   format_number(r.loglik), params});
  }
  os << "Gaussianization of '" << col << "' (n = " << y.size() << ")\n";
  print_table(os, {"skewness", "excess kurtosis", "loglik"}, labels, cells);
  ensure_dir(cfg.out);
  write_csv(cfg.out + "/transform_check.csv", {"D", "skewness", "excess_kurtosis", "loglik", "parameters"}, csv);
  return rows;
}

}  // namespace spwarp::cli
