// spwarp: fit / predict / basis / transform-check from the command line.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "spwarp/cli.hpp"

namespace {

int fail(int code, const std::string& msg) {
  std::cerr << "error: " << msg << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  spwarp::RunConfig cfg;
  std::vector<std::string> coords;
  std::string y_type = "continuous";

  CLI::App app{"Spatial regression with compositionally warped responses"};
  app.set_config("--config", "", "INI file with one key per option");
  app.require_subcommand(1);

  app.add_option("--data", cfg.data, "training CSV (or the sample for transform-check)");
  app.add_option("--y,--response", cfg.response, "response column");
  app.add_option("--x", cfg.x, "covariate columns (varying when --vc)")->delimiter(',');
  app.add_option("--xconst", cfg.xconst, "constant-coefficient covariate columns")->delimiter(',');
  app.add_option("--xgroup", cfg.group, "group column");
  app.add_option("--offset", cfg.offset, "positive offset column");
  app.add_option("--coords", coords, "coordinate columns x,y")->delimiter(',')->expected(2);
  app.add_option("--zone", cfg.zone, "zone id column (adjacency geometry)");
  app.add_option("--adjacency", cfg.adjacency, "adjacency CSV (dense matrix or edge list)");
  app.add_option("--adjacency-format,--adjacency_format", cfg.adjacency_format)
      ->check(CLI::IsMember({"auto", "dense", "edges"}));
  app.add_flag("--vc", cfg.varying, "spatially varying coefficients on x");
  app.add_flag("--x-nvc,--x_nvc", cfg.nvc, "non-spatially varying coefficients on x");
  app.add_flag("!--no-select,!--no_select", cfg.select, "keep every varying process");
  app.add_option("--y-type,--y_type", y_type)->check(CLI::IsMember({"continuous", "count"}));
  app.add_flag("--y-nonneg,--y_nonneg", cfg.transform.y_nonneg, "non-negative response (Box-Cox)");
  app.add_option("--tr-num,--tr_num", cfg.transform.tr_num, "number of SAL layers")->check(CLI::NonNegativeNumber);
  app.add_option("--count-delta,--count_delta", cfg.count_delta)->check(CLI::PositiveNumber);
  app.add_option("--threshold", cfg.threshold, "eigenvalue ratio threshold")->check(CLI::Range(0.0, 1.0));
  app.add_option("--seed", cfg.seed);
  app.add_option("--out", cfg.out, "output directory");
  app.add_option("--model", cfg.model, "model archive");
  app.add_option("--data0", cfg.predict_data, "prediction-site CSV");
  app.add_flag("!--no-quantile,!--no_quantile", cfg.compute_quantile);
  app.add_flag("!--no-noise,!--no_noise", cfg.include_noise, "exclude residual variance from pred_transG_se");
  app.add_flag("--geojson", cfg.geojson, "also write GeoJSON points");
  app.add_option("--column", cfg.column, "transform-check column");
  app.add_option("--max-iter,--max_iter", cfg.max_iter)->check(CLI::PositiveNumber);
  app.add_option("--rel-tol,--rel_tol", cfg.rel_tol)->check(CLI::PositiveNumber);

  auto* fit = app.add_subcommand("fit", "fit a model and write tables, density and archive")->fallthrough();
  auto* predict = app.add_subcommand("predict", "predict at new sites from an archive")->fallthrough();
  auto* basis = app.add_subcommand("basis", "extract the eigenvector basis")->fallthrough();
  auto* check = app.add_subcommand("transform-check", "gaussianize one column for D = 0..3")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, e.what());
  }
  cfg.transform.y_type = y_type == "count" ? spwarp::YType::count : spwarp::YType::continuous;
  if (coords.size() == 2) {
    cfg.coord_x = coords[0];
    cfg.coord_y = coords[1];
  }

  try {
    if (fit->parsed()) {
      const auto run = spwarp::cli::run_fit(cfg);
      std::cout << run.report;
    } else if (predict->parsed()) {
      const auto run = spwarp::cli::run_predict(cfg);
      std::cout << run.rows << " rows predicted\n";
      for (const auto& w : run.result.warnings) std::cerr << "warning: " << w << '\n';
    } else if (basis->parsed()) {
      spwarp::cli::run_basis(cfg, std::cout);
    } else if (check->parsed()) {
      spwarp::cli::run_transform_check(cfg, std::cout);
    }
  } catch (const spwarp::Error& e) {
    return fail(e.exit_code(), e.what());
  } catch (const std::exception& e) {
    return fail(4, e.what());
  }
  return 0;
}
