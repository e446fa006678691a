// Box-Cox + one SAL layer on the meuse zinc data, then prediction at two grid cells.

#include <iostream>

#include "spwarp/spwarp.hpp"

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : SPWARP_DATA_DIR;
  spwarp::RunConfig cfg;
  cfg.data = dir + "/meuse.csv";
  cfg.response = "zinc";
  cfg.x = {"dist", "ffreq2", "ffreq3"};
  cfg.coord_x = "x";
  cfg.coord_y = "y";
  cfg.transform.y_nonneg = true;
  cfg.transform.tr_num = 1;

  const auto in = spwarp::ingest(spwarp::read_csv(cfg.data), cfg);
  const auto basis = spwarp::extract_basis(spwarp::build_kernel_proximity(in.coords));
  std::cout << basis.rank() << "/" << basis.sites() << " eigen-pairs are extracted\n\n";

  spwarp::ModelSpec spec;
  spec.transform = cfg.transform;
  const auto model = spwarp::fit_resf(in.data, basis, spec);
  spwarp::cli::write_report(std::cout, model, {&cfg, spwarp::distribution_moments(model), nullptr});

  // two prediction cells next to the river
  const spwarp::CoordinateSet grid({{181180, 333740}, {181140, 333700}});
  spwarp::PredictionInput x0;
  x0.x = Eigen::MatrixXd::Zero(2, 3);
  const auto pred = spwarp::predict_oos(model, x0, spwarp::extend_basis(basis, grid));
  std::cout << "\npred  pred_transG  pred_transG_se\n";
  for (Eigen::Index i = 0; i < pred.rows(); ++i)
    std::cout << pred.pred(i) << "  " << pred.pred_transG(i) << "  " << pred.pred_transG_se(i) << '\n';
}
