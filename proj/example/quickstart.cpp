// Fit a forest on synthetic Cox data and print the global shape functions.

#include <iostream>

#include "coxnam/explain.hpp"
#include "coxnam/export.hpp"
#include "coxnam/forest.hpp"
#include "coxnam/synthetic.hpp"

int main() {
  using namespace coxnam;

  SyntheticSpec spec;
  spec.terms = {{"linear", 1.0}, {"sin3", 1.0}, {"zero", 0.0}};
  spec.n = 400;
  spec.censoring_rate = 0.2;
  spec.seed = 1;
  const SyntheticData data = generate_cox_data(spec);

  ForestConfig fc;
  fc.n_trees = 100;
  fc.seed = 1;
  const SurvivalForest forest = fit_forest(data.dataset, fc);
  const PiecewiseChf baseline = nelson_aalen(data.dataset, forest.grid());

  ExplainOptions opt;
  opt.nam.epochs = 500;
  opt.seed = 2;
  const Explanation ex = explain_global(forest, baseline, data.dataset, opt);

  for (std::size_t k = 0; k < ex.feature_names.size(); ++k) {
    std::cout << ex.feature_names[k] << " range " << ex.curve_range(k) << "\n";
  }
  write_explanation_csv(std::cout, ex);
  return 0;
}
