#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace levelblend::cma {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Evaluates a whole population at once; must return one value per candidate.
using BatchObjective = std::function<std::vector<double>(const std::vector<Vector>&)>;
using Objective = std::function<double(const Vector&)>;

struct Options {
  Vector mean0;             // dimension is taken from here
  double sigma0 = 0.5;
  long budget = 10000;      // maximum objective evaluations
  double stop_fitness = -std::numeric_limits<double>::infinity();
  std::uint64_t seed = 1;
  std::optional<int> population;  // default 4 + floor(3 ln n)
  double eigenvalue_floor = 1e-12;
  double min_step = 1e-14;  // sigma * largest axis below this ends the run
};

// Strategy parameters derived from dimension and population size.
struct Parameters {
  int dimension = 0;
  int lambda = 0;
  int mu = 0;
  std::vector<double> weights;
  double mu_eff = 0.0;
  double c_sigma = 0.0;
  double d_sigma = 0.0;
  double c_c = 0.0;
  double c_1 = 0.0;
  double c_mu = 0.0;
  double chi_n = 0.0;

  static Parameters standard(int dimension, std::optional<int> lambda = std::nullopt);
};

struct State {
  Vector mean;
  double sigma = 0.0;
  Matrix covariance;
  Vector p_sigma;
  Vector p_c;
  int generation = 0;
};

enum class Termination { Budget, StopFitness, SigmaUnderflow };

std::string_view termination_name(Termination t) noexcept;

struct GenerationRecord {
  int generation = 0;
  long evaluations = 0;
  double best_in_generation = 0.0;
  double best_so_far = 0.0;
  double sigma = 0.0;
};

struct Result {
  Vector best;
  double best_fitness = std::numeric_limits<double>::infinity();
  long evaluations = 0;
  int generations = 0;
  Termination termination = Termination::Budget;
  // Set when some generation produced the same value for its best and its
  // 70th-percentile candidate; the step size is then inflated.
  bool flat_fitness = false;
  std::vector<GenerationRecord> history;
};

// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation and
// rank-one plus rank-mu covariance updates.
class Optimizer {
 public:
  explicit Optimizer(const Options& options);

  // Samples lambda candidates from N(mean, sigma^2 C).
  std::vector<Vector> ask();

  // Updates the distribution from the candidates of the last ask().
  // Returns true if the fitness values were flat.
  bool tell(const std::vector<Vector>& candidates, const std::vector<double>& fitness);

  const State& state() const { return state_; }
  const Parameters& parameters() const { return params_; }

  // sigma times the largest standard deviation along a principal axis.
  double max_step() const;

 private:
  void update_eigensystem();

  Options options_;
  Parameters params_;
  State state_;
  Matrix basis_;        // eigenvectors of C
  Vector axis_scales_;  // sqrt of eigenvalues
  Matrix inv_sqrt_c_;
  int eigen_generation_ = 0;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::vector<Vector> last_steps_;  // y = B D z of the last ask()
};

// Throws Error(InvalidBudget) if the budget cannot cover one generation or
// sigma0 is not positive, and Error(NonFiniteFitness) on NaN/inf fitness.
Result minimize(const BatchObjective& f, const Options& options);
Result minimize(const Objective& f, const Options& options);

}  // namespace levelblend::cma
