#include "levelblend/cma.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "levelblend/error.hpp"

namespace levelblend::cma {

namespace {

constexpr double kMaxSigmaGrowth = 1e20;

std::string describe(const Vector& x) {
  std::ostringstream s;
  s << '[';
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(x.size(), 4); ++i) s << (i ? ", " : "") << x[i];
  if (x.size() > 4) s << ", ...";
  s << ']';
  return s.str();
}

}  // namespace

std::string_view termination_name(Termination t) noexcept {
  switch (t) {
    case Termination::Budget: return "budget";
    case Termination::StopFitness: return "stop_fitness";
    case Termination::SigmaUnderflow: return "sigma_underflow";
  }
  return "budget";
}

Parameters Parameters::standard(int dimension, std::optional<int> lambda) {
  Parameters p;
  const double n = dimension;
  p.dimension = dimension;
  p.lambda = lambda.value_or(4 + static_cast<int>(std::floor(3.0 * std::log(n))));
  p.mu = p.lambda / 2;

  p.weights.resize(static_cast<std::size_t>(p.mu));
  for (int i = 0; i < p.mu; ++i) {
    p.weights[static_cast<std::size_t>(i)] = std::log(p.mu + 0.5) - std::log(i + 1.0);
  }
  const double sum = std::accumulate(p.weights.begin(), p.weights.end(), 0.0);
  double sum_sq = 0.0;
  for (double& w : p.weights) {
    w /= sum;
    sum_sq += w * w;
  }
  p.mu_eff = 1.0 / sum_sq;

  p.c_sigma = (p.mu_eff + 2.0) / (n + p.mu_eff + 5.0);
  p.d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((p.mu_eff - 1.0) / (n + 1.0)) - 1.0) + p.c_sigma;
  p.c_c = (4.0 + p.mu_eff / n) / (n + 4.0 + 2.0 * p.mu_eff / n);
  p.c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + p.mu_eff);
  p.c_mu = std::min(1.0 - p.c_1,
                    2.0 * (p.mu_eff - 2.0 + 1.0 / p.mu_eff) / ((n + 2.0) * (n + 2.0) + p.mu_eff));
  p.chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
  return p;
}

Optimizer::Optimizer(const Options& options)
    : options_(options), rng_(options.seed) {
  const auto n = options.mean0.size();
  if (n < 1) throw Error(ErrorCode::InvalidSpec, "CMA-ES needs a non-empty initial mean");
  if (!(options.sigma0 > 0.0) || !std::isfinite(options.sigma0)) {
    throw Error(ErrorCode::InvalidBudget, "sigma0 must be positive");
  }
  params_ = Parameters::standard(static_cast<int>(n), options.population);
  if (params_.lambda < 2) throw Error(ErrorCode::InvalidSpec, "population must be at least 2");

  state_.mean = options.mean0;
  state_.sigma = options.sigma0;
  state_.covariance = Matrix::Identity(n, n);
  state_.p_sigma = Vector::Zero(n);
  state_.p_c = Vector::Zero(n);
  basis_ = Matrix::Identity(n, n);
  axis_scales_ = Vector::Ones(n);
  inv_sqrt_c_ = Matrix::Identity(n, n);
}

double Optimizer::max_step() const { return state_.sigma * axis_scales_.maxCoeff(); }

std::vector<Vector> Optimizer::ask() {
  const auto n = state_.mean.size();
  std::vector<Vector> candidates;
  last_steps_.clear();
  candidates.reserve(static_cast<std::size_t>(params_.lambda));
  last_steps_.reserve(static_cast<std::size_t>(params_.lambda));
  for (int k = 0; k < params_.lambda; ++k) {
    Vector z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = normal_(rng_);
    Vector y = basis_ * axis_scales_.cwiseProduct(z);
    candidates.push_back(state_.mean + state_.sigma * y);
    last_steps_.push_back(std::move(y));
  }
  return candidates;
}

bool Optimizer::tell(const std::vector<Vector>& candidates, const std::vector<double>& fitness) {
  const auto& p = params_;
  const auto n = state_.mean.size();
  if (candidates.size() != static_cast<std::size_t>(p.lambda) || fitness.size() != candidates.size()) {
    throw Error(ErrorCode::InvalidSpec, "tell() needs one fitness value per candidate of ask()");
  }

  std::vector<std::size_t> rank(candidates.size());
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return fitness[a] < fitness[b]; });

  Vector y_w = Vector::Zero(n);
  for (int i = 0; i < p.mu; ++i) {
    y_w += p.weights[static_cast<std::size_t>(i)] * last_steps_[rank[static_cast<std::size_t>(i)]];
  }
  state_.mean += state_.sigma * y_w;
  ++state_.generation;

  state_.p_sigma = (1.0 - p.c_sigma) * state_.p_sigma +
                   std::sqrt(p.c_sigma * (2.0 - p.c_sigma) * p.mu_eff) * (inv_sqrt_c_ * y_w);
  const double ps_norm = state_.p_sigma.norm();
  const double correction = std::sqrt(1.0 - std::pow(1.0 - p.c_sigma, 2.0 * state_.generation));
  const bool h_sigma = ps_norm / correction / p.chi_n < 1.4 + 2.0 / (static_cast<double>(n) + 1.0);

  state_.p_c = (1.0 - p.c_c) * state_.p_c +
               (h_sigma ? std::sqrt(p.c_c * (2.0 - p.c_c) * p.mu_eff) : 0.0) * y_w;

  Matrix rank_mu = Matrix::Zero(n, n);
  for (int i = 0; i < p.mu; ++i) {
    const Vector& y = last_steps_[rank[static_cast<std::size_t>(i)]];
    rank_mu.noalias() += p.weights[static_cast<std::size_t>(i)] * (y * y.transpose());
  }
  const double lost = h_sigma ? 0.0 : p.c_1 * p.c_c * (2.0 - p.c_c);
  state_.covariance = (1.0 - p.c_1 - p.c_mu + lost) * state_.covariance +
                      p.c_1 * (state_.p_c * state_.p_c.transpose()) + p.c_mu * rank_mu;

  state_.sigma *= std::exp((p.c_sigma / p.d_sigma) * (ps_norm / p.chi_n - 1.0));

  const std::size_t pct70 = static_cast<std::size_t>(std::ceil(0.7 * p.lambda)) - 1;
  const bool flat = fitness[rank.front()] == fitness[rank[pct70]];
  if (flat) state_.sigma *= std::exp(0.2 + p.c_sigma / p.d_sigma);
  state_.sigma = std::min(state_.sigma, options_.sigma0 * kMaxSigmaGrowth);

  // Lazy eigendecomposition: C changes slowly relative to its O(n^3) cost.
  if (state_.generation - eigen_generation_ > p.lambda / (p.c_1 + p.c_mu) / static_cast<double>(n) / 10.0) {
    update_eigensystem();
  }
  return flat;
}

void Optimizer::update_eigensystem() {
  eigen_generation_ = state_.generation;
  Matrix c = 0.5 * (state_.covariance + state_.covariance.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(c);
  Vector eigenvalues = solver.eigenvalues().cwiseMax(options_.eigenvalue_floor);
  basis_ = solver.eigenvectors();
  // Keep C consistent with the repaired spectrum.
  state_.covariance = basis_ * eigenvalues.asDiagonal() * basis_.transpose();
  axis_scales_ = eigenvalues.cwiseSqrt();
  inv_sqrt_c_ = basis_ * axis_scales_.cwiseInverse().asDiagonal() * basis_.transpose();
}

Result minimize(const BatchObjective& f, const Options& options) {
  Optimizer opt(options);
  const int lambda = opt.parameters().lambda;
  if (options.budget < lambda) {
    throw Error(ErrorCode::InvalidBudget, "budget " + std::to_string(options.budget) +
                                              " is smaller than one generation (" +
                                              std::to_string(lambda) + " evaluations)");
  }

  Result result;
  result.best = options.mean0;
  while (true) {
    auto candidates = opt.ask();
    const auto fitness = f(candidates);
    if (fitness.size() != candidates.size()) {
      throw Error(ErrorCode::InvalidSpec, "objective returned the wrong number of values");
    }
    result.evaluations += lambda;
    double gen_best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < fitness.size(); ++k) {
      if (!std::isfinite(fitness[k])) {
        throw Error(ErrorCode::NonFiniteFitness, "objective returned " + std::to_string(fitness[k]) +
                                                     " at " + describe(candidates[k]));
      }
      gen_best = std::min(gen_best, fitness[k]);
      if (fitness[k] < result.best_fitness) {
        result.best_fitness = fitness[k];
        result.best = candidates[k];
      }
    }
    result.flat_fitness = opt.tell(candidates, fitness) || result.flat_fitness;
    ++result.generations;
    result.history.push_back({result.generations, result.evaluations, gen_best, result.best_fitness,
                              opt.state().sigma});

    if (result.best_fitness <= options.stop_fitness) {
      result.termination = Termination::StopFitness;
      break;
    }
    if (opt.max_step() < options.min_step) {
      result.termination = Termination::SigmaUnderflow;
      break;
    }
    if (result.evaluations + lambda > options.budget) {
      result.termination = Termination::Budget;
      break;
    }
  }
  return result;
}

Result minimize(const Objective& f, const Options& options) {
  return minimize(
      BatchObjective([&f](const std::vector<Vector>& xs) {
        std::vector<double> out;
        out.reserve(xs.size());
        for (const auto& x : xs) out.push_back(f(x));
        return out;
      }),
      options);
}

}  // namespace levelblend::cma
