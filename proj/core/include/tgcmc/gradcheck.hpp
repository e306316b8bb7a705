#ifndef TGCMC_GRADCHECK_HPP_
#define TGCMC_GRADCHECK_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tgcmc/model.hpp"
#include "tgcmc/temporal_graph.hpp"

namespace tgcmc {

// A small random problem for finite-difference checks.
struct ToyProblem {
  ModelConfig config;
  SequenceMode mode = SequenceMode::kIncremental;
  std::vector<Edge> edges;
  EncoderGraph graph;
  ModelParameters params;
};

struct ToySpec {
  std::size_t max_users = 8;
  std::size_t max_items = 8;
  RecurrentKind recurrent = RecurrentKind::kGru;
  Accumulation accum = Accumulation::kConcat;
  NormScheme norm = NormScheme::kLeft;
  SequenceMode mode = SequenceMode::kIncremental;
  std::size_t steps = 2;
  double dropout = 0.25;
};

// Draws node counts, widths (d_hidden <= 8, d_output <= 4) and edges from
// `seed`. Parameters are Glorot draws plus uniform noise so biases are
// nonzero.
ToyProblem make_toy_problem(const ToySpec& spec, std::uint64_t seed);

// Mean cross-entropy of the training-mode model with dropout drawn from
// `dropout_seed`; a deterministic function of `params`.
double toy_loss(const ToyProblem& problem, const ModelParameters& params, std::uint64_t dropout_seed);

struct GradcheckOptions {
  double step = 1e-4;
  double tolerance = 1e-4;
  // Lower bound on the relative-error denominator.
  double floor = 1e-6;
  std::uint64_t dropout_seed = 7;
  // Negates the analytic gradient of this parameter (harness self-test).
  std::string flip_sign_of;
};

struct ParameterCheck {
  std::string name;
  std::size_t elements = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<ParameterCheck> parameters;
  // Smallest |x| at any ReLU input in the forward pass.
  double relu_margin = 0.0;

  bool passed() const;
  std::vector<std::string> failures() const;
};

// Analytic gradients from the tape against central differences, every
// element of every parameter.
GradcheckReport check_gradients(const ToyProblem& problem, const GradcheckOptions& options = {});

// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

// Smallest nonzero |x| at any ReLU input of the toy forward pass.
double relu_margin(const ToyProblem& problem, std::uint64_t dropout_seed);

struct SuiteOptions {
  std::uint64_t seed = 1;
  // Upper bound on users and on items per instance.
  std::size_t size = 8;
  std::size_t instances = 24;
  // Instances with a ReLU input closer than this to the kink are redrawn.
  double min_relu_margin = 1e-3;
  std::size_t max_redraws = 100;
  GradcheckOptions check;
};

struct SuiteInstance {
  ToySpec spec;
  std::uint64_t problem_seed = 0;
  std::size_t redraws = 0;
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t n_edges = 0;
  GradcheckReport report;
};

struct SuiteResult {
  std::vector<SuiteInstance> instances;
  bool passed() const;
};

// Cycles through {GRU, LSTM} x {concat, sum} x {left, symmetric}, alternating
// incremental and disjoint sequences with T in 1..3.
SuiteResult run_gradcheck_suite(const SuiteOptions& options);

}  // namespace tgcmc

#endif  // TGCMC_GRADCHECK_HPP_
