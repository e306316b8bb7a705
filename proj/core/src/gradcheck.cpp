#include "tgcmc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "tgcmc/error.hpp"
#include "tgcmc/rng.hpp"

namespace tgcmc {
namespace {

struct ForwardResult {
  double loss = 0.0;
  double margin = 0.0;
  diff::Gradients grads;
};

ForwardResult forward(const ToyProblem& p, const ModelParameters& params, std::uint64_t dropout_seed,
                      bool with_grad) {
  std::vector<std::uint32_t> targets;
  targets.reserve(p.edges.size());
  for (const auto& e : p.edges) targets.push_back(e.level);
  diff::Tape tape;
  BoundModel model(tape, params, p.config);
  SeedSequence seeds(dropout_seed);
  const auto enc = encode_sequence(model, p.graph, /*training=*/true, seeds);
  const Var logits = edge_logits(model, enc.z, p.graph, p.edges);
  const Var loss = diff::softmax_cross_entropy(logits, targets);
  ForwardResult out;
  out.loss = loss.value().item();
  out.margin = tape.min_relu_margin();
  if (with_grad) out.grads = tape.backward(loss);
  return out;
}

}  // namespace

ToyProblem make_toy_problem(const ToySpec& spec, std::uint64_t seed) {
  if (spec.max_users < 2 || spec.max_items < 2) throw DomainError("toy problem needs >= 2 users and items");
  if (spec.steps == 0) throw DomainError("toy problem needs at least one step");
  RngStream rng(splitmix64(seed));
  ToyProblem p;
  p.mode = spec.mode;
  ModelConfig& c = p.config;
  c.n_users = 2 + rng.below(spec.max_users - 1);
  c.n_items = 2 + rng.below(spec.max_items - 1);
  c.accum = spec.accum;
  c.norm = spec.norm;
  c.recurrent = spec.recurrent;
  c.dropout = spec.dropout;
  c.steps = spec.mode == SequenceMode::kStatic ? 1 : spec.steps;
  // Concat needs d_hidden divisible by the 5 levels.
  c.d_hidden = spec.accum == Accumulation::kConcat ? 5 : 2 + rng.below(7);
  c.d_output = 2 + rng.below(3);
  c.recurrent_hidden = 2 + rng.below(3);
  c.basis_count = 1 + rng.below(2);
  c.ordinal_sharing = rng.below(4) != 0;
  c.validate();

  const std::size_t cells = c.n_users * c.n_items;
  const std::size_t lo = std::max(c.steps, std::min(cells, std::max(c.n_users, c.n_items)));
  const std::size_t n_edges = lo + rng.below(cells - lo + 1);
  std::vector<std::size_t> order(cells);
  for (std::size_t i = 0; i < cells; ++i) order[i] = i;
  for (std::size_t i = cells; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  for (std::size_t k = 0; k < n_edges; ++k) {
    p.edges.push_back(Edge{static_cast<std::uint32_t>(order[k] / c.n_items),
                           static_cast<std::uint32_t>(order[k] % c.n_items),
                           static_cast<std::uint32_t>(rng.below(c.n_levels()))});
  }
  p.graph = prepare_encoder_graph(make_sequence(p.edges, spec.mode, c.steps), c);

  p.params = init_parameters(c, rng.next_u64());
  for (auto& [name, t] : p.params) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += rng.uniform(-0.3, 0.3);
  }
  return p;
}

double toy_loss(const ToyProblem& problem, const ModelParameters& params, std::uint64_t dropout_seed) {
  return forward(problem, params, dropout_seed, false).loss;
}

double relu_margin(const ToyProblem& problem, std::uint64_t dropout_seed) {
  return forward(problem, problem.params, dropout_seed, false).margin;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

bool GradcheckReport::passed() const {
  return !parameters.empty() &&
         std::all_of(parameters.begin(), parameters.end(), [](const auto& c) { return c.passed; });
}

std::vector<std::string> GradcheckReport::failures() const {
  std::vector<std::string> out;
  for (const auto& c : parameters) {
    if (!c.passed) out.push_back(c.name);
  }
  return out;
}

GradcheckReport check_gradients(const ToyProblem& problem, const GradcheckOptions& options) {
  if (!(options.step > 0.0)) throw DomainError("finite-difference step must be positive");
  const ForwardResult base = forward(problem, problem.params, options.dropout_seed, true);
  GradcheckReport report;
  report.relu_margin = base.margin;

  ModelParameters probe = problem.params;
  for (const auto& [name, value] : problem.params) {
    Tensor analytic = base.grads.at(name);
    if (name == options.flip_sign_of) {
      for (std::size_t i = 0; i < analytic.size(); ++i) analytic[i] = -analytic[i];
    }
    ParameterCheck check;
    check.name = name;
    check.elements = value.size();
    Tensor& slot = probe.at(name);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double x = value[i];
      slot[i] = x + options.step;
      const double up = toy_loss(problem, probe, options.dropout_seed);
      slot[i] = x - options.step;
      const double down = toy_loss(problem, probe, options.dropout_seed);
      slot[i] = x;
      const double numeric = (up - down) / (2.0 * options.step);
      const double err = relative_error(analytic[i], numeric, options.floor);
      if (err > check.max_rel_error || i == 0) {
        check.max_rel_error = std::max(check.max_rel_error, err);
        check.worst_index = i;
        check.analytic = analytic[i];
        check.numeric = numeric;
      }
    }
    check.passed = check.max_rel_error <= options.tolerance;
    report.parameters.push_back(std::move(check));
  }
  return report;
}

}  // namespace tgcmc

namespace tgcmc {

bool SuiteResult::passed() const {
  return !instances.empty() && std::all_of(instances.begin(), instances.end(),
                                           [](const auto& i) { return i.report.passed(); });
}

SuiteResult run_gradcheck_suite(const SuiteOptions& options) {
  const SeedSequence master(options.seed);
  SuiteResult out;
  for (std::size_t i = 0; i < options.instances; ++i) {
    SuiteInstance inst;
    ToySpec& spec = inst.spec;
    spec.max_users = options.size;
    spec.max_items = options.size;
    spec.recurrent = i % 2 == 0 ? RecurrentKind::kGru : RecurrentKind::kLstm;
    spec.accum = (i / 2) % 2 == 0 ? Accumulation::kConcat : Accumulation::kSum;
    spec.norm = (i / 4) % 2 == 0 ? NormScheme::kLeft : NormScheme::kSymmetric;
    spec.mode = (i / 8) % 2 == 0 ? SequenceMode::kIncremental : SequenceMode::kDisjoint;
    spec.steps = 1 + i % 3;

    const SeedSequence instance_seeds(master.derive(i));
    ToyProblem problem;
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt > options.max_redraws) {
        throw DomainError("no toy instance with a ReLU margin of " + std::to_string(options.min_relu_margin) +
                          " after " + std::to_string(options.max_redraws) + " redraws");
      }
      inst.problem_seed = instance_seeds.derive(attempt);
      problem = make_toy_problem(spec, inst.problem_seed);
      if (relu_margin(problem, options.check.dropout_seed) >= options.min_relu_margin) {
        inst.redraws = attempt;
        break;
      }
    }
    inst.n_users = problem.config.n_users;
    inst.n_items = problem.config.n_items;
    inst.n_edges = problem.edges.size();
    inst.report = check_gradients(problem, options.check);
    out.instances.push_back(std::move(inst));
  }
  return out;
}

}  // namespace tgcmc
