#include "isde/harness/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "isde/errors.hpp"

namespace isde::harness {

namespace {

using nlohmann::json;

// Substream reserved for generated observations, far from trajectory indices.
constexpr std::uint64_t kObservationStream = 0xFFFF'FFFF'0000'0001ULL;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(where + ": missing required key '" + key + "'");
  return *it;
}

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  return v.get<double>();
}

std::size_t as_count(const json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError(where + ": expected a nonnegative integer");
  }
  return v.get<std::size_t>();
}

// A state is a number (broadcast to `dim`) or an array of numbers.
State as_state(const json& v, Eigen::Index dim, const std::string& where) {
  if (v.is_number()) return State::Constant(dim, v.get<double>());
  if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected a number or a nonempty array");
  State s(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    s[static_cast<Eigen::Index>(i)] = as_number(v[i], where);
  }
  if (s.size() != dim) {
    std::ostringstream os;
    os << where << ": has " << s.size() << " components, expected " << dim;
    throw ConfigError(os.str());
  }
  return s;
}

template <class T>
std::vector<T> as_list(const json& v, const std::string& where, T (*conv)(const json&, const std::string&)) {
  if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected a nonempty array");
  std::vector<T> out;
  for (const auto& e : v) out.push_back(conv(e, where));
  return out;
}

Eigen::Index infer_dimension(const json& doc) {
  if (auto it = doc.find("dim"); it != doc.end()) {
    const std::size_t d = as_count(*it, "dim");
    if (d == 0) throw ConfigError("dim: must be at least 1");
    return static_cast<Eigen::Index>(d);
  }
  if (auto it = doc.find("y"); it != doc.end() && it->is_array()) {
    return static_cast<Eigen::Index>(it->size());
  }
  if (auto it = doc.find("prior"); it != doc.end() && it->is_object()) {
    for (const char* key : {"x0", "mean"}) {
      if (auto m = it->find(key); m != it->end() && m->is_array()) {
        return static_cast<Eigen::Index>(m->size());
      }
    }
  }
  return 1;
}

SdeParams parse_sde(const json& v) {
  const std::string where = "sde";
  if (!v.is_object()) throw ConfigError(where + ": expected an object");
  reject_unknown(v, {"kind", "sigma_min", "sigma_max", "gamma0", "c", "r", "t_rev", "delta"}, where);
  SdeParams p;
  const json& kind = require(v, "kind", where);
  if (!kind.is_string()) throw ConfigError("sde.kind: expected a string");
  try {
    p.kind = sde_kind_from_string(kind.get<std::string>());
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("sde.kind: ") + e.what());
  }
  auto read = [&](const char* key, double& field) {
    if (auto it = v.find(key); it != v.end()) field = as_number(*it, "sde." + std::string(key));
  };
  read("sigma_min", p.sigma_min);
  read("sigma_max", p.sigma_max);
  read("gamma0", p.gamma0);
  read("c", p.c);
  read("r", p.r);
  if (auto it = v.find("t_rev"); it != v.end()) p.t_rev = as_number(*it, "sde.t_rev");
  if (auto it = v.find("delta"); it != v.end()) p.delta = as_number(*it, "sde.delta");
  return p;
}

ToyPrior parse_prior(const json& v, Eigen::Index dim) {
  const std::string where = "prior";
  if (!v.is_object()) throw ConfigError(where + ": expected an object");
  const std::string kind = require(v, "kind", where).get<std::string>();
  if (kind == "delta") {
    reject_unknown(v, {"kind", "x0"}, where);
    return ToyPrior::delta(as_state(require(v, "x0", where), dim, "prior.x0"));
  }
  if (kind == "gaussian") {
    reject_unknown(v, {"kind", "mean", "std", "variance"}, where);
    const State mean = as_state(require(v, "mean", where), dim, "prior.mean");
    const bool has_std = v.contains("std");
    if (has_std == v.contains("variance")) {
      throw ConfigError("prior: give exactly one of 'std' and 'variance'");
    }
    double var = has_std ? as_number(v["std"], "prior.std") : as_number(v["variance"], "prior.variance");
    if (has_std) var *= var;
    return ToyPrior::gaussian(mean, var);
  }
  if (kind == "mixture") {
    reject_unknown(v, {"kind", "weights", "means", "variances"}, where);
    auto weights = as_list<double>(require(v, "weights", where), "prior.weights", as_number);
    auto variances = as_list<double>(require(v, "variances", where), "prior.variances", as_number);
    const json& means_json = require(v, "means", where);
    if (!means_json.is_array()) throw ConfigError("prior.means: expected an array");
    std::vector<State> means;
    for (const auto& m : means_json) means.push_back(as_state(m, dim, "prior.means"));
    return ToyPrior::mixture(std::move(weights), std::move(means), std::move(variances));
  }
  throw ConfigError("prior.kind: expected 'delta', 'gaussian' or 'mixture', got '" + kind + "'");
}

State parse_observation(const json& v, Eigen::Index dim, std::uint64_t seed) {
  if (!v.is_object()) return as_state(v, dim, "y");
  const std::string where = "y";
  const std::string gen = require(v, "generator", where).get<std::string>();
  if (gen == "constant") {
    reject_unknown(v, {"generator", "value"}, where);
    return State::Constant(dim, as_number(require(v, "value", where), "y.value"));
  }
  if (gen == "gaussian") {
    reject_unknown(v, {"generator", "mean", "std"}, where);
    const double mean = as_number(require(v, "mean", where), "y.mean");
    const double sd = as_number(require(v, "std", where), "y.std");
    if (!(sd >= 0.0)) throw ConfigError("y.std: must be nonnegative");
    Rng rng(substream_seed(seed, kObservationStream));
    return State::Constant(dim, mean) + sd * rng.gaussian_vector(dim);
  }
  throw ConfigError("y.generator: expected 'constant' or 'gaussian', got '" + gen + "'");
}

SolverConfig parse_solver_json(const json& v, const std::string& where) {
  if (!v.is_object()) throw ConfigError(where + ": expected an object");
  reject_unknown(v, {"kind", "order", "kappa", "snr", "rtol", "atol", "derivative", "weights",
                     "prediction", "steps", "nfe", "record_trajectory"},
                 where);
  SolverConfig s;
  try {
    s.spec.kind = solver_kind_from_string(require(v, "kind", where).get<std::string>());
  } catch (const ParameterError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  s.spec.kappa = 0.0;
  if (s.spec.kind == SolverKind::kPredictorCorrector) s.spec.kappa = 1.0;
  if (auto it = v.find("order"); it != v.end()) {
    s.spec.order = static_cast<int>(as_count(*it, where + ".order"));
  }
  if (auto it = v.find("kappa"); it != v.end()) s.spec.kappa = as_number(*it, where + ".kappa");
  if (auto it = v.find("snr"); it != v.end()) s.spec.corrector_snr = as_number(*it, where + ".snr");
  if (auto it = v.find("rtol"); it != v.end()) s.spec.rtol = as_number(*it, where + ".rtol");
  if (auto it = v.find("atol"); it != v.end()) s.spec.atol = as_number(*it, where + ".atol");
  if (auto it = v.find("derivative"); it != v.end()) {
    const std::string d = it->get<std::string>();
    if (d == "forward") {
      s.spec.derivative = DerivativeRule::kForwardDifference;
    } else if (d == "quarter") {
      s.spec.derivative = DerivativeRule::kQuarterDifference;
    } else {
      throw ConfigError(where + ".derivative: expected 'forward' or 'quarter'");
    }
  }
  if (auto it = v.find("weights"); it != v.end()) {
    const std::string w = it->get<std::string>();
    if (w == "auto") {
      s.spec.weights = WeightMethod::kAuto;
    } else if (w == "closed_form") {
      s.spec.weights = WeightMethod::kClosedForm;
    } else if (w == "quadrature") {
      s.spec.weights = WeightMethod::kQuadrature;
    } else {
      throw ConfigError(where + ".weights: expected 'auto', 'closed_form' or 'quadrature'");
    }
  }
  if (auto it = v.find("prediction"); it != v.end()) {
    const std::string p = it->get<std::string>();
    if (p == "score") {
      s.prediction = Prediction::kScore;
    } else if (p == "noise") {
      s.prediction = Prediction::kNoise;
    } else {
      throw ConfigError(where + ".prediction: expected 'score' or 'noise'");
    }
    if (s.prediction == Prediction::kNoise && s.spec.kind != SolverKind::kIsde) {
      throw ConfigError(where + ".prediction: noise models are only supported by the iSDE solver");
    }
  }
  if (auto it = v.find("steps"); it != v.end()) s.steps = as_count(*it, where + ".steps");
  if (auto it = v.find("nfe"); it != v.end()) s.nfe = as_count(*it, where + ".nfe");
  if (s.steps && s.nfe) throw ConfigError(where + ": give at most one of 'steps' and 'nfe'");
  if (auto it = v.find("record_trajectory"); it != v.end()) {
    s.spec.record_trajectory = it->get<bool>();
  }
  try {
    s.spec.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return s;
}

std::uint64_t parse_seed(const json& doc, std::optional<std::uint64_t> override_seed) {
  if (override_seed) return *override_seed;
  auto it = doc.find("seed");
  if (it == doc.end()) throw ConfigError("seed: required (or pass --seed)");
  if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
    throw ConfigError("seed: expected a nonnegative integer");
  }
  return it->get<std::uint64_t>();
}

ExperimentConfig parse_document(json doc, std::optional<std::uint64_t> override_seed) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown(doc,
                 {"seed", "dim", "sde", "prior", "y", "x_T", "init", "solvers", "n_trajectories",
                  "convergence", "nfe_sweep", "kappa_sweep", "marginal_check", "forward",
                  "verify_weights", "outputs", "description"},
                 "config");
  ExperimentConfig c;
  c.seed = parse_seed(doc, override_seed);
  doc["seed"] = c.seed;
  const Eigen::Index dim = infer_dimension(doc);

  c.sde = parse_sde(require(doc, "sde", "config"));
  c.prior = parse_prior(require(doc, "prior", "config"), dim);
  c.y = parse_observation(require(doc, "y", "config"), dim, c.seed);

  if (auto it = doc.find("x_T"); it != doc.end()) {
    c.x_T = as_state(*it, dim, "x_T");
    c.init = InitMode::kFixed;
  }
  if (auto it = doc.find("init"); it != doc.end()) {
    const std::string m = it->get<std::string>();
    if (m == "fixed") {
      c.init = InitMode::kFixed;
    } else if (m == "marginal") {
      c.init = InitMode::kMarginal;
    } else if (m == "observation") {
      c.init = InitMode::kObservation;
    } else {
      throw ConfigError("init: expected 'fixed', 'marginal' or 'observation'");
    }
  }
  if (auto it = doc.find("solvers"); it != doc.end()) {
    if (!it->is_array()) throw ConfigError("solvers: expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      c.solvers.push_back(parse_solver_json((*it)[i], "solvers[" + std::to_string(i) + "]"));
    }
  }
  if (auto it = doc.find("n_trajectories"); it != doc.end()) {
    c.n_trajectories = as_count(*it, "n_trajectories");
  }

  auto section = [&](const char* name, std::set<std::string> keys) -> const json* {
    auto it = doc.find(name);
    if (it == doc.end()) return nullptr;
    if (!it->is_object()) throw ConfigError(std::string(name) + ": expected an object");
    reject_unknown(*it, keys, name);
    return &*it;
  };
  if (const json* s = section("convergence", {"steps"}); s && s->contains("steps")) {
    c.convergence.steps = as_list<std::size_t>((*s)["steps"], "convergence.steps", as_count);
  }
  if (const json* s = section("nfe_sweep", {"budgets"}); s && s->contains("budgets")) {
    c.nfe_sweep.budgets = as_list<std::size_t>((*s)["budgets"], "nfe_sweep.budgets", as_count);
  }
  if (const json* s = section("kappa_sweep", {"kappas", "nfe", "order"})) {
    if (s->contains("kappas")) {
      c.kappa_sweep.kappas = as_list<double>((*s)["kappas"], "kappa_sweep.kappas", as_number);
    }
    if (s->contains("nfe")) c.kappa_sweep.nfe = as_count((*s)["nfe"], "kappa_sweep.nfe");
    if (s->contains("order")) {
      c.kappa_sweep.order = static_cast<int>(as_count((*s)["order"], "kappa_sweep.order"));
    }
  }
  if (const json* s = section("marginal_check", {"mean_standard_errors", "variance_relative"})) {
    if (s->contains("mean_standard_errors")) {
      c.marginal_check.mean_standard_errors =
          as_number((*s)["mean_standard_errors"], "marginal_check.mean_standard_errors");
    }
    if (s->contains("variance_relative")) {
      c.marginal_check.variance_relative =
          as_number((*s)["variance_relative"], "marginal_check.variance_relative");
    }
  }
  if (const json* s = section("forward", {"times"}); s && s->contains("times")) {
    c.forward.times = as_list<double>((*s)["times"], "forward.times", as_number);
  }
  if (const json* s = section("verify_weights", {"intervals"}); s && s->contains("intervals")) {
    c.verify_weights.intervals = as_count((*s)["intervals"], "verify_weights.intervals");
  }
  if (const json* s = section("outputs", {"csv", "timing", "manifest"})) {
    for (const auto& [key, value] : s->items()) {
      if (!value.is_string()) throw ConfigError("outputs." + key + ": expected a file name");
      c.outputs[key] = value.get<std::string>();
    }
  }
  c.source = doc.dump(2);
  c.validate();
  return c;
}

}  // namespace

std::string_view to_string(InitMode mode) {
  switch (mode) {
    case InitMode::kFixed: return "fixed";
    case InitMode::kMarginal: return "marginal";
    case InitMode::kObservation: return "observation";
  }
  return "unknown";
}

std::string SolverConfig::label() const {
  std::string l = spec.label();
  if (prediction == Prediction::kNoise) l += "-eps";
  return l;
}

std::size_t steps_for_budget(const SolverConfig& solver, std::size_t budget) {
  const std::size_t per_step = solver.spec.nfe_per_step();
  if (per_step == 0) {
    throw ConfigError(solver.label() + ": adaptive solver has no fixed NFE budget");
  }
  if (budget == 0 || budget % per_step != 0) {
    std::ostringstream os;
    os << solver.label() << ": NFE budget " << budget << " is not a positive multiple of its "
       << per_step << " evaluations per step";
    throw ConfigError(os.str());
  }
  return budget / per_step;
}

std::size_t SolverConfig::resolve_steps() const {
  if (steps) {
    if (*steps == 0) throw ConfigError(label() + ": steps must be positive");
    return *steps;
  }
  if (nfe) return steps_for_budget(*this, *nfe);
  throw ConfigError(label() + ": needs 'steps' or 'nfe'");
}

ExperimentConfig ExperimentConfig::canonical(std::uint64_t seed) {
  ExperimentConfig c;
  c.seed = seed;
  c.sde = SdeParams{};
  c.sde.kind = SdeKind::kFOUVE;
  c.sde.sigma_min = 1e-3;
  c.sde.sigma_max = 0.1;
  c.sde.gamma0 = 2.0;
  c.prior = ToyPrior::gaussian(State::Constant(1, 0.5), 0.04);
  c.y = State::Constant(1, 1.0);
  c.x_T = State::Constant(1, 1.07);
  c.init = InitMode::kFixed;
  auto add = [&](SolverSpec spec) {
    SolverConfig s;
    s.spec = spec;
    c.solvers.push_back(s);
  };
  add(SolverSpec::isde(2, 0.0));
  add(SolverSpec::isde(1, 0.0));
  add(SolverSpec::euler_maruyama(0.0));
  add(SolverSpec::rk2_midpoint());
  c.source = R"({"canonical": true})";
  return c;
}

void ExperimentConfig::validate() const {
  try {
    sde.validate();
    InterpolatingSde s(sde);
    check_same_dimension(prior.components().front().mean, y, "prior and y");
    if (x_T) check_same_dimension(*x_T, y, "x_T and y");
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (init == InitMode::kFixed && !x_T) throw ConfigError("init 'fixed' needs x_T");
  if (n_trajectories == 0) throw ConfigError("n_trajectories: must be positive");
  for (double k : kappa_sweep.kappas) {
    if (!(k >= 0.0 && k <= 1.0)) throw ConfigError("kappa_sweep.kappas: values must lie in [0, 1]");
  }
  if (kappa_sweep.order != 1 && kappa_sweep.order != 2) {
    throw ConfigError("kappa_sweep.order: must be 1 or 2");
  }
  for (std::size_t m : convergence.steps) {
    if (m == 0) throw ConfigError("convergence.steps: values must be positive");
  }
}

ExperimentConfig parse_config(const std::string& json_text,
                              std::optional<std::uint64_t> seed_override) {
  json doc;
  try {
    doc = json::parse(json_text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    return parse_document(std::move(doc), seed_override);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config has a value of the wrong type: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<std::uint64_t> seed_override) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return parse_config(os.str(), seed_override);
}

SolverConfig parse_solver(const std::string& json_text) {
  try {
    return parse_solver_json(json::parse(json_text), "solver");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("solver: ") + e.what());
  }
}

}  // namespace isde::harness
