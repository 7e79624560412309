#include "config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "ldmm/errors.hpp"
#include "ldmm/rng.hpp"
#include "ldmm/serialize.hpp"

namespace ldmm::app {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(section) + " must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!keys.contains(key)) throw ConfigError("unknown key '" + key + "' in " + section);
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

std::vector<LossFamily> parse_families(const json& j) {
  std::vector<LossFamily> out;
  if (!j.is_array()) throw ConfigError("families must be a list");
  for (const auto& f : j) out.push_back(parse_family(f.get<std::string>()));
  return out;
}

SimulateSpec parse_simulate(const json& j) {
  reject_unknown(j, "simulate", {"n", "vocabulary_size", "theta", "components", "psi", "planted", "length"});
  SimulateSpec s;
  read(j, "n", s.n);
  read(j, "vocabulary_size", s.vocabulary_size);
  if (!j.contains("theta") || !j.contains("components")) {
    throw ConfigError("simulate needs theta and components");
  }
  const auto theta = j.at("theta").get<std::vector<double>>();
  s.truth.theta = Eigen::Map<const Vector>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  for (const auto& c : j.at("components")) {
    try {
      s.truth.components.push_back(io::loss_params_from_json(c));
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
  }
  const std::size_t K = s.truth.components.size();
  if (j.contains("psi")) {
    const auto rows = j.at("psi").get<std::vector<std::vector<double>>>();
    if (rows.size() != K) throw ConfigError("simulate.psi needs one row per component");
    s.vocabulary_size = rows.front().size();
    s.truth.psi = RowMatrix(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(s.vocabulary_size));
    for (std::size_t k = 0; k < K; ++k) {
      if (rows[k].size() != s.vocabulary_size) throw ConfigError("simulate.psi rows differ in length");
      for (std::size_t v = 0; v < s.vocabulary_size; ++v) {
        s.truth.psi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(v)) = rows[k][v];
      }
    }
  } else {
    std::size_t keywords = 10;
    double mass = 0.8;
    if (j.contains("planted")) {
      reject_unknown(j.at("planted"), "simulate.planted", {"keywords", "mass"});
      read(j.at("planted"), "keywords", keywords);
      read(j.at("planted"), "mass", mass);
    }
    s.truth.psi = planted_topics(K, s.vocabulary_size, keywords, mass);
  }
  if (j.contains("length")) {
    reject_unknown(j.at("length"), "simulate.length", {"min", "max"});
    read(j.at("length"), "min", s.min_length);
    read(j.at("length"), "max", s.max_length);
  }
  if (s.n == 0) throw ConfigError("simulate.n must be positive");
  if (s.min_length < 1 || s.min_length > s.max_length) throw ConfigError("bad simulate.length range");
  s.truth.validate(1e-9);
  return s;
}

}  // namespace

std::string RunConfig::hash() const {
  const std::string canonical = source.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

HyperParams RunConfig::hyper_for(std::size_t vocab_size) const {
  HyperParams h = HyperParams::defaults(families, vocab_size);
  h.alpha = alpha;
  if (gamma_vector.empty()) {
    h.gamma = Vector::Constant(static_cast<Eigen::Index>(vocab_size), gamma);
  } else {
    if (gamma_vector.size() != vocab_size) {
      throw ConfigError("model.gamma has " + std::to_string(gamma_vector.size()) +
                        " entries but the vocabulary has " + std::to_string(vocab_size));
    }
    h.gamma = Eigen::Map<const Vector>(gamma_vector.data(), static_cast<Eigen::Index>(vocab_size));
  }
  if (!loss_priors.empty()) h.loss_priors = loss_priors;
  h.validate(families.size(), vocab_size);
  return h;
}

void RunConfig::set_seed(std::uint64_t value) {
  seed = value;
  em.seed = value;
  gibbs.seed = splitmix64(value ^ 0x6769626273ULL);
}

RunConfig parse_config(const json& j) {
  reject_unknown(j, "config", {"seed", "output_dir", "model", "em", "gibbs", "data", "split", "simulate",
                               "risk_levels", "wasserstein_truncation", "top_words"});
  RunConfig c;
  c.source = j;
  try {
    if (j.contains("simulate")) c.simulate = parse_simulate(j.at("simulate"));

    const json model = j.value("model", json::object());
    reject_unknown(model, "model", {"families", "alpha", "gamma", "loss_priors"});
    if (model.contains("families")) {
      c.families = parse_families(model.at("families"));
    } else if (c.simulate) {
      c.families = c.simulate->truth.families();
    } else {
      throw ConfigError("model.families is required");
    }
    if (c.families.empty()) throw ConfigError("model.families is empty");
    const auto K = static_cast<Eigen::Index>(c.families.size());

    c.alpha = Vector::Ones(K);
    if (model.contains("alpha")) {
      const auto& a = model.at("alpha");
      if (a.is_number()) {
        c.alpha.setConstant(a.get<double>());
      } else {
        const auto v = a.get<std::vector<double>>();
        if (static_cast<Eigen::Index>(v.size()) != K) throw ConfigError("model.alpha needs K entries");
        c.alpha = Eigen::Map<const Vector>(v.data(), K);
      }
    }
    if (model.contains("gamma")) {
      const auto& g = model.at("gamma");
      if (g.is_number()) {
        c.gamma = g.get<double>();
      } else {
        c.gamma_vector = g.get<std::vector<double>>();
      }
    }
    if (model.contains("loss_priors")) {
      for (const auto& p : model.at("loss_priors")) c.loss_priors.push_back(io::loss_prior_from_json(p));
      if (c.loss_priors.size() != c.families.size()) throw ConfigError("model.loss_priors needs K entries");
    }

    c.em.families = c.families;
    if (j.contains("em")) {
      const auto& e = j.at("em");
      reject_unknown(e, "em", {"max_iters", "tol", "restarts", "sigma_floor", "empty_weight"});
      read(e, "max_iters", c.em.max_iters);
      read(e, "tol", c.em.tol);
      read(e, "restarts", c.em.restarts);
      read(e, "sigma_floor", c.em.sigma_floor);
      read(e, "empty_weight", c.em.empty_weight);
    }
    if (j.contains("gibbs")) {
      const auto& g = j.at("gibbs");
      reject_unknown(g, "gibbs", {"sweeps", "burn_in", "thin", "mh_step_scale", "adapt_burnin", "keep_assignments"});
      read(g, "sweeps", c.gibbs.sweeps);
      read(g, "burn_in", c.gibbs.burn_in);
      read(g, "thin", c.gibbs.thin);
      read(g, "mh_step_scale", c.gibbs.mh_step_scale);
      read(g, "adapt_burnin", c.gibbs.adapt_burnin);
      read(g, "keep_assignments", c.gibbs.keep_assignments);
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      reject_unknown(d, "data", {"train", "test", "amount_column", "text_column", "stopwords", "stem"});
      if (d.contains("train")) c.data.train = d.at("train").get<std::string>();
      if (d.contains("test")) c.data.test = d.at("test").get<std::string>();
      if (d.contains("stopwords")) c.data.stopwords = d.at("stopwords").get<std::string>();
      read(d, "amount_column", c.data.amount_column);
      read(d, "text_column", c.data.text_column);
      read(d, "stem", c.data.stem);
      if (!c.data.stopwords.empty() && !std::filesystem::exists(c.data.stopwords)) {
        throw ConfigError("stopword file not found: " + c.data.stopwords.string());
      }
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      reject_unknown(s, "split", {"test_fraction", "bins"});
      SplitSpec spec;
      read(s, "test_fraction", spec.test_fraction);
      read(s, "bins", spec.bins);
      if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
        throw ConfigError("split.test_fraction must lie in (0, 1)");
      }
      if (spec.bins < 1) throw ConfigError("split.bins must be at least 1");
      c.split = spec;
    }
    read(j, "risk_levels", c.risk_levels);
    for (double level : c.risk_levels) {
      if (!(level > 0.0 && level < 1.0)) throw ConfigError("risk levels must lie in (0, 1)");
    }
    read(j, "wasserstein_truncation", c.wasserstein_truncation);
    for (double p : c.wasserstein_truncation) {
      if (!(p > 0.0 && p <= 1.0)) throw ConfigError("truncation levels must lie in (0, 1]");
    }
    read(j, "top_words", c.top_words);
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    std::uint64_t seed = 1;
    read(j, "seed", seed);
    c.set_seed(seed);
    c.em.validate();
    c.gibbs.validate();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace ldmm::app
