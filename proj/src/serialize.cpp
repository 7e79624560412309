#include "ldmm/serialize.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "ldmm/errors.hpp"

namespace ldmm::io {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<double> to_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <class T>
T get(const json& j, const char* key) {
  if (!j.contains(key)) throw DataError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(std::string("bad field '") + key + "': " + e.what());
  }
}

void check_version(const json& j, const char* what) {
  const int v = get<int>(j, "format_version");
  if (v != kFormatVersion) {
    throw DataError(std::string(what) + " format_version " + std::to_string(v) + " is not supported");
  }
}

}  // namespace

json to_json(const LossParams& params) {
  return std::visit(overloaded{
                        [](const LogNormalParams& p) {
                          return json{{"family", "lognormal"}, {"mu", p.mu}, {"sigma", p.sigma}};
                        },
                        [](const ParetoParams& p) {
                          return json{{"family", "pareto"}, {"shape", p.shape}, {"scale_min", p.scale_min}};
                        },
                        [](const Gb2Params& p) {
                          return json{{"family", "gb2"}, {"a", p.a}, {"b", p.b}, {"p", p.p}, {"q", p.q}};
                        },
                    },
                    params);
}

LossParams loss_params_from_json(const json& j) {
  const auto family = parse_family(get<std::string>(j, "family"));
  LossParams out;
  switch (family) {
    case LossFamily::LogNormal:
      out = LogNormalParams{get<double>(j, "mu"), get<double>(j, "sigma")};
      break;
    case LossFamily::Pareto:
      out = ParetoParams{get<double>(j, "shape"), get<double>(j, "scale_min")};
      break;
    case LossFamily::GB2:
      out = Gb2Params{get<double>(j, "a"), get<double>(j, "b"), get<double>(j, "p"), get<double>(j, "q")};
      break;
  }
  validate(out);
  return out;
}

json to_json(const LossPrior& prior) {
  return std::visit(overloaded{
                        [](const NigPrior& p) {
                          return json{{"prior", "nig"}, {"mu0", p.mu0}, {"r", p.r}, {"a", p.a}, {"b", p.b}};
                        },
                        [](const GammaShapePrior& p) {
                          return json{{"prior", "gamma"}, {"a", p.a}, {"b", p.b}, {"scale_min", p.scale_min}};
                        },
                        [](const FlatPrior&) { return json{{"prior", "flat"}}; },
                    },
                    prior);
}

LossPrior loss_prior_from_json(const json& j) {
  const auto tag = get<std::string>(j, "prior");
  LossPrior out;
  if (tag == "nig") {
    NigPrior p;
    p.mu0 = j.value("mu0", p.mu0);
    p.r = j.value("r", p.r);
    p.a = j.value("a", p.a);
    p.b = j.value("b", p.b);
    out = p;
  } else if (tag == "gamma") {
    GammaShapePrior p;
    p.a = j.value("a", p.a);
    p.b = j.value("b", p.b);
    p.scale_min = j.value("scale_min", p.scale_min);
    out = p;
  } else if (tag == "flat") {
    out = FlatPrior{};
  } else {
    throw ConfigError("unknown prior '" + tag + "'");
  }
  validate(out);
  return out;
}

json to_json(const HyperParams& hyper) {
  json priors = json::array();
  for (const auto& p : hyper.loss_priors) priors.push_back(to_json(p));
  return json{{"alpha", to_vec(hyper.alpha)}, {"gamma", to_vec(hyper.gamma)}, {"loss_priors", priors}};
}

HyperParams hyper_from_json(const json& j) {
  HyperParams h;
  h.alpha = from_vec(get<std::vector<double>>(j, "alpha"));
  h.gamma = from_vec(get<std::vector<double>>(j, "gamma"));
  for (const auto& p : j.at("loss_priors")) h.loss_priors.push_back(loss_prior_from_json(p));
  return h;
}

json model_to_json(const MixtureParams& params, const Vocabulary& vocabulary) {
  if (params.vocab_size() != vocabulary.size()) {
    throw ConfigError("model and vocabulary sizes differ");
  }
  json components = json::array();
  for (const auto& c : params.components) components.push_back(to_json(c));
  json psi = json::array();
  for (Eigen::Index k = 0; k < params.psi.rows(); ++k) {
    psi.push_back(std::vector<double>(params.psi.row(k).begin(), params.psi.row(k).end()));
  }
  return json{{"format_version", kFormatVersion},
              {"theta", to_vec(params.theta)},
              {"components", components},
              {"psi", psi},
              {"vocabulary", vocabulary.words()},
              {"vocabulary_hash", vocabulary.hash()}};
}

ModelFile model_from_json(const json& j) {
  check_version(j, "model");
  ModelFile m;
  m.vocabulary = Vocabulary(get<std::vector<std::string>>(j, "vocabulary"));
  if (m.vocabulary.hash() != get<std::string>(j, "vocabulary_hash")) {
    throw DataError("model vocabulary hash does not match its word list");
  }
  m.params.theta = from_vec(get<std::vector<double>>(j, "theta"));
  for (const auto& c : j.at("components")) m.params.components.push_back(loss_params_from_json(c));
  const auto rows = get<std::vector<std::vector<double>>>(j, "psi");
  m.params.psi = RowMatrix(static_cast<Eigen::Index>(rows.size()),
                           static_cast<Eigen::Index>(m.vocabulary.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].size() != m.vocabulary.size()) throw DataError("psi row length differs from vocabulary");
    for (std::size_t v = 0; v < rows[k].size(); ++v) {
      m.params.psi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(v)) = rows[k][v];
    }
  }
  try {
    m.params.validate(1e-9);
  } catch (const ConfigError& e) {
    throw DataError(std::string("invalid model file: ") + e.what());
  }
  return m;
}

json corpus_to_json(const Corpus& corpus) {
  json docs = json::array();
  for (const auto& d : corpus.documents) {
    json entries = json::array();
    for (const auto& wc : d.counts) entries.push_back({wc.id, wc.count});
    docs.push_back(std::move(entries));
  }
  return json{{"format_version", kFormatVersion},
              {"vocabulary", corpus.vocabulary.words()},
              {"documents", docs},
              {"losses", corpus.losses}};
}

Corpus corpus_from_json(const json& j) {
  check_version(j, "corpus");
  Corpus c;
  c.vocabulary = Vocabulary(get<std::vector<std::string>>(j, "vocabulary"));
  for (const auto& entries : j.at("documents")) {
    Document d;
    for (const auto& e : entries) d.counts.push_back({e.at(0).get<WordId>(), e.at(1).get<std::uint32_t>()});
    c.documents.push_back(std::move(d));
  }
  c.losses = get<std::vector<double>>(j, "losses");
  c.validate();
  return c;
}

json draw_to_json(const PosteriorDraw& draw) {
  json components = json::array();
  for (const auto& c : draw.params.components) components.push_back(to_json(c));
  json psi = json::array();
  for (Eigen::Index k = 0; k < draw.params.psi.rows(); ++k) {
    psi.push_back(std::vector<double>(draw.params.psi.row(k).begin(), draw.params.psi.row(k).end()));
  }
  json j{{"sweep", draw.sweep},
         {"theta", to_vec(draw.params.theta)},
         {"components", components},
         {"psi", psi}};
  if (!draw.z.empty()) j["z"] = draw.z;
  return j;
}

PosteriorDraw draw_from_json(const json& j) {
  PosteriorDraw d;
  d.sweep = get<int>(j, "sweep");
  d.params.theta = from_vec(get<std::vector<double>>(j, "theta"));
  for (const auto& c : j.at("components")) d.params.components.push_back(loss_params_from_json(c));
  const auto rows = get<std::vector<std::vector<double>>>(j, "psi");
  const auto V = rows.empty() ? 0 : rows.front().size();
  d.params.psi = RowMatrix(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(V));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].size() != V) throw DataError("ragged psi in draw");
    for (std::size_t v = 0; v < V; ++v) {
      d.params.psi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(v)) = rows[k][v];
    }
  }
  if (j.contains("z")) d.z = j.at("z").get<Assignment>();
  return d;
}

void write_draws(std::ostream& out, const PosteriorDraws& draws) {
  for (const auto& d : draws.draws) out << draw_to_json(d).dump() << '\n';
}

PosteriorDraws read_draws(std::istream& in) {
  PosteriorDraws out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.draws.push_back(draw_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError("draws line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace ldmm::io
