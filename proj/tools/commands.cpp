#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "config.hpp"
#include "ldmm/csv.hpp"
#include "ldmm/em.hpp"
#include "ldmm/errors.hpp"
#include "ldmm/gibbs.hpp"
#include "ldmm/kernels.hpp"
#include "ldmm/model_selection.hpp"
#include "ldmm/predictive.hpp"
#include "ldmm/serialize.hpp"

namespace ldmm::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  RunConfig config;
  fs::path out;
};

Run setup(const CommonOptions& common) {
  Run run{load_config(common.config), {}};
  if (common.seed) run.config.set_seed(*common.seed);
  run.out = common.out ? *common.out : run.config.output_dir;
  if (common.threads < 0) throw ConfigError("--threads must be non-negative");
  if (common.threads > 0) kernels::set_num_threads(common.threads);
  std::error_code ec;
  fs::create_directories(run.out, ec);
  if (ec || !fs::is_directory(run.out)) {
    throw ConfigError("cannot create output directory " + run.out.string());
  }
  return run;
}

std::string fmt(double x) {
  if (std::isnan(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string level_tag(double level) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", level * 100.0);
  return buf;
}

std::string fnv_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const Run& run) : out_(path, std::ios::binary) {
    if (!out_) throw ConfigError("cannot write " + path.string());
    out_ << "# config_hash=" << run.config.hash() << "\n# seed=" << run.config.seed << '\n';
  }
  void row(const std::vector<std::string>& fields) { out_ << csv::join(fields) << '\n'; }

 private:
  std::ofstream out_;
};

json stamp(json j, const Run& run) {
  j["config_hash"] = run.config.hash();
  j["seed"] = run.config.seed;
  return j;
}

void write_records(const fs::path& path, const Run& run, const std::vector<ClaimRecord>& records) {
  CsvWriter w(path, run);
  w.row({run.config.data.amount_column, run.config.data.text_column});
  for (const auto& r : records) w.row({fmt(r.claim_amount), r.description});
}

PreprocessOptions preprocess_options(const RunConfig& c) {
  PreprocessOptions o;
  if (!c.data.stopwords.empty()) o.stopwords = load_stopwords(c.data.stopwords);
  o.stem = c.data.stem;
  return o;
}

fs::path require_file(const fs::path& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("no ") + what + " path given");
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " not found: " + path.string());
  return path;
}

std::vector<ClaimRecord> load_training_records(const RunConfig& c, const fs::path& path) {
  const auto loaded = load_csv(require_file(path, "training data"), c.data.amount_column, c.data.text_column);
  if (!loaded.rejected.empty()) {
    std::cerr << "skipped " << loaded.rejected.size() << " invalid rows (first: row "
              << loaded.rejected.front().row << ", " << loaded.rejected.front().reason << ")\n";
  }
  return loaded.records;
}

/// Rows to predict on. The amount column is optional; missing or invalid
/// amounts become NaN and disable the coverage summary.
std::vector<ClaimRecord> load_prediction_records(const RunConfig& c, const fs::path& path) {
  std::ifstream in(require_file(path, "prediction input"), std::ios::binary);
  const auto rows = csv::read_all(in);
  if (rows.empty()) throw DataError(path.string() + " has no header");
  const auto& header = rows.front();
  std::optional<std::size_t> amount_col, text_col;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == c.data.amount_column) amount_col = j;
    if (header[j] == c.data.text_column) text_col = j;
  }
  if (!text_col) throw DataError(path.string() + " lacks column '" + c.data.text_column + "'");
  std::vector<ClaimRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    ClaimRecord rec;
    rec.description = *text_col < r.size() ? r[*text_col] : "";
    rec.claim_amount = std::numeric_limits<double>::quiet_NaN();
    if (amount_col && *amount_col < r.size()) {
      try {
        std::size_t used = 0;
        const double v = std::stod(r[*amount_col], &used);
        if (used == r[*amount_col].size() && v > 0.0 && std::isfinite(v)) rec.claim_amount = v;
      } catch (const std::exception&) {
      }
    }
    out.push_back(std::move(rec));
  }
  if (out.empty()) throw DataError(path.string() + " has no rows");
  return out;
}

struct RecordSplit {
  std::vector<ClaimRecord> train;
  std::vector<ClaimRecord> test;
};

RecordSplit split_records(const std::vector<ClaimRecord>& records, const RunConfig& c) {
  const SplitSpec spec = c.split.value_or(SplitSpec{});
  const auto pre = preprocess(records, preprocess_options(c));
  if (!pre.dropped.empty()) {
    std::cerr << "dropped " << pre.dropped.size() << " rows with no usable words\n";
  }
  const auto s = stratified_split(pre.corpus, spec.test_fraction, spec.bins, c.seed);
  RecordSplit out;
  for (auto i : s.train_index) out.train.push_back(records[pre.kept[i]]);
  for (auto i : s.test_index) out.test.push_back(records[pre.kept[i]]);
  return out;
}

json trace_json(const EmTrace& t) {
  return json{{"log_posterior", t.log_posterior},
              {"iterations", t.iterations},
              {"converged", t.converged},
              {"optimizer_converged", t.optimizer_converged},
              {"empty_components", t.empty_components},
              {"restart_seed", t.seed}};
}

json criteria_json(const InformationCriteria& ic) {
  return json{{"nll", ic.nll},
              {"aic", ic.aic},
              {"bic", ic.bic},
              {"nll_per_obs", ic.nll_per_obs},
              {"aic_per_obs", ic.aic_per_obs},
              {"bic_per_obs", ic.bic_per_obs},
              {"parameter_count", ic.parameter_count},
              {"n", ic.n}};
}

std::vector<std::string> param_columns(const MixtureParams& p, std::size_t k) {
  const auto prefix = "k" + std::to_string(k + 1) + "_";
  switch (family_of(p.components[k])) {
    case LossFamily::LogNormal:
      return {prefix + "mu", prefix + "sigma"};
    case LossFamily::Pareto:
      return {prefix + "shape"};
    case LossFamily::GB2:
      return {prefix + "a", prefix + "b", prefix + "p", prefix + "q"};
  }
  return {};
}

std::vector<std::string> param_values(const LossParams& c) {
  return std::visit(
      [](const auto& p) -> std::vector<std::string> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LogNormalParams>) return {fmt(p.mu), fmt(p.sigma)};
        if constexpr (std::is_same_v<T, ParetoParams>) return {fmt(p.shape)};
        if constexpr (std::is_same_v<T, Gb2Params>) return {fmt(p.a), fmt(p.b), fmt(p.p), fmt(p.q)};
      },
      c);
}

void write_top_words(const fs::path& path, const Run& run, const MixtureParams& p, const Vocabulary& vocab) {
  CsvWriter w(path, run);
  w.row({"component", "rank", "word", "probability"});
  const auto top = top_words(p.psi, run.config.top_words);
  for (std::size_t k = 0; k < top.size(); ++k) {
    for (std::size_t r = 0; r < top[k].size(); ++r) {
      w.row({std::to_string(k + 1), std::to_string(r + 1), vocab.word(top[k][r]),
             fmt(p.psi(static_cast<Eigen::Index>(k), top[k][r]))});
    }
  }
}

fs::path or_default(const fs::path& given, const fs::path& fallback) {
  return given.empty() ? fallback : given;
}

io::ModelFile load_model(const fs::path& path) {
  return io::model_from_json(io::read_json_file(require_file(path, "model file")));
}

PosteriorDraws load_draws(const fs::path& path, const io::ModelFile& model) {
  std::ifstream in(require_file(path, "draws file"));
  auto draws = io::read_draws(in);
  if (draws.empty()) throw DataError(path.string() + " holds no draws");
  const auto manifest = path.parent_path() / "manifest.json";
  if (fs::exists(manifest)) {
    const auto m = io::read_json_file(manifest);
    if (m.contains("vocabulary_hash") && m.at("vocabulary_hash") != model.vocabulary.hash()) {
      throw DataError("vocabulary mismatch between model and draws");
    }
  }
  for (const auto& d : draws.draws) {
    if (d.params.vocab_size() != model.vocabulary.size() || d.params.K() != model.params.K()) {
      throw DataError("vocabulary mismatch between model and draws");
    }
  }
  return draws;
}

fs::path test_input(const ArtifactOptions& a, const Run& run) {
  if (!a.input.empty()) return a.input;
  if (!run.config.data.test.empty()) return run.config.data.test;
  return run.out / "test.csv";
}

}  // namespace

void cmd_simulate(const CommonOptions& common) {
  const Run run = setup(common);
  if (!run.config.simulate) throw ConfigError("config has no simulate section");
  const auto& spec = *run.config.simulate;
  Rng rng(splitmix64(run.config.seed));
  const auto vocab = synthetic_vocabulary(spec.vocabulary_size);
  const auto sim = simulate_dataset(spec.truth, vocab, spec.n,
                                    uniform_length(spec.min_length, spec.max_length), rng);
  write_records(run.out / "claims.csv", run, to_records(sim.corpus));
  CsvWriter w(run.out / "assignments.csv", run);
  w.row({"row", "component"});
  for (std::size_t i = 0; i < sim.z.size(); ++i) w.row({std::to_string(i + 1), std::to_string(sim.z[i] + 1)});
  io::write_json_file(run.out / "truth.json", stamp(io::model_to_json(spec.truth, vocab), run));
}

void cmd_split(const CommonOptions& common, const fs::path& input) {
  const Run run = setup(common);
  const auto records = load_training_records(run.config, or_default(input, run.config.data.train));
  const auto s = split_records(records, run.config);
  write_records(run.out / "train.csv", run, s.train);
  write_records(run.out / "test.csv", run, s.test);
}

void cmd_fit(const CommonOptions& common, bool em_only) {
  const Run run = setup(common);
  const auto& c = run.config;
  auto records = load_training_records(c, c.data.train);
  if (c.split && c.data.test.empty()) {
    auto s = split_records(records, c);
    write_records(run.out / "train.csv", run, s.train);
    write_records(run.out / "test.csv", run, s.test);
    records = std::move(s.train);
  }
  const auto pre = preprocess(records, preprocess_options(c));
  const Corpus& corpus = pre.corpus;
  const auto hyper = c.hyper_for(corpus.vocabulary.size());

  const auto started = std::chrono::steady_clock::now();
  const EmTrace em = run_em(corpus, hyper, c.em);
  const double em_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  io::write_json_file(run.out / "model.json", stamp(io::model_to_json(em.params, corpus.vocabulary), run));
  io::write_json_file(run.out / "corpus.json", stamp(io::corpus_to_json(corpus), run));
  {
    CsvWriter w(run.out / "em_trace.csv", run);
    w.row({"iteration", "log_posterior"});
    for (std::size_t t = 0; t < em.log_posterior.size(); ++t) w.row({std::to_string(t), fmt(em.log_posterior[t])});
  }
  write_top_words(run.out / "top_words.csv", run, em.params, corpus.vocabulary);

  json top = json::array();
  for (const auto& ids : top_words(em.params.psi, c.top_words)) {
    json words = json::array();
    for (auto id : ids) words.push_back(corpus.vocabulary.word(id));
    top.push_back(words);
  }
  json report{{"trace", trace_json(em)},
              {"params", io::model_to_json(em.params, corpus.vocabulary)},
              {"hyper", io::to_json(em.hyper)},
              {"top_words", top},
              {"criteria", criteria_json(nll_aic_bic(em.params, corpus, parameter_count(em.params)))},
              {"n_train", corpus.size()},
              {"dropped_rows", pre.dropped.size()}};
  io::write_json_file(run.out / "fit_report.json", stamp(report, run));
  if (em_only) return;

  const auto gibbs_started = std::chrono::steady_clock::now();
  const auto draws = run_gibbs(corpus, em.hyper, em, c.gibbs);
  const double gibbs_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - gibbs_started).count();
  {
    std::ofstream out(run.out / "draws.jsonl", std::ios::binary);
    if (!out) throw ConfigError("cannot write draws file");
    io::write_draws(out, draws);
  }
  {
    CsvWriter w(run.out / "gibbs_trace.csv", run);
    std::vector<std::string> head{"sweep"};
    for (std::size_t k = 0; k < em.params.K(); ++k) head.push_back("theta_" + std::to_string(k + 1));
    for (std::size_t k = 0; k < em.params.K(); ++k) {
      for (auto& col : param_columns(em.params, k)) head.push_back(col);
    }
    w.row(head);
    for (const auto& d : draws.draws) {
      std::vector<std::string> row{std::to_string(d.sweep)};
      for (Eigen::Index k = 0; k < d.params.theta.size(); ++k) row.push_back(fmt(d.params.theta[k]));
      for (const auto& comp : d.params.components) {
        for (auto& v : param_values(comp)) row.push_back(v);
      }
      w.row(row);
    }
  }
  json manifest{{"config", c.source},
                {"vocabulary_hash", corpus.vocabulary.hash()},
                {"draws", draws.size()},
                {"acceptance_rates", draws.acceptance_rates},
                {"final_mh_scale", draws.final_mh_scale},
                {"wall_clock_seconds", {{"em", em_seconds}, {"gibbs", gibbs_seconds}}}};
  io::write_json_file(run.out / "manifest.json", stamp(manifest, run));
}

void cmd_predict(const CommonOptions& common, const ArtifactOptions& artifacts) {
  const Run run = setup(common);
  const auto model = load_model(or_default(artifacts.model, run.out / "model.json"));
  const auto draws = load_draws(or_default(artifacts.draws, run.out / "draws.jsonl"), model);
  const auto records = load_prediction_records(run.config, test_input(artifacts, run));
  const auto mapped = map_to_vocabulary(records, model.vocabulary, preprocess_options(run.config));
  const auto& levels = run.config.risk_levels;
  const auto risks = predict_risk(mapped.corpus, draws, levels, run.config.seed);

  CsvWriter w(run.out / "predictions.csv", run);
  std::vector<std::string> head{"row", "description_hash", "mean"};
  for (double l : levels) {
    head.push_back("var_" + level_tag(l));
    head.push_back("cte_" + level_tag(l));
  }
  head.push_back("modal_topic");
  head.push_back("claim_amount");
  w.row(head);
  bool all_known = true;
  for (std::size_t i = 0; i < risks.size(); ++i) {
    std::vector<std::string> row{std::to_string(i + 1), fnv_hex(records[i].description), fmt(risks[i].mean)};
    for (std::size_t l = 0; l < levels.size(); ++l) {
      row.push_back(fmt(risks[i].var[l]));
      row.push_back(fmt(risks[i].cte[l].value));
    }
    row.push_back(std::to_string(risks[i].modal_topic + 1));
    row.push_back(fmt(records[i].claim_amount));
    all_known = all_known && !std::isnan(records[i].claim_amount);
    w.row(row);
  }
  if (all_known) {
    json coverage = json::object();
    for (std::size_t l = 0; l < levels.size(); ++l) {
      std::vector<double> vars(risks.size());
      for (std::size_t i = 0; i < risks.size(); ++i) vars[i] = risks[i].var[l];
      coverage[level_tag(levels[l])] = var_coverage(mapped.corpus.losses, vars);
    }
    io::write_json_file(run.out / "coverage.json",
                        stamp(json{{"coverage", coverage}, {"n", risks.size()}, {"draws", draws.size()}}, run));
  }
}

void cmd_evaluate(const CommonOptions& common, const ArtifactOptions& artifacts) {
  const Run run = setup(common);
  const auto& c = run.config;
  const auto model = load_model(or_default(artifacts.model, run.out / "model.json"));
  const Corpus train = io::corpus_from_json(io::read_json_file(
      require_file(or_default(artifacts.corpus, run.out / "corpus.json"), "training corpus")));
  if (!(train.vocabulary == model.vocabulary)) throw DataError("vocabulary mismatch between model and corpus");
  const auto records = load_prediction_records(c, test_input(artifacts, run));
  const auto test = map_to_vocabulary(records, model.vocabulary, preprocess_options(c)).corpus;

  const fs::path draws_path = or_default(artifacts.draws, run.out / "draws.jsonl");
  std::optional<PosteriorDraws> draws;
  if (fs::exists(draws_path)) draws = load_draws(draws_path, model);

  MetricReport report;
  report.criteria = nll_aic_bic(model.params, train, parameter_count(model.params));
  report.perplexity = perplexity(test, model.params);
  if (draws) report.dic = dic(*draws, train);
  if (draws && draws->size() >= 2) {
    report.stability_euclidean = topic_stability(*draws, StabilityMetric::Euclidean);
    report.stability_kl = topic_stability(*draws, StabilityMetric::KL);
  }

  std::vector<double> test_losses;
  for (double y : test.losses) {
    if (!std::isnan(y)) test_losses.push_back(y);
  }
  // Both comparisons use the same fitted-sample stream, so identical inputs
  // give identical columns.
  auto fitted_sample = [&](std::size_t n) {
    Rng rng = substream(c.seed, 0x5753, 0);
    return sample_loss_mixture(model.params, n, rng);
  };
  const auto fitted_train = fitted_sample(train.size());
  const auto fitted_test = fitted_sample(test_losses.size());
  for (double p : c.wasserstein_truncation) {
    report.wasserstein_train[p] = wasserstein1(train.losses, fitted_train, p);
    if (!test_losses.empty()) report.wasserstein_test[p] = wasserstein1(test_losses, fitted_test, p);
  }

  json families = json::array();
  for (auto f : model.params.families()) families.push_back(to_string(f));
  json w_train = json::object(), w_test = json::object();
  for (const auto& [p, v] : report.wasserstein_train) w_train[level_tag(p)] = v;
  for (const auto& [p, v] : report.wasserstein_test) w_test[level_tag(p)] = v;
  json stability = json::array();
  for (std::size_t k = 0; k < report.stability_euclidean.size(); ++k) {
    stability.push_back({{"euclidean", report.stability_euclidean[k]}, {"kl", report.stability_kl[k]}});
  }
  json j = criteria_json(report.criteria);
  j["families"] = families;
  j["perplexity"] = report.perplexity;
  j["dic"] = draws ? json(report.dic.dic) : json(nullptr);
  j["p_d"] = draws ? json(report.dic.p_d) : json(nullptr);
  j["wasserstein"] = {{"train", w_train}, {"test", w_test}};
  j["stability"] = stability;
  io::write_json_file(run.out / "metrics.json", stamp(j, run));

  CsvWriter w(run.out / "metrics.csv", run);
  std::string fam;
  for (auto f : model.params.families()) fam += (fam.empty() ? "" : "+") + to_string(f);
  std::vector<std::string> head{"model", "K", "nll", "aic", "bic", "nll_per_obs", "aic_per_obs", "bic_per_obs",
                                "dic", "p_d", "perplexity"};
  std::vector<std::string> row{fam,
                               std::to_string(model.params.K()),
                               fmt(report.criteria.nll),
                               fmt(report.criteria.aic),
                               fmt(report.criteria.bic),
                               fmt(report.criteria.nll_per_obs),
                               fmt(report.criteria.aic_per_obs),
                               fmt(report.criteria.bic_per_obs),
                               draws ? fmt(report.dic.dic) : "",
                               draws ? fmt(report.dic.p_d) : "",
                               fmt(report.perplexity)};
  for (double p : c.wasserstein_truncation) {
    head.push_back("w1_train_" + level_tag(p));
    row.push_back(fmt(report.wasserstein_train[p]));
  }
  for (double p : c.wasserstein_truncation) {
    head.push_back("w1_test_" + level_tag(p));
    row.push_back(report.wasserstein_test.contains(p) ? fmt(report.wasserstein_test[p]) : "");
  }
  w.row(head);
  w.row(row);
}

}  // namespace ldmm::app
