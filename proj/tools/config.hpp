#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldmm/em.hpp"
#include "ldmm/gibbs.hpp"
#include "ldmm/mixture.hpp"

namespace ldmm::app {

struct DataSpec {
  std::filesystem::path train;
  std::filesystem::path test;  // optional
  std::string amount_column = "claim_amount";
  std::string text_column = "description";
  std::filesystem::path stopwords;  // optional, merged with the built-in list
  bool stem = false;
};

struct SplitSpec {
  double test_fraction = 0.2;
  int bins = 10;
};

struct SimulateSpec {
  std::size_t n = 1000;
  std::size_t vocabulary_size = 100;
  MixtureParams truth;
  std::uint32_t min_length = 3;
  std::uint32_t max_length = 10;
};

struct RunConfig {
  std::vector<LossFamily> families;
  Vector alpha;                         // K
  double gamma = 2.0;                   // used when gamma_vector is empty
  std::vector<double> gamma_vector;     // |V|, when given explicitly
  std::vector<LossPrior> loss_priors;   // empty means family defaults
  EmConfig em;
  GibbsConfig gibbs;
  DataSpec data;
  std::optional<SplitSpec> split;
  std::optional<SimulateSpec> simulate;
  std::vector<double> risk_levels{0.95, 0.99};
  std::vector<double> wasserstein_truncation{0.7, 0.8, 0.9, 1.0};
  std::size_t top_words = 20;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 1;
  /// Canonical dump of the parsed document, the input of `hash`.
  nlohmann::json source;

  /// FNV-1a 64 of the canonical JSON, as 16 hex digits.
  [[nodiscard]] std::string hash() const;
  /// Hyper-parameters sized for a vocabulary, once it is known.
  [[nodiscard]] HyperParams hyper_for(std::size_t vocab_size) const;
  /// Sets the run seed and the seeds derived from it.
  void set_seed(std::uint64_t value);
};

/// Throws ConfigError on unknown keys, bad values or a missing file.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace ldmm::app
