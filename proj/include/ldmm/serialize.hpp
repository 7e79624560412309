#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "ldmm/corpus.hpp"
#include "ldmm/gibbs.hpp"
#include "ldmm/loss_models.hpp"
#include "ldmm/mixture.hpp"

namespace ldmm::io {

using nlohmann::json;

inline constexpr int kFormatVersion = 1;

json to_json(const LossParams& params);
LossParams loss_params_from_json(const json& j);
json to_json(const LossPrior& prior);
LossPrior loss_prior_from_json(const json& j);

json to_json(const HyperParams& hyper);
HyperParams hyper_from_json(const json& j);

/// Model file: theta, tagged components, dense psi rows and the vocabulary.
json model_to_json(const MixtureParams& params, const Vocabulary& vocabulary);
struct ModelFile {
  MixtureParams params;
  Vocabulary vocabulary;
};
/// Throws DataError when the stored vocabulary hash does not match its words.
ModelFile model_from_json(const json& j);

json corpus_to_json(const Corpus& corpus);
Corpus corpus_from_json(const json& j);

/// One retained state per line.
json draw_to_json(const PosteriorDraw& draw);
PosteriorDraw draw_from_json(const json& j);
void write_draws(std::ostream& out, const PosteriorDraws& draws);
/// Acceptance rates and final scale live in the run manifest, not here.
PosteriorDraws read_draws(std::istream& in);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace ldmm::io
