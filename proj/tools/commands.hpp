#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

namespace ldmm::app {

struct CommonOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  int threads = 0;  // 0 keeps the OpenMP default
  std::optional<std::filesystem::path> out;
};

/// Artifact paths; empty ones default to files in the output directory.
struct ArtifactOptions {
  std::filesystem::path model;
  std::filesystem::path draws;
  std::filesystem::path corpus;
  std::filesystem::path input;
};

void cmd_simulate(const CommonOptions& common);
void cmd_fit(const CommonOptions& common, bool em_only);
void cmd_predict(const CommonOptions& common, const ArtifactOptions& artifacts);
void cmd_evaluate(const CommonOptions& common, const ArtifactOptions& artifacts);
void cmd_split(const CommonOptions& common, const std::filesystem::path& input);

}  // namespace ldmm::app
