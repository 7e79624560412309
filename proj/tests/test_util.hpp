#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ldmm/corpus.hpp"
#include "ldmm/mixture.hpp"

namespace ldmm::test {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ldmm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

/// Corpus over words "w000".. with documents given as lists of word ids.
inline Corpus make_corpus(std::size_t V, const std::vector<std::vector<WordId>>& docs,
                          const std::vector<double>& losses) {
  Corpus c;
  c.vocabulary = synthetic_vocabulary(V);
  for (const auto& d : docs) c.documents.push_back(Document::from_tokens(d));
  c.losses = losses;
  return c;
}

/// Two log-normal components with disjoint planted keyword blocks.
inline MixtureParams two_lognormal(std::size_t V = 100, double mass = 0.8) {
  MixtureParams p;
  p.theta = Vector(2);
  p.theta << 0.4, 0.6;
  p.components = {LogNormalParams{7.0, 1.0}, LogNormalParams{9.0, 1.5}};
  p.psi = planted_topics(2, V, 10, mass);
  return p;
}

inline SimulatedData simulate(const MixtureParams& p, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return simulate_dataset(p, synthetic_vocabulary(static_cast<std::size_t>(p.psi.cols())), n,
                          uniform_length(3, 10), rng);
}

inline double mean_of(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double variance_of(const std::vector<double>& x) {
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

/// |sample mean - target| in units of the sample standard error.
inline double z_score(const std::vector<double>& x, double target) {
  return std::abs(mean_of(x) - target) / std::sqrt(variance_of(x) / static_cast<double>(x.size()));
}

}  // namespace ldmm::test
