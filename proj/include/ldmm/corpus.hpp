#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

namespace ldmm {

using WordId = std::uint32_t;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ClaimRecord {
  double claim_amount = 0.0;
  std::string description;
};

struct RejectedRow {
  std::size_t row = 0;  // 1-based data row, header excluded
  std::string reason;
};

struct CsvLoadResult {
  std::vector<ClaimRecord> records;
  std::vector<RejectedRow> rejected;
};

/// Reads claim records from a headered CSV. Lines starting with '#' are
/// treated as comments. Throws DataError on a missing file, a missing column
/// or when no row survives validation.
CsvLoadResult load_csv(const std::filesystem::path& path, std::string_view amount_column,
                       std::string_view text_column);

/// Ordered set of distinct tokens with a dense id for each.
class Vocabulary {
 public:
  Vocabulary() = default;
  /// Words must be distinct; order is preserved and defines the ids.
  explicit Vocabulary(std::vector<std::string> words);

  [[nodiscard]] std::size_t size() const noexcept { return words_.size(); }
  [[nodiscard]] const std::string& word(WordId id) const { return words_.at(id); }
  [[nodiscard]] const std::vector<std::string>& words() const noexcept { return words_; }
  [[nodiscard]] std::optional<WordId> find(std::string_view token) const;

  /// FNV-1a 64 over the newline-joined word list, as 16 hex digits.
  [[nodiscard]] std::string hash() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> index_;
};

struct WordCount {
  WordId id = 0;
  std::uint32_t count = 0;
  friend bool operator==(const WordCount&, const WordCount&) = default;
};

/// Sparse bag of words, entries sorted by id with counts >= 1.
struct Document {
  std::vector<WordCount> counts;

  [[nodiscard]] std::uint32_t length() const noexcept;
  [[nodiscard]] std::uint32_t count(WordId id) const noexcept;
  static Document from_tokens(const std::vector<WordId>& tokens);
  friend bool operator==(const Document&, const Document&) = default;
};

struct Corpus {
  Vocabulary vocabulary;
  std::vector<Document> documents;
  std::vector<double> losses;

  [[nodiscard]] std::size_t size() const noexcept { return documents.size(); }
  [[nodiscard]] std::uint64_t total_length() const noexcept;
  /// Throws DataError when an invariant fails.
  void validate() const;
  /// Sub-corpus over `indices`, sharing this vocabulary.
  [[nodiscard]] Corpus subset(const std::vector<std::size_t>& indices) const;
};

std::unordered_set<std::string> default_stopwords();
/// One word per line; blank lines and '#' comments ignored.
std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path);

/// Light suffix stripper. Leaves stems of at least three characters.
std::string stem(std::string_view token);

struct PreprocessOptions {
  std::unordered_set<std::string> stopwords = default_stopwords();
  bool stem = false;
};

/// Lowercases, splits on anything that is not a letter or digit, then drops
/// stopwords and optionally stems.
std::vector<std::string> tokenize(std::string_view text, const PreprocessOptions& options);

struct PreprocessResult {
  Corpus corpus;
  std::vector<std::size_t> kept;     // input index of each corpus document
  std::vector<std::size_t> dropped;  // inputs with no surviving token
};

/// Builds the vocabulary (sorted) and count vectors. Throws DataError when
/// every document is emptied.
PreprocessResult preprocess(const std::vector<ClaimRecord>& records,
                            const PreprocessOptions& options);

struct MappedCorpus {
  Corpus corpus;
  std::vector<std::size_t> unseen_tokens;  // per document
};

/// Maps records onto a fixed vocabulary. Unknown tokens are dropped and
/// counted; documents may end up empty.
MappedCorpus map_to_vocabulary(const std::vector<ClaimRecord>& records,
                               const Vocabulary& vocabulary, const PreprocessOptions& options);

/// Dense n x |V| matrix with entries N_iv * log(n / df_v).
RowMatrix tf_idf(const Corpus& corpus);

struct TermSummary {
  std::vector<std::uint64_t> term_frequency;
  std::vector<std::uint64_t> document_frequency;
  std::vector<double> tf_idf_total;
};
TermSummary term_summary(const Corpus& corpus);

struct CorpusSplit {
  Corpus train;
  Corpus test;
  std::vector<std::size_t> train_index;
  std::vector<std::size_t> test_index;
};

/// Equal-frequency loss bins, then a seeded draw of round(test_fraction * bin
/// size) test indices per bin.
CorpusSplit stratified_split(const Corpus& corpus, double test_fraction, int bins,
                             std::uint64_t seed);

}  // namespace ldmm
