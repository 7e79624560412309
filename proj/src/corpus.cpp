#include "ldmm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "ldmm/csv.hpp"
#include "ldmm/errors.hpp"
#include "ldmm/rng.hpp"

namespace ldmm {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_amount(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

CsvLoadResult load_csv(const std::filesystem::path& path, std::string_view amount_column,
                       std::string_view text_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  auto rows = csv::read_all(in);
  if (rows.empty()) throw DataError(path.string() + ": missing header");

  const auto& header = rows.front();
  auto column = [&](std::string_view name) -> std::size_t {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (trim(header[c]) == name) return c;
    }
    throw DataError(path.string() + ": missing column '" + std::string(name) + "'");
  };
  const std::size_t amount_col = column(amount_column);
  const std::size_t text_col = column(text_column);

  CsvLoadResult result;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() <= std::max(amount_col, text_col)) {
      result.rejected.push_back({r, "too few fields"});
      continue;
    }
    const auto amount = parse_amount(row[amount_col]);
    if (!amount || !std::isfinite(*amount)) {
      result.rejected.push_back({r, "non-numeric amount '" + row[amount_col] + "'"});
      continue;
    }
    if (*amount <= 0.0) {
      result.rejected.push_back({r, "non-positive amount '" + row[amount_col] + "'"});
      continue;
    }
    const auto text = trim(row[text_col]);
    if (text.empty()) {
      result.rejected.push_back({r, "empty description"});
      continue;
    }
    result.records.push_back({*amount, std::string(text)});
  }
  if (result.records.empty()) throw DataError(path.string() + ": zero valid rows");
  return result;
}

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<WordId>(i)).second) {
      throw DataError("duplicate vocabulary word '" + words_[i] + "'");
    }
  }
}

std::optional<WordId> Vocabulary::find(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (i) h = fnv1a("\n", h);
    h = fnv1a(words_[i], h);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint32_t Document::length() const noexcept {
  std::uint32_t total = 0;
  for (const auto& wc : counts) total += wc.count;
  return total;
}

std::uint32_t Document::count(WordId id) const noexcept {
  const auto it = std::lower_bound(counts.begin(), counts.end(), id,
                                   [](const WordCount& wc, WordId v) { return wc.id < v; });
  return (it != counts.end() && it->id == id) ? it->count : 0;
}

Document Document::from_tokens(const std::vector<WordId>& tokens) {
  std::map<WordId, std::uint32_t> tally;
  for (WordId t : tokens) ++tally[t];
  Document doc;
  doc.counts.reserve(tally.size());
  for (const auto& [id, c] : tally) doc.counts.push_back({id, c});
  return doc;
}

std::uint64_t Corpus::total_length() const noexcept {
  std::uint64_t total = 0;
  for (const auto& d : documents) total += d.length();
  return total;
}

void Corpus::validate() const {
  if (documents.size() != losses.size()) {
    throw DataError("corpus has " + std::to_string(documents.size()) + " documents but " +
                    std::to_string(losses.size()) + " losses");
  }
  if (vocabulary.size() == 0) throw DataError("empty vocabulary");
  for (std::size_t i = 0; i < documents.size(); ++i) {
    if (!(losses[i] > 0.0) || !std::isfinite(losses[i])) {
      throw DataError("loss " + std::to_string(i) + " is not positive");
    }
    WordId prev = 0;
    for (std::size_t j = 0; j < documents[i].counts.size(); ++j) {
      const auto& wc = documents[i].counts[j];
      if (wc.id >= vocabulary.size() || wc.count == 0 || (j > 0 && wc.id <= prev)) {
        throw DataError("document " + std::to_string(i) + " has an invalid count entry");
      }
      prev = wc.id;
    }
  }
}

Corpus Corpus::subset(const std::vector<std::size_t>& indices) const {
  Corpus out;
  out.vocabulary = vocabulary;
  out.documents.reserve(indices.size());
  out.losses.reserve(indices.size());
  for (std::size_t i : indices) {
    out.documents.push_back(documents.at(i));
    out.losses.push_back(losses.at(i));
  }
  return out;
}

std::unordered_set<std::string> default_stopwords() {
  return {"a",    "an",   "and",  "are",  "as",   "at",   "be",    "by",    "for",  "from",
          "has",  "he",   "her",  "his",  "in",   "into", "is",    "it",    "its",  "of",
          "on",   "or",   "she",  "that", "the",  "their", "then", "there", "they", "this",
          "to",   "was",  "were", "while", "with", "after", "when",  "which", "who",  "will",
          "had",  "have", "him",  "i",    "me",   "my",   "not",   "off",   "out",  "up",
          "over", "very", "we",   "you"};
}

std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stopword file " + path.string());
  std::unordered_set<std::string> words = default_stopwords();
  std::string line;
  while (std::getline(in, line)) {
    const auto word = trim(line);
    if (word.empty() || word.front() == '#') continue;
    std::string lower(word);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    words.insert(std::move(lower));
  }
  return words;
}

std::string stem(std::string_view token) {
  struct Rule {
    std::string_view suffix;
    std::string_view replacement;
  };
  static constexpr Rule kRules[] = {
      {"ations", "ate"}, {"ation", "ate"}, {"ments", ""}, {"ment", ""}, {"ings", ""},
      {"ing", ""},       {"edly", ""},     {"ies", "y"},  {"ied", "y"}, {"ed", ""},
      {"es", ""},        {"ly", ""},       {"s", ""},
  };
  for (const auto& rule : kRules) {
    if (!token.ends_with(rule.suffix)) continue;
    if (rule.suffix == "s" && (token.ends_with("ss") || token.ends_with("us"))) continue;
    const std::size_t base = token.size() - rule.suffix.size();
    if (base + rule.replacement.size() < 3) continue;
    return std::string(token.substr(0, base)) + std::string(rule.replacement);
  }
  return std::string(token);
}

std::vector<std::string> tokenize(std::string_view text, const PreprocessOptions& options) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    if (!options.stopwords.contains(current)) {
      tokens.push_back(options.stem ? stem(current) : current);
    }
    current.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

PreprocessResult preprocess(const std::vector<ClaimRecord>& records,
                            const PreprocessOptions& options) {
  if (records.empty()) throw DataError("no records to preprocess");
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(records.size());
  std::vector<std::string> distinct;
  {
    std::unordered_set<std::string> seen;
    for (const auto& rec : records) {
      tokenized.push_back(tokenize(rec.description, options));
      for (const auto& t : tokenized.back()) {
        if (seen.insert(t).second) distinct.push_back(t);
      }
    }
  }
  std::sort(distinct.begin(), distinct.end());

  PreprocessResult result;
  result.corpus.vocabulary = Vocabulary(std::move(distinct));
  const auto& vocab = result.corpus.vocabulary;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (tokenized[i].empty()) {
      result.dropped.push_back(i);
      continue;
    }
    std::vector<WordId> ids;
    ids.reserve(tokenized[i].size());
    for (const auto& t : tokenized[i]) ids.push_back(*vocab.find(t));
    result.corpus.documents.push_back(Document::from_tokens(ids));
    result.corpus.losses.push_back(records[i].claim_amount);
    result.kept.push_back(i);
  }
  if (result.corpus.documents.empty()) {
    throw DataError("every document is empty after preprocessing");
  }
  return result;
}

MappedCorpus map_to_vocabulary(const std::vector<ClaimRecord>& records,
                               const Vocabulary& vocabulary, const PreprocessOptions& options) {
  MappedCorpus out;
  out.corpus.vocabulary = vocabulary;
  out.corpus.documents.reserve(records.size());
  out.unseen_tokens.reserve(records.size());
  for (const auto& rec : records) {
    std::vector<WordId> ids;
    std::size_t unseen = 0;
    for (const auto& t : tokenize(rec.description, options)) {
      if (const auto id = vocabulary.find(t)) {
        ids.push_back(*id);
      } else {
        ++unseen;
      }
    }
    out.corpus.documents.push_back(Document::from_tokens(ids));
    out.corpus.losses.push_back(rec.claim_amount);
    out.unseen_tokens.push_back(unseen);
  }
  return out;
}

namespace {
std::vector<std::uint64_t> document_frequency(const Corpus& corpus) {
  std::vector<std::uint64_t> df(corpus.vocabulary.size(), 0);
  for (const auto& doc : corpus.documents) {
    for (const auto& wc : doc.counts) ++df[wc.id];
  }
  return df;
}
}  // namespace

RowMatrix tf_idf(const Corpus& corpus) {
  const auto n = static_cast<double>(corpus.size());
  const auto df = document_frequency(corpus);
  RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(corpus.size()),
                                  static_cast<Eigen::Index>(corpus.vocabulary.size()));
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (const auto& wc : corpus.documents[i].counts) {
      out(static_cast<Eigen::Index>(i), wc.id) =
          wc.count * std::log(n / static_cast<double>(df[wc.id]));
    }
  }
  return out;
}

TermSummary term_summary(const Corpus& corpus) {
  TermSummary s;
  const auto n = static_cast<double>(corpus.size());
  s.document_frequency = document_frequency(corpus);
  s.term_frequency.assign(corpus.vocabulary.size(), 0);
  s.tf_idf_total.assign(corpus.vocabulary.size(), 0.0);
  for (const auto& doc : corpus.documents) {
    for (const auto& wc : doc.counts) {
      s.term_frequency[wc.id] += wc.count;
      s.tf_idf_total[wc.id] +=
          wc.count * std::log(n / static_cast<double>(s.document_frequency[wc.id]));
    }
  }
  return s;
}

CorpusSplit stratified_split(const Corpus& corpus, double test_fraction, int bins,
                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in (0, 1)");
  }
  if (bins < 1) throw ConfigError("bins must be at least 1");
  const std::size_t n = corpus.size();
  if (static_cast<double>(n) * test_fraction < static_cast<double>(bins)) {
    throw DataError("too few records per bin: n * test_fraction < bins");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return corpus.losses[a] < corpus.losses[b];
  });

  Rng rng(splitmix64(seed));
  std::vector<char> is_test(n, 0);
  for (int b = 0; b < bins; ++b) {
    const std::size_t lo = n * static_cast<std::size_t>(b) / static_cast<std::size_t>(bins);
    const std::size_t hi = n * static_cast<std::size_t>(b + 1) / static_cast<std::size_t>(bins);
    std::vector<std::size_t> members(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                     order.begin() + static_cast<std::ptrdiff_t>(hi));
    std::shuffle(members.begin(), members.end(), rng);
    const auto take = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(members.size())));
    for (std::size_t j = 0; j < take && j < members.size(); ++j) is_test[members[j]] = 1;
  }

  CorpusSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    (is_test[i] ? split.test_index : split.train_index).push_back(i);
  }
  split.train = corpus.subset(split.train_index);
  split.test = corpus.subset(split.test_index);
  return split;
}

}  // namespace ldmm
