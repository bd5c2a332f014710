#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace ideaforge {

// Errors raised while parsing an embedding file. Kept distinct so callers
// can tell a bad header from a bad record.
class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class HeaderError : public EmbeddingError {
 public:
  using EmbeddingError::EmbeddingError;
};

class RecordError : public EmbeddingError {
 public:
  using EmbeddingError::EmbeddingError;
};

class OovError : public std::runtime_error {
 public:
  explicit OovError(const std::string& token)
      : std::runtime_error("token not in vocabulary: " + token), token_(token) {}
  const std::string& token() const { return token_; }

 private:
  std::string token_;
};

enum class EmbeddingFormat { kText, kBinary };

/// Immutable token -> vector map. Vectors are stored as 32-bit floats exactly
/// as read; cosine normalizes on the fly using cached norms.
class EmbeddingStore {
 public:
  EmbeddingStore(std::size_t dimension,
                 std::vector<std::string> tokens,
                 std::vector<float> data,
                 std::string source_label,
                 std::size_t duplicates_skipped = 0)
      : dimension_(dimension),
        tokens_(std::move(tokens)),
        data_(std::move(data)),
        source_label_(std::move(source_label)),
        duplicates_skipped_(duplicates_skipped) {
    if (dimension_ == 0) throw EmbeddingError("dimension must be positive");
    if (tokens_.empty()) throw EmbeddingError("empty vocabulary");
    if (data_.size() != tokens_.size() * dimension_)
      throw EmbeddingError("vector data size does not match vocabulary");
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (tokens_[i].empty()) throw EmbeddingError("empty token");
      auto [it, inserted] = index_.emplace(tokens_[i], i);
      if (!inserted) throw EmbeddingError("duplicate token: " + tokens_[i]);
    }
    norms_.resize(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      double s = 0.0;
      const float* v = data_.data() + i * dimension_;
      for (std::size_t d = 0; d < dimension_; ++d) {
        if (!std::isfinite(v[d]))
          throw EmbeddingError("non-finite component in vector for token " + tokens_[i]);
        s += static_cast<double>(v[d]) * v[d];
      }
      norms_[i] = std::sqrt(s);
    }
  }

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return tokens_.size(); }
  const std::string& source_label() const { return source_label_; }
  std::size_t duplicates_skipped() const { return duplicates_skipped_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool contains(const std::string& token) const { return index_.count(token) != 0; }

  /// Vector for a token; throws OovError when absent.
  const float* vector(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) throw OovError(token);
    return data_.data() + it->second * dimension_;
  }

  double norm(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) throw OovError(token);
    return norms_[it->second];
  }

  /// Cosine similarity of two in-vocabulary tokens. Throws OovError for
  /// unknown tokens and EmbeddingError for zero-norm vectors.
  double cosine(const std::string& a, const std::string& b) const {
    auto ia = index_.find(a);
    if (ia == index_.end()) throw OovError(a);
    auto ib = index_.find(b);
    if (ib == index_.end()) throw OovError(b);
    double na = norms_[ia->second], nb = norms_[ib->second];
    if (na == 0.0 || nb == 0.0)
      throw EmbeddingError("cosine undefined for zero-norm vector");
    const float* va = data_.data() + ia->second * dimension_;
    const float* vb = data_.data() + ib->second * dimension_;
    double dot = 0.0;
    for (std::size_t d = 0; d < dimension_; ++d)
      dot += static_cast<double>(va[d]) * vb[d];
    double c = dot / (na * nb);
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    return c;
  }

  /// Euclidean distance between the vectors of two in-vocabulary tokens.
  double euclidean(const std::string& a, const std::string& b) const {
    const float* va = vector(a);
    const float* vb = vector(b);
    double s = 0.0;
    for (std::size_t d = 0; d < dimension_; ++d) {
      double diff = static_cast<double>(va[d]) - vb[d];
      s += diff * diff;
    }
    return std::sqrt(s);
  }

 private:
  std::size_t dimension_;
  std::vector<std::string> tokens_;
  std::vector<float> data_;
  std::string source_label_;
  std::size_t duplicates_skipped_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> norms_;
};

namespace detail {

inline void parse_header(std::istream& in, std::size_t& vocab, std::size_t& dim) {
  std::string line;
  if (!std::getline(in, line)) throw HeaderError("missing header line");
  std::istringstream hs(line);
  long long v = -1, d = -1;
  if (!(hs >> v >> d) || v <= 0 || d <= 0) {
    std::string rest;
    throw HeaderError("malformed header: \"" + line + "\"");
  }
  std::string trailing;
  if (hs >> trailing) throw HeaderError("malformed header: \"" + line + "\"");
  vocab = static_cast<std::size_t>(v);
  dim = static_cast<std::size_t>(d);
}

}  // namespace detail

/// Parse an embedding stream. First occurrence of a duplicate token wins;
/// the skip count is recorded on the store.
inline EmbeddingStore load_embeddings(std::istream& in, EmbeddingFormat format,
                                      std::string source_label = "") {
  std::size_t vocab = 0, dim = 0;
  detail::parse_header(in, vocab, dim);

  std::vector<std::string> tokens;
  std::vector<float> data;
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t duplicates = 0;
  tokens.reserve(vocab);
  data.reserve(vocab * dim);

  auto push_record = [&](std::string token, const std::vector<float>& vec) {
    if (token.empty()) throw RecordError("empty token");
    for (float x : vec)
      if (!std::isfinite(x))
        throw RecordError("non-finite value in record for token " + token);
    if (!seen.emplace(token, tokens.size()).second) {
      ++duplicates;
      return;
    }
    tokens.push_back(std::move(token));
    data.insert(data.end(), vec.begin(), vec.end());
  };

  if (format == EmbeddingFormat::kText) {
    std::string line;
    while (tokens.size() + duplicates < vocab && std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string token;
      ls >> token;
      std::vector<float> vec(dim);
      for (std::size_t d = 0; d < dim; ++d) {
        if (!(ls >> vec[d]))
          throw RecordError("wrong component count for token " + token);
      }
      float extra;
      if (ls >> extra)
        throw RecordError("wrong component count for token " + token);
      push_record(std::move(token), vec);
    }
  } else {
    while (tokens.size() + duplicates < vocab) {
      std::string token;
      int ch;
      while ((ch = in.get()) != EOF && ch != ' ') {
        if (ch == '\n' && token.empty()) continue;  // optional record separator
        token += static_cast<char>(ch);
      }
      if (ch == EOF) {
        if (token.empty()) break;
        throw RecordError("truncated record for token " + token);
      }
      std::vector<float> vec(dim);
      in.read(reinterpret_cast<char*>(vec.data()),
              static_cast<std::streamsize>(dim * sizeof(float)));
      if (in.gcount() != static_cast<std::streamsize>(dim * sizeof(float)))
        throw RecordError("wrong component count for token " + token);
      push_record(std::move(token), vec);
    }
  }

  if (tokens.empty()) throw EmbeddingError("empty vocabulary");
  return EmbeddingStore(dim, std::move(tokens), std::move(data),
                        std::move(source_label), duplicates);
}

/// Serialize a store back to either interchange format.
inline void save_embeddings(const EmbeddingStore& store, std::ostream& out,
                            EmbeddingFormat format) {
  out << store.size() << ' ' << store.dimension() << '\n';
  if (format == EmbeddingFormat::kText) {
    std::ostringstream buf;
    buf.precision(std::numeric_limits<float>::max_digits10);
    for (const auto& token : store.tokens()) {
      buf.str("");
      buf << token;
      const float* v = store.vector(token);
      for (std::size_t d = 0; d < store.dimension(); ++d) buf << ' ' << v[d];
      buf << '\n';
      out << buf.str();
    }
  } else {
    for (const auto& token : store.tokens()) {
      out << token << ' ';
      const float* v = store.vector(token);
      out.write(reinterpret_cast<const char*>(v),
                static_cast<std::streamsize>(store.dimension() * sizeof(float)));
      out << '\n';
    }
  }
}

}  // namespace ideaforge
