#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "acqsim/corpus.hpp"

namespace acqsim {

inline constexpr unsigned kTextHashBits = 18;
inline constexpr unsigned kAnnotatorHashBits = 12;

/// Sparse hashed bag-of-words; indices strictly increasing.
struct FeatureVector {
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  bool empty() const noexcept { return index.empty(); }
  std::size_t size() const noexcept { return index.size(); }
  bool operator==(const FeatureVector&) const = default;
};

std::uint64_t fnv1a64(std::string_view s) noexcept;

/// Lowercases ASCII and splits on anything that is not an ASCII letter, digit
/// or a non-ASCII byte (so UTF-8 letters stay inside tokens).
std::vector<std::string> tokenize(std::string_view text);

/// Token counts hashed into 2^hash_bits buckets, L2-normalized.
FeatureVector featurize(std::string_view text, unsigned hash_bits = kTextHashBits);

/// Features for every text of a corpus, computed once and shared read-only.
class FeatureCache {
 public:
  FeatureCache() = default;
  FeatureCache(std::vector<std::string> ids, std::vector<FeatureVector> features);

  /// Featurizes texts in parallel.
  explicit FeatureCache(const Corpus& corpus);
  static FeatureCache build_serial(const Corpus& corpus);
  static FeatureCache from_texts(std::span<const TextDoc> texts);

  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const FeatureVector& operator[](std::size_t i) const { return features_[i]; }

 private:
  std::vector<std::string> ids_;
  std::vector<FeatureVector> features_;
};

}  // namespace acqsim
