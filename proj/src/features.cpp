#include "acqsim/features.hpp"

#include <algorithm>
#include <cmath>

namespace acqsim {

std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    const bool word = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
    if (word) {
      cur.push_back(static_cast<char>((c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

FeatureVector featurize(std::string_view text, unsigned hash_bits) {
  const std::uint64_t mask = (std::uint64_t{1} << hash_bits) - 1;
  std::vector<std::uint32_t> buckets;
  for (const auto& tok : tokenize(text)) buckets.push_back(static_cast<std::uint32_t>(fnv1a64(tok) & mask));
  std::sort(buckets.begin(), buckets.end());

  FeatureVector fv;
  for (std::size_t i = 0; i < buckets.size();) {
    std::size_t j = i;
    while (j < buckets.size() && buckets[j] == buckets[i]) ++j;
    fv.index.push_back(buckets[i]);
    fv.value.push_back(static_cast<double>(j - i));
    i = j;
  }
  double norm = 0.0;
  for (double v : fv.value) norm += v * v;
  norm = std::sqrt(norm);
  for (double& v : fv.value) v /= norm;
  return fv;
}

FeatureCache::FeatureCache(std::vector<std::string> ids, std::vector<FeatureVector> features)
    : ids_(std::move(ids)), features_(std::move(features)) {}

FeatureCache::FeatureCache(const Corpus& corpus) : ids_(corpus.text_ids()) {
  const auto& texts = corpus.texts();
  features_.resize(texts.size());
  const auto n = static_cast<std::ptrdiff_t>(texts.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    features_[static_cast<std::size_t>(i)] = featurize(texts[static_cast<std::size_t>(i)].content);
  }
}

FeatureCache FeatureCache::build_serial(const Corpus& corpus) {
  std::vector<FeatureVector> f;
  f.reserve(corpus.n_texts());
  for (const auto& t : corpus.texts()) f.push_back(featurize(t.content));
  return FeatureCache(corpus.text_ids(), std::move(f));
}

FeatureCache FeatureCache::from_texts(std::span<const TextDoc> texts) {
  std::vector<std::string> ids;
  std::vector<FeatureVector> f;
  for (const auto& t : texts) {
    ids.push_back(t.text_id);
    f.push_back(featurize(t.content));
  }
  return FeatureCache(std::move(ids), std::move(f));
}

}  // namespace acqsim
