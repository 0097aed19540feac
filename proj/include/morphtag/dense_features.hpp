#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace morphtag {

/// Externally computed per-form feature vectors (pre-trained embeddings etc.).
/// Lookup misses return nullptr, never zeros, so callers can fire an explicit
/// "no entry" indicator instead.
struct DenseFeatureTable {
  std::unordered_map<std::string, std::vector<double>> vectors;
  std::size_t dim = 0;

  const std::vector<double>* lookup(const std::string& form) const {
    auto it = vectors.find(form);
    return it == vectors.end() ? nullptr : &it->second;
  }
};

}  // namespace morphtag
