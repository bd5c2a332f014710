#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ideaforge/embedding.hpp"
#include "ideaforge/metrics.hpp"

namespace fixtures {

inline ideaforge::EmbeddingStore make_store(
    std::size_t dimension,
    const std::vector<std::pair<std::string, std::vector<float>>>& entries,
    std::string label = "fixture") {
  std::vector<std::string> tokens;
  std::vector<float> data;
  for (const auto& [token, vec] : entries) {
    tokens.push_back(token);
    data.insert(data.end(), vec.begin(), vec.end());
  }
  return ideaforge::EmbeddingStore(dimension, std::move(tokens), std::move(data),
                                   std::move(label));
}

struct RandomBagSpace {
  ideaforge::EmbeddingStore store;
  std::vector<std::string> tokens;
};

/// A random token universe with vectors in [-1, 1]^dim.
inline RandomBagSpace make_random_space(std::mt19937_64& rng, std::size_t universe,
                                        std::size_t dimension) {
  std::uniform_real_distribution<float> coord(-1.0f, 1.0f);
  std::vector<std::pair<std::string, std::vector<float>>> entries;
  std::vector<std::string> tokens;
  for (std::size_t k = 0; k < universe; ++k) {
    std::string token = "w" + std::to_string(k);
    std::vector<float> vec(dimension);
    for (auto& x : vec) x = coord(rng);
    entries.emplace_back(token, vec);
    tokens.push_back(token);
  }
  return RandomBagSpace{make_store(dimension, entries), tokens};
}

/// Random simplex weights over `size` distinct tokens drawn from the space.
inline ideaforge::BagOfWords random_bag(std::mt19937_64& rng,
                                        const RandomBagSpace& space,
                                        std::size_t size) {
  std::vector<std::size_t> pool(space.tokens.size());
  for (std::size_t k = 0; k < pool.size(); ++k) pool[k] = k;
  std::shuffle(pool.begin(), pool.end(), rng);
  std::exponential_distribution<double> expo(1.0);
  ideaforge::BagOfWords bag;
  double total = 0.0;
  for (std::size_t k = 0; k < size; ++k) {
    double w = expo(rng) + 1e-6;
    bag.items.emplace_back(space.tokens[pool[k]], w);
    total += w;
  }
  for (auto& [token, w] : bag.items) w /= total;
  return bag;
}

}  // namespace fixtures
