#pragma once

#include <string>
#include <vector>

#include "profvec/preprocess.hpp"
#include "profvec/random.hpp"

namespace fixtures {

/// Sentences drawn from disjoint token groups: cluster c uses tokens
/// "c<c>w<j>" and never shares a sentence with another cluster.
inline std::vector<profvec::TokenSeq> planted_clusters(std::size_t clusters,
                                                       std::size_t tokens_per_cluster,
                                                       std::size_t sentences_per_cluster,
                                                       std::size_t sentence_length,
                                                       std::uint64_t seed) {
  profvec::Rng rng(seed);
  std::vector<profvec::TokenSeq> out;
  for (std::size_t s = 0; s < sentences_per_cluster; ++s)
    for (std::size_t c = 0; c < clusters; ++c) {
      profvec::TokenSeq sentence;
      for (std::size_t i = 0; i < sentence_length; ++i)
        sentence.push_back("c" + std::to_string(c) + "w" +
                           std::to_string(rng.index(tokens_per_cluster)));
      out.push_back(std::move(sentence));
    }
  return out;
}

inline std::string cluster_token(std::size_t cluster, std::size_t j) {
  return "c" + std::to_string(cluster) + "w" + std::to_string(j);
}

}  // namespace fixtures
