#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace relic {

// Partition of {0..n-1} into disjoint blocks. Block ids are canonicalized to
// first-occurrence order, so structural equality is partition equality.
class Partition {
 public:
  // Canonicalizes the labels; any dense-or-not labeling is accepted.
  explicit Partition(std::vector<std::size_t> block_of);

  std::size_t ground_size() const { return block_of_.size(); }
  std::size_t block_count() const { return block_count_; }
  std::size_t block_of(std::size_t index) const { return block_of_.at(index); }
  const std::vector<std::size_t>& labels() const { return block_of_; }

  std::vector<std::vector<std::size_t>> blocks() const;

  bool operator==(const Partition& other) const {
    return block_of_ == other.block_of_;
  }
  bool operator!=(const Partition& other) const { return !(*this == other); }

 private:
  std::vector<std::size_t> block_of_;
  std::size_t block_count_ = 0;
};

// True iff every block of a lies inside a single block of b (a refines b).
bool is_finer(const Partition& a, const Partition& b);

// Coarsest partition finer than every input: blocks are the nonempty
// intersections of input blocks.
Partition meet_refinement(const std::vector<Partition>& tasks);

// The finest partition: one singleton block per element.
Partition instance_discrimination(std::size_t n);

// Serialized form "n: b0 b1 ... b_{n-1}".
std::string serialize_partition(const Partition& p);
Partition parse_partition(const std::string& line);

// All partitions of {0..n-1} in restricted-growth-string order. Intended for
// exhaustive checks at small n (Bell(6) = 203, Bell(8) = 4140).
std::vector<Partition> all_partitions(std::size_t n);

}  // namespace relic
