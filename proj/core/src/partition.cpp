#include "relic/partition.hpp"

#include <map>
#include <sstream>
#include <unordered_map>

#include "relic/errors.hpp"

namespace relic {

Partition::Partition(std::vector<std::size_t> block_of)
    : block_of_(std::move(block_of)) {
  if (block_of_.empty()) throw ContractError("partition of empty ground set");
  std::unordered_map<std::size_t, std::size_t> relabel;
  for (auto& b : block_of_) {
    auto [it, inserted] = relabel.emplace(b, relabel.size());
    b = it->second;
  }
  block_count_ = relabel.size();
}

std::vector<std::vector<std::size_t>> Partition::blocks() const {
  std::vector<std::vector<std::size_t>> out(block_count_);
  for (std::size_t i = 0; i < block_of_.size(); ++i) out[block_of_[i]].push_back(i);
  return out;
}

bool is_finer(const Partition& a, const Partition& b) {
  if (a.ground_size() != b.ground_size()) {
    throw ContractError("is_finer: ground sizes differ, " +
                        std::to_string(a.ground_size()) + " vs " +
                        std::to_string(b.ground_size()));
  }
  // Each a-block must map into exactly one b-block.
  std::vector<std::size_t> image(a.block_count(), b.ground_size());
  for (std::size_t i = 0; i < a.ground_size(); ++i) {
    std::size_t& slot = image[a.block_of(i)];
    if (slot == b.ground_size()) {
      slot = b.block_of(i);
    } else if (slot != b.block_of(i)) {
      return false;
    }
  }
  return true;
}

Partition meet_refinement(const std::vector<Partition>& tasks) {
  if (tasks.empty()) throw ContractError("meet_refinement: empty task list");
  const std::size_t n = tasks[0].ground_size();
  for (const Partition& t : tasks) {
    if (t.ground_size() != n) {
      throw ContractError("meet_refinement: ground sizes differ, " +
                          std::to_string(n) + " vs " +
                          std::to_string(t.ground_size()));
    }
  }
  std::map<std::vector<std::size_t>, std::size_t> cells;
  std::vector<std::size_t> labels(n);
  std::vector<std::size_t> key(tasks.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < tasks.size(); ++t) key[t] = tasks[t].block_of(i);
    auto [it, inserted] = cells.emplace(key, cells.size());
    labels[i] = it->second;
  }
  return Partition(std::move(labels));
}

Partition instance_discrimination(std::size_t n) {
  if (n == 0) throw ContractError("instance_discrimination: n must be >= 1");
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i;
  return Partition(std::move(labels));
}

std::string serialize_partition(const Partition& p) {
  std::ostringstream os;
  os << p.ground_size() << ':';
  for (std::size_t i = 0; i < p.ground_size(); ++i) os << ' ' << p.block_of(i);
  return os.str();
}

Partition parse_partition(const std::string& line) {
  std::istringstream is(line);
  std::size_t n = 0;
  char colon = 0;
  if (!(is >> n >> colon) || colon != ':' || n == 0) {
    throw FormatError("partition line must start with 'n:', got \"" + line + "\"");
  }
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(is >> labels[i])) {
      throw FormatError("partition line ends after " + std::to_string(i) +
                        " of " + std::to_string(n) + " labels");
    }
  }
  std::string rest;
  if (is >> rest) {
    throw FormatError("trailing content in partition line: \"" + rest + "\"");
  }
  return Partition(std::move(labels));
}

std::vector<Partition> all_partitions(std::size_t n) {
  if (n == 0) return {};
  // Restricted growth strings: a[0]=0, a[i] <= 1 + max(a[0..i-1]).
  std::vector<Partition> out;
  std::vector<std::size_t> a(n, 0);
  std::vector<std::size_t> maxima(n, 0);  // maxima[i] = max(a[0..i])
  while (true) {
    out.emplace_back(a);
    // Odometer increment respecting the growth constraint.
    std::size_t i = n;
    while (i-- > 1) {
      if (a[i] <= maxima[i - 1]) {
        ++a[i];
        maxima[i] = std::max(maxima[i - 1], a[i]);
        for (std::size_t j = i + 1; j < n; ++j) {
          a[j] = 0;
          maxima[j] = maxima[j - 1];
        }
        break;
      }
    }
    if (i == 0) break;
  }
  return out;
}

}  // namespace relic
