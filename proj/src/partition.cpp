#include "partobs/partition.hpp"

#include <algorithm>
#include <cctype>

#include "json.hpp"

namespace partobs {

Partition Partition::FromLabels(const std::vector<int>& labels) {
  Partition p;
  p.assignment_.resize(labels.size());
  std::vector<std::pair<int, int>> seen;  // (label, canonical id)
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = std::find_if(seen.begin(), seen.end(),
                           [&](const auto& e) { return e.first == labels[i]; });
    if (it == seen.end()) {
      seen.emplace_back(labels[i], static_cast<int>(seen.size()));
      p.assignment_[i] = static_cast<int>(seen.size()) - 1;
    } else {
      p.assignment_[i] = it->second;
    }
  }
  p.block_count_ = static_cast<int>(seen.size());
  return p;
}

Partition Partition::FromBlocks(const std::vector<std::vector<int>>& blocks,
                                int n) {
  std::vector<int> labels(n, -1);
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    if (blocks[k].empty()) {
      throw ValidationError("block " + std::to_string(k + 1) + " is empty");
    }
    for (int agent : blocks[k]) {
      if (agent < 0 || agent >= n) {
        throw ValidationError("agent " + std::to_string(agent + 1) +
                              " is outside 1.." + std::to_string(n));
      }
      if (labels[agent] != -1) {
        throw ValidationError("agent " + std::to_string(agent + 1) +
                              " appears in more than one block");
      }
      labels[agent] = static_cast<int>(k);
    }
  }
  for (int i = 0; i < n; ++i) {
    if (labels[i] == -1) {
      throw ValidationError("agent " + std::to_string(i + 1) +
                            " is not covered by any block");
    }
  }
  return FromLabels(labels);
}

Partition Partition::Singletons(int n) {
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = i;
  return FromLabels(labels);
}

Partition Partition::SingleBlock(int n) {
  return FromLabels(std::vector<int>(n, 0));
}

std::vector<std::vector<int>> Partition::blocks() const {
  std::vector<std::vector<int>> out(block_count_);
  for (int i = 0; i < n(); ++i) out[assignment_[i]].push_back(i);
  return out;
}

std::vector<int> Partition::block_sizes() const {
  std::vector<int> sizes(block_count_, 0);
  for (int id : assignment_) ++sizes[id];
  return sizes;
}

int Partition::min_block_size() const {
  const auto sizes = block_sizes();
  return sizes.empty() ? 0 : *std::min_element(sizes.begin(), sizes.end());
}

ObservationMatrix h_matrix(const Partition& p) {
  const int n = p.n();
  const auto sizes = p.block_sizes();
  ObservationMatrix out;
  out.provenance = ObservationMatrix::Provenance::kExact;
  out.H = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double w = 1.0 / sizes[p.block_of(i)];
    for (int j = 0; j < n; ++j) {
      if (p.block_of(j) == p.block_of(i)) out.H(i, j) = w;
    }
  }
  return out;
}

namespace {

class Enumerator {
 public:
  Enumerator(int n, int min_block, std::uint64_t first, std::uint64_t last,
             const std::function<bool(const Partition&)>& visit)
      : n_(n), L_(min_block), first_(first), last_(last), visit_(visit),
        labels_(n, 0) {}

  std::uint64_t Run() {
    if (n_ < 1 || L_ > n_) return 0;
    sizes_.assign(1, 1);
    labels_[0] = 0;
    Recurse(1, L_ - 1);
    return visited_;
  }

 private:
  // `deficit` is the number of agents still needed to bring every open block
  // up to the minimum size.
  void Recurse(int pos, int deficit) {
    if (stop_) return;
    if (pos == n_) {
      if (deficit == 0) Emit();
      return;
    }
    const int remaining = n_ - pos;
    const int blocks = static_cast<int>(sizes_.size());
    for (int k = 0; k <= blocks && !stop_; ++k) {
      int next_deficit = deficit;
      if (k == blocks) {
        next_deficit += L_ - 1;
      } else if (sizes_[k] < L_) {
        next_deficit -= 1;
      }
      if (next_deficit > remaining - 1) continue;
      labels_[pos] = k;
      if (k == blocks) {
        sizes_.push_back(1);
      } else {
        ++sizes_[k];
      }
      Recurse(pos + 1, next_deficit);
      if (k == blocks) {
        sizes_.pop_back();
      } else {
        --sizes_[k];
      }
    }
  }

  void Emit() {
    const std::uint64_t index = position_++;
    if (index < first_) return;
    if (index >= last_) {
      stop_ = true;
      return;
    }
    ++visited_;
    if (!visit_(Partition::FromLabels(labels_))) stop_ = true;
  }

  int n_;
  int L_;
  std::uint64_t first_;
  std::uint64_t last_;
  const std::function<bool(const Partition&)>& visit_;
  std::vector<int> labels_;
  std::vector<int> sizes_;
  std::uint64_t position_ = 0;
  std::uint64_t visited_ = 0;
  bool stop_ = false;
};

}  // namespace

void for_each_partition(int n, int min_block_size,
                        const std::function<bool(const Partition&)>& visit) {
  for_each_partition_in_range(n, min_block_size, 0, UINT64_MAX, visit);
}

std::uint64_t for_each_partition_in_range(
    int n, int min_block_size, std::uint64_t first, std::uint64_t last,
    const std::function<bool(const Partition&)>& visit) {
  if (min_block_size < 1) throw ValidationError("min block size must be >= 1");
  return Enumerator(n, min_block_size, first, last, visit).Run();
}

std::uint64_t count_partitions(int n, int min_block_size) {
  return for_each_partition_in_range(n, min_block_size, 0, UINT64_MAX,
                                     [](const Partition&) { return true; });
}

namespace {

class PartitionParser {
 public:
  explicit PartitionParser(std::string_view text) : s_(text) {}

  std::vector<std::vector<int>> Parse() {
    std::vector<std::vector<int>> blocks;
    SkipSpace();
    if (AtEnd()) Fail("empty partition text");
    while (true) {
      blocks.push_back(ParseBlock());
      SkipSpace();
      if (AtEnd()) break;
      Expect(',');
      SkipSpace();
    }
    return blocks;
  }

  [[noreturn]] void Fail(const std::string& what) const {
    throw PartitionParseError(what, pos_);
  }

 private:
  std::vector<int> ParseBlock() {
    Expect('{');
    SkipSpace();
    std::vector<int> block;
    if (Peek() == '}') Fail("empty block");
    while (true) {
      block.push_back(ParseAgent());
      SkipSpace();
      if (Peek() == '}') {
        ++pos_;
        return block;
      }
      Expect(',');
      SkipSpace();
    }
  }

  int ParseAgent() {
    if (AtEnd() || !std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      Fail("expected an agent index");
    }
    long value = 0;
    while (!AtEnd() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      value = value * 10 + (s_[pos_] - '0');
      if (value > 1'000'000) Fail("agent index too large");
      ++pos_;
    }
    if (value < 1) Fail("agent indices start at 1");
    return static_cast<int>(value);
  }

  void Expect(char c) {
    if (AtEnd() || s_[pos_] != c) Fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  char Peek() const { return AtEnd() ? '\0' : s_[pos_]; }
  bool AtEnd() const { return pos_ >= s_.size(); }
  void SkipSpace() {
    while (!AtEnd() && std::isspace(static_cast<unsigned char>(s_[pos_]))) {
      ++pos_;
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

Partition from_one_indexed(std::vector<std::vector<int>> blocks, int n) {
  int largest = 0;
  for (auto& block : blocks) {
    for (int& agent : block) {
      largest = std::max(largest, agent);
      agent -= 1;
    }
  }
  return Partition::FromBlocks(blocks, n > 0 ? n : largest);
}

}  // namespace

Partition parse_partition(std::string_view text, int n) {
  PartitionParser parser(text);
  return from_one_indexed(parser.Parse(), n);
}

std::string format_partition(const Partition& p) {
  std::string out;
  for (const auto& block : p.blocks()) {
    if (!out.empty()) out += ',';
    out += '{';
    for (std::size_t k = 0; k < block.size(); ++k) {
      if (k) out += ',';
      out += std::to_string(block[k] + 1);
    }
    out += '}';
  }
  return out;
}

std::string partition_to_json(const Partition& p) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& block : p.blocks()) {
    nlohmann::json b = nlohmann::json::array();
    for (int agent : block) b.push_back(agent + 1);
    blocks.push_back(std::move(b));
  }
  return nlohmann::json{{"blocks", std::move(blocks)}}.dump();
}

Partition partition_from_json(const std::string& text, int n) {
  try {
    const auto j = nlohmann::json::parse(text);
    return from_one_indexed(
        j.at("blocks").get<std::vector<std::vector<int>>>(), n);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed partition JSON: ") + e.what());
  }
}

}  // namespace partobs
