#include "fedpoison/poisoning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "fedpoison/errors.hpp"
#include "fedpoison/random.hpp"

namespace fedpoison {

std::vector<Label> resolve_targets(const Dataset& shard, const AttackSpec& spec) {
  const std::uint32_t c = shard.num_classes();
  std::vector<Label> targets;
  if (!spec.target_classes.empty()) {
    targets = spec.target_classes;
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    for (Label t : targets) {
      if (t >= c) throw std::invalid_argument("attack: target class " + std::to_string(t) + " >= " + std::to_string(c));
    }
    return targets;
  }
  const auto counts = shard.class_counts();
  std::vector<Label> order(c);
  std::iota(order.begin(), order.end(), Label{0});
  std::stable_sort(order.begin(), order.end(), [&](Label a, Label b) { return counts[a] > counts[b]; });
  order.resize(std::min<std::size_t>(spec.num_target_classes, c));
  std::sort(order.begin(), order.end());
  return order;
}

PoisonResult flip_labels(const Dataset& shard, const AttackSpec& spec) {
  if (!(spec.victim_fraction >= 0.0 && spec.victim_fraction <= 1.0)) {
    throw std::invalid_argument("attack: victim_fraction must lie in [0, 1]");
  }
  const std::uint32_t c = shard.num_classes();
  PoisonResult out;
  out.targets = resolve_targets(shard, spec);
  if (!out.targets.empty() && c < 2) {
    throw std::invalid_argument("attack: label flipping needs at least two classes");
  }

  Random rng(spec.seed);
  std::vector<Label> labels = shard.labels();

  // Candidate groups: one per target class, or a single pooled group.
  std::vector<std::vector<std::size_t>> groups;
  if (spec.pooled_fraction) {
    groups.emplace_back();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (std::binary_search(out.targets.begin(), out.targets.end(), labels[i])) groups.back().push_back(i);
    }
  } else {
    for (Label t : out.targets) {
      auto& g = groups.emplace_back();
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == t) g.push_back(i);
      }
    }
  }

  for (const auto& group : groups) {
    const auto n_flip = static_cast<std::size_t>(std::llround(spec.victim_fraction * static_cast<double>(group.size())));
    for (std::size_t pick : rng.sample_without_replacement(group.size(), n_flip)) {
      const std::size_t row = group[pick];
      const Label old_label = labels[row];
      // Uniform over the c-1 other labels: draw from [0, c-1) and skip the original.
      auto new_label = static_cast<Label>(rng.uniform_index(c - 1));
      if (new_label >= old_label) ++new_label;
      labels[row] = new_label;
      out.flip_log.push_back({row, old_label, new_label});
    }
  }
  std::sort(out.flip_log.begin(), out.flip_log.end(),
            [](const LabelFlip& a, const LabelFlip& b) { return a.index < b.index; });
  out.poisoned = shard.with_labels(std::move(labels));
  return out;
}

void write_flip_log(const std::filesystem::path& path, const std::vector<LabelFlip>& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write flip log: " + path.string());
  out << "index,old,new\n";
  for (const auto& f : log) out << f.index << ',' << f.old_label << ',' << f.new_label << '\n';
}

}  // namespace fedpoison
