#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "fedpoison/dataset.hpp"

namespace fedpoison {

/// Label-flipping attack parameters.
struct AttackSpec {
  bool enabled = false;
  /// Share of each targeted class's samples that get a wrong label.
  double victim_fraction = 0.7;
  /// Explicit target classes; when empty, the `num_target_classes` most
  /// frequent classes of the shard are used (ties to the lower class id).
  std::vector<Label> target_classes;
  std::size_t num_target_classes = 6;
  /// Apply the fraction to the pooled targeted samples rather than per class.
  bool pooled_fraction = false;
  std::uint64_t seed = 0;
};

struct LabelFlip {
  std::size_t index;
  Label old_label;
  Label new_label;
  bool operator==(const LabelFlip&) const = default;
};

struct PoisonResult {
  Dataset poisoned;
  std::vector<LabelFlip> flip_log;  // ascending index
  std::vector<Label> targets;       // classes actually targeted, ascending
};

/// Chosen samples get a label drawn uniformly from the c-1 classes other than
/// their own. Features are never touched. Ignores spec.enabled.
PoisonResult flip_labels(const Dataset& shard, const AttackSpec& spec);

/// Resolves the target set for a shard (explicit list or most frequent classes).
std::vector<Label> resolve_targets(const Dataset& shard, const AttackSpec& spec);

void write_flip_log(const std::filesystem::path& path, const std::vector<LabelFlip>& log);

}  // namespace fedpoison
