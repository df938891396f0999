#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "groupenet/errors.hpp"

namespace groupenet {

// One disjoint, exhaustive grouping of the penalized features. Groups are
// indexed 0..G-1 internally; labels carry the external identity. When
// monotone_order is set, the penalty multipliers are required to be
// non-decreasing along that order of group indices.
struct Partition {
  std::string name;
  std::vector<int> assignment;  // feature index -> group index
  std::vector<std::string> group_labels;
  std::optional<std::vector<int>> monotone_order;

  int group_count() const { return static_cast<int>(group_labels.size()); }

  std::vector<int> group_sizes() const {
    std::vector<int> sizes(group_labels.size(), 0);
    for (int g : assignment) sizes[static_cast<std::size_t>(g)]++;
    return sizes;
  }

  std::vector<std::vector<int>> group_members() const {
    std::vector<std::vector<int>> members(group_labels.size());
    for (std::size_t j = 0; j < assignment.size(); ++j) {
      members[static_cast<std::size_t>(assignment[j])].push_back(static_cast<int>(j));
    }
    return members;
  }

  void validate(Eigen::Index p) const {
    const int g_count = group_count();
    if (g_count < 1) throw validation_error("partition '" + name + "': no groups");
    if (static_cast<Eigen::Index>(assignment.size()) != p) {
      throw validation_error("partition '" + name +
                             "': assignment does not cover every feature");
    }
    std::vector<int> sizes(static_cast<std::size_t>(g_count), 0);
    for (int g : assignment) {
      if (g < 0 || g >= g_count) {
        throw validation_error("partition '" + name + "': group index out of range");
      }
      sizes[static_cast<std::size_t>(g)]++;
    }
    for (int g = 0; g < g_count; ++g) {
      if (sizes[static_cast<std::size_t>(g)] == 0) {
        throw validation_error("partition '" + name + "': empty group '" +
                               group_labels[static_cast<std::size_t>(g)] + "'");
      }
    }
    if (monotone_order) {
      if (static_cast<int>(monotone_order->size()) != g_count) {
        throw validation_error("partition '" + name +
                               "': monotone order must list every group");
      }
      std::vector<bool> seen(static_cast<std::size_t>(g_count), false);
      for (int g : *monotone_order) {
        if (g < 0 || g >= g_count || seen[static_cast<std::size_t>(g)]) {
          throw validation_error("partition '" + name +
                                 "': monotone order is not a permutation of the groups");
        }
        seen[static_cast<std::size_t>(g)] = true;
      }
    }
  }

  static Partition single_group(Eigen::Index p, std::string label = "all") {
    Partition part;
    part.name = "single";
    part.assignment.assign(static_cast<std::size_t>(p), 0);
    part.group_labels = {std::move(label)};
    return part;
  }

  // Contiguous groups of the given sizes over features 0..p-1.
  static Partition contiguous(const std::vector<int>& sizes, std::string name = "groups") {
    Partition part;
    part.name = std::move(name);
    for (std::size_t g = 0; g < sizes.size(); ++g) {
      part.group_labels.push_back("g" + std::to_string(g + 1));
      part.assignment.insert(part.assignment.end(),
                             static_cast<std::size_t>(sizes[g]), static_cast<int>(g));
    }
    return part;
  }
};

// One or more partitions of the same feature set. With more than one
// partition the per-feature penalty multiplier is the product of the group
// multipliers across partitions.
struct PartitionSet {
  std::vector<Partition> partitions;

  void validate(Eigen::Index p) const {
    if (partitions.empty()) throw validation_error("partition set: no partitions");
    for (const auto& part : partitions) part.validate(p);
  }

  std::size_t count() const { return partitions.size(); }

  static PartitionSet single_group(Eigen::Index p) {
    return PartitionSet{{Partition::single_group(p)}};
  }

  static PartitionSet of(Partition part) { return PartitionSet{{std::move(part)}}; }
};

}  // namespace groupenet
