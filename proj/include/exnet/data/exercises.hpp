#pragma once

#include <map>
#include <string>
#include <vector>

#include "exnet/core/tensor.hpp"

namespace exnet::data {

// Absolute path of a file shipped in the repository's assets directory.
std::string default_asset_path(const std::string& filename);

// Exercise -> muscle-group mapping. Class and muscle orderings are
// alphabetical, which fixes the integer ids used everywhere else.
class MuscleMap {
public:
    static MuscleMap load(const std::string& path);
    static MuscleMap from_json_text(const std::string& text);

    const std::vector<std::string>& exercises() const { return exercises_; }
    const std::vector<std::string>& muscles() const { return muscles_; }
    int64_t num_exercises() const { return int64_t(exercises_.size()); }
    int64_t num_muscles() const { return int64_t(muscles_.size()); }

    int exercise_id(const std::string& name) const;  // throws on unknown
    int muscle_id(const std::string& name) const;

    const std::vector<int>& muscles_for(int exercise_id) const;
    // Multi-hot target row over the muscle vocabulary.
    std::vector<float> target_row(int exercise_id) const;
    // (N, num_muscles) multi-hot targets for a batch of exercise labels.
    Tensor targets(const std::vector<int>& exercise_ids) const;

private:
    std::vector<std::string> exercises_;
    std::vector<std::string> muscles_;
    std::vector<std::vector<int>> exercise_muscles_;
    std::map<std::string, int> exercise_index_;
    std::map<std::string, int> muscle_index_;
};

// Raw dataset folder name -> canonical class name. Canonical classes are the
// sorted distinct values of the mapping.
class Taxonomy {
public:
    static Taxonomy load(const std::string& path);
    static Taxonomy from_json_text(const std::string& text);

    const std::vector<std::string>& classes() const { return classes_; }
    int64_t num_classes() const { return int64_t(classes_.size()); }
    // Canonical class for a raw folder name; throws on unmapped names.
    const std::string& canonical(const std::string& raw_name) const;
    bool has_raw(const std::string& raw_name) const;
    int class_id(const std::string& canonical_name) const;
    const std::map<std::string, std::string>& raw_mapping() const { return raw_to_canonical_; }

private:
    std::map<std::string, std::string> raw_to_canonical_;
    std::vector<std::string> classes_;
    std::map<std::string, int> class_index_;
};

}  // namespace exnet::data
