#include "exnet/data/exercises.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace exnet::data {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string default_asset_path(const std::string& filename) {
#ifdef EXNET_ASSET_DIR
    return std::string(EXNET_ASSET_DIR) + "/" + filename;
#else
    return "assets/" + filename;
#endif
}

MuscleMap MuscleMap::load(const std::string& path) { return from_json_text(read_file(path)); }

MuscleMap MuscleMap::from_json_text(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (!j.is_object() || j.empty())
        throw std::runtime_error("muscle map must be a non-empty JSON object");
    MuscleMap map;
    std::set<std::string> muscle_set;
    for (const auto& [exercise, muscles] : j.items()) {
        if (!muscles.is_array() || muscles.empty())
            throw std::runtime_error("exercise '" + exercise +
                                     "' must map to a non-empty muscle list");
        map.exercises_.push_back(exercise);
        for (const auto& m : muscles) muscle_set.insert(m.get<std::string>());
    }
    std::sort(map.exercises_.begin(), map.exercises_.end());
    map.muscles_.assign(muscle_set.begin(), muscle_set.end());  // set is already sorted
    for (size_t i = 0; i < map.exercises_.size(); ++i)
        map.exercise_index_[map.exercises_[i]] = int(i);
    for (size_t i = 0; i < map.muscles_.size(); ++i) map.muscle_index_[map.muscles_[i]] = int(i);

    map.exercise_muscles_.resize(map.exercises_.size());
    for (const auto& [exercise, muscles] : j.items()) {
        auto& ids = map.exercise_muscles_[size_t(map.exercise_index_.at(exercise))];
        std::set<int> seen;
        for (const auto& m : muscles) {
            const int id = map.muscle_index_.at(m.get<std::string>());
            if (!seen.insert(id).second)
                throw std::runtime_error("duplicate muscle '" + m.get<std::string>() +
                                         "' for exercise '" + exercise + "'");
        }
        ids.assign(seen.begin(), seen.end());
    }
    return map;
}

int MuscleMap::exercise_id(const std::string& name) const {
    auto it = exercise_index_.find(name);
    if (it == exercise_index_.end())
        throw std::invalid_argument("unknown exercise '" + name + "'");
    return it->second;
}

int MuscleMap::muscle_id(const std::string& name) const {
    auto it = muscle_index_.find(name);
    if (it == muscle_index_.end()) throw std::invalid_argument("unknown muscle '" + name + "'");
    return it->second;
}

const std::vector<int>& MuscleMap::muscles_for(int exercise_id) const {
    if (exercise_id < 0 || size_t(exercise_id) >= exercise_muscles_.size())
        throw std::invalid_argument("exercise id " + std::to_string(exercise_id) +
                                    " out of range");
    return exercise_muscles_[size_t(exercise_id)];
}

std::vector<float> MuscleMap::target_row(int exercise_id) const {
    std::vector<float> row(muscles_.size(), 0.0f);
    for (int m : muscles_for(exercise_id)) row[size_t(m)] = 1.0f;
    return row;
}

Tensor MuscleMap::targets(const std::vector<int>& exercise_ids) const {
    Tensor out = Tensor::zeros({int64_t(exercise_ids.size()), num_muscles()});
    for (size_t i = 0; i < exercise_ids.size(); ++i) {
        const auto row = target_row(exercise_ids[i]);
        for (size_t m = 0; m < row.size(); ++m)
            out[int64_t(i) * num_muscles() + int64_t(m)] = row[m];
    }
    return out;
}

Taxonomy Taxonomy::load(const std::string& path) { return from_json_text(read_file(path)); }

Taxonomy Taxonomy::from_json_text(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (!j.is_object() || j.empty())
        throw std::runtime_error("taxonomy must be a non-empty JSON object");
    Taxonomy tax;
    std::set<std::string> classes;
    for (const auto& [raw, canonical] : j.items()) {
        const std::string c = canonical.get<std::string>();
        if (c.empty()) throw std::runtime_error("empty canonical class for '" + raw + "'");
        tax.raw_to_canonical_[raw] = c;
        classes.insert(c);
    }
    tax.classes_.assign(classes.begin(), classes.end());
    for (size_t i = 0; i < tax.classes_.size(); ++i) tax.class_index_[tax.classes_[i]] = int(i);
    return tax;
}

const std::string& Taxonomy::canonical(const std::string& raw_name) const {
    auto it = raw_to_canonical_.find(raw_name);
    if (it == raw_to_canonical_.end())
        throw std::invalid_argument("folder '" + raw_name + "' is not in the taxonomy");
    return it->second;
}

bool Taxonomy::has_raw(const std::string& raw_name) const {
    return raw_to_canonical_.count(raw_name) > 0;
}

int Taxonomy::class_id(const std::string& canonical_name) const {
    auto it = class_index_.find(canonical_name);
    if (it == class_index_.end())
        throw std::invalid_argument("unknown class '" + canonical_name + "'");
    return it->second;
}

}  // namespace exnet::data
