#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "chronoqa/errors.hpp"

namespace chronoqa {

using EntityId = int;
using RelationId = int;
using TimeId = int;
using Year = int;

// One temporal fact: subject/relation/object with an inclusive year interval.
// Point facts have t_start == t_end.
struct Fact {
    EntityId subject = 0;
    RelationId relation = 0;
    EntityId object = 0;
    Year t_start = 0;
    Year t_end = 0;

    bool operator==(const Fact&) const = default;
};

// Bidirectional name <-> id map; ids are assigned in first-appearance order.
class Vocab {
public:
    int get_or_add(const std::string& name);
    // Throws LookupError for unknown names.
    int require(const std::string& name) const;
    std::optional<int> find(const std::string& name) const;
    const std::string& name(int id) const;
    int size() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> ids_;
};

// Temporal extent of one entity: min start / max end over its facts.
// Both components are absent exactly when the entity has no facts.
struct TimeScope {
    std::optional<TimeId> start;
    std::optional<TimeId> end;
};

struct Quadruple {
    EntityId subject;
    RelationId relation;
    EntityId object;
    TimeId time;

    bool operator==(const Quadruple&) const = default;
};

// Immutable after load; safe for concurrent reads.
class TemporalKG {
public:
    const std::vector<Fact>& facts() const { return facts_; }
    const Vocab& entities() const { return entity_vocab_; }
    const Vocab& relations() const { return relation_vocab_; }

    // Sorted distinct years; TimeId is an index into this list.
    const std::vector<Year>& years() const { return years_; }
    int num_timestamps() const { return static_cast<int>(years_.size()); }
    TimeId time_id(Year y) const;  // throws LookupError for out-of-vocab years
    Year year(TimeId t) const;

    // All facts where `entity` appears as subject or object, in file order,
    // without duplicates.
    std::vector<Fact> retrieve_facts(EntityId entity) const;
    std::vector<int> retrieve_fact_indices(EntityId entity) const;

    // Min start / max end over the retrieved facts, as time ids.
    TimeScope entity_time_scope(EntityId entity) const;

    // Endpoint expansion: each interval fact contributes quadruples at
    // t_start and t_end (one when equal), deduplicated in first-seen order.
    std::vector<Quadruple> training_quadruples() const;

    const std::vector<int>& facts_by_subject(EntityId entity) const;
    const std::vector<int>& facts_by_object(EntityId entity) const;

    // Construction: add_fact dedups exact duplicate rows; finalize() builds
    // the year vocabulary and the positional indices. add_entity registers an
    // entity that participates in no fact (mentioned only by questions).
    void add_fact(const std::string& subject, const std::string& relation,
                  const std::string& object, Year t_start, Year t_end);
    EntityId add_entity(const std::string& name);
    void finalize();

private:
    void check_entity(EntityId entity) const;

    std::vector<Fact> facts_;
    Vocab entity_vocab_;
    Vocab relation_vocab_;
    std::vector<Year> years_;
    std::unordered_map<Year, TimeId> year_ids_;
    std::vector<std::vector<int>> by_subject_;
    std::vector<std::vector<int>> by_object_;
    bool finalized_ = false;
};

// Loads a UTF-8 TSV with 5 columns (subject, relation, object, start, end).
// "#"-prefixed lines and blank lines are ignored. Years are signed decimal
// integers; "-" marks an absent endpoint, and any row with an absent endpoint
// is rejected (intervals may not be half-open). Exact duplicate rows collapse
// into one fact. Throws ParseError naming the offending line.
TemporalKG load_tkg(const std::string& path);

// Writes the facts back in stored order; load_tkg(save_tkg(kg)) reproduces an
// identical store.
void save_tkg(const TemporalKG& kg, const std::string& path);

}  // namespace chronoqa
