#include "chronoqa/tkg.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace chronoqa {

int Vocab::get_or_add(const std::string& name) {
    auto it = ids_.find(name);
    if (it != ids_.end()) return it->second;
    const int id = static_cast<int>(names_.size());
    names_.push_back(name);
    ids_[name] = id;
    return id;
}

int Vocab::require(const std::string& name) const {
    auto it = ids_.find(name);
    if (it == ids_.end()) throw LookupError("vocab: unknown name '" + name + "'");
    return it->second;
}

std::optional<int> Vocab::find(const std::string& name) const {
    auto it = ids_.find(name);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocab::name(int id) const {
    if (id < 0 || id >= size()) {
        throw LookupError("vocab: id " + std::to_string(id) + " out of range");
    }
    return names_[static_cast<size_t>(id)];
}

void TemporalKG::add_fact(const std::string& subject, const std::string& relation,
                          const std::string& object, Year t_start, Year t_end) {
    if (finalized_) throw ContractError("tkg: add_fact after finalize");
    if (t_start > t_end) {
        throw ContractError("tkg: start " + std::to_string(t_start) + " after end " +
                            std::to_string(t_end));
    }
    Fact f;
    f.subject = entity_vocab_.get_or_add(subject);
    f.relation = relation_vocab_.get_or_add(relation);
    f.object = entity_vocab_.get_or_add(object);
    f.t_start = t_start;
    f.t_end = t_end;
    for (const Fact& existing : facts_) {
        if (existing == f) return;  // duplicate row
    }
    facts_.push_back(f);
}

EntityId TemporalKG::add_entity(const std::string& name) {
    if (finalized_) throw ContractError("tkg: add_entity after finalize");
    return entity_vocab_.get_or_add(name);
}

void TemporalKG::finalize() {
    if (finalized_) return;
    std::set<Year> distinct;
    for (const Fact& f : facts_) {
        distinct.insert(f.t_start);
        distinct.insert(f.t_end);
    }
    years_.assign(distinct.begin(), distinct.end());
    for (size_t i = 0; i < years_.size(); ++i) year_ids_[years_[i]] = static_cast<TimeId>(i);

    by_subject_.assign(static_cast<size_t>(entity_vocab_.size()), {});
    by_object_.assign(static_cast<size_t>(entity_vocab_.size()), {});
    for (size_t i = 0; i < facts_.size(); ++i) {
        by_subject_[static_cast<size_t>(facts_[i].subject)].push_back(static_cast<int>(i));
        by_object_[static_cast<size_t>(facts_[i].object)].push_back(static_cast<int>(i));
    }
    finalized_ = true;
}

TimeId TemporalKG::time_id(Year y) const {
    auto it = year_ids_.find(y);
    if (it == year_ids_.end()) {
        throw LookupError("tkg: year " + std::to_string(y) + " not in timestamp vocabulary");
    }
    return it->second;
}

Year TemporalKG::year(TimeId t) const {
    if (t < 0 || static_cast<size_t>(t) >= years_.size()) {
        throw LookupError("tkg: timestamp id " + std::to_string(t) + " out of range");
    }
    return years_[static_cast<size_t>(t)];
}

void TemporalKG::check_entity(EntityId entity) const {
    if (entity < 0 || entity >= entity_vocab_.size()) {
        throw LookupError("tkg: entity id " + std::to_string(entity) + " out of range");
    }
}

const std::vector<int>& TemporalKG::facts_by_subject(EntityId entity) const {
    check_entity(entity);
    return by_subject_[static_cast<size_t>(entity)];
}

const std::vector<int>& TemporalKG::facts_by_object(EntityId entity) const {
    check_entity(entity);
    return by_object_[static_cast<size_t>(entity)];
}

std::vector<int> TemporalKG::retrieve_fact_indices(EntityId entity) const {
    check_entity(entity);
    const auto& as_subject = by_subject_[static_cast<size_t>(entity)];
    const auto& as_object = by_object_[static_cast<size_t>(entity)];
    std::vector<int> merged;
    merged.reserve(as_subject.size() + as_object.size());
    // Both index lists are ascending; merge keeps file order and drops the
    // double entry when the entity is subject and object of the same fact.
    size_t i = 0, j = 0;
    while (i < as_subject.size() || j < as_object.size()) {
        if (j >= as_object.size()) {
            merged.push_back(as_subject[i++]);
        } else if (i >= as_subject.size()) {
            merged.push_back(as_object[j++]);
        } else if (as_subject[i] < as_object[j]) {
            merged.push_back(as_subject[i++]);
        } else if (as_object[j] < as_subject[i]) {
            merged.push_back(as_object[j++]);
        } else {
            merged.push_back(as_subject[i]);
            ++i;
            ++j;
        }
    }
    return merged;
}

std::vector<Fact> TemporalKG::retrieve_facts(EntityId entity) const {
    std::vector<Fact> out;
    for (int idx : retrieve_fact_indices(entity)) {
        out.push_back(facts_[static_cast<size_t>(idx)]);
    }
    return out;
}

TimeScope TemporalKG::entity_time_scope(EntityId entity) const {
    TimeScope scope;
    bool any = false;
    Year min_start = 0, max_end = 0;
    for (int idx : retrieve_fact_indices(entity)) {
        const Fact& f = facts_[static_cast<size_t>(idx)];
        if (!any) {
            min_start = f.t_start;
            max_end = f.t_end;
            any = true;
        } else {
            min_start = std::min(min_start, f.t_start);
            max_end = std::max(max_end, f.t_end);
        }
    }
    if (any) {
        scope.start = time_id(min_start);
        scope.end = time_id(max_end);
    }
    return scope;
}

std::vector<Quadruple> TemporalKG::training_quadruples() const {
    std::vector<Quadruple> out;
    auto push_unique = [&out](const Quadruple& q) {
        if (std::find(out.begin(), out.end(), q) == out.end()) out.push_back(q);
    };
    for (const Fact& f : facts_) {
        push_unique({f.subject, f.relation, f.object, time_id(f.t_start)});
        if (f.t_end != f.t_start) {
            push_unique({f.subject, f.relation, f.object, time_id(f.t_end)});
        }
    }
    return out;
}

namespace {

Year parse_year(const std::string& field, const std::string& path, size_t line_no, bool& absent) {
    absent = false;
    if (field == "-") {
        absent = true;
        return 0;
    }
    Year value = 0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": non-integer year '" + field +
                         "'");
    }
    return value;
}

}  // namespace

TemporalKG load_tkg(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("tkg: cannot open '" + path + "'");
    TemporalKG kg;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        size_t start = 0;
        while (true) {
            const size_t tab = line.find('\t', start);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        if (fields.size() != 5) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected 5 columns, got " +
                             std::to_string(fields.size()));
        }
        bool start_absent = false, end_absent = false;
        const Year y_start = parse_year(fields[3], path, line_no, start_absent);
        const Year y_end = parse_year(fields[4], path, line_no, end_absent);
        if (start_absent || end_absent) {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": interval requires both endpoints; half-open and unknown "
                             "intervals are rejected");
        }
        if (y_start > y_end) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": start " +
                             std::to_string(y_start) + " after end " + std::to_string(y_end));
        }
        kg.add_fact(fields[0], fields[1], fields[2], y_start, y_end);
    }
    kg.finalize();
    return kg;
}

void save_tkg(const TemporalKG& kg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("tkg: cannot write '" + path + "'");
    for (const Fact& f : kg.facts()) {
        out << kg.entities().name(f.subject) << '\t' << kg.relations().name(f.relation) << '\t'
            << kg.entities().name(f.object) << '\t' << f.t_start << '\t' << f.t_end << '\n';
    }
    if (!out) throw IoError("tkg: write failed for '" + path + "'");
}

}  // namespace chronoqa
