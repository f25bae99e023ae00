#include "chronoqa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "chronoqa/rng.hpp"

namespace chronoqa {

namespace {

const std::vector<std::string>& first_names() {
    static const std::vector<std::string> names = {
        "amelia",  "bernard", "clara",     "douglas", "eleanor", "franklin",
        "georgia", "harvey",  "irene",     "jasper",  "katherine", "leonard",
        "martha",  "nathaniel", "opal",    "preston", "quincy",  "rosalind",
        "samuel",  "theodora", "ulysses",  "violet",  "warren",  "zelda"};
    return names;
}

const std::vector<std::string>& last_names() {
    static const std::vector<std::string> names = {
        "ashford",  "barlow",   "crane",    "donovan",  "ellsworth", "fairbank",
        "granger",  "holloway", "irving",   "jennings", "kendrick",  "lockwood",
        "mercer",   "norwood",  "osgood",   "prescott", "quimby",    "redfield",
        "sterling", "thornton", "underwood", "vance",   "whitfield", "yardley"};
    return names;
}

const std::vector<std::string>& position_pool() {
    static const std::vector<std::string> names = {
        "president",          "secretary_of_state",    "attorney_general",
        "chief_justice",      "treasurer",             "speaker_of_the_house",
        "postmaster_general", "secretary_of_war",      "secretary_of_the_navy",
        "ambassador",         "surveyor_general",      "collector_of_customs"};
    return names;
}

constexpr const char* kHoldRelation = "hold_position";

struct Tenure {
    EntityId person;
    EntityId position;
    Year start;
    Year end;
};

void validate_config(const WorldConfig& c) {
    if (c.n_people < 2) throw GenerationError("world: at least two people required");
    if (c.n_positions < 1) throw GenerationError("world: at least one position required");
    if (c.year_min >= c.year_max) throw GenerationError("world: empty year range");
    if (c.mean_tenure < 1.0) throw GenerationError("world: mean tenure below one year");
    if (c.n_positions > static_cast<int>(position_pool().size())) {
        throw GenerationError("world: more positions than the name pool provides (" +
                              std::to_string(position_pool().size()) + ")");
    }
    const size_t name_space = first_names().size() * last_names().size();
    if (c.n_people > static_cast<int>(name_space)) {
        throw GenerationError("world: more people than the name pool provides (" +
                              std::to_string(name_space) + ")");
    }
    if (c.questions_per_template < 0) {
        throw GenerationError("world: negative questions_per_template");
    }
}

std::vector<std::string> make_people(const WorldConfig& c, Rng& rng) {
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(first_names().size() * last_names().size());
    for (size_t i = 0; i < first_names().size(); ++i) {
        for (size_t j = 0; j < last_names().size(); ++j) {
            pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
    }
    rng.shuffle(pairs);
    std::vector<std::string> people;
    people.reserve(static_cast<size_t>(c.n_people));
    for (int i = 0; i < c.n_people; ++i) {
        people.push_back(first_names()[static_cast<size_t>(pairs[static_cast<size_t>(i)].first)] +
                         "_" +
                         last_names()[static_cast<size_t>(pairs[static_cast<size_t>(i)].second)]);
    }
    return people;
}

// n - 1 distinct interior cut years splitting [year_min, year_max] into n
// boundary-sharing intervals.
std::vector<Year> sample_boundaries(const WorldConfig& c, int n_tenures, Rng& rng) {
    const int interior = c.year_max - c.year_min - 1;
    if (n_tenures - 1 > interior) {
        throw GenerationError("world: cannot fit " + std::to_string(n_tenures) +
                              " tenures into " + std::to_string(c.year_max - c.year_min) +
                              " years");
    }
    std::set<Year> cuts;
    while (static_cast<int>(cuts.size()) < n_tenures - 1) {
        cuts.insert(c.year_min + 1 + static_cast<Year>(rng.uniform_int(static_cast<uint64_t>(interior))));
    }
    std::vector<Year> bounds;
    bounds.push_back(c.year_min);
    bounds.insert(bounds.end(), cuts.begin(), cuts.end());
    bounds.push_back(c.year_max);
    return bounds;
}

// Holder sequence without immediate repeats: shuffled rounds over all people.
std::vector<int> sample_holders(int n_people, int n_tenures, Rng& rng) {
    std::vector<int> holders;
    std::vector<int> round(static_cast<size_t>(n_people));
    for (int i = 0; i < n_people; ++i) round[static_cast<size_t>(i)] = i;
    while (static_cast<int>(holders.size()) < n_tenures) {
        rng.shuffle(round);
        if (!holders.empty() && round.front() == holders.back()) {
            std::swap(round.front(), round.back());
        }
        for (int p : round) {
            holders.push_back(p);
            if (static_cast<int>(holders.size()) == n_tenures) break;
        }
    }
    return holders;
}

}  // namespace

TemporalKG generate_world(const WorldConfig& config) {
    validate_config(config);
    Rng rng(config.seed);
    Rng name_rng = rng.fork(0xa11ce);
    const std::vector<std::string> people = make_people(config, name_rng);

    const int range = config.year_max - config.year_min;
    const int n_tenures =
        std::max(1, static_cast<int>(std::llround(static_cast<double>(range) / config.mean_tenure)));

    TemporalKG kg;
    Rng world_rng = rng.fork(0x77f2);
    for (int pos = 0; pos < config.n_positions; ++pos) {
        const std::string& position = position_pool()[static_cast<size_t>(pos)];
        const std::vector<Year> bounds = sample_boundaries(config, n_tenures, world_rng);
        const std::vector<int> holders = sample_holders(config.n_people, n_tenures, world_rng);
        for (int k = 0; k < n_tenures; ++k) {
            kg.add_fact(people[static_cast<size_t>(holders[static_cast<size_t>(k)])], kHoldRelation,
                        position, bounds[static_cast<size_t>(k)],
                        bounds[static_cast<size_t>(k) + 1]);
        }
    }
    kg.finalize();
    return kg;
}

const char* query_kind_name(StructuredQuery::Kind kind) {
    switch (kind) {
        case StructuredQuery::Kind::HolderAt: return "holder_at";
        case StructuredQuery::Kind::HolderWhile: return "holder_while";
        case StructuredQuery::Kind::Successor: return "successor";
        case StructuredQuery::Kind::TenureStart: return "tenure_start";
        case StructuredQuery::Kind::TenureEnd: return "tenure_end";
    }
    return "holder_at";
}

namespace {

void check_entity_arg(const TemporalKG& kg, EntityId id, const char* what) {
    if (id < 0 || id >= kg.entities().size()) {
        throw LookupError(std::string("oracle: ") + what + " id " + std::to_string(id) +
                          " not in KG");
    }
}

std::vector<Answer> to_entity_answers(std::set<EntityId> ids) {
    std::vector<Answer> out;
    for (EntityId id : ids) out.push_back({AnswerKind::Entity, id});
    return out;
}

std::vector<Answer> to_time_answers(const TemporalKG& kg, std::set<Year> years) {
    std::vector<Answer> out;
    for (Year y : years) out.push_back({AnswerKind::Timestamp, kg.time_id(y)});
    return out;
}

}  // namespace

OracleResult oracle_answer(const TemporalKG& kg, const StructuredQuery& query) {
    using Kind = StructuredQuery::Kind;
    check_entity_arg(kg, query.position, "position");
    if (query.kind != Kind::HolderAt) check_entity_arg(kg, query.person, "person");

    const std::vector<Fact>& facts = kg.facts();
    OracleResult result;
    switch (query.kind) {
        case Kind::HolderAt: {
            std::set<EntityId> holders;
            for (const Fact& f : facts) {
                if (f.object == query.position && f.t_start <= query.year &&
                    query.year <= f.t_end) {
                    holders.insert(f.subject);
                }
            }
            result.answers = to_entity_answers(std::move(holders));
            break;
        }
        case Kind::HolderWhile: {
            std::set<EntityId> holders;
            for (const Fact& other : facts) {
                if (other.subject != query.person) continue;
                for (const Fact& f : facts) {
                    if (f.object != query.position || f.subject == query.person) continue;
                    if (f.t_start <= other.t_end && other.t_start <= f.t_end) {
                        holders.insert(f.subject);
                    }
                }
            }
            result.answers = to_entity_answers(std::move(holders));
            break;
        }
        case Kind::Successor: {
            std::set<EntityId> successors;
            for (const Fact& own : facts) {
                if (own.subject != query.person || own.object != query.position) continue;
                bool exact = false;
                for (const Fact& f : facts) {
                    if (f.object == query.position && f.subject != query.person &&
                        f.t_start == own.t_end) {
                        successors.insert(f.subject);
                        exact = true;
                    }
                }
                if (exact) continue;
                Year best = 0;
                bool found = false;
                for (const Fact& f : facts) {
                    if (f.object != query.position || f.subject == query.person) continue;
                    if (f.t_start > own.t_end && (!found || f.t_start < best)) {
                        best = f.t_start;
                        found = true;
                    }
                }
                if (found) {
                    for (const Fact& f : facts) {
                        if (f.object == query.position && f.subject != query.person &&
                            f.t_start == best) {
                            successors.insert(f.subject);
                        }
                    }
                }
            }
            result.answers = to_entity_answers(std::move(successors));
            break;
        }
        case Kind::TenureStart:
        case Kind::TenureEnd: {
            std::set<Year> years;
            for (const Fact& f : facts) {
                if (f.subject == query.person && f.object == query.position) {
                    years.insert(query.kind == Kind::TenureStart ? f.t_start : f.t_end);
                }
            }
            result.answers = to_time_answers(kg, std::move(years));
            result.answer_is_timestamp = true;
            break;
        }
    }
    return result;
}

namespace {

std::vector<std::string> name_tokens(const std::string& snake_name) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : snake_name) {
        if (ch == '_') {
            if (!current.empty()) tokens.push_back(current);
            current.clear();
        } else {
            current.push_back(ch);
        }
    }
    if (!current.empty()) tokens.push_back(current);
    return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string text;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) text.push_back(' ');
        text += tokens[i];
    }
    return text;
}

uint64_t fnv1a(const std::string& s) {
    uint64_t hash = 14695981039346656037ULL;
    for (unsigned char ch : s) {
        hash ^= ch;
        hash *= 1099511628211ULL;
    }
    return hash;
}

// Timeline view used by the generator's answer route: per-position tenures in
// chronological order. Successors are sequence neighbors here, while
// oracle_answer() re-derives them from raw interval scans.
struct Timelines {
    std::map<EntityId, std::vector<Tenure>> by_position;
    std::map<EntityId, std::vector<Tenure>> by_person;

    explicit Timelines(const TemporalKG& kg) {
        for (const Fact& f : kg.facts()) {
            Tenure t{f.subject, f.object, f.t_start, f.t_end};
            by_position[f.object].push_back(t);
            by_person[f.subject].push_back(t);
        }
        for (auto& [pos, tenures] : by_position) {
            std::sort(tenures.begin(), tenures.end(),
                      [](const Tenure& a, const Tenure& b) { return a.start < b.start; });
        }
    }
};

struct TemplateSpec {
    StructuredQuery::Kind kind;
    Category category;
};

const std::vector<TemplateSpec>& template_specs() {
    static const std::vector<TemplateSpec> specs = {
        {StructuredQuery::Kind::HolderAt, Category::Explicit},
        {StructuredQuery::Kind::HolderWhile, Category::Implicit},
        {StructuredQuery::Kind::Successor, Category::Ordinal},
        {StructuredQuery::Kind::TenureStart, Category::Temporal},
        {StructuredQuery::Kind::TenureEnd, Category::Temporal},
    };
    return specs;
}

// Gold answers from the timeline route.
std::vector<Answer> timeline_answers(const TemporalKG& kg, const Timelines& tl,
                                     const StructuredQuery& q) {
    using Kind = StructuredQuery::Kind;
    switch (q.kind) {
        case Kind::HolderAt: {
            std::set<EntityId> out;
            auto it = tl.by_position.find(q.position);
            if (it != tl.by_position.end()) {
                for (const Tenure& t : it->second) {
                    if (t.start <= q.year && q.year <= t.end) out.insert(t.person);
                }
            }
            return to_entity_answers(std::move(out));
        }
        case Kind::HolderWhile: {
            std::set<EntityId> out;
            auto pos_it = tl.by_position.find(q.position);
            auto per_it = tl.by_person.find(q.person);
            if (pos_it != tl.by_position.end() && per_it != tl.by_person.end()) {
                for (const Tenure& own : per_it->second) {
                    for (const Tenure& t : pos_it->second) {
                        if (t.person == q.person) continue;
                        if (t.start <= own.end && own.start <= t.end) out.insert(t.person);
                    }
                }
            }
            return to_entity_answers(std::move(out));
        }
        case Kind::Successor: {
            std::set<EntityId> out;
            auto pos_it = tl.by_position.find(q.position);
            if (pos_it != tl.by_position.end()) {
                const auto& seq = pos_it->second;
                for (size_t k = 0; k < seq.size(); ++k) {
                    if (seq[k].person == q.person && k + 1 < seq.size()) {
                        out.insert(seq[k + 1].person);
                    }
                }
            }
            return to_entity_answers(std::move(out));
        }
        case Kind::TenureStart:
        case Kind::TenureEnd: {
            std::set<Year> years;
            auto per_it = tl.by_person.find(q.person);
            if (per_it != tl.by_person.end()) {
                for (const Tenure& t : per_it->second) {
                    if (t.position == q.position) {
                        years.insert(q.kind == Kind::TenureStart ? t.start : t.end);
                    }
                }
            }
            std::vector<Answer> out;
            for (Year y : years) out.push_back({AnswerKind::Timestamp, kg.time_id(y)});
            return out;
        }
    }
    return {};
}

// Fixed surface forms. Token assembly and span bookkeeping stay in one place
// so the rendered text always re-tokenizes to the annotated spans.
struct Rendered {
    std::vector<std::string> tokens;
    std::vector<EntitySpan> entity_spans;
    std::vector<TimeSpan> time_spans;
};

Rendered render(const TemporalKG& kg, const StructuredQuery& q) {
    using Kind = StructuredQuery::Kind;
    Rendered r;
    auto push_words = [&r](std::initializer_list<const char*> words) {
        for (const char* w : words) r.tokens.emplace_back(w);
    };
    auto push_entity = [&r, &kg](EntityId id) {
        const auto toks = name_tokens(kg.entities().name(id));
        const int begin = static_cast<int>(r.tokens.size());
        r.tokens.insert(r.tokens.end(), toks.begin(), toks.end());
        r.entity_spans.push_back({begin, begin + static_cast<int>(toks.size()), id});
    };
    auto push_year = [&r, &kg](Year y) {
        const int begin = static_cast<int>(r.tokens.size());
        r.tokens.push_back(std::to_string(y));
        r.time_spans.push_back({begin, begin + 1, kg.time_id(y)});
    };
    switch (q.kind) {
        case Kind::HolderAt:
            push_words({"who", "was", "the"});
            push_entity(q.position);
            push_words({"in"});
            push_year(q.year);
            break;
        case Kind::HolderWhile:
            push_words({"while"});
            push_entity(q.person);
            push_words({"was", "in", "office", "who", "served", "as", "the"});
            push_entity(q.position);
            break;
        case Kind::Successor:
            push_words({"who", "became", "the"});
            push_entity(q.position);
            push_words({"right", "after"});
            push_entity(q.person);
            break;
        case Kind::TenureStart:
            push_words({"in", "which", "year", "did"});
            push_entity(q.person);
            push_words({"become", "the"});
            push_entity(q.position);
            break;
        case Kind::TenureEnd:
            push_words({"in", "which", "year", "did"});
            push_entity(q.person);
            push_words({"stop", "serving", "as", "the"});
            push_entity(q.position);
            break;
    }
    return r;
}

std::string canonical_args(const TemporalKG& kg, const StructuredQuery& q) {
    std::string key = kg.entities().name(q.position);
    if (q.kind == StructuredQuery::Kind::HolderAt) {
        key += ":" + std::to_string(q.year);
    } else {
        key += ":" + kg.entities().name(q.person);
    }
    return key;
}

}  // namespace

std::vector<GeneratedQuestion> generate_questions(const TemporalKG& kg,
                                                  const WorldConfig& config) {
    validate_config(config);
    const Timelines tl(kg);
    Rng rng = Rng(config.seed).fork(0x93e3);

    // Candidate argument collections shared by the tuple enumerations.
    std::vector<EntityId> positions;
    std::vector<EntityId> people;
    for (const auto& [pos, tenures] : tl.by_position) positions.push_back(pos);
    for (const auto& [person, tenures] : tl.by_person) people.push_back(person);

    std::vector<GeneratedQuestion> out;
    for (const TemplateSpec& spec : template_specs()) {
        using Kind = StructuredQuery::Kind;
        std::vector<StructuredQuery> tuples;
        auto consider = [&](StructuredQuery q) {
            if (!timeline_answers(kg, tl, q).empty()) tuples.push_back(q);
        };
        switch (spec.kind) {
            case Kind::HolderAt:
                // Explicit questions name a year from the position's own fact
                // scopes, mirroring how temporal QA benchmarks mine explicit
                // questions from the facts' timestamps.
                for (EntityId pos : positions) {
                    std::set<Year> scope_years;
                    for (const Tenure& t : tl.by_position.at(pos)) {
                        scope_years.insert(t.start);
                        scope_years.insert(t.end);
                    }
                    for (Year y : scope_years) {
                        StructuredQuery q;
                        q.kind = spec.kind;
                        q.position = pos;
                        q.year = y;
                        consider(q);
                    }
                }
                break;
            case Kind::HolderWhile:
            case Kind::Successor:
            case Kind::TenureStart:
            case Kind::TenureEnd:
                for (EntityId pos : positions) {
                    for (EntityId person : people) {
                        StructuredQuery q;
                        q.kind = spec.kind;
                        q.position = pos;
                        q.person = person;
                        consider(q);
                    }
                }
                break;
        }
        if (tuples.empty()) {
            throw GenerationError(std::string("questions: template ") +
                                  query_kind_name(spec.kind) + " has no valid argument tuples");
        }
        rng.shuffle(tuples);
        for (int i = 0; i < config.questions_per_template; ++i) {
            const StructuredQuery& q = tuples[static_cast<size_t>(i) % tuples.size()];
            Rendered r = render(kg, q);
            GeneratedQuestion gen;
            gen.query = q;
            gen.tuple_key = std::string(query_kind_name(q.kind)) + ":" + canonical_args(kg, q);
            gen.instance.id =
                gen.tuple_key + "#" + std::to_string(static_cast<size_t>(i) / tuples.size());
            gen.instance.text = join_tokens(r.tokens);
            gen.instance.tokens = std::move(r.tokens);
            gen.instance.entity_spans = std::move(r.entity_spans);
            gen.instance.time_spans = std::move(r.time_spans);
            gen.instance.answers = timeline_answers(kg, tl, q);
            gen.instance.answer_is_timestamp =
                q.kind == Kind::TenureStart || q.kind == Kind::TenureEnd;
            gen.instance.category = spec.category;
            out.push_back(std::move(gen));
        }
    }
    return out;
}

SynthDataset split_dataset(const std::vector<GeneratedQuestion>& questions) {
    SynthDataset dataset;
    for (const GeneratedQuestion& g : questions) {
        const uint64_t bucket = fnv1a(g.tuple_key) % 100;
        if (bucket < 70) {
            dataset.train.push_back(g.instance);
        } else if (bucket < 80) {
            dataset.dev.push_back(g.instance);
        } else {
            dataset.test.push_back(g.instance);
        }
    }
    return dataset;
}

}  // namespace chronoqa
