#include "chronoqa/question.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "json.hpp"

namespace chronoqa {

std::vector<std::string> tokenize(const std::string& text) {
    if (text.empty()) throw ContractError("tokenize: empty text");
    std::vector<std::string> tokens;
    tokens.push_back(kClsToken);
    std::string current;
    auto flush = [&]() {
        if (!current.empty()) {
            tokens.push_back(current);
            current.clear();
        }
    };
    for (unsigned char ch : text) {
        if (std::isspace(ch)) {
            flush();
        } else if (std::isalnum(ch)) {
            current.push_back(static_cast<char>(std::tolower(ch)));
        } else {
            // punctuation: single-character token
            flush();
            tokens.push_back(std::string(1, static_cast<char>(ch)));
        }
    }
    flush();
    if (tokens.size() == 1) throw ContractError("tokenize: no tokens in text");
    return tokens;
}

TokenVocab::TokenVocab() {
    add(kClsToken);
    add(kUnkToken);
}

TokenVocab::TokenVocab(std::vector<std::string> tokens) {
    if (tokens.size() < 2 || tokens[0] != kClsToken || tokens[1] != kUnkToken) {
        throw ContractError("token vocab: reserved tokens missing");
    }
    for (const auto& t : tokens) add(t);
}

int TokenVocab::add(const std::string& token) {
    auto it = ids_.find(token);
    if (it != ids_.end()) return it->second;
    const int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    ids_[token] = id;
    return id;
}

int TokenVocab::encode_token(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnkId : it->second;
}

std::vector<int> TokenVocab::encode(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(encode_token(t));
    return ids;
}

TokenVocab TokenVocab::build(const std::vector<QuestionInstance>& questions) {
    TokenVocab vocab;
    for (const auto& q : questions) {
        for (const auto& t : q.tokens) vocab.add(t);
    }
    return vocab;
}

const char* category_name(Category c) {
    switch (c) {
        case Category::Explicit: return "explicit";
        case Category::Implicit: return "implicit";
        case Category::Temporal: return "temporal";
        case Category::Ordinal: return "ordinal";
    }
    return "explicit";
}

Category category_from_name(const std::string& name) {
    if (name == "explicit") return Category::Explicit;
    if (name == "implicit") return Category::Implicit;
    if (name == "temporal") return Category::Temporal;
    if (name == "ordinal") return Category::Ordinal;
    throw ParseError("question: unknown category '" + name + "'");
}

std::vector<EntityId> QuestionInstance::grounded_entities() const {
    std::vector<EntityId> out;
    for (const auto& span : entity_spans) {
        if (std::find(out.begin(), out.end(), span.entity) == out.end()) out.push_back(span.entity);
    }
    return out;
}

std::vector<TimeId> QuestionInstance::grounded_times() const {
    std::vector<TimeId> out;
    for (const auto& span : time_spans) {
        if (std::find(out.begin(), out.end(), span.time) == out.end()) out.push_back(span.time);
    }
    return out;
}

namespace {

using nlohmann::json;

void validate_spans(const QuestionInstance& q, const std::string& where) {
    const int n = static_cast<int>(q.tokens.size());
    std::vector<std::pair<int, int>> ranges;
    for (const auto& s : q.entity_spans) ranges.emplace_back(s.begin, s.end);
    for (const auto& s : q.time_spans) ranges.emplace_back(s.begin, s.end);
    for (const auto& [b, e] : ranges) {
        if (b < 0 || e > n || b >= e) {
            throw DataError(where + ": span [" + std::to_string(b) + "," + std::to_string(e) +
                            ") out of bounds for " + std::to_string(n) + " tokens");
        }
    }
    std::sort(ranges.begin(), ranges.end());
    for (size_t i = 1; i < ranges.size(); ++i) {
        if (ranges[i].first < ranges[i - 1].second) {
            throw DataError(where + ": overlapping spans");
        }
    }
}

void validate_answers(const QuestionInstance& q, const std::string& where) {
    if (q.answers.empty()) throw DataError(where + ": empty answer set");
    const bool all_time = std::all_of(q.answers.begin(), q.answers.end(), [](const Answer& a) {
        return a.kind == AnswerKind::Timestamp;
    });
    const bool all_entity = std::all_of(q.answers.begin(), q.answers.end(), [](const Answer& a) {
        return a.kind == AnswerKind::Entity;
    });
    if (!all_time && !all_entity) {
        throw DataError(where + ": mixed entity/timestamp answer set");
    }
    if (q.answer_is_timestamp != all_time) {
        throw DataError(where + ": answer_type flag disagrees with answer kinds");
    }
}

}  // namespace

std::vector<QuestionInstance> load_questions(const std::string& path, const TemporalKG& kg) {
    std::ifstream in(path);
    if (!in) throw IoError("questions: cannot open '" + path + "'");
    std::vector<QuestionInstance> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(where + ": invalid JSON: " + e.what());
        }
        try {
            QuestionInstance q;
            q.id = obj.at("id").get<std::string>();
            q.text = obj.at("text").get<std::string>();
            q.category = category_from_name(obj.at("category").get<std::string>());
            auto with_cls = tokenize(q.text);
            q.tokens.assign(with_cls.begin() + 1, with_cls.end());
            for (const auto& span : obj.at("entity_spans")) {
                EntitySpan s;
                s.begin = span.at(0).get<int>();
                s.end = span.at(1).get<int>();
                s.entity = kg.entities().require(span.at(2).get<std::string>());
                q.entity_spans.push_back(s);
            }
            for (const auto& span : obj.at("time_spans")) {
                TimeSpan s;
                s.begin = span.at(0).get<int>();
                s.end = span.at(1).get<int>();
                s.time = kg.time_id(std::stoi(span.at(2).get<std::string>()));
                q.time_spans.push_back(s);
            }
            for (const auto& ans : obj.at("answers")) {
                const std::string kind = ans.at("kind").get<std::string>();
                const std::string id = ans.at("id").get<std::string>();
                if (kind == "entity") {
                    q.answers.push_back({AnswerKind::Entity, kg.entities().require(id)});
                } else if (kind == "timestamp") {
                    q.answers.push_back({AnswerKind::Timestamp, kg.time_id(std::stoi(id))});
                } else {
                    throw DataError(where + ": unknown answer kind '" + kind + "'");
                }
            }
            q.answer_is_timestamp = obj.at("answer_type").get<std::string>() == "timestamp";
            validate_spans(q, where);
            validate_answers(q, where);
            out.push_back(std::move(q));
        } catch (const json::exception& e) {
            throw ParseError(where + ": " + e.what());
        }
    }
    return out;
}

void save_questions(const std::vector<QuestionInstance>& questions, const TemporalKG& kg,
                    const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("questions: cannot write '" + path + "'");
    for (const auto& q : questions) {
        json obj;
        obj["id"] = q.id;
        obj["text"] = q.text;
        obj["category"] = category_name(q.category);
        json espans = json::array();
        for (const auto& s : q.entity_spans) {
            espans.push_back({s.begin, s.end, kg.entities().name(s.entity)});
        }
        obj["entity_spans"] = espans;
        json tspans = json::array();
        for (const auto& s : q.time_spans) {
            tspans.push_back({s.begin, s.end, std::to_string(kg.year(s.time))});
        }
        obj["time_spans"] = tspans;
        json answers = json::array();
        for (const auto& a : q.answers) {
            json one;
            one["kind"] = a.kind == AnswerKind::Entity ? "entity" : "timestamp";
            one["id"] = a.kind == AnswerKind::Entity ? kg.entities().name(a.id)
                                                     : std::to_string(kg.year(a.id));
            answers.push_back(one);
        }
        obj["answers"] = answers;
        obj["answer_type"] = q.answer_is_timestamp ? "timestamp" : "entity";
        out << obj.dump() << '\n';
    }
    if (!out) throw IoError("questions: write failed for '" + path + "'");
}

}  // namespace chronoqa
