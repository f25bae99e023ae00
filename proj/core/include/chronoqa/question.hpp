#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "chronoqa/tkg.hpp"

namespace chronoqa {

struct QuestionInstance;

// Reserved token ids. [CLS] is the aggregation position prepended by
// tokenize(); [UNK] absorbs tokens unseen when the vocabulary was built.
inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kUnkToken = "[UNK]";
inline constexpr int kClsId = 0;
inline constexpr int kUnkId = 1;

// Lowercase split on whitespace; punctuation characters become single-char
// tokens. The [CLS] marker is prepended. Throws ContractError on empty text.
std::vector<std::string> tokenize(const std::string& text);

// Token string <-> id map with reserved [CLS]/[UNK] entries.
class TokenVocab {
public:
    TokenVocab();
    explicit TokenVocab(std::vector<std::string> tokens);  // restores a saved vocab

    int add(const std::string& token);           // get-or-add
    int encode_token(const std::string& token) const;  // [UNK] fallback
    std::vector<int> encode(const std::vector<std::string>& tokens) const;
    const std::vector<std::string>& tokens() const { return tokens_; }
    int size() const { return static_cast<int>(tokens_.size()); }

    // Collects every token of every question in one vocabulary.
    static TokenVocab build(const std::vector<QuestionInstance>& questions);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

enum class AnswerKind { Entity, Timestamp };

struct Answer {
    AnswerKind kind;
    int id;  // EntityId or TimeId depending on kind

    bool operator==(const Answer&) const = default;
};

enum class Category { Explicit, Implicit, Temporal, Ordinal };

const char* category_name(Category c);
Category category_from_name(const std::string& name);

// Half-open token index range [begin, end) over the question's own token
// sequence (no [CLS]), annotated with the grounded id.
struct EntitySpan {
    int begin;
    int end;
    EntityId entity;
};

struct TimeSpan {
    int begin;
    int end;
    TimeId time;
};

struct QuestionInstance {
    std::string id;
    std::string text;
    std::vector<std::string> tokens;  // tokenize(text) without the [CLS] marker
    std::vector<EntitySpan> entity_spans;
    std::vector<TimeSpan> time_spans;
    std::vector<Answer> answers;
    bool answer_is_timestamp = false;  // z_q
    Category category = Category::Explicit;

    // Distinct grounded entities in span order.
    std::vector<EntityId> grounded_entities() const;
    // Distinct grounded question timestamps in span order.
    std::vector<TimeId> grounded_times() const;
};

// JSON Lines IO. Each line holds one object:
//   {"id": ..., "text": ..., "category": ...,
//    "entity_spans": [[begin, end, "entity_name"], ...],
//    "time_spans":   [[begin, end, "year"], ...],
//    "answers":      [{"kind": "entity"|"timestamp", "id": "..."}, ...],
//    "answer_type":  "entity"|"timestamp"}
// Names are resolved against the KG vocabularies at load. Violations of the
// span/answer invariants raise ParseError or DataError naming the line.
std::vector<QuestionInstance> load_questions(const std::string& path, const TemporalKG& kg);
void save_questions(const std::vector<QuestionInstance>& questions, const TemporalKG& kg,
                    const std::string& path);

}  // namespace chronoqa
