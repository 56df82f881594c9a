#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eca::eliza {

using Tokens = std::vector<std::string>;
using Clause = Tokens;

/// Thrown by parse_script. `line` is set for syntax errors in the document.
class ScriptError : public std::runtime_error {
public:
    explicit ScriptError(const std::string& what, std::optional<std::size_t> line = std::nullopt);
    std::optional<std::size_t> line() const noexcept { return line_; }

private:
    std::optional<std::size_t> line_;
};

class EngineError : public std::runtime_error {
public:
    enum class Code { engine_ended, goto_depth_exceeded };
    EngineError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const noexcept { return code_; }

private:
    Code code_;
};

struct PatternToken {
    enum class Kind { literal, wildcard, group };
    Kind kind = Kind::literal;
    std::string text;  // word for literal, group name for group, empty for wildcard

    friend bool operator==(const PatternToken&, const PatternToken&) = default;
};

using Pattern = std::vector<PatternToken>;

/// A reassembly template is either text with %n placeholders or a jump to
/// another keyword's rules.
struct Template {
    std::string text;
    std::optional<std::string> goto_key;

    bool is_goto() const noexcept { return goto_key.has_value(); }
};

struct DecompRule {
    Pattern pattern;
    std::vector<Template> reassembly;
};

struct KeywordEntry {
    std::string key;
    int rank = 0;
    std::vector<DecompRule> rules;
    std::optional<std::string> goto_key;  // substitution-only entries
    bool is_memory_trigger = false;
};

struct ElizaScript {
    std::string initial_greeting;
    std::string final_message;
    std::vector<std::string> quit_words;
    std::map<std::string, std::string> pre_substitutions;
    std::map<std::string, std::string> post_substitutions;
    std::map<std::string, std::vector<std::string>> synonym_groups;
    std::vector<KeywordEntry> keywords;
    std::vector<Template> none_responses;
    std::string memory_keyword;
    std::vector<DecompRule> memory_rules;

    const KeywordEntry* find_keyword(std::string_view key) const;
    std::optional<std::size_t> keyword_index(std::string_view key) const;
};

/// Parses and validates a JSON script document.
ElizaScript parse_script(std::string_view document);
ElizaScript load_script(const std::string& path);

/// Splits a pattern string such as "* i am @sad *" into tokens.
Pattern parse_pattern(std::string_view text);
std::string pattern_to_string(const Pattern& pattern);

/// Lowercases, splits into clauses on . , ! ? ; : and applies the
/// pre-substitution table token-wise.
std::vector<Clause> preprocess(std::string_view input, const ElizaScript& script);

/// Shortest-match-left-to-right decomposition. Returns one capture per
/// pattern token on success.
std::optional<std::vector<std::string>> match_decomposition(
    const Pattern& pattern, const Clause& clause,
    const std::map<std::string, std::vector<std::string>>& groups);

/// Fills %n placeholders from `captures` (post-substituted), normalizes
/// spacing and capitalizes the first letter.
std::string assemble(std::string_view templ, const std::vector<std::string>& captures,
                     const std::map<std::string, std::string>& post_subs);

struct Reply {
    std::string text;
    bool session_end = false;
    std::optional<std::string> matched_key;  // keyword-stack entry that produced the reply
    std::optional<std::string> rule_key;     // keyword owning the decomposition used (after gotos)
    std::optional<std::size_t> rule_index;
    bool from_memory = false;
};

/// Per-session ELIZA state. The script is shared and immutable; reassembly
/// cursors and the memory queue live here.
class Engine {
public:
    static constexpr std::size_t memory_capacity = 4;
    static constexpr int max_goto_depth = 8;

    Engine(std::shared_ptr<const ElizaScript> script, std::uint64_t seed = 0);

    Reply respond(std::string_view input);
    void reset();

    bool ended() const noexcept { return ended_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const ElizaScript& script() const noexcept { return *script_; }
    std::shared_ptr<const ElizaScript> shared_script() const noexcept { return script_; }
    const std::deque<std::string>& memory() const noexcept { return memory_; }
    const std::string& greeting() const noexcept { return script_->initial_greeting; }

    friend bool operator==(const Engine& a, const Engine& b);

private:
    struct Match {
        std::string text;
        std::string rule_key;
        std::size_t rule_index = 0;
    };

    std::optional<Match> try_keyword(std::size_t keyword, const Clause& clause, int depth);
    std::size_t next_cursor(std::vector<std::size_t>& cursors, std::size_t rule, std::size_t size);
    void remember(const Clause& clause);

    std::shared_ptr<const ElizaScript> script_;
    std::uint64_t seed_;
    std::vector<std::vector<std::size_t>> cursors_;  // [keyword][rule]
    std::vector<std::size_t> memory_cursors_;
    std::size_t none_cursor_ = 0;
    std::deque<std::string> memory_;
    bool ended_ = false;
};

}  // namespace eca::eliza
