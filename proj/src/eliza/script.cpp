#include "eca/eliza.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace eca::eliza {

using nlohmann::json;

ScriptError::ScriptError(const std::string& what, std::optional<std::size_t> line)
    : std::runtime_error(line ? "line " + std::to_string(*line) + ": " + what : what), line_(line) {}

const KeywordEntry* ElizaScript::find_keyword(std::string_view key) const {
    auto idx = keyword_index(key);
    return idx ? &keywords[*idx] : nullptr;
}

std::optional<std::size_t> ElizaScript::keyword_index(std::string_view key) const {
    for (std::size_t i = 0; i < keywords.size(); ++i) {
        if (keywords[i].key == key)
            return i;
    }
    return std::nullopt;
}

namespace {

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool is_lower_token(std::string_view s) {
    if (s.empty())
        return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::islower(c) || std::isdigit(c) || c == '\'';
    });
}

std::size_t line_of(std::string_view doc, std::size_t byte) {
    byte = std::min(byte, doc.size());
    return 1 + static_cast<std::size_t>(std::count(doc.begin(), doc.begin() + byte, '\n'));
}

// Highest %n placeholder in a template, 0 if none.
std::size_t max_placeholder(std::string_view text) {
    std::size_t best = 0;
    for (std::size_t i = 0; i + 1 < text.size(); ++i) {
        if (text[i] != '%' || !std::isdigit(static_cast<unsigned char>(text[i + 1])))
            continue;
        std::size_t n = 0;
        std::size_t j = i + 1;
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j])))
            n = n * 10 + static_cast<std::size_t>(text[j++] - '0');
        best = std::max(best, n == 0 ? std::size_t{1} << 30 : n);
    }
    return best;
}

Template parse_template(const std::string& raw) {
    constexpr std::string_view prefix = "goto ";
    if (raw.rfind(prefix, 0) == 0) {
        std::string target = raw.substr(prefix.size());
        target.erase(0, target.find_first_not_of(' '));
        target.erase(target.find_last_not_of(' ') + 1);
        return Template{raw, to_lower(target)};
    }
    return Template{raw, std::nullopt};
}

const json& require(const json& obj, const char* field, const std::string& where) {
    auto it = obj.find(field);
    if (it == obj.end())
        throw ScriptError(where + ": missing field '" + field + "'");
    return *it;
}

std::string get_string(const json& v, const std::string& where) {
    if (!v.is_string())
        throw ScriptError(where + ": expected a string");
    return v.get<std::string>();
}

std::vector<std::string> get_strings(const json& v, const std::string& where) {
    if (!v.is_array())
        throw ScriptError(where + ": expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v)
        out.push_back(get_string(e, where));
    return out;
}

std::map<std::string, std::string> get_substitutions(const json& v, const std::string& where) {
    if (!v.is_object())
        throw ScriptError(where + ": expected an object");
    std::map<std::string, std::string> out;
    for (const auto& [k, val] : v.items()) {
        std::string key = to_lower(k);
        if (!is_lower_token(key))
            throw ScriptError(where + ": invalid token '" + k + "'");
        out[key] = get_string(val, where + "." + k);
    }
    return out;
}

DecompRule parse_rule(const json& v, const std::string& where) {
    if (!v.is_object())
        throw ScriptError(where + ": expected a rule object");
    DecompRule rule;
    rule.pattern = parse_pattern(get_string(require(v, "pattern", where), where + ".pattern"));
    for (const auto& t : get_strings(require(v, "reassembly", where), where + ".reassembly"))
        rule.reassembly.push_back(parse_template(t));
    return rule;
}

void check_rule(const DecompRule& rule, const ElizaScript& script, const std::string& where,
                bool allow_goto) {
    if (rule.pattern.empty())
        throw ScriptError(where + ": empty pattern");
    if (rule.reassembly.empty())
        throw ScriptError(where + ": rule needs at least one reassembly template");
    for (const auto& tok : rule.pattern) {
        if (tok.kind == PatternToken::Kind::group && !script.synonym_groups.contains(tok.text))
            throw ScriptError(where + ": unknown synonym group '@" + tok.text + "'");
    }
    for (const auto& t : rule.reassembly) {
        if (t.is_goto()) {
            if (!allow_goto)
                throw ScriptError(where + ": goto is not allowed here");
            if (!script.find_keyword(*t.goto_key))
                throw ScriptError(where + ": dangling goto '" + *t.goto_key + "'");
            continue;
        }
        if (t.text.find_first_not_of(' ') == std::string::npos)
            throw ScriptError(where + ": empty reassembly template");
        if (max_placeholder(t.text) > rule.pattern.size())
            throw ScriptError(where + ": placeholder out of range in '" + t.text + "'");
    }
}

void validate(const ElizaScript& s) {
    std::set<std::string> seen;
    for (const auto& kw : s.keywords) {
        const std::string where = "keyword '" + kw.key + "'";
        if (!is_lower_token(kw.key))
            throw ScriptError("keyword names must be non-empty lowercase tokens: '" + kw.key + "'");
        if (!seen.insert(kw.key).second)
            throw ScriptError("duplicate keyword '" + kw.key + "'");
        if (kw.rank < 0)
            throw ScriptError(where + ": rank must be >= 0");
        if (kw.goto_key) {
            if (!kw.rules.empty())
                throw ScriptError(where + ": has both rules and goto");
            if (!s.find_keyword(*kw.goto_key))
                throw ScriptError(where + ": dangling goto '" + *kw.goto_key + "'");
        } else if (kw.rules.empty()) {
            throw ScriptError(where + ": needs rules or a goto");
        }
        for (std::size_t r = 0; r < kw.rules.size(); ++r)
            check_rule(kw.rules[r], s, where + " rule " + std::to_string(r + 1), true);
    }
    if (s.keywords.empty())
        throw ScriptError("script has no keywords");

    if (s.none_responses.empty())
        throw ScriptError("none_responses must not be empty");
    for (const auto& t : s.none_responses) {
        if (t.is_goto() || max_placeholder(t.text) > 0 ||
            t.text.find_first_not_of(' ') == std::string::npos)
            throw ScriptError("none_responses must be plain non-empty text: '" + t.text + "'");
    }

    for (std::size_t r = 0; r < s.memory_rules.size(); ++r)
        check_rule(s.memory_rules[r], s, "memory rule " + std::to_string(r + 1), false);
    if (!s.memory_keyword.empty() && s.memory_rules.empty())
        throw ScriptError("memory_keyword set without memory_rules");

    for (const auto& [name, members] : s.synonym_groups) {
        if (members.empty())
            throw ScriptError("synonym group '" + name + "' is empty");
        for (const auto& m : members) {
            if (!is_lower_token(m))
                throw ScriptError("synonym group '" + name + "': invalid token '" + m + "'");
        }
    }
    for (const auto& q : s.quit_words) {
        if (!is_lower_token(q))
            throw ScriptError("invalid quit word '" + q + "'");
    }
}

}  // namespace

Pattern parse_pattern(std::string_view text) {
    Pattern out;
    std::istringstream in{std::string(text)};
    std::string tok;
    while (in >> tok) {
        if (tok == "*") {
            out.push_back({PatternToken::Kind::wildcard, {}});
        } else if (tok.size() > 1 && tok.front() == '@') {
            out.push_back({PatternToken::Kind::group, to_lower(tok.substr(1))});
        } else {
            out.push_back({PatternToken::Kind::literal, to_lower(tok)});
        }
    }
    return out;
}

std::string pattern_to_string(const Pattern& pattern) {
    std::string out;
    for (const auto& tok : pattern) {
        if (!out.empty())
            out += ' ';
        switch (tok.kind) {
        case PatternToken::Kind::wildcard: out += '*'; break;
        case PatternToken::Kind::group: out += '@' + tok.text; break;
        case PatternToken::Kind::literal: out += tok.text; break;
        }
    }
    return out;
}

ElizaScript parse_script(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ScriptError(std::string("syntax error: ") + e.what(), line_of(document, e.byte));
    }
    if (!doc.is_object())
        throw ScriptError("script must be a JSON object", 1);

    ElizaScript s;
    if (auto it = doc.find("initial_greeting"); it != doc.end())
        s.initial_greeting = get_string(*it, "initial_greeting");
    if (auto it = doc.find("final_message"); it != doc.end())
        s.final_message = get_string(*it, "final_message");
    if (auto it = doc.find("quit_words"); it != doc.end()) {
        for (auto& q : get_strings(*it, "quit_words"))
            s.quit_words.push_back(to_lower(q));
    }
    if (auto it = doc.find("pre_substitutions"); it != doc.end())
        s.pre_substitutions = get_substitutions(*it, "pre_substitutions");
    if (auto it = doc.find("post_substitutions"); it != doc.end())
        s.post_substitutions = get_substitutions(*it, "post_substitutions");
    if (auto it = doc.find("synonym_groups"); it != doc.end()) {
        if (!it->is_object())
            throw ScriptError("synonym_groups: expected an object");
        for (const auto& [name, members] : it->items()) {
            auto& dst = s.synonym_groups[to_lower(name)];
            for (auto& m : get_strings(members, "synonym_groups." + name))
                dst.push_back(to_lower(m));
        }
    }

    const json& keywords = require(doc, "keywords", "script");
    if (!keywords.is_array())
        throw ScriptError("keywords: expected an array");
    for (std::size_t i = 0; i < keywords.size(); ++i) {
        const json& k = keywords[i];
        const std::string where = "keywords[" + std::to_string(i) + "]";
        if (!k.is_object())
            throw ScriptError(where + ": expected an object");
        KeywordEntry entry;
        entry.key = get_string(require(k, "key", where), where + ".key");
        if (auto it = k.find("rank"); it != k.end()) {
            if (!it->is_number_integer())
                throw ScriptError(where + ".rank: expected an integer");
            entry.rank = it->get<int>();
        }
        if (auto it = k.find("goto"); it != k.end())
            entry.goto_key = to_lower(get_string(*it, where + ".goto"));
        if (auto it = k.find("rules"); it != k.end()) {
            if (!it->is_array())
                throw ScriptError(where + ".rules: expected an array");
            for (std::size_t r = 0; r < it->size(); ++r)
                entry.rules.push_back(parse_rule((*it)[r], where + ".rules[" + std::to_string(r) + "]"));
        }
        s.keywords.push_back(std::move(entry));
    }

    if (auto it = doc.find("none_responses"); it != doc.end()) {
        for (const auto& t : get_strings(*it, "none_responses"))
            s.none_responses.push_back(parse_template(t));
    }
    if (auto it = doc.find("memory_keyword"); it != doc.end())
        s.memory_keyword = to_lower(get_string(*it, "memory_keyword"));
    if (auto it = doc.find("memory_rules"); it != doc.end()) {
        if (!it->is_array())
            throw ScriptError("memory_rules: expected an array");
        for (std::size_t r = 0; r < it->size(); ++r)
            s.memory_rules.push_back(parse_rule((*it)[r], "memory_rules[" + std::to_string(r) + "]"));
    }

    for (auto& kw : s.keywords)
        kw.is_memory_trigger = !s.memory_keyword.empty() && kw.key == s.memory_keyword;

    validate(s);
    return s;
}

ElizaScript load_script(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ScriptError("cannot open script file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_script(buf.str());
    } catch (const ScriptError& e) {
        throw ScriptError(path + ": " + e.what());
    }
}

}  // namespace eca::eliza
