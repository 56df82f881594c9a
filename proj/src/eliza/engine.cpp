#include "eca/eliza.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <sstream>

namespace eca::eliza {

namespace {

bool is_clause_break(char c) {
    return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':';
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream in{std::string(text)};
    std::string w;
    while (in >> w)
        out.push_back(std::move(w));
    return out;
}

std::string join(const Clause& tokens, std::size_t begin, std::size_t end) {
    std::string out;
    for (std::size_t i = begin; i < end; ++i) {
        if (i > begin)
            out += ' ';
        out += tokens[i];
    }
    return out;
}

void push_token(std::string& tok, Clause& clause) {
    auto first = tok.find_first_not_of('\'');
    auto last = tok.find_last_not_of('\'');
    if (first != std::string::npos)
        clause.push_back(tok.substr(first, last - first + 1));
    tok.clear();
}

std::string reflect(std::string_view capture, const std::map<std::string, std::string>& post) {
    std::string out;
    for (const auto& w : split_words(capture)) {
        std::string key = w;
        std::transform(key.begin(), key.end(), key.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        auto it = post.find(key);
        if (!out.empty())
            out += ' ';
        out += it == post.end() ? w : it->second;
    }
    return out;
}

std::string tidy(std::string_view raw) {
    std::string out;
    for (const auto& w : split_words(raw)) {
        bool punct_only = std::all_of(w.begin(), w.end(), [](char c) { return is_clause_break(c); });
        if (!out.empty() && !punct_only)
            out += ' ';
        out += w;
    }
    if (!out.empty())
        out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    return out;
}

}  // namespace

std::vector<Clause> preprocess(std::string_view input, const ElizaScript& script) {
    std::vector<Clause> clauses;
    Clause current;
    std::string tok;

    auto end_clause = [&] {
        push_token(tok, current);
        if (!current.empty())
            clauses.push_back(std::move(current));
        current.clear();
    };

    for (std::size_t i = 0; i < input.size(); ++i) {
        const auto c = static_cast<unsigned char>(input[i]);
        // U+2019 right single quotation mark, common from speech recognizers.
        if (c == 0xE2 && input.substr(i, 3) == "\xE2\x80\x99") {
            tok += '\'';
            i += 2;
        } else if (std::isalnum(c) && c < 0x80) {
            tok += static_cast<char>(std::tolower(c));
        } else if (c == '\'') {
            tok += '\'';
        } else if (std::isspace(c)) {
            push_token(tok, current);
        } else if (is_clause_break(static_cast<char>(c))) {
            end_clause();
        }
        // anything else is dropped
    }
    end_clause();

    if (script.pre_substitutions.empty())
        return clauses;
    for (auto& clause : clauses) {
        Clause substituted;
        for (const auto& t : clause) {
            auto it = script.pre_substitutions.find(t);
            if (it == script.pre_substitutions.end()) {
                substituted.push_back(t);
            } else {
                for (auto& w : split_words(it->second))
                    substituted.push_back(std::move(w));
            }
        }
        clause = std::move(substituted);
    }
    return clauses;
}

std::optional<std::vector<std::string>> match_decomposition(
    const Pattern& pattern, const Clause& clause,
    const std::map<std::string, std::vector<std::string>>& groups) {
    std::vector<std::string> captures(pattern.size());

    std::function<bool(std::size_t, std::size_t)> match = [&](std::size_t p, std::size_t c) -> bool {
        if (p == pattern.size())
            return c == clause.size();
        const auto& tok = pattern[p];
        switch (tok.kind) {
        case PatternToken::Kind::wildcard:
            for (std::size_t end = c; end <= clause.size(); ++end) {
                if (match(p + 1, end)) {
                    captures[p] = join(clause, c, end);
                    return true;
                }
            }
            return false;
        case PatternToken::Kind::literal:
            if (c < clause.size() && clause[c] == tok.text && match(p + 1, c + 1)) {
                captures[p] = clause[c];
                return true;
            }
            return false;
        case PatternToken::Kind::group: {
            if (c >= clause.size())
                return false;
            auto g = groups.find(tok.text);
            if (g == groups.end() ||
                std::find(g->second.begin(), g->second.end(), clause[c]) == g->second.end())
                return false;
            if (match(p + 1, c + 1)) {
                captures[p] = clause[c];
                return true;
            }
            return false;
        }
        }
        return false;
    };

    if (!match(0, 0))
        return std::nullopt;
    return captures;
}

std::string assemble(std::string_view templ, const std::vector<std::string>& captures,
                     const std::map<std::string, std::string>& post_subs) {
    std::string raw;
    for (std::size_t i = 0; i < templ.size(); ++i) {
        if (templ[i] == '%' && i + 1 < templ.size() &&
            std::isdigit(static_cast<unsigned char>(templ[i + 1]))) {
            std::size_t n = 0;
            std::size_t j = i + 1;
            while (j < templ.size() && std::isdigit(static_cast<unsigned char>(templ[j])))
                n = n * 10 + static_cast<std::size_t>(templ[j++] - '0');
            if (n == 0 || n > captures.size())
                throw std::out_of_range("placeholder %" + std::to_string(n) + " out of range");
            raw += reflect(captures[n - 1], post_subs);
            i = j - 1;
        } else {
            raw += templ[i];
        }
    }
    return tidy(raw);
}

Engine::Engine(std::shared_ptr<const ElizaScript> script, std::uint64_t seed)
    : script_(std::move(script)), seed_(seed) {
    if (!script_)
        throw std::invalid_argument("Engine needs a script");
    reset();
}

void Engine::reset() {
    cursors_.assign(script_->keywords.size(), {});
    for (std::size_t k = 0; k < script_->keywords.size(); ++k)
        cursors_[k].assign(script_->keywords[k].rules.size(), 0);
    memory_cursors_.assign(script_->memory_rules.size(), 0);
    none_cursor_ = 0;
    memory_.clear();
    ended_ = false;
}

bool operator==(const Engine& a, const Engine& b) {
    return a.script_ == b.script_ && a.seed_ == b.seed_ && a.cursors_ == b.cursors_ &&
           a.memory_cursors_ == b.memory_cursors_ && a.none_cursor_ == b.none_cursor_ &&
           a.memory_ == b.memory_ && a.ended_ == b.ended_;
}

std::size_t Engine::next_cursor(std::vector<std::size_t>& cursors, std::size_t rule, std::size_t size) {
    const std::size_t idx = cursors[rule];
    cursors[rule] = (idx + 1) % size;
    return idx;
}

std::optional<Engine::Match> Engine::try_keyword(std::size_t keyword, const Clause& clause, int depth) {
    if (depth > max_goto_depth)
        throw EngineError(EngineError::Code::goto_depth_exceeded,
                          "goto chain deeper than " + std::to_string(max_goto_depth) + " at keyword '" +
                              script_->keywords[keyword].key + "'");
    const auto& entry = script_->keywords[keyword];
    if (entry.goto_key)
        return try_keyword(*script_->keyword_index(*entry.goto_key), clause, depth + 1);

    for (std::size_t r = 0; r < entry.rules.size(); ++r) {
        const auto& rule = entry.rules[r];
        auto caps = match_decomposition(rule.pattern, clause, script_->synonym_groups);
        if (!caps)
            continue;
        const auto& tmpl = rule.reassembly[next_cursor(cursors_[keyword], r, rule.reassembly.size())];
        if (tmpl.is_goto())
            return try_keyword(*script_->keyword_index(*tmpl.goto_key), clause, depth + 1);
        std::string text = assemble(tmpl.text, *caps, script_->post_substitutions);
        if (text.empty())
            continue;
        return Match{std::move(text), entry.key, r};
    }
    return std::nullopt;
}

void Engine::remember(const Clause& clause) {
    const auto& rules = script_->memory_rules;
    for (std::size_t r = 0; r < rules.size(); ++r) {
        auto caps = match_decomposition(rules[r].pattern, clause, script_->synonym_groups);
        if (!caps)
            continue;
        const auto& tmpl = rules[r].reassembly[next_cursor(memory_cursors_, r, rules[r].reassembly.size())];
        std::string text = assemble(tmpl.text, *caps, script_->post_substitutions);
        if (text.empty())
            continue;
        memory_.push_back(std::move(text));
        while (memory_.size() > memory_capacity)
            memory_.pop_front();
        return;
    }
}

Reply Engine::respond(std::string_view input) {
    if (ended_)
        throw EngineError(EngineError::Code::engine_ended, "conversation has ended; reset the engine");

    const auto& s = *script_;
    const auto clauses = preprocess(input, s);

    for (const auto& clause : clauses) {
        for (const auto& tok : clause) {
            if (std::find(s.quit_words.begin(), s.quit_words.end(), tok) != s.quit_words.end()) {
                ended_ = true;
                return Reply{s.final_message, true, std::nullopt, std::nullopt, std::nullopt, false};
            }
        }
    }

    // Pick the clause holding the highest-ranked keyword; earlier clauses win ties.
    const Clause* chosen = nullptr;
    int best_rank = -1;
    for (const auto& clause : clauses) {
        for (const auto& tok : clause) {
            if (const auto* kw = s.find_keyword(tok); kw && kw->rank > best_rank) {
                best_rank = kw->rank;
                chosen = &clause;
            }
        }
    }

    Reply reply;
    if (chosen) {
        std::vector<std::size_t> stack;
        for (const auto& tok : *chosen) {
            auto idx = s.keyword_index(tok);
            if (idx && std::find(stack.begin(), stack.end(), *idx) == stack.end())
                stack.push_back(*idx);
        }
        std::stable_sort(stack.begin(), stack.end(), [&](std::size_t a, std::size_t b) {
            return s.keywords[a].rank > s.keywords[b].rank;
        });

        for (std::size_t k : stack) {
            if (auto m = try_keyword(k, *chosen, 0)) {
                reply.text = std::move(m->text);
                reply.matched_key = s.keywords[k].key;
                reply.rule_key = std::move(m->rule_key);
                reply.rule_index = m->rule_index;
                break;
            }
        }
    }

    if (reply.text.empty() && !memory_.empty()) {
        reply.text = std::move(memory_.front());
        memory_.pop_front();
        reply.from_memory = true;
    } else if (reply.text.empty()) {
        const auto& none = s.none_responses[none_cursor_];
        none_cursor_ = (none_cursor_ + 1) % s.none_responses.size();
        reply.text = assemble(none.text, {}, s.post_substitutions);
    }

    if (chosen && !s.memory_keyword.empty() &&
        std::find(chosen->begin(), chosen->end(), s.memory_keyword) != chosen->end())
        remember(*chosen);
    return reply;
}

}  // namespace eca::eliza
