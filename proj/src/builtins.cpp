#include "toolforge/builtins.hpp"

#include "toolforge/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace toolforge {
namespace {

struct CalcError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Recursive-descent evaluator:
//   expr   := term (('+'|'-') term)*
//   term   := unary (('*'|'/') unary)*
//   unary  := ('+'|'-') unary | power
//   power  := atom ('^' unary)?
//   atom   := number | '(' expr ')'
class ExprParser {
public:
    explicit ExprParser(std::string_view src) : src_(src) {}

    double run() {
        const double v = expr();
        skip_ws();
        if (pos_ != src_.size()) throw CalcError("invalid expression: unexpected '" + std::string(1, src_[pos_]) + "'");
        return v;
    }

private:
    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    double expr() {
        double v = term();
        for (;;) {
            if (accept('+')) v += term();
            else if (accept('-')) v -= term();
            else return v;
        }
    }

    double term() {
        double v = unary();
        for (;;) {
            if (accept('*')) {
                v *= unary();
            } else if (accept('/')) {
                const double d = unary();
                if (d == 0.0) throw CalcError("division by zero");
                v /= d;
            } else {
                return v;
            }
        }
    }

    double unary() {
        if (accept('-')) return -unary();
        if (accept('+')) return unary();
        return power();
    }

    double power() {
        const double base = atom();
        if (accept('^')) return std::pow(base, unary());
        return base;
    }

    double atom() {
        if (accept('(')) {
            const double v = expr();
            if (!accept(')')) throw CalcError("invalid expression: missing ')'");
            return v;
        }
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) ++pos_;
        if (start == pos_) {
            if (pos_ == src_.size()) throw CalcError("invalid expression: unexpected end");
            throw CalcError("invalid expression: unexpected '" + std::string(1, src_[pos_]) + "'");
        }
        double v = 0;
        const auto* first = src_.data() + start;
        const auto* last = src_.data() + pos_;
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last) throw CalcError("invalid expression: bad number '" + std::string(first, last) + "'");
        return v;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

constexpr std::array<std::string_view, 24> kStopwords = {
    "the", "and", "what", "which", "who", "whom", "how", "was", "were", "are", "is", "of",
    "in", "on", "for", "does", "did", "with", "from", "that", "this", "its", "many", "much"};

bool is_stopword(std::string_view w) {
    return std::find(kStopwords.begin(), kStopwords.end(), w) != kStopwords.end();
}

}  // namespace

CalcResult evaluate_expression(std::string_view expr) {
    try {
        const double v = ExprParser(expr).run();
        if (!std::isfinite(v)) return {std::nullopt, "result is not finite"};
        return {v, {}};
    } catch (const CalcError& e) {
        return {std::nullopt, e.what()};
    }
}

std::string format_number(double value) {
    if (value == 0.0) return "0";
    if (std::nearbyint(value) == value && std::fabs(value) < 1e15) {
        return std::to_string(static_cast<long long>(value));
    }
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), ptr);
}

std::vector<std::string> keywords(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (cur.size() >= 2 && !is_stopword(cur) && std::find(out.begin(), out.end(), cur) == out.end()) {
            out.push_back(cur);
        }
        cur.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c)) cur.push_back(static_cast<char>(std::tolower(c)));
        else flush();
    }
    flush();
    return out;
}

Corpus Corpus::from_documents(std::vector<Document> docs) {
    Corpus c;
    c.docs_ = std::move(docs);
    c.lowered_.reserve(c.docs_.size());
    for (const auto& d : c.docs_) {
        // Space-padded keyword list so whole-word lookups are a substring search.
        std::string joined = " ";
        for (const auto& w : keywords(d.text)) joined += w + " ";
        c.lowered_.push_back(std::move(joined));
    }
    return c;
}

Corpus Corpus::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigParseError(path.string() + ": cannot open corpus file");
    std::vector<Document> docs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ConfigParseError(path.string() + ": line " + std::to_string(lineno) + ": expected id<TAB>text");
        }
        docs.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    return from_documents(std::move(docs));
}

std::vector<const Document*> Corpus::search(std::string_view query, std::size_t k) const {
    const auto terms = keywords(query);
    std::vector<std::pair<std::size_t, std::size_t>> scored;  // (score, index)
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        std::size_t score = 0;
        for (const auto& t : terms) {
            if (lowered_[i].find(" " + t + " ") != std::string::npos) ++score;
        }
        if (score > 0) scored.emplace_back(score, i);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<const Document*> hits;
    for (std::size_t i = 0; i < scored.size() && i < k; ++i) hits.push_back(&docs_[scored[i].second]);
    return hits;
}

std::string format_search_results(const std::vector<const Document*>& hits) {
    if (hits.empty()) return "no results";
    std::string out;
    for (const Document* d : hits) {
        if (!out.empty()) out += "\n";
        out += "[" + d->id + "] " + d->text;
    }
    return out;
}

}  // namespace toolforge
