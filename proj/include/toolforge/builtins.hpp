#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace toolforge {

/// Result of evaluating an arithmetic expression: a value or an error message.
struct CalcResult {
    std::optional<double> value;
    std::string error;
};

/// Evaluates `+ - * / ^`, parentheses, unary signs and decimal literals.
/// Division by zero yields the error "division by zero".
CalcResult evaluate_expression(std::string_view expr);

/// Integral values print without a fractional part ("14"); others use the
/// shortest round-trip representation.
std::string format_number(double value);

struct Document {
    std::string id;
    std::string text;
};

/// Read-only document collection loaded from an `id<TAB>text` file.
class Corpus {
public:
    /// Throws ConfigParseError when the file is missing or a line lacks a tab.
    static Corpus load(const std::filesystem::path& path);
    static Corpus from_documents(std::vector<Document> docs);

    /// Top `k` documents by the number of distinct query keywords they
    /// contain (case-insensitive). Ties keep file order; zero-score documents
    /// are never returned.
    std::vector<const Document*> search(std::string_view query, std::size_t k) const;

    const std::vector<Document>& documents() const { return docs_; }

private:
    std::vector<Document> docs_;
    std::vector<std::string> lowered_;
};

/// Lowercased alphanumeric keywords of `text`, in first-seen order.
std::vector<std::string> keywords(std::string_view text);

/// `[id] text` lines, or "no results".
std::string format_search_results(const std::vector<const Document*>& hits);

}  // namespace toolforge
