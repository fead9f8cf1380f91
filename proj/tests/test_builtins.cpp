#include "doctest.h"
#include "test_support.hpp"

#include "toolforge/builtins.hpp"
#include "toolforge/errors.hpp"

using namespace toolforge;
using namespace toolforge::testing;

TEST_CASE("calculator arithmetic") {
    auto eval = [](std::string_view e) {
        const auto r = evaluate_expression(e);
        REQUIRE_MESSAGE(r.value.has_value(), r.error);
        return *r.value;
    };
    CHECK(eval("2+3*4") == 14);
    CHECK(eval("(2+3)*4") == 20);
    CHECK(eval("2^3^2") == 512);
    CHECK(eval("-3 + +5") == 2);
    CHECK(eval("7/2") == 3.5);
    CHECK(eval(" 1.5 * 4 ") == 6);
    CHECK(eval("2*-3") == -6);

    CHECK(evaluate_expression("1/0").error == "division by zero");
    CHECK_FALSE(evaluate_expression("").value);
    CHECK_FALSE(evaluate_expression("2+").value);
    CHECK_FALSE(evaluate_expression("(1").value);
    CHECK_FALSE(evaluate_expression("abc").value);
    CHECK_FALSE(evaluate_expression("1 2").value);
}

TEST_CASE("number formatting") {
    CHECK(format_number(14) == "14");
    CHECK(format_number(-3) == "-3");
    CHECK(format_number(3.5) == "3.5");
    CHECK(format_number(0.1 + 0.2) == "0.30000000000000004");
}

TEST_CASE("keywords drop stopwords and punctuation") {
    CHECK(keywords("How tall is the Eiffel Tower?") == std::vector<std::string>{"tall", "eiffel", "tower"});
    CHECK(keywords("a I") == std::vector<std::string>{});
}

TEST_CASE("corpus search over a small fixture") {
    const auto corpus = Corpus::from_documents({{"a", "The Eiffel Tower is in Paris."},
                                                {"b", "Berlin is the capital of Germany."},
                                                {"c", "Rome has the Colosseum."}});
    const auto hits = corpus.search("Eiffel", 3);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0]->id == "a");
    CHECK(format_search_results(hits) == "[a] The Eiffel Tower is in Paris.");
    CHECK(corpus.search("Tokyo", 3).empty());
    CHECK(format_search_results({}) == "no results");
}

TEST_CASE("corpus search ranks by distinct keyword hits") {
    const auto corpus = Corpus::from_documents({{"1", "capital city"},
                                                {"2", "capital of France is Paris"},
                                                {"3", "Paris Paris Paris"},
                                                {"4", "France capital Paris"}});
    const auto hits = corpus.search("capital France Paris", 3);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0]->id == "2");
    CHECK(hits[1]->id == "4");
    CHECK(hits[2]->id == "1");  // tie with "3" keeps file order
}

TEST_CASE("fixture corpus loads") {
    const auto corpus = Corpus::load(data_dir() / "corpus.tsv");
    CHECK(corpus.documents().size() == 60);
    const auto hits = corpus.search("Eiffel Tower tall", 2);
    REQUIRE_FALSE(hits.empty());
    CHECK(hits[0]->id == "d01");
    CHECK_THROWS_AS(Corpus::load(data_dir() / "missing.tsv"), ConfigParseError);
}
