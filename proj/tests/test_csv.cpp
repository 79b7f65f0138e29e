#include <doctest.h>

#include <string>

#include <bprelab/csv.hpp>
#include <bprelab/ensemble_io.hpp>
#include <bprelab/errors.hpp>

using namespace bprelab;

TEST_CASE("csv emit and parse round trip plain cells") {
    CsvTable t;
    t.header = {"n", "estimate", "stderr", "N", "seed"};
    t.rows = {{"16", "0.25", "0.001", "1000", "42"},
              {"64", "0.125", "0.0005", "1000", "42"}};
    std::string text = emit_csv(t);
    CHECK(text ==
          "n,estimate,stderr,N,seed\n"
          "16,0.25,0.001,1000,42\n"
          "64,0.125,0.0005,1000,42\n");
    CHECK(parse_csv(text) == t);
}

TEST_CASE("csv quoting round trip") {
    CsvTable t;
    t.header = {"name", "note"};
    t.rows = {{"a,b", "says \"hi\""},
              {"line\nbreak", "plain"},
              {"", "trailing,comma,"}};
    std::string text = emit_csv(t);
    CHECK(parse_csv(text) == t);
    CHECK(text.find("\"a,b\"") != std::string::npos);
    CHECK(text.find("\"says \"\"hi\"\"\"") != std::string::npos);
}

TEST_CASE("csv rejects malformed input") {
    CHECK_THROWS_AS(parse_csv(""), DomainError);
    CHECK_THROWS_AS(parse_csv("a,b\r\n1,2\n"), DomainError);   // CRLF is not accepted
    CHECK_THROWS_AS(parse_csv("a,b\n1,2,3\n"), DomainError);   // width mismatch
    CHECK_THROWS_AS(parse_csv("a,b\n\"unterminated,2\n"), DomainError);
    CHECK_THROWS_AS(parse_csv("a,b\n1\"2,3\n"), DomainError);  // quote inside bare cell
}

TEST_CASE("csv emit rejects ragged rows") {
    CsvTable t;
    t.header = {"a", "b"};
    t.rows = {{"1"}};
    CHECK_THROWS_AS(emit_csv(t), DomainError);
}

TEST_CASE("estimator table uses the fixed five column layout") {
    EstimatorRow r;
    r.n = 256;
    r.estimate = 0.0625;
    r.stderr_ = 0.00078125;
    r.replicas = 100000;
    r.seed = 12345;
    CsvTable t = estimator_table({r});
    REQUIRE(t.header == std::vector<std::string>{"n", "estimate", "stderr", "N", "seed"});
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0][0] == "256");
    CHECK(parse_double(t.rows[0][1]) == 0.0625);
    CHECK(parse_double(t.rows[0][2]) == 0.00078125);
    CHECK(t.rows[0][3] == "100000");
    CHECK(t.rows[0][4] == "12345");
}

TEST_CASE("format double survives a round trip through text") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -0.0, 0.0, 2.0}) {
        CHECK(parse_double(format_double(v)) == v);
    }
}
