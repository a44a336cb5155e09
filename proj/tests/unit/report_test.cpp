#include <doctest.h>

#include <json.hpp>

#include <sstream>

#include "cgmm/error.hpp"
#include "cgmm/report.hpp"

using namespace cgmm;

namespace {

std::vector<std::vector<std::string>> SplitTsv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, '\t')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("TSV and JSON reports carry the same numbers") {
  Scenario s = named_scenario("table1");
  s.replicates = 20;
  const McReport r = run_monte_carlo(s);
  const auto tsv = SplitTsv(report_to_tsv(r));
  const auto json = nlohmann::json::parse(report_to_json(r));
  REQUIRE(tsv.size() == r.summaries.size() + 1);
  const auto& header = tsv.front();
  for (std::size_t i = 1; i < tsv.size(); ++i) {
    const auto& js = json["summaries"][i - 1];
    CHECK(tsv[i][0] == js["estimator"].get<std::string>());
    for (std::size_t c = 2; c < header.size(); ++c) {
      CHECK(tsv[i][c] == format_g6(js[header[c]].get<double>()));
    }
  }
  CHECK(json["estimates"].size() == r.estimates.size());
  CHECK(json["estimates"][0]["estimate"].get<double>() == r.estimates[0].estimate);
}

TEST_CASE("scenario file round trip") {
  for (const auto& name : scenario_names()) {
    const Scenario a = named_scenario(name);
    const Scenario b = parse_scenario(scenario_to_text(a));
    CHECK(b.name == a.name);
    CHECK(b.config.model == a.config.model);
    CHECK(b.config.n == a.config.n);
    CHECK(b.config.beta == a.config.beta);
    CHECK(b.config.alpha_v == a.config.alpha_v);
    CHECK(b.config.mean_shift == a.config.mean_shift);
    CHECK(b.config.seed == a.config.seed);
    CHECK(b.replicates == a.replicates);
    CHECK(b.center_xy == a.center_xy);
    REQUIRE(b.estimators.size() == a.estimators.size());
    for (std::size_t i = 0; i < a.estimators.size(); ++i) CHECK(b.estimators[i].name == a.estimators[i].name);
  }
}

TEST_CASE("parse_scenario: overrides and errors") {
  const Scenario s = parse_scenario(
      "# table1 at a larger sample\n"
      "scenario = \"table1\"\n"
      "n = 400\n"
      "seed = 7\n"
      "estimators = [\"gcd\", \"ols\"]\n");
  CHECK(s.config.n == 400);
  CHECK(s.config.seed == 7);
  CHECK(s.config.model == Model::kOveridSem);
  CHECK(s.estimators.size() == 2);

  const Scenario m = parse_scenario("model = \"overid_sem\"\nn = 50\nestimators = gcd, ols\n");
  CHECK(m.config.beta == std::vector<double>{0.0, 1.0, 0.0});

  CHECK_THROWS_AS(parse_scenario("colour = \"blue\"\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("n = 10\nn = 20\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("n = ten\n"), ParseError);
}
