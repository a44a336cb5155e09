#include "cgmm/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cgmm/error.hpp"

namespace cgmm {

std::string format_g6(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

std::string report_to_tsv(const McReport& report) {
  std::string out =
      "estimator\tcoefficient\ttruth\tcoverage\tmedian_width\tmean_estimate\tmean_bias\tmedian_estimate\t"
      "empirical_sd\tmean_se\tfits\tfailures\n";
  for (const auto& s : report.summaries) {
    out += s.estimator + "\t" + s.coefficient + "\t" + format_g6(s.truth) + "\t" + format_g6(s.coverage) + "\t" +
           format_g6(s.median_width) + "\t" + format_g6(s.mean_estimate) + "\t" + format_g6(s.mean_bias) + "\t" +
           format_g6(s.median_estimate) + "\t" + format_g6(s.empirical_sd) + "\t" + format_g6(s.mean_se) + "\t" +
           std::to_string(s.fits) + "\t" + std::to_string(s.failures) + "\n";
  }
  return out;
}

std::string report_to_json(const McReport& report) {
  nlohmann::ordered_json j;
  j["scenario"] = report.scenario;
  j["seed"] = report.seed;
  j["replicates"] = report.replicates;
  j["level"] = report.level;
  j["summaries"] = nlohmann::ordered_json::array();
  for (const auto& s : report.summaries) {
    j["summaries"].push_back({{"estimator", s.estimator},
                              {"coefficient", s.coefficient},
                              {"truth", s.truth},
                              {"coverage", s.coverage},
                              {"median_width", s.median_width},
                              {"mean_estimate", s.mean_estimate},
                              {"mean_bias", s.mean_bias},
                              {"median_estimate", s.median_estimate},
                              {"empirical_sd", s.empirical_sd},
                              {"mean_se", s.mean_se},
                              {"fits", s.fits},
                              {"failures", s.failures}});
  }
  j["estimates"] = nlohmann::ordered_json::array();
  for (const auto& e : report.estimates) {
    j["estimates"].push_back({{"replicate", e.replicate},
                              {"estimator", e.estimator},
                              {"coefficient", e.coefficient},
                              {"estimate", e.estimate},
                              {"se", e.se},
                              {"ci_low", e.ci_low},
                              {"ci_high", e.ci_high}});
  }
  return j.dump(2) + "\n";
}

std::string replicates_to_tsv(const McReport& report) {
  std::string out = "replicate\testimator\tcoefficient\testimate\tse\tci_low\tci_high\n";
  for (const auto& e : report.estimates) {
    out += std::to_string(e.replicate) + "\t" + e.estimator + "\t" + e.coefficient + "\t" + format_g6(e.estimate) +
           "\t" + format_g6(e.se) + "\t" + format_g6(e.ci_low) + "\t" + format_g6(e.ci_high) + "\n";
  }
  return out;
}

std::string summary_table(const McReport& report) {
  std::vector<std::string> estimators;
  std::vector<std::string> coefficients;
  for (const auto& s : report.summaries) {
    if (std::find(estimators.begin(), estimators.end(), s.estimator) == estimators.end()) {
      estimators.push_back(s.estimator);
    }
    if (std::find(coefficients.begin(), coefficients.end(), s.coefficient) == coefficients.end()) {
      coefficients.push_back(s.coefficient);
    }
  }
  auto pad = [](std::string s, std::size_t w) {
    s.append(s.size() < w ? w - s.size() : 1, ' ');
    return s;
  };
  std::ostringstream out;
  out << report.scenario << ": " << report.replicates << " replicates, seed " << report.seed << ", level "
      << format_g6(report.level) << "\n";
  out << pad("", 10);
  for (const auto& c : coefficients) out << pad("cov " + c, 10);
  for (const auto& c : coefficients) out << pad("width " + c, 12);
  for (const auto& c : coefficients) out << pad("mean " + c, 12);
  for (const auto& c : coefficients) out << pad("sd " + c, 12);
  out << "\n";
  for (const auto& est : estimators) {
    std::vector<const CoefficientSummary*> row;
    for (const auto& s : report.summaries) {
      if (s.estimator == est) row.push_back(&s);
    }
    out << pad(est, 10);
    char buf[32];
    for (const auto* s : row) {
      std::snprintf(buf, sizeof(buf), "%.3f", s->coverage);
      out << pad(buf, 10);
    }
    auto short_g = [](double v) {
      char b[32];
      std::snprintf(b, sizeof(b), "%.4g", v);
      return std::string(b);
    };
    for (const auto* s : row) out << pad(short_g(s->median_width), 12);
    for (const auto* s : row) out << pad(short_g(s->mean_estimate), 12);
    for (const auto* s : row) out << pad(short_g(s->empirical_sd), 12);
    if (!row.empty() && row.front()->failures > 0) out << "  (" << row.front()->failures << " failed)";
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Scenario files

namespace {

std::string Strip(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

// Removes a trailing '#' comment that is not inside a string.
std::string DropComment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

struct Value {
  std::string text;
  std::size_t line = 0;
};

std::string Unquote(const Value& v) {
  const std::string s = Strip(v.text);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

double Number(const Value& v, const std::string& key) {
  const std::string s = Strip(v.text);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("'" + key + "' expects a number, got '" + s + "'", v.line, 0);
  }
  return out;
}

std::uint64_t Unsigned(const Value& v, const std::string& key) {
  const std::string s = Strip(v.text);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("'" + key + "' expects a non-negative integer, got '" + s + "'", v.line, 0);
  }
  return out;
}

bool Boolean(const Value& v, const std::string& key) {
  const std::string s = Strip(v.text);
  if (s == "true") return true;
  if (s == "false") return false;
  throw ParseError("'" + key + "' expects true or false, got '" + s + "'", v.line, 0);
}

// Accepts [a, b, c] or a bare / quoted comma list.
std::vector<Value> List(const Value& v) {
  std::string s = Strip(v.text);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw ParseError("unterminated list", v.line, 0);
    s = s.substr(1, s.size() - 2);
  } else {
    s = Unquote(v);
  }
  std::vector<Value> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!Strip(item).empty()) out.push_back(Value{Strip(item), v.line});
  }
  return out;
}

std::string Number17(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  std::map<std::string, Value> entries;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string body = Strip(DropComment(raw));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line, 0);
    const std::string key = Strip(body.substr(0, eq));
    if (key.empty()) throw ParseError("missing key", line, 0);
    if (!entries.emplace(key, Value{body.substr(eq + 1), line}).second) {
      throw ParseError("duplicate key '" + key + "'", line, 0);
    }
  }

  Scenario s;
  if (auto it = entries.find("scenario"); it != entries.end()) {
    s = named_scenario(Unquote(it->second));
    entries.erase(it);
  } else {
    s.name = "custom";
  }
  ScenarioConfig& c = s.config;
  for (const auto& [key, v] : entries) {
    if (key == "name") s.name = Unquote(v);
    else if (key == "model") {
      c.model = parse_model(Unquote(v));
      if (c.model == Model::kOveridSem && entries.count("beta") == 0) c.beta = {0.0, 1.0, 0.0};
    } else if (key == "n") c.n = static_cast<Index>(Unsigned(v, key));
    else if (key == "N") s.replicates = Unsigned(v, key);
    else if (key == "seed") c.seed = Unsigned(v, key);
    else if (key == "level") s.level = Number(v, key);
    else if (key == "beta") {
      c.beta.clear();
      for (const auto& item : List(v)) c.beta.push_back(Number(item, key));
    } else if (key == "R") c.mean_shift = Number(v, key);
    else if (key == "alpha_v") c.alpha_v = Number(v, key);
    else if (key == "alpha_0") c.alpha_0 = Number(v, key);
    else if (key == "f_slope") c.f_slope = Number(v, key);
    else if (key == "g_slope") c.g_slope = Number(v, key);
    else if (key == "x_do") c.x_do = Number(v, key);
    else if (key == "pi_do") c.pi_do = Number(v, key);
    else if (key == "e_dist") c.e_dist = parse_distribution(Unquote(v));
    else if (key == "e_param") c.e_param = Number(v, key);
    else if (key == "center_xy") s.center_xy = Boolean(v, key);
    else if (key == "estimators") {
      s.estimators.clear();
      for (const auto& item : List(v)) s.estimators.push_back(parse_estimator(Unquote(item)));
    } else {
      throw ParseError("unknown key '" + key + "'", v.line, 0);
    }
  }
  if (s.estimators.empty()) throw InvalidInput("scenario lists no estimators");
  c.validate();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw InvalidInput("cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << file.rdbuf();
  return parse_scenario(buf.str());
}

std::string scenario_to_text(const Scenario& s) {
  const ScenarioConfig& c = s.config;
  std::ostringstream out;
  out << "name = \"" << s.name << "\"\n";
  out << "model = \"" << to_string(c.model) << "\"\n";
  out << "n = " << c.n << "\n";
  out << "N = " << s.replicates << "\n";
  out << "seed = " << c.seed << "\n";
  out << "level = " << Number17(s.level) << "\n";
  out << "beta = [";
  for (std::size_t i = 0; i < c.beta.size(); ++i) out << (i ? ", " : "") << Number17(c.beta[i]);
  out << "]\n";
  out << "R = " << Number17(c.mean_shift) << "\n";
  out << "alpha_v = " << Number17(c.alpha_v) << "\n";
  out << "alpha_0 = " << Number17(c.alpha_0) << "\n";
  out << "f_slope = " << Number17(c.f_slope) << "\n";
  out << "g_slope = " << Number17(c.g_slope) << "\n";
  out << "x_do = " << Number17(c.x_do) << "\n";
  out << "pi_do = " << Number17(c.pi_do) << "\n";
  out << "e_dist = \"" << to_string(c.e_dist) << "\"\n";
  out << "e_param = " << Number17(c.e_param) << "\n";
  out << "center_xy = " << (s.center_xy ? "true" : "false") << "\n";
  out << "estimators = [";
  for (std::size_t i = 0; i < s.estimators.size(); ++i) out << (i ? ", " : "") << "\"" << s.estimators[i].name << "\"";
  out << "]\n";
  return out.str();
}

}  // namespace cgmm
