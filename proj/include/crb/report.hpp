#ifndef CRB_REPORT_HPP
#define CRB_REPORT_HPP

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crb/errors.hpp"
#include "crb/fim.hpp"
#include "crb/validate.hpp"

namespace crb {

/// One reported quantity. CRB-like quantities carry both the log value and
/// the linear view; plain scalars carry only `value`; verdicts and flags
/// carry `text`.
struct ReportEntry {
  std::string name;
  std::optional<double> value;
  std::optional<double> log_value;
  std::optional<std::string> text;
};

/// 15 significant digits; enough for the text/JSON renderings to agree on
/// the first 12 while staying human-readable.
inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

/// Linear values beyond exp(700) are printed as "overflow" instead of inf.
inline std::string format_linear(double log_value) {
  if (log_value > 700.0) return "overflow";
  return format_number(std::exp(log_value));
}

namespace detail {
inline std::string csv_escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out;
}
}  // namespace detail

struct Report {
  std::string command;
  std::vector<std::pair<std::string, std::string>> context;
  std::vector<ReportEntry> entries;

  void add_crb(const std::string& name, const CrbValue& crb) {
    ReportEntry e;
    e.name = name;
    e.log_value = crb.log_value;
    if (crb.log_value <= 700.0) e.value = crb.value();
    entries.push_back(std::move(e));
  }

  void add_scalar(const std::string& name, double value) {
    entries.push_back({name, value, std::nullopt, std::nullopt});
  }

  void add_text(const std::string& name, std::string text) {
    entries.push_back({name, std::nullopt, std::nullopt, std::move(text)});
  }

  std::string to_text() const {
    std::string out;
    for (const auto& [k, v] : context) out += "# " + k + ": " + v + "\n";
    for (const auto& e : entries) {
      if (e.log_value) {
        out += e.name + " = " + format_linear(*e.log_value) + " (log " +
               format_number(*e.log_value) + ")\n";
      } else if (e.value) {
        out += e.name + " = " + format_number(*e.value) + "\n";
      } else {
        out += e.name + " = " + e.text.value_or("") + "\n";
      }
    }
    return out;
  }

  /// One row per (quantity, value, log_value).
  std::string to_csv() const {
    std::string out = "quantity,value,log_value\n";
    for (const auto& e : entries) {
      std::string value;
      if (e.log_value)
        value = format_linear(*e.log_value);
      else if (e.value)
        value = format_number(*e.value);
      else
        value = e.text.value_or("");
      const std::string log = e.log_value ? format_number(*e.log_value) : "";
      out += "\"" + detail::csv_escape(e.name) + "\"," + value + "," + log + "\n";
    }
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["tool"] = "crb";
    j["command"] = command;
    nlohmann::ordered_json ctx = nlohmann::ordered_json::object();
    for (const auto& [k, v] : context) ctx[k] = v;
    j["context"] = ctx;
    nlohmann::ordered_json results = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
      nlohmann::ordered_json r;
      r["name"] = e.name;
      if (e.value) r["value"] = *e.value;
      if (e.log_value) {
        r["log_value"] = *e.log_value;
        if (!e.value) r["value"] = "overflow";
      }
      if (e.text) r["text"] = *e.text;
      results.push_back(std::move(r));
    }
    j["results"] = std::move(results);
    return j;
  }

  static Report from_json(const nlohmann::ordered_json& j) {
    Report report;
    try {
      report.command = j.at("command").get<std::string>();
      if (j.contains("context"))
        for (const auto& [k, v] : j.at("context").items())
          report.context.emplace_back(k, v.get<std::string>());
      for (const auto& r : j.at("results")) {
        ReportEntry e;
        e.name = r.at("name").get<std::string>();
        if (r.contains("value") && r.at("value").is_number())
          e.value = r.at("value").get<double>();
        if (r.contains("log_value")) e.log_value = r.at("log_value").get<double>();
        if (r.contains("text")) e.text = r.at("text").get<std::string>();
        report.entries.push_back(std::move(e));
      }
    } catch (const nlohmann::json::exception& ex) {
      throw ConfigError(std::string("report: malformed JSON report: ") + ex.what());
    }
    return report;
  }
};

inline Report to_report(const ExperimentReport& exp, const std::string& command) {
  Report report;
  report.command = command;
  report.context.emplace_back("model", exp.model);
  report.context.emplace_back("trials", std::to_string(exp.trials));
  report.context.emplace_back("seed", std::to_string(exp.seed));
  report.context.emplace_back("slack", format_number(exp.slack));
  for (const auto& e : exp.entries) {
    ReportEntry lhs;
    lhs.name = e.quantity;
    lhs.log_value = e.log_empirical;
    if (e.log_empirical <= 700.0) lhs.value = std::exp(e.log_empirical);
    report.entries.push_back(std::move(lhs));
    ReportEntry bound;
    bound.name = e.quantity + " [bound]";
    bound.log_value = e.log_bound;
    if (e.log_bound <= 700.0) bound.value = std::exp(e.log_bound);
    report.entries.push_back(std::move(bound));
    report.add_scalar(e.quantity + " [ratio]", e.ratio);
    report.add_text(e.quantity + " [verdict]", to_string(e.verdict));
  }
  for (const auto& [name, value] : exp.metrics) report.add_scalar(name, value);
  report.add_text("overall", to_string(exp.overall()));
  return report;
}

}  // namespace crb

#endif
