#include "segbench/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "json.hpp"

namespace segbench {
namespace {

constexpr std::array<Metric, 6> kTechnicalMetrics{Metric::Dice, Metric::Iou,  Metric::Sensitivity,
                                                  Metric::Specificity, Metric::HdMm, Metric::StsdMm};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<double> parse_double(std::string_view text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [end, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc{} || end != t.data() + t.size()) return std::nullopt;
  return v;
}

std::optional<double> parse_cell(std::string_view text, std::string_view source, std::size_t line) {
  const std::string t = trim(text);
  if (t == "NA" || t.empty()) return std::nullopt;
  const auto v = parse_double(t);
  if (!v) {
    throw Error(Errc::ParseFailure, std::string(source) + ":" + std::to_string(line) + ": bad number '" + t + "'");
  }
  return v;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  return in;
}

nlohmann::json json_value(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

// Reads non-empty lines, returning the header and data rows.
struct Table {
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line number, fields)
};

Table read_table(std::istream& in, std::string_view source) {
  Table t;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (n == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    for (auto& f : fields) f = trim(f);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw Error(Errc::ParseFailure, std::string(source) + ":" + std::to_string(n) + ": expected " +
                                          std::to_string(t.header.size()) + " fields, found " +
                                          std::to_string(fields.size()));
    }
    t.rows.emplace_back(n, std::move(fields));
  }
  if (t.header.empty()) throw Error(Errc::ParseFailure, std::string(source) + ": missing header");
  return t;
}

std::optional<std::size_t> column(const Table& t, std::string_view name) {
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (t.header[i] == name) return i;
  }
  return std::nullopt;
}

}  // namespace

std::string format_value(double value) {
  if (std::isnan(value)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

std::string format_value(const std::optional<double>& value) { return value ? format_value(*value) : "NA"; }

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

void write_case_csv(std::ostream& out, std::span<const CaseRecord> rows) {
  out << "case_id";
  for (Metric m : kAllMetrics) out << ',' << to_string(m);
  out << '\n';
  for (const auto& r : rows) {
    out << r.case_id;
    for (const auto& v : r.values) out << ',' << format_value(v);
    out << '\n';
  }
}

void write_case_json(std::ostream& out, std::span<const CaseRecord> rows) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json obj = nlohmann::json::object();
    obj["case_id"] = r.case_id;
    for (Metric m : kAllMetrics) obj[std::string(to_string(m))] = json_value(r[m]);
    doc.push_back(std::move(obj));
  }
  out << doc.dump(2) << '\n';
}

std::vector<CaseRecord> read_case_csv(std::istream& in, std::string_view source) {
  const Table t = read_table(in, source);
  const auto id_col = column(t, "case_id");
  if (!id_col) throw Error(Errc::ParseFailure, std::string(source) + ": no case_id column");
  std::array<std::optional<std::size_t>, kMetricCount> cols{};
  for (Metric m : kAllMetrics) cols[static_cast<std::size_t>(m)] = column(t, to_string(m));
  std::vector<CaseRecord> out;
  std::set<std::string> seen;
  for (const auto& [line, fields] : t.rows) {
    CaseRecord r;
    r.case_id = fields[*id_col];
    if (r.case_id.empty() || !seen.insert(r.case_id).second) {
      throw Error(Errc::ParseFailure, std::string(source) + ":" + std::to_string(line) + ": empty or duplicate case id");
    }
    for (std::size_t k = 0; k < kMetricCount; ++k) {
      if (cols[k]) r.values[k] = parse_cell(fields[*cols[k]], source, line);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<CaseRecord> read_case_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_case_csv(in, path.string());
}

std::map<std::string, Attributes> read_attributes_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  const Table t = read_table(in, path.string());
  const auto id_col = column(t, "team_id");
  if (!id_col) throw Error(Errc::ParseFailure, path.string() + ": no team_id column");
  std::map<std::string, Attributes> out;
  for (const auto& [line, fields] : t.rows) {
    Attributes& a = out[fields[*id_col]];
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i != *id_col) a[t.header[i]] = fields[i];
    }
  }
  return out;
}

std::vector<TeamSummary> read_summary_csv(std::istream& in, std::string_view source) {
  const Table t = read_table(in, source);
  auto id_col = column(t, "team_id");
  if (!id_col) id_col = column(t, "team");
  if (!id_col) throw Error(Errc::ParseFailure, std::string(source) + ": no team or team_id column");
  std::vector<TeamSummary> out;
  for (const auto& [line, fields] : t.rows) {
    TeamSummary s;
    s.team_id = fields[*id_col];
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i == *id_col) continue;
      std::optional<Metric> metric;
      for (Metric m : kAllMetrics) {
        if (t.header[i] == to_string(m)) metric = m;
      }
      if (!metric) {
        s.attributes[t.header[i]] = fields[i];
        continue;
      }
      const std::string& cell = fields[i];
      if (cell.empty() || cell == "NA") continue;
      MeanStd ms;
      const auto open = cell.find('(');
      const auto mean = parse_double(std::string_view(cell).substr(0, open));
      if (!mean) {
        throw Error(Errc::ParseFailure, std::string(source) + ":" + std::to_string(line) + ": bad summary cell '" + cell + "'");
      }
      ms.mean = *mean;
      if (open != std::string::npos) {
        const auto close = cell.find(')', open);
        const auto sd = close == std::string::npos ? std::nullopt
                                                   : parse_double(std::string_view(cell).substr(open + 1, close - open - 1));
        if (!sd || trim(std::string_view(cell).substr(close + 1)) != "") {
          throw Error(Errc::ParseFailure, std::string(source) + ":" + std::to_string(line) + ": bad summary cell '" + cell + "'");
        }
        ms.std = *sd;
      }
      s.metrics[static_cast<std::size_t>(*metric)] = ms;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TeamSummary> read_summary_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_summary_csv(in, path.string());
}

void write_quality_csv(std::ostream& out, std::span<const QualityRow> rows) {
  out << "scan_id,snr,cr,het,band\n";
  for (const auto& r : rows) {
    out << r.scan_id << ',' << format_value(r.report.snr) << ',' << format_value(r.report.cr) << ','
        << format_value(r.report.het) << ',' << to_string(r.report.band) << '\n';
  }
}

void write_quality_json(std::ostream& out, std::span<const QualityRow> rows) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& r : rows) {
    doc.push_back({{"scan_id", r.scan_id},
                   {"snr", r.report.snr},
                   {"cr", r.report.cr},
                   {"het", r.report.het},
                   {"band", std::string(to_string(r.report.band))}});
  }
  out << doc.dump(2) << '\n';
}

std::vector<QualityRow> read_quality_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  const Table t = read_table(in, path.string());
  const auto id = column(t, "scan_id");
  const auto snr = column(t, "snr");
  if (!id || !snr) throw Error(Errc::ParseFailure, path.string() + ": needs scan_id and snr columns");
  const auto cr = column(t, "cr");
  const auto het = column(t, "het");
  std::vector<QualityRow> out;
  for (const auto& [line, fields] : t.rows) {
    QualityRow r;
    r.scan_id = fields[*id];
    const auto v = parse_cell(fields[*snr], path.string(), line);
    if (!v) throw Error(Errc::ParseFailure, path.string() + ":" + std::to_string(line) + ": missing snr");
    r.report.snr = *v;
    if (cr) r.report.cr = parse_cell(fields[*cr], path.string(), line).value_or(0.0);
    if (het) r.report.het = parse_cell(fields[*het], path.string(), line).value_or(0.0);
    r.report.band = band_for_snr(r.report.snr);
    out.push_back(std::move(r));
  }
  return out;
}

void write_leaderboard_csv(std::ostream& out, const Leaderboard& board) {
  out << "rank,team";
  for (Metric m : kTechnicalMetrics) out << ',' << to_string(m) << "_mean," << to_string(m) << "_std";
  out << ",p_value\n";
  for (const auto& row : board.rows) {
    out << row.rank << ',' << row.summary.team_id;
    for (Metric m : kTechnicalMetrics) {
      const auto& ms = row.summary[m];
      out << ',' << format_value(ms ? std::optional(ms->mean) : std::nullopt) << ','
          << format_value(ms ? std::optional(ms->std) : std::nullopt);
    }
    out << ',' << format_value(row.p_value) << '\n';
  }
}

void write_leaderboard_json(std::ostream& out, const Leaderboard& board, std::span<const GroupComparison> comparisons,
                            std::span<const CorrelationResult> correlations, HausdorffMode hausdorff) {
  nlohmann::ordered_json doc;
  doc["metadata"] = {{"p_value_method", board.p_value_method},
                     {"hausdorff", hausdorff == HausdorffMode::Symmetric ? "symmetric" : "directed"},
                     {"ranking", "mean dice descending, then mean stsd_mm ascending, then team id"},
                     {"std", "sample standard deviation (n - 1)"}};
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : board.rows) {
    nlohmann::ordered_json r;
    r["rank"] = row.rank;
    r["team"] = row.summary.team_id;
    nlohmann::ordered_json attrs = nlohmann::ordered_json::object();
    for (const auto& [k, v] : row.summary.attributes) attrs[k] = v;
    r["attributes"] = attrs;
    for (Metric m : kAllMetrics) {
      const auto& ms = row.summary[m];
      if (!ms) continue;
      r[std::string(to_string(m))] = {{"mean", ms->mean}, {"std", ms->std}, {"n", ms->n}};
    }
    r["p_value"] = json_value(row.p_value);
    rows.push_back(std::move(r));
  }
  doc["leaderboard"] = std::move(rows);
  nlohmann::ordered_json groups = nlohmann::ordered_json::array();
  for (const auto& c : comparisons) {
    nlohmann::ordered_json g;
    g["attribute"] = c.attribute;
    g["metric"] = std::string(to_string(c.metric));
    nlohmann::ordered_json members = nlohmann::ordered_json::array();
    for (const auto& s : c.groups) {
      members.push_back({{"value", s.value}, {"teams", s.teams}, {"mean", s.mean}, {"p_vs_rest", json_value(s.p_vs_rest)}});
    }
    g["groups"] = std::move(members);
    g["p_value"] = json_value(c.p_value);
    groups.push_back(std::move(g));
  }
  doc["group_comparisons"] = std::move(groups);
  nlohmann::ordered_json corr = nlohmann::ordered_json::array();
  for (const auto& c : correlations) corr.push_back({{"x", c.x}, {"y", c.y}, {"n", c.n}, {"r", c.r}});
  doc["correlations"] = std::move(corr);
  out << doc.dump(2) << '\n';
}

}  // namespace segbench
