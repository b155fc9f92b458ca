#include "segbench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace segbench {

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::EmptyCases, "no values to aggregate");
  MeanStd r;
  r.n = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  r.mean = sum / static_cast<double>(r.n);
  double residual = 0.0;
  for (double v : values) residual += v - r.mean;
  r.mean += residual / static_cast<double>(r.n);
  if (r.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(r.n - 1));
  }
  return r;
}

namespace {

// Continued fraction for I_x(a, b), valid for x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0) || !(x >= 0.0 && x <= 1.0)) {
    throw Error(Errc::InvalidArgument, "incomplete beta needs a, b > 0 and x in [0, 1]");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw Error(Errc::InvalidArgument, "degrees of freedom must be positive");
  if (std::isnan(t)) throw Error(Errc::InvalidArgument, "t is NaN");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
  return t > 0 ? 1.0 - tail : tail;
}

WelchResult welch_test(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() < 2 || ys.size() < 2) throw Error(Errc::DegenerateSample, "each sample needs >= 2 values");
  for (auto s : {xs, ys}) {
    for (double v : s) {
      if (!std::isfinite(v)) throw Error(Errc::DegenerateSample, "sample contains a non-finite value");
    }
  }
  const MeanStd mx = mean_std(xs);
  const MeanStd my = mean_std(ys);
  const double vx = mx.std * mx.std / static_cast<double>(mx.n);
  const double vy = my.std * my.std / static_cast<double>(my.n);
  const double se2 = vx + vy;
  if (!(se2 > 0.0)) throw Error(Errc::DegenerateSample, "both samples have zero variance");
  WelchResult r;
  r.t = (mx.mean - my.mean) / std::sqrt(se2);
  r.df = se2 * se2 /
         (vx * vx / static_cast<double>(mx.n - 1) + vy * vy / static_cast<double>(my.n - 1));
  r.p = std::clamp(regularized_incomplete_beta(0.5 * r.df, 0.5, r.df / (r.df + r.t * r.t)), 0.0, 1.0);
  return r;
}

double welch_ttest(std::span<const double> xs, std::span<const double> ys) { return welch_test(xs, ys).p; }

double correlate(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(Errc::InvalidArgument, "samples differ in length");
  if (xs.size() < 2) throw Error(Errc::DegenerateSample, "correlation needs >= 2 pairs");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(Errc::ConstantSample, "correlation of a constant sample");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::string_view to_string(Metric metric) noexcept {
  switch (metric) {
    case Metric::Dice: return "dice";
    case Metric::Iou: return "iou";
    case Metric::Sensitivity: return "sensitivity";
    case Metric::Specificity: return "specificity";
    case Metric::HdMm: return "hd_mm";
    case Metric::StsdMm: return "stsd_mm";
    case Metric::DiameterErrPct: return "diameter_err_pct";
    case Metric::VolumeErrPct: return "volume_err_pct";
  }
  return "dice";
}

Metric parse_metric(std::string_view name) {
  for (Metric m : kAllMetrics) {
    if (to_string(m) == name) return m;
  }
  throw Error(Errc::ParseFailure, "unknown metric '" + std::string(name) + "'");
}

CaseRecord to_record(std::string case_id, const CaseMetrics& m) {
  CaseRecord r;
  r.case_id = std::move(case_id);
  r.values = {m.dice, m.iou, m.sensitivity, m.specificity, m.hd_mm, m.stsd_mm, m.diameter_err_pct, m.volume_err_pct};
  return r;
}

TeamSummary aggregate(const TeamResult& team) {
  if (team.cases.empty()) throw Error(Errc::EmptyCases, "team " + team.team_id + " has no cases");
  TeamSummary s;
  s.team_id = team.team_id;
  s.attributes = team.attributes;
  for (Metric m : kAllMetrics) {
    std::vector<double> values;
    for (const auto& c : team.cases) {
      if (const auto v = c[m]) values.push_back(*v);
    }
    if (!values.empty()) s.metrics[static_cast<std::size_t>(m)] = mean_std(values);
  }
  return s;
}

GroupComparison compare_groups(std::span<const TeamSummary> teams, std::string_view attribute, Metric metric) {
  GroupComparison out;
  out.attribute = std::string(attribute);
  out.metric = metric;
  std::map<std::string, std::vector<std::pair<std::string, double>>> by_value;
  for (const auto& t : teams) {
    const auto it = t.attributes.find(out.attribute);
    const auto& ms = t[metric];
    if (it == t.attributes.end() || it->second.empty() || !ms) continue;
    by_value[it->second].emplace_back(t.team_id, ms->mean);
  }
  if (by_value.size() < 2) {
    throw Error(Errc::DegeneratePartition, "attribute '" + out.attribute + "' does not split the teams into >= 2 groups");
  }
  auto welch_or_none = [](const std::vector<double>& a, const std::vector<double>& b) -> std::optional<double> {
    try {
      return welch_ttest(a, b);
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  for (auto& [value, members] : by_value) {
    std::sort(members.begin(), members.end());
    GroupStats g;
    g.value = value;
    std::vector<double> inside;
    for (const auto& [id, mean] : members) {
      g.teams.push_back(id);
      inside.push_back(mean);
    }
    g.mean = mean_std(inside).mean;
    std::vector<double> rest;
    for (const auto& [other, others] : by_value) {
      if (other == value) continue;
      for (const auto& [id, mean] : others) rest.push_back(mean);
    }
    g.p_vs_rest = welch_or_none(inside, rest);
    out.groups.push_back(std::move(g));
  }
  if (out.groups.size() == 2) out.p_value = out.groups.front().p_vs_rest;
  return out;
}

GroupComparison compare_groups(std::span<const TeamResult> teams, std::string_view attribute, Metric metric) {
  std::vector<TeamSummary> summaries;
  summaries.reserve(teams.size());
  for (const auto& t : teams) summaries.push_back(aggregate(t));
  return compare_groups(summaries, attribute, metric);
}

namespace {

bool ranks_before(const TeamSummary& a, const TeamSummary& b) {
  // Missing means sort last.
  auto key = [](const std::optional<MeanStd>& m, double missing) { return m ? m->mean : missing; };
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double da = key(a[Metric::Dice], -inf);
  const double db = key(b[Metric::Dice], -inf);
  if (da != db) return da > db;
  const double sa = key(a[Metric::StsdMm], inf);
  const double sb = key(b[Metric::StsdMm], inf);
  if (sa != sb) return sa < sb;
  return a.team_id < b.team_id;
}

}  // namespace

Leaderboard rank_summaries(std::span<const TeamSummary> summaries) {
  if (summaries.empty()) throw Error(Errc::EmptyInput, "no teams to rank");
  std::set<std::string> ids;
  for (const auto& s : summaries) {
    if (!ids.insert(s.team_id).second) throw Error(Errc::InvalidArgument, "duplicate team id " + s.team_id);
  }
  Leaderboard board;
  for (const auto& s : summaries) board.rows.push_back({0, s, std::nullopt});
  std::sort(board.rows.begin(), board.rows.end(),
            [](const LeaderboardRow& a, const LeaderboardRow& b) { return ranks_before(a.summary, b.summary); });
  for (std::size_t i = 0; i < board.rows.size(); ++i) board.rows[i].rank = i + 1;
  return board;
}

Leaderboard build_leaderboard(std::span<const TeamResult> teams) {
  if (teams.empty()) throw Error(Errc::EmptyInput, "no teams to rank");
  auto case_ids = [](const TeamResult& t) {
    std::set<std::string> ids;
    for (const auto& c : t.cases) ids.insert(c.case_id);
    return ids;
  };
  const auto reference = case_ids(teams.front());
  for (const auto& t : teams) {
    if (case_ids(t) != reference || t.cases.size() != reference.size()) {
      throw Error(Errc::CaseSetMismatch, "team " + t.team_id + " does not share the case set of " + teams.front().team_id);
    }
  }
  std::vector<TeamSummary> summaries;
  for (const auto& t : teams) summaries.push_back(aggregate(t));
  Leaderboard board = rank_summaries(summaries);

  std::map<std::string, std::vector<double>> dice_by_team;
  for (const auto& t : teams) {
    auto& v = dice_by_team[t.team_id];
    for (const auto& c : t.cases) {
      if (const auto d = c[Metric::Dice]) v.push_back(*d);
    }
  }
  for (auto& row : board.rows) {
    std::vector<double> rest;
    for (const auto& [id, values] : dice_by_team) {
      if (id != row.summary.team_id) rest.insert(rest.end(), values.begin(), values.end());
    }
    try {
      row.p_value = welch_ttest(dice_by_team[row.summary.team_id], rest);
    } catch (const Error&) {
      row.p_value.reset();
    }
  }
  return board;
}

}  // namespace segbench
