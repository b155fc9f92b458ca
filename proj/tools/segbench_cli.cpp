// segbench command-line front end.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "segbench/metrics.hpp"
#include "segbench/morphology.hpp"
#include "segbench/nrrd.hpp"
#include "segbench/parallel.hpp"
#include "segbench/phantom.hpp"
#include "segbench/pipeline.hpp"
#include "segbench/preprocess.hpp"
#include "segbench/quality.hpp"
#include "segbench/report.hpp"
#include "segbench/stats.hpp"

namespace fs = std::filesystem;
using namespace segbench;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitPartial = 2;

struct Common {
  std::uint64_t seed = 0;
  std::string format = "csv";
  unsigned jobs = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  cmd->add_option("--jobs", c.jobs, "Worker threads (default: $SEGBENCH_JOBS or all cores)")
      ->check(CLI::PositiveNumber);
}

// Writes to a file, or stdout for "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    file_.open(path, std::ios::binary);
    if (!file_) throw Error(Errc::IoFailure, "cannot write " + path);
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

Encoding parse_encoding(const std::string& name) { return name == "gzip" ? Encoding::Gzip : Encoding::Raw; }

Axis parse_axis(const std::string& name) {
  if (name == "x") return Axis::X;
  if (name == "y") return Axis::Y;
  return Axis::Z;
}

Extent3 to_extent(const std::vector<std::int64_t>& v) { return {v.at(0), v.at(1), v.at(2)}; }

bool has_nrrd_suffix(const fs::path& p) { return p.extension() == ".nrrd"; }

std::string strip_label(const std::string& stem) {
  constexpr std::string_view suffix = "_label";
  if (stem.size() > suffix.size() && stem.ends_with(suffix)) return stem.substr(0, stem.size() - suffix.size());
  return stem;
}

std::vector<fs::path> list_nrrd(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::IoFailure, dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && has_nrrd_suffix(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Truth files: <id>_label.nrrd, or <id>.nrrd when no labelled sibling exists.
std::map<std::string, fs::path> truth_files(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  for (const auto& p : list_nrrd(dir)) {
    const std::string stem = p.stem().string();
    const std::string id = strip_label(stem);
    if (id != stem) {
      out[id] = p;
    } else if (!fs::exists(dir / (stem + "_label.nrrd"))) {
      out.emplace(id, p);
    }
  }
  return out;
}

std::set<std::string> prediction_ids(const fs::path& dir) {
  std::set<std::string> ids;
  for (const auto& p : list_nrrd(dir)) ids.insert(strip_label(p.stem().string()));
  return ids;
}

// First candidate that decodes as a binary mask.
Mask read_prediction(const fs::path& dir, const std::string& id) {
  std::string last_error = "no prediction file";
  for (const auto& name : {id + ".nrrd", id + "_label.nrrd"}) {
    const fs::path p = dir / name;
    if (!fs::exists(p)) continue;
    Grid g = read_nrrd(p);
    if (auto* m = std::get_if<Mask>(&g)) return std::move(*m);
    last_error = p.string() + " is not a binary mask";
  }
  throw Error(Errc::ParseFailure, last_error);
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  Common common;
  std::string pred_dir, truth_dir, out = "-";
  std::string hausdorff = "symmetric";
  std::string axis = "x";
};

int cmd_evaluate(const EvaluateArgs& a) {
  const auto truths = truth_files(a.truth_dir);
  const auto preds = prediction_ids(a.pred_dir);
  std::vector<std::string> problems;
  std::vector<std::string> ids;
  for (const auto& [id, path] : truths) {
    if (preds.contains(id)) {
      ids.push_back(id);
    } else {
      problems.push_back(id + ": no prediction");
    }
  }
  for (const auto& id : preds) {
    if (!truths.contains(id)) problems.push_back(id + ": no ground truth");
  }

  EvaluateOptions opts;
  opts.hausdorff = a.hausdorff == "directed" ? HausdorffMode::Directed : HausdorffMode::Symmetric;
  opts.diameter_axis = parse_axis(a.axis);
  std::vector<std::optional<CaseRecord>> rows(ids.size());
  std::vector<std::string> errors(ids.size());
  parallel_for(ids.size(), a.common.jobs, [&](std::size_t i) {
    try {
      const Mask truth = read_mask(truths.at(ids[i]));
      const Mask pred = read_prediction(a.pred_dir, ids[i]);
      rows[i] = to_record(ids[i], evaluate_case(pred, truth, opts));
    } catch (const std::exception& e) {
      errors[i] = ids[i] + ": " + e.what();
    }
  });
  std::vector<CaseRecord> ok;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (rows[i]) {
      ok.push_back(std::move(*rows[i]));
    } else {
      problems.push_back(errors[i]);
    }
  }
  Output out(a.out);
  if (a.common.format == "json") {
    write_case_json(out.stream(), ok);
  } else {
    write_case_csv(out.stream(), ok);
  }
  std::sort(problems.begin(), problems.end());
  for (const auto& p : problems) std::cerr << "segbench evaluate: " << p << '\n';
  return problems.empty() ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------------------

struct RankArgs {
  Common common;
  std::vector<std::string> metrics;
  std::string summary, attributes, quality;
  std::vector<std::string> group_by;
  std::string compare_metric = "dice";
  std::string out_csv, out_json;
  std::string hausdorff = "symmetric";
};

// "team=path" or a bare path whose stem names the team.
std::pair<std::string, fs::path> team_source(const std::string& arg) {
  if (const auto eq = arg.find('='); eq != std::string::npos) return {arg.substr(0, eq), arg.substr(eq + 1)};
  return {fs::path(arg).stem().string(), arg};
}

int cmd_rank(const RankArgs& a) {
  std::map<std::string, Attributes> attrs;
  if (!a.attributes.empty()) attrs = read_attributes_csv(a.attributes);

  Leaderboard board;
  std::vector<TeamSummary> summaries;
  std::vector<TeamResult> teams;
  if (!a.summary.empty()) {
    summaries = read_summary_csv(fs::path(a.summary));
    for (auto& s : summaries) {
      if (const auto it = attrs.find(s.team_id); it != attrs.end()) {
        for (const auto& [k, v] : it->second) s.attributes[k] = v;
      }
    }
    board = rank_summaries(summaries);
  } else {
    std::set<std::string> seen;
    for (const auto& arg : a.metrics) {
      auto [team, path] = team_source(arg);
      if (!seen.insert(team).second) throw Error(Errc::InvalidArgument, "team " + team + " given twice");
      TeamResult t;
      t.team_id = team;
      t.cases = read_case_csv(path);
      if (const auto it = attrs.find(team); it != attrs.end()) t.attributes = it->second;
      teams.push_back(std::move(t));
    }
    board = build_leaderboard(teams);
    for (const auto& row : board.rows) summaries.push_back(row.summary);
  }

  std::vector<std::string> group_by = a.group_by;
  if (group_by.empty()) {
    std::set<std::string> keys;
    for (const auto& s : summaries) {
      for (const auto& [k, v] : s.attributes) keys.insert(k);
    }
    group_by.assign(keys.begin(), keys.end());
  }
  const Metric metric = parse_metric(a.compare_metric);
  std::vector<GroupComparison> comparisons;
  for (const auto& attr : group_by) {
    try {
      comparisons.push_back(compare_groups(summaries, attr, metric));
    } catch (const Error& e) {
      if (e.code() != Errc::DegeneratePartition) throw;
      if (!a.group_by.empty()) throw;
    }
  }

  std::vector<CorrelationResult> correlations;
  if (!a.quality.empty()) {
    if (teams.empty()) throw Error(Errc::InvalidArgument, "quality correlation needs per-case metrics files");
    std::map<std::string, std::pair<double, std::size_t>> dice_by_case;
    for (const auto& t : teams) {
      for (const auto& c : t.cases) {
        if (const auto d = c[Metric::Dice]) {
          auto& acc = dice_by_case[c.case_id];
          acc.first += *d;
          ++acc.second;
        }
      }
    }
    std::vector<double> snr, dice;
    for (const auto& q : read_quality_csv(a.quality)) {
      const auto it = dice_by_case.find(q.scan_id);
      if (it == dice_by_case.end() || it->second.second == 0) continue;
      snr.push_back(q.report.snr);
      dice.push_back(it->second.first / static_cast<double>(it->second.second));
    }
    correlations.push_back({"snr", "mean_case_dice", snr.size(), correlate(snr, dice)});
  }

  const HausdorffMode hd = a.hausdorff == "directed" ? HausdorffMode::Directed : HausdorffMode::Symmetric;
  if (!a.out_csv.empty()) {
    Output out(a.out_csv);
    write_leaderboard_csv(out.stream(), board);
  }
  if (!a.out_json.empty()) {
    Output out(a.out_json);
    write_leaderboard_json(out.stream(), board, comparisons, correlations, hd);
  }
  if (a.out_csv.empty() && a.out_json.empty()) {
    if (a.common.format == "json") {
      write_leaderboard_json(std::cout, board, comparisons, correlations, hd);
    } else {
      write_leaderboard_csv(std::cout, board);
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct QualityArgs {
  Common common;
  std::string scan, mask, dir, out = "-";
  int margin = kDefaultQualityMargin;
};

int cmd_quality(const QualityArgs& a) {
  std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> inputs;
  if (!a.dir.empty()) {
    for (const auto& [id, label] : truth_files(a.dir)) {
      const fs::path scan = fs::path(a.dir) / (id + ".nrrd");
      if (label != scan && fs::exists(scan)) inputs.push_back({id, {scan, label}});
    }
  } else {
    if (a.scan.empty() || a.mask.empty()) throw Error(Errc::InvalidArgument, "give --dir or both --scan and --mask");
    inputs.push_back({fs::path(a.scan).stem().string(), {a.scan, a.mask}});
  }
  std::vector<std::optional<QualityRow>> rows(inputs.size());
  std::vector<std::string> errors(inputs.size());
  parallel_for(inputs.size(), a.common.jobs, [&](std::size_t i) {
    try {
      const Volume v = read_volume(inputs[i].second.first);
      const Mask m = read_mask(inputs[i].second.second);
      rows[i] = QualityRow{inputs[i].first, assess_quality(v, m, a.margin)};
    } catch (const std::exception& e) {
      errors[i] = inputs[i].first + ": " + e.what();
    }
  });
  std::vector<QualityRow> ok;
  int status = kExitOk;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i]) {
      ok.push_back(*rows[i]);
    } else {
      std::cerr << "segbench quality: " << errors[i] << '\n';
      status = kExitPartial;
    }
  }
  Output out(a.out);
  if (a.common.format == "json") {
    write_quality_json(out.stream(), ok);
  } else {
    write_quality_csv(out.stream(), ok);
  }
  return status;
}

// ---------------------------------------------------------------------------

struct PreprocessArgs {
  Common common;
  std::string in, out, mask, augment, out_dir;
  std::vector<std::string> ops;
  ClaheParams clahe;
  std::size_t count = 1;
  std::string encoding = "raw";
};

int cmd_preprocess(const PreprocessArgs& a) {
  Volume v = read_volume(a.in);
  for (const auto& op : a.ops) {
    if (op == "normalize") {
      v = normalize_intensity(v);
    } else if (op == "clahe") {
      v = clahe_slicewise(v, a.clahe);
    } else {
      throw Error(Errc::InvalidArgument, "unknown preprocessing op '" + op + "'");
    }
  }
  if (!a.out.empty()) write_nrrd(v, a.out, parse_encoding(a.encoding));
  if (!a.augment.empty()) {
    if (a.mask.empty() || a.out_dir.empty()) throw Error(Errc::InvalidArgument, "augmentation needs --mask and --out-dir");
    const Mask m = read_mask(a.mask);
    const auto specs = load_augmentation_config(a.augment);
    const AugmentationStream stream(v, m, specs, a.common.seed);
    fs::create_directories(a.out_dir);
    parallel_for(a.count, a.common.jobs, [&](std::size_t i) {
      const auto [av, am] = stream.variant(i);
      char name[32];
      std::snprintf(name, sizeof name, "aug_%04zu", i);
      write_nrrd(av, fs::path(a.out_dir) / (std::string(name) + ".nrrd"), parse_encoding(a.encoding));
      write_nrrd(am, fs::path(a.out_dir) / (std::string(name) + "_label.nrrd"), parse_encoding(a.encoding));
    });
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct PostprocessArgs {
  Common common;
  std::string in, out, ops;
  std::string encoding = "raw";
};

StructuringElement parse_element(const std::vector<std::string>& parts, std::size_t from) {
  StructuringElement se;
  if (parts.size() > from) {
    if (parts[from] == "cross") {
      se.shape = StructuringShape::Cross;
    } else if (parts[from] == "cube") {
      se.shape = StructuringShape::Cube;
    } else {
      throw Error(Errc::InvalidArgument, "structuring element must be cross or cube");
    }
  }
  if (parts.size() > from + 1) se.radius = std::stoi(parts[from + 1]);
  if (se.radius < 1) throw Error(Errc::InvalidArgument, "structuring element radius must be >= 1");
  return se;
}

Mask apply_postprocess(Mask m, const std::string& chain) {
  std::stringstream ss(chain);
  std::string op;
  while (std::getline(ss, op, ',')) {
    if (op.empty()) continue;
    std::vector<std::string> parts;
    std::stringstream ps(op);
    for (std::string p; std::getline(ps, p, ':');) parts.push_back(p);
    const std::string& name = parts[0];
    if (name == "largest") {
      const int c = parts.size() > 1 ? std::stoi(parts[1]) : 26;
      if (c != 6 && c != 26) throw Error(Errc::InvalidArgument, "connectivity must be 6 or 26");
      m = largest_component(m, c == 6 ? Connectivity::Six : Connectivity::TwentySix);
    } else if (name == "dilate") {
      m = dilate(m, parse_element(parts, 1));
    } else if (name == "erode") {
      m = erode(m, parse_element(parts, 1));
    } else if (name == "close") {
      m = closing(m, parse_element(parts, 1));
    } else if (name == "open") {
      m = opening(m, parse_element(parts, 1));
    } else if (name == "smooth") {
      m = smooth_surface(m, parts.size() > 1 ? std::stoi(parts[1]) : 1);
    } else {
      throw Error(Errc::InvalidArgument, "unknown postprocessing op '" + name + "'");
    }
  }
  return m;
}

int cmd_postprocess(const PostprocessArgs& a) {
  const Mask m = apply_postprocess(read_mask(a.in), a.ops);
  write_nrrd(m, a.out, parse_encoding(a.encoding));
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct PipelineArgs {
  Common common;
  std::string volume, truth, out, info = "-";
  std::string localizer = "threshold", segmenter = "threshold";
  std::vector<std::int64_t> center;
  int downsample = 4;
  std::string pred_dir, case_id;
  std::vector<std::int64_t> roi{kDefaultRoiSize.begin(), kDefaultRoiSize.end()};
  int closing_radius = 1;
  std::string encoding = "raw";
};

std::unique_ptr<Segmenter> make_segmenter(const std::string& kind, const std::string& truth, const std::string& pred_dir,
                                          const std::string& case_id, int closing_radius) {
  if (kind == "oracle") {
    if (truth.empty()) throw Error(Errc::InvalidArgument, "oracle segmenter needs --truth");
    return std::make_unique<OracleSegmenter>(read_mask(truth));
  }
  if (kind == "external") {
    if (pred_dir.empty() || case_id.empty()) throw Error(Errc::InvalidArgument, "external segmenter needs --pred-dir and --case-id");
    return std::make_unique<ExternalPredictionSegmenter>(pred_dir, case_id);
  }
  ThresholdSegmenterOptions o;
  o.closing_radius = closing_radius;
  return std::make_unique<ThresholdSegmenter>(o);
}

int cmd_pipeline(const PipelineArgs& a) {
  const Volume v = read_volume(a.volume);
  std::unique_ptr<Localizer> loc;
  if (a.localizer == "oracle") {
    if (a.truth.empty()) throw Error(Errc::InvalidArgument, "oracle localizer needs --truth");
    loc = std::make_unique<OracleLocalizer>(read_mask(a.truth));
  } else if (a.localizer == "fixed") {
    loc = a.center.empty() ? std::make_unique<FixedCenterLocalizer>()
                           : std::make_unique<FixedCenterLocalizer>(VoxelIndex{a.center[0], a.center[1], a.center[2]});
  } else {
    loc = std::make_unique<ThresholdLocalizer>(a.downsample);
  }
  const auto seg = make_segmenter(a.segmenter, a.truth, a.pred_dir, a.case_id, a.closing_radius);
  const PipelineResult r = run_pipeline_detailed(v, *loc, *seg, to_extent(a.roi));
  write_nrrd(r.mask, a.out, parse_encoding(a.encoding));

  std::optional<double> d;
  if (!a.truth.empty()) d = dice(r.mask, read_mask(a.truth));
  Output info(a.info);
  if (a.common.format == "json") {
    nlohmann::ordered_json j;
    j["localizer"] = loc->name();
    j["segmenter"] = seg->name();
    j["center"] = {r.center.x, r.center.y, r.center.z};
    j["box_origin"] = {r.box.origin.x, r.box.origin.y, r.box.origin.z};
    j["box_size"] = r.box.size;
    j["dice"] = d ? nlohmann::ordered_json(*d) : nlohmann::ordered_json(nullptr);
    info.stream() << j.dump(2) << '\n';
  } else {
    info.stream() << "localizer,segmenter,center_x,center_y,center_z,origin_x,origin_y,origin_z,size_x,size_y,size_z,dice\n"
                  << loc->name() << ',' << seg->name() << ',' << r.center.x << ',' << r.center.y << ',' << r.center.z
                  << ',' << r.box.origin.x << ',' << r.box.origin.y << ',' << r.box.origin.z << ',' << r.box.size[0]
                  << ',' << r.box.size[1] << ',' << r.box.size[2] << ',' << format_value(d) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct OffsetArgs {
  Common common;
  std::string volume, truth, out = "-";
  std::string segmenter = "oracle";
  std::vector<std::int64_t> roi{kDefaultRoiSize.begin(), kDefaultRoiSize.end()};
  std::vector<double> offsets{0, 25, 50, 75, 100, 125, 150, 175, 200};
  std::string axis = "x";
  int closing_radius = 1;
};

int cmd_offset(const OffsetArgs& a) {
  const Mask truth = read_mask(a.truth);
  const Volume v = a.volume.empty() ? Volume(truth.dims(), truth.spacing()) : read_volume(a.volume);
  if (a.volume.empty() && a.segmenter != "oracle") throw Error(Errc::InvalidArgument, "threshold segmenter needs --volume");
  const auto seg = make_segmenter(a.segmenter, a.truth, "", "", a.closing_radius);
  const auto curve = offset_sweep(v, truth, *seg, to_extent(a.roi), a.offsets, parse_axis(a.axis), a.common.jobs);
  Output out(a.out);
  if (a.common.format == "json") {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& p : curve) {
      j.push_back({{"offset_pct", p.offset_pct}, {"shift_voxels", p.shift_voxels}, {"inside", p.inside}, {"dice", p.dice}});
    }
    out.stream() << j.dump(2) << '\n';
  } else {
    out.stream() << "offset_pct,shift_voxels,inside,dice\n";
    for (const auto& p : curve) {
      out.stream() << format_value(p.offset_pct) << ',' << p.shift_voxels << ',' << p.inside << ','
                   << format_value(p.dice) << '\n';
    }
  }
  return kExitOk;
}

struct PatchArgs {
  Common common;
  std::string truth, out = "-";
  std::vector<std::string> sizes{"400x400", "360x320", "320x240", "280x200", "240x160"};
  std::int64_t z_extent = kDefaultPatchDepth;
};

int cmd_patch_size(const PatchArgs& a) {
  std::vector<std::array<std::int64_t, 2>> sizes;
  for (const auto& s : a.sizes) {
    const auto x = s.find('x');
    if (x == std::string::npos) throw Error(Errc::InvalidArgument, "patch size must look like WxH: " + s);
    sizes.push_back({std::stoll(s.substr(0, x)), std::stoll(s.substr(x + 1))});
  }
  const auto curve = patch_size_sweep(read_mask(a.truth), sizes, a.z_extent);
  Output out(a.out);
  if (a.common.format == "json") {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& p : curve) {
      j.push_back({{"wx", p.wx}, {"wy", p.wy}, {"background_pct", p.background_pct},
                   {"la_containment_pct", p.la_containment_pct}});
    }
    out.stream() << j.dump(2) << '\n';
  } else {
    out.stream() << "wx,wy,background_pct,la_containment_pct\n";
    for (const auto& p : curve) {
      out.stream() << p.wx << ',' << p.wy << ',' << format_value(p.background_pct) << ','
                   << format_value(p.la_containment_pct) << '\n';
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  Common common;
  std::string out_dir;
  std::size_t count = 1;
  std::vector<std::int64_t> dims{576, 576, 88};
  std::vector<double> spacing{0.625, 0.625, 0.625};
  std::vector<double> fractions{0.15, 0.70, 0.15};
  std::string type = "float";
  double center_jitter = 0.0, axis_jitter = 0.0;
  double mu_fg = 400, sigma_fg = 20, mu_bg = 200;
  std::string encoding = "gzip";
};

int cmd_synth(const SynthArgs& a) {
  PhantomSpec base = default_phantom_spec({a.dims[0], a.dims[1], a.dims[2]}, {a.spacing[0], a.spacing[1], a.spacing[2]});
  base.type = a.type == "uint8" ? ScalarType::UInt8 : a.type == "uint16" ? ScalarType::UInt16 : ScalarType::Float32;
  base.intensities.mu_fg = a.mu_fg;
  base.intensities.sigma_fg = a.sigma_fg;
  base.intensities.mu_bg = a.mu_bg;
  const auto plan = plan_cohort(base, a.count, {a.fractions[0], a.fractions[1], a.fractions[2]},
                                {a.center_jitter, a.axis_jitter}, a.common.seed);
  fs::create_directories(a.out_dir);
  const Encoding enc = parse_encoding(a.encoding);
  // Slices inside a phantom are generated serially; parallelism is across
  // members so peak memory stays at `jobs` phantoms.
  parallel_for(plan.size(), a.common.jobs, [&](std::size_t i) {
    const auto [v, m] = generate(plan[i].spec);
    write_nrrd(v, fs::path(a.out_dir) / (plan[i].id + ".nrrd"), enc);
    write_nrrd(m, fs::path(a.out_dir) / (plan[i].id + "_label.nrrd"), enc);
  });
  Output manifest((fs::path(a.out_dir) / (a.common.format == "json" ? "manifest.json" : "manifest.csv")).string());
  if (a.common.format == "json") {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& m : plan) j.push_back({{"id", m.id}, {"tier", std::string(to_string(m.tier))}, {"seed", m.seed}});
    manifest.stream() << j.dump(2) << '\n';
  } else {
    manifest.stream() << "id,tier,seed\n";
    for (const auto& m : plan) manifest.stream() << m.id << ',' << to_string(m.tier) << ',' << m.seed << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volumetric segmentation benchmarking toolkit", "segbench"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  const unsigned jobs = default_jobs();
  const auto encodings = CLI::IsMember({"raw", "gzip"});
  const auto axes = CLI::IsMember({"x", "y", "z"});

  EvaluateArgs ev;
  ev.common.jobs = jobs;
  auto* evaluate = app.add_subcommand("evaluate", "Score predicted masks against ground truth");
  add_common(evaluate, ev.common);
  evaluate->add_option("--pred", ev.pred_dir, "Directory of predicted masks")->required();
  evaluate->add_option("--truth", ev.truth_dir, "Directory of ground-truth masks")->required();
  evaluate->add_option("-o,--out", ev.out, "Output file ('-' for stdout)")->capture_default_str();
  evaluate->add_option("--hausdorff", ev.hausdorff)->check(CLI::IsMember({"symmetric", "directed"}))->capture_default_str();
  evaluate->add_option("--diameter-axis", ev.axis)->check(axes)->capture_default_str();

  RankArgs rk;
  rk.common.jobs = jobs;
  auto* rank = app.add_subcommand("rank", "Build a leaderboard from per-team metrics");
  add_common(rank, rk.common);
  auto* metrics_opt = rank->add_option("--metrics", rk.metrics, "Per-case metrics CSV per team ([team=]path)");
  auto* summary_opt = rank->add_option("--summary", rk.summary, "Published-style summary CSV (mean (std) cells)");
  metrics_opt->excludes(summary_opt);
  rank->add_option("--attributes", rk.attributes, "CSV mapping team_id to attribute tags");
  rank->add_option("--quality", rk.quality, "Quality CSV (scan_id,snr,...) for the snr/Dice correlation");
  rank->add_option("--group-by", rk.group_by, "Attributes to compare (default: all)");
  rank->add_option("--compare-metric", rk.compare_metric)->capture_default_str();
  rank->add_option("--out-csv", rk.out_csv);
  rank->add_option("--out-json", rk.out_json);
  rank->add_option("--hausdorff", rk.hausdorff, "Hausdorff variant recorded in the report")
      ->check(CLI::IsMember({"symmetric", "directed"}))
      ->capture_default_str();

  QualityArgs qa;
  qa.common.jobs = jobs;
  auto* quality = app.add_subcommand("quality", "Assess scan quality (snr, cr, het, band)");
  add_common(quality, qa.common);
  quality->add_option("--scan", qa.scan);
  quality->add_option("--mask", qa.mask);
  quality->add_option("--dir", qa.dir, "Directory of <id>.nrrd / <id>_label.nrrd pairs");
  quality->add_option("--margin", qa.margin)->capture_default_str();
  quality->add_option("-o,--out", qa.out)->capture_default_str();

  PreprocessArgs pp;
  pp.common.jobs = jobs;
  auto* preprocess = app.add_subcommand("preprocess", "Normalise, equalise or augment a scan");
  add_common(preprocess, pp.common);
  preprocess->add_option("--in", pp.in)->required();
  preprocess->add_option("--out", pp.out, "Preprocessed volume");
  preprocess->add_option("--ops", pp.ops, "Ordered ops: normalize, clahe")->delimiter(',');
  preprocess->add_option("--tiles-x", pp.clahe.tiles_x)->capture_default_str();
  preprocess->add_option("--tiles-y", pp.clahe.tiles_y)->capture_default_str();
  preprocess->add_option("--clip", pp.clahe.clip_limit)->capture_default_str();
  preprocess->add_option("--bins", pp.clahe.bins)->capture_default_str();
  preprocess->add_option("--mask", pp.mask, "Mask transformed alongside augmentations");
  preprocess->add_option("--augment", pp.augment, "Augmentation JSON config");
  preprocess->add_option("--count", pp.count, "Number of augmented variants")->capture_default_str();
  preprocess->add_option("--out-dir", pp.out_dir, "Directory for augmented variants");
  preprocess->add_option("--encoding", pp.encoding)->check(encodings)->capture_default_str();

  PostprocessArgs po;
  po.common.jobs = jobs;
  auto* postprocess = app.add_subcommand("postprocess", "Clean up a mask with a chain of operators");
  add_common(postprocess, po.common);
  postprocess->add_option("--in", po.in)->required();
  postprocess->add_option("--out", po.out)->required();
  postprocess->add_option("--ops", po.ops,
                          "Comma-separated chain, e.g. largest:26,dilate:cross:1,erode:cube:1,close:cross:1,open,smooth:2")
      ->required();
  postprocess->add_option("--encoding", po.encoding)->check(encodings)->capture_default_str();

  PipelineArgs pl;
  pl.common.jobs = jobs;
  auto* pipeline = app.add_subcommand("pipeline", "Localise, crop, segment and pad back");
  add_common(pipeline, pl.common);
  pipeline->add_option("--volume", pl.volume)->required();
  pipeline->add_option("--out", pl.out, "Output mask")->required();
  pipeline->add_option("--truth", pl.truth, "Ground truth (oracle stages, Dice report)");
  pipeline->add_option("--localizer", pl.localizer)->check(CLI::IsMember({"threshold", "oracle", "fixed"}))->capture_default_str();
  pipeline->add_option("--center", pl.center, "Fixed centre x,y,z")->delimiter(',')->expected(3);
  pipeline->add_option("--downsample", pl.downsample)->capture_default_str();
  pipeline->add_option("--segmenter", pl.segmenter)->check(CLI::IsMember({"threshold", "oracle", "external"}))->capture_default_str();
  pipeline->add_option("--pred-dir", pl.pred_dir);
  pipeline->add_option("--case-id", pl.case_id);
  pipeline->add_option("--roi", pl.roi, "ROI size wx,wy,wz")->delimiter(',')->expected(3)->capture_default_str();
  pipeline->add_option("--closing-radius", pl.closing_radius)->capture_default_str();
  pipeline->add_option("--info", pl.info, "Run summary output ('-' for stdout)")->capture_default_str();
  pipeline->add_option("--encoding", pl.encoding)->check(encodings)->capture_default_str();

  auto* experiment = app.add_subcommand("experiment", "ROI offset and patch-size sweeps");
  experiment->require_subcommand(1);
  OffsetArgs of;
  of.common.jobs = jobs;
  auto* offset = experiment->add_subcommand("offset", "Dice as the atrium moves off the ROI centre");
  add_common(offset, of.common);
  offset->add_option("--truth", of.truth)->required();
  offset->add_option("--volume", of.volume, "Scan (needed by the threshold segmenter)");
  offset->add_option("--segmenter", of.segmenter)->check(CLI::IsMember({"oracle", "threshold"}))->capture_default_str();
  offset->add_option("--roi", of.roi)->delimiter(',')->expected(3)->capture_default_str();
  offset->add_option("--offsets", of.offsets, "Offsets in percent")->delimiter(',')->capture_default_str();
  offset->add_option("--axis", of.axis)->check(axes)->capture_default_str();
  offset->add_option("--closing-radius", of.closing_radius)->capture_default_str();
  offset->add_option("-o,--out", of.out)->capture_default_str();
  PatchArgs pa;
  pa.common.jobs = jobs;
  auto* patch = experiment->add_subcommand("patch-size", "Background share and containment per patch size");
  add_common(patch, pa.common);
  patch->add_option("--truth", pa.truth)->required();
  patch->add_option("--sizes", pa.sizes, "Sizes WxH")->delimiter(',')->capture_default_str();
  patch->add_option("--z-extent", pa.z_extent)->capture_default_str();
  patch->add_option("-o,--out", pa.out)->capture_default_str();

  SynthArgs sy;
  sy.common.jobs = jobs;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic atrium cohort");
  add_common(synth, sy.common);
  synth->add_option("--out-dir", sy.out_dir)->required();
  synth->add_option("--count", sy.count)->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--dims", sy.dims)->delimiter(',')->expected(3)->capture_default_str();
  synth->add_option("--spacing", sy.spacing)->delimiter(',')->expected(3)->capture_default_str();
  synth->add_option("--fractions", sy.fractions, "high,medium,low tier fractions")->delimiter(',')->expected(3)->capture_default_str();
  synth->add_option("--type", sy.type)->check(CLI::IsMember({"float", "uint16", "uint8"}))->capture_default_str();
  synth->add_option("--center-jitter", sy.center_jitter, "mm")->capture_default_str();
  synth->add_option("--axis-jitter", sy.axis_jitter, "relative")->capture_default_str();
  synth->add_option("--mu-fg", sy.mu_fg)->capture_default_str();
  synth->add_option("--sigma-fg", sy.sigma_fg)->capture_default_str();
  synth->add_option("--mu-bg", sy.mu_bg)->capture_default_str();
  synth->add_option("--encoding", sy.encoding)->check(encodings)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << e.what() << "\n\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    std::cerr << (sub ? sub->help() : app.help());
    return kExitUsage;
  }

  try {
    if (*evaluate) return cmd_evaluate(ev);
    if (*rank) {
      if (rk.metrics.empty() && rk.summary.empty()) {
        std::cerr << "rank needs --metrics or --summary\n\n" << rank->help();
        return kExitUsage;
      }
      return cmd_rank(rk);
    }
    if (*quality) {
      if (qa.dir.empty() && (qa.scan.empty() || qa.mask.empty())) {
        std::cerr << "quality needs --dir or both --scan and --mask\n\n" << quality->help();
        return kExitUsage;
      }
      return cmd_quality(qa);
    }
    if (*preprocess) return cmd_preprocess(pp);
    if (*postprocess) return cmd_postprocess(po);
    if (*pipeline) return cmd_pipeline(pl);
    if (*offset) return cmd_offset(of);
    if (*patch) return cmd_patch_size(pa);
    if (*synth) return cmd_synth(sy);
  } catch (const std::exception& e) {
    std::cerr << "segbench: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
