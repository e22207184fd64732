// cellseg command-line frontend. JSON results go to stdout, diagnostics to
// stderr. Exit codes: 0 ok, 2 bad flags or parameters, 3 I/O or format,
// 4 dimension mismatch, 5 constant image (pcc undefined).

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cellseg/cellseg.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

enum Exit : int { kOk = 0, kInternal = 1, kBadFlags = 2, kIo = 3, kMismatch = 4, kConstant = 5 };

int exit_code_for(cellseg::ErrorCode code) {
  using cellseg::ErrorCode;
  switch (code) {
    case ErrorCode::UnsupportedFormat:
    case ErrorCode::CorruptFile:
    case ErrorCode::DimensionOverflow:
    case ErrorCode::RangeError:
    case ErrorCode::IoError:
    case ErrorCode::LabelOverflow:
      return kIo;
    case ErrorCode::DimensionMismatch:
    case ErrorCode::MarkerExceedsMask:
    case ErrorCode::SeedOutsideMask:
      return kMismatch;
    case ErrorCode::ConstantImage:
      return kConstant;
    default:
      return kBadFlags;
  }
}

std::string threshold_grid_text() {
  std::ostringstream s;
  s << "mAP thresholds (10): {";
  const auto& grid = cellseg::map_thresholds();
  for (std::size_t i = 0; i < grid.size(); ++i) s << (i ? ", " : "") << std::fixed << std::setprecision(2) << grid[i];
  s << "}";
  return s.str();
}

std::string footer_text() {
  return "Pipeline defaults: h=10, threshold=0.5, activation=standard, connectivity=8.\n" + threshold_grid_text() +
         "\nExit codes: 0 ok, 2 bad flags, 3 I/O, 4 dimension mismatch, 5 constant image.\n"
         "CELLSEG_THREADS caps worker threads (0 or unset = all cores).";
}

void print_json(const ordered_json& j) { std::cout << j.dump() << '\n'; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out.flush()) throw cellseg::Error(cellseg::ErrorCode::IoError, "cannot write " + path.string());
}

// ---------------------------------------------------------------------------
// postprocess

struct PostprocessArgs {
  std::string distance;
  std::string semantic;
  std::string out;
  double h = 10.0;
  double threshold = 0.5;
  std::string activation = "standard";
  int connectivity = 8;
  bool flood_on_hmax = false;
};

cellseg::Connectivity to_connectivity(int c) {
  return c == 4 ? cellseg::Connectivity::Four : cellseg::Connectivity::Eight;
}

int run_postprocess(const PostprocessArgs& a) {
  cellseg::PipelineConfig cfg;
  cfg.h = a.h;
  cfg.semantic_threshold = a.threshold;
  cfg.activation = a.activation == "shifted" ? cellseg::Activation::Shifted : cellseg::Activation::Standard;
  cfg.connectivity = to_connectivity(a.connectivity);
  cfg.flood_on_hmax = a.flood_on_hmax;
  cfg.validate();
  cellseg::format_from_extension(a.out);
  const cellseg::Raster dist = cellseg::load_raster(a.distance);
  const cellseg::Raster sem = cellseg::load_raster(a.semantic);
  const cellseg::LabelMap labels = cellseg::instance_segment(dist, sem, cfg);
  cellseg::save_labels(labels, a.out);
  print_json({{"instances", cellseg::count_instances(labels)}});
  return kOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string gt;
  std::string pred;
  std::string metric = "map";
  std::string manifest;
  std::string json_out;
  std::string csv_out;
  bool pooled = false;
};

struct ManifestRow {
  std::string id;
  fs::path gt;
  fs::path pred;
  std::optional<fs::path> dist;
  std::optional<fs::path> semantic;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  for (auto& c : cells) {
    while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
    while (!c.empty() && c.front() == ' ') c.erase(c.begin());
  }
  return cells;
}

// Columns: id, gt labels, pred labels [, pred distance [, pred semantic]].
// A header row starting with "id" or "image_id" is skipped. Relative paths
// resolve against the manifest's directory.
std::vector<ManifestRow> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw cellseg::Error(cellseg::ErrorCode::IoError, "cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  std::vector<ManifestRow> rows;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    const auto cells = split_csv_line(line);
    if (first && (cells[0] == "id" || cells[0] == "image_id")) {
      first = false;
      continue;
    }
    first = false;
    if (cells.size() < 3 || cells.size() > 5 || cells[0].empty()) {
      throw cellseg::Error(cellseg::ErrorCode::InvalidArgument,
                           path.string() + ":" + std::to_string(line_no) + ": expected 3 to 5 columns");
    }
    if (!seen.insert(cells[0]).second) {
      throw cellseg::Error(cellseg::ErrorCode::InvalidArgument, "duplicate image id " + cells[0]);
    }
    ManifestRow row{cells[0], resolve(cells[1]), resolve(cells[2]), std::nullopt, std::nullopt};
    if (cells.size() > 3 && !cells[3].empty()) row.dist = resolve(cells[3]);
    if (cells.size() > 4 && !cells[4].empty()) row.semantic = resolve(cells[4]);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw cellseg::Error(cellseg::ErrorCode::EmptyInput, "manifest has no rows");
  return rows;
}

struct EvaluatedRow {
  cellseg::ImageRecord record;
  cellseg::PixelOverlap overlap;
};

EvaluatedRow evaluate_row(const ManifestRow& row) {
  const cellseg::LabelMap gt = cellseg::load_labels(row.gt);
  const cellseg::LabelMap pred = cellseg::load_labels(row.pred);
  cellseg::require_same_shape(gt, pred, "evaluate");
  EvaluatedRow out;
  out.record.id = row.id;
  const auto curve = cellseg::precision_curve(gt, pred);
  out.record.precisions.assign(curve.begin(), curve.end());
  out.record.map = cellseg::mean_of(curve);
  const cellseg::BinaryMask pred_mask =
      row.semantic ? cellseg::nonzero(cellseg::load_raster(*row.semantic)) : cellseg::foreground(pred);
  out.overlap = cellseg::pixel_overlap(cellseg::foreground(gt), pred_mask);
  out.record.iou = out.overlap.union_ == 0 ? 1.0
                                           : static_cast<double>(out.overlap.intersection) /
                                                 static_cast<double>(out.overlap.union_);
  if (row.dist) out.record.pcc = cellseg::pcc(cellseg::distance_map(gt), cellseg::load_raster(*row.dist));
  return out;
}

int run_manifest(const EvaluateArgs& a) {
  const auto rows = read_manifest(a.manifest);
  std::vector<EvaluatedRow> results(rows.size());
  cellseg::parallel_for(rows.size(), cellseg::thread_count(), [&](std::size_t i) {
    try {
      results[i] = evaluate_row(rows[i]);
    } catch (const cellseg::Error& e) {
      throw cellseg::Error(e.code(), rows[i].id + ": " + e.what());
    }
  });
  std::vector<cellseg::ImageRecord> records;
  std::uint64_t inter = 0;
  std::uint64_t uni = 0;
  for (auto& r : results) {
    inter += r.overlap.intersection;
    uni += r.overlap.union_;
    records.push_back(std::move(r.record));
  }
  cellseg::MetricsReport report = cellseg::summarize(std::move(records));
  if (a.pooled) report.pooled_iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  const ordered_json j = cellseg::to_json(report);
  if (!a.json_out.empty()) write_text(a.json_out, j.dump(2) + "\n");
  if (!a.csv_out.empty()) write_text(a.csv_out, cellseg::to_csv(report));
  print_json(j);
  return kOk;
}

int run_evaluate(const EvaluateArgs& a) {
  if (!a.manifest.empty()) return run_manifest(a);
  if (a.gt.empty() || a.pred.empty()) {
    throw cellseg::Error(cellseg::ErrorCode::InvalidArgument, "--gt and --pred are required without --manifest");
  }
  double value = 0.0;
  if (a.metric == "map") {
    value = cellseg::map_score(cellseg::load_labels(a.gt), cellseg::load_labels(a.pred));
  } else if (a.metric == "iou") {
    value = cellseg::iou(cellseg::nonzero(cellseg::load_raster(a.gt)), cellseg::nonzero(cellseg::load_raster(a.pred)));
  } else {
    value = cellseg::pcc(cellseg::load_raster(a.gt), cellseg::load_raster(a.pred));
  }
  ordered_json j{{"metric", a.metric}, {"value", value}};
  if (!a.json_out.empty()) write_text(a.json_out, j.dump(2) + "\n");
  print_json(j);
  return kOk;
}

// ---------------------------------------------------------------------------
// distmap / project

struct DistmapArgs {
  std::string labels;
  std::string out;
  bool normalize = false;
};

int run_distmap(const DistmapArgs& a) {
  cellseg::format_from_extension(a.out);
  const cellseg::LabelMap labels = cellseg::load_labels(a.labels);
  const cellseg::Raster d = cellseg::distance_map(labels, a.normalize);
  cellseg::save_raster(d, a.out);
  float peak = 0.0f;
  for (float v : d) peak = std::max(peak, v);
  print_json({{"instances", cellseg::count_instances(labels)}, {"max", peak}});
  return kOk;
}

struct ProjectArgs {
  std::vector<std::string> planes;
  std::string out;
};

int run_project(const ProjectArgs& a) {
  cellseg::format_from_extension(a.out);
  std::vector<cellseg::Raster> planes;
  for (const auto& p : a.planes) planes.push_back(cellseg::load_raster(p));
  const cellseg::Raster proj = cellseg::max_project(std::move(planes));
  cellseg::save_raster(proj, a.out);
  print_json({{"planes", a.planes.size()}, {"width", proj.width()}, {"height", proj.height()}});
  return kOk;
}

// ---------------------------------------------------------------------------
// crop

struct CropArgs {
  std::vector<std::string> images;
  std::vector<std::string> labels;
  std::vector<std::string> ids;
  std::size_t size = 512;
  std::size_t count = 5;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string manifest;
  bool require_instances = false;
};

struct CropOutcome {
  std::vector<cellseg::CropOffset> kept;
};

int run_crop(const CropArgs& a) {
  if (!a.labels.empty() && a.labels.size() != a.images.size()) {
    throw cellseg::Error(cellseg::ErrorCode::InvalidArgument, "--labels must be given once per --image");
  }
  if (!a.ids.empty() && a.ids.size() != a.images.size()) {
    throw cellseg::Error(cellseg::ErrorCode::InvalidArgument, "--id must be given once per --image");
  }
  if (a.require_instances && a.labels.empty()) {
    throw cellseg::Error(cellseg::ErrorCode::InvalidArgument, "--require-instances needs --labels");
  }
  std::vector<std::string> ids = a.ids;
  if (ids.empty()) {
    for (const auto& p : a.images) ids.push_back(fs::path(p).stem().string());
  }
  std::set<std::string> unique(ids.begin(), ids.end());
  if (unique.size() != ids.size()) throw cellseg::Error(cellseg::ErrorCode::InvalidArgument, "image ids must be unique");
  const cellseg::CropSpec spec{a.count, a.size, a.seed};
  if (spec.count == 0) throw cellseg::Error(cellseg::ErrorCode::InvalidArgument, "--count must be >= 1");

  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw cellseg::Error(cellseg::ErrorCode::IoError, "cannot create " + a.out_dir + ": " + ec.message());
  const fs::path dir(a.out_dir);

  std::vector<CropOutcome> outcomes(a.images.size());
  cellseg::parallel_for(a.images.size(), cellseg::thread_count(), [&](std::size_t i) {
    const cellseg::Raster img = cellseg::load_raster(a.images[i]);
    std::optional<cellseg::LabelMap> labels;
    if (!a.labels.empty()) {
      labels = cellseg::load_labels(a.labels[i]);
      cellseg::require_same_shape(img, *labels, "crop");
    }
    for (const auto& o : cellseg::crop_offsets(img.width(), img.height(), spec, ids[i])) {
      const std::string stem = ids[i] + "_crop" + std::to_string(o.index);
      if (labels) {
        const cellseg::LabelMap lc = cellseg::crop(*labels, o.x, o.y, spec.size, spec.size);
        if (a.require_instances && !cellseg::has_instances(lc)) continue;
        cellseg::save_labels(lc, dir / (stem + "_labels.ras"));
      }
      cellseg::save_raster(cellseg::crop(img, o.x, o.y, spec.size, spec.size), dir / (stem + ".ras"));
      outcomes[i].kept.push_back(o);
    }
  });

  std::ostringstream csv;
  csv << "image_id,crop_index,x_offset,y_offset,size\n";
  std::size_t written = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    for (const auto& o : outcomes[i].kept) {
      csv << ids[i] << ',' << o.index << ',' << o.x << ',' << o.y << ',' << spec.size << '\n';
      ++written;
    }
  }
  const fs::path manifest = a.manifest.empty() ? dir / "crops.csv" : fs::path(a.manifest);
  write_text(manifest, csv.str());
  print_json({{"crops", written}, {"manifest", manifest.string()}});
  return kOk;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::size_t width = 512;
  std::size_t height = 512;
  std::size_t cells = 30;
  int min_radius = 14;
  int max_radius = 24;
  double min_peak = 0.0;
  std::string policy = "touching";
  std::uint64_t seed = 0;
  std::string out_dir;
};

int run_synth(const SynthArgs& a) {
  cellseg::SynthSpec spec;
  spec.width = a.width;
  spec.height = a.height;
  spec.cells = a.cells;
  spec.min_radius = a.min_radius;
  spec.max_radius = a.max_radius;
  spec.min_peak = a.min_peak;
  spec.policy = a.policy == "disjoint" ? cellseg::OverlapPolicy::Disjoint : cellseg::OverlapPolicy::TouchingAllowed;
  spec.seed = a.seed;
  const cellseg::SynthResult s = cellseg::synth_instances(spec);
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw cellseg::Error(cellseg::ErrorCode::IoError, "cannot create " + a.out_dir + ": " + ec.message());
  const fs::path dir(a.out_dir);
  cellseg::save_labels(s.labels, dir / "labels.ras");
  cellseg::save_raster(s.distance, dir / "distance.ras");
  cellseg::save_raster(cellseg::to_raster(s.semantic), dir / "semantic.ras", cellseg::FileFormat::Ras,
                       cellseg::RasDtype::U8);
  cellseg::save_raster(cellseg::saturated_logits(s.semantic), dir / "logits.ras");
  print_json({{"cells", cellseg::count_instances(s.labels)}, {"out", dir.string()}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distance-map instance segmentation post-processing and evaluation"};
  app.set_version_flag("--version", std::string(cellseg::kVersion));
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  const std::string footer = footer_text();
  app.footer(footer);

  PostprocessArgs pp;
  auto* post = app.add_subcommand("postprocess", "Threshold semantic logits, seed with h-maxima, flood instances");
  // "--h" is the h-maxima height, so help is long-form only here.
  post->set_help_flag("--help", "Print this help message and exit");
  post->add_option("--distance", pp.distance, "Predicted distance map (RAS or PNG)")->required();
  post->add_option("--semantic", pp.semantic, "Predicted semantic logits (RAS or PNG)")->required();
  post->add_option("--out", pp.out, "Output label map (.ras u32 or .png 16-bit)")->required();
  post->add_option("--h", pp.h, "h-maxima height (must be >= 0)");
  post->add_option("--threshold", pp.threshold, "Probability cut on the activated logits, in (0, 1)");
  post->add_option("--activation", pp.activation, "standard or shifted sigmoid")
      ->check(CLI::IsMember({"standard", "shifted"}));
  post->add_option("--connectivity", pp.connectivity, "Pixel connectivity, 4 or 8")->check(CLI::IsMember({4, 8}));
  post->add_flag("--flood-on-hmax", pp.flood_on_hmax, "Flood the h-maxima transformed map instead of the raw map");

  EvaluateArgs ev;
  auto* eval = app.add_subcommand("evaluate", "Score predictions with map, iou or pcc");
  eval->add_option("--gt", ev.gt, "Ground truth (labels for map, mask for iou, raster for pcc)");
  eval->add_option("--pred", ev.pred, "Prediction, same kind as --gt");
  eval->add_option("--metric", ev.metric, "map, iou or pcc")->check(CLI::IsMember({"map", "iou", "pcc"}));
  eval->add_option("--manifest", ev.manifest,
                   "CSV rows: id,gt_labels,pred_labels[,pred_distance[,pred_semantic]]; emits the full report");
  eval->add_option("--json", ev.json_out, "Also write the JSON result to this file");
  eval->add_option("--csv", ev.csv_out, "With --manifest, write the report as CSV");
  eval->add_flag("--pooled", ev.pooled, "With --manifest, add dataset-pooled IoU next to the per-image mean");

  DistmapArgs dm;
  auto* dist = app.add_subcommand("distmap", "Exact per-instance Euclidean distance map of a label map");
  dist->add_option("--labels", dm.labels, "Input label map")->required();
  dist->add_option("--out", dm.out, "Output raster (.ras f32)")->required();
  dist->add_flag("--normalize", dm.normalize, "Scale each instance to a peak of 1");

  ProjectArgs pj;
  auto* proj = app.add_subcommand("project", "Maximum intensity projection of z-planes");
  proj->add_option("--plane", pj.planes, "Input plane, repeat once per z-plane")->required();
  proj->add_option("--out", pj.out, "Output raster")->required();

  CropArgs cr;
  auto* crop = app.add_subcommand("crop", "Seeded random square crops plus a manifest CSV");
  crop->add_option("--image", cr.images, "Input image, repeatable")->required();
  crop->add_option("--labels", cr.labels, "Paired label map, once per --image");
  crop->add_option("--id", cr.ids, "Image id, once per --image (default: file stem)");
  crop->add_option("--size", cr.size, "Crop edge length in pixels");
  crop->add_option("--count", cr.count, "Crops per image");
  crop->add_option("--seed", cr.seed, "RNG seed; offsets depend only on (seed, id, crop index)");
  crop->add_option("--out", cr.out_dir, "Output directory")->required();
  crop->add_option("--manifest", cr.manifest, "Manifest path (default: <out>/crops.csv)");
  crop->add_flag("--require-instances", cr.require_instances, "Drop crops whose labels contain no instance");

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Synthetic instances with exact distance targets");
  synth->add_option("--width", sy.width, "Canvas width");
  synth->add_option("--height", sy.height, "Canvas height");
  synth->add_option("--cells", sy.cells, "Number of cells");
  synth->add_option("--min-radius", sy.min_radius, "Smallest disc radius");
  synth->add_option("--max-radius", sy.max_radius, "Largest disc radius");
  synth->add_option("--min-peak", sy.min_peak, "Reject radii whose distance peak is below this");
  synth->add_option("--policy", sy.policy, "touching or disjoint")->check(CLI::IsMember({"touching", "disjoint"}));
  synth->add_option("--seed", sy.seed, "RNG seed");
  synth->add_option("--out", sy.out_dir, "Output directory (labels, distance, semantic, logits .ras)")->required();

  for (auto* sub : {post, eval, dist, proj, crop, synth}) sub->footer(footer);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kBadFlags;
  }

  try {
    if (*post) return run_postprocess(pp);
    if (*eval) return run_evaluate(ev);
    if (*dist) return run_distmap(dm);
    if (*proj) return run_project(pj);
    if (*crop) return run_crop(cr);
    if (*synth) return run_synth(sy);
  } catch (const cellseg::Error& e) {
    std::cerr << "cellseg: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "cellseg: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "cellseg: internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kBadFlags;
}
