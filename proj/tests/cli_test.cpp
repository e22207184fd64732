#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cellseg/cellseg.hpp"
#include "test_util.hpp"

namespace cellseg {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

struct RunResult {
  int code;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunResult run_cli(const std::string& args, const TempDir& dir) {
  const fs::path out = dir / "stdout.txt";
  const std::string cmd =
      std::string("\"") + CELLSEG_CLI_PATH + "\" " + args + " > \"" + out.string() + "\" 2> \"" + (dir / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out)};
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

struct SynthFixture {
  fs::path labels, distance, logits;
};

SynthFixture write_synth(const TempDir& dir, std::size_t size = 96, std::size_t cells = 4) {
  SynthSpec spec;
  spec.width = size;
  spec.height = size;
  spec.cells = cells;
  spec.min_radius = 8;
  spec.max_radius = 12;
  spec.seed = 5;
  const SynthResult s = synth_instances(spec);
  SynthFixture f{dir / "gt.ras", dir / "dist.ras", dir / "logits.ras"};
  save_labels(s.labels, f.labels);
  save_raster(s.distance, f.distance);
  save_raster(saturated_logits(s.semantic), f.logits);
  return f;
}

TEST(CliTest, HelpDocumentsDefaultsOnEverySubcommand) {
  TempDir dir;
  for (const char* sub : {"postprocess", "evaluate", "distmap", "project", "crop", "synth"}) {
    const RunResult r = run_cli(std::string(sub) + " --help", dir);
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("h=10"), std::string::npos) << sub;
    EXPECT_NE(r.out.find("0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95"), std::string::npos) << sub;
  }
}

TEST(CliTest, UnknownFlagIsExit2) {
  TempDir dir;
  EXPECT_EQ(run_cli("postprocess --bogus", dir).code, 2);
  EXPECT_EQ(run_cli("", dir).code, 2);
}

TEST(CliTest, PostprocessHappyPath) {
  TempDir dir;
  const SynthFixture f = write_synth(dir);
  const fs::path out = dir / "inst.ras";
  const RunResult r = run_cli("postprocess --distance " + q(f.distance) + " --semantic " + q(f.logits) + " --h 2 --out " + q(out), dir);
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  const LabelMap labels = load_labels(out);
  EXPECT_EQ(j.at("instances").get<std::size_t>(), count_instances(labels));
  EXPECT_EQ(count_instances(labels), 4u);
}

TEST(CliTest, PostprocessErrors) {
  TempDir dir;
  const SynthFixture f = write_synth(dir);
  save_raster(Raster(10, 10, 1.0f), dir / "small.ras");
  const fs::path out = dir / "inst.ras";
  EXPECT_EQ(run_cli("postprocess --distance " + q(dir / "small.ras") + " --semantic " + q(f.logits) + " --out " + q(out), dir).code, 4);
  EXPECT_EQ(run_cli("postprocess --distance " + q(f.distance) + " --semantic " + q(f.logits) + " --h -1 --out " + q(out), dir).code, 2);
  EXPECT_EQ(run_cli("postprocess --distance " + q(f.distance) + " --semantic " + q(f.logits) + " --connectivity 6 --out " + q(out), dir).code, 2);
  EXPECT_EQ(run_cli("postprocess --distance " + q(dir / "missing.ras") + " --semantic " + q(f.logits) + " --out " + q(out), dir).code, 3);
}

TEST(CliTest, EvaluateIdenticalMap) {
  TempDir dir;
  const SynthFixture f = write_synth(dir);
  const RunResult r = run_cli("evaluate --gt " + q(f.labels) + " --pred " + q(f.labels) + " --metric map", dir);
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("metric"), "map");
  EXPECT_EQ(j.at("value").get<double>(), 1.0);
}

TEST(CliTest, EvaluatePccConstantIsExit5) {
  TempDir dir;
  const SynthFixture f = write_synth(dir);
  save_raster(Raster(96, 96, 3.0f), dir / "flat.ras");
  EXPECT_EQ(run_cli("evaluate --gt " + q(dir / "flat.ras") + " --pred " + q(f.distance) + " --metric pcc", dir).code, 5);
  const RunResult ok = run_cli("evaluate --gt " + q(f.distance) + " --pred " + q(f.distance) + " --metric pcc", dir);
  ASSERT_EQ(ok.code, 0);
  EXPECT_DOUBLE_EQ(nlohmann::json::parse(ok.out).at("value").get<double>(), 1.0);
}

TEST(CliTest, EvaluateManifestReport) {
  TempDir dir;
  const SynthFixture f = write_synth(dir);
  LabelMap shifted = load_labels(f.labels);
  LabelMap moved(shifted.width(), shifted.height(), 0);
  for (std::size_t y = 0; y < shifted.height(); ++y) {
    for (std::size_t x = 1; x < shifted.width(); ++x) moved(x, y) = shifted(x - 1, y);
  }
  save_labels(moved, dir / "moved.ras");
  {
    std::ofstream m(dir / "manifest.csv");
    m << "image_id,gt,pred,distance\n";
    m << "b,gt.ras,gt.ras,dist.ras\n";
    m << "a,gt.ras,moved.ras\n";
    m << "c," << (dir / "moved.ras").string() << ",gt.ras\n";
  }
  const RunResult r = run_cli("evaluate --manifest " + q(dir / "manifest.csv") + " --pooled --csv " + q(dir / "r.csv") +
                                  " --json " + q(dir / "r.json"),
                              dir);
  ASSERT_EQ(r.code, 0) << slurp(dir / "stderr.txt");
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_EQ(j.at("images").size(), 3u);
  EXPECT_EQ(j.at("images")[0].at("id"), "b");
  EXPECT_EQ(j.at("images")[1].at("id"), "a");
  EXPECT_EQ(j.at("images")[0].at("map").get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(j.at("images")[0].at("pcc").get<double>(), 1.0);
  EXPECT_EQ(j.at("aggregate").at("map").at("count").get<int>(), 3);
  EXPECT_EQ(j.at("aggregate").at("pcc").at("count").get<int>(), 1);
  EXPECT_TRUE(j.contains("pooled_iou"));
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "r.json")), j);
  const std::string csv = slurp(dir / "r.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "image_id,iou,map,p50,p55,p60,p65,p70,p75,p80,p85,p90,p95,pcc");
}

TEST(CliTest, DistmapSinglePixel) {
  TempDir dir;
  LabelMap one(7, 5, 0);
  one(3, 2) = 9;
  save_labels(one, dir / "one.ras");
  ASSERT_EQ(run_cli("distmap --labels " + q(dir / "one.ras") + " --out " + q(dir / "d.ras"), dir).code, 0);
  Raster expect(7, 5, 0.0f);
  expect(3, 2) = 1.0f;
  EXPECT_EQ(load_raster(dir / "d.ras"), expect);
}

TEST(CliTest, ProjectMatchesLibrary) {
  TempDir dir;
  std::mt19937 rng(2);
  std::vector<Raster> planes;
  std::string args = "project";
  for (int z = 0; z < 4; ++z) {
    Raster p(20, 12);
    for (auto& v : p) v = static_cast<float>(rng() % 1000);
    const fs::path path = dir / ("z" + std::to_string(z) + ".png");
    save_raster(p, path);
    planes.push_back(p);
    args += " --plane " + q(path);
  }
  ASSERT_EQ(run_cli(args + " --out " + q(dir / "mip.ras"), dir).code, 0);
  EXPECT_EQ(load_raster(dir / "mip.ras"), max_project(planes));
}

TEST(CliTest, CropWritesManifestAndRejectsOversize) {
  TempDir dir;
  const SynthFixture f = write_synth(dir);
  const RunResult r = run_cli("crop --image " + q(f.distance) + " --labels " + q(f.labels) +
                                  " --id img7 --size 32 --count 3 --seed 11 --out " + q(dir / "crops"),
                              dir);
  ASSERT_EQ(r.code, 0) << slurp(dir / "stderr.txt");
  std::istringstream manifest(slurp(dir / "crops" / "crops.csv"));
  std::string line;
  std::getline(manifest, line);
  EXPECT_EQ(line, "image_id,crop_index,x_offset,y_offset,size");
  const auto offsets = crop_offsets(96, 96, CropSpec{3, 32, 11}, "img7");
  const Raster dist = load_raster(f.distance);
  for (const auto& o : offsets) {
    ASSERT_TRUE(std::getline(manifest, line));
    EXPECT_EQ(line, "img7," + std::to_string(o.index) + "," + std::to_string(o.x) + "," + std::to_string(o.y) + ",32");
    const fs::path crop_path = dir / "crops" / ("img7_crop" + std::to_string(o.index) + ".ras");
    EXPECT_EQ(load_raster(crop_path), crop(dist, o.x, o.y, 32, 32));
  }

  save_raster(Raster(2160, 2160, 0.0f), dir / "big.ras");
  EXPECT_EQ(run_cli("crop --image " + q(dir / "big.ras") + " --size 4096 --out " + q(dir / "c2"), dir).code, 2);
}

TEST(CliTest, SynthIsSeeded) {
  TempDir dir;
  const std::string base = "synth --width 128 --height 128 --cells 5 --min-radius 6 --max-radius 10 --seed 3 --out ";
  ASSERT_EQ(run_cli(base + q(dir / "a"), dir).code, 0);
  ASSERT_EQ(run_cli(base + q(dir / "b"), dir).code, 0);
  for (const char* leaf : {"labels.ras", "distance.ras", "semantic.ras", "logits.ras"}) {
    EXPECT_EQ(slurp(dir / "a" / leaf), slurp(dir / "b" / leaf)) << leaf;
  }
  EXPECT_EQ(count_instances(load_labels(dir / "a" / "labels.ras")), 5u);
  EXPECT_EQ(run_cli("synth --width 40 --height 40 --cells 50 --min-radius 8 --max-radius 8 --out " + q(dir / "c"), dir).code, 2);
}

}  // namespace
}  // namespace cellseg
