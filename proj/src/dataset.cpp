// Copyright 2026 The calibfw Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "calibfw/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "calibfw/parallel.hpp"

namespace calibfw {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

double quantize6(double v) {
  const double q = std::round(v * 1e6) / 1e6;
  return q == 0.0 ? 0.0 : q;  // no "-0.000000" in manifests
}

std::string format_record(const ManifestRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "{\"image\":%s,\"panorama\":%s,\"f_px\":%.6f,\"pitch_deg\":%.6f,"
                "\"roll_deg\":%.6f,\"yaw_deg\":%.6f,\"focal_n\":%.12f,\"pitch_n\":%.12f,"
                "\"roll_n\":%.12f,\"split\":\"%s\"}",
                json(r.image).dump().c_str(), json(r.panorama).dump().c_str(), r.f_px,
                r.pitch_deg, r.roll_deg, r.yaw_deg, r.target.focal_n, r.target.pitch_n,
                r.target.roll_n, to_string(r.split).c_str());
  return buf;
}

json range_json(const ValueRange& r) { return json::array({r.lo, r.hi}); }

ValueRange range_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

CalibrationTarget target_of(const ManifestRecord& r) {
  return normalize_target(r.f_px, deg_to_rad(r.pitch_deg), deg_to_rad(r.roll_deg));
}

}  // namespace

std::string to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "train";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw DatasetError("unknown split '" + name + "'");
}

std::size_t DatasetManifest::count(Split split) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const auto& r) { return r.split == split; }));
}

DatasetManifest generate_dataset(const std::vector<Panorama>& panos, const DatasetConfig& cfg,
                                 const fs::path& out_dir) {
  cfg.sampler.validate();
  if (panos.empty()) throw DatasetError("empty panorama set");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0))
    throw DatasetError("train fraction must lie in (0, 1]");
  if (cfg.test_count < 0) throw DatasetError("test count must be >= 0");

  std::size_t n_test_panos = 0;
  if (cfg.test_count > 0) {
    if (panos.size() < 2)
      throw DatasetError("a test split needs at least 2 panoramas (test panoramas are held out)");
    n_test_panos = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(cfg.test_panorama_fraction * double(panos.size()))), 1,
        panos.size() - 1);
  }
  const std::size_t n_pool = panos.size() - n_test_panos;
  const int count =
      cfg.count >= 0 ? cfg.count : cfg.sampler.crops_per_panorama * static_cast<int>(n_pool);
  if (count == 0) throw DatasetError("empty dataset request");

  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec || !fs::is_directory(out_dir / "images"))
    throw DatasetError("output directory not writable: " + out_dir.string());

  Rng rng(cfg.sampler.seed);
  const std::size_t total = std::size_t(count) + std::size_t(cfg.test_count);

  DatasetManifest manifest;
  manifest.seed = cfg.sampler.seed;
  manifest.focal_px = cfg.sampler.focal_px;
  manifest.pitch_deg = cfg.sampler.pitch_deg;
  manifest.roll_deg = cfg.sampler.roll_deg;
  manifest.crop_size = cfg.sampler.output_size;
  manifest.root = out_dir;
  manifest.records.resize(total);

  std::vector<const Panorama*> source(total);
  std::vector<CropSpec> specs(total);
  for (std::size_t k = 0; k < total; ++k) {
    const bool test = k >= std::size_t(count);
    const std::size_t p = test ? n_pool + (k - count) % n_test_panos : k % n_pool;
    source[k] = &panos[p];

    CropSpec drawn = sample_params(rng, cfg.sampler);
    auto& r = manifest.records[k];
    r.f_px = quantize6(drawn.intr.f_px);
    r.pitch_deg = quantize6(rad_to_deg(drawn.ext.pitch_rad));
    r.roll_deg = quantize6(rad_to_deg(drawn.ext.roll_rad));
    r.yaw_deg = quantize6(rad_to_deg(drawn.ext.yaw_rad));
    if (r.yaw_deg >= 360.0) r.yaw_deg = 0.0;
    // Quantization can nudge a value onto the open end of its range.
    if (r.pitch_deg <= -kPitchMaxAbsDeg) r.pitch_deg = -kPitchMaxAbsDeg + 1e-6;
    r.f_px = std::clamp(r.f_px, kFocalMinPx, kFocalMaxPx);
    r.target = target_of(r);
    r.panorama = panos[p].source_id;
    char name[32];
    std::snprintf(name, sizeof(name), "images/%06zu.png", k);
    r.image = name;
    r.split = test ? Split::test : Split::val;
    specs[k] = make_crop_spec(r.f_px, r.pitch_deg, r.roll_deg, r.yaw_deg, cfg.sampler.output_size);
  }

  std::vector<int> order(count);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<int>(order));
  const auto n_train = static_cast<std::size_t>(std::lround(cfg.train_fraction * count));
  for (std::size_t i = 0; i < n_train; ++i) manifest.records[order[i]].split = Split::train;

  parallel_for(total, cfg.workers, [&](std::size_t k) {
    const RgbImage crop = render_crop(*source[k], specs[k], 1);
    write_png(out_dir / manifest.records[k].image, crop);
  });

  write_manifest(manifest, out_dir / kManifestFileName);
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DatasetError("cannot write manifest " + path.string());
  json header = {{"schema_version", manifest.schema_version},
                 {"seed", manifest.seed},
                 {"ranges",
                  {{"focal_px", range_json(manifest.focal_px)},
                   {"pitch_deg", range_json(manifest.pitch_deg)},
                   {"roll_deg", range_json(manifest.roll_deg)}}},
                 {"crop_size", manifest.crop_size}};
  os << header.dump() << '\n';
  for (const auto& r : manifest.records) os << format_record(r) << '\n';
  if (!os) throw DatasetError("failed writing manifest " + path.string());
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DatasetError("cannot open manifest " + path.string());
  DatasetManifest m;
  m.root = path.parent_path();
  std::string line;
  if (!std::getline(is, line)) throw DatasetError("empty manifest " + path.string());
  try {
    const json header = json::parse(line);
    m.schema_version = header.at("schema_version").get<int>();
    if (m.schema_version != 1)
      throw DatasetError("unsupported manifest schema_version " +
                         std::to_string(m.schema_version));
    m.seed = header.at("seed").get<std::uint64_t>();
    const auto& ranges = header.at("ranges");
    m.focal_px = range_from(ranges.at("focal_px"));
    m.pitch_deg = range_from(ranges.at("pitch_deg"));
    m.roll_deg = range_from(ranges.at("roll_deg"));
    m.crop_size = header.at("crop_size").get<int>();

    std::size_t lineno = 1;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      const json j = json::parse(line);
      ManifestRecord r;
      r.image = j.at("image").get<std::string>();
      r.panorama = j.at("panorama").get<std::string>();
      r.f_px = j.at("f_px").get<double>();
      r.pitch_deg = j.at("pitch_deg").get<double>();
      r.roll_deg = j.at("roll_deg").get<double>();
      r.yaw_deg = j.at("yaw_deg").get<double>();
      r.target = {j.at("focal_n").get<double>(), j.at("pitch_n").get<double>(),
                  j.at("roll_n").get<double>()};
      r.split = parse_split(j.at("split").get<std::string>());
      const CalibrationTarget expect = target_of(r);
      if (std::abs(expect.focal_n - r.target.focal_n) > 1e-9 ||
          std::abs(expect.pitch_n - r.target.pitch_n) > 1e-9 ||
          std::abs(expect.roll_n - r.target.roll_n) > 1e-9)
        throw DatasetError("manifest line " + std::to_string(lineno) +
                           ": normalized triplet does not match raw parameters");
      m.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw DatasetError("malformed manifest " + path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DatasetError("manifest " + path.string() + ": " + e.what());
  }
  return m;
}

std::vector<Panorama> load_panorama_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DatasetError("panorama directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<Panorama> panos;
  panos.reserve(files.size());
  for (const auto& f : files) {
    try {
      panos.push_back(load_panorama(f));
    } catch (const std::exception& e) {
      throw DatasetError("unreadable panorama " + f.string() + ": " + e.what());
    }
  }
  return panos;
}

void image_to_planes(const RgbImage& img, Eigen::Ref<Eigen::MatrixXf> out) {
  const int n = img.width * img.height;
  const std::size_t count = std::size_t(n) * 3;
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double x = img.pixels[i] / 255.0;
    sum += x;
    sq += x * x;
  }
  const double mean = sum / double(count);
  const double var = std::max(0.0, sq / double(count) - mean * mean);
  const double sd = std::max(std::sqrt(var), 1.0 / std::sqrt(double(count)));
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < n; ++k)
      out(k, c) = float((img.pixels[std::size_t(k) * 3 + c] / 255.0 - mean) / sd);
}

LabeledSet load_split(const DatasetManifest& manifest, Split split, int workers) {
  std::vector<const ManifestRecord*> recs;
  for (const auto& r : manifest.records)
    if (r.split == split) recs.push_back(&r);
  LabeledSet set;
  set.id = manifest.root.filename().string() + ":" + to_string(split);
  set.image_size = manifest.crop_size;
  const int s2 = manifest.crop_size * manifest.crop_size;
  set.images.resize(Eigen::Index(recs.size()) * s2, 3);
  set.targets.resize(Eigen::Index(recs.size()), 3);
  parallel_for(recs.size(), workers, [&](std::size_t n) {
    const RgbImage img = read_png(manifest.root / recs[n]->image);
    if (img.width != manifest.crop_size || img.height != manifest.crop_size)
      throw DatasetError("crop " + recs[n]->image + " does not match crop_size");
    image_to_planes(img, set.images.middleRows(Eigen::Index(n) * s2, s2));
  });
  for (std::size_t n = 0; n < recs.size(); ++n)
    set.targets.row(Eigen::Index(n)) << recs[n]->target.focal_n, recs[n]->target.pitch_n,
        recs[n]->target.roll_n;
  return set;
}

LabeledSet subset(const LabeledSet& set, const std::vector<int>& indices, std::string id) {
  LabeledSet out;
  out.id = std::move(id);
  out.image_size = set.image_size;
  const Eigen::Index s2 = Eigen::Index(set.image_size) * set.image_size;
  out.images.resize(Eigen::Index(indices.size()) * s2, 3);
  out.targets.resize(Eigen::Index(indices.size()), 3);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    out.images.middleRows(Eigen::Index(k) * s2, s2) = set.images.middleRows(indices[k] * s2, s2);
    out.targets.row(Eigen::Index(k)) = set.targets.row(indices[k]);
  }
  return out;
}

LabeledSet concat(const LabeledSet& a, const LabeledSet& b, std::string id) {
  if (a.image_size > 0 && b.image_size > 0 && a.image_size != b.image_size)
    throw DatasetError("cannot concatenate sets with different image sizes");
  if (a.empty()) return subset(b, [&] {
      std::vector<int> all(b.size());
      std::iota(all.begin(), all.end(), 0);
      return all;
    }(), std::move(id));
  LabeledSet out;
  out.id = std::move(id);
  out.image_size = a.image_size;
  out.images.resize(a.images.rows() + b.images.rows(), 3);
  out.images << a.images, b.images;
  out.targets.resize(a.targets.rows() + b.targets.rows(), 3);
  out.targets << a.targets, b.targets;
  return out;
}

}  // namespace calibfw
