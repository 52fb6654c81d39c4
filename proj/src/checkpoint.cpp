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

#include "calibfw/nn/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace calibfw::nn {
namespace {

using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_blob(std::string& out, const Matrix<float>& m) {
  // Row-major element order, independent of Eigen's storage order.
  std::vector<float> buf;
  buf.reserve(std::size_t(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) buf.push_back(m(i, j));
  out.append(reinterpret_cast<const char*>(buf.data()), buf.size() * sizeof(float));
}

json shape_entry(const std::string& name, const Matrix<float>& m) {
  return {{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}};
}

}  // namespace

json arch_to_json(const ArchConfig& arch) {
  return {{"name", arch.name},
          {"input_size", arch.input_size},
          {"input_channels", arch.input_channels},
          {"conv_channels", arch.conv_channels},
          {"feature_dim", arch.feature_dim},
          {"feature_activation", to_string(arch.feature_activation)},
          {"head", to_string(arch.head)}};
}

ArchConfig arch_from_json(const json& j) {
  ArchConfig a;
  a.name = j.at("name").get<std::string>();
  a.input_size = j.at("input_size").get<int>();
  a.input_channels = j.at("input_channels").get<int>();
  a.conv_channels = j.at("conv_channels").get<std::vector<int>>();
  a.feature_dim = j.at("feature_dim").get<int>();
  a.feature_activation = parse_feature_activation(j.at("feature_activation").get<std::string>());
  a.head = parse_head(j.at("head").get<std::string>());
  a.validate();
  return a;
}

void save_checkpoint(const std::filesystem::path& path, const Network<float>& net,
                     const OptimizerState& optimizer, const std::string& rng_state,
                     const json& extra) {
  json params = json::array();
  for (const auto& p : net.parameters()) params.push_back(shape_entry(p.name, p.value));
  const bool has_velocity = !optimizer.velocity.empty();
  if (has_velocity) {
    if (optimizer.velocity.size() != net.parameters().size())
      throw CheckpointError("save_checkpoint: momentum buffers do not match parameters");
    for (std::size_t i = 0; i < optimizer.velocity.size(); ++i)
      params.push_back(shape_entry("velocity/" + net.parameters()[i].name, optimizer.velocity[i]));
  }
  const auto& pl = optimizer.plateau;
  json header = {
      {"schema_version", kCheckpointSchemaVersion},
      {"arch", arch_to_json(net.arch())},
      {"params", params},
      {"optimizer",
       {{"lr", optimizer.lr},
        {"momentum", optimizer.momentum},
        {"epoch", optimizer.epoch},
        {"has_velocity", has_velocity},
        {"plateau",
         {{"best", std::isfinite(pl.best) ? json(pl.best) : json(nullptr)},
          {"bad_epochs", pl.bad_epochs},
          {"patience", pl.patience},
          {"factor", pl.factor}}}}},
      {"rng_state", rng_state},
      {"extra", extra}};

  const std::string text = header.dump();
  std::string bytes(kCheckpointMagic, 4);
  append_u32(bytes, static_cast<std::uint32_t>(text.size()));
  bytes += text;
  for (const auto& p : net.parameters()) append_blob(bytes, p.value);
  if (has_velocity)
    for (const auto& v : optimizer.velocity) append_blob(bytes, v);

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot write checkpoint " + path.string());
  os.write(bytes.data(), std::streamsize(bytes.size()));
  if (!os) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<ArchConfig>& expected) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw CheckpointError("not a checkpoint: " + path.string());
  std::uint32_t header_len = 0;
  for (int i = 0; i < 4; ++i)
    header_len |= std::uint32_t(static_cast<unsigned char>(bytes[4 + i])) << (8 * i);
  if (bytes.size() < 8 + std::size_t(header_len))
    throw CheckpointError("truncated checkpoint header: " + path.string());

  json header;
  try {
    header = json::parse(bytes.substr(8, header_len));
  } catch (const json::exception& e) {
    throw CheckpointError("corrupt checkpoint header in " + path.string() + ": " + e.what());
  }

  try {
    const int version = header.at("schema_version").get<int>();
    if (version != kCheckpointSchemaVersion)
      throw CheckpointError("checkpoint version mismatch: file has schema " +
                            std::to_string(version) + ", expected " +
                            std::to_string(kCheckpointSchemaVersion));
    const ArchConfig arch = arch_from_json(header.at("arch"));
    if (expected && !(*expected == arch))
      throw CheckpointError("checkpoint shape disagreement: " + path.string() + " holds arch " +
                            arch_to_json(arch).dump() + ", expected " +
                            arch_to_json(*expected).dump());

    Checkpoint ck{Network<float>(arch), {}, header.at("rng_state").get<std::string>(),
                  header.value("extra", json::object())};
    const auto& opt = header.at("optimizer");
    ck.optimizer.lr = opt.at("lr").get<double>();
    ck.optimizer.momentum = opt.at("momentum").get<double>();
    ck.optimizer.epoch = opt.at("epoch").get<int>();
    const auto& pl = opt.at("plateau");
    ck.optimizer.plateau.best = pl.at("best").is_null() ? std::numeric_limits<double>::infinity()
                                                        : pl.at("best").get<double>();
    ck.optimizer.plateau.bad_epochs = pl.at("bad_epochs").get<int>();
    ck.optimizer.plateau.patience = pl.at("patience").get<int>();
    ck.optimizer.plateau.factor = pl.at("factor").get<double>();
    const bool has_velocity = opt.at("has_velocity").get<bool>();

    auto& params = ck.net.parameters();
    const auto& entries = header.at("params");
    const std::size_t expected_entries = params.size() * (has_velocity ? 2 : 1);
    if (entries.size() != expected_entries)
      throw CheckpointError("checkpoint shape disagreement: " + std::to_string(entries.size()) +
                            " blobs for " + std::to_string(expected_entries) + " tensors");

    std::size_t offset = 8 + header_len;
    auto read_blob = [&](const json& entry, const std::string& name, Matrix<float>& dst) {
      const auto rows = entry.at("rows").get<Eigen::Index>();
      const auto cols = entry.at("cols").get<Eigen::Index>();
      if (entry.at("name").get<std::string>() != name || rows != dst.rows() || cols != dst.cols())
        throw CheckpointError("checkpoint shape disagreement at " + name + ": file has " +
                              entry.at("name").get<std::string>() + " [" + std::to_string(rows) +
                              "x" + std::to_string(cols) + "], network expects [" +
                              std::to_string(dst.rows()) + "x" + std::to_string(dst.cols()) + "]");
      const std::size_t n = std::size_t(rows * cols) * sizeof(float);
      if (bytes.size() < offset + n) throw CheckpointError("truncated checkpoint: " + path.string());
      std::vector<float> buf(std::size_t(rows * cols));
      std::memcpy(buf.data(), bytes.data() + offset, n);
      offset += n;
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) dst(i, j) = buf[std::size_t(i * cols + j)];
    };
    for (std::size_t i = 0; i < params.size(); ++i)
      read_blob(entries[i], params[i].name, params[i].value);
    if (has_velocity) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        ck.optimizer.velocity.push_back(
            Matrix<float>::Zero(params[i].value.rows(), params[i].value.cols()));
        read_blob(entries[params.size() + i], "velocity/" + params[i].name,
                  ck.optimizer.velocity.back());
      }
    }
    if (offset != bytes.size())
      throw CheckpointError("trailing bytes after checkpoint blobs in " + path.string());
    return ck;
  } catch (const json::exception& e) {
    throw CheckpointError("malformed checkpoint header in " + path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError("invalid checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace calibfw::nn
