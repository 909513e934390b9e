// SPDX-License-Identifier: Apache-2.0
#include "glowcast/model/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "glowcast/error.hpp"
#include "glowcast/model/config_json.hpp"

namespace glowcast {
namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out = (out << 8) | ((v >> (8 * i)) & 0xFF);
  return out;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  const std::uint64_t le = to_little(v);
  out.write(reinterpret_cast<const char*>(&le), sizeof le);
}

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t le = 0;
  if (!in.read(reinterpret_cast<char*>(&le), sizeof le)) throw IngestError("checkpoint truncated");
  return to_little(le);
}

void put_doubles(std::ostream& out, std::span<const double> values) {
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

std::vector<double> get_doubles(std::istream& in, std::size_t count) {
  std::vector<double> out(count);
  for (double& v : out) v = std::bit_cast<double>(get_u64(in));
  return out;
}

}  // namespace

Checkpoint snapshot(const Seq2SeqModel& model, const NormStats& stats, std::size_t epoch,
                    double best_val_mae) {
  Checkpoint c;
  c.config = model.config;
  for (const Tensor& t : model.parameters())
    c.tensors.push_back({t.name(), t.shape(), {t.values().begin(), t.values().end()}});
  c.stats = stats;
  c.epoch = epoch;
  c.best_val_mae = best_val_mae;
  return c;
}

void load_into(const Checkpoint& checkpoint, Seq2SeqModel& model) {
  const std::vector<Tensor> params = model.parameters();
  if (params.size() != checkpoint.tensors.size())
    throw ContractError("checkpoint has " + std::to_string(checkpoint.tensors.size()) +
                        " tensors, model expects " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const NamedTensor& src = checkpoint.tensors[i];
    Tensor dst = params[i];
    if (src.name != dst.name() || src.shape != dst.shape() || src.values.size() != dst.numel())
      throw ContractError("checkpoint tensor '" + src.name + "' " + shape_string(src.shape) +
                          " does not match model tensor '" + dst.name() + "' " +
                          shape_string(dst.shape()));
    std::copy(src.values.begin(), src.values.end(), dst.mutable_values().begin());
  }
}

Seq2SeqModel restore(const Checkpoint& checkpoint) {
  Seq2SeqModel model = Seq2SeqModel::init(checkpoint.config);
  load_into(checkpoint, model);
  return model;
}

void write_checkpoint(const Checkpoint& c, std::ostream& out) {
  json index = json::array();
  std::size_t offset = 0;
  for (const auto& t : c.tensors) {
    index.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += t.values.size();
  }
  const std::size_t n = c.stats.stations();
  json manifest = {{"format", "glowcast checkpoint"},
                   {"version", 1},
                   {"config", to_json(c.config)},
                   {"tensors", index},
                   {"normalization", {{"stations", n}, {"mean_offset", offset}, {"stddev_offset", offset + n}}},
                   {"epoch", c.epoch},
                   {"best_val_mae_bits", std::bit_cast<std::uint64_t>(c.best_val_mae)},
                   {"best_val_mae", c.best_val_mae},
                   {"payload_doubles", offset + 2 * n}};
  const std::string text = manifest.dump(1);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic - 1);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : c.tensors) put_doubles(out, t.values);
  put_doubles(out, c.stats.mean);
  put_doubles(out, c.stats.stddev);
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[sizeof kCheckpointMagic - 1];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw IngestError("not a glowcast checkpoint (bad magic)");
  const std::uint64_t length = get_u64(in);
  if (length > (1u << 30)) throw IngestError("checkpoint manifest too large");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) throw IngestError("checkpoint truncated");

  Checkpoint c;
  try {
    const json manifest = json::parse(text);
    merge_json(manifest.at("config"), c.config);
    c.epoch = manifest.at("epoch").get<std::size_t>();
    c.best_val_mae = std::bit_cast<double>(manifest.at("best_val_mae_bits").get<std::uint64_t>());
    for (const auto& entry : manifest.at("tensors")) {
      NamedTensor t;
      t.name = entry.at("name").get<std::string>();
      t.shape = entry.at("shape").get<Shape>();
      t.values = get_doubles(in, shape_numel(t.shape));
      c.tensors.push_back(std::move(t));
    }
    const std::size_t n = manifest.at("normalization").at("stations").get<std::size_t>();
    c.stats.mean = get_doubles(in, n);
    c.stats.stddev = get_doubles(in, n);
  } catch (const json::exception& e) {
    throw IngestError(std::string("bad checkpoint manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw IngestError(std::string("bad checkpoint config: ") + e.what());
  }
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestError("cannot write " + path.string());
  write_checkpoint(checkpoint, out);
  if (!out) throw IngestError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace glowcast
