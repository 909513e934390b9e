// SPDX-License-Identifier: Apache-2.0
//
// On-disk layout:
//   "GLOWCKPT1\n"
//   uint64 little-endian manifest length
//   JSON manifest (model config, tensor index, normalization index, epoch,
//                  best validation MAE)
//   payload: little-endian IEEE doubles, in index order
#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "glowcast/data/windowing.hpp"
#include "glowcast/model/seq2seq.hpp"

namespace glowcast {

inline constexpr char kCheckpointMagic[] = "GLOWCKPT1\n";

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  ModelConfig config;
  std::vector<NamedTensor> tensors;  // every trainable tensor, model order
  NormStats stats;
  std::size_t epoch = 0;
  double best_val_mae = 0.0;
};

/// Deep copy of the current parameter values.
Checkpoint snapshot(const Seq2SeqModel& model, const NormStats& stats, std::size_t epoch,
                    double best_val_mae);

/// Fresh model with the checkpoint's values. Throws ContractError if the
/// tensor list does not match the configuration's module tree.
Seq2SeqModel restore(const Checkpoint& checkpoint);

/// Copies the checkpoint's values into an existing model of the same layout.
void load_into(const Checkpoint& checkpoint, Seq2SeqModel& model);

void write_checkpoint(const Checkpoint& checkpoint, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Throws IngestError when the file is missing, truncated or not a checkpoint.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace glowcast
