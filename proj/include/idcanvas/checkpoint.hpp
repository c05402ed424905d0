#pragma once

#include <string>
#include <utility>
#include <vector>

#include "idcanvas/optim.hpp"
#include "idcanvas/parameters.hpp"

namespace idcanvas {

// Flat named-tensor archive:
//   "IDCK" | u32 version | u64 count |
//   count x ( u32 name_len | name | u32 rank | rank x u64 dim | doubles )
// All integers and doubles little-endian.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_archive(const std::string& path, const NamedTensors& entries);
NamedTensors load_archive(const std::string& path);

// Model parameters under their own names, optimizer moments under
// "adamw.m/<name>" and "adamw.v/<name>", and the step counter as the
// one-element tensor "train.step".
void save_checkpoint(const std::string& path, const ParameterStore& store, const AdamW* optimizer,
                     long step);

// Restores into an already-constructed model (and optimizer, when given).
// Missing names or shape mismatches throw ConfigError. Returns the step.
long load_checkpoint(const std::string& path, ParameterStore& store, AdamW* optimizer);

}  // namespace idcanvas
