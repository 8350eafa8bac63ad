// Copyright 2026 The cfq Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfq/cost_model.hpp"
#include "cfq/tensor.hpp"

namespace cfq {

// Seeded synthetic tensor. Entries are uniform in [-1, 1); with `rank` set the
// tensor is instead a sum of `rank` outer products of such vectors.
struct RandomTensorSpec {
  std::uint64_t seed = 0;
  Dims4 dims{1, 1, 1, 1};
  std::optional<std::size_t> rank;
};

using TensorSource = std::variant<std::filesystem::path, RandomTensorSpec>;

Tensor4 load_tensor(const TensorSource& source);

struct DirectMode {};

struct DictMode {
  std::size_t block_len = 1;
  std::size_t dict_size = 1;
  std::uint64_t seed = 0;
  std::size_t restarts = 4;
  std::size_t max_iters = 300;
};

struct CpMode {
  std::size_t rank = 1;
  std::uint64_t seed = 0;
  std::size_t max_iters = 500;
  double rel_fit_tol = 1e-6;
};

using LayerMode = std::variant<DirectMode, DictMode, CpMode>;

std::string mode_name(const LayerMode& mode);

struct LayerConfig {
  TensorSource kernel;
  LayerMode mode;
};

struct PipelineConfig {
  TensorSource input;
  std::vector<LayerConfig> layers;
};

// A layer with its kernel already materialized.
struct Layer {
  Tensor4 kernel;
  LayerMode mode;
};

struct LayerReport {
  std::string mode;
  OpCount baseline_ops;
  OpCount configured_ops;
  // For dict layers the usual dictionary report. Direct layers report the
  // direct path against itself; CP layers put the executed CP multiply count
  // and the CP factor storage in the mac_dict_paper / bits_quantized slots.
  CostReport cost;
};

struct PipelineResult {
  std::vector<LayerReport> layers;
  Tensor4 output;
  // ||baseline - configured||_F / ||baseline||_F at the network output.
  double relative_error = 0.0;
  // sum of baseline multiplies / sum of configured multiplies.
  double speedup_measured = 1.0;
  // sum of direct storage bits / sum of configured storage bits.
  double compression = 1.0;
};

// Checks that channels chain and spatial extents stay >= 1.
void validate_chain(const Dims4& input_dims, const std::vector<Layer>& layers);

std::vector<Layer> materialize(const std::vector<LayerConfig>& layers);

// Runs the configured chain and an all-direct baseline over the same kernels,
// with ReLU between consecutive layers.
PipelineResult run_pipeline(const Tensor4& input, const std::vector<Layer>& layers);

// One sweep axis: sets `param` of layer `layer` to each of `values`. When
// `mode` names a different mode than the layer has, the layer switches to it
// first, starting from defaults (dict: block_len = k1, dict_size = 1;
// cp: rank = 1).
struct GridAxis {
  std::size_t layer = 0;
  std::optional<std::string> mode;
  std::string param;
  std::vector<std::int64_t> values;
};

// Cartesian product of the axes, last axis varying fastest.
struct ParameterGrid {
  std::vector<GridAxis> axes;
};

struct SweepRow {
  std::string config;
  double relative_error = 0.0;
  double speedup_measured = 1.0;
  double compression = 1.0;
};

std::vector<SweepRow> sweep(const Tensor4& input, const std::vector<Layer>& layers, const ParameterGrid& grid);

// "config,relative_error,speedup_measured,compression" plus one line per row.
std::string sweep_csv(const std::vector<SweepRow>& rows);

// JSON surfaces. Relative kernel paths resolve against `base_dir`.
PipelineConfig parse_pipeline_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ParameterGrid parse_grid(const nlohmann::json& j);
nlohmann::json to_json(const PipelineResult& r);

}  // namespace cfq
