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

#include "cfq/pipeline.hpp"

#include <cstdio>

#include "cfq/cp.hpp"
#include "cfq/dict_conv.hpp"
#include "cfq/io.hpp"
#include "cfq/quantizer.hpp"
#include "cfq/ref_conv.hpp"
#include "cfq/rng.hpp"

namespace cfq {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

struct LayerRun {
  Tensor4 output;
  OpCount ops;
  CostReport cost;
};

LayerRun run_layer(const Tensor4& x, const Tensor4& w, const LayerMode& mode) {
  return std::visit(
      Overloaded{
          [&](const DirectMode&) {
            Counted<Tensor4> c = conv2d_direct(x, w);
            CostReport r;
            r.mac_direct_paper = mac_direct_paper(x.dims(), w.dims());
            r.mac_dict_paper = r.mac_direct_paper;
            r.speedup_paper = 1.0;
            r.mult_direct_measured = c.ops.multiplies;
            r.mult_dict_measured = c.ops.multiplies;
            r.adds_dict_measured = c.ops.additions;
            r.speedup_measured = 1.0;
            r.bits_direct = storage_bits_direct(w.dims());
            r.bits_quantized = r.bits_direct;
            r.compression = 1.0;
            r.frobenius_error = 0.0;
            r.relative_error = 0.0;
            return LayerRun{std::move(c.value), c.ops, r};
          },
          [&](const DictMode& m) {
            const QuantizedKernel q =
                quantize(w, m.block_len, m.dict_size, KMeansOptions{m.seed, m.max_iters, 1e-7, m.restarts});
            Counted<Tensor4> c = conv2d_dict(x, q);
            const QuantizationError err = quantization_error(w, q);
            ReportInputs in;
            in.kernel_dims = w.dims();
            in.block_len = m.block_len;
            in.dict_size = q.dictionary.size();
            in.input_dims = x.dims();
            in.direct_ops = direct_op_count(x.dims(), w.dims());
            in.dict_ops = c.ops;
            in.frobenius_error = err.frobenius;
            in.relative_error = err.relative;
            return LayerRun{std::move(c.value), c.ops, build_report(in)};
          },
          [&](const CpMode& m) {
            AlsOptions opts;
            opts.seed = m.seed;
            opts.max_iters = m.max_iters;
            opts.rel_fit_tol = m.rel_fit_tol;
            const CpFit fit = cp_als(w, m.rank, opts);
            Counted<Tensor4> c = conv2d_cp(x, fit.factors);
            CostReport r;
            r.mac_direct_paper = mac_direct_paper(x.dims(), w.dims());
            r.mac_dict_paper = cp_op_count(x.dims(), w.dims(), m.rank).multiplies;
            r.speedup_paper = static_cast<double>(*r.mac_direct_paper) / static_cast<double>(*r.mac_dict_paper);
            r.mult_direct_measured = direct_op_count(x.dims(), w.dims()).multiplies;
            r.mult_dict_measured = c.ops.multiplies;
            r.adds_dict_measured = c.ops.additions;
            r.speedup_measured =
                static_cast<double>(*r.mult_direct_measured) / static_cast<double>(*r.mult_dict_measured);
            r.bits_direct = storage_bits_direct(w.dims());
            r.bits_quantized = storage_bits_cp(w.dims(), m.rank);
            r.compression = static_cast<double>(r.bits_direct) / static_cast<double>(r.bits_quantized);
            const Tensor4 approx = cp_reconstruct(fit.factors, w.dims());
            r.frobenius_error = frobenius_distance(w, approx);
            r.relative_error = relative_error(w, approx);
            return LayerRun{std::move(c.value), c.ops, r};
          },
      },
      mode);
}

std::size_t dims_size(const nlohmann::json& j, const char* what) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0) {
    throw FormatError(std::string(what) + " must be a non-negative integer");
  }
  return j.get<std::size_t>();
}

Dims4 parse_dims(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw FormatError("dims must be an array of four integers");
  Dims4 d{};
  for (std::size_t i = 0; i < 4; ++i) d[i] = dims_size(j[i], "dims entry");
  return d;
}

TensorSource parse_source(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (j.is_string()) {
    std::filesystem::path p = j.get<std::string>();
    return p.is_relative() ? base_dir / p : p;
  }
  if (!j.is_object()) throw FormatError("tensor source must be a path string or an object");
  if (j.contains("path")) return parse_source(j.at("path"), base_dir);
  RandomTensorSpec spec;
  if (!j.contains("dims")) throw FormatError("random tensor source needs \"dims\"");
  spec.dims = parse_dims(j.at("dims"));
  spec.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("rank")) spec.rank = dims_size(j.at("rank"), "rank");
  return spec;
}

LayerMode parse_mode(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type")) throw FormatError("layer mode needs a \"type\"");
  const std::string type = j.at("type").get<std::string>();
  if (type == "direct") return DirectMode{};
  if (type == "dict") {
    DictMode m;
    if (!j.contains("block_len") || !j.contains("dict_size")) {
      throw FormatError("dict mode needs \"block_len\" and \"dict_size\"");
    }
    m.block_len = dims_size(j.at("block_len"), "block_len");
    m.dict_size = dims_size(j.at("dict_size"), "dict_size");
    m.seed = j.value("seed", std::uint64_t{0});
    m.restarts = j.value("restarts", m.restarts);
    m.max_iters = j.value("max_iters", m.max_iters);
    return m;
  }
  if (type == "cp") {
    CpMode m;
    if (!j.contains("rank")) throw FormatError("cp mode needs \"rank\"");
    m.rank = dims_size(j.at("rank"), "rank");
    m.seed = j.value("seed", std::uint64_t{0});
    m.max_iters = j.value("max_iters", m.max_iters);
    m.rel_fit_tol = j.value("rel_fit_tol", m.rel_fit_tol);
    return m;
  }
  throw FormatError("unknown layer mode \"" + type + "\"");
}

void apply_param(LayerMode& mode, const Tensor4& kernel, const GridAxis& axis, std::int64_t value) {
  if (axis.mode && *axis.mode != mode_name(mode)) {
    if (*axis.mode == "direct") {
      mode = DirectMode{};
    } else if (*axis.mode == "dict") {
      mode = DictMode{kernel.dim(0), 1};
    } else if (*axis.mode == "cp") {
      mode = CpMode{};
    } else {
      throw InvalidArgument("unknown mode \"" + *axis.mode + "\" in grid");
    }
  }
  if (value < 0) throw InvalidArgument("grid values must be non-negative");
  const auto v = static_cast<std::uint64_t>(value);
  auto unknown = [&] { return InvalidArgument("parameter \"" + axis.param + "\" does not apply to mode " + mode_name(mode)); };
  std::visit(Overloaded{
                 [&](DirectMode&) { throw unknown(); },
                 [&](DictMode& m) {
                   if (axis.param == "block_len") m.block_len = v;
                   else if (axis.param == "dict_size") m.dict_size = v;
                   else if (axis.param == "seed") m.seed = v;
                   else if (axis.param == "restarts") m.restarts = v;
                   else if (axis.param == "max_iters") m.max_iters = v;
                   else throw unknown();
                 },
                 [&](CpMode& m) {
                   if (axis.param == "rank") m.rank = v;
                   else if (axis.param == "seed") m.seed = v;
                   else if (axis.param == "max_iters") m.max_iters = v;
                   else throw unknown();
                 },
             },
             mode);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Tensor4 load_tensor(const TensorSource& source) {
  if (const auto* path = std::get_if<std::filesystem::path>(&source)) return read_t4(read_file(*path));
  const auto& spec = std::get<RandomTensorSpec>(source);
  if (!spec.rank) return random_tensor(spec.dims, spec.seed);
  if (*spec.rank < 1) throw InvalidArgument("synthetic tensor rank must be >= 1");
  CpFactors f;
  Rng rng(spec.seed);
  for (int m = 0; m < 4; ++m) {
    f.factors[m].resize(static_cast<Eigen::Index>(spec.dims[m]), static_cast<Eigen::Index>(*spec.rank));
    for (Eigen::Index i = 0; i < f.factors[m].rows(); ++i) {
      for (Eigen::Index r = 0; r < f.factors[m].cols(); ++r) {
        f.factors[m](i, r) = static_cast<float>(rng.uniform(-1.0, 1.0));
      }
    }
  }
  return cp_reconstruct(f, spec.dims);
}

std::string mode_name(const LayerMode& mode) {
  return std::visit(Overloaded{[](const DirectMode&) { return std::string("direct"); },
                               [](const DictMode&) { return std::string("dict"); },
                               [](const CpMode&) { return std::string("cp"); }},
                    mode);
}

void validate_chain(const Dims4& input_dims, const std::vector<Layer>& layers) {
  if (layers.empty()) throw InvalidArgument("pipeline needs at least one layer");
  Dims4 dims = input_dims;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    try {
      dims = conv_output_dims(dims, layers[i].kernel.dims());
    } catch (const DimensionError& e) {
      throw DimensionError("layer " + std::to_string(i) + ": " + e.what());
    }
  }
}

std::vector<Layer> materialize(const std::vector<LayerConfig>& layers) {
  std::vector<Layer> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back(Layer{load_tensor(l.kernel), l.mode});
  return out;
}

PipelineResult run_pipeline(const Tensor4& input, const std::vector<Layer>& layers) {
  validate_chain(input.dims(), layers);
  PipelineResult result;
  Tensor4 baseline = input;
  Tensor4 configured = input;
  std::uint64_t base_mults = 0, conf_mults = 0, base_bits = 0, conf_bits = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const bool last = i + 1 == layers.size();
    Counted<Tensor4> base = conv2d_direct(baseline, layers[i].kernel);
    LayerRun conf = run_layer(configured, layers[i].kernel, layers[i].mode);

    LayerReport report;
    report.mode = mode_name(layers[i].mode);
    report.baseline_ops = base.ops;
    report.configured_ops = conf.ops;
    report.cost = conf.cost;
    base_mults += base.ops.multiplies;
    conf_mults += conf.ops.multiplies;
    base_bits += conf.cost.bits_direct;
    conf_bits += conf.cost.bits_quantized;
    result.layers.push_back(std::move(report));

    baseline = last ? std::move(base.value) : relu(base.value);
    configured = last ? std::move(conf.output) : relu(conf.output);
  }
  const double ref = frobenius_norm(baseline);
  const double dist = frobenius_distance(baseline, configured);
  if (ref == 0.0 && dist > 0.0) throw NumericalError("baseline output is zero; relative error undefined");
  result.relative_error = ref == 0.0 ? 0.0 : dist / ref;
  result.speedup_measured = static_cast<double>(base_mults) / static_cast<double>(conf_mults);
  result.compression = static_cast<double>(base_bits) / static_cast<double>(conf_bits);
  result.output = std::move(configured);
  return result;
}

std::vector<SweepRow> sweep(const Tensor4& input, const std::vector<Layer>& layers, const ParameterGrid& grid) {
  if (grid.axes.empty()) throw InvalidArgument("parameter grid is empty");
  for (const auto& axis : grid.axes) {
    if (axis.values.empty()) throw InvalidArgument("grid axis for \"" + axis.param + "\" has no values");
    if (axis.layer >= layers.size()) throw InvalidArgument("grid axis refers to layer " + std::to_string(axis.layer));
  }
  std::vector<SweepRow> rows;
  std::vector<std::size_t> pos(grid.axes.size(), 0);
  while (true) {
    std::vector<Layer> configured = layers;
    std::string label;
    for (std::size_t a = 0; a < grid.axes.size(); ++a) {
      const GridAxis& axis = grid.axes[a];
      const std::int64_t value = axis.values[pos[a]];
      apply_param(configured[axis.layer].mode, configured[axis.layer].kernel, axis, value);
      if (!label.empty()) label += ';';
      label += "L" + std::to_string(axis.layer) + "." + mode_name(configured[axis.layer].mode) + "." + axis.param +
               "=" + std::to_string(value);
    }
    const PipelineResult r = run_pipeline(input, configured);
    rows.push_back({label, r.relative_error, r.speedup_measured, r.compression});

    std::size_t a = grid.axes.size();
    while (a > 0) {
      --a;
      if (++pos[a] < grid.axes[a].values.size()) break;
      pos[a] = 0;
      if (a == 0) return rows;
    }
  }
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "config,relative_error,speedup_measured,compression\n";
  for (const auto& r : rows) {
    out += r.config + "," + format_double(r.relative_error) + "," + format_double(r.speedup_measured) + "," +
           format_double(r.compression) + "\n";
  }
  return out;
}

PipelineConfig parse_pipeline_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  try {
    PipelineConfig cfg;
    if (!j.is_object() || !j.contains("input") || !j.contains("layers")) {
      throw FormatError("pipeline config needs \"input\" and \"layers\"");
    }
    cfg.input = parse_source(j.at("input"), base_dir);
    for (const auto& l : j.at("layers")) {
      if (!l.contains("kernel")) throw FormatError("layer needs a \"kernel\"");
      cfg.layers.push_back({parse_source(l.at("kernel"), base_dir),
                            l.contains("mode") ? parse_mode(l.at("mode")) : LayerMode{DirectMode{}}});
    }
    if (cfg.layers.empty()) throw FormatError("pipeline config has no layers");
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("pipeline config: ") + e.what());
  }
}

ParameterGrid parse_grid(const nlohmann::json& j) {
  try {
    ParameterGrid g;
    if (!j.is_object() || !j.contains("axes")) throw FormatError("grid needs \"axes\"");
    for (const auto& a : j.at("axes")) {
      GridAxis axis;
      axis.layer = dims_size(a.at("layer"), "layer");
      if (a.contains("mode")) axis.mode = a.at("mode").get<std::string>();
      axis.param = a.at("param").get<std::string>();
      axis.values = a.at("values").get<std::vector<std::int64_t>>();
      g.axes.push_back(std::move(axis));
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("grid: ") + e.what());
  }
}

nlohmann::json to_json(const PipelineResult& r) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < r.layers.size(); ++i) {
    const LayerReport& l = r.layers[i];
    layers.push_back({{"index", i},
                      {"mode", l.mode},
                      {"baseline_multiplies", l.baseline_ops.multiplies},
                      {"baseline_additions", l.baseline_ops.additions},
                      {"configured_multiplies", l.configured_ops.multiplies},
                      {"configured_additions", l.configured_ops.additions},
                      {"report", to_json(l.cost)}});
  }
  return {{"layers", layers},
          {"relative_error", r.relative_error},
          {"speedup_measured", r.speedup_measured},
          {"compression", r.compression},
          {"output_dims", r.output.dims()},
          {"output_frobenius_norm", frobenius_norm(r.output)}};
}

}  // namespace cfq
