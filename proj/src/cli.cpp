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

#include "cfq/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <utility>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cfq/cost_model.hpp"
#include "cfq/cp.hpp"
#include "cfq/dict_conv.hpp"
#include "cfq/error.hpp"
#include "cfq/io.hpp"
#include "cfq/pipeline.hpp"
#include "cfq/quantizer.hpp"
#include "cfq/ref_conv.hpp"

namespace cfq {
namespace {

namespace fs = std::filesystem;

// Files produced by a command, written together once it has succeeded.
class PendingOutputs {
 public:
  void add(const std::string& path, Bytes bytes) { files_.emplace_back(path, std::move(bytes)); }
  void add(const std::string& path, const std::string& text) { add(path, Bytes(text.begin(), text.end())); }

  void commit() {
    std::vector<fs::path> written;
    try {
      for (const auto& [path, bytes] : files_) {
        write_file(path, bytes);
        written.push_back(path);
      }
    } catch (...) {
      std::error_code ec;
      for (const auto& p : written) fs::remove(p, ec);
      throw;
    }
  }

 private:
  std::vector<std::pair<std::string, Bytes>> files_;
};

std::string extension(const std::string& path) { return fs::path(path).extension().string(); }

Dims4 parse_dims_flag(const std::string& text) {
  Dims4 d{};
  std::stringstream ss(text);
  std::string part;
  std::size_t i = 0;
  while (std::getline(ss, part, ',')) {
    if (i >= 4) throw InvalidArgument("expected four comma-separated extents, got \"" + text + "\"");
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != part.size() || part.empty() || v == 0) {
      throw InvalidArgument("bad extent \"" + part + "\" in \"" + text + "\"");
    }
    d[i++] = static_cast<std::size_t>(v);
  }
  if (i != 4) throw InvalidArgument("expected four comma-separated extents, got \"" + text + "\"");
  return d;
}

nlohmann::json read_json(const std::string& path) {
  const Bytes bytes = read_file(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

nlohmann::json ops_json(const OpCount& ops) {
  return {{"multiplies", ops.multiplies}, {"additions", ops.additions}};
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct QuantizeArgs {
  std::string kernel, out, input_dims;
  std::size_t block_len = 0, dict_size = 0, restarts = 4, max_iters = 300;
  std::uint64_t seed = 0;
};

int cmd_quantize(const QuantizeArgs& a, std::ostream& out, std::ostream& err) {
  const Tensor4 w = read_t4(read_file(a.kernel));
  if (a.block_len < 1 || a.block_len > w.dim(0)) {
    throw InvalidArgument("--block-len must be in [1, " + std::to_string(w.dim(0)) + "]");
  }
  if (a.dict_size < 1) throw InvalidArgument("--dict-size must be >= 1");
  KMeansOptions opts;
  opts.seed = a.seed;
  opts.restarts = a.restarts;
  opts.max_iters = a.max_iters;
  const QuantizedKernel q = quantize(w, a.block_len, a.dict_size, opts);
  const QuantizationError e = quantization_error(w, q);

  ReportInputs in;
  in.kernel_dims = w.dims();
  in.block_len = a.block_len;
  in.dict_size = q.dictionary.size();
  if (!a.input_dims.empty()) in.input_dims = parse_dims_flag(a.input_dims);
  in.frobenius_error = e.frobenius;
  in.relative_error = e.relative;
  const CostReport report = build_report(in);

  PendingOutputs files;
  files.add(a.out, write_cdq(q));
  files.commit();
  out << dump(to_json(report));
  err << "quantized " << to_string(w.dims()) << " with M=" << a.block_len << ", |D|=" << q.dictionary.size()
      << (a.block_len == 1 ? " (scalar clustering)" : "") << ": relative error " << fixed4(e.relative)
      << ", compression " << fixed4(report.compression) << "x\n";
  return kExitOk;
}

struct ConvArgs {
  std::string input, mode, kernel, out, counts;
};

int cmd_conv(const ConvArgs& a, std::ostream&, std::ostream& err) {
  const std::string ext = extension(a.kernel);
  const bool matches = (a.mode == "direct" && ext == ".t4") || (a.mode == "dict" && ext == ".cdq") ||
                       (a.mode == "cp" && ext == ".cpf");
  if (!matches) {
    throw InvalidArgument("--mode " + a.mode + " does not accept a " + (ext.empty() ? "extensionless" : ext) +
                          " kernel (direct: .t4, dict: .cdq, cp: .cpf)");
  }
  const Tensor4 x = read_t4(read_file(a.input));
  Counted<Tensor4> result;
  if (a.mode == "direct") {
    result = conv2d_direct(x, read_t4(read_file(a.kernel)));
  } else if (a.mode == "dict") {
    result = conv2d_dict(x, read_cdq(read_file(a.kernel)));
  } else {
    result = conv2d_cp(x, read_cpf(read_file(a.kernel)));
  }
  PendingOutputs files;
  files.add(a.out, write_t4(result.value));
  if (!a.counts.empty()) files.add(a.counts, dump(ops_json(result.ops)));
  files.commit();
  err << a.mode << " conv " << to_string(x.dims()) << " -> " << to_string(result.value.dims()) << ": "
      << result.ops.multiplies << " multiplies, " << result.ops.additions << " additions\n";
  return kExitOk;
}

struct CpFitArgs {
  std::string kernel, out;
  std::size_t rank = 0, max_iters = 500;
  std::uint64_t seed = 0;
  double tol = 1e-6;
};

int cmd_cp_fit(const CpFitArgs& a, std::ostream& out, std::ostream& err) {
  const Tensor4 w = read_t4(read_file(a.kernel));
  if (a.rank < 1) throw InvalidArgument("--rank must be >= 1");
  AlsOptions opts;
  opts.seed = a.seed;
  opts.max_iters = a.max_iters;
  opts.rel_fit_tol = a.tol;
  const CpFit fit = cp_als(w, a.rank, opts);
  const double rel = relative_error(w, cp_reconstruct(fit.factors, w.dims()));

  PendingOutputs files;
  files.add(a.out, write_cpf(fit.factors));
  files.commit();
  out << dump({{"rank", a.rank},
               {"sweeps", fit.fit_history.size()},
               {"relative_error", rel},
               {"fit_history", fit.fit_history}});
  err << "CP rank " << a.rank << " after " << fit.fit_history.size() << " sweeps: relative error " << fixed4(rel)
      << "\n";
  return kExitOk;
}

struct ReconstructArgs {
  std::string in, out;
};

int cmd_reconstruct(const ReconstructArgs& a, std::ostream&, std::ostream& err) {
  const std::string ext = extension(a.in);
  Tensor4 t;
  if (ext == ".cdq") {
    t = reconstruct(read_cdq(read_file(a.in)));
  } else if (ext == ".cpf") {
    const CpFactors f = read_cpf(read_file(a.in));
    t = cp_reconstruct(f, f.dims());
  } else {
    throw InvalidArgument("--in must be a .cdq or .cpf file");
  }
  PendingOutputs files;
  files.add(a.out, write_t4(t));
  files.commit();
  err << "reconstructed " << to_string(t.dims()) << "\n";
  return kExitOk;
}

struct ErrorArgs {
  std::string a, b;
};

int cmd_error(const ErrorArgs& a, std::ostream& out, std::ostream&) {
  const Tensor4 ta = read_t4(read_file(a.a));
  const Tensor4 tb = read_t4(read_file(a.b));
  const double frob = frobenius_distance(ta, tb);
  out << dump({{"frobenius_error", frob}, {"relative_error", relative_error(ta, tb)}});
  return kExitOk;
}

struct ReportArgs {
  std::string quant, input_dims, input, kernel, convention = "ceil";
};

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  const QuantizedKernel q = read_cdq(read_file(a.quant));
  ReportInputs in;
  in.kernel_dims = q.kernel_dims;
  in.block_len = q.dictionary.block_len;
  in.dict_size = q.dictionary.size();
  if (a.convention == "ceil") {
    in.convention = BlockConvention::kCeil;
  } else if (a.convention == "paper-plus-one") {
    in.convention = BlockConvention::kPaperPlusOne;
  } else {
    throw InvalidArgument("--convention must be ceil or paper-plus-one");
  }
  if (!a.input_dims.empty()) in.input_dims = parse_dims_flag(a.input_dims);
  if (!a.input.empty()) {
    const Tensor4 x = read_t4(read_file(a.input));
    if (in.input_dims && *in.input_dims != x.dims()) throw DimensionError("--input-dims disagrees with --input");
    in.input_dims = x.dims();
    in.direct_ops = conv2d_direct(x, reconstruct(q)).ops;
    in.dict_ops = conv2d_dict(x, q).ops;
  }
  if (!in.input_dims) throw InvalidArgument("report needs --input-dims or --input");
  if (!a.kernel.empty()) {
    const QuantizationError e = quantization_error(read_t4(read_file(a.kernel)), q);
    in.frobenius_error = e.frobenius;
    in.relative_error = e.relative;
  }
  const CostReport r = build_report(in);
  out << dump(to_json(r));
  err << "speedup (analytic) " << fixed4(*r.speedup_paper) << "x";
  if (r.speedup_measured) err << ", speedup (measured) " << fixed4(*r.speedup_measured) << "x";
  err << ", compression " << fixed4(r.compression) << "x\n";
  return kExitOk;
}

struct SweepArgs {
  std::string config, grid, out;
};

std::pair<Tensor4, std::vector<Layer>> load_pipeline(const std::string& config_path) {
  const PipelineConfig cfg = parse_pipeline_config(read_json(config_path), fs::path(config_path).parent_path());
  return {load_tensor(cfg.input), materialize(cfg.layers)};
}

int cmd_sweep(const SweepArgs& a, std::ostream&, std::ostream& err) {
  const auto [input, layers] = load_pipeline(a.config);
  const ParameterGrid grid = parse_grid(read_json(a.grid));
  const std::vector<SweepRow> rows = sweep(input, layers, grid);
  PendingOutputs files;
  files.add(a.out, sweep_csv(rows));
  files.commit();
  err << "sweep: " << rows.size() << " grid points\n";
  return kExitOk;
}

struct ForwardArgs {
  std::string config, out, tensor_out;
};

int cmd_forward(const ForwardArgs& a, std::ostream&, std::ostream& err) {
  const auto [input, layers] = load_pipeline(a.config);
  const PipelineResult r = run_pipeline(input, layers);
  PendingOutputs files;
  files.add(a.out, dump(to_json(r)));
  if (!a.tensor_out.empty()) files.add(a.tensor_out, write_t4(r.output));
  files.commit();
  err << "forward: " << layers.size() << " layers, end-to-end relative error " << fixed4(r.relative_error)
      << ", speedup " << fixed4(r.speedup_measured) << "x\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dictionary-of-centroids convolution toolkit"};
  app.name("cfq");
  app.require_subcommand(1);

  QuantizeArgs qa;
  auto* quantize_cmd = app.add_subcommand("quantize", "Cluster kernel blocks into a centroid dictionary");
  quantize_cmd->add_option("--kernel", qa.kernel, "Kernel .t4")->required();
  quantize_cmd->add_option("--block-len", qa.block_len, "Block length M")->required();
  quantize_cmd->add_option("--dict-size", qa.dict_size, "Dictionary size |D|")->required();
  quantize_cmd->add_option("--seed", qa.seed, "k-means seed")->required();
  quantize_cmd->add_option("--restarts", qa.restarts, "k-means restarts");
  quantize_cmd->add_option("--max-iters", qa.max_iters, "Lloyd iterations per restart");
  quantize_cmd->add_option("--input-dims", qa.input_dims, "L1,L2,L3,L4 for the analytic MAC fields");
  quantize_cmd->add_option("--out", qa.out, "Output .cdq")->required();

  ConvArgs ca;
  auto* conv_cmd = app.add_subcommand("conv", "Convolve an input with a kernel");
  conv_cmd->add_option("--input", ca.input, "Input activations .t4")->required();
  conv_cmd->add_option("--mode", ca.mode, "direct | dict | cp")->required();
  conv_cmd->add_option("--kernel", ca.kernel, "Kernel .t4 / .cdq / .cpf")->required();
  conv_cmd->add_option("--out", ca.out, "Output .t4")->required();
  conv_cmd->add_option("--counts", ca.counts, "Write executed op counts as JSON");

  CpFitArgs fa;
  auto* fit_cmd = app.add_subcommand("cp-fit", "Fit a rank-R CP decomposition by ALS");
  fit_cmd->add_option("--kernel", fa.kernel, "Kernel .t4")->required();
  fit_cmd->add_option("--rank", fa.rank, "CP rank")->required();
  fit_cmd->add_option("--seed", fa.seed, "Initialization seed")->required();
  fit_cmd->add_option("--max-iters", fa.max_iters, "Maximum ALS sweeps");
  fit_cmd->add_option("--tol", fa.tol, "Stop when the relative fit moves less than this");
  fit_cmd->add_option("--out", fa.out, "Output .cpf")->required();

  ReconstructArgs ra;
  auto* recon_cmd = app.add_subcommand("reconstruct", "Expand a .cdq or .cpf back into a dense kernel");
  recon_cmd->add_option("--in", ra.in, "Input .cdq / .cpf")->required();
  recon_cmd->add_option("--out", ra.out, "Output .t4")->required();

  ErrorArgs ea;
  auto* error_cmd = app.add_subcommand("error", "Frobenius and relative error of b against reference a");
  error_cmd->add_option("--a", ea.a, "Reference .t4")->required();
  error_cmd->add_option("--b", ea.b, "Compared .t4")->required();

  ReportArgs pa;
  auto* report_cmd = app.add_subcommand("report", "Storage and MAC cost report for a .cdq");
  report_cmd->add_option("--quant", pa.quant, "Quantized kernel .cdq")->required();
  report_cmd->add_option("--input-dims", pa.input_dims, "L1,L2,L3,L4");
  report_cmd->add_option("--input", pa.input, "Input .t4; runs both paths for measured counts");
  report_cmd->add_option("--kernel", pa.kernel, "Original kernel .t4 for the error fields");
  report_cmd->add_option("--convention", pa.convention, "Block count for storage: ceil | paper-plus-one");

  SweepArgs sa;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a pipeline over a parameter grid");
  sweep_cmd->add_option("--config", sa.config, "Pipeline JSON")->required();
  sweep_cmd->add_option("--grid", sa.grid, "Grid JSON")->required();
  sweep_cmd->add_option("--out", sa.out, "Output CSV")->required();

  ForwardArgs wa;
  auto* forward_cmd = app.add_subcommand("forward", "Run a configured pipeline against its direct baseline");
  forward_cmd->add_option("--config", wa.config, "Pipeline JSON")->required();
  forward_cmd->add_option("--out", wa.out, "Result JSON")->required();
  forward_cmd->add_option("--tensor-out", wa.tensor_out, "Write the network output as .t4");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*quantize_cmd) return cmd_quantize(qa, out, err);
    if (*conv_cmd) return cmd_conv(ca, out, err);
    if (*fit_cmd) return cmd_cp_fit(fa, out, err);
    if (*recon_cmd) return cmd_reconstruct(ra, out, err);
    if (*error_cmd) return cmd_error(ea, out, err);
    if (*report_cmd) return cmd_report(pa, out, err);
    if (*sweep_cmd) return cmd_sweep(sa, out, err);
    if (*forward_cmd) return cmd_forward(wa, out, err);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}

}  // namespace cfq
