// ternroll command-line front end.
//
// Exit status: 0 success, 1 usage error, 2 bad input, 3 internal invariant
// violation. Output files are written to a temporary sibling and renamed
// into place, so a failed run never leaves a partial file behind.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "ternroll/ternroll.hpp"

namespace fs = std::filesystem;
using namespace ternroll;

namespace {

// ---- plumbing -----------------------------------------------------------------

void write_direct(const fs::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

// Temp file plus rename for regular files. Devices, pipes and "-" (stdout)
// are written in place; symlinks are resolved so the link itself survives.
void write_atomic(const fs::path& given, const std::string& data) {
  if (given == "-") {
    std::cout.write(data.data(), static_cast<std::streamsize>(data.size()));
    std::cout.flush();
    return;
  }
  std::error_code ec;
  const fs::file_status st = fs::status(given, ec);
  if (!ec && fs::exists(st) && !fs::is_regular_file(st)) {
    if (fs::is_directory(st)) throw InputError("'" + given.string() + "' is a directory");
    write_direct(given, data);
    return;
  }
  const fs::path path = fs::is_symlink(fs::symlink_status(given, ec)) ? fs::weakly_canonical(given) : given;
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw InputError("failed writing '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw InputError("cannot rename into '" + path.string() + "': " + ec.message());
  }
}

unsigned thread_cap() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("TERNROLL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw InputError("TERNROLL_THREADS must be a positive integer");
    n = std::min<unsigned>(n, static_cast<unsigned>(v));
  }
  return n;
}

// Runs fn(0..n-1) on up to thread_cap() threads. The first exception (by
// index) is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_cap(), n));
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// 3-input adders cannot be used in serial layers.
void check_arity_schedule(int arity, int interval, const std::string& where) {
  if (arity == 3 && interval > 1) {
    throw InputError(where + ": 3-input adders are not supported with serial schedules (pixel_interval " +
                     std::to_string(interval) + ")");
  }
}

// ---- configuration ------------------------------------------------------------

struct NetOverrides {
  std::optional<double> clock_hz;
  std::optional<std::string> cse;
};

struct LoadedNet {
  NetworkSpec spec;
  nlohmann::json raw;
};

LoadedNet load_net(const std::string& path, const NetOverrides& ov) {
  LoadedNet ln;
  const std::string text = detail::read_file(path);
  ln.spec = parse_network_json(text);
  ln.raw = nlohmann::json::parse(text);
  if (ov.clock_hz) {
    if (!(*ov.clock_hz > 0)) throw InputError("--clock must be positive");
    ln.spec.clock_hz = *ov.clock_hz;
  }
  if (ov.cse) {
    const CseMethod m = parse_cse_method(*ov.cse);
    for (auto& l : ln.spec.layers) l.cse = m;
  }
  for (const auto& l : ln.spec.layers) {
    if (l.kind == LayerKind::Conv) check_arity_schedule(l.arity, l.pixel_interval, "layer '" + l.name + "'");
  }
  return ln;
}

std::string explain_config(const LoadedNet& ln, const NetOverrides& ov) {
  auto src = [](bool flag, bool file) { return flag ? "flag" : (file ? "file" : "default"); };
  std::ostringstream out;
  const auto& raw = ln.raw;
  out << "precedence: flag > network file > default\n";
  out << "clock_hz = " << fmt_double(ln.spec.clock_hz) << " (" << src(ov.clock_hz.has_value(), raw.contains("clock_hz"))
      << ")\n";
  out << "act_format = " << ln.spec.act_format.total_bits << "/" << ln.spec.act_format.frac_bits << " ("
      << src(false, raw.contains("act_format")) << ")\n";
  out << "scale_format = " << ln.spec.scale_format.total_bits << "/" << ln.spec.scale_format.frac_bits << " ("
      << src(false, raw.contains("scale_format")) << ")\n";
  out << "threads = " << thread_cap() << " (" << (std::getenv("TERNROLL_THREADS") ? "env" : "default") << ")\n";
  for (std::size_t i = 0; i < ln.spec.layers.size(); ++i) {
    const LayerSpec& l = ln.spec.layers[i];
    const auto& jl = raw["layers"][i];
    auto file = [&](const char* k) { return jl.contains(k); };
    out << l.name << ": pixel_interval = " << l.pixel_interval << " ("
        << (file("pixel_interval") ? "file" : "derived") << ")";
    if (l.kind == LayerKind::Conv) {
      out << ", cse = " << to_string(l.cse) << " (" << src(ov.cse.has_value(), file("cse")) << ")"
          << ", arity = " << l.arity << " (" << src(false, file("arity")) << ")"
          << ", epsilon = " << fmt_double(l.epsilon) << " (" << src(false, file("epsilon")) << ")"
          << ", digits = " << serial_digits(l.pixel_interval, ln.spec.act_format.total_bits) << " (derived)";
    }
    if (l.kind == LayerKind::Dense) {
      out << ", lanes = " << l.lanes << " (" << (file("lanes") ? "file" : "derived") << ")"
          << ", epsilon = " << fmt_double(l.epsilon) << " (" << src(false, file("epsilon")) << ")";
    }
    if (l.kind == LayerKind::ScaleShift || l.kind == LayerKind::Dense) {
      out << ", activation = " << (l.activation == Activation::ReLU ? "relu" : "none") << " ("
          << src(false, file("activation")) << ")";
    }
    out << "\n";
  }
  return out.str();
}

// Weights from a directory (matrices, constants and optional prebuilt
// <name>.ngl netlists), or random ones from the seed.
struct NetInputs {
  NetworkWeights weights;
  std::vector<std::optional<AdderGraph>> netlists;
};

NetInputs load_inputs(const NetworkSpec& net, const std::string& dir, bool random, std::uint64_t seed) {
  NetInputs in;
  in.netlists.resize(net.layers.size());
  if (random) {
    in.weights = random_weights(net, seed);
    return in;
  }
  in.weights = load_weights(net, dir, false);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    const fs::path ngl = fs::path(dir) / (l.name + ".ngl");
    if (l.kind == LayerKind::Conv && fs::exists(ngl)) {
      AdderGraph g = parse_netlist(detail::read_file(ngl.string()));
      const auto [rows, cols] = weight_shape(l);
      if (g.num_inputs != cols || g.num_outputs != rows) {
        throw InputError("'" + ngl.string() + "' has " + std::to_string(g.num_inputs) + " inputs and " +
                         std::to_string(g.num_outputs) + " outputs; layer '" + l.name + "' needs " +
                         std::to_string(cols) + " and " + std::to_string(rows));
      }
      const int digits = serial_digits(l.pixel_interval, net.act_format.total_bits);
      if (g.digits != digits || g.total_bits != net.act_format.total_bits) {
        throw InputError("'" + ngl.string() + "' is scheduled for " + std::to_string(g.digits) + " digits of " +
                         std::to_string(g.total_bits) + " bits; layer '" + l.name + "' needs " +
                         std::to_string(digits) + " digits of " + std::to_string(net.act_format.total_bits));
      }
      in.netlists[i] = std::move(g);
    } else if (has_weights(l.kind) && !in.weights[i].matrix) {
      throw InputError("missing weight file '" + (fs::path(dir) / (l.name + ".tmx")).string() + "'");
    }
  }
  return in;
}

CompiledNetwork compile_parallel(const NetworkSpec& net, const NetInputs& in) {
  CompiledNetwork cn;
  cn.net = net;
  // A prebuilt netlist may stand in for a missing matrix; the matrix it
  // realizes is recovered from unit inputs and must agree with any .tmx.
  NetworkWeights w = in.weights;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (!in.netlists[i]) continue;
    const AdderGraph& g = *in.netlists[i];
    std::vector<Trit> e(g.num_outputs * g.num_inputs, 0);
    std::vector<std::int64_t> x(g.num_inputs, 0);
    for (std::size_t c = 0; c < g.num_inputs; ++c) {
      x[c] = 1;
      const auto y = evaluate(g, x);
      x[c] = 0;
      for (std::size_t r = 0; r < g.num_outputs; ++r) {
        if (y[r] < -1 || y[r] > 1) throw InputError("netlist for layer '" + net.layers[i].name + "' is not ternary");
        e[r * g.num_inputs + c] = static_cast<Trit>(y[r]);
      }
    }
    TernaryMatrix realized(g.num_outputs, g.num_inputs, std::move(e));
    if (w[i].matrix && *w[i].matrix != realized) {
      throw InputError("netlist for layer '" + net.layers[i].name + "' does not realize its .tmx weights");
    }
    w[i].matrix = std::move(realized);
  }
  check_weights(net, w);
  cn.layers.resize(net.layers.size());
  std::vector<SaturationCounter> sat(net.layers.size());
  parallel_for(net.layers.size(), [&](std::size_t i) {
    if (in.netlists[i]) {
      cn.layers[i].graph = *in.netlists[i];
      cn.layers[i].matrix = w[i].matrix;
    } else {
      cn.layers[i] = compile_layer(net, i, w[i], &sat[i]);
    }
  });
  for (const auto& s : sat) cn.constant_saturations.events += s.events;
  return cn;
}

// ---- subcommands ------------------------------------------------------------------

int cmd_ternarize(double eps, const std::string& rule, const std::string& in, const std::string& out) {
  ScaleRule r = ScaleRule::MeanSurviving;
  if (rule == "mean_all") r = ScaleRule::MeanAll;
  else if (rule != "mean_surviving") throw InputError("--scale-rule must be mean_surviving or mean_all");
  const auto res = ternarize(load_fmx(in), eps, r);
  write_atomic(out, format_tmx(res.weights));
  std::cout << "delta=" << fmt_double(res.threshold) << " s=" << fmt_double(res.scale)
            << " sparsity=" << fmt_double(sparsity(res.weights)) << "\n";
  return 0;
}

int cmd_cse(const std::string& method, const std::string& in, const std::string& out) {
  const TernaryMatrix m = load_tmx(in);
  const CseResult r = run_cse(m, parse_cse_method(method));
  if (!reproduces(m, r)) throw InvariantError("cse result does not reproduce the input matrix");
  write_atomic(out, format_cse(r));
  std::cout << "definitions=" << r.definitions.size() << " adders=" << adder_count(r)
            << " baseline_adders=" << adder_count(identity_cse(m)) << "\n";
  return 0;
}

CseResult load_cse_or_matrix(const std::string& path, CseMethod method) {
  const std::string text = detail::read_file(path);
  if (text.rfind("cse", 0) == 0) return parse_cse(text);
  return run_cse(parse_tmx(text), method);
}

std::string cost_line(const AdderGraph& g) {
  const CostReport c = cost(g);
  const CycleModel cyc = cycle_model(g);
  return "adders=" + std::to_string(c.adders) + " regs=" + std::to_string(c.registers) +
         " adds_plus_regs=" + std::to_string(c.adds_plus_regs) + " depth=" + std::to_string(c.depth) +
         " digits=" + std::to_string(g.digits) + " latency=" + std::to_string(cyc.latency);
}

int cmd_tree(int arity, int interval, const std::string& name, const std::string& method, const std::string& in,
             const std::string& out) {
  check_arity_schedule(arity, interval, "tree");
  const CseResult r = load_cse_or_matrix(in, parse_cse_method(method));
  const AdderGraph g = schedule_serial(build_tree(r, arity), interval);
  write_atomic(out, emit_netlist(g, {name}));
  std::cout << cost_line(g) << "\n";
  return 0;
}

int cmd_stats(const std::string& arities, const std::string& methods, bool with_time,
              const std::vector<std::string>& files) {
  std::vector<int> ar;
  if (arities == "2" || arities == "both") ar.push_back(2);
  if (arities == "3" || arities == "both") ar.push_back(3);
  if (ar.empty()) throw InputError("--arity must be 2, 3 or both");
  std::vector<CseMethod> ms;
  std::stringstream ss(methods);
  for (std::string tok; std::getline(ss, tok, ',');) ms.push_back(parse_cse_method(tok));
  if (ms.empty()) throw InputError("--methods is empty");

  std::vector<TernaryMatrix> mats;
  for (const auto& f : files) mats.push_back(load_tmx(f));

  struct Row {
    double adders = 0, regs = 0, both = 0, depth = 0, secs = 0;
  };
  std::vector<Row> rows(ar.size() * ms.size());
  for (std::size_t a = 0; a < ar.size(); ++a) {
    for (std::size_t k = 0; k < ms.size(); ++k) {
      Row& row = rows[a * ms.size() + k];
      for (const auto& m : mats) {
        const auto t0 = std::chrono::steady_clock::now();
        const CseResult r = run_cse(m, ms[k]);
        const auto t1 = std::chrono::steady_clock::now();
        const CostReport c = cost(build_tree(r, ar[a]));
        row.adders += static_cast<double>(c.adders);
        row.regs += static_cast<double>(c.registers);
        row.both += static_cast<double>(c.adds_plus_regs);
        row.depth += c.depth;
        row.secs += std::chrono::duration<double>(t1 - t0).count();
      }
      const double n = static_cast<double>(mats.size());
      row.adders /= n;
      row.regs /= n;
      row.both /= n;
      row.depth /= n;
      row.secs /= n;
    }
  }
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-20s %12s %10s %14s %10s%s\n", "Technique", "Avg Adders", "Avg Reg", "Avg Add/Reg",
                "Avg Depth", with_time ? "   Avg Time (s)" : "");
  std::cout << buf;
  for (std::size_t a = 0; a < ar.size(); ++a) {
    for (std::size_t k = 0; k < ms.size(); ++k) {
      const Row& row = rows[a * ms.size() + k];
      const std::string label = std::string(ms[k] == CseMethod::None ? "None" : ms[k] == CseMethod::TopDown ? "TD-CSE" : "BU-CSE") +
                                " (" + std::to_string(ar[a]) + "-input)";
      std::snprintf(buf, sizeof buf, "%-20s %12.1f %10.1f %14.1f %10.1f", label.c_str(), row.adders, row.regs, row.both,
                    row.depth);
      std::cout << buf;
      if (with_time) {
        std::snprintf(buf, sizeof buf, " %14.3f", row.secs);
        std::cout << buf;
      }
      std::cout << "\n";
    }
  }
  return 0;
}

int cmd_emit(const LoadedNet& ln, const std::string& weights, bool random, std::uint64_t seed,
             const std::string& out_dir) {
  const NetInputs in = load_inputs(ln.spec, weights, random, seed);
  const CompiledNetwork cn = compile_parallel(ln.spec, in);
  if (!fs::is_directory(out_dir)) throw InputError("output directory '" + out_dir + "' does not exist");
  for (std::size_t i = 0; i < cn.net.layers.size(); ++i) {
    if (!cn.layers[i].graph) continue;
    const std::string& name = cn.net.layers[i].name;
    write_atomic(fs::path(out_dir) / (name + ".ngl"), emit_netlist(*cn.layers[i].graph, {name}));
    std::cout << name << " " << cost_line(*cn.layers[i].graph) << "\n";
  }
  return 0;
}

int cmd_simulate(const LoadedNet& ln, const std::string& weights, bool random, std::uint64_t seed,
                 const std::vector<std::string>& images) {
  const NetInputs in = load_inputs(ln.spec, weights, random, seed);
  const CompiledNetwork cn = compile_parallel(ln.spec, in);
  std::vector<ImageStream> imgs;
  for (const auto& p : images) imgs.push_back(load_image(p, ln.spec.act_format));
  std::vector<SimResult> res(imgs.size());
  parallel_for(imgs.size(), [&](std::size_t k) { res[k] = simulate(cn, imgs[k]); });
  for (const auto& r : res) {
    for (auto v : r.scores) std::cout << v << "\t";
    std::cout << "argmax=" << r.argmax << "\n";
    if (r.total_saturations) std::cerr << "saturations=" << r.total_saturations << "\n";
  }
  return 0;
}

int cmd_report_ops(const LoadedNet& ln, const std::string& weights, bool random, std::uint64_t seed) {
  if (weights.empty() && !random) {
    std::cout << format_ops(op_count(ln.spec));
    return 0;
  }
  const NetInputs in = load_inputs(ln.spec, weights, random, seed);
  const CompiledNetwork cn = compile_parallel(ln.spec, in);
  std::cout << format_ops(op_count(ln.spec, &cn));
  return 0;
}

int cmd_report_throughput(const LoadedNet& ln) {
  std::cout << format_throughput(throughput_model(ln.spec));
  return 0;
}

FloatMatrix random_float(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> e(rows * cols);
  for (auto& v : e) v = g(rng);
  return FloatMatrix(rows, cols, std::move(e));
}

int cmd_sweep(const std::vector<double>& eps, const std::string& in, const std::string& random_shape,
              std::uint64_t seed) {
  FloatMatrix w;
  if (!in.empty()) {
    w = load_fmx(in);
  } else {
    const auto x = random_shape.find('x');
    std::size_t r = 0, c = 0;
    if (x == std::string::npos || !detail::parse_size(std::string_view(random_shape).substr(0, x), r) ||
        !detail::parse_size(std::string_view(random_shape).substr(x + 1), c) || r == 0 || c == 0) {
      throw InputError("--random expects <rows>x<cols>");
    }
    w = random_float(r, c, seed);
  }
  std::cout << "epsilon\tsparsity\n";
  for (const auto& p : sparsity_sweep(w, eps)) std::cout << fmt_double(p.epsilon) << "\t" << fmt_double(p.sparsity) << "\n";
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"ternroll: unrolled ternary CNN compiler and simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 1;
  bool explain = false;
  app.add_option("--seed", seed, "seed for randomized inputs and weights");
  app.add_flag("--explain-config", explain, "print effective configuration and where each value came from");

  double eps = 0;
  std::string scale_rule = "mean_surviving", in, out, method = "bu", name = "-";
  int arity = 2, interval = 1;
  auto* tern = app.add_subcommand("ternarize", "threshold float weights to {-1,0,+1}");
  tern->add_option("--eps", eps, "epsilon")->required();
  tern->add_option("--scale-rule", scale_rule, "mean_surviving or mean_all");
  tern->add_option("input", in, "input .fmx")->required();
  tern->add_option("output", out, "output .tmx")->required();

  auto* cse = app.add_subcommand("cse", "common subexpression elimination");
  cse->add_option("--method", method, "none, td or bu")->required();
  cse->add_option("input", in, "input .tmx")->required();
  cse->add_option("output", out, "output .cse")->required();

  auto* tree = app.add_subcommand("tree", "build a pipelined adder tree and write its netlist");
  tree->add_option("--arity", arity, "adder inputs (2 or 3)");
  tree->add_option("--interval", interval, "cycles between samples (sets the serial digit count)");
  tree->add_option("--name", name, "layer name recorded in the netlist");
  tree->add_option("--method", method, "CSE method when the input is a .tmx");
  tree->add_option("input", in, "input .cse or .tmx")->required();
  tree->add_option("output", out, "output .ngl")->required();

  std::string stats_arity = "both", stats_methods = "none,td,bu";
  bool with_time = false;
  std::vector<std::string> files;
  auto* stats = app.add_subcommand("stats", "adder/register costs averaged over matrices");
  stats->add_option("--arity", stats_arity, "2, 3 or both");
  stats->add_option("--methods", stats_methods, "comma-separated CSE methods");
  stats->add_flag("--time", with_time, "add a wall-clock CSE time column");
  stats->add_option("inputs", files, ".tmx files")->required();

  NetOverrides ov;
  std::string net_path, weights, cse_override;
  bool random = false;
  auto add_net = [&](CLI::App* sc, bool weights_positional) {
    sc->add_option("network", net_path, "network description (.json)")->required();
    if (weights_positional) sc->add_option("weights", weights, "weights directory");
    sc->add_flag("--random-weights", random, "use seeded random weights instead of a directory");
    sc->add_option("--cse", cse_override, "override the CSE method of every conv layer");
  };
  auto* emit = app.add_subcommand("emit", "write one .ngl netlist per conv layer");
  add_net(emit, true);
  emit->add_option("--out", out, "output directory")->required();
  auto* sim = app.add_subcommand("simulate", "bit-exact inference on images");
  add_net(sim, true);
  std::vector<std::string> images;
  sim->add_option("--image", images, "input image(s)")->required();
  auto* ops = app.add_subcommand("report-ops", "operation counts per layer");
  add_net(ops, true);
  double clock = 0;
  auto* thr = app.add_subcommand("report-throughput", "rate cascade, frame rate and latency estimate");
  thr->add_option("network", net_path, "network description (.json)")->required();
  thr->add_option("--clock", clock, "clock frequency in Hz");

  std::vector<double> eps_list = {0.7, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8};
  std::string random_shape;
  auto* sweep = app.add_subcommand("sweep-eps", "sparsity for a list of epsilon values");
  sweep->add_option("--eps", eps_list, "epsilon values, ascending")->delimiter(',');
  sweep->add_option("input", in, "input .fmx");
  sweep->add_option("--random", random_shape, "use a seeded Gaussian <rows>x<cols> matrix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (sweep->parsed() && in.empty() == random_shape.empty()) {
    std::cerr << "ternroll: error: sweep-eps needs exactly one of an input file or --random\n";
    return 1;
  }
  if ((emit->parsed() || sim->parsed()) && weights.empty() && !random) {
    std::cerr << "ternroll: error: give a weights directory or --random-weights\n";
    return 1;
  }

  const bool needs_net = emit->parsed() || sim->parsed() || ops->parsed() || thr->parsed();
  LoadedNet ln;
  if (needs_net) {
    if (thr->parsed() && clock != 0) ov.clock_hz = clock;
    if (!cse_override.empty()) ov.cse = cse_override;
    ln = load_net(net_path, ov);
    if (explain) std::cout << explain_config(ln, ov);
  } else if (explain) {
    std::cout << "precedence: flag > network file > default\nseed = " << seed << "\nthreads = " << thread_cap()
              << "\n";
  }

  if (tern->parsed()) return cmd_ternarize(eps, scale_rule, in, out);
  if (cse->parsed()) return cmd_cse(method, in, out);
  if (tree->parsed()) return cmd_tree(arity, interval, name, method, in, out);
  if (stats->parsed()) return cmd_stats(stats_arity, stats_methods, with_time, files);
  if (emit->parsed()) return cmd_emit(ln, weights, random, seed, out);
  if (sim->parsed()) return cmd_simulate(ln, weights, random, seed, images);
  if (ops->parsed()) return cmd_report_ops(ln, weights, random, seed);
  if (thr->parsed()) return cmd_report_throughput(ln);
  if (sweep->parsed()) return cmd_sweep(eps_list, in, random_shape, seed);
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const InputError& e) {
    std::cerr << "ternroll: error: " << e.what() << "\n";
    return 2;
  } catch (const InvariantError& e) {
    std::cerr << "ternroll: internal error: " << e.what() << "\n";
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "ternroll: error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "ternroll: error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ternroll: internal error: " << e.what() << "\n";
    return 3;
  }
}
