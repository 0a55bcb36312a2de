#include "stlmon/engine.hpp"
#include "stlmon/evaluate.hpp"
#include "stlmon/trainer.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

namespace {

using namespace stlmon;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string join_doubles(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += format_number(v[i]);
  }
  return s + "]";
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Top: return "Top";
    case Verdict::Bot: return "Bot";
    default: return "Unknown";
  }
}

std::string join_verdicts(const std::vector<Verdict>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += verdict_name(v[i]);
  }
  return s + "]";
}

void save_norm(const NormalizationParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write norm file: " + path);
  out << "min";
  for (double v : p.min) out << '\t' << format_number(v);
  out << "\nmax";
  for (double v : p.max) out << '\t' << format_number(v);
  out << '\n';
}

NormalizationParams load_norm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open norm file: " + path);
  NormalizationParams p;
  std::string line;
  for (int row = 0; row < 2; ++row) {
    if (!std::getline(in, line)) throw std::runtime_error("norm file truncated");
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag != (row == 0 ? "min" : "max")) throw std::runtime_error("malformed norm file");
    double v;
    while (ls >> v) (row == 0 ? p.min : p.max).push_back(v);
  }
  if (p.min.size() != p.max.size() || p.min.empty())
    throw std::runtime_error("malformed norm file");
  return p;
}

// ---- train ----

int cmd_train(const std::string& data_path, const std::string& config_path,
              const std::string& pool_path, const std::string& out_path,
              std::optional<std::uint64_t> seed) {
  Dataset data = load_csv(data_path);
  TrainConfig cfg = load_train_config(config_path);
  if (seed) cfg.seed = *seed;
  std::vector<PoolEntry> pool;
  if (!pool_path.empty()) pool = load_pool(pool_path);

  TrainResult res = train(data, std::move(pool), cfg);
  save_pool(res.pool, out_path);
  save_norm(res.norm, out_path + ".norm");

  std::ofstream log(out_path + ".log");
  log << "# epoch\tbatch\tpool_size\tformulas_added\thypervolume...\n";
  for (const auto& c : res.checkpoints) {
    log << c.epoch << '\t' << c.batch << '\t' << c.pool_size << '\t' << c.formulas_added;
    for (double h : c.hypervolume) log << '\t' << format_number(h);
    log << '\n';
  }
  std::cout << "pool entries: " << res.pool.size() << '\n';
  return 0;
}

// ---- check ----

int cmd_check(const std::string& formula_text, const std::string& data_path,
              const std::string& at) {
  Dataset data = load_csv(data_path);
  FormulaPtr f;
  try {
    f = parse(formula_text, data.variables);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  }
  Fragment frag = fragment_of(*f);
  for (const auto& t : data.traces) {
    TraceBatch b = batch_one(t);
    RobustnessMatrix m = robustness({f}, b);
    std::vector<double> rob(m.values.begin(), m.values.begin() + t.length);
    std::cout << "trace " << t.id << '\n';
    std::cout << "rob " << join_doubles(rob) << '\n';
    if (frag == Fragment::PurePast) {
      auto fw = monitor(f_unary(Kind::Eventually, f), b);
      auto gw = monitor(f_unary(Kind::Globally, f_not(f)), b);
      std::cout << "F-wrap verdicts " << join_verdicts(fw[0].verdicts) << '\n';
      std::cout << "G-wrap verdicts " << join_verdicts(gw[0].verdicts) << '\n';
    } else if (frag == Fragment::SafetyG || frag == Fragment::CosafetyF) {
      auto mv = monitor(f, b);
      std::cout << "verdicts " << join_verdicts(mv[0].verdicts) << '\n';
    }
    std::size_t pos = at == "first" ? 0
                      : at == "last" ? t.length - 1
                      : frag == Fragment::PurePast ? t.length - 1
                                                   : 0;
    std::cout << "sat " << (m.at(0, 0, pos) >= 0 ? "true" : "false") << '\n';
  }
  return 0;
}

// ---- evaluate / monitor ----

int cmd_evaluate(const std::string& pool_path, const std::string& data_path,
                 const std::string& norm_path, const std::string& report_path) {
  auto pool = load_pool(pool_path);
  Dataset data = load_csv(data_path);
  for (auto& e : pool) {
    e.formula = bind_variables(e.formula, data.variables);
    e.body = bind_variables(e.body, data.variables);
  }
  NormalizationParams norm = load_norm(norm_path);
  Report r = evaluate(pool, data, norm);
  std::string text = format_report(r);
  if (report_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(report_path);
    if (!out) throw std::runtime_error("cannot write report: " + report_path);
    out << text;
  }
  return 0;
}

int cmd_monitor(const std::string& pool_path, const std::string& data_path,
                const std::string& norm_path) {
  auto pool = load_pool(pool_path);
  Dataset data = load_csv(data_path);
  for (auto& e : pool) {
    e.formula = bind_variables(e.formula, data.variables);
    e.body = bind_variables(e.body, data.variables);
  }
  std::optional<NormalizationParams> norm;
  if (!norm_path.empty()) norm = load_norm(norm_path);
  for (const auto& raw : data.traces) {
    Trace t = norm ? normalize_apply(*norm, raw) : raw;
    auto [pred, first] = classify_trace(pool, t);
    std::size_t stop = pred ? *first : t.length - 1;
    for (std::size_t j = 0; j <= stop; ++j) {
      bool bot = pred && j == *first;
      std::cout << t.id << '\t' << j << '\t' << (bot ? "Bot" : "Unknown") << '\n';
      if (bot) break;
    }
  }
  return 0;
}

// ---- synth ----

int cmd_synth(const std::string& planted_text, std::size_t n_good, std::size_t n_fail,
              std::size_t len, std::size_t arity, const std::string& out_path,
              std::uint64_t seed) {
  FormulaPtr planted;
  try {
    planted = parse(planted_text);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  }
  SynthConfig sc;
  sc.n_good = n_good;
  sc.n_fail = n_fail;
  sc.length = len;
  sc.arity = arity ? arity : static_cast<std::size_t>(max_var_index(*planted)) + 1;
  Rng rng(seed);
  Dataset d = synth_generate(planted, sc, rng);
  save_csv(d, out_path);
  std::ofstream meta(out_path + ".meta");
  meta << "planted\t" << print(*planted) << '\n'
       << "n_good\t" << n_good << "\nn_fail\t" << n_fail << "\nlength\t" << len
       << "\narity\t" << sc.arity << "\nseed\t" << seed << '\n';
  return 0;
}

// ---- bench ----

// Streaming evaluator for core pure-past formulas: one robustness value per
// node per step, bounded histories only.
class IncrementalEval {
 public:
  explicit IncrementalEval(const FormulaPtr& f) {
    FormulaPtr core = rewrite_to_core(f);
    if (fragment_of(*core) != Fragment::PurePast)
      throw std::invalid_argument("incremental evaluation requires a pure-past formula");
    root_ = build(*core);
  }

  // values = one sample (arity doubles); returns robustness at this position
  double step(const double* values) {
    double out = eval(root_, values);
    for (auto& n : nodes_)
      if (n.kind == Kind::Yesterday) n.prev = nodes_[n.lhs].cur;
    ++pos_;
    return out;
  }

 private:
  struct Node {
    Kind kind;
    Atom atom;
    Interval iv;
    int lhs = -1, rhs = -1;
    double cur = 0;              // value at the current step
    double prev = -kInf;         // Yesterday state
    double s0 = -kInf;           // unbounded-since recurrence
    std::deque<double> h1, h2;   // recent lhs / rhs values (bounded windows)
    std::deque<double> hs0;      // recent s0 values (unbounded lo > 0)
  };

  int build(const Formula& f) {
    Node n;
    n.kind = f.kind;
    n.atom = f.atom;
    n.iv = f.interval;
    if (f.lhs) n.lhs = build(*f.lhs);
    if (f.rhs) n.rhs = build(*f.rhs);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size() - 1);
  }

  double eval(int idx, const double* values) {
    Node& n = nodes_[idx];
    switch (n.kind) {
      case Kind::True:
        n.cur = kInf;
        break;
      case Kind::Atom: {
        double s = 0;
        for (const auto& t : n.atom.terms) s += t.weight * values[t.index];
        n.cur = s - n.atom.threshold;
        break;
      }
      case Kind::Not:
        eval(n.lhs, values);
        n.cur = -nodes_[n.lhs].cur;
        break;
      case Kind::Or:
        eval(n.lhs, values);
        eval(n.rhs, values);
        n.cur = std::max(nodes_[n.lhs].cur, nodes_[n.rhs].cur);
        break;
      case Kind::Yesterday:
        eval(n.lhs, values);
        n.cur = pos_ > 0 ? n.prev : -kInf;
        break;
      case Kind::Since: {
        eval(n.lhs, values);
        eval(n.rhs, values);
        double a = nodes_[n.lhs].cur;
        double r = nodes_[n.rhs].cur;
        if (n.iv.unbounded()) {
          n.s0 = std::max(r, pos_ > 0 ? std::min(a, n.s0) : -kInf);
          std::size_t lo = n.iv.lo;
          if (lo == 0) {
            n.cur = n.s0;
          } else {
            n.h1.push_back(a);               // a over (pos-lo, pos]
            if (n.h1.size() > lo) n.h1.pop_front();
            n.hs0.push_back(n.s0);           // s0 over [pos-lo, pos]
            if (n.hs0.size() > lo + 1) n.hs0.pop_front();
            if (pos_ < lo) {
              n.cur = -kInf;
            } else {
              double m = n.hs0.front();
              for (double x : n.h1) m = std::min(m, x);
              n.cur = m;
            }
          }
        } else {
          std::size_t hi = n.iv.hi, lo = n.iv.lo;
          n.h1.push_back(a);
          n.h2.push_back(r);
          if (n.h1.size() > hi + 1) n.h1.pop_front();
          if (n.h2.size() > hi + 1) n.h2.pop_front();
          if (pos_ < hi) {
            n.cur = -kInf;
          } else {
            auto at1 = [&](std::size_t off) { return n.h1[n.h1.size() - 1 - off]; };
            auto at2 = [&](std::size_t off) { return n.h2[n.h2.size() - 1 - off]; };
            double suffix = kInf;  // min lhs over (pos-lo, pos]
            for (std::size_t off = 0; off < lo; ++off) suffix = std::min(suffix, at1(off));
            double acc = -kInf;
            for (std::size_t off = lo; off <= hi; ++off) {
              acc = std::max(acc, std::min(at2(off), suffix));
              suffix = std::min(suffix, at1(off));
            }
            n.cur = acc;
          }
        }
        break;
      }
      default:
        throw std::logic_error("non-core kind in incremental evaluator");
    }
    return n.cur;
  }

  std::vector<Node> nodes_;
  int root_ = -1;
  std::size_t pos_ = 0;
};

struct BenchRow {
  std::string mode;
  std::size_t sweep = 0;
  std::string strategy;
  double mean_s = 0, std_s = 0;
  std::size_t positives = 0;  // positions with rob >= 0, correctness fingerprint
  bool timed_out = false;
};

Dataset bench_dataset(std::size_t n_traces, std::size_t length, std::size_t arity,
                      Rng& rng) {
  Dataset d;
  for (std::size_t v = 0; v < arity; ++v) d.variables.push_back("x" + std::to_string(v));
  for (std::size_t k = 0; k < n_traces; ++k) {
    Trace t;
    t.id = "b" + std::to_string(k);
    t.length = length;
    t.arity = arity;
    t.values.resize(length * arity);
    std::vector<double> cur(arity);
    for (auto& c : cur) c = rng.uniform();
    for (std::size_t j = 0; j < length; ++j)
      for (std::size_t v = 0; v < arity; ++v) {
        cur[v] = std::clamp(cur[v] + rng.uniform(-0.05, 0.05), 0.0, 1.0);
        t.values[j * arity + v] = cur[v];
      }
    d.traces.push_back(std::move(t));
  }
  return d;
}

// All strategies compute the robustness sign of a pure-past formula at every
// position of every trace; only the evaluation schedule differs.
std::size_t run_naive(const FormulaPtr& f, const Dataset& d) {
  std::size_t positives = 0;
  for (const auto& t : d.traces)
    for (std::size_t p = 1; p <= t.length; ++p)
      if (trace_check(f, cut(t, p))) ++positives;
  return positives;
}

std::size_t run_incremental(const FormulaPtr& f, const Dataset& d) {
  std::size_t positives = 0;
  for (const auto& t : d.traces) {
    IncrementalEval ev(f);
    for (std::size_t j = 0; j < t.length; ++j)
      if (ev.step(t.values.data() + j * t.arity) >= 0) ++positives;
  }
  return positives;
}

std::size_t run_vectorized(const std::vector<FormulaPtr>& fs, const TraceBatch& b) {
  RobustnessMatrix m = robustness(fs, b);
  std::size_t positives = 0;
  for (std::size_t q = 0; q < fs.size(); ++q)
    for (std::size_t k = 0; k < b.count; ++k)
      for (std::size_t j = 0; j < b.lengths[k]; ++j)
        if (m.at(q, k, j) >= 0) ++positives;
  return positives;
}

int cmd_bench(const std::string& mode, std::vector<std::size_t> sweep,
              std::vector<std::string> strategies, double budget, std::size_t reps,
              const std::string& out_path, std::uint64_t seed,
              const std::string& formula_text) {
  FormulaPtr f = parse(formula_text);
  if (fragment_of(*f) != Fragment::PurePast) {
    std::cerr << "bench formula must be pure past\n";
    return 2;
  }
  std::vector<BenchRow> rows;
  std::map<std::string, bool> exhausted;
  std::map<std::string, double> spent;

  for (std::size_t point : sweep) {
    std::size_t n_traces = mode == "traces" ? point : 1;
    std::size_t length = mode == "length" ? point : 1000;
    std::size_t n_formulas = mode == "formulas" ? point : 1;
    Rng rng(seed);
    Dataset d = bench_dataset(n_traces, length, 1 + static_cast<std::size_t>(
                                                        max_var_index(*f)),
                              rng);
    TraceBatch b = batch(d.traces);
    std::vector<FormulaPtr> fs(n_formulas, f);

    for (const auto& strat : strategies) {
      BenchRow row{mode, point, strat};
      if (exhausted[strat]) {
        row.timed_out = true;
        rows.push_back(row);
        continue;
      }
      auto run_once = [&]() -> std::size_t {
        std::size_t positives = 0;
        if (strat == "naive-prefix") {
          for (std::size_t q = 0; q < n_formulas; ++q) positives += run_naive(f, d);
        } else if (strat == "incremental") {
          for (std::size_t q = 0; q < n_formulas; ++q) positives += run_incremental(f, d);
        } else {
          positives = run_vectorized(fs, b);
        }
        return positives;
      };

      // Untimed warmup doubles as calibration: fast workloads are repeated
      // inside the timed region so each sample spans at least ~20 ms of work.
      auto w0 = std::chrono::steady_clock::now();
      row.positives = run_once();
      double warm =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - w0).count();
      spent[strat] += warm;
      constexpr double kMinSample = 0.02;
      std::size_t iters =
          warm < kMinSample
              ? static_cast<std::size_t>(std::ceil(kMinSample / std::max(warm, 1e-7)))
              : 1;

      std::vector<double> times;
      for (std::size_t rep = 0; rep < reps; ++rep) {
        auto t0 = std::chrono::steady_clock::now();
        for (std::size_t it = 0; it < iters; ++it) run_once();
        double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                        .count();
        times.push_back(dt / static_cast<double>(iters));
        spent[strat] += dt;
        if (spent[strat] > budget) {
          exhausted[strat] = true;
          break;
        }
      }
      double mean = 0;
      for (double t : times) mean += t;
      mean /= static_cast<double>(times.size());
      double var = 0;
      for (double t : times) var += (t - mean) * (t - mean);
      row.mean_s = mean;
      row.std_s = times.size() > 1 ? std::sqrt(var / static_cast<double>(times.size() - 1))
                                   : 0.0;
      row.timed_out = exhausted[strat];
      rows.push_back(row);
    }
  }

  std::ostringstream out;
  out << "# mode\tsweep\tstrategy\tmean_s\tstd_s\tpositives\tstatus\n";
  for (const auto& r : rows)
    out << r.mode << '\t' << r.sweep << '\t' << r.strategy << '\t'
        << format_number(r.mean_s) << '\t' << format_number(r.std_s) << '\t' << r.positives
        << '\t' << (r.timed_out ? "timeout" : "ok") << '\n';
  if (out_path.empty()) {
    std::cout << out.str();
  } else {
    std::ofstream of(out_path);
    of << out.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"STL robustness monitoring and failure-formula learning"};
  app.require_subcommand(1);

  std::string data_path, config_path, pool_path, out_path, formula_text, at_pos;
  std::string norm_path, report_path;
  std::optional<std::uint64_t> seed_opt;
  std::uint64_t seed = 0;
  std::size_t n_good = 10, n_fail = 5, len = 50, arity = 0, reps = 3;
  double budget = 180.0;
  std::string mode = "length";
  std::vector<std::size_t> sweep;
  std::vector<std::string> strategies{"naive-prefix", "incremental", "vectorized"};
  std::string bench_formula = "(!(O(x0 >= 0.3)) | H(x0 >= 0.1))";

  auto* train = app.add_subcommand("train", "learn a pool of safety formulas");
  train->add_option("--data", data_path)->required();
  train->add_option("--config", config_path)->required();
  train->add_option("--pool", pool_path);
  train->add_option("--out", out_path)->required();
  train->add_option("--seed", seed_opt);

  auto* check = app.add_subcommand("check", "robustness and verdicts of one formula");
  check->add_option("--formula", formula_text)->required();
  check->add_option("--data", data_path)->required();
  check->add_option("--at", at_pos)->check(CLI::IsMember({"first", "last"}));

  auto* eval = app.add_subcommand("evaluate", "score a pool on a labeled test set");
  eval->add_option("--pool", pool_path)->required();
  eval->add_option("--data", data_path)->required();
  eval->add_option("--norm", norm_path)->required();
  eval->add_option("--report", report_path);

  auto* mon = app.add_subcommand("monitor", "stream verdicts of a pool over traces");
  mon->add_option("--pool", pool_path)->required();
  mon->add_option("--data", data_path)->required();
  mon->add_option("--norm", norm_path);

  auto* synth = app.add_subcommand("synth", "generate a planted-detector dataset");
  synth->add_option("--planted", formula_text)->required();
  synth->add_option("--n-good", n_good);
  synth->add_option("--n-fail", n_fail);
  synth->add_option("--len", len);
  synth->add_option("--arity", arity);
  synth->add_option("--out", out_path)->required();
  synth->add_option("--seed", seed);

  auto* bench = app.add_subcommand("bench", "prefix-verdict timing comparison");
  bench->add_option("--mode", mode)->check(CLI::IsMember({"length", "traces", "formulas"}));
  bench->add_option("--sweep", sweep)->required();
  bench->add_option("--strategies", strategies);
  bench->add_option("--budget", budget);
  bench->add_option("--reps", reps);
  bench->add_option("--out", out_path);
  bench->add_option("--seed", seed);
  bench->add_option("--formula", bench_formula);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return cmd_train(data_path, config_path, pool_path, out_path, seed_opt);
    if (check->parsed()) return cmd_check(formula_text, data_path, at_pos);
    if (eval->parsed()) return cmd_evaluate(pool_path, data_path, norm_path, report_path);
    if (mon->parsed()) return cmd_monitor(pool_path, data_path, norm_path);
    if (synth->parsed())
      return cmd_synth(formula_text, n_good, n_fail, len, arity, out_path, seed);
    if (bench->parsed())
      return cmd_bench(mode, sweep, strategies, budget, reps, out_path, seed, bench_formula);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
