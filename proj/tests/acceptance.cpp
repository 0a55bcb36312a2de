// End-to-end acceptance checks. Takes the CLI binary path as argv[1]; prints
// one PASS/FAIL line per criterion and exits nonzero on any failure.
#include "stlmon/engine.hpp"
#include "stlmon/evaluate.hpp"
#include "stlmon/learner.hpp"
#include "stlmon/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

using namespace stlmon;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int failures = 0;

void report(int criterion, bool ok, const std::string& what) {
  std::cout << "criterion " << criterion << ": " << (ok ? "PASS" : "FAIL") << " - " << what
            << std::endl;
  if (!ok) ++failures;
}

std::string cli;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& cmd) { return std::system(cmd.c_str()); }

// Random full-STL formulas. Temporal nesting is depth-limited and nested
// windows kept narrow so the reference recursion stays tractable.
FormulaPtr random_formula(Rng& rng, std::size_t height, int temporal_budget,
                          std::size_t arity) {
  auto atom = [&] {
    return f_atom("x" + std::to_string(rng.uniform_int(0, arity - 1)),
                  static_cast<int>(rng.uniform_int(0, arity - 1)), Cmp::Ge,
                  rng.uniform(-1, 1));
  };
  if (height <= 1) return atom();
  auto interval = [&]() -> Interval {
    if (rng.bernoulli(0.3)) return Interval{static_cast<std::uint32_t>(rng.uniform_int(0, 3)),
                                            Interval{}.hi};
    std::uint32_t lo = rng.uniform_int(0, 6);
    return Interval{lo, lo + static_cast<std::uint32_t>(rng.uniform_int(0, 8))};
  };
  static const Kind unary_plain[] = {Kind::Not, Kind::Next, Kind::WeakNext, Kind::Yesterday,
                                     Kind::WeakYesterday};
  static const Kind unary_temporal[] = {Kind::Eventually, Kind::Globally, Kind::Once,
                                        Kind::Historically};
  static const Kind binary_plain[] = {Kind::And, Kind::Or};
  static const Kind binary_temporal[] = {Kind::Until, Kind::Release, Kind::Since,
                                         Kind::Triggers};
  for (;;) {
    switch (rng.uniform_int(0, 3)) {
      case 0: {
        Kind k = unary_plain[rng.uniform_int(0, 4)];
        auto child = random_formula(rng, height - 1, temporal_budget, arity);
        return k == Kind::Not ? f_not(child) : f_unary(k, child);
      }
      case 1: {
        if (temporal_budget <= 0) continue;
        Kind k = unary_temporal[rng.uniform_int(0, 3)];
        return f_unary(k, random_formula(rng, height - 1, temporal_budget - 1, arity),
                       interval());
      }
      case 2: {
        Kind k = binary_plain[rng.uniform_int(0, 1)];
        return f_binary(k, random_formula(rng, height - 1, temporal_budget, arity),
                        random_formula(rng, height - 1, temporal_budget, arity));
      }
      default: {
        if (temporal_budget <= 0) continue;
        Kind k = binary_temporal[rng.uniform_int(0, 3)];
        return f_binary(k, random_formula(rng, height - 1, temporal_budget - 1, arity),
                        random_formula(rng, height - 1, temporal_budget - 1, arity),
                        interval());
      }
    }
  }
}

Trace random_trace(Rng& rng, std::size_t len, std::size_t arity, double lo = -2,
                   double hi = 2) {
  Trace t;
  t.id = "r";
  t.length = len;
  t.arity = arity;
  t.values.resize(len * arity);
  for (auto& v : t.values) v = rng.uniform(lo, hi);
  return t;
}

// ---- criterion 1: vectorized evaluation vs reference recursion ----
void criterion1() {
  auto start = std::chrono::steady_clock::now();
  Rng rng(10001);
  bool ok = true;
  for (int iter = 0; iter < 1000 && ok; ++iter) {
    std::size_t arity = 1 + rng.uniform_int(0, 3);
    auto f = random_formula(rng, 2 + rng.uniform_int(0, 4), 3, arity);
    Trace t = random_trace(rng, 1 + rng.uniform_int(0, 49), arity);
    RobustnessMatrix m = robustness({f}, batch_one(t));
    for (std::size_t i = 0; i < t.length; ++i) {
      double ref = robustness_ref(*f, t, i);
      double vec = m.at(0, 0, i);
      if (!(vec == ref)) {
        ok = false;
        break;
      }
    }
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report(1, ok && secs < 60.0,
         "vectorized robustness is bit-equal to the reference on 1000 random cases ("
         + std::to_string(secs) + "s)");
}

// ---- criterion 2: monitor verdicts = prefix trace checks ----
void criterion2() {
  Rng rng(10002);
  GenConfig gcfg;
  gcfg.variables = {"x0", "x1"};
  gcfg.interval_cap = 10;
  bool ok = true;
  for (int iter = 0; iter < 1000 && ok; ++iter) {
    bool cosafety = iter % 2;
    auto body = sample_ppstl(rng, gcfg);
    auto f = cosafety ? f_unary(Kind::Eventually, body)
                      : f_unary(Kind::Globally, f_not(body));
    Trace t = random_trace(rng, 1 + rng.uniform_int(0, 39), 2, 0, 1);
    auto mt = monitor(f, batch_one(t))[0];
    bool decided = false;
    for (std::size_t p = 1; p <= t.length && ok; ++p) {
      bool sat = trace_check(f, cut(t, p));
      if (cosafety ? sat : !sat) decided = true;
      Verdict want = !decided ? Verdict::Unknown : cosafety ? Verdict::Top : Verdict::Bot;
      if (mt.verdicts[p - 1] != want) ok = false;
      if (p > 1 && mt.verdicts[p - 2] != Verdict::Unknown &&
          mt.verdicts[p - 1] != mt.verdicts[p - 2])
        ok = false;  // revoked decision
    }
  }
  report(2, ok, "monitor verdicts equal prefix trace checks and are irrevocable");
}

// ---- criterion 3: CLI worked example ----
void criterion3() {
  std::string csv = "/tmp/stlmon_acc_fig.csv";
  std::ofstream(csv) << "trace_id,t,x,y,is_failure\n"
                        "a,0,1,0,0\na,1,4,3,0\na,2,2,1,0\na,3,5,2,0\n";
  std::string out = "/tmp/stlmon_acc_fig.out";
  int rc = run("'" + cli + "' check --formula 'O(x >= 3 & x + y >= 6)' --data " + csv +
               " > " + out + " 2>&1");
  std::string text = slurp(out);
  bool ok = rc == 0 && text.find("rob [-5,1,1,1]") != std::string::npos &&
            text.find("F-wrap verdicts [Unknown,Top,Top,Top]") != std::string::npos &&
            text.find("G-wrap verdicts [Unknown,Bot,Bot,Bot]") != std::string::npos;
  report(3, ok, "CLI check reproduces the worked once-conjunction example");
}

// ---- criterion 4: fitness math ----
void criterion4() {
  auto s = score_vector({-0.5, -0.2, 0.3});
  bool ok = s.size() == 4 && std::fabs(s[0] - (-0.462)) < 1e-3 &&
            std::fabs(s[1] - (-0.197)) < 1e-3 && std::fabs(s[2] - 0.197) < 1e-3 &&
            std::fabs(s[3] - (-0.291)) < 1e-3;
  FitnessInputs in;
  in.pair_rob = {{-0.5, -0.2, 0.3}};
  in.good_sel_maxrob = {-0.1};
  in.good_es_maxrob = {-0.1};
  FitnessRecord r = fitness(in);
  ok = ok && std::fabs(r.margin - 0.197) < 1e-3 && r.ok_orig && r.acc == 1.0;

  Rng rng(10004);
  for (int iter = 0; iter < 100 && ok; ++iter) {
    FitnessInputs pop;
    std::size_t traces = 1 + rng.uniform_int(0, 5);
    for (std::size_t p = 0; p < traces; ++p) {
      std::vector<double> rob(1 + rng.uniform_int(0, 11));
      for (auto& v : rob) v = rng.uniform(-1, 1);
      pop.pair_rob.push_back(rob);
    }
    std::size_t g = 1 + rng.uniform_int(0, 6);
    for (std::size_t i = 0; i < g; ++i) pop.good_sel_maxrob.push_back(rng.uniform(-1, 1));
    for (std::size_t i = 0; i < g; ++i) pop.good_es_maxrob.push_back(rng.uniform(-1, 1));
    FitnessRecord f = fitness(pop);

    // scalar re-implementation
    double margin = kInf;
    std::size_t okc = 0;
    for (const auto& rob : pop.pair_rob) {
      double best = -kInf, prefix = -kInf, total = -kInf, tail = -kInf;
      for (std::size_t i = 0; i < rob.size(); ++i) {
        double sc = i == 0 ? std::min(-std::tanh(rob[0] + 1e-6), std::tanh(rob[0]))
                           : std::min(-std::tanh(prefix), std::tanh(rob[i]));
        best = std::max(best, sc);
        prefix = std::max(prefix, rob[i]);
        total = std::max(total, rob[i]);
        if (i >= 1) tail = std::max(tail, rob[i]);
      }
      best = std::max(best, std::min(-std::tanh(total), std::tanh(tail)));
      margin = std::min(margin, best);
      if (rob[0] < 0 && total >= 0) ++okc;
    }
    double sel = *std::max_element(pop.good_sel_maxrob.begin(), pop.good_sel_maxrob.end());
    double es = *std::max_element(pop.good_es_maxrob.begin(), pop.good_es_maxrob.end());
    if (f.margin != margin || f.acc != static_cast<double>(okc) / traces ||
        f.good_rob_sel != sel || f.good_rob_es != es)
      ok = false;
  }
  report(4, ok, "split scores, margin, and fitness folds match scalar recomputation");
}

// ---- criterion 5: classification metrics ----
void criterion5() {
  Metrics m = compute_metrics({3, 1, 5, 1});
  bool ok = std::fabs(m.precision - 0.75) < 1e-9 && std::fabs(m.recall - 0.75) < 1e-9 &&
            std::fabs(m.f1 - 0.75) < 1e-9 && std::fabs(m.far - 1.0 / 6.0) < 1e-9 &&
            std::fabs(m.mcc - 14.0 / 24.0) < 1e-9;
  report(5, ok, "classification metrics match the hand-derived confusion matrix");
}

// ---- criterion 6: hypervolume ----
void criterion6() {
  bool ok = hypervolume_2d({{1.0, -1.0}}) == 4.0 && hypervolume_2d({{0.0, 0.0}}) == 1.0 &&
            hypervolume_2d({}) == 0.0;
  Rng rng(10006);
  for (int iter = 0; iter < 10 && ok; ++iter) {
    std::vector<std::pair<double, double>> front;
    std::size_t n = 1 + rng.uniform_int(0, 7);
    for (std::size_t i = 0; i < n; ++i)
      front.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1));
    double hv = hypervolume_2d(front);
    std::size_t inside = 0;
    const std::size_t samples = 4000000;
    for (std::size_t s = 0; s < samples; ++s) {
      double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
      for (auto [m, g] : front)
        if (a <= m && b >= g) {
          ++inside;
          break;
        }
    }
    double mc = 4.0 * static_cast<double>(inside) / static_cast<double>(samples);
    if (std::fabs(hv - mc) > 1e-2) ok = false;
  }
  report(6, ok, "hypervolume matches analytic rectangles and dominance sampling");
}

// ---- criteria 7 and 8: planted end-to-end recovery and anticipation ----
void criteria7and8() {
  auto planted = parse("O(x0 >= 0.85 & x1 >= 0.7)");
  std::vector<double> f1s, fars, preempts, preempts_e1;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SynthConfig sc;
    sc.n_good = 40;
    sc.n_fail = 20;
    sc.length = 60;
    sc.arity = 3;
    Rng gen_train(1000 + seed), gen_test(2000 + seed);
    Dataset train_data = synth_generate(planted, sc, gen_train);
    Dataset test_data = synth_generate(planted, sc, gen_test);

    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 5;
    cfg.seed = seed;
    cfg.ea.pop_size = 200;
    cfg.ea.max_gen = 150;
    cfg.ea.gen.interval_cap = 60;
    cfg.n_aug_good = 5;
    cfg.noise_std = 0.02;

    TrainResult res = train(train_data, {}, cfg);
    Report full = evaluate(res.pool, test_data, res.norm);
    f1s.push_back(full.metrics.f1);
    fars.push_back(full.metrics.far);
    preempts.push_back(full.mean_preemptiveness);

    std::vector<PoolEntry> epoch1;
    for (const auto& e : res.pool)
      if (e.epoch <= 1) epoch1.push_back(e);
    preempts_e1.push_back(evaluate(epoch1, test_data, res.norm).mean_preemptiveness);
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  double f1 = median(f1s), far = median(fars), pre = median(preempts);
  bool ok7 = f1 >= 0.9 && far <= 0.05 && pre > 0.0;
  report(7, ok7,
         "planted detector recovered end to end (median F1=" + std::to_string(f1) +
             ", FAR=" + std::to_string(far) + ", preemptiveness=" + std::to_string(pre) + ")");
  double pre1 = median(preempts_e1);
  report(8, pre >= pre1,
         "second training epoch does not reduce preemptiveness (" + std::to_string(pre1) +
             " -> " + std::to_string(pre) + ")");
}

// ---- criterion 9: bench scaling ----
void criterion9() {
  std::string out = "/tmp/stlmon_acc_bench.txt";
  int rc = run("'" + cli +
               "' bench --mode length --sweep 4000 8000 10000 16000 32000 "
               "--strategies naive-prefix vectorized --reps 3 --budget 600 --out " +
               out);
  std::map<std::string, std::map<std::size_t, double>> t;
  std::ifstream in(out);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string mode, strat, mean, stddev, positives, status;
    std::size_t sweep;
    ls >> mode >> sweep >> strat >> mean >> stddev >> positives >> status;
    if (status == "ok") t[strat][sweep] = std::stod(mean);
  }
  bool have = rc == 0 && t["naive-prefix"].count(10000) && t["vectorized"].count(10000);
  double ratio = have ? t["naive-prefix"][10000] / t["vectorized"][10000] : 0.0;

  auto slope = [&](const std::string& strat) {
    std::vector<double> xs, ys;
    for (auto [len, secs] : t[strat]) {
      xs.push_back(std::log(static_cast<double>(len)));
      ys.push_back(std::log(secs));
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= xs.size();
    my /= ys.size();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      num += (xs[i] - mx) * (ys[i] - my);
      den += (xs[i] - mx) * (xs[i] - mx);
    }
    return num / den;
  };
  double s_naive = have ? slope("naive-prefix") : 0.0;
  double s_vec = have ? slope("vectorized") : 9.0;
  bool ok = have && ratio >= 100.0 && s_naive >= 1.7 && s_vec <= 1.2;
  report(9, ok,
         "bench scaling (speedup x" + std::to_string(ratio) + ", slopes naive=" +
             std::to_string(s_naive) + " vectorized=" + std::to_string(s_vec) + ")");
}

// ---- criterion 10: byte-identical training runs ----
void criterion10() {
  std::string csv = "/tmp/stlmon_acc_det.csv";
  int rc = run("'" + cli +
               "' synth --planted 'O(x0 >= 0.8)' --n-good 8 --n-fail 2 --len 20 "
               "--out " + csv + " --seed 5");
  std::string config = "/tmp/stlmon_acc_det.json";
  std::ofstream(config) << R"({"e": 1, "b": 2, "pop_size": 40, "max_gen": 8,
    "patience": 5, "n_aug_fail": 3, "seed": 7})";
  std::string p1 = "/tmp/stlmon_acc_pool1.txt", p2 = "/tmp/stlmon_acc_pool2.txt";
  rc |= run("'" + cli + "' train --data " + csv + " --config " + config + " --out " + p1 +
            " > /dev/null");
  rc |= run("'" + cli + "' train --data " + csv + " --config " + config + " --out " + p2 +
            " > /dev/null");
  std::string a = slurp(p1), b = slurp(p2);
  report(10, rc == 0 && !a.empty() && a == b,
         "repeated training runs write byte-identical pool files");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <cli-binary>\n";
    return 2;
  }
  cli = argv[1];
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criteria7and8();
  criterion9();
  criterion10();
  std::cout << (failures == 0 ? "all criteria passed" : "criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
