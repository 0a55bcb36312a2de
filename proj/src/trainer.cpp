#include "stlmon/trainer.hpp"

#include "stlmon/engine.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace stlmon {

namespace {

using nlohmann::json;

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j = json::parse(in);

  static const char* known[] = {
      "n_aug_fail", "n_aug_good", "e",        "b",          "noise_std", "seed",
      "min_acc",    "max_far",    "fract_good", "r_interval", "max_gen",   "patience",
      "pop_size",   "mut_prob",   "cross_prob", "k_opt",      "min_height", "max_height",
      "interval_cap", "multisignal", "refine_max_iter"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(std::begin(known), std::end(known),
                     [&](const char* k) { return it.key() == k; }) == std::end(known))
      throw std::runtime_error("unknown config key: " + it.key());
  }

  TrainConfig c;
  read_key(j, "n_aug_fail", c.n_aug_fail);
  read_key(j, "n_aug_good", c.n_aug_good);
  read_key(j, "e", c.epochs);
  read_key(j, "b", c.batch_size);
  read_key(j, "noise_std", c.noise_std);
  read_key(j, "seed", c.seed);
  read_key(j, "min_acc", c.ea.min_acc);
  read_key(j, "max_far", c.ea.max_far);
  read_key(j, "fract_good", c.ea.fract_good);
  read_key(j, "r_interval", c.ea.r_interval);
  read_key(j, "max_gen", c.ea.max_gen);
  read_key(j, "patience", c.ea.patience);
  read_key(j, "pop_size", c.ea.pop_size);
  read_key(j, "mut_prob", c.ea.mut_prob);
  read_key(j, "cross_prob", c.ea.cross_prob);
  read_key(j, "k_opt", c.ea.k_opt);
  read_key(j, "refine_max_iter", c.ea.refine_max_iter);
  read_key(j, "min_height", c.ea.gen.min_height);
  read_key(j, "max_height", c.ea.gen.max_height);
  read_key(j, "interval_cap", c.ea.gen.interval_cap);
  read_key(j, "multisignal", c.ea.gen.multisignal);
  if (c.epochs < 1) throw std::runtime_error("e must be >= 1");
  if (c.batch_size < 1) throw std::runtime_error("b must be >= 1");
  return c;
}

std::vector<AugmentedPair> cut_pairs(const std::vector<AugmentedPair>& pairs,
                                     const std::vector<FormulaPtr>& pool_bodies) {
  if (pool_bodies.empty()) return pairs;
  std::vector<AugmentedPair> out;
  for (const auto& p : pairs) {
    auto v = earliest_violation(pool_bodies, p.original);
    if (!v) {
      out.push_back(p);
      continue;
    }
    if (*v == 0) continue;  // no usable prefix this epoch
    AugmentedPair c;
    c.original = cut(p.original, *v);
    for (const auto& a : p.augmentations) c.augmentations.push_back(cut(a, *v));
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::vector<std::size_t>> generate_batches(std::size_t n, std::size_t b, Rng& rng) {
  if (b < 1) throw std::invalid_argument("batch size must be >= 1");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i + 1 < n; ++i)
    std::swap(idx[i], idx[i + rng.uniform_int(0, n - 1 - i)]);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t off = 0; off < n; off += b)
    out.emplace_back(idx.begin() + off, idx.begin() + std::min(off + b, n));
  return out;
}

TrainResult train(const Dataset& data, std::vector<PoolEntry> pool, const TrainConfig& cfg) {
  bool any_fail = std::any_of(data.traces.begin(), data.traces.end(),
                              [](const Trace& t) { return t.is_failure; });
  if (!any_fail) throw std::runtime_error("no failure traces");

  for (auto& e : pool) {
    try {
      e.formula = bind_variables(e.formula, data.variables);
      e.body = bind_variables(e.body, data.variables);
    } catch (const std::invalid_argument& ex) {
      throw std::runtime_error(std::string("pool/data mismatch: ") + ex.what());
    }
  }

  Rng rng(cfg.seed);
  NormalizationParams norm = normalize_fit(data);
  Dataset nd = normalize_apply(norm, data);

  std::vector<Trace> good;
  std::vector<AugmentedPair> pairs;
  for (const auto& t : nd.traces) {
    if (t.is_failure) {
      AugmentedPair p;
      p.original = t;
      p.augmentations = augment(t, cfg.n_aug_fail, cfg.noise_std, rng);
      pairs.push_back(std::move(p));
    } else {
      good.push_back(t);
    }
  }
  {
    std::vector<Trace> extra;
    for (const auto& g : good) {
      auto a = augment(g, cfg.n_aug_good, cfg.noise_std, rng);
      extra.insert(extra.end(), a.begin(), a.end());
    }
    good.insert(good.end(), extra.begin(), extra.end());
  }

  EAConfig ea = cfg.ea;
  ea.gen.variables = data.variables;

  TrainResult res;
  res.norm = norm;
  res.pool = std::move(pool);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<FormulaPtr> bodies;
    for (const auto& e : res.pool) bodies.push_back(e.body);
    auto cut_f = cut_pairs(pairs, bodies);
    if (cut_f.empty()) {
      res.checkpoints.push_back({epoch, 0, res.pool.size(), 0, {}});
      continue;
    }
    auto batches = generate_batches(cut_f.size(), cfg.batch_size, rng);
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      std::vector<AugmentedPair> bp;
      for (std::size_t i : batches[bi]) bp.push_back(cut_f[i]);
      Rng brng = rng.derive(epoch * 1000 + bi);
      std::vector<double> hv;
      ea.hv_log = &hv;
      auto learned = learn_formulas(bp, good, ea, brng);
      ea.hv_log = nullptr;
      for (const auto& lf : learned) {
        PoolEntry e;
        e.body = lf.formula;
        e.formula = safety_wrap(lf.formula);
        e.epoch = epoch;
        e.batch = bi;
        e.acc = lf.acc;
        e.far = lf.far;
        e.margin = lf.margin;
        e.source_id = lf.source_id;
        res.pool.push_back(std::move(e));
      }
      res.checkpoints.push_back({epoch, bi, res.pool.size(), learned.size(), std::move(hv)});
    }
  }
  return res;
}

void save_pool(const std::vector<PoolEntry>& pool, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open pool file for writing: " + path);
  out << "# pool v1: formula\tepoch\tbatch\tacc\tfar\tmargin\tsource\ttimestamp\n";
  for (const auto& e : pool) {
    out << print(*e.formula) << '\t' << e.epoch << '\t' << e.batch << '\t'
        << format_number(e.acc) << '\t' << format_number(e.far) << '\t'
        << format_number(e.margin) << '\t' << e.source_id << '\t' << e.timestamp << '\n';
  }
}

std::vector<PoolEntry> load_pool(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pool file: " + path);
  std::vector<PoolEntry> pool;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i)
      if (i == line.size() || line[i] == '\t') {
        fields.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    PoolEntry e;
    try {
      e.formula = parse(fields[0]);
    } catch (const ParseError& err) {
      throw std::runtime_error("pool file line " + std::to_string(lineno) +
                               ": " + err.what());
    }
    if (fragment_of(*e.formula) != Fragment::SafetyG)
      throw std::runtime_error("pool file line " + std::to_string(lineno) +
                               ": formula is not G(pure past)");
    const FormulaPtr& inner = e.formula->lhs;
    e.body = inner->kind == Kind::Not ? inner->lhs : f_not(inner);
    if (fields.size() > 1) {
      if (fields.size() != 8)
        throw std::runtime_error("pool file line " + std::to_string(lineno) +
                                 ": expected 1 or 8 fields");
      e.epoch = std::stoul(fields[1]);
      e.batch = std::stoul(fields[2]);
      e.acc = std::stod(fields[3]);
      e.far = std::stod(fields[4]);
      e.margin = std::stod(fields[5]);
      e.source_id = fields[6];
      e.timestamp = fields[7];
    }
    pool.push_back(std::move(e));
  }
  return pool;
}

}  // namespace stlmon
