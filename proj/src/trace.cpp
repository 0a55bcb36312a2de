#include "stlmon/trace.hpp"

#include "stlmon/engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stlmon {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
  auto header = split_csv_line(line);
  if (header.size() < 4 || header.front() != "trace_id" || header[1] != "t" ||
      header.back() != "is_failure")
    throw std::runtime_error("expected header trace_id,t,<vars...>,is_failure");

  Dataset d;
  d.variables.assign(header.begin() + 2, header.end() - 1);
  std::size_t n = d.variables.size();

  Trace* cur = nullptr;
  double last_t = 0;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw std::runtime_error("row " + std::to_string(row) + ": wrong column count");
    const std::string& id = cells[0];
    double tval = std::stod(cells[1]);
    bool fail = cells.back() == "1" || cells.back() == "true";
    if (!fail && cells.back() != "0" && cells.back() != "false")
      throw std::runtime_error("row " + std::to_string(row) + ": bad is_failure value");

    if (!cur || cur->id != id) {
      for (const auto& t : d.traces)
        if (t.id == id)
          throw std::runtime_error("rows of trace " + id + " are not contiguous");
      d.traces.push_back(Trace{id, 0, n, {}, fail, d.sampling_unit});
      cur = &d.traces.back();
    } else {
      if (tval <= last_t)
        throw std::runtime_error("row " + std::to_string(row) + ": non-monotone time for " + id);
      if (cur->is_failure != fail)
        throw std::runtime_error("inconsistent failure flag for trace " + id);
    }
    last_t = tval;
    for (std::size_t v = 0; v < n; ++v) {
      double x = std::stod(cells[2 + v]);
      if (!std::isfinite(x))
        throw std::runtime_error("non-finite value at row " + std::to_string(row));
      cur->values.push_back(x);
    }
    cur->length += 1;
  }
  return d;
}

void save_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "trace_id,t";
  for (const auto& v : d.variables) out << "," << v;
  out << ",is_failure\n";
  for (const auto& t : d.traces) {
    for (std::size_t i = 0; i < t.length; ++i) {
      out << t.id << "," << i;
      for (std::size_t v = 0; v < t.arity; ++v) out << "," << format_number(t.at(i, v));
      out << "," << (t.is_failure ? 1 : 0) << "\n";
    }
  }
}

NormalizationParams normalize_fit(const Dataset& train) {
  if (train.traces.empty()) throw std::invalid_argument("cannot fit on empty dataset");
  std::size_t n = train.traces.front().arity;
  NormalizationParams p;
  p.min.assign(n, std::numeric_limits<double>::infinity());
  p.max.assign(n, -std::numeric_limits<double>::infinity());
  for (const auto& t : train.traces) {
    if (t.arity != n) throw std::invalid_argument("arity mismatch in dataset");
    for (std::size_t i = 0; i < t.length; ++i)
      for (std::size_t v = 0; v < n; ++v) {
        p.min[v] = std::min(p.min[v], t.at(i, v));
        p.max[v] = std::max(p.max[v], t.at(i, v));
      }
  }
  return p;
}

Trace normalize_apply(const NormalizationParams& p, const Trace& t) {
  if (t.arity != p.min.size()) throw std::invalid_argument("arity mismatch with params");
  Trace out = t;
  for (std::size_t i = 0; i < t.length; ++i)
    for (std::size_t v = 0; v < t.arity; ++v) {
      double lo = p.min[v], hi = p.max[v];
      // degenerate variables map to 0.5; values are deliberately not clipped
      out.at(i, v) = hi > lo ? (t.at(i, v) - lo) / (hi - lo) : 0.5;
    }
  return out;
}

Dataset normalize_apply(const NormalizationParams& p, const Dataset& d) {
  Dataset out = d;
  for (auto& t : out.traces) t = normalize_apply(p, t);
  return out;
}

std::vector<Trace> augment(const Trace& t, std::size_t count, double noise_std, Rng& rng) {
  if (noise_std < 0) throw std::invalid_argument("noise_std must be non-negative");
  std::vector<Trace> out;
  out.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    Trace a = t;
    a.id = t.id + "#aug" + std::to_string(c);
    for (auto& v : a.values) v = std::clamp(v + rng.normal(0.0, noise_std), 0.0, 1.0);
    out.push_back(std::move(a));
  }
  return out;
}

TraceBatch batch(const std::vector<Trace>& traces) {
  if (traces.empty()) throw std::invalid_argument("cannot batch zero traces");
  TraceBatch b;
  b.count = traces.size();
  b.arity = traces.front().arity;
  for (const auto& t : traces) {
    if (t.arity != b.arity) throw std::invalid_argument("arity mismatch in batch");
    b.max_length = std::max(b.max_length, t.length);
    b.lengths.push_back(t.length);
  }
  b.block.assign(b.count * b.max_length * b.arity, 0.0);
  for (std::size_t k = 0; k < b.count; ++k)
    std::copy(traces[k].values.begin(), traces[k].values.end(),
              b.block.begin() + static_cast<std::ptrdiff_t>(k * b.max_length * b.arity));
  return b;
}

TraceBatch batch_one(const Trace& t) { return batch(std::vector<Trace>{t}); }

std::vector<Trace> unbatch(const TraceBatch& b) {
  std::vector<Trace> out;
  for (std::size_t k = 0; k < b.count; ++k) {
    Trace t;
    t.length = b.lengths[k];
    t.arity = b.arity;
    t.values.resize(t.length * t.arity);
    for (std::size_t i = 0; i < t.length; ++i)
      for (std::size_t v = 0; v < b.arity; ++v) t.values[i * b.arity + v] = b.at(k, i, v);
    out.push_back(std::move(t));
  }
  return out;
}

Trace cut(const Trace& t, std::size_t v) {
  if (v < 1 || v > t.length) throw std::out_of_range("cut position out of range");
  Trace out = t;
  out.length = v;
  out.values.resize(v * t.arity);
  return out;
}

namespace {

// max over valid positions of the detector's robustness
double max_rob(const FormulaPtr& detector, const Trace& t) {
  auto m = robustness({detector}, batch_one(t));
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < t.length; ++j) mx = std::max(mx, m.at(0, 0, j));
  return mx;
}

Trace random_walk(std::size_t len, std::size_t n, double step, Rng& rng) {
  Trace t;
  t.length = len;
  t.arity = n;
  t.values.resize(len * n);
  for (std::size_t v = 0; v < n; ++v) t.at(0, v) = rng.uniform();
  for (std::size_t i = 1; i < len; ++i)
    for (std::size_t v = 0; v < n; ++v)
      t.at(i, v) = std::clamp(t.at(i - 1, v) + rng.normal(0.0, step), 0.0, 1.0);
  return t;
}

}  // namespace

Dataset synth_generate(const FormulaPtr& planted, const SynthConfig& cfg, Rng& rng) {
  if (fragment_of(*planted) != Fragment::PurePast)
    throw std::invalid_argument("planted detector must be pure past");
  if (cfg.n_good == 0 && cfg.n_fail == 0 && !cfg.allow_empty)
    throw std::invalid_argument("nothing to generate (pass allow_empty to permit)");

  Dataset d;
  d.variables.reserve(cfg.arity);
  int needed = max_var_index(*planted);
  if (needed >= static_cast<int>(cfg.arity))
    throw std::invalid_argument("planted formula references variables beyond arity");
  for (std::size_t v = 0; v < cfg.arity; ++v) d.variables.push_back("x" + std::to_string(v));

  std::size_t tries = 0;
  auto spend = [&] {
    if (++tries > cfg.retry_budget)
      throw std::runtime_error("synth retry budget exceeded; planted detector too easy or too hard to avoid");
  };

  for (std::size_t g = 0; g < cfg.n_good; ++g) {
    tries = 0;
    for (;;) {
      spend();
      Trace t = random_walk(cfg.length, cfg.arity, cfg.walk_step, rng);
      if (max_rob(planted, t) < 0) {
        t.id = "good" + std::to_string(g);
        t.is_failure = false;
        d.traces.push_back(std::move(t));
        break;
      }
    }
  }

  for (std::size_t f = 0; f < cfg.n_fail; ++f) {
    tries = 0;
    for (;;) {
      spend();
      // clean prefix, then a volatile suffix until the detector fires
      std::size_t prefix = cfg.length * 3 / 10 +
                           rng.uniform_int(0, std::max<std::size_t>(cfg.length / 2, 1) - 1);
      prefix = std::min(prefix, cfg.length - 2);
      Trace t = random_walk(cfg.length, cfg.arity, cfg.walk_step, rng);
      for (std::size_t i = prefix; i < cfg.length; ++i)
        for (std::size_t v = 0; v < cfg.arity; ++v) t.at(i, v) = rng.uniform();
      auto m = robustness({planted}, batch_one(t));
      bool clean = true, fires = false;
      for (std::size_t j = 0; j < prefix; ++j) clean = clean && m.at(0, 0, j) < 0;
      for (std::size_t j = prefix; j < t.length; ++j) fires = fires || m.at(0, 0, j) >= 0;
      if (clean && fires) {
        t.id = "fail" + std::to_string(f);
        t.is_failure = true;
        d.traces.push_back(std::move(t));
        break;
      }
    }
  }
  return d;
}

}  // namespace stlmon
