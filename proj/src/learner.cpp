#include "stlmon/learner.hpp"

#include "stlmon/cobyla.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace stlmon {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kHeightCap = 17;
constexpr double kEps = 1e-6;  // epsilon for the empty-prefix split score

double clamp_obj(double v) { return std::clamp(v, -1.0, 1.0); }

// ---- tree navigation (preorder indexing, immutable rebuild) ----

std::size_t node_count(const Formula& f) {
  std::size_t c = 1;
  if (f.lhs) c += node_count(*f.lhs);
  if (f.rhs) c += node_count(*f.rhs);
  return c;
}

FormulaPtr subtree_at(const FormulaPtr& f, std::size_t idx) {
  if (idx == 0) return f;
  --idx;
  if (f->lhs) {
    std::size_t nl = node_count(*f->lhs);
    if (idx < nl) return subtree_at(f->lhs, idx);
    idx -= nl;
  }
  return subtree_at(f->rhs, idx);
}

FormulaPtr replace_at(const FormulaPtr& f, std::size_t idx, const FormulaPtr& sub) {
  if (idx == 0) return sub;
  --idx;
  FormulaPtr l = f->lhs, r = f->rhs;
  if (f->lhs) {
    std::size_t nl = node_count(*f->lhs);
    if (idx < nl) {
      l = replace_at(f->lhs, idx, sub);
    } else if (f->rhs) {
      r = replace_at(f->rhs, idx - nl, sub);
    }
  }
  if (f->kind == Kind::Atom) return f;
  return std::make_shared<Formula>(Formula{f->kind, {}, f->interval, std::move(l), std::move(r)});
}

void collect_thresholds(const Formula& f, std::vector<double>& out) {
  if (f.kind == Kind::Atom) out.push_back(f.atom.threshold);
  if (f.lhs) collect_thresholds(*f.lhs, out);
  if (f.rhs) collect_thresholds(*f.rhs, out);
}

FormulaPtr with_thresholds(const FormulaPtr& f, const std::vector<double>& th, std::size_t& pos) {
  if (f->kind == Kind::Atom) {
    Atom a = f->atom;
    a.threshold = th[pos++];
    return f_atom(std::move(a));
  }
  FormulaPtr l = f->lhs ? with_thresholds(f->lhs, th, pos) : nullptr;
  FormulaPtr r = f->rhs ? with_thresholds(f->rhs, th, pos) : nullptr;
  return std::make_shared<Formula>(Formula{f->kind, {}, f->interval, std::move(l), std::move(r)});
}

FormulaPtr with_thresholds(const FormulaPtr& f, const std::vector<double>& th) {
  std::size_t pos = 0;
  return with_thresholds(f, th, pos);
}

double max_over(const std::vector<double>& v, std::size_t from, std::size_t to_excl) {
  double m = -kInf;
  for (std::size_t i = from; i < to_excl; ++i) m = std::max(m, v[i]);
  return m;
}

}  // namespace

std::vector<double> score_vector(const std::vector<double>& rob) {
  const std::size_t l = rob.size();
  if (l == 0) throw std::invalid_argument("score_vector on empty robustness vector");
  std::vector<double> score(l + 1);
  score[0] = std::min(-std::tanh(rob[0] + kEps), std::tanh(rob[0]));
  double prefix_max = rob[0];
  for (std::size_t i = 1; i < l; ++i) {
    score[i] = std::min(-std::tanh(prefix_max), std::tanh(rob[i]));
    prefix_max = std::max(prefix_max, rob[i]);
  }
  score[l] = std::min(-std::tanh(prefix_max), std::tanh(max_over(rob, 1, l)));
  return score;
}

FitnessRecord fitness(const FitnessInputs& in) {
  if (in.pair_rob.empty()) throw std::invalid_argument("fitness needs at least the original trace");
  if (in.good_sel_maxrob.empty() || in.good_es_maxrob.empty())
    throw std::invalid_argument("fitness needs non-empty good-trace samples");

  FitnessRecord r;
  r.margin = kInf;
  std::size_t clean = 0;
  for (std::size_t t = 0; t < in.pair_rob.size(); ++t) {
    const auto& rob = in.pair_rob[t];
    auto sc = score_vector(rob);
    r.margin = std::min(r.margin, *std::max_element(sc.begin(), sc.end()));
    bool ok = rob[0] < 0 && max_over(rob, 0, rob.size()) >= 0;
    if (ok) ++clean;
    if (t == 0) r.ok_orig = ok;
  }
  r.acc = static_cast<double>(clean) / static_cast<double>(in.pair_rob.size());
  r.good_rob_sel = max_over(in.good_sel_maxrob, 0, in.good_sel_maxrob.size());
  r.good_rob_es = max_over(in.good_es_maxrob, 0, in.good_es_maxrob.size());
  r.evaluated = true;
  return r;
}

std::pair<Individual, Individual> crossover(const Individual& a, const Individual& b, Rng& rng) {
  if (rng.bernoulli(0.5)) {
    // reference-pair swap
    Individual x = a, y = b;
    std::swap(x.pair_id, y.pair_id);
    x.fitness = {};
    y.fitness = {};
    return {std::move(x), std::move(y)};
  }
  std::size_t na = node_count(*a.formula);
  std::size_t nb = node_count(*b.formula);
  for (int attempt = 0; attempt < 8; ++attempt) {
    std::size_t pa = rng.uniform_int(0, na - 1);
    std::size_t pb = rng.uniform_int(0, nb - 1);
    FormulaPtr fa = replace_at(a.formula, pa, subtree_at(b.formula, pb));
    FormulaPtr fb = replace_at(b.formula, pb, subtree_at(a.formula, pa));
    if (formula_height(*fa) <= kHeightCap && formula_height(*fb) <= kHeightCap) {
      Individual x = a, y = b;
      x.formula = std::move(fa);
      y.formula = std::move(fb);
      x.fitness = {};
      y.fitness = {};
      return {std::move(x), std::move(y)};
    }
  }
  // repair fallback: pair swap keeps both heights legal
  Individual x = a, y = b;
  std::swap(x.pair_id, y.pair_id);
  x.fitness = {};
  y.fitness = {};
  return {std::move(x), std::move(y)};
}

namespace {

Kind random_same_arity_kind(const Formula& node, Rng& rng, bool& wants_interval) {
  wants_interval = false;
  if (node.is_binary()) {
    static const Kind ks[] = {Kind::And, Kind::Or, Kind::Since, Kind::Triggers};
    Kind k = ks[rng.uniform_int(0, std::size(ks) - 1)];
    wants_interval = k == Kind::Since || k == Kind::Triggers;
    return k;
  }
  static const Kind ks[] = {Kind::Not, Kind::Yesterday, Kind::WeakYesterday,
                            Kind::Once, Kind::Historically};
  Kind k = ks[rng.uniform_int(0, std::size(ks) - 1)];
  wants_interval = k == Kind::Once || k == Kind::Historically;
  return k;
}

FormulaPtr jitter_constants(const FormulaPtr& f, const EAConfig& cfg, Rng& rng) {
  if (f->kind == Kind::Atom) {
    Atom a = f->atom;
    a.threshold = std::clamp(a.threshold + rng.normal(0.0, 0.1), 0.0, 1.0);
    return f_atom(std::move(a));
  }
  FormulaPtr l = f->lhs ? jitter_constants(f->lhs, cfg, rng) : nullptr;
  FormulaPtr r = f->rhs ? jitter_constants(f->rhs, cfg, rng) : nullptr;
  Interval iv = f->interval;
  if (f->has_interval() && !iv.is_default()) {
    std::uint32_t cap = cfg.gen.interval_cap;
    auto step = [&](std::uint32_t v) -> std::uint32_t {
      if (rng.bernoulli(0.5)) return v < cap ? v + 1 : v;
      return v > 0 ? v - 1 : v;
    };
    iv.lo = step(iv.lo);
    if (!iv.unbounded()) {
      iv.hi = step(iv.hi);
      if (iv.lo > iv.hi) std::swap(iv.lo, iv.hi);
    }
  }
  return std::make_shared<Formula>(Formula{f->kind, {}, iv, std::move(l), std::move(r)});
}

}  // namespace

Individual mutate(const Individual& a, std::size_t generation_index, const EAConfig& cfg,
                  Rng& rng) {
  if (generation_index < 1) throw std::invalid_argument("generation index starts at 1");
  double rate = cfg.mut_prob / std::cbrt(static_cast<double>(generation_index));
  if (!rng.bernoulli(rate)) return a;

  Individual out = a;
  out.fitness = {};
  std::size_t n = node_count(*a.formula);
  switch (rng.uniform_int(0, 2)) {
    case 0: {  // node replacement, same arity
      std::size_t idx = rng.uniform_int(0, n - 1);
      FormulaPtr node = subtree_at(a.formula, idx);
      if (node->kind == Kind::Atom || node->kind == Kind::True) {
        out.formula = replace_at(a.formula, idx, sample_atom(rng, cfg.gen));
      } else {
        bool iv;
        Kind k = random_same_arity_kind(*node, rng, iv);
        Interval interval = iv ? node->interval : Interval{};
        FormulaPtr repl =
            node->is_binary() ? f_binary(k, node->lhs, node->rhs, interval)
                              : (k == Kind::Not ? f_not(node->lhs) : f_unary(k, node->lhs, interval));
        out.formula = replace_at(a.formula, idx, repl);
      }
      break;
    }
    case 1: {  // shrink: branch replaced by one of its arguments
      std::vector<std::size_t> internal;
      for (std::size_t i = 0; i < n; ++i)
        if (subtree_at(a.formula, i)->lhs) internal.push_back(i);
      if (internal.empty()) return a;
      std::size_t idx = internal[rng.uniform_int(0, internal.size() - 1)];
      FormulaPtr node = subtree_at(a.formula, idx);
      FormulaPtr arg = node->rhs && rng.bernoulli(0.5) ? node->rhs : node->lhs;
      out.formula = replace_at(a.formula, idx, arg);
      break;
    }
    default:
      out.formula = jitter_constants(a.formula, cfg, rng);
  }
  return out;
}

namespace {

// fast non-dominated sort on (maximize margin, minimize good_rob_sel)
bool dominates(const Individual& a, const Individual& b) {
  bool ge = a.fitness.margin >= b.fitness.margin && a.fitness.good_rob_sel <= b.fitness.good_rob_sel;
  bool gt = a.fitness.margin > b.fitness.margin || a.fitness.good_rob_sel < b.fitness.good_rob_sel;
  return ge && gt;
}

}  // namespace

std::vector<Individual> nsga2_select(std::vector<Individual> partition, std::size_t target_size) {
  if (target_size > partition.size())
    throw std::invalid_argument("target size exceeds partition size");
  std::stable_sort(partition.begin(), partition.end(),
                   [](const Individual& a, const Individual& b) { return a.order < b.order; });

  const std::size_t n = partition.size();
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<std::size_t> dom_count(n, 0);
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<std::size_t> first;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (dominates(partition[i], partition[j]))
        dominated[i].push_back(j);
      else if (dominates(partition[j], partition[i]))
        ++dom_count[i];
    }
    if (dom_count[i] == 0) first.push_back(i);
  }
  fronts.push_back(first);
  while (!fronts.back().empty()) {
    std::vector<std::size_t> next;
    for (std::size_t i : fronts.back())
      for (std::size_t j : dominated[i])
        if (--dom_count[j] == 0) next.push_back(j);
    fronts.push_back(std::move(next));
  }
  fronts.pop_back();

  std::vector<Individual> out;
  out.reserve(target_size);
  for (const auto& front : fronts) {
    if (out.size() + front.size() <= target_size) {
      for (std::size_t i : front) out.push_back(partition[i]);
      if (out.size() == target_size) break;
      continue;
    }
    // crowding distance cut inside the boundary front
    std::vector<std::pair<double, std::size_t>> crowd;  // (-distance, idx) for sorting
    std::vector<double> dist(front.size(), 0.0);
    for (int obj = 0; obj < 2; ++obj) {
      std::vector<std::size_t> ord(front.size());
      std::iota(ord.begin(), ord.end(), 0);
      auto key = [&](std::size_t fi) {
        const auto& fit = partition[front[fi]].fitness;
        return obj == 0 ? fit.margin : fit.good_rob_sel;
      };
      std::stable_sort(ord.begin(), ord.end(),
                       [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
      double span = key(ord.back()) - key(ord.front());
      dist[ord.front()] = dist[ord.back()] = kInf;
      if (span > 0)
        for (std::size_t p = 1; p + 1 < ord.size(); ++p)
          dist[ord[p]] += (key(ord[p + 1]) - key(ord[p - 1])) / span;
    }
    std::vector<std::size_t> ord(front.size());
    std::iota(ord.begin(), ord.end(), 0);
    std::stable_sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) {
      if (dist[a] != dist[b]) return dist[a] > dist[b];
      return partition[front[a]].order < partition[front[b]].order;
    });
    for (std::size_t p = 0; p < ord.size() && out.size() < target_size; ++p)
      out.push_back(partition[front[ord[p]]]);
    break;
  }
  return out;
}

double hypervolume_2d(const std::vector<std::pair<double, double>>& points) {
  if (points.empty()) return 0.0;
  std::vector<std::pair<double, double>> pts;
  pts.reserve(points.size());
  for (auto [m, g] : points) pts.emplace_back(clamp_obj(m), clamp_obj(g));
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  double hv = 0.0;
  double best_good = 1.0;  // reference corner (-1, +1)
  for (auto [m, g] : pts)
    if (g < best_good) {
      hv += (m + 1.0) * (best_good - g);
      best_good = g;
    }
  return hv;
}

namespace {

double individual_hv(double margin, double good_rob) {
  return (clamp_obj(margin) + 1.0) * (1.0 - clamp_obj(good_rob));
}

std::vector<std::size_t> sample_indices(std::size_t universe, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(universe);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < count && i + 1 < universe; ++i)
    std::swap(idx[i], idx[i + rng.uniform_int(0, universe - 1 - i)]);
  idx.resize(std::min(count, universe));
  return idx;
}

double max_rob_row(const RobustnessMatrix& m, std::size_t q, std::size_t k) {
  double mx = -kInf;
  for (std::size_t j = 0; j < m.lengths[k]; ++j) mx = std::max(mx, m.at(q, k, j));
  return mx;
}

// Shared evaluation state for one learn_formulas run.
struct EvalState {
  const std::vector<AugmentedPair>& pairs;
  const std::vector<Trace>& good;
  std::vector<std::size_t> pair_offset;  // row offset of each pair in the batch
  std::vector<std::size_t> pair_size;
  std::vector<std::size_t> sel_idx, es_idx;
  TraceBatch combined;  // pair traces ++ sel ++ es

  EvalState(const std::vector<AugmentedPair>& p, const std::vector<Trace>& g)
      : pairs(p), good(g) {}

  void rebuild() {
    std::vector<Trace> all;
    pair_offset.clear();
    pair_size.clear();
    for (const auto& pr : pairs) {
      pair_offset.push_back(all.size());
      pair_size.push_back(1 + pr.augmentations.size());
      all.push_back(pr.original);
      for (const auto& a : pr.augmentations) all.push_back(a);
    }
    for (std::size_t i : sel_idx) all.push_back(good[i]);
    for (std::size_t i : es_idx) all.push_back(good[i]);
    combined = batch(all);
  }

  // Evaluates every individual whose fitness record is stale, in one engine call.
  void evaluate(std::vector<Individual>& pop) {
    std::vector<std::size_t> todo;
    std::vector<FormulaPtr> formulas;
    for (std::size_t i = 0; i < pop.size(); ++i)
      if (!pop[i].fitness.evaluated) {
        todo.push_back(i);
        formulas.push_back(pop[i].formula);
      }
    if (todo.empty()) return;
    RobustnessMatrix m = robustness(formulas, combined);
    std::size_t sel_base = pair_offset.back() + pair_size.back();
    std::size_t es_base = sel_base + sel_idx.size();
    for (std::size_t q = 0; q < todo.size(); ++q) {
      Individual& ind = pop[todo[q]];
      FitnessInputs in;
      std::size_t off = pair_offset[ind.pair_id];
      for (std::size_t t = 0; t < pair_size[ind.pair_id]; ++t) {
        std::size_t k = off + t;
        in.pair_rob.emplace_back(m.values.begin() + ((q * m.traces + k) * m.max_length),
                                 m.values.begin() + ((q * m.traces + k) * m.max_length) +
                                     m.lengths[k]);
      }
      for (std::size_t s = 0; s < sel_idx.size(); ++s)
        in.good_sel_maxrob.push_back(max_rob_row(m, q, sel_base + s));
      for (std::size_t s = 0; s < es_idx.size(); ++s)
        in.good_es_maxrob.push_back(max_rob_row(m, q, es_base + s));
      ind.fitness = fitness(in);
    }
  }
};

}  // namespace

Individual refine_constants(const Individual& ind, const RefineContext& ctx) {
  std::vector<double> th;
  collect_thresholds(*ind.formula, th);
  if (th.empty()) return ind;

  TraceBatch pair_b = batch(ctx.pair_traces);
  TraceBatch good_b = batch(ctx.good_traces);

  // cache the last evaluation so paired objective/constraint calls cost one pass
  std::vector<double> cached_x;
  double cached_margin = 0, cached_goodrob = 0;
  auto eval = [&](const std::vector<double>& x) {
    if (x == cached_x) return;
    FormulaPtr f = with_thresholds(ind.formula, x);
    RobustnessMatrix mp = robustness({f}, pair_b);
    double margin = kInf;
    for (std::size_t k = 0; k < pair_b.count; ++k) {
      std::vector<double> rob(mp.values.begin() + k * mp.max_length,
                              mp.values.begin() + k * mp.max_length + mp.lengths[k]);
      auto sc = score_vector(rob);
      margin = std::min(margin, *std::max_element(sc.begin(), sc.end()));
    }
    RobustnessMatrix mg = robustness({f}, good_b);
    double gr = -kInf;
    for (std::size_t k = 0; k < good_b.count; ++k) gr = std::max(gr, max_rob_row(mg, 0, k));
    cached_x = x;
    cached_margin = margin;
    cached_goodrob = gr;
  };

  auto objective = [&](const std::vector<double>& x) {
    eval(x);
    return -clamp_obj(cached_margin);
  };
  // Interpret the strict "stays below zero on good traces" requirement with a
  // small slack so refined thresholds keep clearance from the good behaviors
  // instead of landing exactly on their maxima.
  constexpr double kGoodSlack = 0.1;
  auto constraint = [&](const std::vector<double>& x) {
    eval(x);
    return -clamp_obj(cached_goodrob) - kGoodSlack;
  };

  OptimizeResult res =
      minimize_linear_approx(objective, constraint, th, 0.1, 1e-3, ctx.max_evals);
  Individual out = ind;
  out.formula = with_thresholds(ind.formula, res.x);
  out.fitness = {};
  return out;
}

std::vector<LearnedFormula> learn_formulas(const std::vector<AugmentedPair>& batch_pairs,
                                           const std::vector<Trace>& good_traces,
                                           const EAConfig& cfg, Rng& rng) {
  if (batch_pairs.empty()) return {};
  if (good_traces.empty()) throw std::invalid_argument("learn_formulas needs good traces");

  const std::size_t npairs = batch_pairs.size();
  const std::size_t sample_size = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::ceil(cfg.fract_good * static_cast<double>(good_traces.size()))));

  EvalState st(batch_pairs, good_traces);
  st.sel_idx = sample_indices(good_traces.size(), sample_size, rng);
  st.es_idx = sample_indices(good_traces.size(), sample_size, rng);
  st.rebuild();

  // population: pop_size split evenly across pairs
  std::vector<Individual> pop;
  std::vector<std::size_t> targets(npairs);
  std::size_t order = 0;
  for (std::size_t p = 0; p < npairs; ++p) {
    std::size_t share = cfg.pop_size / npairs + (p < cfg.pop_size % npairs ? 1 : 0);
    targets[p] = std::max<std::size_t>(share, 1);
    for (std::size_t i = 0; i < targets[p]; ++i)
      pop.push_back(Individual{sample_ppstl(rng, cfg.gen), p, {}, order++});
  }

  st.evaluate(pop);

  double best_hv = -1.0;
  std::vector<Individual> best_pop = pop;
  std::size_t stall = 0;

  for (std::size_t g = 1; g <= cfg.max_gen; ++g) {
    if (g > 1 && cfg.r_interval > 0 && (g - 1) % cfg.r_interval == 0) {
      st.sel_idx = sample_indices(good_traces.size(), sample_size, rng);
      st.rebuild();
      for (auto& ind : pop) ind.fitness.evaluated = false;
      st.evaluate(pop);
    }

    std::vector<Individual> offspring;
    offspring.reserve(cfg.pop_size + 1);
    while (offspring.size() < cfg.pop_size) {
      const Individual& pa = pop[rng.uniform_int(0, pop.size() - 1)];
      const Individual& pb = pop[rng.uniform_int(0, pop.size() - 1)];
      Individual ca = pa, cb = pb;
      if (rng.bernoulli(cfg.cross_prob)) std::tie(ca, cb) = crossover(pa, pb, rng);
      ca = mutate(ca, g, cfg, rng);
      cb = mutate(cb, g, cfg, rng);
      ca.order = order++;
      cb.order = order++;
      offspring.push_back(std::move(ca));
      offspring.push_back(std::move(cb));
    }
    offspring.resize(cfg.pop_size);

    std::vector<Individual> merged = pop;
    merged.insert(merged.end(), offspring.begin(), offspring.end());
    st.evaluate(merged);

    std::vector<std::vector<Individual>> parts(npairs);
    for (auto& ind : merged) parts[ind.pair_id].push_back(std::move(ind));
    pop.clear();
    for (std::size_t p = 0; p < npairs; ++p) {
      std::size_t tgt = std::min(targets[p], parts[p].size());
      auto kept = nsga2_select(std::move(parts[p]), tgt);
      pop.insert(pop.end(), kept.begin(), kept.end());
    }

    std::vector<std::pair<double, double>> pts;
    pts.reserve(pop.size());
    for (const auto& ind : pop) pts.emplace_back(ind.fitness.margin, ind.fitness.good_rob_es);
    double hv = hypervolume_2d(pts);
    if (cfg.hv_log) cfg.hv_log->push_back(hv);
    if (hv > best_hv) {
      best_hv = hv;
      best_pop = pop;
      stall = 0;
    } else if (++stall >= cfg.patience) {
      break;
    }
  }

  // full-good-set statistics for the retrieved population
  TraceBatch good_b = batch(good_traces);
  std::vector<FormulaPtr> formulas;
  formulas.reserve(best_pop.size());
  for (const auto& ind : best_pop) formulas.push_back(ind.formula);
  RobustnessMatrix mg = robustness(formulas, good_b);
  for (std::size_t q = 0; q < best_pop.size(); ++q) {
    double gr = -kInf;
    std::size_t alarms = 0;
    for (std::size_t k = 0; k < good_b.count; ++k) {
      double mr = max_rob_row(mg, q, k);
      gr = std::max(gr, mr);
      if (mr >= 0) ++alarms;
    }
    best_pop[q].fitness.good_rob_full = gr;
    best_pop[q].fitness.far = static_cast<double>(alarms) / static_cast<double>(good_b.count);
  }

  std::vector<LearnedFormula> out;
  for (std::size_t p = 0; p < npairs; ++p) {
    std::vector<Individual> part;
    for (const auto& ind : best_pop)
      if (ind.pair_id == p) part.push_back(ind);
    if (part.empty()) continue;
    std::stable_sort(part.begin(), part.end(), [](const Individual& a, const Individual& b) {
      double ha = individual_hv(a.fitness.margin, *a.fitness.good_rob_full);
      double hb = individual_hv(b.fitness.margin, *b.fitness.good_rob_full);
      if (ha != hb) return ha > hb;
      return a.order < b.order;
    });
    part.resize(std::min(part.size(), cfg.k_opt));

    RefineContext rc;
    rc.pair_traces.push_back(batch_pairs[p].original);
    for (const auto& a : batch_pairs[p].augmentations) rc.pair_traces.push_back(a);
    rc.good_traces = good_traces;
    rc.max_evals = cfg.refine_max_iter;

    const Individual* winner = nullptr;
    Individual refined_store;
    double winner_hv = -kInf;
    std::vector<Individual> refined_all;
    for (const auto& cand : part) refined_all.push_back(refine_constants(cand, rc));

    // re-evaluate the refined candidates against pair traces and the full good set
    TraceBatch pair_b = batch(rc.pair_traces);
    std::vector<FormulaPtr> rf;
    for (const auto& ind : refined_all) rf.push_back(ind.formula);
    RobustnessMatrix mp = robustness(rf, pair_b);
    RobustnessMatrix mfull = robustness(rf, good_b);
    for (std::size_t q = 0; q < refined_all.size(); ++q) {
      Individual& ind = refined_all[q];
      FitnessInputs in;
      for (std::size_t k = 0; k < pair_b.count; ++k)
        in.pair_rob.emplace_back(mp.values.begin() + (q * mp.traces + k) * mp.max_length,
                                 mp.values.begin() + (q * mp.traces + k) * mp.max_length +
                                     mp.lengths[k]);
      in.good_sel_maxrob.push_back(-kInf);  // placeholders, unused below
      in.good_es_maxrob.push_back(-kInf);
      ind.fitness = fitness(in);
      double gr = -kInf;
      std::size_t alarms = 0;
      for (std::size_t k = 0; k < good_b.count; ++k) {
        double mr = max_rob_row(mfull, q, k);
        gr = std::max(gr, mr);
        if (mr >= 0) ++alarms;
      }
      ind.fitness.good_rob_full = gr;
      ind.fitness.far = static_cast<double>(alarms) / static_cast<double>(good_b.count);

      bool pass = ind.fitness.acc >= cfg.min_acc && ind.fitness.ok_orig &&
                  *ind.fitness.far <= cfg.max_far;
      double hv = individual_hv(ind.fitness.margin, *ind.fitness.good_rob_full);
      if (pass && hv > winner_hv) {
        winner_hv = hv;
        refined_store = ind;
        winner = &refined_store;
      }
    }

    if (winner)
      out.push_back(LearnedFormula{winner->formula, p, batch_pairs[p].original.id,
                                   winner->fitness.acc, *winner->fitness.far,
                                   winner->fitness.margin});
  }
  return out;
}

}  // namespace stlmon
