#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nestrank/costrank.hpp"

namespace nestrank {

// The four per-variant statistics fed to the pairwise ranker: working-set
// totals per cache level and against memory, in elements.
struct VariantStats {
  std::int64_t ws_l1 = 0;
  std::int64_t ws_l2 = 0;
  std::int64_t ws_l3 = 0;
  std::int64_t ws_mem = 0;
};

// Folds a cache-fit result into the fixed 4-slot shape: first two levels map
// directly, any further levels accumulate into the l3 slot.
inline VariantStats stats_from_fit(const CacheFitResult& fit) {
  VariantStats s;
  if (!fit.per_level_ws.empty()) s.ws_l1 = fit.per_level_ws[0];
  if (fit.per_level_ws.size() > 1) s.ws_l2 = fit.per_level_ws[1];
  for (std::size_t i = 2; i < fit.per_level_ws.size(); ++i) s.ws_l3 += fit.per_level_ws[i];
  s.ws_mem = fit.mem_ws;
  return s;
}

enum class CompareOutcome { WIN_A, WIN_B, DRAW };

// Joint normalization of a pair: each of the eight statistics divided by the
// sum over both variants, so relative magnitudes stay visible to the net.
inline std::array<double, 8> normalize_pair(const VariantStats& a, const VariantStats& b) {
  const std::int64_t raw[8] = {a.ws_l1, a.ws_l2, a.ws_l3, a.ws_mem,
                               b.ws_l1, b.ws_l2, b.ws_l3, b.ws_mem};
  std::int64_t sum = 0;
  for (std::int64_t v : raw) {
    if (v < 0) throw Error("negative working-set statistic");
    sum += v;
  }
  if (sum == 0) throw DegeneratePairError("both variants have all-zero statistics");
  std::array<double, 8> out{};
  for (int i = 0; i < 8; ++i) out[static_cast<std::size_t>(i)] = static_cast<double>(raw[i]) / static_cast<double>(sum);
  return out;
}

struct TrainPair {
  VariantStats a;
  VariantStats b;
  int winner = 0;  // 0 = A wins, 1 = B wins
};

namespace dnn_detail {

// Deterministic helpers on top of mt19937_64; the standard distributions are
// implementation-defined, these are not.
struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uniform() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen() % n); }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }
};

inline double softsign(double z) { return z / (1.0 + std::fabs(z)); }
inline double softsign_grad(double z) {
  double d = 1.0 + std::fabs(z);
  return 1.0 / (d * d);
}

}  // namespace dnn_detail

// Four hidden layers (64, 32, 16, 8 neurons; relu, relu, softsign, relu)
// and a two-neuron softmax output. A score above the threshold theta calls
// the corresponding variant the winner; neither above is a draw.
class PairwiseRanker {
 public:
  static constexpr std::array<int, 6> kDims = {8, 64, 32, 16, 8, 2};
  static constexpr const char* kActivations[5] = {"relu", "relu", "softsign", "relu", "softmax"};

  struct Layer {
    int in = 0;
    int out = 0;
    std::vector<double> w;  // row-major, out x in
    std::vector<double> b;
  };

  double theta = 0.6;

  static PairwiseRanker initialized(std::uint64_t seed) {
    PairwiseRanker r;
    dnn_detail::Rng rng(seed);
    for (std::size_t li = 0; li + 1 < kDims.size(); ++li) {
      Layer l;
      l.in = kDims[li];
      l.out = kDims[li + 1];
      l.w.resize(static_cast<std::size_t>(l.in * l.out));
      l.b.assign(static_cast<std::size_t>(l.out), 0.0);
      double limit = std::sqrt(6.0 / static_cast<double>(l.in));
      for (double& w : l.w) w = rng.uniform(-limit, limit);
      r.layers_.push_back(std::move(l));
    }
    return r;
  }

  const std::vector<Layer>& layers() const { return layers_; }

  std::array<double, 2> forward(const std::array<double, 8>& input) const {
    std::vector<double> act(input.begin(), input.end());
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      std::vector<double> z = affine(layers_[li], act);
      if (li + 1 == layers_.size()) {
        return softmax2(z);
      }
      apply_activation(li, z);
      act = std::move(z);
    }
    throw Error("ranker has no layers");
  }

  CompareOutcome compare(const VariantStats& a, const VariantStats& b) const {
    std::array<double, 2> o = forward(normalize_pair(a, b));
    if (o[0] > theta) return CompareOutcome::WIN_A;
    if (o[1] > theta) return CompareOutcome::WIN_B;
    return CompareOutcome::DRAW;
  }

  // --- training ------------------------------------------------------------

  // Mini-batch gradient descent on the softmax cross-entropy, deterministic
  // under the seed. Zero epochs returns the freshly initialized net.
  static PairwiseRanker train(const std::vector<TrainPair>& dataset, int epochs,
                              double learning_rate, std::uint64_t seed, int batch_size = 32) {
    if (dataset.empty()) throw EmptyDatasetError("training dataset is empty");
    PairwiseRanker r = initialized(seed);
    dnn_detail::Rng rng(seed ^ 0x5eedf00dULL);
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int e = 0; e < epochs; ++e) {
      rng.shuffle(order);
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
        std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<TrainPair> batch;
        batch.reserve(end - start);
        for (std::size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);
        std::vector<double> grads = r.batch_gradients(batch);
        std::vector<double> params = r.flatten_params();
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= learning_rate * grads[i];
        r.set_params(params);
      }
    }
    return r;
  }

  // Fraction of pairs whose argmax output matches the label.
  static double accuracy(const PairwiseRanker& r, const std::vector<TrainPair>& dataset) {
    if (dataset.empty()) throw EmptyDatasetError("accuracy: dataset is empty");
    std::int64_t good = 0;
    for (const TrainPair& p : dataset) {
      std::array<double, 2> o = r.forward(normalize_pair(p.a, p.b));
      int pred = o[0] >= o[1] ? 0 : 1;
      if (pred == p.winner) ++good;
    }
    return static_cast<double>(good) / static_cast<double>(dataset.size());
  }

  // Mean cross-entropy over a batch.
  double batch_loss(const std::vector<TrainPair>& batch) const {
    double loss = 0;
    for (const TrainPair& p : batch) {
      std::array<double, 2> o = forward(normalize_pair(p.a, p.b));
      loss += -std::log(std::max(o[static_cast<std::size_t>(p.winner)], 1e-300));
    }
    return loss / static_cast<double>(batch.size());
  }

  // Analytic gradient of batch_loss with respect to flatten_params order.
  std::vector<double> batch_gradients(const std::vector<TrainPair>& batch) const {
    std::vector<std::vector<double>> gw(layers_.size()), gb(layers_.size());
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      gw[li].assign(layers_[li].w.size(), 0.0);
      gb[li].assign(layers_[li].b.size(), 0.0);
    }

    for (const TrainPair& p : batch) {
      std::array<double, 8> x = normalize_pair(p.a, p.b);
      std::vector<std::vector<double>> acts;   // layer inputs
      std::vector<std::vector<double>> preact; // z per layer
      acts.emplace_back(x.begin(), x.end());
      for (std::size_t li = 0; li < layers_.size(); ++li) {
        std::vector<double> z = affine(layers_[li], acts.back());
        preact.push_back(z);
        if (li + 1 < layers_.size()) {
          apply_activation(li, z);
          acts.push_back(std::move(z));
        }
      }
      std::array<double, 2> prob = softmax2(preact.back());
      std::vector<double> dz = {prob[0], prob[1]};
      dz[static_cast<std::size_t>(p.winner)] -= 1.0;

      for (std::size_t li = layers_.size(); li-- > 0;) {
        const Layer& l = layers_[li];
        const std::vector<double>& in = acts[li];
        for (int o = 0; o < l.out; ++o) {
          gb[li][static_cast<std::size_t>(o)] += dz[static_cast<std::size_t>(o)];
          for (int i = 0; i < l.in; ++i)
            gw[li][static_cast<std::size_t>(o * l.in + i)] +=
                dz[static_cast<std::size_t>(o)] * in[static_cast<std::size_t>(i)];
        }
        if (li == 0) break;
        std::vector<double> din(static_cast<std::size_t>(l.in), 0.0);
        for (int i = 0; i < l.in; ++i)
          for (int o = 0; o < l.out; ++o)
            din[static_cast<std::size_t>(i)] += l.w[static_cast<std::size_t>(o * l.in + i)] *
                                                dz[static_cast<std::size_t>(o)];
        const std::vector<double>& zprev = preact[li - 1];
        for (int i = 0; i < l.in; ++i) {
          double g;
          if (li - 1 == 2) g = dnn_detail::softsign_grad(zprev[static_cast<std::size_t>(i)]);
          else g = zprev[static_cast<std::size_t>(i)] > 0 ? 1.0 : 0.0;
          din[static_cast<std::size_t>(i)] *= g;
        }
        dz = std::move(din);
      }
    }

    std::vector<double> flat;
    double inv = 1.0 / static_cast<double>(batch.size());
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      for (double v : gw[li]) flat.push_back(v * inv);
      for (double v : gb[li]) flat.push_back(v * inv);
    }
    return flat;
  }

  std::vector<double> flatten_params() const {
    std::vector<double> flat;
    for (const Layer& l : layers_) {
      flat.insert(flat.end(), l.w.begin(), l.w.end());
      flat.insert(flat.end(), l.b.begin(), l.b.end());
    }
    return flat;
  }

  void set_params(const std::vector<double>& flat) {
    std::size_t pos = 0;
    for (Layer& l : layers_) {
      for (double& w : l.w) w = flat[pos++];
      for (double& b : l.b) b = flat[pos++];
    }
  }

  // --- weights file ----------------------------------------------------------

  // Plain-text weights; 17 significant digits round-trip doubles exactly.
  std::string save_text() const {
    std::ostringstream os;
    os << "pairnet 1\n";
    os << "dims";
    for (int d : kDims) os << " " << d;
    os << "\nactivations";
    for (const char* a : kActivations) os << " " << a;
    os << "\ntheta " << fmt(theta) << "\n";
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const Layer& l = layers_[li];
      os << "layer " << li << " " << l.out << " " << l.in << "\n";
      for (int o = 0; o < l.out; ++o) {
        for (int i = 0; i < l.in; ++i) {
          if (i) os << " ";
          os << fmt(l.w[static_cast<std::size_t>(o * l.in + i)]);
        }
        os << "\n";
      }
      os << "bias";
      for (int o = 0; o < l.out; ++o) os << " " << fmt(l.b[static_cast<std::size_t>(o)]);
      os << "\n";
    }
    return os.str();
  }

  static PairwiseRanker load_text(const std::string& text) {
    std::istringstream is(text);
    std::string tok;
    if (!(is >> tok) || tok != "pairnet") throw ParseError("weights: bad magic");
    int version;
    is >> version;
    if (version != 1) throw ParseError("weights: unsupported version");
    if (!(is >> tok) || tok != "dims") throw ParseError("weights: missing dims");
    for (int want : kDims) {
      int got;
      if (!(is >> got) || got != want) throw ParseError("weights: unexpected layer dimensions");
    }
    if (!(is >> tok) || tok != "activations") throw ParseError("weights: missing activations");
    for (const char* want : kActivations) {
      std::string got;
      if (!(is >> got) || got != want) throw ParseError("weights: unexpected activations");
    }
    PairwiseRanker r = initialized(0);
    if (!(is >> tok) || tok != "theta") throw ParseError("weights: missing theta");
    if (!(is >> r.theta)) throw ParseError("weights: bad theta");
    for (std::size_t li = 0; li < r.layers_.size(); ++li) {
      std::size_t idx;
      int out, in;
      if (!(is >> tok >> idx >> out >> in) || tok != "layer" || idx != li ||
          out != r.layers_[li].out || in != r.layers_[li].in)
        throw ParseError("weights: malformed layer header");
      for (double& w : r.layers_[li].w)
        if (!(is >> w)) throw ParseError("weights: truncated weight matrix");
      if (!(is >> tok) || tok != "bias") throw ParseError("weights: missing bias");
      for (double& b : r.layers_[li].b)
        if (!(is >> b)) throw ParseError("weights: truncated bias");
    }
    return r;
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write weights file: " + path);
    f << save_text();
  }

  static PairwiseRanker load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingWeightsError("cannot open weights file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return load_text(ss.str());
  }

 private:
  static std::vector<double> affine(const Layer& l, const std::vector<double>& in) {
    std::vector<double> z(static_cast<std::size_t>(l.out));
    for (int o = 0; o < l.out; ++o) {
      double v = l.b[static_cast<std::size_t>(o)];
      for (int i = 0; i < l.in; ++i)
        v += l.w[static_cast<std::size_t>(o * l.in + i)] * in[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(o)] = v;
    }
    return z;
  }

  static void apply_activation(std::size_t layer_index, std::vector<double>& z) {
    if (layer_index == 2) {
      for (double& v : z) v = dnn_detail::softsign(v);
    } else {
      for (double& v : z) v = v > 0 ? v : 0.0;
    }
  }

  static std::array<double, 2> softmax2(const std::vector<double>& z) {
    double m = std::max(z[0], z[1]);
    double e0 = std::exp(z[0] - m), e1 = std::exp(z[1] - m);
    double s = e0 + e1;
    return {e0 / s, e1 / s};
  }

  static std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

  std::vector<Layer> layers_;
};

// ---------------------------------------------------------------------------
// Tournament ranking

struct TournamentEntry {
  std::string id;
  VariantStats stats;
  Rational cost;  // Eq-style cost, used as the tie-break after wins
};

struct TournamentResult {
  std::vector<std::string> ranked;                      // all ids, best first
  std::vector<std::pair<std::string, int>> wins;        // per id, in id order
  double symmetry = 1.0;                                // order-consistency diagnostic
};

// Every unordered pair plays once, in canonical id order; rank by descending
// wins, then ascending cost, then id. The symmetry field reports the
// fraction of pairs where swapping the inputs flips the outcome consistently
// (the net does not guarantee antisymmetry; this is a diagnostic, not an
// assertion).
inline TournamentResult tournament(const PairwiseRanker& r, std::vector<TournamentEntry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const TournamentEntry& a, const TournamentEntry& b) { return a.id < b.id; });
  std::vector<int> wins(entries.size(), 0);
  std::int64_t consistent = 0, games = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (std::size_t j = i + 1; j < entries.size(); ++j) {
      CompareOutcome o = r.compare(entries[i].stats, entries[j].stats);
      if (o == CompareOutcome::WIN_A) ++wins[i];
      if (o == CompareOutcome::WIN_B) ++wins[j];
      CompareOutcome rev = r.compare(entries[j].stats, entries[i].stats);
      bool agree = (o == CompareOutcome::DRAW && rev == CompareOutcome::DRAW) ||
                   (o == CompareOutcome::WIN_A && rev == CompareOutcome::WIN_B) ||
                   (o == CompareOutcome::WIN_B && rev == CompareOutcome::WIN_A);
      consistent += agree ? 1 : 0;
      ++games;
    }
  }
  std::vector<std::size_t> order(entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (wins[a] != wins[b]) return wins[a] > wins[b];
    if (entries[a].cost != entries[b].cost) return entries[a].cost < entries[b].cost;
    return entries[a].id < entries[b].id;
  });
  TournamentResult res;
  for (std::size_t i : order) res.ranked.push_back(entries[i].id);
  for (std::size_t i = 0; i < entries.size(); ++i) res.wins.emplace_back(entries[i].id, wins[i]);
  res.symmetry = games == 0 ? 1.0 : static_cast<double>(consistent) / static_cast<double>(games);
  return res;
}

inline std::vector<std::string> tournament_rank(const PairwiseRanker& r,
                                                std::vector<TournamentEntry> entries,
                                                std::size_t k) {
  if (entries.empty()) throw EmptyInputError("tournament_rank: no variants");
  TournamentResult res = tournament(r, std::move(entries));
  if (res.ranked.size() > k) res.ranked.resize(k);
  return res.ranked;
}

}  // namespace nestrank
