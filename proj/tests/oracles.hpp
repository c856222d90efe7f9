// Copyright 2026 The Authors.
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

// Independent reference computations used by the tests. Nothing here calls
// into the code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <random>
#include <vector>

namespace oracle {

/// Optimal makespan by enumerating every assignment of jobs to channels.
inline double brute_force_makespan(const std::vector<double>& jobs, int channels) {
  const std::size_t n = jobs.size();
  std::vector<int> slot(n, 0);
  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    std::vector<double> load(static_cast<std::size_t>(channels), 0.0);
    for (std::size_t i = 0; i < n; ++i) load[static_cast<std::size_t>(slot[i])] += jobs[i];
    best = std::min(best, *std::max_element(load.begin(), load.end()));
    std::size_t i = 0;
    while (i < n && ++slot[i] == channels) slot[i++] = 0;
    if (i == n) break;
  }
  return best;
}

struct Link {
  int client = 0;
  double downlink = 0.0;
  double uplink = 0.0;
  bool dropped = false;
};

/// Event-list replay of one round: every client receives the model in
/// parallel; once the last download finishes, each channel serves its queue
/// in order. Returns the time of the last event.
inline double event_replay(const std::vector<std::vector<int>>& queues,
                           const std::map<int, Link>& links) {
  using Event = std::pair<double, int>;  // (time, kind): 0 download done, 1 upload done
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
  for (const auto& q : queues) {
    for (int c : q) events.push({links.at(c).downlink, 0});
  }
  double now = 0.0;
  std::size_t pending_downloads = events.size();
  while (pending_downloads > 0) {
    now = events.top().first;
    events.pop();
    --pending_downloads;
  }
  const double barrier = now;
  for (const auto& q : queues) {
    double t = barrier;
    for (int c : q) {
      const Link& l = links.at(c);
      if (l.dropped) continue;
      t += l.uplink;
      events.push({t, 1});
    }
  }
  while (!events.empty()) {
    now = std::max(now, events.top().first);
    events.pop();
  }
  return now;
}

/// Best achievable class coverage over every k-subset of histograms.
inline int brute_force_coverage(const std::vector<std::vector<long>>& hists, int k,
                                long threshold) {
  const int n = static_cast<int>(hists.size());
  const int take = std::min(k, n);
  const std::size_t classes = hists.empty() ? 0 : hists.front().size();
  int best = 0;
  std::vector<bool> mask(static_cast<std::size_t>(n), false);
  std::fill(mask.begin(), mask.begin() + take, true);
  do {
    std::vector<long> sum(classes, 0);
    for (int i = 0; i < n; ++i) {
      if (!mask[static_cast<std::size_t>(i)]) continue;
      for (std::size_t c = 0; c < classes; ++c) sum[c] += hists[static_cast<std::size_t>(i)][c];
    }
    int covered = 0;
    for (long s : sum) covered += s >= threshold ? 1 : 0;
    best = std::max(best, covered);
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return best;
}

/// Central differences of f at x.
inline std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                             std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f(x);
    x[i] = orig - h;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Mean softmax cross-entropy of a multinomial logistic model, written with
/// explicit loops. Layout: W is D x C column-major (W[d + D*c]), then C biases.
inline double logistic_loss(const std::vector<double>& params, const std::vector<std::vector<double>>& x,
                            const std::vector<int>& y, int d, int c) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::vector<long double> z(static_cast<std::size_t>(c));
    for (int k = 0; k < c; ++k) {
      long double s = params[static_cast<std::size_t>(d * c + k)];
      for (int j = 0; j < d; ++j) {
        s += static_cast<long double>(params[static_cast<std::size_t>(j + d * k)]) * x[i][static_cast<std::size_t>(j)];
      }
      z[static_cast<std::size_t>(k)] = s;
    }
    const long double m = *std::max_element(z.begin(), z.end());
    long double lse = 0.0L;
    for (auto v : z) lse += std::exp(v - m);
    total += m + std::log(lse) - z[static_cast<std::size_t>(y[i])];
  }
  return static_cast<double>(total / static_cast<long double>(x.size()));
}

/// Same model as logistic_loss, one-hidden-layer tanh network.
/// Layout: W1 (D x H), b1 (H), W2 (H x C), b2 (C), column-major blocks.
inline double mlp_loss(const std::vector<double>& p, const std::vector<std::vector<double>>& x,
                       const std::vector<int>& y, int d, int h, int c) {
  long double total = 0.0L;
  const std::size_t off_b1 = static_cast<std::size_t>(d * h);
  const std::size_t off_w2 = off_b1 + static_cast<std::size_t>(h);
  const std::size_t off_b2 = off_w2 + static_cast<std::size_t>(h * c);
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::vector<long double> a(static_cast<std::size_t>(h));
    for (int u = 0; u < h; ++u) {
      long double s = p[off_b1 + static_cast<std::size_t>(u)];
      for (int j = 0; j < d; ++j) s += static_cast<long double>(p[static_cast<std::size_t>(j + d * u)]) * x[i][static_cast<std::size_t>(j)];
      a[static_cast<std::size_t>(u)] = std::tanh(s);
    }
    std::vector<long double> z(static_cast<std::size_t>(c));
    for (int k = 0; k < c; ++k) {
      long double s = p[off_b2 + static_cast<std::size_t>(k)];
      for (int u = 0; u < h; ++u) s += static_cast<long double>(p[off_w2 + static_cast<std::size_t>(u + h * k)]) * a[static_cast<std::size_t>(u)];
      z[static_cast<std::size_t>(k)] = s;
    }
    const long double m = *std::max_element(z.begin(), z.end());
    long double lse = 0.0L;
    for (auto v : z) lse += std::exp(v - m);
    total += m + std::log(lse) - z[static_cast<std::size_t>(y[i])];
  }
  return static_cast<double>(total / static_cast<long double>(x.size()));
}

inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

/// Minimal FedAvg over plain vectors, sharing nothing with the library:
/// std::mt19937_64 randomness, std::gamma_distribution Dirichlet split, full
/// participation of a random k-subset per round, plain-loop logistic SGD.
/// Returns (initial accuracy, final accuracy) on the test set.
struct FedAvgResult {
  double initial_accuracy = 0.0;
  double final_accuracy = 0.0;
};

inline FedAvgResult minimal_fedavg(const std::vector<std::vector<double>>& x_train,
                                   const std::vector<int>& y_train,
                                   const std::vector<std::vector<double>>& x_test,
                                   const std::vector<int>& y_test, int classes, int clients,
                                   double alpha, int k, double dropout, int rounds, double lr,
                                   int batch, int epochs, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const int d = static_cast<int>(x_train.front().size());
  std::vector<std::vector<std::size_t>> shards(static_cast<std::size_t>(clients));
  for (int c = 0; c < classes; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y_train.size(); ++i) {
      if (y_train[i] == c) idx.push_back(i);
    }
    std::shuffle(idx.begin(), idx.end(), gen);
    std::gamma_distribution<double> gamma(alpha, 1.0);
    std::vector<double> p(static_cast<std::size_t>(clients));
    double sum = 0.0;
    for (auto& v : p) sum += (v = gamma(gen));
    double cum = 0.0;
    std::size_t start = 0;
    for (int j = 0; j < clients; ++j) {
      cum += p[static_cast<std::size_t>(j)] / sum;
      std::size_t stop = j + 1 == clients ? idx.size() : static_cast<std::size_t>(cum * static_cast<double>(idx.size()));
      stop = std::max(stop, start);
      for (std::size_t t = start; t < stop; ++t) shards[static_cast<std::size_t>(j)].push_back(idx[t]);
      start = stop;
    }
  }

  auto accuracy = [&](const std::vector<double>& w) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < x_test.size(); ++i) {
      int best = 0;
      double best_z = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < classes; ++c) {
        double z = w[static_cast<std::size_t>(d * classes + c)];
        for (int j = 0; j < d; ++j) z += w[static_cast<std::size_t>(j + d * c)] * x_test[i][static_cast<std::size_t>(j)];
        if (z > best_z) {
          best_z = z;
          best = c;
        }
      }
      correct += best == y_test[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(x_test.size());
  };

  std::vector<double> global(static_cast<std::size_t>((d + 1) * classes), 0.0);
  FedAvgResult out;
  out.initial_accuracy = accuracy(global);
  std::bernoulli_distribution drop(dropout);
  for (int r = 0; r < rounds; ++r) {
    std::vector<int> ids(static_cast<std::size_t>(clients));
    for (int j = 0; j < clients; ++j) ids[static_cast<std::size_t>(j)] = j;
    std::shuffle(ids.begin(), ids.end(), gen);
    ids.resize(static_cast<std::size_t>(std::min(k, clients)));
    std::vector<double> acc(global.size(), 0.0);
    double total = 0.0;
    for (int id : ids) {
      auto shard = shards[static_cast<std::size_t>(id)];
      if (shard.empty()) continue;
      std::vector<double> w = global;
      for (int e = 0; e < epochs; ++e) {
        std::shuffle(shard.begin(), shard.end(), gen);
        for (std::size_t s = 0; s < shard.size(); s += static_cast<std::size_t>(batch)) {
          const std::size_t len = std::min(static_cast<std::size_t>(batch), shard.size() - s);
          std::vector<double> g(w.size(), 0.0);
          for (std::size_t b = 0; b < len; ++b) {
            const auto& xi = x_train[shard[s + b]];
            std::vector<double> z(static_cast<std::size_t>(classes));
            for (int c = 0; c < classes; ++c) {
              double v = w[static_cast<std::size_t>(d * classes + c)];
              for (int j = 0; j < d; ++j) v += w[static_cast<std::size_t>(j + d * c)] * xi[static_cast<std::size_t>(j)];
              z[static_cast<std::size_t>(c)] = v;
            }
            const double m = *std::max_element(z.begin(), z.end());
            double norm = 0.0;
            for (auto& v : z) norm += (v = std::exp(v - m));
            for (int c = 0; c < classes; ++c) {
              const double err = z[static_cast<std::size_t>(c)] / norm - (y_train[shard[s + b]] == c ? 1.0 : 0.0);
              for (int j = 0; j < d; ++j) g[static_cast<std::size_t>(j + d * c)] += err * xi[static_cast<std::size_t>(j)];
              g[static_cast<std::size_t>(d * classes + c)] += err;
            }
          }
          for (std::size_t t = 0; t < w.size(); ++t) w[t] -= lr * g[t] / static_cast<double>(len);
        }
      }
      if (drop(gen)) continue;
      const double n = static_cast<double>(shard.size());
      for (std::size_t t = 0; t < w.size(); ++t) acc[t] += n * w[t];
      total += n;
    }
    if (total > 0.0) {
      for (std::size_t t = 0; t < global.size(); ++t) global[t] = acc[t] / total;
    }
  }
  out.final_accuracy = accuracy(global);
  return out;
}

}  // namespace oracle
