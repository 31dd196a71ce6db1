#include "colab/prediction.hpp"

#include "colab/model.hpp"

#include <algorithm>
#include <cmath>

namespace colab {

namespace {

std::vector<double> community_weights(const ModelParams& params, int user, bool use_prior) {
  const auto M = static_cast<std::size_t>(params.n_communities());
  std::vector<double> w(M, 1.0);
  if (use_prior) {
    const auto row = params.pi.row(static_cast<std::size_t>(user));
    std::copy(row.begin(), row.end(), w.begin());
  }
  return w;
}

void rank(std::vector<ScoredVenue>& scored, std::size_t keep) {
  auto better = [](const ScoredVenue& a, const ScoredVenue& b) {
    return a.score > b.score || (a.score == b.score && a.venue < b.venue);
  };
  keep = std::min(keep, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), better);
  scored.resize(keep);
}

std::vector<ScoredVenue> score_all(const ModelParams& params, const HyperParams& hyper, const Trace& trace,
                                   std::span<const int> history, int user, double t,
                                   std::span<const int> candidates, const ScoringOptions& options) {
  if (candidates.empty()) {
    throw ContractError("score_candidates: empty candidate set");
  }
  if (user < 0 || user >= params.n_users()) {
    throw ContractError("score_candidates: user out of range");
  }
  const auto M = static_cast<std::size_t>(params.n_communities());
  const auto V = static_cast<std::size_t>(params.n_categories());
  const auto i = static_cast<std::size_t>(user);
  const std::vector<double> w = community_weights(params, user, options.use_prior);

  std::vector<double> base(V, 0.0);
  for (std::size_t c = 0; c < V; ++c) {
    for (std::size_t g = 0; g < M; ++g) {
      base[c] += w[g] * params.mu[i] * params.eta[g] * params.theta(g, c);
    }
  }
  std::vector<int> active;
  for (int k : history) {
    const Event& e = trace.events.at(static_cast<std::size_t>(k));
    if (!(e.t < t)) {
      throw ContractError("score_candidates: history event is not before the query time");
    }
    if (std::exp(-hyper.nu * (t - e.t)) >= hyper.history_cutoff &&
        params.A(static_cast<std::size_t>(e.user), i) != 0.0) {
      active.push_back(k);
    }
  }
  std::vector<double> mark(active.size() * V, 0.0);
  for (std::size_t h = 0; h < active.size(); ++h) {
    const auto src = static_cast<std::size_t>(trace.events[static_cast<std::size_t>(active[h])].user);
    for (std::size_t c = 0; c < V; ++c) {
      double value = 0.0;
      for (std::size_t g = 0; g < M; ++g) {
        value += w[g] * params.phi(src, g) * params.theta(g, c);
      }
      mark[h * V + c] = value;
    }
  }
  ScoringQuery query;
  query.user = user;
  query.t = t;
  query.history = active;
  query.base_by_category = base;
  query.mark_by_history = mark;
  query.n_categories = V;
  std::vector<ScoredVenue> scored(candidates.size());
  if (options.parallel) {
    kernels::parallel::score_venues(trace, params, hyper, query, candidates, scored);
  } else {
    kernels::serial::score_venues(trace, params, hyper, query, candidates, scored);
  }
  return scored;
}

} // namespace

std::vector<ScoredVenue> score_candidates(const ModelParams& params, const HyperParams& hyper, const Trace& trace,
                                          std::span<const int> history, int user, double t,
                                          std::span<const int> candidates, const ScoringOptions& options) {
  std::vector<ScoredVenue> scored = score_all(params, hyper, trace, history, user, t, candidates, options);
  rank(scored, scored.size());
  return scored;
}

std::pair<Trace, Trace> split_trace(const Trace& trace, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ContractError("split_trace: fraction must lie in [0, 1]");
  }
  const auto n_train = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(trace.size())));
  Trace train = trace;
  Trace test = trace;
  train.events.assign(trace.events.begin(), trace.events.begin() + static_cast<std::ptrdiff_t>(n_train));
  test.events.assign(trace.events.begin() + static_cast<std::ptrdiff_t>(n_train), trace.events.end());
  if (!train.events.empty() && train.events.back().t > 0.0) {
    train.region.t_end = train.events.back().t;
  }
  return {std::move(train), std::move(test)};
}

std::vector<int> seen_venues(const Trace& train) {
  std::vector<char> seen(train.venues.size(), 0);
  for (const Event& e : train.events) {
    seen[static_cast<std::size_t>(e.venue)] = 1;
  }
  std::vector<int> out;
  for (std::size_t v = 0; v < seen.size(); ++v) {
    if (seen[v]) {
      out.push_back(static_cast<int>(v));
    }
  }
  return out;
}

PredictionResult evaluate_topk(const ModelParams& params, const HyperParams& hyper, const Trace& train,
                               const Trace& test, std::vector<int> ks, const ScoringOptions& options) {
  if (ks.empty()) {
    throw ContractError("evaluate_topk: empty K list");
  }
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  const std::vector<int> candidates = seen_venues(train);
  if (candidates.empty()) {
    throw ContractError("evaluate_topk: no training venues");
  }
  if (ks.front() < 1 || static_cast<std::size_t>(ks.back()) > candidates.size()) {
    throw ContractError("evaluate_topk: K must lie in [1, number of candidate venues]");
  }
  Trace all = train;
  all.events.insert(all.events.end(), test.events.begin(), test.events.end());
  all.region = test.region;
  all.validate();

  PredictionResult result;
  result.ks = ks;
  result.hits.assign(ks.size(), 0);
  result.n_test = static_cast<int>(test.size());
  const std::size_t keep = static_cast<std::size_t>(ks.back());
  const std::size_t offset = train.size();
  for (std::size_t j = 0; j < test.size(); ++j) {
    const std::size_t n = offset + j;
    const Event& e = all.events[n];
    const auto first = all.events.begin();
    const auto end = std::partition_point(first, first + static_cast<std::ptrdiff_t>(n),
                                          [&](const Event& x) { return x.t < e.t; });
    const auto begin = std::partition_point(first, end, [&](const Event& x) {
      return std::exp(-hyper.nu * (e.t - x.t)) < hyper.history_cutoff;
    });
    std::vector<int> history(static_cast<std::size_t>(end - begin));
    for (std::size_t h = 0; h < history.size(); ++h) {
      history[h] = static_cast<int>((begin - first) + static_cast<std::ptrdiff_t>(h));
    }
    std::vector<ScoredVenue> scored = score_all(params, hyper, all, history, e.user, e.t, candidates, options);
    rank(scored, keep);
    std::vector<int> ranked(scored.size());
    std::transform(scored.begin(), scored.end(), ranked.begin(), [](const ScoredVenue& s) { return s.venue; });
    const auto pos = static_cast<std::size_t>(std::find(ranked.begin(), ranked.end(), e.venue) - ranked.begin());
    std::vector<char> hit(ks.size(), 0);
    for (std::size_t k = 0; k < ks.size(); ++k) {
      hit[k] = pos < static_cast<std::size_t>(ks[k]) ? 1 : 0;
      result.hits[k] += hit[k];
    }
    result.ranked.push_back(std::move(ranked));
    result.hit.push_back(std::move(hit));
  }
  return result;
}

} // namespace colab
