#include "colab/metrics.hpp"

#include "colab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

namespace colab {

double rel_err(const Matrix& truth, const Matrix& estimate) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols()) {
    throw ContractError("rel_err: shape mismatch");
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t x = 0; x < truth.data().size(); ++x) {
    const double a = truth.data()[x];
    if (std::abs(a) < 1e-9) {
      continue;
    }
    total += std::abs(a - estimate.data()[x]) / std::abs(a);
    ++count;
  }
  if (count == 0) {
    throw ContractError("rel_err: every reference entry is below 1e-9");
  }
  return total / static_cast<double>(count);
}

Matrix event_responsibilities(const ModelParams& params, const HyperParams& hyper, const Trace& trace) {
  trace.validate();
  const auto M = static_cast<std::size_t>(params.n_communities());
  const ExcitationTable table = kernels::parallel::build_excitation_table(trace, hyper);
  Matrix out(trace.size(), M, 0.0);
  const auto n_events = static_cast<std::ptrdiff_t>(trace.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t sn = 0; sn < n_events; ++sn) {
    const auto n = static_cast<std::size_t>(sn);
    const Event& e = trace.events[n];
    const auto i = static_cast<std::size_t>(e.user);
    auto row = out.row(n);
    for (std::size_t m = 0; m < M; ++m) {
      row[m] = params.mu[i] * params.eta[m];
    }
    const auto sources = table.sources(n);
    const auto weights = table.weights(n);
    for (std::size_t p = 0; p < sources.size(); ++p) {
      const auto k = static_cast<std::size_t>(trace.events[static_cast<std::size_t>(sources[p])].user);
      const double a = params.A(k, i) * weights[p];
      if (a == 0.0) {
        continue;
      }
      for (std::size_t m = 0; m < M; ++m) {
        row[m] += a * params.phi(k, m);
      }
    }
    double sum = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      row[m] *= params.phi(i, m) * params.theta(m, static_cast<std::size_t>(e.category));
      sum += row[m];
    }
    for (std::size_t m = 0; m < M; ++m) {
      row[m] = sum > 0.0 ? row[m] / sum : 1.0 / static_cast<double>(M);
    }
  }
  return out;
}

namespace {

int argmax(std::span<const double> row) {
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

} // namespace

int assign_event_community(const ModelParams& params, const HyperParams& hyper, const Trace& trace,
                           std::size_t event_index) {
  if (event_index >= trace.size()) {
    throw ContractError("assign_event_community: event index out of range");
  }
  const Matrix r = event_responsibilities(params, hyper, trace);
  return argmax(r.row(event_index));
}

std::vector<int> assign_communities(const ModelParams& params, const HyperParams& hyper, const Trace& trace) {
  const Matrix r = event_responsibilities(params, hyper, trace);
  std::vector<int> out(trace.size());
  for (std::size_t n = 0; n < trace.size(); ++n) {
    out[n] = argmax(r.row(n));
  }
  return out;
}

Matrix one_hot(std::span<const int> labels, std::size_t n_communities) {
  Matrix out(labels.size(), n_communities, 0.0);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= n_communities) {
      throw ContractError("one_hot: label out of range");
    }
    out(n, static_cast<std::size_t>(labels[n])) = 1.0;
  }
  return out;
}

void EmbeddingTable::add(const std::string& label, std::vector<double> vector) {
  if (vector.empty()) {
    throw ContractError("embeddings: empty vector for '" + label + "'");
  }
  if (dim_ == 0) {
    dim_ = vector.size();
  } else if (vector.size() != dim_) {
    throw ContractError("embeddings: dimension mismatch for '" + label + "'");
  }
  if (std::all_of(vector.begin(), vector.end(), [](double v) { return v == 0.0; })) {
    throw ContractError("embeddings: zero vector for '" + label + "'");
  }
  if (!table_.emplace(label, std::move(vector)).second) {
    throw ContractError("embeddings: duplicate label '" + label + "'");
  }
}

const std::vector<double>* EmbeddingTable::find(const std::string& label) const {
  const auto it = table_.find(label);
  return it == table_.end() ? nullptr : &it->second;
}

EmbeddingTable parse_embeddings(const std::string& text) {
  EmbeddingTable table;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') {
      continue;
    }
    std::string label;
    std::string rest;
    const auto tab = line.find('\t');
    if (tab != std::string::npos) {
      label = line.substr(0, tab);
      rest = line.substr(tab + 1);
    } else {
      std::istringstream fields(line);
      fields >> label;
      std::getline(fields, rest);
    }
    std::istringstream values(rest);
    std::vector<double> vec;
    std::string token;
    while (values >> token) {
      try {
        std::size_t used = 0;
        vec.push_back(std::stod(token, &used));
        if (used != token.size()) {
          throw std::invalid_argument(token);
        }
      } catch (const std::exception&) {
        throw ContractError("embeddings: line " + std::to_string(line_no) + ": bad number '" + token + "'");
      }
    }
    try {
      table.add(label, std::move(vec));
    } catch (const ContractError& err) {
      throw ContractError("embeddings: line " + std::to_string(line_no) + ": " + err.what());
    }
  }
  return table;
}

EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open embeddings file '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_embeddings(buf.str());
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    dot += a[d] * b[d];
    na += a[d] * a[d];
    nb += b[d] * b[d];
  }
  if (na == 0.0 || nb == 0.0) {
    return 0.0;
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

CategoryLoss category_loss(const Matrix& membership, const Trace& trace, std::span<const std::string> category_labels,
                           const EmbeddingTable& embeddings, int k_cat) {
  if (membership.rows() != trace.size()) {
    throw ContractError("category_loss: membership needs one row per event");
  }
  if (category_labels.size() != static_cast<std::size_t>(trace.n_categories)) {
    throw ContractError("category_loss: need one label per category");
  }
  if (k_cat < 1) {
    throw ContractError("category_loss: K_cat must be positive");
  }
  const std::size_t M = membership.cols();
  const auto V = static_cast<std::size_t>(trace.n_categories);
  std::vector<const std::vector<double>*> vec(V);
  for (std::size_t c = 0; c < V; ++c) {
    vec[c] = embeddings.find(category_labels[c]);
  }
  Matrix freq(M, V, 0.0);
  for (std::size_t n = 0; n < trace.size(); ++n) {
    const auto c = static_cast<std::size_t>(trace.events[n].category);
    for (std::size_t m = 0; m < M; ++m) {
      freq(m, c) += membership(n, m);
    }
  }
  CategoryLoss out;
  out.k_cat = k_cat;
  out.top_categories.resize(M);
  const std::size_t D = embeddings.dimension();
  std::vector<std::vector<double>> mean(M, std::vector<double>(D, 0.0));
  for (std::size_t m = 0; m < M; ++m) {
    std::vector<std::size_t> cats;
    for (std::size_t c = 0; c < V; ++c) {
      if (freq(m, c) > 0.0 && vec[c] != nullptr) {
        cats.push_back(c);
      }
    }
    std::sort(cats.begin(), cats.end(), [&](std::size_t a, std::size_t b) {
      if (freq(m, a) != freq(m, b)) {
        return freq(m, a) > freq(m, b);
      }
      return category_labels[a] < category_labels[b];
    });
    cats.resize(std::min(cats.size(), static_cast<std::size_t>(k_cat)));
    for (std::size_t c : cats) {
      out.top_categories[m].push_back(category_labels[c]);
      for (std::size_t d = 0; d < D; ++d) {
        mean[m][d] += (*vec[c])[d] / static_cast<double>(cats.size());
      }
    }
  }
  for (std::size_t n = 0; n < trace.size(); ++n) {
    const auto c = static_cast<std::size_t>(trace.events[n].category);
    if (vec[c] == nullptr) {
      ++out.n_dropped;
      continue;
    }
    ++out.n_events;
    for (std::size_t m = 0; m < M; ++m) {
      const double w = membership(n, m);
      if (w == 0.0 || out.top_categories[m].empty()) {
        continue;
      }
      out.sum += w * (1.0 - cosine_similarity(*vec[c], mean[m]));
    }
  }
  if (out.n_dropped > 0) {
    std::cerr << "warning: " << out.n_dropped << " events have categories without an embedding and were dropped\n";
  }
  out.mean = out.n_events > 0 ? out.sum / static_cast<double>(out.n_events) : 0.0;
  return out;
}

double location_loss(std::span<const int> assignments, const Trace& trace) {
  if (assignments.size() != trace.size()) {
    throw ContractError("location_loss: need one assignment per event");
  }
  if (trace.size() == 0) {
    return 0.0;
  }
  const int n_groups = *std::max_element(assignments.begin(), assignments.end()) + 1;
  std::vector<double> sx(static_cast<std::size_t>(n_groups), 0.0);
  std::vector<double> sy(sx.size(), 0.0);
  std::vector<double> count(sx.size(), 0.0);
  for (std::size_t n = 0; n < trace.size(); ++n) {
    if (assignments[n] < 0) {
      throw ContractError("location_loss: negative community");
    }
    const auto g = static_cast<std::size_t>(assignments[n]);
    const Point p = trace.location(n);
    sx[g] += p.x;
    sy[g] += p.y;
    count[g] += 1.0;
  }
  double wcss = 0.0;
  for (std::size_t n = 0; n < trace.size(); ++n) {
    const auto g = static_cast<std::size_t>(assignments[n]);
    const Point p = trace.location(n);
    const double dx = p.x - sx[g] / count[g];
    const double dy = p.y - sy[g] / count[g];
    wcss += dx * dx + dy * dy;
  }
  return wcss / static_cast<double>(trace.size());
}

CommunityReport community_report(const ModelParams& params, const HyperParams& hyper, const Trace& trace,
                                 std::span<const std::string> category_labels, const EmbeddingTable& embeddings,
                                 std::span<const int> k_cats, bool soft) {
  const Matrix resp = event_responsibilities(params, hyper, trace);
  std::vector<int> hard(trace.size());
  for (std::size_t n = 0; n < trace.size(); ++n) {
    hard[n] = argmax(resp.row(n));
  }
  const auto M = static_cast<std::size_t>(params.n_communities());
  const Matrix membership = soft ? resp : one_hot(hard, M);
  CommunityReport report;
  report.soft = soft;
  for (int k : k_cats) {
    report.category.push_back(category_loss(membership, trace, category_labels, embeddings, k));
  }
  report.location = location_loss(hard, trace);
  report.community_sizes.assign(M, 0);
  for (int g : hard) {
    ++report.community_sizes[static_cast<std::size_t>(g)];
  }
  return report;
}

} // namespace colab
