// Recovery error, per-event community assignment and community-quality losses.
#pragma once

#include "colab/types.hpp"

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace colab {

/// Mean of |a − â| / |a| over the entries with |a| ≥ 1e-9.
/// Throws ContractError on shape mismatch or when every entry is excluded.
double rel_err(const Matrix& truth, const Matrix& estimate);

/// Per-event community responsibilities ∝ φ_{i_n,m} θ_{m,c_n} λ̃_{i_n,m}(t_n, ℓ_n),
/// with φ-weighted history indicators. Rows sum to one.
Matrix event_responsibilities(const ModelParams& params, const HyperParams& hyper, const Trace& trace);

/// Argmax of the responsibilities, lowest index on ties.
int assign_event_community(const ModelParams& params, const HyperParams& hyper, const Trace& trace,
                           std::size_t event_index);
std::vector<int> assign_communities(const ModelParams& params, const HyperParams& hyper, const Trace& trace);

/// One-hot rows from hard labels.
Matrix one_hot(std::span<const int> labels, std::size_t n_communities);

/// Category label → embedding vector, all of one dimension.
class EmbeddingTable {
public:
  /// Throws ContractError on a dimension mismatch, zero vector or duplicate label.
  void add(const std::string& label, std::vector<double> vector);
  const std::vector<double>* find(const std::string& label) const;
  std::size_t dimension() const { return dim_; }
  std::size_t size() const { return table_.size(); }

private:
  std::map<std::string, std::vector<double>> table_;
  std::size_t dim_ = 0;
};

/// Plain-text table, one `label v_1 ... v_D` per line. A tab after the label
/// allows labels with spaces. Blank lines and lines starting with '#' are skipped.
EmbeddingTable load_embeddings(const std::string& path);
EmbeddingTable parse_embeddings(const std::string& text);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct CategoryLoss {
  int k_cat = 0;
  double mean = 0.0;
  double sum = 0.0;
  /// Events counted in the mean.
  int n_events = 0;
  /// Events whose category has no embedding.
  int n_dropped = 0;
  /// Per community, the categories averaged into its mean vector.
  std::vector<std::vector<std::string>> top_categories;
};

/// Cosine-distance loss of event categories to their community's category mean.
/// `membership` is N×M: one-hot rows for hard assignment, responsibilities for soft.
CategoryLoss category_loss(const Matrix& membership, const Trace& trace, std::span<const std::string> category_labels,
                           const EmbeddingTable& embeddings, int k_cat);

/// Within-community sum of squared distances to the community centroid, divided by N.
double location_loss(std::span<const int> assignments, const Trace& trace);

struct CommunityReport {
  std::vector<CategoryLoss> category;
  double location = 0.0;
  std::vector<int> community_sizes;
  bool soft = false;
};

CommunityReport community_report(const ModelParams& params, const HyperParams& hyper, const Trace& trace,
                                 std::span<const std::string> category_labels, const EmbeddingTable& embeddings,
                                 std::span<const int> k_cats, bool soft = false);

} // namespace colab
