#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "wordorder/dep_tree.hpp"

namespace wordorder {

using Edge = std::pair<std::size_t, std::size_t>;  // (min, max)

// One line of a feature file: per-subword vectors plus the [start, end)
// subword span of every word.
struct FeatureRecord {
  std::int64_t id = 0;
  Eigen::MatrixXd vectors;  // T x subword_dims
  std::vector<std::pair<std::size_t, std::size_t>> word_spans;
};

FeatureRecord parse_feature_record(const nlohmann::json& j);
nlohmann::json to_json(const FeatureRecord& r);
std::vector<FeatureRecord> read_features(std::istream& in);
std::vector<FeatureRecord> read_features_file(const std::string& path);
void write_features(std::ostream& out, std::span<const FeatureRecord> records);

// Mean of the subword vectors in each span (rows of the result). The caller
// aligns vectors with the tokens they predict; spans must tile [0, T).
Eigen::MatrixXd word_features(const Eigen::MatrixXd& subword_vectors,
                              std::span<const std::pair<std::size_t, std::size_t>> spans);

// Path lengths in the undirected tree.
Eigen::MatrixXd tree_distances(const DepTree& tree);

struct ProbeSentence {
  Eigen::MatrixXd features;   // n x d
  Eigen::MatrixXd distances;  // n x n gold path lengths
  std::vector<Edge> gold_edges;
  std::vector<bool> punct;  // empty, or n flags
};

struct ProbeDataset {
  std::vector<ProbeSentence> sentences;
  std::size_t dim() const { return sentences.empty() ? 0 : static_cast<std::size_t>(sentences.front().features.cols()); }
};

// Tags treated as punctuation when exclusion is on (PTB and UD).
bool is_punct_tag(const std::string& tag);

// Pairs record i with trees[record.id]. Throws std::invalid_argument listing
// every record whose word count disagrees with its tree or whose id is out
// of range.
ProbeDataset make_probe_dataset(std::span<const DepTree> trees, std::span<const FeatureRecord> records);

// d_B(i, j) = ||B (h_i - h_j)||^2 with B of shape k x d.
struct ProbeModel {
  Eigen::MatrixXd B;

  std::size_t rank() const { return static_cast<std::size_t>(B.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(B.cols()); }
  Eigen::MatrixXd distances(const Eigen::MatrixXd& features) const;

  nlohmann::json to_json() const;
  static ProbeModel from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static ProbeModel load(const std::string& path);
};

// Pairwise squared distances between rows of T.
Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& T);

// (1/n^2) sum_{i,j} |d_true(i,j) - d_B(i,j)|; fills `grad` (k x d) when given.
double probe_loss(const Eigen::MatrixXd& B, const Eigen::MatrixXd& features, const Eigen::MatrixXd& gold,
                  Eigen::MatrixXd* grad = nullptr);

struct ProbeConfig {
  std::size_t rank = 32;
  std::size_t epochs = 30;
  std::size_t batch = 40;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

struct ProbeTrainLog {
  std::vector<double> epoch_loss;  // mean per-sentence loss after each epoch
  double initial_loss = 0.0;
};

// Adam on batch-averaged sentence losses; B starts uniform in
// [-1/sqrt(d), 1/sqrt(d)]. Deterministic for a given seed. Throws
// std::runtime_error with the epoch and batch when the loss becomes NaN.
ProbeModel train_probe(const ProbeDataset& data, const ProbeConfig& config, ProbeTrainLog* log = nullptr);

// Mean per-sentence loss over a dataset.
double dataset_loss(const ProbeModel& model, const ProbeDataset& data);

// Kruskal over the complete graph, ties broken by (min endpoint, max
// endpoint). Returns sorted (min, max) pairs; empty when n < 2.
std::vector<Edge> mst(const Eigen::MatrixXd& distances);

// Fraction of gold undirected edges recovered; 1 when the tree has one node.
double uuas(std::span<const Edge> predicted, const DepTree& gold);

// Micro-averaged edge counts.
struct UuasCounter {
  std::uint64_t correct = 0;
  std::uint64_t total = 0;
  void add(std::span<const Edge> predicted, std::span<const Edge> gold);
  double score() const { return total == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

// With exclude_punct, punctuation words are removed before decoding and
// gold edges touching them are not scored.
UuasCounter evaluate_probe(const ProbeModel& model, const ProbeDataset& data, bool exclude_punct = false);

struct ProbeLayer {
  ProbeDataset train;
  ProbeDataset eval;
};

struct ProbeSource {
  std::string name;
  std::vector<ProbeLayer> layers;
};

struct ProbeReportRow {
  std::string name;
  std::vector<double> layer_uuas;
  double average = 0.0;
  double delta = 0.0;  // average minus the first row's average
};

struct ProbeReport {
  std::vector<ProbeReportRow> rows;
  std::string to_text() const;
  nlohmann::json to_json() const;
};

// Trains one probe per layer (layers in parallel), scores it on the layer's
// eval split and averages the layer scores per source.
ProbeReport probe_report(std::span<const ProbeSource> sources, const ProbeConfig& config, bool exclude_punct = false,
                         std::size_t workers = 1);

}  // namespace wordorder
