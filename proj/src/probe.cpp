#include "wordorder/probe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

#include "wordorder/parallel.hpp"
#include "wordorder/random.hpp"

namespace wordorder {

FeatureRecord parse_feature_record(const nlohmann::json& j) {
  FeatureRecord r;
  r.id = j.at("id").get<std::int64_t>();
  const auto dims = j.at("subword_dims").get<std::int64_t>();
  if (dims <= 0) throw std::invalid_argument("feature record " + std::to_string(r.id) + ": subword_dims must be positive");
  const auto& vecs = j.at("vectors");
  r.vectors.resize(static_cast<Eigen::Index>(vecs.size()), dims);
  for (std::size_t t = 0; t < vecs.size(); ++t) {
    if (vecs[t].size() != static_cast<std::size_t>(dims)) {
      throw std::invalid_argument("feature record " + std::to_string(r.id) + ": vector " + std::to_string(t) + " has " +
                                  std::to_string(vecs[t].size()) + " dims, expected " + std::to_string(dims));
    }
    for (std::int64_t k = 0; k < dims; ++k) r.vectors(static_cast<Eigen::Index>(t), k) = vecs[t][static_cast<std::size_t>(k)].get<double>();
  }
  for (const auto& s : j.at("word_spans")) {
    if (s.size() != 2) throw std::invalid_argument("feature record " + std::to_string(r.id) + ": span needs [start, end)");
    r.word_spans.emplace_back(s[0].get<std::size_t>(), s[1].get<std::size_t>());
  }
  return r;
}

nlohmann::json to_json(const FeatureRecord& r) {
  nlohmann::json vecs = nlohmann::json::array();
  for (Eigen::Index t = 0; t < r.vectors.rows(); ++t) {
    std::vector<double> row(static_cast<std::size_t>(r.vectors.cols()));
    for (Eigen::Index k = 0; k < r.vectors.cols(); ++k) row[static_cast<std::size_t>(k)] = r.vectors(t, k);
    vecs.push_back(std::move(row));
  }
  nlohmann::json spans = nlohmann::json::array();
  for (auto [a, b] : r.word_spans) spans.push_back({a, b});
  return {{"id", r.id}, {"subword_dims", r.vectors.cols()}, {"vectors", vecs}, {"word_spans", spans}};
}

std::vector<FeatureRecord> read_features(std::istream& in) {
  std::vector<FeatureRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_feature_record(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::invalid_argument("feature line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<FeatureRecord> read_features_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open feature file '" + path + "'");
  return read_features(in);
}

void write_features(std::ostream& out, std::span<const FeatureRecord> records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

Eigen::MatrixXd word_features(const Eigen::MatrixXd& subword_vectors,
                              std::span<const std::pair<std::size_t, std::size_t>> spans) {
  const auto T = static_cast<std::size_t>(subword_vectors.rows());
  std::size_t at = 0;
  for (auto [a, b] : spans) {
    if (a != at) throw std::invalid_argument("word spans must tile the subword sequence: span starts at " + std::to_string(a) + ", expected " + std::to_string(at));
    if (b <= a) throw std::invalid_argument("empty word span at " + std::to_string(a));
    at = b;
  }
  if (at != T) throw std::invalid_argument("word spans cover " + std::to_string(at) + " of " + std::to_string(T) + " subwords");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(spans.size()), subword_vectors.cols());
  for (std::size_t w = 0; w < spans.size(); ++w) {
    const auto [a, b] = spans[w];
    out.row(static_cast<Eigen::Index>(w)) =
        subword_vectors.middleRows(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b - a)).colwise().mean();
  }
  return out;
}

Eigen::MatrixXd tree_distances(const DepTree& tree) {
  const std::size_t n = tree.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (auto [a, b] : tree.edges()) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<int> dist(n, -1);
    std::queue<std::size_t> q;
    dist[s] = 0;
    q.push(s);
    while (!q.empty()) {
      auto u = q.front();
      q.pop();
      for (auto v : adj[u]) {
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          q.push(v);
        }
      }
    }
    for (std::size_t t = 0; t < n; ++t) d(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) = dist[t];
  }
  return d;
}

bool is_punct_tag(const std::string& tag) {
  static const std::set<std::string> kTags = {"``", "''", ",", ".", ":", "-LRB-", "-RRB-", "#", "$", "PUNCT", "SYM"};
  return kTags.contains(tag);
}

ProbeDataset make_probe_dataset(std::span<const DepTree> trees, std::span<const FeatureRecord> records) {
  ProbeDataset data;
  std::vector<std::string> bad;
  std::size_t dim = 0;
  for (const auto& r : records) {
    if (r.id < 0 || static_cast<std::size_t>(r.id) >= trees.size()) {
      bad.push_back(std::to_string(r.id) + " (no such sentence)");
      continue;
    }
    const auto& tree = trees[static_cast<std::size_t>(r.id)];
    if (r.word_spans.size() != tree.size()) {
      bad.push_back(std::to_string(r.id) + " (" + std::to_string(r.word_spans.size()) + " words vs " +
                    std::to_string(tree.size()) + ")");
      continue;
    }
    if (dim == 0) dim = static_cast<std::size_t>(r.vectors.cols());
    if (static_cast<std::size_t>(r.vectors.cols()) != dim) {
      bad.push_back(std::to_string(r.id) + " (dimension " + std::to_string(r.vectors.cols()) + ")");
      continue;
    }
    ProbeSentence s;
    s.features = word_features(r.vectors, r.word_spans);
    s.distances = tree_distances(tree);
    s.gold_edges = tree.edges();
    if (tree.has_pos()) {
      for (const auto& node : tree.nodes()) s.punct.push_back(is_punct_tag(*node.pos));
    }
    data.sentences.push_back(std::move(s));
  }
  if (!bad.empty()) {
    std::string msg = "feature/tree mismatch for sentence ids:";
    for (const auto& b : bad) msg += " " + b;
    throw std::invalid_argument(msg);
  }
  return data;
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& T) {
  const Eigen::Index n = T.rows();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (T.row(i) - T.row(j)).squaredNorm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

Eigen::MatrixXd ProbeModel::distances(const Eigen::MatrixXd& features) const {
  return squared_distances(features * B.transpose());
}

nlohmann::json ProbeModel::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < B.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(B.cols()));
    for (Eigen::Index c = 0; c < B.cols(); ++c) row[static_cast<std::size_t>(c)] = B(r, c);
    rows.push_back(std::move(row));
  }
  return {{"format", "probe v1"}, {"rank", B.rows()}, {"dim", B.cols()}, {"B", rows}};
}

ProbeModel ProbeModel::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "probe v1") throw std::invalid_argument("not a probe model (format != 'probe v1')");
  const auto k = j.at("rank").get<Eigen::Index>();
  const auto d = j.at("dim").get<Eigen::Index>();
  const auto& rows = j.at("B");
  if (static_cast<Eigen::Index>(rows.size()) != k) throw std::invalid_argument("probe model: B has wrong row count");
  ProbeModel m;
  m.B.resize(k, d);
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != d) throw std::invalid_argument("probe model: B has wrong column count");
    for (Eigen::Index c = 0; c < d; ++c) m.B(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

void ProbeModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write probe model '" + path + "'");
  out << std::setprecision(17) << to_json().dump() << '\n';
}

ProbeModel ProbeModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open probe model '" + path + "'");
  return from_json(nlohmann::json::parse(in));
}

double probe_loss(const Eigen::MatrixXd& B, const Eigen::MatrixXd& features, const Eigen::MatrixXd& gold,
                  Eigen::MatrixXd* grad) {
  const Eigen::Index n = features.rows();
  if (gold.rows() != n || gold.cols() != n) throw std::invalid_argument("probe_loss: gold distances do not match features");
  if (features.cols() != B.cols()) throw std::invalid_argument("probe_loss: feature dimension does not match B");
  if (grad) grad->setZero(B.rows(), B.cols());
  if (n == 0) return 0.0;
  const Eigen::MatrixXd T = features * B.transpose();
  const Eigen::MatrixXd diff = squared_distances(T) - gold;
  const double scale = 1.0 / static_cast<double>(n * n);
  const double loss = diff.cwiseAbs().sum() * scale;
  if (grad) {
    const Eigen::MatrixXd S = diff.unaryExpr([](double v) { return static_cast<double>((v > 0) - (v < 0)); });
    Eigen::MatrixXd lap = -S;
    lap.diagonal() += S.rowwise().sum();
    *grad = (4.0 * scale) * (T.transpose() * lap * features);
  }
  return loss;
}

double dataset_loss(const ProbeModel& model, const ProbeDataset& data) {
  if (data.sentences.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : data.sentences) sum += probe_loss(model.B, s.features, s.distances);
  return sum / static_cast<double>(data.sentences.size());
}

ProbeModel train_probe(const ProbeDataset& data, const ProbeConfig& config, ProbeTrainLog* log) {
  const std::size_t d = data.dim();
  if (data.sentences.empty()) throw std::invalid_argument("train_probe: empty dataset");
  if (config.rank < 1 || config.rank > d) {
    throw std::invalid_argument("train_probe: rank " + std::to_string(config.rank) + " must lie in [1, " + std::to_string(d) + "]");
  }
  if (config.batch < 1) throw std::invalid_argument("train_probe: batch size must be positive");
  for (const auto& s : data.sentences) {
    if (static_cast<std::size_t>(s.features.cols()) != d) throw std::invalid_argument("train_probe: mixed feature dimensions");
  }
  Rng rng(config.seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  ProbeModel model;
  model.B.resize(static_cast<Eigen::Index>(config.rank), static_cast<Eigen::Index>(d));
  for (Eigen::Index c = 0; c < model.B.cols(); ++c) {
    for (Eigen::Index r = 0; r < model.B.rows(); ++r) model.B(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
  }
  if (log) log->initial_loss = dataset_loss(model, data);

  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(model.B.rows(), model.B.cols());
  Eigen::MatrixXd v = m, grad = m, g;
  std::vector<std::size_t> order(data.sentences.size());
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_sum = 0.0;
    for (std::size_t start = 0, batch = 0; start < order.size(); start += config.batch, ++batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      grad.setZero();
      double loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = data.sentences[order[i]];
        loss += probe_loss(model.B, s.features, s.distances, &g);
        grad += g;
      }
      if (!std::isfinite(loss) || !grad.allFinite()) {
        std::ostringstream msg;
        msg << "probe training diverged at epoch " << epoch << ", batch " << batch << " (loss " << loss
            << ", |B| " << model.B.norm() << ", lr " << config.lr << ")";
        throw std::runtime_error(msg.str());
      }
      epoch_sum += loss;
      const double count = static_cast<double>(end - start);
      grad /= count;
      ++step;
      m = beta1 * m + (1.0 - beta1) * grad;
      v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      model.B.array() -= config.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
    if (log) log->epoch_loss.push_back(epoch_sum / static_cast<double>(order.size()));
  }
  return model;
}

std::vector<Edge> mst(const Eigen::MatrixXd& distances) {
  const auto n = static_cast<std::size_t>(distances.rows());
  if (distances.cols() != distances.rows()) throw std::invalid_argument("mst: distance matrix must be square");
  if (n < 2) return {};
  struct Cand {
    double w;
    std::size_t a, b;
  };
  std::vector<Cand> cands;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) cands.push_back({distances(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)), a, b});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
    if (x.w != y.w) return x.w < y.w;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<Edge> out;
  for (const auto& c : cands) {
    auto ra = find(c.a), rb = find(c.b);
    if (ra == rb) continue;
    parent[ra] = rb;
    out.emplace_back(c.a, c.b);
    if (out.size() == n - 1) break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

void UuasCounter::add(std::span<const Edge> predicted, std::span<const Edge> gold) {
  std::set<Edge> g;
  for (auto [a, b] : gold) g.emplace(std::min(a, b), std::max(a, b));
  for (auto [a, b] : predicted) correct += g.contains({std::min(a, b), std::max(a, b)}) ? 1 : 0;
  total += g.size();
}

double uuas(std::span<const Edge> predicted, const DepTree& gold) {
  UuasCounter c;
  const auto edges = gold.edges();
  c.add(predicted, edges);
  return c.score();
}

UuasCounter evaluate_probe(const ProbeModel& model, const ProbeDataset& data, bool exclude_punct) {
  UuasCounter c;
  for (const auto& s : data.sentences) {
    const Eigen::MatrixXd d = model.distances(s.features);
    if (!exclude_punct || s.punct.empty()) {
      const auto pred = mst(d);
      c.add(pred, s.gold_edges);
      continue;
    }
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < s.punct.size(); ++i) {
      if (!s.punct[i]) keep.push_back(static_cast<Eigen::Index>(i));
    }
    const Eigen::MatrixXd sub = d(keep, keep);
    std::vector<Edge> pred;
    for (auto [a, b] : mst(sub)) pred.emplace_back(static_cast<std::size_t>(keep[a]), static_cast<std::size_t>(keep[b]));
    std::vector<Edge> gold;
    for (auto [a, b] : s.gold_edges) {
      if (!s.punct[a] && !s.punct[b]) gold.emplace_back(a, b);
    }
    c.add(pred, gold);
  }
  return c;
}

ProbeReport probe_report(std::span<const ProbeSource> sources, const ProbeConfig& config, bool exclude_punct,
                         std::size_t workers) {
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    if (sources[s].layers.empty()) throw std::invalid_argument("probe_report: source '" + sources[s].name + "' has no layers");
    for (std::size_t l = 0; l < sources[s].layers.size(); ++l) jobs.emplace_back(s, l);
  }
  const std::function<double(std::size_t)> run = [&](std::size_t j) {
    const auto& layer = sources[jobs[j].first].layers[jobs[j].second];
    const auto model = train_probe(layer.train, config);
    return evaluate_probe(model, layer.eval, exclude_punct).score();
  };
  const auto scores = parallel_map<double>(jobs.size(), workers, run);
  ProbeReport report;
  for (std::size_t s = 0, j = 0; s < sources.size(); ++s) {
    ProbeReportRow row;
    row.name = sources[s].name;
    for (std::size_t l = 0; l < sources[s].layers.size(); ++l) row.layer_uuas.push_back(scores[j++]);
    row.average = std::accumulate(row.layer_uuas.begin(), row.layer_uuas.end(), 0.0) / static_cast<double>(row.layer_uuas.size());
    row.delta = report.rows.empty() ? 0.0 : row.average - report.rows.front().average;
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string ProbeReport::to_text() const {
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "model" << std::right << std::setw(10) << "UUAS"
      << std::setw(10) << "delta" << '\n';
  out << std::fixed;
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(width)) << r.name << std::right << std::setw(10)
        << std::setprecision(2) << 100.0 * r.average << std::setw(10) << std::showpos << 100.0 * r.delta
        << std::noshowpos << '\n';
  }
  return out.str();
}

nlohmann::json ProbeReport::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"name", r.name}, {"layer_uuas", r.layer_uuas}, {"average", r.average}, {"delta", r.delta}});
  }
  return out;
}

}  // namespace wordorder
