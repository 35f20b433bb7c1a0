#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "wordorder/probe.hpp"

using namespace wordorder;
using namespace wordorder::testing;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = gaussian(rng);
  }
  return m;
}

Eigen::MatrixXd symmetric_random(Rng& rng, std::size_t n, bool ties) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
          ties ? static_cast<double>(1 + rng.below(5)) : rng.uniform();
    }
  }
  return d;
}

double tree_weight(const Eigen::MatrixXd& d, const std::vector<Edge>& edges) {
  double w = 0;
  for (auto [a, b] : edges) w += d(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  return w;
}

DepTree path_tree(std::size_t n) {
  std::vector<DepNode> nodes;
  for (std::size_t i = 0; i < n; ++i) nodes.push_back({"w" + std::to_string(i), "NN", i == 0 ? DepTree::kRoot : int(i) - 1, "x"});
  return DepTree(nodes);
}

ProbeDataset isometric_dataset(std::size_t sentences, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  const auto rotation = random_orthogonal(dim, rng);
  ProbeDataset data;
  for (std::size_t s = 0; s < sentences; ++s) {
    const auto t = random_tree(rng, 2 + static_cast<std::size_t>(rng.below(std::min<std::size_t>(dim, 14) - 1)));
    // Same construction as isometric_features, but with one rotation shared
    // across the corpus so a single probe fits every sentence.
    Eigen::MatrixXd plain = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(t.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < t.size(); ++i) {
      for (int at = static_cast<int>(i); at != DepTree::kRoot; at = t.node(static_cast<std::size_t>(at)).head) {
        if (t.node(static_cast<std::size_t>(at)).head != DepTree::kRoot) plain(static_cast<Eigen::Index>(i), at) = 1.0;
      }
    }
    data.sentences.push_back({plain * rotation, tree_distances(t), t.edges(), {}});
  }
  return data;
}

}  // namespace

TEST_CASE("word features average subword spans") {
  Eigen::MatrixXd v(3, 2);
  v << 1, 2, 3, 4, 5, 7;
  const std::vector<std::pair<std::size_t, std::size_t>> identity{{0, 1}, {1, 2}, {2, 3}};
  CHECK(word_features(v, identity) == v);
  const std::vector<std::pair<std::size_t, std::size_t>> spans{{0, 2}, {2, 3}};
  const auto w = word_features(v, spans);
  CHECK(w(0, 0) == 2.0);
  CHECK(w(0, 1) == 3.0);
  CHECK(w(1, 1) == 7.0);
  const std::vector<std::pair<std::size_t, std::size_t>> gap{{0, 1}, {2, 3}};
  const std::vector<std::pair<std::size_t, std::size_t>> overlap{{0, 2}, {1, 3}};
  const std::vector<std::pair<std::size_t, std::size_t>> short_{{0, 2}};
  CHECK_THROWS(word_features(v, gap));
  CHECK_THROWS(word_features(v, overlap));
  CHECK_THROWS(word_features(v, short_));
}

TEST_CASE("tree distances") {
  const auto d = tree_distances(bob_eats_food());
  CHECK(d(0, 2) == 2);
  CHECK(d(0, 1) == 1);
  CHECK(d(2, 1) == 1);
  CHECK(tree_distances(path_tree(7))(0, 6) == 6);
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = random_tree(rng, 1 + static_cast<std::size_t>(rng.below(10)));
    const auto m = tree_distances(t);
    const auto n = m.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
      CHECK(m(i, i) == 0);
      for (Eigen::Index j = 0; j < n; ++j) {
        CHECK(m(i, j) == m(j, i));
        for (Eigen::Index k = 0; k < n; ++k) CHECK(m(i, k) <= m(i, j) + m(j, k));
      }
    }
  }
}

TEST_CASE("probe distances are a valid squared metric") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    ProbeModel m{random_matrix(rng, 3, 5)};
    const auto h = random_matrix(rng, 6, 5);
    const auto d = m.distances(h);
    for (Eigen::Index i = 0; i < 6; ++i) {
      CHECK(d(i, i) == 0.0);
      for (Eigen::Index j = 0; j < 6; ++j) {
        CHECK(d(i, j) == d(j, i));
        CHECK(d(i, j) >= 0.0);
        const double direct = (m.B * (h.row(i) - h.row(j)).transpose()).squaredNorm();
        CHECK(d(i, j) == doctest::Approx(direct).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("analytic gradient matches finite differences") {
  Rng rng(3);
  int checked = 0;
  while (checked < 20) {
    const auto n = static_cast<Eigen::Index>(2 + rng.below(7));
    const auto d = static_cast<Eigen::Index>(2 + rng.below(6));
    const auto k = static_cast<Eigen::Index>(1 + rng.below(static_cast<std::uint64_t>(d)));
    const auto t = random_tree(rng, static_cast<std::size_t>(n));
    const auto gold = tree_distances(t);
    const auto h = random_matrix(rng, n, d);
    const auto B = random_matrix(rng, k, d);
    // Skip points too close to the kink of |.|.
    const auto diff = (ProbeModel{B}.distances(h) - gold).cwiseAbs();
    double nearest = 1e9;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j) nearest = std::min(nearest, diff(i, j));
      }
    }
    if (nearest < 1e-3) continue;
    Eigen::MatrixXd grad;
    probe_loss(B, h, gold, &grad);
    const auto numeric =
        numeric_gradient([&](const Eigen::MatrixXd& b) { return probe_loss(b, h, gold); }, B, 1e-6);
    const double rel = (grad - numeric).norm() / std::max(1e-12, numeric.norm());
    CHECK(rel < 1e-4);
    ++checked;
  }
}

TEST_CASE("loss by hand") {
  // Two points on a line at 0 and 2 with B = [1]: d_B = 4, gold 1.
  Eigen::MatrixXd h(2, 1);
  h << 0, 2;
  Eigen::MatrixXd gold(2, 2);
  gold << 0, 1, 1, 0;
  Eigen::MatrixXd B(1, 1);
  B << 1;
  Eigen::MatrixXd grad;
  CHECK(probe_loss(B, h, gold, &grad) == doctest::Approx(2.0 * 3.0 / 4.0));
  // d/dB of (2/4) * (B^2 * 4 - 1) = 4 B
  CHECK(grad(0, 0) == doctest::Approx(4.0));
}

TEST_CASE("MST on a forced example and against the exhaustive oracle") {
  Eigen::MatrixXd d(3, 3);
  d << 0, 1, 5, 1, 0, 1, 5, 1, 0;
  CHECK(mst(d) == std::vector<Edge>{{0, 1}, {1, 2}});
  CHECK(mst(Eigen::MatrixXd::Zero(1, 1)).empty());

  Rng rng(4);
  for (std::size_t n = 2; n <= 6; ++n) {
    const auto all = all_spanning_trees(n);
    CHECK(all.size() == static_cast<std::size_t>(std::pow(double(n), double(n - 2)) + 0.5));
    for (int trial = 0; trial < 80; ++trial) {
      const bool ties = trial % 2 == 0;
      const auto dist = symmetric_random(rng, n, ties);
      std::vector<Edge> best;
      double best_w = 1e18;
      for (const auto& t : all) {
        const double w = tree_weight(dist, t);
        if (w < best_w) {
          best = t;
          best_w = w;
        }
      }
      const auto got = mst(dist);
      CHECK(tree_weight(dist, got) == best_w);
      CHECK(got.size() == n - 1);
      if (!ties) CHECK(got == best);  // distinct weights: unique optimum
      CHECK(mst(dist) == got);
    }
  }
}

TEST_CASE("MST of gold distances recovers the tree") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = random_tree(rng, 1 + static_cast<std::size_t>(rng.below(12)));
    CHECK(mst(tree_distances(t)) == t.edges());
  }
}

TEST_CASE("UUAS") {
  // Star centred on 0 vs path 0-1-2-3 share only (0,1).
  const DepTree path = path_tree(4);
  const std::vector<Edge> star{{0, 1}, {0, 2}, {0, 3}};
  CHECK(uuas(star, path) == doctest::Approx(1.0 / 3));
  CHECK(uuas(path.edges(), path) == 1.0);
  const DepTree two = path_tree(2);
  CHECK(uuas(mst(Eigen::MatrixXd::Ones(2, 2)), two) == 1.0);
  CHECK(uuas({}, path_tree(1)) == 1.0);

  UuasCounter c;
  c.add(star, path.edges());
  c.add(two.edges(), two.edges());
  CHECK(c.correct == 2);
  CHECK(c.total == 4);
  CHECK(c.score() == 0.5);
}

TEST_CASE("punctuation exclusion drops words before decoding") {
  CHECK(is_punct_tag(","));
  CHECK(is_punct_tag("PUNCT"));
  CHECK(is_punct_tag("-LRB-"));
  CHECK_FALSE(is_punct_tag("NN"));

  // A 0-1-2 path where word 2 is punctuation hanging off 1.
  const DepTree t({{"a", "NN", DepTree::kRoot, std::nullopt}, {"b", "NN", 0, "x"}, {".", ".", 1, "punct"}});
  Eigen::MatrixXd h(3, 2);
  h << 0, 0, 1, 0, 10, 10;  // punctuation far away
  ProbeDataset data;
  data.sentences.push_back({h, tree_distances(t), t.edges(), {false, false, true}});
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
  const ProbeModel m{I};
  CHECK(evaluate_probe(m, data, false).total == 2);
  const auto c = evaluate_probe(m, data, true);
  CHECK(c.total == 1);
  CHECK(c.correct == 1);
}

TEST_CASE("training recovers isometric structure") {
  const auto train = isometric_dataset(200, 16, 6);
  const auto eval = isometric_dataset(50, 16, 6);
  ProbeConfig cfg;
  cfg.rank = 16;
  cfg.epochs = 30;
  cfg.batch = 20;
  cfg.lr = 1e-2;
  cfg.seed = 9;
  ProbeTrainLog log;
  const auto model = train_probe(train, cfg, &log);
  CHECK(log.epoch_loss.size() == 30);
  CHECK(log.epoch_loss.back() < log.initial_loss);
  CHECK(evaluate_probe(model, eval).score() >= 0.99);

  const auto again = train_probe(train, cfg);
  CHECK(again.B == model.B);
}

TEST_CASE("training on noise does not increase the loss") {
  Rng rng(10);
  ProbeDataset data;
  for (int s = 0; s < 40; ++s) {
    const auto t = random_tree(rng, 2 + static_cast<std::size_t>(rng.below(6)));
    data.sentences.push_back({random_matrix(rng, static_cast<Eigen::Index>(t.size()), 8), tree_distances(t), t.edges(), {}});
  }
  ProbeConfig cfg;
  cfg.rank = 4;
  cfg.epochs = 10;
  cfg.batch = 8;
  cfg.seed = 1;
  ProbeTrainLog log;
  train_probe(data, cfg, &log);
  CHECK(log.epoch_loss.back() <= log.initial_loss);
}

TEST_CASE("gradient steps from a scaled identity on metric features descend") {
  const auto data = isometric_dataset(60, 12, 12);
  Eigen::MatrixXd B = 0.5 * Eigen::MatrixXd::Identity(12, 12);
  auto total = [&](const Eigen::MatrixXd& b, Eigen::MatrixXd* grad) {
    double loss = 0.0;
    if (grad) *grad = Eigen::MatrixXd::Zero(b.rows(), b.cols());
    for (const auto& s : data.sentences) {
      Eigen::MatrixXd g;
      loss += probe_loss(b, s.features, s.distances, grad ? &g : nullptr);
      if (grad) *grad += g;
    }
    return loss / static_cast<double>(data.sentences.size());
  };
  const double start = total(B, nullptr);
  double prev = start;
  for (int step = 0; step < 40; ++step) {
    Eigen::MatrixXd g;
    total(B, &g);
    B -= 1e-3 / static_cast<double>(data.sentences.size()) * g;
    const double now = total(B, nullptr);
    CHECK(now <= prev + 1e-12);
    prev = now;
  }
  CHECK(prev < start);
}

TEST_CASE("NaN features abort training") {
  ProbeDataset data;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2, 2);
  h(0, 0) = std::nan("");
  const auto t = path_tree(2);
  data.sentences.push_back({h, tree_distances(t), t.edges(), {}});
  ProbeConfig cfg;
  cfg.rank = 2;
  cfg.epochs = 1;
  CHECK_THROWS_AS(train_probe(data, cfg), std::runtime_error);
}

TEST_CASE("feature records") {
  const auto j = nlohmann::json::parse(
      R"({"id": 1, "subword_dims": 2, "vectors": [[1, 2], [3, 4], [5, 6]], "word_spans": [[0, 2], [2, 3]]})");
  const auto r = parse_feature_record(j);
  CHECK(r.id == 1);
  CHECK(r.vectors.rows() == 3);
  CHECK(r.vectors(2, 1) == 6);
  CHECK(r.word_spans.size() == 2);
  std::stringstream buf;
  const std::vector<FeatureRecord> recs{r};
  write_features(buf, recs);
  const auto back = read_features(buf);
  REQUIRE(back.size() == 1);
  CHECK(back[0].vectors == r.vectors);
  CHECK(back[0].word_spans == r.word_spans);
  CHECK(to_json(back[0]) == to_json(r));

  auto bad = j;
  bad["subword_dims"] = 3;
  CHECK_THROWS(parse_feature_record(bad));
  bad = j;
  bad.erase("word_spans");
  CHECK_THROWS(parse_feature_record(bad));

  const std::vector<DepTree> trees{path_tree(3), path_tree(2)};
  const auto ds = make_probe_dataset(trees, recs);
  REQUIRE(ds.sentences.size() == 1);
  CHECK(ds.sentences[0].features.rows() == 2);
  FeatureRecord wrong = r;
  wrong.id = 0;  // three-word tree, two-word record
  const std::vector<FeatureRecord> bad_recs{wrong};
  CHECK_THROWS_AS(make_probe_dataset(trees, bad_recs), std::invalid_argument);
}

TEST_CASE("probe model files round-trip") {
  Rng rng(14);
  const ProbeModel m{random_matrix(rng, 3, 4)};
  const auto path = std::string(TEST_TMPDIR) + "/probe_model.json";
  m.save(path);
  CHECK(ProbeModel::load(path).B == m.B);
  CHECK_THROWS(ProbeModel::from_json(nlohmann::json{{"format", "other"}}));
}

TEST_CASE("probe report averages layers and reports deltas") {
  const auto good = isometric_dataset(60, 10, 20);
  ProbeDataset noise;
  Rng rng(21);
  for (const auto& s : good.sentences) {
    noise.sentences.push_back({random_matrix(rng, s.features.rows(), 10), s.distances, s.gold_edges, {}});
  }
  ProbeConfig cfg;
  cfg.rank = 10;
  cfg.epochs = 15;
  cfg.batch = 10;
  cfg.lr = 1e-2;
  cfg.seed = 3;
  const std::vector<ProbeSource> sources{{"iso", {{good, good}, {good, good}}},
                                         {"iso-copy", {{good, good}, {good, good}}},
                                         {"noise", {{noise, noise}}}};
  const auto r = probe_report(sources, cfg, false, 3);
  REQUIRE(r.rows.size() == 3);
  CHECK(r.rows[0].layer_uuas.size() == 2);
  CHECK(r.rows[0].average == doctest::Approx((r.rows[0].layer_uuas[0] + r.rows[0].layer_uuas[1]) / 2));
  CHECK(r.rows[0].delta == 0.0);
  CHECK(r.rows[1].average == r.rows[0].average);
  CHECK(r.rows[1].delta == 0.0);
  CHECK(r.rows[0].average > 0.95);
  CHECK(r.rows[2].average < r.rows[0].average);
  CHECK(r.rows[2].delta < 0.0);
  CHECK(r.to_text().find("noise") != std::string::npos);
  CHECK(r.to_json().size() == 3);
}
