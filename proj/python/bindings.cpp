#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "wordorder/bpe.hpp"
#include "wordorder/constraint_tree.hpp"
#include "wordorder/decoder.hpp"
#include "wordorder/dep_tree.hpp"
#include "wordorder/evalkit.hpp"
#include "wordorder/external_scorer.hpp"
#include "wordorder/ngram.hpp"
#include "wordorder/penman.hpp"
#include "wordorder/probe.hpp"
#include "wordorder/random.hpp"
#include "wordorder/textprep.hpp"

namespace py = pybind11;
using namespace wordorder;

namespace {

// Base for scorers written in Python: the vocabulary is fixed at
// construction and subclasses override next_logprobs.
class PyScorerBase : public Scorer {
 public:
  explicit PyScorerBase(Vocabulary vocab) : vocab_(std::move(vocab)) {}
  const Vocabulary& vocabulary() const override { return vocab_; }
  std::string name() const override { return "python"; }

 private:
  Vocabulary vocab_;
};

class PyScorer : public PyScorerBase {
 public:
  using PyScorerBase::PyScorerBase;
  std::vector<double> next_logprobs(std::span<const TokenId> prefix, std::span<const TokenId> input) const override {
    py::gil_scoped_acquire gil;
    std::vector<TokenId> p(prefix.begin(), prefix.end()), x(input.begin(), input.end());
    py::function fn = py::get_override(static_cast<const PyScorerBase*>(this), "next_logprobs");
    if (!fn) throw ScorerError("python", "next_logprobs is not implemented");
    auto out = fn(p, x).cast<std::vector<double>>();
    if (out.size() != vocabulary().size()) {
      throw ScorerError("python", "next_logprobs returned " + std::to_string(out.size()) + " values for a vocabulary of " +
                                      std::to_string(vocabulary().size()));
    }
    return out;
  }
};

py::dict bleu_dict(const BleuReport& r) {
  py::dict d;
  d["bleu"] = r.bleu;
  d["precisions"] = r.precisions;
  d["brevity_penalty"] = r.brevity_penalty;
  d["hyp_length"] = r.hyp_length;
  d["ref_length"] = r.ref_length;
  return d;
}

DecodeConfig make_decode_config(std::size_t beam, const std::string& mode, bool length_norm,
                                std::optional<std::size_t> max_len, bool null_input) {
  DecodeConfig c;
  c.beam_size = beam;
  c.mode = parse_search_space(mode);
  c.length_norm = length_norm;
  c.max_len = max_len;
  c.null_input = null_input;
  return c;
}

}  // namespace

PYBIND11_MODULE(_wordorder, m) {
  m.doc() = "Constrained word ordering: prefix-tree beam search, scorers, PENMAN linearization, BLEU and probes";

  py::register_exception<ScorerError>(m, "ScorerError", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  py::class_<Vocabulary>(m, "Vocabulary")
      .def_static("from_tokens", &Vocabulary::from_tokens)
      .def_static("with_reserved", &Vocabulary::with_reserved, py::arg("tokens"))
      .def("find", &Vocabulary::find)
      .def("token", &Vocabulary::token)
      .def("tokens", &Vocabulary::tokens)
      .def("id_or_unk", &Vocabulary::id_or_unk)
      .def("__len__", &Vocabulary::size)
      .def_property_readonly("bos", &Vocabulary::bos)
      .def_property_readonly("eos", &Vocabulary::eos)
      .def_property_readonly("unk", &Vocabulary::unk)
      .def_property_readonly("null", &Vocabulary::null_token);

  py::class_<ConstraintState>(m, "ConstraintState")
      .def_property_readonly("dead", &ConstraintState::dead)
      .def_property_readonly("remaining_total", &ConstraintState::remaining_total)
      .def_property_readonly("cursor", &ConstraintState::cursor)
      .def("remaining", &ConstraintState::remaining)
      .def("__eq__", &ConstraintState::operator==);

  py::class_<ConstraintTree>(m, "ConstraintTree")
      .def(py::init([](const std::vector<std::vector<TokenId>>& words) { return ConstraintTree(words); }),
           py::arg("words"))
      .def("__len__", &ConstraintTree::size)
      .def_property_readonly("word_count", &ConstraintTree::word_count)
      .def_property_readonly("subword_count", &ConstraintTree::subword_count)
      .def("initial_state", &ConstraintTree::initial_state)
      .def("valid_next", &ConstraintTree::valid_next)
      .def("advance", &ConstraintTree::advance)
      .def("is_exhausted", &ConstraintTree::is_exhausted);

  py::class_<Scorer>(m, "Scorer")
      .def_property_readonly("vocabulary", &Scorer::vocabulary, py::return_value_policy::reference_internal)
      .def_property_readonly("name", &Scorer::name)
      .def("next_logprobs", [](const Scorer& s, const std::vector<TokenId>& prefix, const std::vector<TokenId>& input) {
        return s.next_logprobs(prefix, input);
      });

  py::class_<PyScorerBase, Scorer, PyScorer>(m, "PyScorer")
      .def(py::init<Vocabulary>(), py::arg("vocabulary"));

  py::class_<UniformScorer, Scorer>(m, "UniformScorer").def(py::init<Vocabulary>());

  py::class_<NgramModel, Scorer>(m, "NgramModel")
      .def_static(
          "train",
          [](Vocabulary vocab, const std::vector<std::vector<TokenId>>& corpus, int order, const std::string& smoothing,
             double discount) {
            return NgramModel::train(std::move(vocab), corpus, order, {parse_smoothing(smoothing), discount});
          },
          py::arg("vocabulary"), py::arg("corpus"), py::arg("order") = 3, py::arg("smoothing") = "kneser_ney",
          py::arg("discount") = 0.75)
      .def_static(
          "load",
          [](const std::string& path, const std::string& smoothing, double discount) {
            return NgramModel::load_file(path, {parse_smoothing(smoothing), discount});
          },
          py::arg("path"), py::arg("smoothing") = "kneser_ney", py::arg("discount") = 0.75)
      .def("save",
           [](const NgramModel& lm, const std::string& path) {
             std::ofstream out(path);
             if (!out) throw std::runtime_error("cannot write '" + path + "'");
             lm.save(out);
           })
      .def_property_readonly("order", &NgramModel::order)
      .def("probability", [](const NgramModel& lm, const std::vector<TokenId>& prefix, TokenId token) {
        return lm.probability(prefix, token);
      });

  py::class_<ExternalScorer, Scorer>(m, "ExternalScorer")
      .def(py::init([](const std::string& command, double timeout_s) {
             return std::make_unique<ExternalScorer>(std::make_unique<ProcessChannel>(command),
                                                     std::chrono::milliseconds(static_cast<long>(timeout_s * 1000)));
           }),
           py::arg("command"), py::arg("timeout") = 60.0);

  py::class_<DecodeConfig>(m, "DecodeConfig")
      .def(py::init(&make_decode_config), py::arg("beam") = 64, py::arg("mode") = "constrained",
           py::arg("length_norm") = false, py::arg("max_len") = std::nullopt, py::arg("null_input") = false)
      .def_readwrite("beam", &DecodeConfig::beam_size)
      .def_readwrite("length_norm", &DecodeConfig::length_norm)
      .def_readwrite("max_len", &DecodeConfig::max_len)
      .def_readwrite("null_input", &DecodeConfig::null_input)
      .def_property(
          "mode", [](const DecodeConfig& c) { return to_string(c.mode); },
          [](DecodeConfig& c, const std::string& v) { c.mode = parse_search_space(v); });

  m.def(
      "beam_search",
      [](const std::vector<TokenId>& input, const Scorer& scorer, const DecodeConfig& config,
         std::optional<std::vector<std::vector<TokenId>>> words) {
        std::optional<ConstraintTree> tree;
        if (words) tree.emplace(*words);
        const auto hyps = beam_search(input, scorer, config, tree ? &*tree : nullptr);
        std::vector<std::pair<std::vector<TokenId>, double>> out;
        for (const auto& h : hyps) out.emplace_back(h.output(scorer.vocabulary().eos()), h.logscore);
        return out;
      },
      py::arg("input"), py::arg("scorer"), py::arg("config"), py::arg("words") = std::nullopt,
      "Returns (tokens, logscore) pairs, best first; pass `words` to constrain the output.");
  m.def(
      "rescore",
      [](const std::vector<std::vector<TokenId>>& candidates, const Scorer& scorer, const std::vector<TokenId>& input) {
        return rescore(candidates, scorer, input);
      },
      py::arg("candidates"), py::arg("scorer"), py::arg("input") = std::vector<TokenId>{});
  m.def(
      "order_sentence",
      [](const std::vector<std::string>& subwords, const Scorer& scorer, const DecodeConfig& config) {
        return order_sentence(subwords, scorer, config);
      },
      py::arg("subwords"), py::arg("scorer"), py::arg("config") = DecodeConfig{});

  m.def("normalize_ptb", &normalize_ptb);
  m.def("group_subwords", [](const std::vector<std::string>& s) { return group_subwords(s); });
  m.def("detokenize", [](const std::vector<std::string>& s) { return detokenize(s); });
  m.def(
      "shuffle",
      [](const SegmentedWords& words, std::uint64_t seed, const std::string& granularity) {
        return shuffle(words, {seed, parse_granularity(granularity)});
      },
      py::arg("words"), py::arg("seed"), py::arg("granularity") = "word");
  m.def("derive_seed", &derive_seed);

  py::class_<BpeMerges>(m, "BpeMerges")
      .def_static(
          "learn",
          [](const std::map<std::string, std::uint64_t>& counts, std::size_t num_merges, std::uint64_t min_frequency) {
            return BpeMerges::learn(counts, num_merges, min_frequency);
          },
          py::arg("word_counts"), py::arg("num_merges"), py::arg("min_frequency") = 2)
      .def_static("load", &BpeMerges::load_file)
      .def("save",
           [](const BpeMerges& b, const std::string& path) {
             std::ofstream out(path);
             if (!out) throw std::runtime_error("cannot write '" + path + "'");
             b.save(out);
           })
      .def("apply", [](const BpeMerges& b, const std::string& w) { return b.apply(w); })
      .def_property_readonly("rules", &BpeMerges::rules)
      .def("__len__", &BpeMerges::size);

  py::class_<DepNode>(m, "DepNode")
      .def_readonly("form", &DepNode::form)
      .def_readonly("pos", &DepNode::pos)
      .def_readonly("head", &DepNode::head)
      .def_readonly("label", &DepNode::label);
  py::class_<DepTree>(m, "DepTree")
      .def_property_readonly("nodes", &DepTree::nodes)
      .def_property_readonly("root", &DepTree::root)
      .def("edges", &DepTree::edges)
      .def("__len__", &DepTree::size)
      .def("to_conll", [](const DepTree& t) { return to_conll(t); });
  m.def("parse_conll", [](const std::string& text) { return parse_conll(text); });
  m.def("read_conll", &read_conll_file);

  m.def(
      "serialize_penman",
      [](const DepTree& tree, const std::string& mode, std::uint64_t seed, const BpeMerges* merges) {
        return serialize_penman(tree, parse_penman_mode(mode), seed, merges ? bpe_segmenter(*merges) : whole_word_segmenter());
      },
      py::arg("tree"), py::arg("mode"), py::arg("seed"), py::arg("merges") = nullptr);
  m.def(
      "penman_canonical",
      [](const std::vector<std::string>& tokens, const std::string& mode) {
        return canonical_form(parse_penman(tokens, parse_penman_mode(mode)));
      },
      "Child-order independent form of a PENMAN token sequence.");
  m.def("tree_canonical", [](const DepTree& t, const std::string& mode) { return canonical_form(t, parse_penman_mode(mode)); });
  m.def(
      "sample_partial",
      [](const DepTree& tree, double p_pos, double p_dep, std::uint64_t seed) {
        const auto pt = sample_partial(tree, p_pos, p_dep, seed);
        return py::make_tuple(serialize_partial(pt, derive_seed(seed, 1)), pt.tag_count(), pt.arc_count());
      },
      py::arg("tree"), py::arg("p_pos"), py::arg("p_dep"), py::arg("seed"),
      "Returns (serialized tokens, kept tags, kept arcs).");

  m.def(
      "corpus_bleu",
      [](const std::vector<Words>& hyps, const std::vector<Words>& refs) { return bleu_dict(corpus_bleu(hyps, refs)); },
      py::arg("hyps"), py::arg("refs"));
  m.def(
      "lexical_errors",
      [](const std::vector<Words>& hyps, const std::vector<Words>& refs, std::size_t bin_width) {
        const auto r = lexical_errors(hyps, refs, bin_width);
        py::dict d;
        d["missing_rate"] = r.missing_rate;
        d["redundant_rate"] = r.redundant_rate;
        d["length_ratio"] = r.length_ratio;
        d["json"] = to_json(r).dump();
        return d;
      },
      py::arg("hyps"), py::arg("refs"), py::arg("bin_width") = 10);
  m.def(
      "sensitivity",
      [](const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& dev,
         const std::function<std::vector<std::string>(const std::vector<std::string>&)>& decode,
         const std::vector<std::uint64_t>& seeds) {
        Dataset data;
        for (const auto& [i, t] : dev) data.push_back({i, t});
        const auto r = sensitivity(data, decode, seeds, 1);
        return py::make_tuple(r.bleu, r.mean, r.stddev, r.summary());
      },
      py::arg("dev"), py::arg("decode"), py::arg("seeds"), "Returns (bleu list, mean, std, 'mean (std)').");

  m.def("word_features", [](const Eigen::MatrixXd& v, const std::vector<std::pair<std::size_t, std::size_t>>& spans) {
    return word_features(v, spans);
  });
  m.def("tree_distances", &tree_distances);
  m.def(
      "probe_loss",
      [](const Eigen::MatrixXd& B, const Eigen::MatrixXd& features, const Eigen::MatrixXd& gold) {
        Eigen::MatrixXd g;
        const double loss = probe_loss(B, features, gold, &g);
        return py::make_tuple(loss, g);
      },
      "Returns (loss, gradient with respect to B).");
  m.def(
      "train_probe",
      [](const std::vector<DepTree>& trees, const std::vector<Eigen::MatrixXd>& features, std::size_t rank,
         std::size_t epochs, std::size_t batch, double lr, std::uint64_t seed) {
        if (trees.size() != features.size()) throw std::invalid_argument("train_probe: trees and features differ in length");
        ProbeDataset data;
        for (std::size_t i = 0; i < trees.size(); ++i) {
          data.sentences.push_back({features[i], tree_distances(trees[i]), trees[i].edges(), {}});
        }
        ProbeConfig cfg{rank, epochs, batch, lr, seed};
        const auto model = train_probe(data, cfg);
        return py::make_tuple(model.B, evaluate_probe(model, data).score());
      },
      py::arg("trees"), py::arg("features"), py::arg("rank") = 32, py::arg("epochs") = 30, py::arg("batch") = 40,
      py::arg("lr") = 1e-3, py::arg("seed") = 0, "Returns (B, training-set UUAS).");
  m.def("mst", &mst);
  m.def("uuas", [](const std::vector<Edge>& pred, const DepTree& gold) { return uuas(pred, gold); });
}
