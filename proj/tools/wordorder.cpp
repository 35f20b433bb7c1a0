// wordorder: command-line entry point for data preparation, language model
// training, constrained ordering, evaluation, linearization and probing.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "wordorder/bpe.hpp"
#include "wordorder/decoder.hpp"
#include "wordorder/dep_tree.hpp"
#include "wordorder/evalkit.hpp"
#include "wordorder/external_scorer.hpp"
#include "wordorder/ngram.hpp"
#include "wordorder/penman.hpp"
#include "wordorder/probe.hpp"
#include "wordorder/random.hpp"
#include "wordorder/run_config.hpp"
#include "wordorder/textprep.hpp"

namespace fs = std::filesystem;
using namespace wordorder;

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Flags that override config values only when given on the command line.
class Overrides {
 public:
  template <class T, class Set>
  CLI::Option* add(CLI::App* app, const std::string& name, Set set, const std::string& help) {
    auto value = std::make_shared<T>();
    auto* opt = app->add_option(name, *value, help);
    appliers_.push_back([opt, value, set](RunConfig& c) {
      if (opt->count() > 0) set(c, *value);
    });
    return opt;
  }
  template <class Set>
  CLI::Option* flag(CLI::App* app, const std::string& name, Set set, const std::string& help) {
    auto value = std::make_shared<bool>(false);
    auto* opt = app->add_flag(name, *value, help);
    appliers_.push_back([opt, value, set](RunConfig& c) {
      if (opt->count() > 0) set(c, *value);
    });
    return opt;
  }
  void apply(RunConfig& c) const {
    for (const auto& f : appliers_) f(c);
  }

 private:
  std::vector<std::function<void(RunConfig&)>> appliers_;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

// Writes to `path`, or stdout when path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << std::flush;
  } else {
    open_out(path) << text;
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

// Hypotheses: one subword sequence per line.
std::vector<Words> read_hyps(const std::string& path) {
  std::vector<Words> out;
  for (const auto& line : read_lines(path)) out.push_back(detokenize(split_tokens(line)));
  return out;
}

// References: a dataset TSV (target column) or one subword sequence per line.
std::vector<Words> read_refs(const std::string& path) {
  std::vector<Words> out;
  for (const auto& ex : read_dataset_file(path)) out.push_back(detokenize(ex.target.empty() ? ex.input : ex.target));
  return out;
}

SmoothingConfig smoothing_of(const RunConfig& c) { return {parse_smoothing(c.lm.smoothing), c.lm.discount}; }

DecodeConfig decode_of(const RunConfig& c) {
  DecodeConfig d;
  d.beam_size = c.decode.beam;
  d.mode = parse_search_space(c.decode.mode);
  d.length_norm = c.decode.length_norm;
  d.max_len = c.decode.max_len;
  d.null_input = c.decode.null_input;
  return d;
}

ProbeConfig probe_of(const RunConfig& c, std::uint64_t seed) {
  ProbeConfig p;
  p.rank = c.probe.rank;
  p.epochs = c.probe.epochs;
  p.batch = c.probe.batch;
  p.lr = c.probe.lr;
  p.seed = seed;
  return p;
}

std::unique_ptr<Scorer> make_scorer(const RunConfig& c, const std::string& lm_path) {
  if (c.external_scorer) {
    const std::string& cmd = *c.external_scorer;
    std::unique_ptr<LineChannel> channel;
    if (cmd.starts_with("tcp:")) {
      channel = std::make_unique<SocketChannel>(cmd.substr(4));
    } else {
      channel = std::make_unique<ProcessChannel>(cmd);
    }
    return std::make_unique<ExternalScorer>(std::move(channel));
  }
  if (lm_path.empty()) throw UsageError("a scorer is required: pass --lm MODEL or --external-scorer CMD");
  return std::make_unique<NgramModel>(NgramModel::load_file(lm_path, smoothing_of(c)));
}

std::string fmt_level(double p) {
  std::ostringstream s;
  s << p;
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Word ordering as constrained generation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "wordorder 0.1.0");

  std::string config_path;
  std::string command = "wordorder";
  Overrides ov;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    ov.add<std::uint64_t>(sub, "--seed", [](RunConfig& c, std::uint64_t v) { c.seed = v; }, "Seed for stochastic steps");
    ov.add<std::size_t>(sub, "--workers", [](RunConfig& c, std::size_t v) { c.workers = v; }, "Parallel sentence workers")
        ->check(CLI::PositiveNumber);
  };
  auto scorer_flags = [&](CLI::App* sub, std::string& lm) {
    sub->add_option("--lm", lm, "n-gram model file");
    ov.add<std::string>(sub, "--external-scorer", [](RunConfig& c, const std::string& v) { c.external_scorer = v; },
                        "Scorer command speaking the line protocol (or tcp:HOST:PORT)");
    ov.add<std::string>(sub, "--smoothing", [](RunConfig& c, const std::string& v) { c.lm.smoothing = v; },
                        "mle or kneser_ney");
  };
  auto decode_flags = [&](CLI::App* sub) {
    ov.add<std::size_t>(sub, "--beam", [](RunConfig& c, std::size_t v) { c.decode.beam = v; }, "Beam size")
        ->check(CLI::PositiveNumber);
    ov.add<std::string>(sub, "--mode", [](RunConfig& c, const std::string& v) { c.decode.mode = v; },
                        "constrained or unconstrained");
    ov.flag(sub, "--length-norm", [](RunConfig& c, bool v) { c.decode.length_norm = v; }, "Length-normalized ranking");
    ov.add<std::size_t>(sub, "--max-len", [](RunConfig& c, std::size_t v) { c.decode.max_len = v; }, "Output length cap");
    ov.flag(sub, "--null-input", [](RunConfig& c, bool v) { c.decode.null_input = v; }, "Condition on <null> only");
  };

  // prep
  auto* prep = app.add_subcommand("prep", "Normalize, BPE-segment and shuffle a tokenized corpus into a dataset");
  std::string prep_corpus, prep_out, prep_merges_in, prep_merges_out;
  common(prep);
  prep->add_option("--corpus", prep_corpus, "One tokenized sentence per line")->required()->check(CLI::ExistingFile);
  prep->add_option("--out", prep_out, "Dataset TSV to write")->required();
  prep->add_option("--merges", prep_merges_in, "Apply these BPE merges instead of learning")->check(CLI::ExistingFile);
  prep->add_option("--merges-out", prep_merges_out, "Where to write learned merges");
  ov.add<std::size_t>(prep, "--vocab-size", [](RunConfig& c, std::size_t v) { c.prep.vocab_size = v; }, "BPE vocabulary size");
  ov.add<std::size_t>(prep, "--augment", [](RunConfig& c, std::size_t v) { c.prep.augment = v; }, "Extra permutations per example");
  ov.add<std::string>(prep, "--granularity", [](RunConfig& c, const std::string& v) { c.prep.granularity = v; }, "word or subword");

  // train-lm
  auto* train_lm = app.add_subcommand("train-lm", "Train an n-gram scorer on dataset targets");
  std::string lm_data, lm_out;
  common(train_lm);
  train_lm->add_option("--data", lm_data, "Dataset TSV")->required()->check(CLI::ExistingFile);
  train_lm->add_option("--out", lm_out, "Model file to write")->required();
  ov.add<std::size_t>(train_lm, "--order", [](RunConfig& c, std::size_t v) { c.lm.order = v; }, "n-gram order")
      ->check(CLI::PositiveNumber);
  ov.add<std::string>(train_lm, "--smoothing", [](RunConfig& c, const std::string& v) { c.lm.smoothing = v; },
                      "mle or kneser_ney");

  // order
  auto* order = app.add_subcommand("order", "Order the inputs of a dataset");
  std::string order_data, order_lm, order_out;
  common(order);
  order->add_option("--data", order_data, "Dataset TSV or one input per line")->required()->check(CLI::ExistingFile);
  order->add_option("--out", order_out, "Output file (default stdout)");
  scorer_flags(order, order_lm);
  decode_flags(order);

  // eval / errors
  auto* eval = app.add_subcommand("eval", "Corpus BLEU of hypotheses against references");
  std::string eval_hyp, eval_ref;
  bool eval_json = false;
  common(eval);
  eval->add_option("--hyp", eval_hyp, "One output per line")->required()->check(CLI::ExistingFile);
  eval->add_option("--ref", eval_ref, "Dataset TSV or one reference per line")->required()->check(CLI::ExistingFile);
  eval->add_flag("--json", eval_json, "Emit JSON");

  auto* errors = app.add_subcommand("errors", "Missing/redundant word rates, binned by reference length");
  std::string err_hyp, err_ref, err_csv;
  bool err_json = false;
  common(errors);
  errors->add_option("--hyp", err_hyp, "One output per line")->required()->check(CLI::ExistingFile);
  errors->add_option("--ref", err_ref, "Dataset TSV or one reference per line")->required()->check(CLI::ExistingFile);
  errors->add_option("--csv", err_csv, "Write binned rates as CSV");
  errors->add_flag("--json", err_json, "Emit JSON");
  ov.add<std::size_t>(errors, "--bin-width", [](RunConfig& c, std::size_t v) { c.eval.bin_width = v; }, "Reference length bin width")
      ->check(CLI::PositiveNumber);

  // sensitivity
  auto* sens = app.add_subcommand("sensitivity", "BLEU mean (std) over re-permuted dev sets");
  std::string sens_data, sens_lm;
  bool sens_json = false;
  common(sens);
  sens->add_option("--data", sens_data, "Dev dataset TSV")->required()->check(CLI::ExistingFile);
  sens->add_flag("--json", sens_json, "Emit JSON");
  scorer_flags(sens, sens_lm);
  decode_flags(sens);
  ov.add<std::size_t>(sens, "--k", [](RunConfig& c, std::size_t v) { c.sensitivity.k = v; }, "Number of permuted dev sets");
  ov.add<std::string>(sens, "--seeds", [](RunConfig& c, const std::string& v) { c.sensitivity.seeds = parse_seed_list(v); },
                      "Seed list, e.g. 1..10 or 1,2,3");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "BLEU grid over beam sizes and search modes");
  std::string sweep_data, sweep_lm;
  bool sweep_json = false;
  common(sweep);
  sweep->add_option("--data", sweep_data, "Dataset TSV")->required()->check(CLI::ExistingFile);
  sweep->add_flag("--json", sweep_json, "Emit JSON");
  scorer_flags(sweep, sweep_lm);
  ov.add<std::string>(sweep, "--beams", [](RunConfig& c, const std::string& v) { c.sweep.beams = parse_size_list(v); },
                      "Beam sizes, e.g. 5,64,512");
  ov.add<std::string>(sweep, "--modes",
                      [](RunConfig& c, const std::string& v) {
                        c.sweep.modes.clear();
                        std::stringstream s(v);
                        for (std::string m; std::getline(s, m, ',');) c.sweep.modes.push_back(m);
                      },
                      "Comma-separated modes (constrained, unconstrained, +null variants)");

  // linearize
  auto* lin = app.add_subcommand("linearize", "Serialize dependency trees to PENMAN inputs");
  std::string lin_trees, lin_merges, lin_out;
  bool lin_dataset = false;
  common(lin);
  lin->add_option("--trees", lin_trees, "CoNLL file")->required()->check(CLI::ExistingFile);
  lin->add_option("--merges", lin_merges, "BPE merges for word forms")->check(CLI::ExistingFile);
  lin->add_option("--out", lin_out, "Output file (default stdout)");
  lin->add_flag("--dataset", lin_dataset, "Emit dataset TSV rows with the sentence as target");
  ov.add<std::string>(lin, "--penman-mode", [](RunConfig& c, const std::string& v) { c.linearize.mode = v; },
                      "base, brac, pos, udep, ldep or full");

  // sample-partial
  auto* part = app.add_subcommand("sample-partial", "Partial-tree inputs with sampled tags and arcs");
  std::string part_trees, part_merges, part_out;
  common(part);
  part->add_option("--trees", part_trees, "CoNLL file")->required()->check(CLI::ExistingFile);
  part->add_option("--merges", part_merges, "BPE merges for word forms")->check(CLI::ExistingFile);
  part->add_option("--out", part_out,
                   "Dataset TSV for one (p-pos, p-dep) cell, or a directory for the full grid")->required();
  ov.add<double>(part, "--p-pos", [](RunConfig& c, double v) { c.partial.p_pos = v; }, "Tag retention probability");
  ov.add<double>(part, "--p-dep", [](RunConfig& c, double v) { c.partial.p_dep = v; }, "Arc retention probability");

  // probe-train
  auto* ptrain = app.add_subcommand("probe-train", "Train a structural probe on one feature file");
  std::string pt_features, pt_trees, pt_out;
  common(ptrain);
  ptrain->add_option("--features", pt_features, "Feature JSONL")->required()->check(CLI::ExistingFile);
  ptrain->add_option("--trees", pt_trees, "Gold CoNLL trees")->required()->check(CLI::ExistingFile);
  ptrain->add_option("--out", pt_out, "Probe model JSON to write")->required();
  auto probe_flags = [&](CLI::App* sub) {
    ov.add<std::size_t>(sub, "--rank", [](RunConfig& c, std::size_t v) { c.probe.rank = v; }, "Probe rank");
    ov.add<std::size_t>(sub, "--epochs", [](RunConfig& c, std::size_t v) { c.probe.epochs = v; }, "Training epochs");
    ov.add<std::size_t>(sub, "--batch", [](RunConfig& c, std::size_t v) { c.probe.batch = v; }, "Sentences per batch");
    ov.add<double>(sub, "--lr", [](RunConfig& c, double v) { c.probe.lr = v; }, "Adam learning rate");
  };
  probe_flags(ptrain);

  // probe-eval
  auto* peval = app.add_subcommand("probe-eval", "Score a probe, or compare models layer by layer");
  std::string pe_probe, pe_features, pe_trees, pe_train_trees, pe_eval_trees;
  std::vector<std::string> pe_models;
  bool pe_json = false;
  common(peval);
  peval->add_option("--probe", pe_probe, "Trained probe JSON")->check(CLI::ExistingFile);
  peval->add_option("--features", pe_features, "Feature JSONL for --probe")->check(CLI::ExistingFile);
  peval->add_option("--trees", pe_trees, "Gold CoNLL trees for --probe")->check(CLI::ExistingFile);
  peval->add_option("--model", pe_models,
                    "NAME=DIR holding train.layer<L>.jsonl and eval.layer<L>.jsonl; repeatable");
  peval->add_option("--train-trees", pe_train_trees, "Gold trees for the train split")->check(CLI::ExistingFile);
  peval->add_option("--eval-trees", pe_eval_trees, "Gold trees for the eval split")->check(CLI::ExistingFile);
  peval->add_flag("--json", pe_json, "Emit JSON");
  probe_flags(peval);
  ov.flag(peval, "--exclude-punct", [](RunConfig& c, bool v) { c.probe.exclude_punct = v; }, "Skip punctuation words");
  ov.flag(ptrain, "--exclude-punct", [](RunConfig& c, bool v) { c.probe.exclude_punct = v; }, "Skip punctuation words");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << nlohmann::json{{"error", e.what()}, {"kind", "usage"}}.dump() << '\n';
    return 2;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    command = sub->get_name();
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    ov.apply(cfg);
    std::cerr << nlohmann::json{{"command", command}, {"config", cfg.to_json()}}.dump() << '\n';
    const std::size_t workers = cfg.workers;

    if (sub == prep) {
      const auto seed = cfg.require_seed("prep");
      const auto granularity = parse_granularity(cfg.prep.granularity);
      auto corpus = read_corpus_file(prep_corpus);
      if (cfg.prep.normalize_ptb) {
        for (auto& s : corpus) {
          for (auto& w : s) w = normalize_ptb(w);
        }
      }
      BpeMerges merges;
      if (!prep_merges_in.empty()) {
        merges = BpeMerges::load_file(prep_merges_in);
      } else {
        std::set<std::string> alphabet;
        for (const auto& s : corpus) {
          for (const auto& w : s) {
            for (auto& sym : initial_symbols(w)) alphabet.insert(sym);
          }
        }
        const std::size_t n = cfg.prep.vocab_size > alphabet.size() ? cfg.prep.vocab_size - alphabet.size() : 0;
        merges = BpeMerges::learn(corpus, n, cfg.prep.min_frequency);
      }
      if (!prep_merges_out.empty()) {
        auto out = open_out(prep_merges_out);
        merges.save(out);
      }
      Dataset data;
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto seg = merges.apply(corpus[i]);
        data.push_back({shuffle(seg, {derive_seed(seed, i), granularity}), flatten(seg)});
      }
      if (cfg.prep.augment > 0) data = make_augmented(data, cfg.prep.augment, derive_seed(seed, corpus.size()));
      auto out = open_out(prep_out);
      write_dataset(out, data);
    } else if (sub == train_lm) {
      const auto data = read_dataset_file(lm_data);
      std::set<std::string> tokens;
      for (const auto& ex : data) tokens.insert(ex.target.begin(), ex.target.end());
      auto vocab = Vocabulary::with_reserved({tokens.begin(), tokens.end()});
      std::vector<std::vector<TokenId>> corpus;
      for (const auto& ex : data) {
        std::vector<TokenId> ids;
        for (const auto& t : ex.target) ids.push_back(vocab.id_or_unk(t));
        corpus.push_back(std::move(ids));
      }
      const auto model = NgramModel::train(vocab, corpus, static_cast<int>(cfg.lm.order), smoothing_of(cfg));
      auto out = open_out(lm_out);
      model.save(out);
    } else if (sub == order) {
      const auto data = read_dataset_file(order_data);
      const auto scorer = make_scorer(cfg, order_lm);
      const auto dc = decode_of(cfg);
      const std::function<std::string(std::size_t)> run = [&](std::size_t i) {
        return join_tokens(order_sentence(data[i].input, *scorer, dc));
      };
      std::string text;
      for (const auto& line : parallel_map<std::string>(data.size(), workers, run)) text += line + '\n';
      emit(order_out, text);
    } else if (sub == eval) {
      const auto r = corpus_bleu(read_hyps(eval_hyp), read_refs(eval_ref));
      emit("", eval_json ? to_json(r).dump() + '\n' : to_text(r));
    } else if (sub == errors) {
      const auto r = lexical_errors(read_hyps(err_hyp), read_refs(err_ref), cfg.eval.bin_width);
      if (!err_csv.empty()) emit(err_csv, bins_csv(r));
      emit("", err_json ? to_json(r).dump() + '\n' : to_text(r));
    } else if (sub == sens) {
      auto seeds = cfg.sensitivity.seeds;
      if (seeds.empty()) throw UsageError("sensitivity is stochastic and needs seeds (--seeds 1..K or config sensitivity.seeds)");
      if (seeds.size() != cfg.sensitivity.k) {
        throw UsageError("sensitivity: k = " + std::to_string(cfg.sensitivity.k) + " but " + std::to_string(seeds.size()) + " seeds given");
      }
      if (seeds.size() < 2) throw UsageError("sensitivity needs k >= 2");
      const auto data = read_dataset_file(sens_data);
      const auto scorer = make_scorer(cfg, sens_lm);
      const auto dc = decode_of(cfg);
      const DecodeFn fn = [&](const std::vector<std::string>& in) { return order_sentence(in, *scorer, dc); };
      const auto r = sensitivity(data, fn, seeds, workers);
      emit("", sens_json ? to_json(r).dump() + '\n' : r.summary() + '\n');
    } else if (sub == sweep) {
      const auto data = read_dataset_file(sweep_data);
      const auto scorer = make_scorer(cfg, sweep_lm);
      std::vector<SweepMode> modes;
      for (const auto& m : cfg.sweep.modes) modes.push_back(parse_sweep_mode(m));
      const auto t = beam_sweep(data, *scorer, cfg.sweep.beams, modes, workers);
      emit("", sweep_json ? to_json(t).dump() + '\n' : t.to_text());
    } else if (sub == lin) {
      const auto seed = cfg.require_seed("linearize");
      const auto mode = parse_penman_mode(cfg.linearize.mode);
      const auto trees = read_conll_file(lin_trees);
      Segmenter seg = whole_word_segmenter();
      if (!lin_merges.empty()) seg = bpe_segmenter(BpeMerges::load_file(lin_merges));
      std::string text;
      for (std::size_t i = 0; i < trees.size(); ++i) {
        text += join_tokens(serialize_penman(trees[i], mode, derive_seed(seed, i), seg));
        if (lin_dataset) {
          std::vector<std::string> target;
          for (const auto& n : trees[i].nodes()) {
            for (auto& s : seg(n.form)) target.push_back(std::move(s));
          }
          text += '\t' + join_tokens(target);
        }
        text += '\n';
      }
      emit(lin_out, text);
    } else if (sub == part) {
      const auto seed = cfg.require_seed("sample-partial");
      const auto trees = read_conll_file(part_trees);
      Segmenter seg = whole_word_segmenter();
      if (!part_merges.empty()) seg = bpe_segmenter(BpeMerges::load_file(part_merges));
      auto target_of = [&](const DepTree& t) {
        std::vector<std::string> out;
        for (const auto& n : t.nodes()) {
          for (auto& s : seg(n.form)) out.push_back(std::move(s));
        }
        return join_tokens(out);
      };
      if (cfg.partial.p_pos.has_value() != cfg.partial.p_dep.has_value()) {
        throw UsageError("sample-partial: give both --p-pos and --p-dep, or neither for the full grid");
      }
      if (cfg.partial.p_pos) {
        std::string text;
        for (std::size_t i = 0; i < trees.size(); ++i) {
          const auto s = derive_seed(seed, i);
          const auto pt = sample_partial(trees[i], *cfg.partial.p_pos, *cfg.partial.p_dep, s);
          text += join_tokens(serialize_partial(pt, derive_seed(s, 1), seg)) + '\t' + target_of(trees[i]) + '\n';
        }
        emit(part_out, text);
      } else {
        fs::create_directories(part_out);
        std::vector<std::string> files(9);
        for (std::size_t i = 0; i < trees.size(); ++i) {
          const auto s = derive_seed(seed, i);
          const auto grid = partial_grid(trees[i], s);
          for (std::size_t c = 0; c < grid.size(); ++c) {
            files[c] += join_tokens(serialize_partial(grid[c].tree, derive_seed(s, 100 + c), seg)) + '\t' +
                        target_of(trees[i]) + '\n';
          }
        }
        static constexpr double kLevels[] = {0.0, 0.5, 1.0};
        for (std::size_t c = 0; c < 9; ++c) {
          const auto name = "pos" + fmt_level(kLevels[c / 3]) + "_dep" + fmt_level(kLevels[c % 3]) + ".tsv";
          emit((fs::path(part_out) / name).string(), files[c]);
        }
      }
    } else if (sub == ptrain) {
      const auto seed = cfg.require_seed("probe-train");
      const auto trees = read_conll_file(pt_trees);
      const auto data = make_probe_dataset(trees, read_features_file(pt_features));
      ProbeTrainLog log;
      const auto model = train_probe(data, probe_of(cfg, seed), &log);
      model.save(pt_out);
      const auto score = evaluate_probe(model, data, cfg.probe.exclude_punct);
      emit("", nlohmann::json{{"initial_loss", log.initial_loss},
                              {"epoch_loss", log.epoch_loss},
                              {"train_uuas", score.score()}}
                       .dump() +
                   '\n');
    } else if (sub == peval) {
      if (!pe_probe.empty()) {
        if (pe_features.empty() || pe_trees.empty()) throw UsageError("probe-eval --probe needs --features and --trees");
        const auto model = ProbeModel::load(pe_probe);
        const auto data = make_probe_dataset(read_conll_file(pe_trees), read_features_file(pe_features));
        const auto c = evaluate_probe(model, data, cfg.probe.exclude_punct);
        emit("", pe_json ? nlohmann::json{{"uuas", c.score()}, {"correct", c.correct}, {"total", c.total}}.dump() + '\n'
                         : "UUAS " + std::to_string(c.score()) + '\n');
      } else {
        if (pe_models.empty()) throw UsageError("probe-eval needs --probe or at least one --model NAME=DIR");
        if (pe_train_trees.empty() || pe_eval_trees.empty()) throw UsageError("probe-eval --model needs --train-trees and --eval-trees");
        const auto seed = cfg.require_seed("probe-eval");
        const auto train_trees = read_conll_file(pe_train_trees);
        const auto eval_trees = read_conll_file(pe_eval_trees);
        std::vector<ProbeSource> sources;
        for (const auto& spec : pe_models) {
          auto eq = spec.find('=');
          if (eq == std::string::npos) throw UsageError("--model expects NAME=DIR, got '" + spec + "'");
          ProbeSource src{spec.substr(0, eq), {}};
          const fs::path dir = spec.substr(eq + 1);
          for (std::size_t l = 0;; ++l) {
            const auto tr = dir / ("train.layer" + std::to_string(l) + ".jsonl");
            const auto ev = dir / ("eval.layer" + std::to_string(l) + ".jsonl");
            if (!fs::exists(tr) && !fs::exists(ev)) break;
            if (!fs::exists(tr) || !fs::exists(ev)) {
              throw std::runtime_error("missing layer file " + (fs::exists(tr) ? ev : tr).string());
            }
            src.layers.push_back({make_probe_dataset(train_trees, read_features_file(tr.string())),
                                  make_probe_dataset(eval_trees, read_features_file(ev.string()))});
          }
          if (src.layers.empty()) throw std::runtime_error("missing layer file " + (dir / "train.layer0.jsonl").string());
          sources.push_back(std::move(src));
        }
        const auto report = probe_report(sources, probe_of(cfg, seed), cfg.probe.exclude_punct, workers);
        emit("", pe_json ? report.to_json().dump() + '\n' : report.to_text());
      }
    }
    return 0;
  } catch (const UsageError& e) {
    std::cerr << nlohmann::json{{"error", e.what()}, {"command", command}, {"kind", "usage"}}.dump() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", e.what()}, {"command", command}}.dump() << '\n';
    return 1;
  }
}
