#include "retrace/cli.hpp"

#include "retrace/config.hpp"
#include "retrace/corpus.hpp"
#include "retrace/io.hpp"
#include "retrace/lexmatch.hpp"
#include "retrace/rewriter.hpp"
#include "retrace/selftalk.hpp"
#include "retrace/semantic.hpp"
#include "retrace/text.hpp"
#include "retrace/tokenprob.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <map>
#include <sstream>
#include <unordered_map>

#ifndef RETRACE_VERSION
#define RETRACE_VERSION "0.0.0"
#endif

namespace retrace::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Options {
  std::string config_path;
  int verbosity = 0;
  std::vector<std::string> positional;
  std::string out;
  std::string granularity;
  std::string thresholds;
  double tau = -1.0;
  std::string summary_out;
  std::string validation_out;
  bool baseline_summary = false;
  std::string field = "both";
  std::string lexicon;
  double fpr = -1.0;
  bool self_test = false;
  bool gap_only = false;
  std::uint64_t seed = 1;
};

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Session {
 public:
  Session(RunConfig cfg, std::ostream& out, std::ostream& err) : cfg_(std::move(cfg)), out_(out), err_(err) {}

  RunConfig& cfg() { return cfg_; }
  std::ostream& out() { return out_; }

  void log(const std::string& msg) {
    if (cfg_.verbosity > 0) err_ << msg << '\n';
  }

  /// Writes the primary report to --out (plus a manifest) or to stdout.
  void emit(const std::string& content) {
    if (!cfg_.output) {
      out_ << content;
      return;
    }
    write_file_atomic(*cfg_.output, content);
    outputs_.push_back({*cfg_.output, sha256_hex(content)});
    write_manifest(*cfg_.output);
  }

  /// A secondary report written next to the primary one.
  void emit_extra(const fs::path& path, const std::string& content) {
    write_file_atomic(path, content);
    outputs_.push_back({path, sha256_hex(content)});
    write_manifest(path);
  }

  void add_input(const fs::path& path) {
    for (const auto& [p, h] : inputs_) {
      if (p == path) return;
    }
    inputs_.emplace_back(path, sha256_hex(read_file(path)));
  }

 private:
  void write_manifest(const fs::path& report) {
    json in = json::array();
    for (const auto& [p, h] : inputs_) in.push_back({{"path", p.string()}, {"sha256", h}});
    json outs = json::array();
    for (const auto& [p, h] : outputs_) outs.push_back({{"path", p.string()}, {"sha256", h}});
    json manifest = {{"tool", "retrace"},
                     {"version", RETRACE_VERSION},
                     {"subcommand", cfg_.subcommand},
                     {"created_at", utc_timestamp()},
                     {"config", json::parse(cfg_.to_json().dump())},
                     {"inputs", in},
                     {"outputs", outs}};
    fs::path path = report;
    path += ".manifest.json";
    write_file_atomic(path, manifest.dump(2) + "\n");
  }

  RunConfig cfg_;
  std::ostream& out_;
  std::ostream& err_;
  std::vector<std::pair<fs::path, std::string>> inputs_;
  std::vector<std::pair<fs::path, std::string>> outputs_;
};

SelfTalkLexicon lexicon_for(Session& s) {
  if (!s.cfg().lexicon) return SelfTalkLexicon::default_lexicon();
  s.add_input(*s.cfg().lexicon);
  return SelfTalkLexicon::load(*s.cfg().lexicon);
}

Corpus load_input_corpus(Session& s, const fs::path& path) {
  s.add_input(path);
  try {
    return load_corpus(path);
  } catch (const CorpusError& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

const std::string& reformulated_of(const TraceRecord& r, const fs::path& path) {
  if (!r.reformulated) {
    throw std::runtime_error(path.string() + ": record '" + r.id + "' has no reformulated text");
  }
  return *r.reformulated;
}

// Fewest decimals (up to 9) that print every threshold exactly.
int threshold_decimals(const std::vector<double>& ts) {
  for (int d = 0; d < 9; ++d) {
    const double scale = std::pow(10.0, d);
    bool ok = true;
    for (double t : ts) ok = ok && std::abs(std::round(t * scale) / scale - t) < 1e-9;
    if (ok) return std::max(d, 2);
  }
  return 9;
}

int cmd_corpus_validate(Session& s) {
  const fs::path path = s.cfg().inputs.at(0);
  const Corpus corpus = load_input_corpus(s, path);
  std::size_t with_reform = 0;
  std::size_t blank = 0;
  for (const auto& r : corpus) {
    with_reform += r.reformulated ? 1 : 0;
    if (text::is_blank(r.reasoning)) {
      ++blank;
      s.log("warning: record '" + r.id + "' has empty reasoning");
    }
  }
  s.out() << "ok: " << corpus.size() << " records, " << with_reform << " with reformulated text, " << blank
          << " with empty reasoning\n";
  return 0;
}

int cmd_corpus_segment(Session& s) {
  const fs::path path = s.cfg().inputs.at(0);
  const Corpus corpus = load_input_corpus(s, path);
  const Granularity g = s.cfg().eval.granularity;
  std::string report;
  for (const auto& r : corpus) {
    const auto segs = segment(r.reasoning, g);
    for (std::size_t i = 0; i < segs.size(); ++i) {
      json line = {{"id", r.id},
                   {"index", i},
                   {"start", segs[i].start},
                   {"end", segs[i].end},
                   {"granularity", std::string(to_string(g))},
                   {"text", segs[i].text}};
      report += line.dump() + "\n";
    }
  }
  s.emit(report);
  return 0;
}

int cmd_rewrite_run(Session& s, const Options& o) {
  const fs::path path = s.cfg().inputs.at(0);
  const Corpus corpus = load_input_corpus(s, path);
  auto client = make_generation_client(s.cfg().generation);
  Corpus result;
  result.reserve(corpus.size());
  json validation = json::array();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& r = corpus[i];
    s.log("rewriting " + std::to_string(i + 1) + "/" + std::to_string(corpus.size()) + ": " + r.id);
    if (o.baseline_summary) {
      result.push_back(summarize_trace(r, s.cfg().rewrite, *client));
      continue;
    }
    std::vector<ValidationReport> reports;
    result.push_back(reformulate_trace(r, s.cfg().rewrite, *client, &reports));
    json chunks = json::array();
    for (const auto& v : reports) {
      json failures = json::array();
      for (const auto& f : v.failures) {
        failures.push_back(
            {{"kind", f.kind == ValidationFailure::Kind::order ? "order" : "content_loss"}, {"message", f.message}});
      }
      chunks.push_back({{"ok", v.ok}, {"content_match_ratio", v.content_match_ratio}, {"failures", failures}});
    }
    validation.push_back({{"id", r.id}, {"chunks", chunks}});
  }
  s.emit(serialize_corpus(result));
  if (!o.validation_out.empty()) s.emit_extra(o.validation_out, json{{"records", validation}}.dump(2) + "\n");
  return 0;
}

int cmd_eval_lexical(Session& s, const Options& o) {
  const auto& cfg = s.cfg();
  const fs::path orig_path = cfg.inputs.at(0);
  const fs::path reform_path = cfg.inputs.at(1);
  const Corpus orig = load_input_corpus(s, orig_path);
  const Corpus reform = load_input_corpus(s, reform_path);
  std::unordered_map<std::string, const TraceRecord*> by_id;
  for (const auto& r : orig) by_id.emplace(r.id, &r);

  std::map<std::string, std::vector<lexmatch::TracePair>> groups;
  std::vector<lexmatch::TracePair> all;
  for (const auto& r : reform) {
    auto it = by_id.find(r.id);
    if (it == by_id.end()) {
      throw std::runtime_error(reform_path.string() + ": record '" + r.id + "' has no original in " +
                               orig_path.string());
    }
    lexmatch::TracePair pair{it->second->reasoning, reformulated_of(r, reform_path)};
    groups[r.method ? r.method->name() : "unlabeled"].push_back(pair);
    all.push_back(std::move(pair));
  }
  if (all.empty()) throw std::runtime_error(reform_path.string() + ": no records to evaluate");
  if (groups.size() > 1) groups.emplace("all", all);

  std::ostringstream csv;
  csv << "threshold,method,match_ratio,n_segments\n";
  const int decimals = threshold_decimals(cfg.eval.thresholds);
  json summary = json::object();
  for (const auto& [method, pairs] : groups) {
    s.log("scoring " + std::to_string(pairs.size()) + " pairs for method " + method);
    const auto curve = lexmatch::match_curve(pairs, cfg.eval);
    curve.check();
    for (const auto& p : curve.points) {
      csv << std::fixed << std::setprecision(decimals) << p.threshold << ',' << method << ','
          << std::setprecision(6) << p.match_ratio << ',' << curve.n_segments << '\n';
    }
    if (!o.summary_out.empty()) {
      std::vector<std::vector<double>> scores;
      double sim_sum = 0.0;
      std::size_t above = 0;
      for (const auto& pair : pairs) {
        scores.push_back(lexmatch::segment_scores(segment(pair.original, cfg.eval.granularity), pair.reformulated));
        const double sim = lexmatch::indel_similarity(pair.original, pair.reformulated);
        sim_sum += sim;
        above += sim > cfg.eval.tau ? 1 : 0;
      }
      const double t[] = {cfg.eval.tau};
      const auto at_tau = lexmatch::curve_from_scores(scores, t);
      const double n = static_cast<double>(pairs.size());
      summary[method] = {{"n_pairs", pairs.size()},
                         {"n_segments", at_tau.n_segments},
                         {"match_ratio_at_tau", at_tau.points.at(0).match_ratio},
                         {"mean_trace_similarity", sim_sum / n},
                         {"share_above_tau", static_cast<double>(above) / n}};
    }
  }
  s.emit(csv.str());
  if (!o.summary_out.empty()) {
    s.emit_extra(o.summary_out, json{{"tau", cfg.eval.tau}, {"methods", summary}}.dump(2) + "\n");
  }
  return 0;
}

int cmd_eval_semantic(Session& s) {
  using semantic::Family;
  const auto& cfg = s.cfg();
  const Corpus orig = load_input_corpus(s, cfg.inputs.at(0));
  const Corpus part = load_input_corpus(s, cfg.inputs.at(1));
  const Corpus summ = load_input_corpus(s, cfg.inputs.at(2));

  auto client = make_embedding_client(cfg.embedding, cfg.embed_dim);
  std::optional<semantic::EmbeddingCache> cache;
  if (cfg.cache_dir) cache.emplace(*cfg.cache_dir);
  semantic::EmbedOptions opts;
  opts.batch_size = cfg.embed_batch_size;
  opts.max_retries = cfg.rewrite.max_retries;
  opts.retry_backoff = cfg.rewrite.retry_backoff;
  opts.cache = cache ? &*cache : nullptr;

  auto embed = [&](const Corpus& c, const fs::path& path, Family family) {
    std::vector<std::string> texts;
    std::vector<std::string> ids;
    for (const auto& r : c) {
      texts.push_back(family == Family::original ? r.reasoning : reformulated_of(r, path));
      ids.push_back(r.id);
    }
    s.log("embedding " + std::to_string(texts.size()) + " " + std::string(semantic::to_string(family)) + " texts");
    return semantic::embed_corpus(texts, ids, family, *client, opts);
  };
  const auto queries = embed(orig, cfg.inputs[0], Family::original);
  auto candidates = embed(part, cfg.inputs[1], Family::part);
  auto more = embed(summ, cfg.inputs[2], Family::summary);
  candidates.insert(candidates.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));

  const auto outcome = semantic::retrieval_eval(queries, candidates);
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json report = {
      {"model", client->model()},
      {"n_queries", outcome.n_queries},
      {"n_candidates", candidates.size()},
      {"match_ratio", {{"part", outcome.ratio(Family::part)}, {"summary", outcome.ratio(Family::summary)}}},
      {"avg_cos",
       {{"part", opt(outcome.avg_cos[static_cast<std::size_t>(Family::part)])},
        {"summary", opt(outcome.avg_cos[static_cast<std::size_t>(Family::summary)])}}},
      {"self_match_ratio", outcome.self_match_ratio},
      {"ties", outcome.ties},
  };
  s.emit(report.dump(2) + "\n");
  return 0;
}

int cmd_detect_score(Session& s, const Options& o) {
  if (o.field != "both" && o.field != "reasoning" && o.field != "reformulated") {
    throw UsageError("--field must be one of both, reasoning, reformulated");
  }
  const fs::path path = s.cfg().inputs.at(0);
  const Corpus corpus = load_input_corpus(s, path);
  const SelfTalkLexicon lexicon = lexicon_for(s);
  std::string report;
  auto line = [&](const TraceRecord& r, const char* field, const std::string& text, TraceClass label) {
    const auto tf = term_frequency(text, lexicon);
    json j = {{"id", r.id},
              {"field", field},
              {"label", std::string(to_string(label))},
              {"frequency", tf.frequency},
              {"hit_count", tf.hit_count},
              {"word_count", tf.word_count}};
    report += j.dump() + "\n";
  };
  for (const auto& r : corpus) {
    if (o.field != "reformulated") line(r, "reasoning", r.reasoning, TraceClass::original_like);
    if (o.field != "reasoning" && r.reformulated) {
      line(r, "reformulated", *r.reformulated, TraceClass::reformulated_like);
    }
  }
  s.emit(report);
  return 0;
}

int cmd_detect_eval(Session& s) {
  const fs::path path = s.cfg().inputs.at(0);
  s.add_input(path);
  std::istringstream in(read_file(path));
  std::vector<ScoredExample> examples;
  std::string raw;
  for (std::size_t n = 1; std::getline(in, raw); ++n) {
    if (text::is_blank(raw)) continue;
    try {
      const auto j = nlohmann::json::parse(raw);
      examples.push_back(
          {j.at("frequency").get<double>(), parse_trace_class(j.at("label").get<std::string>()) == TraceClass::original_like});
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ": line " + std::to_string(n) + ": " + e.what());
    }
  }
  const auto rep = classifier_metrics(std::move(examples), s.cfg().fpr_budget);
  json roc = json::array();
  for (const auto& p : rep.roc) roc.push_back({p.fpr, p.tpr});
  json report = {{"f1", rep.f1},
                 {"threshold_used", rep.threshold_used},
                 {"tpr_at_fpr", rep.tpr_at_fpr},
                 {"fpr_budget", rep.fpr_budget},
                 {"tpr_threshold", std::isfinite(rep.tpr_threshold) ? json(rep.tpr_threshold) : json(nullptr)},
                 {"n_positive", rep.n_positive},
                 {"n_negative", rep.n_negative},
                 {"roc", roc}};
  s.emit(report.dump(2) + "\n");
  return 0;
}

int cmd_probe_grad(Session& s, const Options& o) {
  if (o.self_test) {
    bool ok = true;
    for (const auto& c : gradient_self_test(o.seed)) {
      s.out() << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
      ok = ok && c.passed;
    }
    return ok ? 0 : 1;
  }
  if (s.cfg().inputs.empty()) throw UsageError("probe grad needs a probability log or --self-test");
  const fs::path path = s.cfg().inputs.at(0);
  s.add_input(path);
  const auto lines = load_prob_log(path);
  const SelfTalkLexicon lexicon = lexicon_for(s);
  const auto gaps = selftalk_prob_gap(to_observations(lines), lexicon);

  std::map<std::string, std::pair<double, double>> full;  // stage -> (sft loss, mean grad norm^2)
  if (!o.gap_only) {
    std::vector<ProbLog> logs;
    try {
      logs = to_prob_logs(lines);
    } catch (const ProbLogError& e) {
      throw std::runtime_error(path.string() + ": " + e.what() + " (use --gap-only for compact logs)");
    }
    for (const auto& log : logs) {
      double norm = 0.0;
      for (const auto& row : log.rows) norm += grad_norm_sq(row);
      full[log.stage.value_or("")] = {sft_loss(log), norm / static_cast<double>(log.rows.size())};
    }
  }
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json stages = json::array();
  for (const auto& g : gaps) {
    json j = {{"stage", g.stage},
              {"n_rows", g.n_rows},
              {"n_selftalk", g.n_selftalk},
              {"avg_all", g.avg_all},
              {"avg_selftalk", opt(g.avg_selftalk)},
              {"gap", opt(g.gap)}};
    if (auto it = full.find(g.stage); it != full.end()) {
      j["sft_loss"] = it->second.first;
      j["mean_grad_norm_sq"] = it->second.second;
    }
    stages.push_back(std::move(j));
  }
  s.emit(json{{"stages", stages}}.dump(2) + "\n");
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Reformulate reasoning traces and evaluate the reformulations.", "retrace"};
  app.set_version_flag("--version", RETRACE_VERSION);
  app.require_subcommand(1);
  app.add_option("--config", o.config_path, "Configuration file")->check(CLI::ExistingFile);
  app.add_flag("-v,--verbose", o.verbosity, "Progress messages on stderr");

  auto out_opt = [&](CLI::App* cmd, bool required) {
    auto* opt = cmd->add_option("--out", o.out, "Report path (stdout when omitted)");
    if (required) opt->required()->description("Output path");
  };

  auto* corpus = app.add_subcommand("corpus", "Corpus utilities")->require_subcommand(1);
  auto* c_validate = corpus->add_subcommand("validate", "Check a corpus file");
  c_validate->add_option("path", o.positional, "Corpus file")->required()->expected(1);
  auto* c_segment = corpus->add_subcommand("segment", "Split reasoning into segments");
  c_segment->add_option("path", o.positional, "Corpus file")->required()->expected(1);
  c_segment->add_option("--granularity", o.granularity, "sentence or step");
  out_opt(c_segment, false);

  auto* rewrite = app.add_subcommand("rewrite", "Trace reformulation")->require_subcommand(1);
  auto* r_run = rewrite->add_subcommand("run", "Reformulate every record of a corpus");
  r_run->add_option("corpus", o.positional, "Corpus file")->required()->expected(1);
  out_opt(r_run, true);
  r_run->add_flag("--baseline-summary", o.baseline_summary, "Produce segment summaries instead");
  r_run->add_option("--validation", o.validation_out, "Write per-chunk reorder validation to this path");

  auto* eval = app.add_subcommand("eval", "Similarity evaluations")->require_subcommand(1);
  auto* e_lex = eval->add_subcommand("lexical", "Fuzzy-match curve of original against reformulated traces");
  e_lex->add_option("corpora", o.positional, "Original and reformulated corpora")->required()->expected(2);
  e_lex->add_option("--granularity", o.granularity, "sentence or step");
  e_lex->add_option("--thresholds", o.thresholds, "Grid as lo:hi:step");
  e_lex->add_option("--tau", o.tau, "Similarity floor for the summary");
  e_lex->add_option("--summary", o.summary_out, "Write a per-method summary at tau to this path");
  out_opt(e_lex, false);
  auto* e_sem = eval->add_subcommand("semantic", "Embedding retrieval of originals among reformulations");
  e_sem->add_option("corpora", o.positional, "Original, part and summary corpora")->required()->expected(3);
  out_opt(e_sem, false);

  auto* detect = app.add_subcommand("detect", "Self-talk detectability")->require_subcommand(1);
  auto* d_score = detect->add_subcommand("score", "Self-talk term frequency per record");
  d_score->add_option("corpus", o.positional, "Corpus file")->required()->expected(1);
  d_score->add_option("--field", o.field, "both, reasoning or reformulated");
  d_score->add_option("--lexicon", o.lexicon, "Keyword file");
  out_opt(d_score, false);
  auto* d_eval = detect->add_subcommand("eval", "Threshold classifier metrics over scored records");
  d_eval->add_option("scored", o.positional, "Output of detect score")->required()->expected(1);
  d_eval->add_option("--fpr", o.fpr, "False-positive budget");
  out_opt(d_eval, false);

  auto* probe = app.add_subcommand("probe", "Token-gradient analysis")->require_subcommand(1);
  auto* p_grad = probe->add_subcommand("grad", "Loss, gradient norm and self-talk probability gap");
  p_grad->add_option("problog", o.positional, "Probability log")->expected(0, 1);
  p_grad->add_flag("--self-test", o.self_test, "Check the gradient formulas numerically");
  p_grad->add_flag("--gap-only", o.gap_only, "Only the probability gap (compact logs)");
  p_grad->add_option("--seed", o.seed, "Seed for --self-test");
  p_grad->add_option("--lexicon", o.lexicon, "Keyword file");
  out_opt(p_grad, false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << RETRACE_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  CLI::App* group = app.get_subcommands().at(0);
  CLI::App* cmd = group->get_subcommands().at(0);
  try {
    RunConfig cfg;
    cfg.subcommand = group->get_name() + " " + cmd->get_name();
    if (!o.config_path.empty()) apply_config_file(cfg, o.config_path);
    apply_env_overrides(cfg);
    cfg.verbosity = o.verbosity;
    for (const auto& p : o.positional) cfg.inputs.emplace_back(p);
    if (!o.out.empty()) cfg.output = o.out;
    try {
      if (!o.granularity.empty()) cfg.eval.granularity = parse_granularity(o.granularity);
      if (!o.thresholds.empty()) cfg.eval.thresholds = lexmatch::EvalConfig::parse_grid(o.thresholds);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    if (o.tau >= 0.0) cfg.eval.tau = o.tau;
    if (o.fpr >= 0.0) cfg.fpr_budget = o.fpr;
    if (!o.lexicon.empty()) cfg.lexicon = o.lexicon;
    if (!o.summary_out.empty() && o.summary_out == o.out) throw UsageError("--summary and --out must differ");
    if (!o.validation_out.empty() && o.validation_out == o.out) {
      throw UsageError("--validation and --out must differ");
    }
    cfg.validate(cmd == r_run, cmd == e_sem);

    Session s(std::move(cfg), out, err);
    if (cmd == c_validate) return cmd_corpus_validate(s);
    if (cmd == c_segment) return cmd_corpus_segment(s);
    if (cmd == r_run) return cmd_rewrite_run(s, o);
    if (cmd == e_lex) return cmd_eval_lexical(s, o);
    if (cmd == e_sem) return cmd_eval_semantic(s);
    if (cmd == d_score) return cmd_detect_score(s, o);
    if (cmd == d_eval) return cmd_detect_eval(s);
    if (cmd == p_grad) return cmd_probe_grad(s, o);
    throw UsageError("unknown subcommand");
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << cmd->help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace retrace::cli
